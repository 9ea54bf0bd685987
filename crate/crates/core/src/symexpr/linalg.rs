//! Exact linear algebra over the expression field, rational linear systems,
//! bounded-degree multiplier matching, and reduction modulo a constraint
//! ideal. Rank and nondegeneracy decisions are made "at a generic point":
//! symbolic entries are classified by the two-tier zero test, and any
//! decision that rests on a merely `probably_zero` entry is flagged.

use super::calculus::term_degree;
use super::{Expr, Node, ZeroCtx, ZeroError, ZeroStatus};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};

/// Classifies expressions as zero / nonzero for pivoting decisions.
pub trait ZeroOracle {
    fn status(&self, e: &Expr) -> Result<ZeroStatus, ZeroError>;
}

impl ZeroOracle for ZeroCtx {
    fn status(&self, e: &Expr) -> Result<ZeroStatus, ZeroError> {
        Ok(self.is_zero(e)?.status)
    }
}

#[derive(Debug, Clone)]
pub struct ExprSolveOutcome {
    pub rank: usize,
    /// Columns used as pivots, in elimination order.
    pub pivot_cols: Vec<usize>,
    /// One solution with every free variable set to zero (valid iff
    /// `inconsistent_rows` is empty).
    pub particular: Vec<Expr>,
    /// Basis of the homogeneous solution space.
    pub nullspace: Vec<Vec<Expr>>,
    /// Residuals of rows that are unsatisfiable (proved nonzero RHS over a
    /// zero LHS row). For the constraint algorithm these are exactly the
    /// new constraints generated by a consistency condition.
    pub inconsistent_rows: Vec<Expr>,
    /// True when some pivoting decision rested on a `probably_zero`
    /// classification rather than an exact one.
    pub rank_unstable: bool,
}

/// Gaussian elimination of `a x = b` with symbolic entries.
pub fn solve_expr_system<O: ZeroOracle>(
    a: &[Vec<Expr>],
    b: &[Expr],
    oracle: &O,
) -> Result<ExprSolveOutcome, ZeroError> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    assert_eq!(b.len(), rows, "rhs length mismatch");
    let mut m: Vec<Vec<Expr>> = a.to_vec();
    let mut rhs: Vec<Expr> = b.to_vec();
    let mut pivot_cols = Vec::new();
    let mut pivot_rows = Vec::new();
    let mut rank_unstable = false;
    let mut row = 0usize;
    for col in 0..cols {
        // Find a pivot that is provably nonzero; tolerate probably-zero
        // entries as zero but remember we did.
        let mut pivot = None;
        for r in row..rows {
            match oracle.status(&m[r][col])? {
                ZeroStatus::ProvedNonzero => {
                    pivot = Some(r);
                    break;
                }
                ZeroStatus::ProbablyZero => {
                    rank_unstable = true;
                }
                ZeroStatus::ProvedZero => {}
            }
        }
        let Some(p) = pivot else { continue };
        m.swap(row, p);
        rhs.swap(row, p);
        let piv = m[row][col].clone();
        for r in 0..rows {
            if r == row {
                continue;
            }
            let factor = &m[r][col] / &piv;
            if factor.is_literal_zero() {
                continue;
            }
            for c in 0..cols {
                let delta = &factor * &m[row][c];
                m[r][c] = &m[r][c] - &delta;
            }
            let delta = &factor * &rhs[row];
            rhs[r] = &rhs[r] - &delta;
        }
        pivot_cols.push(col);
        pivot_rows.push(row);
        row += 1;
        if row == rows {
            break;
        }
    }
    let rank = pivot_cols.len();
    // Inconsistent rows: zero LHS with provably nonzero RHS.
    let mut inconsistent_rows = Vec::new();
    for r in rank..rows {
        match oracle.status(&rhs[r])? {
            ZeroStatus::ProvedNonzero => inconsistent_rows.push(rhs[r].clone()),
            ZeroStatus::ProbablyZero => rank_unstable = true,
            ZeroStatus::ProvedZero => {}
        }
    }
    // Particular solution: free variables zero.
    let mut particular = vec![Expr::zero(); cols];
    for (i, &col) in pivot_cols.iter().enumerate() {
        particular[col] = (&rhs[i] / &m[i][col]).normalize();
    }
    // Nullspace basis from free columns.
    let pivot_set: BTreeSet<usize> = pivot_cols.iter().copied().collect();
    let mut nullspace = Vec::new();
    for free in 0..cols {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut v = vec![Expr::zero(); cols];
        v[free] = Expr::one();
        for (i, &col) in pivot_cols.iter().enumerate() {
            v[col] = (-(&m[i][free] / &m[i][col])).normalize();
        }
        nullspace.push(v);
    }
    Ok(ExprSolveOutcome {
        rank,
        pivot_cols,
        particular,
        nullspace,
        inconsistent_rows,
        rank_unstable,
    })
}

/// Generic-point rank of a symbolic matrix.
pub fn rank_expr_matrix<O: ZeroOracle>(
    a: &[Vec<Expr>],
    oracle: &O,
) -> Result<(usize, bool), ZeroError> {
    let rows = a.len();
    let zero_rhs = vec![Expr::zero(); rows];
    let out = solve_expr_system(a, &zero_rhs, oracle)?;
    Ok((out.rank, out.rank_unstable))
}

/// Determinant by fraction-free expansion (small matrices only).
pub fn det_expr_matrix(a: &[Vec<Expr>]) -> Expr {
    let n = a.len();
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return a[0][0].clone();
    }
    let mut det = Expr::zero();
    for (j, entry) in a[0].iter().enumerate() {
        if entry.is_literal_zero() {
            continue;
        }
        let minor: Vec<Vec<Expr>> = a[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != j)
                    .map(|(_, e)| e.clone())
                    .collect()
            })
            .collect();
        let sign = if j % 2 == 0 { 1 } else { -1 };
        let term = Expr::from_int(sign) * entry.clone() * det_expr_matrix(&minor);
        det = det + term;
    }
    det
}

// ---------------------------------------------------------------------
// Rational sparse linear systems (for multiplier-coefficient matching).
// ---------------------------------------------------------------------

type SparseRow = BTreeMap<usize, BigRational>;

/// Solves a sparse rational system; returns a particular solution with free
/// variables zero, or `None` when inconsistent.
fn solve_rational_system(
    rows: Vec<(SparseRow, BigRational)>,
    n_unknowns: usize,
) -> Option<Vec<BigRational>> {
    let mut rows = rows;
    let mut solved: Vec<(usize, SparseRow, BigRational)> = Vec::new();
    let mut used: BTreeSet<usize> = BTreeSet::new();
    loop {
        // Pick the shortest remaining nonempty row.
        rows.retain(|(r, b)| !(r.is_empty() && b.is_zero()));
        if rows.iter().any(|(r, b)| r.is_empty() && !b.is_zero()) {
            return None;
        }
        if rows.is_empty() {
            break;
        }
        rows.sort_by_key(|(r, _)| r.len());
        let (row, rhs) = rows.remove(0);
        let (&col, _) = row.iter().find(|(c, _)| !used.contains(c)).unwrap_or_else(|| {
            row.iter().next().unwrap()
        });
        let piv = row[&col].clone();
        let norm_row: SparseRow = row
            .iter()
            .map(|(c, v)| (*c, v / &piv))
            .collect();
        let norm_rhs = &rhs / &piv;
        for (r, b) in rows.iter_mut() {
            if let Some(f) = r.remove(&col) {
                for (c, v) in &norm_row {
                    if *c == col {
                        continue;
                    }
                    let entry = r.entry(*c).or_insert_with(BigRational::zero);
                    *entry -= &f * v;
                    if entry.is_zero() {
                        r.remove(c);
                    }
                }
                *b -= &f * &norm_rhs;
            }
        }
        used.insert(col);
        solved.push((col, norm_row, norm_rhs));
    }
    let mut x = vec![BigRational::zero(); n_unknowns];
    // Back-substitute in reverse order of elimination.
    for (col, row, rhs) in solved.iter().rev() {
        let mut v = rhs.clone();
        for (c, coef) in row {
            if c == col {
                continue;
            }
            v -= coef * &x[*c];
        }
        x[*col] = v;
    }
    Some(x)
}

/// All monomials in `vars` with total degree at most `cap` (normalized).
pub fn monomials_up_to(vars: &[String], cap: i64) -> Vec<Expr> {
    let mut out = vec![Expr::one()];
    let mut frontier = vec![Expr::one()];
    for _ in 0..cap {
        let mut next = Vec::new();
        for m in &frontier {
            for v in vars {
                let cand = (m.clone() * Expr::sym(v.clone())).normalize();
                if !out.contains(&cand) {
                    out.push(cand.clone());
                    next.push(cand);
                }
            }
        }
        frontier = next;
    }
    out
}

/// Attempts to write `target = sum_b lambda_b * basis_b` with each
/// `lambda_b` a polynomial of total degree `cap` in `vars`, by exact
/// linear-coefficient matching. Returns the multipliers on success.
pub fn match_multipliers(
    target: &Expr,
    basis: &[Expr],
    vars: &[String],
    cap: i64,
) -> Option<Vec<Expr>> {
    let monos = monomials_up_to(vars, cap);
    let n_unknowns = monos.len() * basis.len();
    let unknown_name = |i: usize| format!("_mm{i}");
    // residual = target - sum c_i * mono_i * basis_b
    let mut residual = target.normalize();
    for (bi, psi) in basis.iter().enumerate() {
        for (mi, m) in monos.iter().enumerate() {
            let c = Expr::sym(unknown_name(bi * monos.len() + mi));
            residual = residual - c * m.clone() * psi.clone();
        }
    }
    let (numerator, _den) = residual.clear_denominators();
    // Group terms by their unknown-free monomial part.
    let mut groups: BTreeMap<Expr, SparseRow> = BTreeMap::new();
    let mut consts: BTreeMap<Expr, BigRational> = BTreeMap::new();
    for t in numerator.terms() {
        let (coeff, mono) = t.coeff_and_monomial();
        let mut unknown: Option<usize> = None;
        let mut rest: Vec<Expr> = Vec::new();
        let mut bad = false;
        for f in mono.factors() {
            let (base, ex) = f.base_and_exponent();
            let is_unknown = matches!(base.node(), Node::Sym(s) if s.starts_with("_mm"));
            if is_unknown {
                if !ex.is_literal_one() || unknown.is_some() {
                    bad = true; // nonlinear in unknowns: cannot happen, but be safe
                    break;
                }
                let name = base.as_symbol().unwrap();
                unknown = Some(name[3..].parse().unwrap());
            } else {
                rest.push(f.clone());
            }
        }
        if bad {
            return None;
        }
        let key = Expr::product(rest);
        match unknown {
            Some(i) => {
                let row = groups.entry(key).or_default();
                let entry = row.entry(i).or_insert_with(BigRational::zero);
                *entry += coeff;
            }
            None => {
                let entry = consts.entry(key).or_insert_with(BigRational::zero);
                *entry += coeff;
            }
        }
    }
    let mut keys: BTreeSet<Expr> = groups.keys().cloned().collect();
    keys.extend(consts.keys().cloned());
    let mut rows = Vec::new();
    for k in keys {
        let row = groups.remove(&k).unwrap_or_default();
        let rhs = -consts.remove(&k).unwrap_or_else(BigRational::zero);
        rows.push((row, rhs));
    }
    let x = solve_rational_system(rows, n_unknowns)?;
    let mut lambdas = Vec::new();
    for bi in 0..basis.len() {
        let mut terms = Vec::new();
        for (mi, m) in monos.iter().enumerate() {
            let c = &x[bi * monos.len() + mi];
            if !c.is_zero() {
                terms.push(Expr::from_big(c.clone()) * m.clone());
            }
        }
        lambdas.push(Expr::sum(terms));
    }
    Some(lambdas)
}

// ---------------------------------------------------------------------
// Reduction modulo a constraint ideal.
// ---------------------------------------------------------------------

/// Which tier decided a weak-equality verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionTier {
    NormalForm,
    Substitution,
    Multiplier,
    Sampling,
}

#[derive(Debug, Clone)]
pub struct WeakVerdict {
    pub status: ZeroStatus,
    pub tier: DecisionTier,
    /// Multipliers when the multiplier tier succeeded, aligned with the
    /// reducer's original constraint list (`None` entries were handled by
    /// substitution).
    pub multipliers: Option<Vec<Option<Expr>>>,
}

/// Triangularized view of a constraint set: coordinates that can be solved
/// for exactly become substitutions, the remainder stays as residual
/// constraints handled by multiplier search or on-manifold sampling.
#[derive(Debug, Clone)]
pub struct IdealReducer {
    constraints: Vec<Expr>,
    substitutions: BTreeMap<String, Expr>,
    unsolved: Vec<Expr>,
    /// Index into `constraints` for each unsolved residual.
    unsolved_idx: Vec<usize>,
    vars: Vec<String>,
    multiplier_caps: Vec<i64>,
}

impl IdealReducer {
    /// `vars` are the coordinates multipliers may depend on (typically the
    /// chart coordinates). Constraints of the shape `a*x + rest` with `a`
    /// a nonzero rational and `x` absent from `rest` become substitutions.
    pub fn new(constraints: &[Expr], vars: &[String]) -> IdealReducer {
        let mut substitutions: BTreeMap<String, Expr> = BTreeMap::new();
        let mut unsolved = Vec::new();
        let mut unsolved_idx = Vec::new();
        for (ci, psi) in constraints.iter().enumerate() {
            let psi = psi.substitute(&substitutions);
            if psi.is_literal_zero() {
                continue;
            }
            match solve_for_some_symbol(&psi) {
                Some((x, val)) => {
                    // Keep earlier substitutions fully reduced.
                    let mut single = BTreeMap::new();
                    single.insert(x.clone(), val.clone());
                    for v in substitutions.values_mut() {
                        *v = v.substitute(&single);
                    }
                    substitutions.insert(x, val);
                }
                None => {
                    unsolved.push(psi);
                    unsolved_idx.push(ci);
                }
            }
        }
        // Reduce unsolved residuals by the final substitution map.
        let unsolved = unsolved
            .iter()
            .map(|e| e.substitute(&substitutions))
            .collect();
        IdealReducer {
            constraints: constraints.to_vec(),
            substitutions,
            unsolved,
            unsolved_idx,
            vars: vars.to_vec(),
            multiplier_caps: vec![1, 2, 4],
        }
    }

    pub fn substitutions(&self) -> &BTreeMap<String, Expr> {
        &self.substitutions
    }

    pub fn unsolved(&self) -> &[Expr] {
        &self.unsolved
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    /// Normal form of `e` modulo the solvable part of the ideal.
    pub fn reduce(&self, e: &Expr) -> Expr {
        let mut cur = e.substitute(&self.substitutions);
        for _ in 0..8 {
            let next = cur.substitute(&self.substitutions);
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }

    /// Decides whether `e` vanishes on the constraint set.
    pub fn weak_is_zero(&self, e: &Expr, ctx: &ZeroCtx) -> Result<WeakVerdict, ZeroError> {
        let r = self.reduce(e);
        if r.is_literal_zero() {
            return Ok(WeakVerdict {
                status: ZeroStatus::ProvedZero,
                tier: if self.substitutions.is_empty() {
                    DecisionTier::NormalForm
                } else {
                    DecisionTier::Substitution
                },
                multipliers: None,
            });
        }
        let (num, _) = r.clear_denominators();
        if num.is_literal_zero() {
            return Ok(WeakVerdict {
                status: ZeroStatus::ProvedZero,
                tier: DecisionTier::Substitution,
                multipliers: None,
            });
        }
        if self.unsolved.is_empty() {
            let v = ctx.is_zero(&r)?;
            return Ok(WeakVerdict {
                status: v.status,
                tier: if self.substitutions.is_empty() {
                    DecisionTier::NormalForm
                } else {
                    DecisionTier::Substitution
                },
                multipliers: None,
            });
        }
        // Bounded-degree multiplier ansatz against the unsolved residuals.
        for cap in &self.multiplier_caps {
            if let Some(ls) = match_multipliers(&r, &self.unsolved, &self.vars, *cap) {
                let mut full: Vec<Option<Expr>> = vec![None; self.constraints.len()];
                for (k, l) in ls.into_iter().enumerate() {
                    full[self.unsolved_idx[k]] = Some(l);
                }
                return Ok(WeakVerdict {
                    status: ZeroStatus::ProvedZero,
                    tier: DecisionTier::Multiplier,
                    multipliers: Some(full),
                });
            }
        }
        // Sampling restricted to the zero set.
        let status = self.sample_on_manifold(&r, ctx)?;
        Ok(WeakVerdict {
            status,
            tier: DecisionTier::Sampling,
            multipliers: None,
        })
    }

    fn sample_on_manifold(&self, e: &Expr, ctx: &ZeroCtx) -> Result<ZeroStatus, ZeroError> {
        let mut symbols: BTreeSet<String> = e.symbols();
        for c in &self.unsolved {
            symbols.extend(c.symbols());
        }
        let symbols: Vec<String> = symbols.into_iter().collect();
        let points = newton_manifold_points(
            &self.unsolved,
            &symbols,
            &ctx.assumptions,
            ctx.seed,
            ctx.n_points.min(8),
        )?;
        let mut any = false;
        for env in points {
            if let Ok(v) = e.eval_guarded(&env, 1e-6) {
                any = true;
                if v.abs() > super::zero::NONZERO_EPS * 100.0 {
                    return Ok(ZeroStatus::ProvedNonzero);
                }
            }
        }
        if !any {
            return Err(ZeroError::EvaluationDomainExhausted { draws: 0 });
        }
        Ok(ZeroStatus::ProbablyZero)
    }
}

/// Solves `psi = 0` for one symbol when `psi` is affine in it with an exact
/// rational, nonzero leading coefficient. Returns `(symbol, value)`.
fn solve_for_some_symbol(psi: &Expr) -> Option<(String, Expr)> {
    let syms: Vec<String> = psi.symbols().into_iter().collect();
    // Prefer later symbols (fiber/momentum coordinates sort after base
    // coordinates in the charts this crate builds).
    for x in syms.iter().rev() {
        let set: BTreeSet<String> = [x.clone()].into_iter().collect();
        let mut linear = Vec::new();
        let mut constant = Vec::new();
        let mut ok = true;
        for t in psi.terms() {
            match term_degree(&t, &set) {
                Some(0) => constant.push(t),
                Some(1) => linear.push(t),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || linear.is_empty() {
            continue;
        }
        let a = Expr::sum(linear).diff(x); // exact coefficient of x
        if a.depends_on(x) {
            continue;
        }
        if let Some(r) = a.as_rational() {
            if !r.is_zero() {
                let b = Expr::sum(constant);
                let val = (-(b / a.clone())).normalize();
                if !val.depends_on(x) {
                    return Some((x.clone(), val));
                }
            }
        }
    }
    None
}

/// Seeded Newton projection onto the common zero set of `constraints`.
pub fn newton_manifold_points(
    constraints: &[Expr],
    symbols: &[String],
    assumptions: &[super::Assumption],
    seed: u64,
    count: usize,
) -> Result<Vec<BTreeMap<String, f64>>, ZeroError> {
    let mut sampler = super::Sampler::new(seed ^ 0x9e37_79b9);
    let jac: Vec<Vec<Expr>> = constraints
        .iter()
        .map(|c| symbols.iter().map(|s| c.diff(s)).collect())
        .collect();
    let mut out = Vec::new();
    let mut draws = 0usize;
    let max_draws = 100 * count.max(1);
    while out.len() < count && draws < max_draws {
        draws += 1;
        let start = sampler.point(&symbols.to_vec());
        let mut x: Vec<f64> = symbols
            .iter()
            .map(|s| start[s].to_f64().unwrap())
            .collect();
        let mut converged = false;
        'newton: for _ in 0..50 {
            let env: BTreeMap<String, f64> = symbols
                .iter()
                .cloned()
                .zip(x.iter().copied())
                .collect();
            let mut fv = Vec::new();
            for c in constraints {
                match c.eval_guarded(&env, 1e-9) {
                    Ok(v) => fv.push(v),
                    Err(_) => break 'newton,
                }
            }
            let norm: f64 = fv.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                converged = true;
                break;
            }
            let mut jv = vec![vec![0.0; symbols.len()]; constraints.len()];
            for (i, row) in jac.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    match e.eval_guarded(&env, 1e-9) {
                        Ok(v) => jv[i][j] = v,
                        Err(_) => break 'newton,
                    }
                }
            }
            // Minimum-norm step: dx = J^T (J J^T)^{-1} f
            let k = constraints.len();
            let mut jjt = vec![vec![0.0; k]; k];
            for i in 0..k {
                for j in 0..k {
                    jjt[i][j] = (0..symbols.len()).map(|c| jv[i][c] * jv[j][c]).sum();
                }
            }
            let Some(y) = solve_f64(&mut jjt, &fv) else { break };
            for (j, xj) in x.iter_mut().enumerate() {
                let step: f64 = (0..k).map(|i| jv[i][j] * y[i]).sum();
                *xj -= step;
            }
        }
        if !converged {
            continue;
        }
        let env: BTreeMap<String, f64> = symbols
            .iter()
            .cloned()
            .zip(x.iter().copied())
            .collect();
        let ok = assumptions.iter().all(|a| match a {
            super::Assumption::Nonzero(e) => {
                matches!(e.eval_guarded(&env, 1e-9), Ok(v) if v.abs() > 1e-6)
            }
            super::Assumption::Positive(e) => {
                matches!(e.eval_guarded(&env, 1e-9), Ok(v) if v > 1e-6)
            }
        });
        if ok {
            out.push(env);
        }
    }
    if out.is_empty() {
        return Err(ZeroError::EvaluationDomainExhausted { draws });
    }
    Ok(out)
}

/// Dense f64 solve with partial pivoting (tiny systems only).
pub fn solve_f64(a: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut x: Vec<f64> = b.to_vec();
    for col in 0..n {
        let (p, mx) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|l, r| l.1.total_cmp(&r.1))?;
        if mx < 1e-14 {
            return None;
        }
        a.swap(col, p);
        x.swap(col, p);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    Some((0..n).map(|i| x[i] / a[i][i]).collect())
}
