//! The Dirac-Bergmann / presymplectic constraint algorithm for singular
//! Lagrangians, on both the cotangent and the tangent bundle side:
//! kernels of the Lagrangian 2-form, constraint generations, first/second
//! class splits, lifted dynamics with free multipliers, second-order
//! sections, and the bridge operator between the two pictures.
//!
//! Rank decisions are taken at a generic point and every generation is
//! recorded in a transcript. Constraints produced by consistency
//! conditions are simplified by stripping factors that are provably
//! nonvanishing (declared assumptions, exponentials, constants) and by
//! reducing powers, which keeps the zero set unchanged.

use crate::geometry::{Chart, GeomError, KForm, Soldering, VectorField};
use crate::lagrangian::{legendre, LagError, LagrangianSystem, LegendreMap};
use crate::symexpr::linalg::{
    rank_expr_matrix, solve_expr_system, DecisionTier, IdealReducer, ZeroOracle,
};
use crate::symexpr::{Expr, Node, ZeroCtx, ZeroError, ZeroStatus};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum ConstraintError {
    #[error("consistency iteration did not reach a fixed point in {0} generations")]
    NoFixedPoint(usize),
    #[error("the system is inconsistent: constraint `{0}` reduces to a nonzero constant")]
    Inconsistent(Expr),
    #[error("primary constraints unavailable: Legendre image not computable in the fragment and none declared")]
    PrimariesUnavailable,
    #[error("declared primary constraint `{0}` does not vanish on the Legendre image")]
    BadDeclaredPrimary(Expr),
    #[error("no Hamiltonian with Phi_L^* H = E_L is available in the fragment")]
    HamiltonianUnavailable,
    #[error("field is not projectable under the Legendre fibration")]
    NotProjectable,
    #[error(transparent)]
    Lag(#[from] LagError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Zero(#[from] ZeroError),
}

/// Zero oracle that works modulo a constraint ideal.
struct WeakOracle<'a> {
    reducer: &'a IdealReducer,
    ctx: &'a ZeroCtx,
}

impl ZeroOracle for WeakOracle<'_> {
    fn status(&self, e: &Expr) -> Result<ZeroStatus, ZeroError> {
        Ok(self.reducer.weak_is_zero(e, self.ctx)?.status)
    }
}

/// One generation of constraints (generation 1 = primary / first).
#[derive(Debug, Clone)]
pub struct Generation {
    pub number: usize,
    pub constraints: Vec<Expr>,
}

/// A family of solution fields `particular + sum multiplier_i * kernel_i`.
#[derive(Debug, Clone)]
pub struct SolutionFamily {
    pub particular: VectorField,
    pub kernel: Vec<VectorField>,
    pub multipliers: Vec<String>,
}

impl SolutionFamily {
    /// The generic member, multipliers left symbolic.
    pub fn generic(&self) -> VectorField {
        let mut out = self.particular.clone();
        for (name, k) in self.multipliers.iter().zip(&self.kernel) {
            out = out.add(&k.scale(&Expr::sym(name.clone()))).unwrap();
        }
        out
    }

    /// Substitutes concrete expressions for the multipliers.
    pub fn with_multipliers(&self, values: &BTreeMap<String, Expr>) -> VectorField {
        let g = self.generic();
        VectorField::new(
            &g.chart,
            g.components.iter().map(|c| c.substitute(values)).collect(),
        )
        .unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianSide {
    pub tstarq: Chart,
    pub legendre: LegendreMap,
    /// Extension `H` of `H_0` to T*Q.
    pub hamiltonian: Expr,
    pub generations: Vec<Generation>,
    /// All independent constraints defining the final manifold M'.
    pub constraints: Vec<Expr>,
    /// First-class combinations with respect to the full set.
    pub first_class: Vec<Expr>,
    /// Indices (into `constraints`) of first-class *primary* constraints.
    pub first_class_primary: Vec<usize>,
    pub second_class: Vec<Expr>,
    /// Inverse bracket matrix of the second-class set on M'.
    pub second_class_inverse: Vec<Vec<Expr>>,
    /// Dynamics on M' with only primary first-class multipliers.
    pub dynamics: SolutionFamily,
    /// Extended family on M' with multipliers for every first-class
    /// constraint.
    pub extended_dynamics: SolutionFamily,
    pub transcript: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LagrangianSide {
    pub kernel: Vec<VectorField>,
    pub kernel_vertical: Vec<VectorField>,
    pub type_ii: bool,
    pub generations: Vec<Generation>,
    pub constraints: Vec<Expr>,
    pub solutions: SolutionFamily,
    /// For each kernel multiplier of `solutions`, the defect
    /// `S(D) - Delta` of the corresponding generic solution lies in the
    /// vertical kernel (verified at build time).
    pub transcript: Vec<String>,
}

/// Full Dirac-Bergmann record for one singular system.
#[derive(Debug, Clone)]
pub struct ConstraintLedger {
    pub hamiltonian_side: Option<HamiltonianSide>,
    pub lagrangian_side: Option<LagrangianSide>,
    pub rank_unstable: bool,
}

#[derive(Debug, Clone)]
pub struct AlgorithmOptions {
    pub max_iterations: usize,
    /// Primary constraints supplied when the Legendre image cannot be
    /// computed inside the fragment (each is validated by pullback).
    pub declared_primaries: Vec<Expr>,
    /// Optional replacement for the transported Hamiltonian.
    pub hamiltonian: Option<Expr>,
}

impl Default for AlgorithmOptions {
    fn default() -> Self {
        AlgorithmOptions {
            max_iterations: 10,
            declared_primaries: Vec::new(),
            hamiltonian: None,
        }
    }
}

// ---------------------------------------------------------------------
// Kernel decomposition
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct KernelData {
    pub kernel: Vec<VectorField>,
    pub kernel_vertical: Vec<VectorField>,
    pub type_ii: bool,
    pub rank_unstable: bool,
}

/// Bases of `ker omega_L` and its vertical part, plus the type-II test
/// (`S` restricted to the kernel surjects onto the vertical kernel).
pub fn kernel_decomposition(
    sys: &LagrangianSystem,
    ctx: &ZeroCtx,
) -> Result<KernelData, ConstraintError> {
    let zctx = sys.tq.zero_ctx(ctx);
    let n = sys.base.dim();
    // Vertical kernel: nullspace of the Hessian, as vertical fields.
    let hess_out = solve_expr_system(&sys.hessian, &vec![Expr::zero(); n], &zctx)?;
    let mut kernel_vertical = Vec::new();
    for v in &hess_out.nullspace {
        let mut comps = vec![Expr::zero(); n];
        comps.extend(v.iter().cloned());
        kernel_vertical.push(VectorField::new(&sys.tq, comps)?);
    }
    // Full kernel: nullspace of the 2-form matrix.
    let m = sys.omega.two_form_matrix();
    let out = solve_expr_system(&m, &vec![Expr::zero(); 2 * n], &zctx)?;
    let kernel: Vec<VectorField> = out
        .nullspace
        .iter()
        .map(|v| VectorField::new(&sys.tq, v.clone()))
        .collect::<Result<_, _>>()?;
    // Type II: every vertical kernel element is S(K) for a kernel K.
    // Columns: base parts of the kernel basis.
    let cols: Vec<Vec<Expr>> = kernel
        .iter()
        .map(|k| k.components[..n].to_vec())
        .collect();
    let a_mat: Vec<Vec<Expr>> = (0..n)
        .map(|row| cols.iter().map(|c| c[row].clone()).collect())
        .collect();
    let (base_rank, mut unstable) = rank_expr_matrix(&a_mat, &zctx)?;
    let mut type_ii = true;
    for kv in &kernel_vertical {
        let rhs: Vec<Expr> = kv.components[n..].to_vec();
        let solved = solve_expr_system(&a_mat, &rhs, &zctx)?;
        unstable |= solved.rank_unstable;
        if !solved.inconsistent_rows.is_empty() || solved.rank < base_rank {
            type_ii = false;
        }
    }
    unstable |= hess_out.rank_unstable || out.rank_unstable;
    Ok(KernelData {
        kernel,
        kernel_vertical,
        type_ii,
        rank_unstable: unstable,
    })
}

// ---------------------------------------------------------------------
// Constraint simplification and independence
// ---------------------------------------------------------------------

/// Strips provably nonvanishing factors (declared-nonzero expressions,
/// exponentials, rational constants) and reduces powers of the remaining
/// factors, keeping the zero set unchanged. Sums are left alone.
fn simplify_constraint(c: &Expr, ctx: &ZeroCtx) -> Expr {
    let c = c.normalize();
    if matches!(c.node(), Node::Sum(_)) {
        return c;
    }
    let mut kept: Vec<Expr> = Vec::new();
    for f in c.factors() {
        if f.is_num() {
            continue;
        }
        let (base, exp) = f.base_and_exponent();
        // Negative powers never vanish on the domain of definition.
        if let Some(r) = exp.as_rational() {
            if r < &num_rational::BigRational::from_integer(0.into()) {
                continue;
            }
        }
        if matches!(base.node(), Node::Func(crate::symexpr::Func::Exp, _)) {
            continue;
        }
        if let Ok(v) = ctx.is_zero(&base) {
            if v.status == ZeroStatus::ProvedNonzero
                && ctx
                    .assumptions
                    .iter()
                    .any(|a| match a {
                        crate::symexpr::Assumption::Nonzero(e)
                        | crate::symexpr::Assumption::Positive(e) => {
                            (e - &base).normalize().is_literal_zero()
                                || (e + &base).normalize().is_literal_zero()
                        }
                    })
            {
                continue; // declared nonvanishing
            }
        }
        kept.push(base); // reduce powers: keep the radical only
    }
    if kept.is_empty() {
        // Everything was a unit: the constraint is impossible (nonzero).
        return c;
    }
    Expr::product(kept)
}

/// Keeps only constraints that increase the generic rank of the Jacobian.
fn independent_subset(
    constraints: &[Expr],
    chart: &Chart,
    ctx: &ZeroCtx,
    transcript: &mut Vec<String>,
) -> Result<Vec<Expr>, ConstraintError> {
    let zctx = chart.zero_ctx(ctx);
    let mut kept: Vec<Expr> = Vec::new();
    for c in constraints {
        let mut jac: Vec<Vec<Expr>> = kept
            .iter()
            .chain(std::iter::once(c))
            .map(|f| chart.coords().iter().map(|x| f.diff(x)).collect())
            .collect();
        let (rank, _) = rank_expr_matrix(&jac, &zctx)?;
        jac.clear();
        if rank == kept.len() + 1 {
            kept.push(c.clone());
        } else {
            transcript.push(format!("dropped dependent constraint: {c}"));
        }
    }
    Ok(kept)
}

fn fresh_names(prefix: &str, count: usize, chart: &Chart, also: &[Expr]) -> Vec<String> {
    let mut taken: std::collections::BTreeSet<String> =
        chart.coords().iter().cloned().collect();
    for e in also {
        taken.extend(e.symbols());
    }
    let mut out = Vec::new();
    let mut i = 0usize;
    while out.len() < count {
        let cand = format!("{prefix}{i}");
        if !taken.contains(&cand) {
            out.push(cand);
        }
        i += 1;
    }
    out
}

// ---------------------------------------------------------------------
// Hamiltonian side
// ---------------------------------------------------------------------

/// Canonical Poisson bracket on a cotangent chart, computed directly.
pub fn canonical_bracket(tstarq: &Chart, f: &Expr, g: &Expr) -> Expr {
    let n = tstarq.dim() / 2;
    let mut out = Expr::zero();
    for a in 0..n {
        let q = &tstarq.base_coords()[a];
        let p = &tstarq.fiber_coords()[a];
        out = out + f.diff(q) * g.diff(p) - f.diff(p) * g.diff(q);
    }
    out.normalize()
}

pub fn hamiltonian_algorithm(
    sys: &LagrangianSystem,
    tstarq: &Chart,
    options: &AlgorithmOptions,
    ctx: &ZeroCtx,
) -> Result<HamiltonianSide, ConstraintError> {
    let mut transcript = Vec::new();
    let zctx = tstarq.zero_ctx(ctx);
    let leg = legendre(sys, tstarq, ctx)?;
    // Primary constraints: from the Legendre image, plus declared ones.
    let mut primaries: Vec<Expr> = leg
        .image_constraints
        .iter()
        .map(|c| simplify_constraint(c, &zctx))
        .collect();
    for d in &options.declared_primaries {
        let pulled = leg.pullback(d, sys);
        let v = sys.tq.zero_ctx(ctx).is_zero(&pulled)?;
        if !v.is_zeroish() {
            return Err(ConstraintError::BadDeclaredPrimary(d.clone()));
        }
        primaries.push(d.normalize());
    }
    if primaries.is_empty() && !sys.regular {
        return Err(ConstraintError::PrimariesUnavailable);
    }
    transcript.push(format!(
        "primary constraints: {}",
        join(&primaries)
    ));
    // Transported Hamiltonian.
    let hamiltonian = match &options.hamiltonian {
        Some(h) => h.normalize(),
        None => match &leg.hamiltonian {
            Some(h) => h.clone(),
            None => {
                // Homogeneous degree-one Lagrangians have E_L = 0.
                if sys.tq.zero_ctx(ctx).is_zero(&sys.energy)?.is_proved_zero() {
                    Expr::zero()
                } else {
                    return Err(ConstraintError::HamiltonianUnavailable);
                }
            }
        },
    };
    let mut constraints = independent_subset(&primaries, tstarq, ctx, &mut transcript)?;
    let n_primary = constraints.len();
    let mut generations = vec![Generation {
        number: 1,
        constraints: constraints.clone(),
    }];
    // Consistency iteration.
    let mut reached_fixed_point = false;
    for iter in 0..options.max_iterations {
        let reducer = IdealReducer::new(&constraints, tstarq.coords());
        let oracle = WeakOracle {
            reducer: &reducer,
            ctx: &zctx,
        };
        // {phi_a, H} + u^sigma {phi_a, phi0_sigma} ~ 0 on M_s.
        let mut b_matrix = Vec::new();
        let mut rhs = Vec::new();
        for phi in &constraints {
            let row: Vec<Expr> = constraints[..n_primary]
                .iter()
                .map(|p0| reducer.reduce(&canonical_bracket(tstarq, phi, p0)))
                .collect();
            b_matrix.push(row);
            rhs.push(reducer.reduce(&canonical_bracket(tstarq, &hamiltonian, phi)));
        }
        let out = solve_expr_system(&b_matrix, &rhs, &oracle)?;
        if out.inconsistent_rows.is_empty() {
            transcript.push(format!("generation {}: consistency holds", iter + 2));
            reached_fixed_point = true;
            break;
        }
        let mut new_constraints = Vec::new();
        for r in &out.inconsistent_rows {
            let s = simplify_constraint(&reducer.reduce(r), &zctx);
            if s.is_num() && !s.is_literal_zero() {
                return Err(ConstraintError::Inconsistent(s));
            }
            new_constraints.push(s);
        }
        let mut candidate = constraints.clone();
        candidate.extend(new_constraints.clone());
        let kept = independent_subset(&candidate, tstarq, ctx, &mut transcript)?;
        if kept.len() == constraints.len() {
            transcript.push(format!(
                "generation {}: no independent constraints, fixed point",
                iter + 2
            ));
            reached_fixed_point = true;
            break;
        }
        let added: Vec<Expr> = kept[constraints.len()..].to_vec();
        transcript.push(format!(
            "generation {}: added {}",
            iter + 2,
            join(&added)
        ));
        generations.push(Generation {
            number: iter + 2,
            constraints: added,
        });
        constraints = kept;
    }
    if !reached_fixed_point {
        return Err(ConstraintError::NoFixedPoint(options.max_iterations));
    }
    // Class split on the final constraint set.
    let reducer = IdealReducer::new(&constraints, tstarq.coords());
    let oracle = WeakOracle {
        reducer: &reducer,
        ctx: &zctx,
    };
    let k = constraints.len();
    let mut bracket_matrix = vec![vec![Expr::zero(); k]; k];
    for i in 0..k {
        for j in 0..k {
            bracket_matrix[i][j] =
                reducer.reduce(&canonical_bracket(tstarq, &constraints[i], &constraints[j]));
        }
    }
    transcript.push(format!("bracket matrix: {:?}", matrix_strings(&bracket_matrix)));
    let split = solve_expr_system(
        &bracket_matrix,
        &vec![Expr::zero(); k],
        &oracle,
    )?;
    // First-class combinations: nullspace of the bracket matrix.
    let mut first_class = Vec::new();
    let mut first_class_primary = Vec::new();
    for v in &split.nullspace {
        let mut combo = Expr::zero();
        for (i, c) in v.iter().enumerate() {
            combo = combo + c.clone() * constraints[i].clone();
        }
        let combo = combo.normalize();
        first_class.push(combo);
        // A nullspace vector touching only primary indices lifts a
        // primary first-class constraint.
        let primary_only = v
            .iter()
            .enumerate()
            .all(|(i, c)| i < n_primary || c.is_literal_zero());
        if primary_only {
            first_class_primary.push(first_class.len() - 1);
        }
    }
    // Second class: pivot columns of the bracket matrix.
    let second_class: Vec<Expr> = split
        .pivot_cols
        .iter()
        .map(|&i| constraints[i].clone())
        .collect();
    let second_class_inverse = if second_class.is_empty() {
        Vec::new()
    } else {
        let m: Vec<Vec<Expr>> = split
            .pivot_cols
            .iter()
            .map(|&i| {
                split
                    .pivot_cols
                    .iter()
                    .map(|&j| bracket_matrix[i][j].clone())
                    .collect()
            })
            .collect();
        invert_matrix(&m, &oracle)?
    };
    transcript.push(format!(
        "class split: {} first class, {} second class",
        first_class.len(),
        second_class.len()
    ));
    // Lifted dynamics on M'.
    let omega_q = crate::geometry::SymplecticForm::canonical(tstarq, ctx)?;
    let mut particular = omega_q.hamiltonian_field(&hamiltonian, ctx)?;
    // Second-class correction {theta_i, H} C^{ij} X_{theta_j}.
    for (i, ti) in second_class.iter().enumerate() {
        let coeff_i = reducer.reduce(&canonical_bracket(tstarq, ti, &hamiltonian));
        for (j, tj) in second_class.iter().enumerate() {
            let xj = omega_q.hamiltonian_field(tj, ctx)?;
            let c = (coeff_i.clone() * second_class_inverse[i][j].clone()).normalize();
            particular = particular.add(&xj.scale(&c))?;
        }
    }
    let primary_fc: Vec<Expr> = first_class_primary
        .iter()
        .map(|&i| first_class[i].clone())
        .collect();
    let other_fc: Vec<Expr> = first_class
        .iter()
        .enumerate()
        .filter(|(i, _)| !first_class_primary.contains(i))
        .map(|(_, e)| e.clone())
        .collect();
    let u_names = fresh_names("u", primary_fc.len(), tstarq, &constraints);
    let w_names = fresh_names("w", other_fc.len(), tstarq, &constraints);
    let mut kernel = Vec::new();
    for f in &primary_fc {
        kernel.push(omega_q.hamiltonian_field(f, ctx)?);
    }
    let dynamics = SolutionFamily {
        particular: particular.clone(),
        kernel: kernel.clone(),
        multipliers: u_names.clone(),
    };
    let mut ext_kernel = kernel;
    for f in &other_fc {
        ext_kernel.push(omega_q.hamiltonian_field(f, ctx)?);
    }
    let mut ext_names = u_names;
    ext_names.extend(w_names);
    let extended_dynamics = SolutionFamily {
        particular,
        kernel: ext_kernel,
        multipliers: ext_names,
    };
    // Tangency: the lifted dynamics preserves every constraint on M'.
    let generic = dynamics.generic();
    for phi in &constraints {
        let v = reducer.weak_is_zero(&generic.apply(phi), &zctx)?;
        if v.status == ZeroStatus::ProvedNonzero {
            transcript.push(format!("warning: lifted dynamics not tangent at {phi}"));
        }
    }
    Ok(HamiltonianSide {
        tstarq: tstarq.clone(),
        legendre: leg,
        hamiltonian,
        generations,
        constraints,
        first_class,
        first_class_primary,
        second_class,
        second_class_inverse,
        dynamics,
        extended_dynamics,
        transcript,
    })
}

fn join(es: &[Expr]) -> String {
    es.iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn matrix_strings(m: &[Vec<Expr>]) -> Vec<Vec<String>> {
    m.iter()
        .map(|r| r.iter().map(|e| e.to_string()).collect())
        .collect()
}

fn invert_matrix<O: ZeroOracle>(
    m: &[Vec<Expr>],
    oracle: &O,
) -> Result<Vec<Vec<Expr>>, ConstraintError> {
    let n = m.len();
    let mut cols = Vec::new();
    for j in 0..n {
        let mut e = vec![Expr::zero(); n];
        e[j] = Expr::one();
        let out = solve_expr_system(m, &e, oracle)?;
        if out.rank < n {
            return Err(ConstraintError::Inconsistent(Expr::zero()));
        }
        cols.push(out.particular);
    }
    // cols[j][i] solves M x = e_j; assemble C with C[i][j] = x_i.
    let mut c = vec![vec![Expr::zero(); n]; n];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            c[i][j] = col[i].clone();
        }
    }
    Ok(c)
}

// ---------------------------------------------------------------------
// Lagrangian side
// ---------------------------------------------------------------------

pub fn lagrangian_algorithm(
    sys: &LagrangianSystem,
    options: &AlgorithmOptions,
    ctx: &ZeroCtx,
) -> Result<LagrangianSide, ConstraintError> {
    let mut transcript = Vec::new();
    let zctx = sys.tq.zero_ctx(ctx);
    let kernels = kernel_decomposition(sys, ctx)?;
    // First generation: L_K E_L for the kernel basis.
    let mut first = Vec::new();
    for k in &kernels.kernel {
        let le = k.apply(&sys.energy).normalize();
        if !zctx.is_zero(&le)?.is_zeroish() {
            first.push(simplify_constraint(&le, &zctx));
        }
    }
    let mut constraints = independent_subset(&first, &sys.tq, ctx, &mut transcript)?;
    let mut generations = Vec::new();
    if !constraints.is_empty() {
        transcript.push(format!("first generation: {}", join(&constraints)));
        generations.push(Generation {
            number: 1,
            constraints: constraints.clone(),
        });
    } else {
        transcript.push("no first-generation constraints".to_string());
    }
    // Iterate: solve i_D omega_L = d E_L mod the current ideal, then
    // require tangency of the family to the constraint set.
    let omega_matrix = sys.omega.two_form_matrix();
    let dim = sys.tq.dim();
    let de: Vec<Expr> = {
        let d = KForm::d_scalar(&sys.tq, &sys.energy);
        d.one_form_components()
    };
    let mut solutions: Option<SolutionFamily> = None;
    let mut reached_fixed_point = false;
    for iter in 0..options.max_iterations {
        let reducer = IdealReducer::new(&constraints, sys.tq.coords());
        let oracle = WeakOracle {
            reducer: &reducer,
            ctx: &zctx,
        };
        // (i_D omega)_j = sum_i D^i Omega_ij = (dE)_j, reduced mod ideal.
        let mt: Vec<Vec<Expr>> = (0..dim)
            .map(|j| {
                (0..dim)
                    .map(|i| reducer.reduce(&omega_matrix[i][j]))
                    .collect()
            })
            .collect();
        let rhs: Vec<Expr> = de.iter().map(|e| reducer.reduce(e)).collect();
        let solve = solve_expr_system(&mt, &rhs, &oracle)?;
        if !solve.inconsistent_rows.is_empty() {
            // Should not happen: the first generation already enforced
            // solvability; treat as new constraints anyway.
            let mut candidate = constraints.clone();
            for r in &solve.inconsistent_rows {
                candidate.push(simplify_constraint(&reducer.reduce(r), &zctx));
            }
            constraints = independent_subset(&candidate, &sys.tq, ctx, &mut transcript)?;
            continue;
        }
        let particular = VectorField::new(&sys.tq, solve.particular.clone())?;
        let kernel: Vec<VectorField> = solve
            .nullspace
            .iter()
            .map(|v| VectorField::new(&sys.tq, v.clone()))
            .collect::<Result<_, _>>()?;
        // Tangency of D = particular + sum lambda_i K_i to each psi.
        let mut b_matrix = Vec::new();
        let mut t_rhs = Vec::new();
        for psi in &constraints {
            let row: Vec<Expr> = kernel
                .iter()
                .map(|k| reducer.reduce(&k.apply(psi)))
                .collect();
            b_matrix.push(row);
            t_rhs.push(reducer.reduce(&particular.apply(psi)).neg().normalize());
        }
        let tangency = solve_expr_system(&b_matrix, &t_rhs, &oracle)?;
        if tangency.inconsistent_rows.is_empty() {
            let names = fresh_names("lam", kernel.len(), &sys.tq, &constraints);
            solutions = Some(SolutionFamily {
                particular,
                kernel,
                multipliers: names,
            });
            transcript.push(format!("generation {}: tangency holds", iter + 2));
            reached_fixed_point = true;
            break;
        }
        let mut new_constraints = Vec::new();
        for r in &tangency.inconsistent_rows {
            let s = simplify_constraint(&reducer.reduce(r), &zctx);
            if s.is_num() && !s.is_literal_zero() {
                return Err(ConstraintError::Inconsistent(s));
            }
            new_constraints.push(s);
        }
        let mut candidate = constraints.clone();
        candidate.extend(new_constraints);
        let kept = independent_subset(&candidate, &sys.tq, ctx, &mut transcript)?;
        if kept.len() == constraints.len() {
            reached_fixed_point = true;
            let names = fresh_names("lam", kernel.len(), &sys.tq, &constraints);
            solutions = Some(SolutionFamily {
                particular,
                kernel,
                multipliers: names,
            });
            break;
        }
        let added: Vec<Expr> = kept[constraints.len()..].to_vec();
        transcript.push(format!("generation {}: added {}", iter + 2, join(&added)));
        generations.push(Generation {
            number: iter + 2,
            constraints: added,
        });
        constraints = kept;
    }
    if !reached_fixed_point {
        return Err(ConstraintError::NoFixedPoint(options.max_iterations));
    }
    let solutions = solutions.expect("fixed point implies a solution family");
    // (eq57): the defect S(D) - Delta of the generic solution lies in the
    // vertical kernel.
    let sold = Soldering::new(&sys.tq)?;
    let generic = solutions.generic();
    let defect = sold.apply(&generic)?.sub(&sold.liouville())?;
    let reducer = IdealReducer::new(&constraints, sys.tq.coords());
    for comp in &defect.components[..sys.base.dim()] {
        let v = reducer.weak_is_zero(comp, &zctx)?;
        if v.status == ZeroStatus::ProvedNonzero {
            transcript.push("warning: solution defect is not vertical".to_string());
        }
    }
    Ok(LagrangianSide {
        kernel: kernels.kernel,
        kernel_vertical: kernels.kernel_vertical,
        type_ii: kernels.type_ii,
        generations,
        constraints,
        solutions,
        transcript,
    })
}

/// Runs both sides.
pub fn run(
    sys: &LagrangianSystem,
    tstarq: &Chart,
    options: &AlgorithmOptions,
    ctx: &ZeroCtx,
) -> Result<ConstraintLedger, ConstraintError> {
    let hamiltonian_side = hamiltonian_algorithm(sys, tstarq, options, ctx)?;
    let lagrangian_side = lagrangian_algorithm(sys, options, ctx)?;
    Ok(ConstraintLedger {
        rank_unstable: sys.rank_unstable,
        hamiltonian_side: Some(hamiltonian_side),
        lagrangian_side: Some(lagrangian_side),
    })
}

// ---------------------------------------------------------------------
// Second-order sections
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SecondOrderSection {
    /// Velocity images of the section sigma: M' -> P'.
    pub section: Vec<Expr>,
    /// The lifted field, tangent to the section graph and second order
    /// there.
    pub lifted: VectorField,
}

/// Builds the section lift of a projected field `y` (on M', expressed in
/// T*Q coordinates) for a projectable solution `d` of the Lagrangian-side
/// problem. Verifies projectability via the pullback relation on the
/// coordinate functions of M'.
pub fn second_order_section(
    sys: &LagrangianSystem,
    ham: &HamiltonianSide,
    lag: &LagrangianSide,
    d: &VectorField,
    y: &VectorField,
    ctx: &ZeroCtx,
) -> Result<SecondOrderSection, ConstraintError> {
    let zctx = sys.tq.zero_ctx(ctx);
    let reducer = IdealReducer::new(&lag.constraints, sys.tq.coords());
    let leg = &ham.legendre;
    // Projectability: L_D (Phi^* f) = Phi^* (L_Y f) on the coordinate
    // functions of T*Q, modulo the Lagrangian-side ideal.
    let n = sys.base.dim();
    for i in 0..ham.tstarq.dim() {
        let f = Expr::sym(ham.tstarq.coord(i).to_string());
        let lhs = d.apply(&leg.pullback(&f, sys));
        let rhs = leg.pullback(&y.apply(&f), sys);
        let v = reducer.weak_is_zero(&(lhs - rhs), &zctx)?;
        if v.status == ZeroStatus::ProvedNonzero {
            return Err(ConstraintError::NotProjectable);
        }
    }
    // Section: fix the fiber coordinates to the projected velocities,
    // sigma(q) = (q, v = Y^q(q)) composed with the constraint reduction.
    let section: Vec<Expr> = (0..n)
        .map(|a| reducer.reduce(&y.components[a]))
        .collect();
    // Lift: base components from Y, fiber components Y(sigma^v).
    let mut comps: Vec<Expr> = section.clone();
    for a in 0..n {
        comps.push(y_apply_base(y, &section[a], sys));
    }
    let lifted = VectorField::new(&sys.tq, comps)?;
    Ok(SecondOrderSection { section, lifted })
}

/// Applies the base part of `y` (components on q-coordinates) to a
/// function of the base coordinates.
fn y_apply_base(y: &VectorField, f: &Expr, sys: &LagrangianSystem) -> Expr {
    let mut out = Expr::zero();
    for (a, q) in sys.base.coords().iter().enumerate() {
        out = out + y.components[a].clone() * f.diff(q);
    }
    out.normalize()
}

/// For a type-II system: completes a solution `d` to a second-order field
/// on all of TQ by adding the kernel element with `S(K) = Delta - S(D)`.
pub fn second_order_completion(
    sys: &LagrangianSystem,
    kernels: &KernelData,
    d: &VectorField,
    ctx: &ZeroCtx,
) -> Result<VectorField, ConstraintError> {
    let n = sys.base.dim();
    let zctx = sys.tq.zero_ctx(ctx);
    // Solve sum c_i (base part of K_i) = v - D_base.
    let cols: Vec<Vec<Expr>> = kernels
        .kernel
        .iter()
        .map(|k| k.components[..n].to_vec())
        .collect();
    let a_mat: Vec<Vec<Expr>> = (0..n)
        .map(|row| cols.iter().map(|c| c[row].clone()).collect())
        .collect();
    let rhs: Vec<Expr> = (0..n)
        .map(|a| {
            (Expr::sym(sys.tq.fiber_coords()[a].clone()) - d.components[a].clone()).normalize()
        })
        .collect();
    let out = solve_expr_system(&a_mat, &rhs, &zctx)?;
    if !out.inconsistent_rows.is_empty() {
        return Err(ConstraintError::NotProjectable);
    }
    let mut completed = d.clone();
    for (c, k) in out.particular.iter().zip(&kernels.kernel) {
        completed = completed.add(&k.scale(c))?;
    }
    Ok(completed)
}

// ---------------------------------------------------------------------
// The bridge operator between the pictures
// ---------------------------------------------------------------------

/// `K(f) = Phi_L^*({f, p_j}) v^j + Phi_L^*({q^j, f}) dL/dq^j`, mapping
/// functions on T*Q to functions on TQ. Hamiltonian-side constraints map
/// to Lagrangian-side constraints under it.
pub fn k_operator(
    sys: &LagrangianSystem,
    ham: &HamiltonianSide,
    f: &Expr,
) -> Expr {
    let n = sys.base.dim();
    let leg = &ham.legendre;
    let mut out = Expr::zero();
    for j in 0..n {
        let q = &ham.tstarq.base_coords()[j];
        let pj = &ham.tstarq.fiber_coords()[j];
        // {f, p_j} = df/dq^j, {q^j, f} = df/dp_j
        let a = leg.pullback(&f.diff(q), sys);
        let b = leg.pullback(&f.diff(pj), sys);
        out = out
            + a * Expr::sym(sys.tq.fiber_coords()[j].clone())
            + b * sys.lagrangian.diff(sys.base.coord(j));
    }
    out.normalize()
}

/// Vertical fields `K_mu = Phi^*({q^j, phi~_mu}) d/dv^j` spanned by the
/// primary first-class constraints; used by the singular Noether test.
pub fn gauge_kernel_fields(
    sys: &LagrangianSystem,
    ham: &HamiltonianSide,
) -> Vec<VectorField> {
    let n = sys.base.dim();
    let leg = &ham.legendre;
    let mut out = Vec::new();
    for &idx in &ham.first_class_primary {
        let phi = &ham.first_class[idx];
        let mut comps = vec![Expr::zero(); n];
        for j in 0..n {
            let pj = &ham.tstarq.fiber_coords()[j];
            comps.push(leg.pullback(&phi.diff(pj), sys));
        }
        out.push(VectorField::new(&sys.tq, comps).unwrap());
    }
    out
}

/// Decision-tier re-export used by reports.
pub type Tier = DecisionTier;

#[cfg(test)]
#[path = "constraints_tests.rs"]
mod tests;
