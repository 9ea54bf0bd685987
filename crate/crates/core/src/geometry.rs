//! Charts, vector fields, exterior forms and the tangent-bundle calculus:
//! Cartan operations, tangent/vertical lifts, the soldering tensor and
//! Liouville field, the fiberwise operators `i_N`/`d_N`, Poisson brackets
//! of symplectic forms, and the symplectic lift to a tangent bundle.
//!
//! Everything is chart-local: a [`Chart`] is an ordered coordinate system
//! with a bundle role and a set of declared domain assumptions (expressions
//! required nonzero or positive), which feed the randomized zero tester.

use crate::symexpr::linalg::{solve_expr_system, ExprSolveOutcome};
use crate::symexpr::{Assumption, Expr, ZeroCtx, ZeroError};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum GeomError {
    #[error("charts do not match")]
    ChartMismatch,
    #[error("expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation requires a tangent chart")]
    NotTangentChart,
    #[error("operation requires a field on the base chart")]
    NotBaseChart,
    #[error("the 2-form is degenerate at a generic point (rank {rank} < {dim})")]
    DegenerateForm { rank: usize, dim: usize },
    #[error("form degree {degree} invalid here")]
    BadDegree { degree: usize },
    #[error(transparent)]
    Zero(#[from] ZeroError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChartKind {
    Base,
    /// Tangent bundle over `base`: coordinates are the base coordinates
    /// followed by one fiber (velocity) coordinate per base coordinate.
    Tangent { base: Chart },
    /// Cotangent bundle over `base` with momentum fiber coordinates.
    Cotangent { base: Chart },
}

#[derive(Debug, PartialEq, Eq)]
struct ChartData {
    coords: Vec<String>,
    kind: ChartKind,
    assumptions: Vec<Assumption>,
}

/// Ordered coordinate system with a bundle role. Cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chart(Arc<ChartData>);

impl Chart {
    pub fn base<S: Into<String>>(coords: impl IntoIterator<Item = S>) -> Chart {
        let coords: Vec<String> = coords.into_iter().map(Into::into).collect();
        assert_unique(&coords);
        Chart(Arc::new(ChartData {
            coords,
            kind: ChartKind::Base,
            assumptions: Vec::new(),
        }))
    }

    pub fn with_assumptions(&self, extra: impl IntoIterator<Item = Assumption>) -> Chart {
        let mut a = self.0.assumptions.clone();
        a.extend(extra);
        Chart(Arc::new(ChartData {
            coords: self.0.coords.clone(),
            kind: self.0.kind.clone(),
            assumptions: a,
        }))
    }

    /// Tangent chart with explicit fiber coordinate names.
    pub fn tangent_with<S: Into<String>>(&self, fibers: impl IntoIterator<Item = S>) -> Chart {
        self.derived(fibers, true)
    }

    /// Tangent chart with fiber names `v_<coord>`.
    pub fn tangent(&self) -> Chart {
        let fibers: Vec<String> = self.0.coords.iter().map(|c| format!("v_{c}")).collect();
        self.derived(fibers, true)
    }

    /// Cotangent chart with explicit momentum coordinate names.
    pub fn cotangent_with<S: Into<String>>(&self, fibers: impl IntoIterator<Item = S>) -> Chart {
        self.derived(fibers, false)
    }

    pub fn cotangent(&self) -> Chart {
        let fibers: Vec<String> = self.0.coords.iter().map(|c| format!("p_{c}")).collect();
        self.derived(fibers, false)
    }

    fn derived<S: Into<String>>(&self, fibers: impl IntoIterator<Item = S>, tangent: bool) -> Chart {
        let fibers: Vec<String> = fibers.into_iter().map(Into::into).collect();
        assert_eq!(
            fibers.len(),
            self.dim(),
            "derived chart needs one fiber coordinate per base coordinate"
        );
        let mut coords = self.0.coords.clone();
        coords.extend(fibers);
        assert_unique(&coords);
        let kind = if tangent {
            ChartKind::Tangent { base: self.clone() }
        } else {
            ChartKind::Cotangent { base: self.clone() }
        };
        Chart(Arc::new(ChartData {
            coords,
            kind,
            assumptions: self.0.assumptions.clone(),
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.0.coords
    }

    pub fn coord(&self, i: usize) -> &str {
        &self.0.coords[i]
    }

    pub fn kind(&self) -> &ChartKind {
        &self.0.kind
    }

    pub fn base_chart(&self) -> Option<&Chart> {
        match &self.0.kind {
            ChartKind::Base => None,
            ChartKind::Tangent { base } | ChartKind::Cotangent { base } => Some(base),
        }
    }

    pub fn is_tangent(&self) -> bool {
        matches!(self.0.kind, ChartKind::Tangent { .. })
    }

    pub fn is_cotangent(&self) -> bool {
        matches!(self.0.kind, ChartKind::Cotangent { .. })
    }

    /// Base-part coordinate names of a derived chart.
    pub fn base_coords(&self) -> &[String] {
        match self.base_chart() {
            Some(b) => &self.0.coords[..b.dim()],
            None => &self.0.coords,
        }
    }

    /// Fiber coordinate names of a derived chart (empty for a base chart).
    pub fn fiber_coords(&self) -> &[String] {
        match self.base_chart() {
            Some(b) => &self.0.coords[b.dim()..],
            None => &[],
        }
    }

    pub fn assumptions(&self) -> &[Assumption] {
        &self.0.assumptions
    }

    /// Zero-test context carrying this chart's domain assumptions.
    pub fn zero_ctx(&self, base: &ZeroCtx) -> ZeroCtx {
        base.with_assumptions(self.0.assumptions.iter().cloned())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.coords.iter().position(|c| c == name)
    }

    /// Validates that an expression only mentions this chart's coordinates
    /// and the given parameter symbols.
    pub fn admits(&self, e: &Expr, parameters: &[String]) -> bool {
        e.symbols()
            .iter()
            .all(|s| self.index_of(s).is_some() || parameters.iter().any(|p| p == s))
    }
}

fn assert_unique(coords: &[String]) {
    let mut seen = std::collections::BTreeSet::new();
    for c in coords {
        assert!(seen.insert(c.clone()), "duplicate coordinate name `{c}`");
    }
}

// ---------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorField {
    pub chart: Chart,
    pub components: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: &Chart, components: Vec<Expr>) -> Result<VectorField, GeomError> {
        if components.len() != chart.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: chart.dim(),
                got: components.len(),
            });
        }
        Ok(VectorField {
            chart: chart.clone(),
            components: components.into_iter().map(|c| c.normalize()).collect(),
        })
    }

    pub fn zero(chart: &Chart) -> VectorField {
        VectorField {
            chart: chart.clone(),
            components: vec![Expr::zero(); chart.dim()],
        }
    }

    /// Coordinate field `d/d<name>`.
    pub fn coordinate(chart: &Chart, name: &str) -> VectorField {
        let i = chart.index_of(name).expect("unknown coordinate");
        let mut comps = vec![Expr::zero(); chart.dim()];
        comps[i] = Expr::one();
        VectorField {
            chart: chart.clone(),
            components: comps,
        }
    }

    /// Directional derivative `X(f)`.
    pub fn apply(&self, f: &Expr) -> Expr {
        let mut out = Expr::zero();
        for (i, c) in self.components.iter().enumerate() {
            if c.is_literal_zero() {
                continue;
            }
            out = out + c.clone() * f.diff(self.chart.coord(i));
        }
        out
    }

    /// Lie bracket `[X, Y]`.
    pub fn bracket(&self, other: &VectorField) -> Result<VectorField, GeomError> {
        if self.chart != other.chart {
            return Err(GeomError::ChartMismatch);
        }
        let comps = (0..self.chart.dim())
            .map(|i| self.apply(&other.components[i]) - other.apply(&self.components[i]))
            .collect();
        VectorField::new(&self.chart, comps)
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, GeomError> {
        if self.chart != other.chart {
            return Err(GeomError::ChartMismatch);
        }
        VectorField::new(
            &self.chart,
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn scale(&self, k: &Expr) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            components: self
                .components
                .iter()
                .map(|c| (k * c).normalize())
                .collect(),
        }
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField, GeomError> {
        self.add(&other.scale(&Expr::from_int(-1)))
    }

    /// Tangent (complete) lift of a field on the base onto the given
    /// tangent chart: `X^(N) = X^a d_a + (d_N X^a) d_{v^a}`.
    pub fn tangent_lift(&self, tq: &Chart) -> Result<VectorField, GeomError> {
        let base = tq.base_chart().ok_or(GeomError::NotTangentChart)?;
        if !tq.is_tangent() || *base != self.chart {
            return Err(GeomError::NotBaseChart);
        }
        let n = base.dim();
        let mut comps = self.components.clone();
        for a in 0..n {
            let mut dn = Expr::zero();
            for b in 0..n {
                dn = dn
                    + Expr::sym(tq.fiber_coords()[b].clone())
                        * self.components[a].diff(base.coord(b));
            }
            comps.push(dn);
        }
        VectorField::new(tq, comps)
    }

    /// Vertical lift: `X^(V) = X^a d_{v^a}`.
    pub fn vertical_lift(&self, tq: &Chart) -> Result<VectorField, GeomError> {
        let base = tq.base_chart().ok_or(GeomError::NotTangentChart)?;
        if !tq.is_tangent() || *base != self.chart {
            return Err(GeomError::NotBaseChart);
        }
        let mut comps = vec![Expr::zero(); base.dim()];
        comps.extend(self.components.iter().cloned());
        VectorField::new(tq, comps)
    }

    /// Canonical (cotangent) lift onto a cotangent chart:
    /// `X~ = X^a d_{q^a} - p_b (d_a X^b) d_{p_a}`.
    pub fn cotangent_lift(&self, tstarq: &Chart) -> Result<VectorField, GeomError> {
        let base = tstarq.base_chart().ok_or(GeomError::NotTangentChart)?;
        if !tstarq.is_cotangent() || *base != self.chart {
            return Err(GeomError::NotBaseChart);
        }
        let n = base.dim();
        let mut comps = self.components.clone();
        for a in 0..n {
            let mut m = Expr::zero();
            for b in 0..n {
                m = m
                    - Expr::sym(tstarq.fiber_coords()[b].clone())
                        * self.components[b].diff(base.coord(a));
            }
            comps.push(m);
        }
        VectorField::new(tstarq, comps)
    }

    /// True when every component is literally zero after normalization.
    pub fn is_trivial(&self) -> bool {
        self.components.iter().all(|c| c.is_literal_zero())
    }

    /// All components vanish under the zero test?
    pub fn is_zero(&self, ctx: &ZeroCtx) -> Result<bool, ZeroError> {
        let ctx = self.chart.zero_ctx(ctx);
        for c in &self.components {
            if !ctx.is_zero(c)?.is_zeroish() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

// ---------------------------------------------------------------------
// Exterior forms
// ---------------------------------------------------------------------

/// Exterior k-form with coefficients indexed by strictly increasing
/// coordinate tuples; a missing tuple means a zero coefficient. Degree 0
/// is a single scalar stored at the empty tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KForm {
    pub chart: Chart,
    pub degree: usize,
    pub terms: BTreeMap<Vec<usize>, Expr>,
}

impl KForm {
    pub fn zero(chart: &Chart, degree: usize) -> KForm {
        KForm {
            chart: chart.clone(),
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(chart: &Chart, f: Expr) -> KForm {
        let mut terms = BTreeMap::new();
        let f = f.normalize();
        if !f.is_literal_zero() {
            terms.insert(Vec::new(), f);
        }
        KForm {
            chart: chart.clone(),
            degree: 0,
            terms,
        }
    }

    pub fn one_form(chart: &Chart, components: Vec<Expr>) -> Result<KForm, GeomError> {
        if components.len() != chart.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: chart.dim(),
                got: components.len(),
            });
        }
        let mut terms = BTreeMap::new();
        for (i, c) in components.into_iter().enumerate() {
            let c = c.normalize();
            if !c.is_literal_zero() {
                terms.insert(vec![i], c);
            }
        }
        Ok(KForm {
            chart: chart.clone(),
            degree: 1,
            terms,
        })
    }

    /// Inserts `coeff * dx^indices`, sorting the tuple and tracking sign.
    pub fn add_term(&mut self, indices: &[usize], coeff: Expr) {
        let Some((sorted, sign)) = sort_tuple(indices) else {
            return; // repeated index: term vanishes
        };
        let add = if sign > 0 { coeff } else { coeff.neg() };
        let cur = self.terms.get(&sorted).cloned().unwrap_or_else(Expr::zero);
        let new = (cur + add).normalize();
        if new.is_literal_zero() {
            self.terms.remove(&sorted);
        } else {
            self.terms.insert(sorted, new);
        }
    }

    pub fn coefficient(&self, indices: &[usize]) -> Expr {
        match sort_tuple(indices) {
            None => Expr::zero(),
            Some((sorted, sign)) => {
                let c = self.terms.get(&sorted).cloned().unwrap_or_else(Expr::zero);
                if sign > 0 {
                    c
                } else {
                    c.neg()
                }
            }
        }
    }

    pub fn scalar_value(&self) -> Expr {
        assert_eq!(self.degree, 0);
        self.terms.get(&Vec::new()).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn add(&self, other: &KForm) -> Result<KForm, GeomError> {
        if self.chart != other.chart || self.degree != other.degree {
            return Err(GeomError::ChartMismatch);
        }
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.add_term(idx, c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, k: &Expr) -> KForm {
        let mut out = KForm::zero(&self.chart, self.degree);
        for (idx, c) in &self.terms {
            out.add_term(idx, (k * c).normalize());
        }
        out
    }

    pub fn sub(&self, other: &KForm) -> Result<KForm, GeomError> {
        self.add(&other.scale(&Expr::from_int(-1)))
    }

    /// Exterior derivative.
    pub fn d(&self) -> KForm {
        let mut out = KForm::zero(&self.chart, self.degree + 1);
        for (idx, c) in &self.terms {
            for j in 0..self.chart.dim() {
                let dc = c.diff(self.chart.coord(j));
                if dc.is_literal_zero() {
                    continue;
                }
                let mut tuple = vec![j];
                tuple.extend(idx.iter().copied());
                out.add_term(&tuple, dc);
            }
        }
        out
    }

    /// Wedge product (graded).
    pub fn wedge(&self, other: &KForm) -> Result<KForm, GeomError> {
        if self.chart != other.chart {
            return Err(GeomError::ChartMismatch);
        }
        let mut out = KForm::zero(&self.chart, self.degree + other.degree);
        for (ia, ca) in &self.terms {
            for (ib, cb) in &other.terms {
                let mut tuple = ia.clone();
                tuple.extend(ib.iter().copied());
                out.add_term(&tuple, (ca * cb).normalize());
            }
        }
        Ok(out)
    }

    /// Interior product `i_X` (degree -1 antiderivation).
    pub fn interior(&self, x: &VectorField) -> Result<KForm, GeomError> {
        if self.chart != x.chart {
            return Err(GeomError::ChartMismatch);
        }
        if self.degree == 0 {
            return Ok(KForm::zero(&self.chart, 0));
        }
        let mut out = KForm::zero(&self.chart, self.degree - 1);
        for (idx, c) in &self.terms {
            for (m, &im) in idx.iter().enumerate() {
                let comp = &x.components[im];
                if comp.is_literal_zero() {
                    continue;
                }
                let sign = if m % 2 == 0 { 1 } else { -1 };
                let rest: Vec<usize> = idx
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != m)
                    .map(|(_, &v)| v)
                    .collect();
                out.add_term(
                    &rest,
                    (Expr::from_int(sign) * comp.clone() * c.clone()).normalize(),
                );
            }
        }
        Ok(out)
    }

    /// Cartan formula `L_X = i_X d + d i_X`.
    pub fn lie(&self, x: &VectorField) -> Result<KForm, GeomError> {
        let a = self.d().interior(x)?;
        let b = self.interior(x)?.d();
        a.add(&b)
    }

    /// All coefficients vanish (exactly or at the sampled points)?
    pub fn is_zero(&self, ctx: &ZeroCtx) -> Result<bool, ZeroError> {
        let ctx = self.chart.zero_ctx(ctx);
        for c in self.terms.values() {
            if !ctx.is_zero(c)?.is_zeroish() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_literal_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// 1-form components as a dense vector.
    pub fn one_form_components(&self) -> Vec<Expr> {
        assert_eq!(self.degree, 1);
        (0..self.chart.dim())
            .map(|i| self.coefficient(&[i]))
            .collect()
    }

    /// Antisymmetric coefficient matrix of a 2-form:
    /// `M[i][j] = omega(d_i, d_j)`.
    pub fn two_form_matrix(&self) -> Vec<Vec<Expr>> {
        assert_eq!(self.degree, 2);
        let n = self.chart.dim();
        let mut m = vec![vec![Expr::zero(); n]; n];
        for (idx, c) in &self.terms {
            let (i, j) = (idx[0], idx[1]);
            m[i][j] = c.clone();
            m[j][i] = c.neg();
        }
        m
    }

    /// Differential of a scalar.
    pub fn d_scalar(chart: &Chart, f: &Expr) -> KForm {
        KForm::scalar(chart, f.clone()).d()
    }
}

fn sort_tuple(indices: &[usize]) -> Option<(Vec<usize>, i32)> {
    let mut v: Vec<usize> = indices.to_vec();
    let mut sign = 1;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for w in v.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some((v, sign))
}

/// `(L_X S)(Y) = [X, S(Y)] - S([X, Y])` for the soldering tensor.
pub fn lie_derivative_soldering(
    x: &VectorField,
    y: &VectorField,
    sold: &Soldering,
) -> Result<VectorField, GeomError> {
    let a = x.bracket(&sold.apply(y)?)?;
    let b = sold.apply(&x.bracket(y)?)?;
    a.sub(&b)
}

// ---------------------------------------------------------------------
// Tangent-bundle tensors
// ---------------------------------------------------------------------

/// Soldering tensor `S = dx^a (x) d/dv^a` and Liouville field
/// `Delta = v^a d/dv^a` bound to a tangent chart.
#[derive(Debug, Clone)]
pub struct Soldering {
    pub chart: Chart,
}

impl Soldering {
    pub fn new(chart: &Chart) -> Result<Soldering, GeomError> {
        if !chart.is_tangent() {
            return Err(GeomError::NotTangentChart);
        }
        Ok(Soldering {
            chart: chart.clone(),
        })
    }

    fn half(&self) -> usize {
        self.chart.dim() / 2
    }

    /// `S(X)`: base components moved onto the fiber directions.
    pub fn apply(&self, x: &VectorField) -> Result<VectorField, GeomError> {
        if x.chart != self.chart {
            return Err(GeomError::ChartMismatch);
        }
        let n = self.half();
        let mut comps = vec![Expr::zero(); n];
        comps.extend(x.components[..n].iter().cloned());
        VectorField::new(&self.chart, comps)
    }

    /// Transpose action on 1-forms: `(S^t b) = b_{v^a} dx^a`.
    pub fn apply_one_form(&self, beta: &KForm) -> Result<KForm, GeomError> {
        if beta.chart != self.chart || beta.degree != 1 {
            return Err(GeomError::ChartMismatch);
        }
        let n = self.half();
        let mut comps = vec![Expr::zero(); self.chart.dim()];
        for (a, comp) in comps.iter_mut().take(n).enumerate() {
            *comp = beta.coefficient(&[n + a]);
        }
        KForm::one_form(&self.chart, comps)
    }

    /// Liouville (dilation) field.
    pub fn liouville(&self) -> VectorField {
        let n = self.half();
        let mut comps = vec![Expr::zero(); n];
        for a in 0..n {
            comps.push(Expr::sym(self.chart.fiber_coords()[a].clone()));
        }
        VectorField::new(&self.chart, comps).unwrap()
    }

    /// Nijenhuis tensor evaluated on a pair of fields:
    /// `N_S(A,B) = S(S[A,B] - [SA,B] - [A,SB]) + [SA,SB]`.
    pub fn nijenhuis(&self, a: &VectorField, b: &VectorField) -> Result<VectorField, GeomError> {
        let sa = self.apply(a)?;
        let sb = self.apply(b)?;
        let ab = a.bracket(b)?;
        let inner = self
            .apply(&ab)?
            .sub(&sa.bracket(b)?)?
            .sub(&a.bracket(&sb)?)?;
        self.apply(&inner)?.add(&sa.bracket(&sb)?)
    }

    /// Second-order test: `S(D) = Delta`.
    pub fn is_second_order(&self, d: &VectorField, ctx: &ZeroCtx) -> Result<bool, GeomError> {
        let lhs = self.apply(d)?;
        let delta = self.liouville();
        let ctx = self.chart.zero_ctx(ctx);
        for (a, b) in lhs.components.iter().zip(&delta.components) {
            if !ctx.is_zero(&(a - b))?.is_zeroish() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// A generic second-order field `v^j d_j + a^j d_{v^j}` with fresh
    /// acceleration symbols; returns the field and the symbol names.
    pub fn generic_second_order(&self, prefix: &str) -> (VectorField, Vec<String>) {
        let n = self.half();
        let mut comps: Vec<Expr> = self
            .chart
            .fiber_coords()
            .iter()
            .map(|v| Expr::sym(v.clone()))
            .collect();
        let mut names = Vec::new();
        for a in 0..n {
            let name = format!("{prefix}{a}");
            comps.push(Expr::sym(name.clone()));
            names.push(name);
        }
        (VectorField::new(&self.chart, comps).unwrap(), names)
    }
}

// ---------------------------------------------------------------------
// i_N / d_N operators
// ---------------------------------------------------------------------

/// `i_N`: degree -1 derivation from forms on the base into forms on the
/// tangent chart; annihilates functions and sends `a_j dx^j` to `v^j a_j`.
pub fn i_n(alpha: &KForm, tq: &Chart) -> Result<KForm, GeomError> {
    let base = tq.base_chart().ok_or(GeomError::NotTangentChart)?;
    if !tq.is_tangent() || *base != alpha.chart {
        return Err(GeomError::NotBaseChart);
    }
    if alpha.degree == 0 {
        return Ok(KForm::zero(tq, 0));
    }
    let n = base.dim();
    let mut out = KForm::zero(tq, alpha.degree - 1);
    for (idx, c) in &alpha.terms {
        for (m, &im) in idx.iter().enumerate() {
            let sign = if m % 2 == 0 { 1 } else { -1 };
            let rest: Vec<usize> = idx
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != m)
                .map(|(_, &v)| v)
                .collect();
            let v = Expr::sym(tq.coords()[n + im].clone());
            out.add_term(&rest, (Expr::from_int(sign) * v * c.clone()).normalize());
        }
    }
    Ok(out)
}

/// `d_N = i_N d + d i_N`, mapping base k-forms to k-forms on the tangent
/// chart.
pub fn d_n(alpha: &KForm, tq: &Chart) -> Result<KForm, GeomError> {
    let a = i_n(&alpha.d(), tq)?;
    if alpha.degree == 0 {
        // i_N annihilates functions, so only the first summand survives.
        return Ok(a);
    }
    let b = i_n(alpha, tq)?.d();
    a.add(&b)
}

/// `d_N f = v^a df/dx^a` for a scalar on the base chart.
pub fn d_n_scalar(f: &Expr, tq: &Chart) -> Result<Expr, GeomError> {
    let base = tq.base_chart().ok_or(GeomError::NotTangentChart)?;
    if !tq.is_tangent() {
        return Err(GeomError::NotTangentChart);
    }
    let mut out = Expr::zero();
    for (a, x) in base.coords().iter().enumerate() {
        out = out + Expr::sym(tq.fiber_coords()[a].clone()) * f.diff(x);
    }
    Ok(out)
}

/// A base form reinterpreted on a derived chart (the base coordinate
/// symbols remain valid there).
pub fn promote(alpha: &KForm, derived: &Chart) -> Result<KForm, GeomError> {
    let base = derived.base_chart().ok_or(GeomError::NotTangentChart)?;
    if *base != alpha.chart {
        return Err(GeomError::NotBaseChart);
    }
    let mut out = KForm::zero(derived, alpha.degree);
    for (idx, c) in &alpha.terms {
        out.add_term(idx, c.clone());
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Coordinate maps (pullbacks of functions and forms)
// ---------------------------------------------------------------------

/// A smooth map given coordinatewise: one image expression (in source
/// coordinates) per target coordinate.
#[derive(Debug, Clone)]
pub struct CoordMap {
    pub source: Chart,
    pub target: Chart,
    pub images: Vec<Expr>,
}

impl CoordMap {
    pub fn new(source: &Chart, target: &Chart, images: Vec<Expr>) -> Result<CoordMap, GeomError> {
        if images.len() != target.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: target.dim(),
                got: images.len(),
            });
        }
        Ok(CoordMap {
            source: source.clone(),
            target: target.clone(),
            images: images.into_iter().map(|e| e.normalize()).collect(),
        })
    }

    /// Pullback of a scalar: substitute target coordinates by images.
    pub fn pullback_fn(&self, f: &Expr) -> Expr {
        let mut bindings = BTreeMap::new();
        for (i, name) in self.target.coords().iter().enumerate() {
            bindings.insert(name.clone(), self.images[i].clone());
        }
        f.substitute(&bindings)
    }

    /// Pullback of a k-form.
    pub fn pullback_form(&self, omega: &KForm) -> Result<KForm, GeomError> {
        if omega.chart != self.target {
            return Err(GeomError::ChartMismatch);
        }
        if omega.degree == 0 {
            return Ok(KForm::scalar(&self.source, self.pullback_fn(&omega.scalar_value())));
        }
        // d(images[j]) as 1-forms on the source chart.
        let dimg: Vec<KForm> = self
            .images
            .iter()
            .map(|e| KForm::d_scalar(&self.source, e))
            .collect();
        let mut out = KForm::zero(&self.source, omega.degree);
        for (idx, c) in &omega.terms {
            let mut wedge = KForm::scalar(&self.source, self.pullback_fn(c));
            for &j in idx {
                wedge = wedge.wedge(&dimg[j])?;
            }
            out = out.add(&wedge)?;
        }
        Ok(out)
    }

    /// Jacobian matrix `d images[i] / d source[j]`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.images
            .iter()
            .map(|e| {
                self.source
                    .coords()
                    .iter()
                    .map(|x| e.diff(x))
                    .collect()
            })
            .collect()
    }
}

// ---------------------------------------------------------------------
// Symplectic structure
// ---------------------------------------------------------------------

/// Validated nondegenerate 2-form with Hamiltonian-field and
/// Poisson-bracket solvers.
#[derive(Debug, Clone)]
pub struct SymplecticForm {
    pub form: KForm,
    /// Nondegeneracy rested on a `probably_zero` classification somewhere.
    pub rank_unstable: bool,
}

impl SymplecticForm {
    pub fn new(form: KForm, ctx: &ZeroCtx) -> Result<SymplecticForm, GeomError> {
        if form.degree != 2 {
            return Err(GeomError::BadDegree {
                degree: form.degree,
            });
        }
        let ctx = form.chart.zero_ctx(ctx);
        let m = form.two_form_matrix();
        let (rank, unstable) = crate::symexpr::linalg::rank_expr_matrix(&m, &ctx)?;
        if rank < form.chart.dim() {
            return Err(GeomError::DegenerateForm {
                rank,
                dim: form.chart.dim(),
            });
        }
        Ok(SymplecticForm {
            form,
            rank_unstable: unstable,
        })
    }

    /// Canonical form `sum dq^a ^ dp_a` on a cotangent chart.
    pub fn canonical(tstarq: &Chart, ctx: &ZeroCtx) -> Result<SymplecticForm, GeomError> {
        if !tstarq.is_cotangent() {
            return Err(GeomError::NotTangentChart);
        }
        let n = tstarq.dim() / 2;
        let mut form = KForm::zero(tstarq, 2);
        for a in 0..n {
            form.add_term(&[a, n + a], Expr::one());
        }
        SymplecticForm::new(form, ctx)
    }

    /// Hamiltonian field: `i_X omega = df`.
    pub fn hamiltonian_field(&self, f: &Expr, ctx: &ZeroCtx) -> Result<VectorField, GeomError> {
        let df = KForm::d_scalar(&self.form.chart, f);
        self.solve_interior(&df, ctx)
    }

    /// Solves `i_X omega = alpha` for `X` (unique by nondegeneracy).
    pub fn solve_interior(&self, alpha: &KForm, ctx: &ZeroCtx) -> Result<VectorField, GeomError> {
        if alpha.chart != self.form.chart || alpha.degree != 1 {
            return Err(GeomError::ChartMismatch);
        }
        let ctx = self.form.chart.zero_ctx(ctx);
        let m = self.form.two_form_matrix();
        let n = self.form.chart.dim();
        // (i_X omega)_j = sum_i X^i M[i][j], so solve M^T X = alpha.
        let mt: Vec<Vec<Expr>> = (0..n)
            .map(|j| (0..n).map(|i| m[i][j].clone()).collect())
            .collect();
        let rhs = alpha.one_form_components();
        let out: ExprSolveOutcome = solve_expr_system(&mt, &rhs, &ctx)?;
        if !out.inconsistent_rows.is_empty() || out.rank < n {
            return Err(GeomError::DegenerateForm { rank: out.rank, dim: n });
        }
        VectorField::new(&self.form.chart, out.particular)
    }

    /// Poisson bracket `{f, g} = omega(X_f, X_g)`.
    pub fn poisson(&self, f: &Expr, g: &Expr, ctx: &ZeroCtx) -> Result<Expr, GeomError> {
        let xf = self.hamiltonian_field(f, ctx)?;
        let xg = self.hamiltonian_field(g, ctx)?;
        self.eval_on(&xf, &xg)
    }

    /// `omega(X, Y) = i_Y i_X omega`.
    pub fn eval_on(&self, x: &VectorField, y: &VectorField) -> Result<Expr, GeomError> {
        Ok(self.form.interior(x)?.interior(y)?.scalar_value())
    }
}

/// Lifted symplectic form `omega_N = d_N omega` on the tangent chart `tm`
/// of a symplectic manifold, with the potential `theta_N = -i_N omega`
/// satisfying `omega_N = -d theta_N`.
pub fn lift_symplectic(omega: &KForm, tm: &Chart) -> Result<(KForm, KForm), GeomError> {
    let omega_n = d_n(omega, tm)?;
    let theta_n = i_n(omega, tm)?.scale(&Expr::from_int(-1));
    Ok((omega_n, theta_n))
}

#[cfg(test)]
#[path = "geometry_tests.rs"]
mod tests;
