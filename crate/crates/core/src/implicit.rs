//! Implicit first and second order ODEs as zero-level sets in a tangent
//! chart, with the symmetry and constant-of-motion tests and the
//! Lagrangian-submanifold check for generalized Hamiltonian systems.
//!
//! Vanishing "on the equation" is decided in tiers: exact substitution
//! when constraints solve for coordinates, bounded-degree multiplier
//! matching, and seeded sampling restricted to the zero set. The deciding
//! tier is part of every verdict and `probably_zero` never upgrades.

use crate::geometry::{Chart, CoordMap, GeomError, KForm, VectorField};
use crate::symexpr::linalg::{
    match_multipliers, rank_expr_matrix, DecisionTier, IdealReducer,
};
use crate::symexpr::{Expr, ZeroCtx, ZeroError, ZeroStatus};
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum ImplicitError {
    #[error("constraint functions must be nonconstant and nonempty")]
    BadConstraints,
    #[error("sampling failed: no points found on the zero set")]
    SamplingFailed,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Zero(#[from] ZeroError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeOrder {
    First,
    Second,
}

/// An implicit ODE as the zero level set of `constraints` in a tangent
/// chart. Second-order equations live in T(TM) and carry the implicit
/// identification of the two velocity blocks.
#[derive(Debug, Clone)]
pub struct ImplicitODE {
    pub chart: Chart,
    pub constraints: Vec<Expr>,
    pub order: OdeOrder,
}

impl ImplicitODE {
    pub fn new(
        chart: &Chart,
        constraints: Vec<Expr>,
        order: OdeOrder,
    ) -> Result<ImplicitODE, ImplicitError> {
        if constraints.is_empty() {
            return Err(ImplicitError::BadConstraints);
        }
        let constraints: Vec<Expr> = constraints.into_iter().map(|c| c.normalize()).collect();
        if constraints.iter().any(|c| c.is_num()) {
            return Err(ImplicitError::BadConstraints);
        }
        if !chart.is_tangent() {
            return Err(ImplicitError::Geom(GeomError::NotTangentChart));
        }
        Ok(ImplicitODE {
            chart: chart.clone(),
            constraints,
            order,
        })
    }

    /// Graph of an explicit first-order equation `v = Gamma(x)`.
    pub fn graph(gamma: &VectorField, tm: &Chart) -> Result<ImplicitODE, ImplicitError> {
        let base = tm.base_chart().ok_or(GeomError::NotTangentChart)?;
        if *base != gamma.chart {
            return Err(ImplicitError::Geom(GeomError::NotBaseChart));
        }
        let cs = tm
            .fiber_coords()
            .iter()
            .zip(&gamma.components)
            .map(|(v, g)| (Expr::sym(v.clone()) - g.clone()).normalize())
            .collect();
        ImplicitODE::new(tm, cs, OdeOrder::First)
    }

    /// Constraints including the second-order identification `u^j = v^j`.
    pub fn effective_constraints(&self) -> Vec<Expr> {
        let mut cs = self.constraints.clone();
        if self.order == OdeOrder::Second {
            let base = self.chart.base_chart().expect("tangent chart");
            let n = base.dim() / 2;
            // base chart is TM with coords (x, v); our fibers are (u, a).
            for j in 0..n {
                let v = Expr::sym(base.fiber_coords()[j].clone());
                let u = Expr::sym(self.chart.fiber_coords()[j].clone());
                cs.push((u - v).normalize());
            }
        }
        cs
    }

    pub fn reducer(&self) -> IdealReducer {
        IdealReducer::new(&self.effective_constraints(), self.chart.coords())
    }
}

/// Verdict for a constant-of-motion or weak-vanishing test.
#[derive(Debug, Clone)]
pub struct MotionVerdict {
    pub status: ZeroStatus,
    pub tier: DecisionTier,
    /// The tested function `d_N f`.
    pub derivative: Expr,
}

/// Checks `(d_N f)|_Z = 0` for `f` on the base chart of the ambient
/// tangent chart.
pub fn check_constant_of_motion(
    z: &ImplicitODE,
    f: &Expr,
    ctx: &ZeroCtx,
) -> Result<MotionVerdict, ImplicitError> {
    let dn = crate::geometry::d_n_scalar(f, &z.chart)?;
    let reducer = z.reducer();
    let zctx = z.chart.zero_ctx(ctx);
    let v = reducer.weak_is_zero(&dn, &zctx)?;
    Ok(MotionVerdict {
        status: v.status,
        tier: v.tier,
        derivative: dn,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryStatus {
    Symmetry,
    NotSymmetry,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct SymmetryVerdict {
    pub status: SymmetryStatus,
    /// Multiplier matrix `A^a_b` with `L_{X^(N)} psi^a = A^a_b psi^b`,
    /// when the multiplier tier produced one.
    pub multiplier_matrix: Option<Vec<Vec<Expr>>>,
    /// Per-constraint Lie derivatives and how each was decided.
    pub residuals: Vec<(Expr, ZeroStatus, DecisionTier)>,
}

/// Checks whether `x` (a field on the base of the ambient chart) generates
/// an infinitesimal symmetry of the equation: every `L_{X^(N)} psi^a` must
/// vanish on the zero set.
pub fn check_symmetry(
    z: &ImplicitODE,
    x: &VectorField,
    ctx: &ZeroCtx,
) -> Result<SymmetryVerdict, ImplicitError> {
    let xn = x.tangent_lift(&z.chart)?;
    let zctx = z.chart.zero_ctx(ctx);
    let reducer = z.reducer();
    let effective = z.effective_constraints();
    let lie: Vec<Expr> = effective.iter().map(|psi| xn.apply(psi)).collect();
    // Try a joint multiplier matrix first (degree cap escalating).
    let mut matrix: Option<Vec<Vec<Expr>>> = None;
    for cap in [1i64, 2, 4] {
        let mut rows = Vec::new();
        let mut all = true;
        for l in &lie {
            match match_multipliers(l, &effective, z.chart.coords(), cap) {
                Some(row) => rows.push(row),
                None => {
                    all = false;
                    break;
                }
            }
        }
        if all {
            matrix = Some(rows);
            break;
        }
    }
    let mut residuals = Vec::new();
    let mut worst = ZeroStatus::ProvedZero;
    for l in &lie {
        let v = reducer.weak_is_zero(l, &zctx)?;
        match v.status {
            ZeroStatus::ProvedZero => {}
            ZeroStatus::ProbablyZero => {
                if worst == ZeroStatus::ProvedZero {
                    worst = ZeroStatus::ProbablyZero;
                }
            }
            ZeroStatus::ProvedNonzero => worst = ZeroStatus::ProvedNonzero,
        }
        residuals.push((l.clone(), v.status, v.tier));
    }
    let status = match worst {
        ZeroStatus::ProvedZero => SymmetryStatus::Symmetry,
        ZeroStatus::ProvedNonzero => SymmetryStatus::NotSymmetry,
        ZeroStatus::ProbablyZero => SymmetryStatus::Inconclusive,
    };
    // The multiplier matrix also certifies the symmetry exactly.
    let status = if status == SymmetryStatus::Inconclusive && matrix.is_some() {
        SymmetryStatus::Symmetry
    } else {
        status
    };
    Ok(SymmetryVerdict {
        status,
        multiplier_matrix: matrix,
        residuals,
    })
}

/// Outcome of the Lagrangian-submanifold check for a parametrized set.
#[derive(Debug, Clone)]
pub struct LagrangianVerdict {
    /// Pullback of the symplectic form vanishes.
    pub isotropic: bool,
    /// The parametrization has full rank at a generic point.
    pub full_rank: bool,
    /// Parameter count equals half the ambient dimension.
    pub half_dimensional: bool,
    pub rank: usize,
}

impl LagrangianVerdict {
    pub fn is_lagrangian(&self) -> bool {
        self.isotropic && self.full_rank && self.half_dimensional
    }
}

/// Checks that the image of `p` is a Lagrangian submanifold of
/// `(p.target, omega)`: the pullback of `omega` vanishes and the Jacobian
/// has full rank at a generic point.
pub fn check_lagrangian_submanifold(
    p: &CoordMap,
    omega: &KForm,
    ctx: &ZeroCtx,
) -> Result<LagrangianVerdict, ImplicitError> {
    let pulled = p.pullback_form(omega)?;
    let zctx = p.source.zero_ctx(ctx);
    let isotropic = pulled.is_zero(&zctx)?;
    let jac = p.jacobian();
    let (rank, _unstable) = rank_expr_matrix(&jac, &zctx)?;
    let full_rank = rank == p.source.dim();
    Ok(LagrangianVerdict {
        isotropic,
        full_rank,
        half_dimensional: 2 * p.source.dim() == p.target.dim(),
        rank,
    })
}

#[cfg(test)]
#[path = "implicit_tests.rs"]
mod tests;
