//! The Euler-Lagrange package: Cartan form, Lagrangian 2-form, energy,
//! Hessian rank at a generic point, the second-order dynamics of a regular
//! system, the Legendre transform (fiber derivative), and classification
//! of null Lagrangians into potential and gauge parts.

use crate::geometry::{Chart, CoordMap, GeomError, KForm, Soldering, VectorField};
use crate::symexpr::linalg::{rank_expr_matrix, solve_expr_system};
use crate::symexpr::{term_degree, Expr, ZeroCtx, ZeroError, ZeroStatus, ZeroVerdict};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum LagError {
    #[error("the Lagrangian system is not regular (Hessian rank {rank} of {dim})")]
    NotRegular { rank: usize, dim: usize },
    #[error("fiber inversion left the expression fragment (Lagrangian not quadratic in the velocities)")]
    NotFiberSolvable,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Zero(#[from] ZeroError),
}

/// A Lagrangian with its derived package.
#[derive(Debug, Clone)]
pub struct LagrangianSystem {
    /// Configuration chart Q.
    pub base: Chart,
    /// Tangent chart TQ carrying the Lagrangian.
    pub tq: Chart,
    pub lagrangian: Expr,
    /// Cartan 1-form `theta_L = S(dL)`.
    pub theta: KForm,
    /// Lagrangian 2-form `omega_L = -d theta_L`.
    pub omega: KForm,
    /// Energy `E_L = Delta(L) - L`.
    pub energy: Expr,
    /// Velocity Hessian `d^2 L / dv^a dv^b`.
    pub hessian: Vec<Vec<Expr>>,
    /// Hessian rank at a generic point.
    pub rank: usize,
    /// Rank classification relied on a `probably_zero` verdict somewhere.
    pub rank_unstable: bool,
    pub regular: bool,
}

impl LagrangianSystem {
    /// Builds the derived package for `l` over the tangent chart `tq`.
    pub fn build(l: &Expr, tq: &Chart, ctx: &ZeroCtx) -> Result<LagrangianSystem, LagError> {
        let base = tq
            .base_chart()
            .cloned()
            .ok_or(GeomError::NotTangentChart)?;
        let l = l.normalize();
        let sold = Soldering::new(tq)?;
        let dl = KForm::d_scalar(tq, &l);
        let theta = sold.apply_one_form(&dl)?;
        let omega = theta.d().scale(&Expr::from_int(-1));
        let delta = sold.liouville();
        let energy = (delta.apply(&l) - l.clone()).normalize();
        let n = base.dim();
        let fibers = tq.fiber_coords().to_vec();
        let mut hessian = vec![vec![Expr::zero(); n]; n];
        for a in 0..n {
            for b in 0..n {
                hessian[a][b] = l.diff(&fibers[a]).diff(&fibers[b]);
            }
        }
        let zctx = tq.zero_ctx(ctx);
        let (rank, rank_unstable) = rank_expr_matrix(&hessian, &zctx)?;
        Ok(LagrangianSystem {
            base,
            tq: tq.clone(),
            lagrangian: l,
            theta,
            omega,
            energy,
            hessian,
            rank,
            rank_unstable,
            regular: rank == n,
        })
    }

    pub fn soldering(&self) -> Soldering {
        Soldering::new(&self.tq).unwrap()
    }

    fn zctx(&self, ctx: &ZeroCtx) -> ZeroCtx {
        self.tq.zero_ctx(ctx)
    }

    /// Unique second-order field solving `i_D omega_L = d E_L` of a
    /// regular system, with the residual re-checked symbolically.
    pub fn solve_second_order_field(&self, ctx: &ZeroCtx) -> Result<VectorField, LagError> {
        if !self.regular {
            return Err(LagError::NotRegular {
                rank: self.rank,
                dim: self.base.dim(),
            });
        }
        let n = self.base.dim();
        let fibers = self.tq.fiber_coords().to_vec();
        let coords = self.tq.base_coords().to_vec();
        // H_{ks} a^k = dL/dq^s - d^2L/(dv^s dq^k) v^k
        let mut rhs = Vec::new();
        for s in 0..n {
            let mut r = self.lagrangian.diff(&coords[s]);
            for k in 0..n {
                r = r
                    - self.lagrangian.diff(&fibers[s]).diff(&coords[k])
                        * Expr::sym(fibers[k].clone());
            }
            rhs.push(r.normalize());
        }
        // Hessian is symmetric; solve H a = rhs.
        let zctx = self.zctx(ctx);
        let out = solve_expr_system(&self.hessian, &rhs, &zctx)?;
        let mut comps: Vec<Expr> = fibers.iter().map(|f| Expr::sym(f.clone())).collect();
        comps.extend(out.particular);
        let d = VectorField::new(&self.tq, comps)?;
        // Residual check: i_D omega_L - d E_L = 0.
        let res = self
            .omega
            .interior(&d)?
            .sub(&KForm::d_scalar(&self.tq, &self.energy))?;
        debug_assert!(res.is_zero(&zctx)?, "second-order residual must vanish");
        if !res.is_zero(&zctx)? {
            return Err(LagError::NotRegular {
                rank: self.rank,
                dim: n,
            });
        }
        Ok(d)
    }

    /// Admissibility of a second-order field: `L_D theta_L - dL = 0`.
    /// Returns the residual 1-form and the per-coefficient verdicts.
    pub fn check_euler_lagrange(
        &self,
        d: &VectorField,
        ctx: &ZeroCtx,
    ) -> Result<(KForm, Vec<ZeroVerdict>, bool), LagError> {
        let res = self
            .theta
            .lie(d)?
            .sub(&KForm::d_scalar(&self.tq, &self.lagrangian))?;
        let zctx = self.zctx(ctx);
        let mut verdicts = Vec::new();
        let mut ok = true;
        for i in 0..self.tq.dim() {
            let v = zctx.is_zero(&res.coefficient(&[i]))?;
            ok = ok && v.status == ZeroStatus::ProvedZero;
            verdicts.push(v);
        }
        Ok((res, verdicts, ok))
    }
}

/// Legendre transform data. `momenta[a]` is `dL/dv^a` as a function on TQ;
/// when the system is regular and at most quadratic in the velocities the
/// fiber inversion and transported Hamiltonian are available. For singular
/// quadratic systems `image_constraints` describes the range of the map
/// and `hamiltonian` the function with `Phi_L^* H = E_L`.
#[derive(Debug, Clone)]
pub struct LegendreMap {
    pub tstarq: Chart,
    pub momenta: Vec<Expr>,
    pub inverse: Option<Vec<Expr>>,
    pub hamiltonian: Option<Expr>,
    pub image_constraints: Vec<Expr>,
}

impl LegendreMap {
    /// Pullback of a function on T*Q along the Legendre map.
    pub fn pullback(&self, f: &Expr, sys: &LagrangianSystem) -> Expr {
        let mut bindings = BTreeMap::new();
        let n = sys.base.dim();
        for a in 0..n {
            bindings.insert(
                self.tstarq.fiber_coords()[a].clone(),
                self.momenta[a].clone(),
            );
        }
        f.substitute(&bindings)
    }

    /// The coordinate map TQ -> T*Q.
    pub fn coord_map(&self, sys: &LagrangianSystem) -> CoordMap {
        let mut images: Vec<Expr> = sys
            .tq
            .base_coords()
            .iter()
            .map(|c| Expr::sym(c.clone()))
            .collect();
        images.extend(self.momenta.iter().cloned());
        CoordMap::new(&sys.tq, &self.tstarq, images).unwrap()
    }
}

/// Computes the Legendre transform onto `tstarq` (a cotangent chart over
/// the same base). Fiber inversion is attempted only for Lagrangians at
/// most quadratic in the velocities.
pub fn legendre(
    sys: &LagrangianSystem,
    tstarq: &Chart,
    ctx: &ZeroCtx,
) -> Result<LegendreMap, LagError> {
    assert!(
        tstarq.is_cotangent() && tstarq.base_chart() == Some(&sys.base),
        "target must be a cotangent chart over the same base"
    );
    let n = sys.base.dim();
    let fibers = sys.tq.fiber_coords().to_vec();
    let momenta: Vec<Expr> = fibers
        .iter()
        .map(|v| sys.lagrangian.diff(v))
        .collect();
    // Quadratic check: the Hessian must not depend on the velocities.
    let quadratic = sys
        .hessian
        .iter()
        .flatten()
        .all(|h| fibers.iter().all(|v| !h.depends_on(v)));
    if !quadratic {
        if sys.regular {
            return Err(LagError::NotFiberSolvable);
        }
        return Ok(LegendreMap {
            tstarq: tstarq.clone(),
            momenta,
            inverse: None,
            hamiltonian: None,
            image_constraints: Vec::new(),
        });
    }
    // p_a = H_ab v^b + c_a(q): solve the linear system for the velocities.
    let mut rhs = Vec::new();
    for a in 0..n {
        let mut zero_v = BTreeMap::new();
        for v in &fibers {
            zero_v.insert(v.clone(), Expr::zero());
        }
        let c_a = momenta[a].substitute(&zero_v);
        rhs.push((Expr::sym(tstarq.fiber_coords()[a].clone()) - c_a).normalize());
    }
    let zctx = sys.tq.zero_ctx(ctx);
    let out = solve_expr_system(&sys.hessian, &rhs, &zctx)?;
    let image_constraints: Vec<Expr> = out
        .inconsistent_rows
        .iter()
        .map(|e| e.normalize())
        .collect();
    let partial_inverse = out.particular;
    // E_L expressed through (q, p); by L_{K^V} E_L = 0 the free velocities
    // (set to zero in the particular solution) do not appear.
    let mut bind = BTreeMap::new();
    for (a, v) in fibers.iter().enumerate() {
        bind.insert(v.clone(), partial_inverse[a].clone());
    }
    let hamiltonian = sys.energy.substitute(&bind);
    let inverse = if sys.regular {
        // Check the round trip v(q, p(q, v)) = v.
        let mut pb = BTreeMap::new();
        for (a, pname) in tstarq.fiber_coords().iter().enumerate() {
            pb.insert(pname.clone(), momenta[a].clone());
        }
        for (a, v) in fibers.iter().enumerate() {
            let round = partial_inverse[a].substitute(&pb);
            let diff = (round - Expr::sym(v.clone())).normalize();
            if !zctx.is_zero(&diff)?.is_zeroish() {
                return Err(LagError::NotFiberSolvable);
            }
        }
        Some(partial_inverse)
    } else {
        None
    };
    Ok(LegendreMap {
        tstarq: tstarq.clone(),
        momenta,
        inverse,
        hamiltonian: Some(hamiltonian),
        image_constraints,
    })
}

/// Decomposition of a Lagrangian into `pi^* f + i_N alpha + residual` by
/// velocity degree; `omega_L = 0` iff the residual vanishes and `alpha`
/// is closed.
#[derive(Debug, Clone)]
pub struct NullClassification {
    /// Pure potential part (velocity degree 0).
    pub potential: Expr,
    /// Gauge 1-form `alpha` on the base with `i_N alpha` the degree-1 part.
    pub gauge: KForm,
    /// Everything of higher degree or outside the polynomial fragment.
    pub residual: Expr,
    pub gauge_closed: ZeroStatus,
    /// Verdict for `omega_L = 0`.
    pub omega_vanishes: bool,
}

pub fn classify_null(
    l: &Expr,
    tq: &Chart,
    ctx: &ZeroCtx,
) -> Result<NullClassification, LagError> {
    let base = tq
        .base_chart()
        .cloned()
        .ok_or(GeomError::NotTangentChart)?;
    let l = l.normalize();
    let vset: std::collections::BTreeSet<String> =
        tq.fiber_coords().iter().cloned().collect();
    let mut potential = Vec::new();
    let mut linear = Vec::new();
    let mut residual = Vec::new();
    for t in l.terms() {
        match term_degree(&t, &vset) {
            Some(0) => potential.push(t),
            Some(1) => linear.push(t),
            _ => residual.push(t),
        }
    }
    let potential = Expr::sum(potential);
    let linear = Expr::sum(linear);
    // alpha_a = d(linear)/dv^a must be velocity-free to be a base 1-form.
    let mut alpha = Vec::new();
    let mut alpha_ok = true;
    for v in tq.fiber_coords() {
        let c = linear.diff(v);
        if vset.iter().any(|w| c.depends_on(w)) {
            alpha_ok = false;
        }
        alpha.push(c);
    }
    let mut residual = Expr::sum(residual);
    let gauge = if alpha_ok {
        KForm::one_form(&base, alpha)?
    } else {
        residual = (residual + linear).normalize();
        KForm::one_form(&base, vec![Expr::zero(); base.dim()])?
    };
    let zctx = tq.zero_ctx(ctx);
    let dg = gauge.d();
    let mut closed = ZeroStatus::ProvedZero;
    for c in dg.terms.values() {
        match zctx.is_zero(c)?.status {
            ZeroStatus::ProvedZero => {}
            ZeroStatus::ProbablyZero => {
                if closed == ZeroStatus::ProvedZero {
                    closed = ZeroStatus::ProbablyZero;
                }
            }
            ZeroStatus::ProvedNonzero => closed = ZeroStatus::ProvedNonzero,
        }
    }
    let sys = LagrangianSystem::build(&l, tq, ctx)?;
    let omega_vanishes = sys.omega.is_zero(&zctx)?;
    Ok(NullClassification {
        potential,
        gauge,
        residual,
        gauge_closed: closed,
        omega_vanishes,
    })
}

#[cfg(test)]
#[path = "lagrangian_tests.rs"]
mod tests;
