use super::*;
use crate::geometry::SymplecticForm;
use crate::symexpr::Assumption;

fn p(s: &str) -> Expr {
    Expr::parse_normalized(s).unwrap()
}

fn ctx() -> ZeroCtx {
    ZeroCtx::default()
}

/// L = a(q) v1^2 / 2 with a = exp(q1+q2), nonvanishing with nonvanishing
/// gradient.
fn singular_a() -> (LagrangianSystem, Chart) {
    let q = Chart::base(["q1", "q2"]);
    let tq = q.tangent_with(["v1", "v2"]);
    let sys = LagrangianSystem::build(&p("1/2*exp(q1+q2)*v1^2"), &tq, &ctx()).unwrap();
    let tsq = sys.base.cotangent_with(["p1", "p2"]);
    (sys, tsq)
}

fn proportional(a: &[Expr], b: &[Expr], zctx: &ZeroCtx) -> bool {
    // a ~ b up to one overall nonvanishing factor: all 2x2 minors vanish.
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let minor = (&a[i] * &b[j] - &a[j] * &b[i]).normalize();
            if !zctx.is_zero(&minor).unwrap().is_zeroish() {
                return false;
            }
        }
    }
    true
}

#[test]
fn kernel_decomposition_of_degenerate_kinetic_term() {
    let (sys, _) = singular_a();
    let k = kernel_decomposition(&sys, &ctx()).unwrap();
    assert_eq!(k.kernel_vertical.len(), 1);
    assert_eq!(
        k.kernel_vertical[0].components,
        vec![p("0"), p("0"), p("0"), p("1")]
    );
    assert_eq!(k.kernel.len(), 2);
    // One kernel direction is proportional to -a dq2 + v1 (d2 a) dv1.
    let a = p("exp(q1+q2)");
    let expected = [p("0"), a.neg(), (p("v1") * a.diff("q2")).normalize(), p("0")];
    let zctx = sys.tq.zero_ctx(&ctx());
    let non_vertical: Vec<_> = k
        .kernel
        .iter()
        .filter(|f| !f.components[..2].iter().all(|c| c.is_literal_zero()))
        .collect();
    assert_eq!(non_vertical.len(), 1);
    assert!(proportional(&non_vertical[0].components, &expected, &zctx));
    assert!(k.type_ii);
}

#[test]
fn regular_lagrangian_has_trivial_kernels() {
    let q = Chart::base(["q1", "q2"]);
    let tq = q.tangent_with(["v1", "v2"]);
    let sys = LagrangianSystem::build(&p("1/2*(v1^2+v2^2-q1^2-q2^2)"), &tq, &ctx()).unwrap();
    let k = kernel_decomposition(&sys, &ctx()).unwrap();
    assert!(k.kernel.is_empty());
    assert!(k.kernel_vertical.is_empty());
    assert!(k.type_ii, "vacuously type II");
}

#[test]
fn hamiltonian_algorithm_on_singular_a() {
    let (sys, tsq) = singular_a();
    let ham = hamiltonian_algorithm(&sys, &tsq, &AlgorithmOptions::default(), &ctx()).unwrap();
    // exactly: primary p2, secondary p1, no tertiary
    assert_eq!(ham.generations.len(), 2);
    assert_eq!(ham.generations[0].constraints, vec![p("p2")]);
    assert_eq!(ham.generations[1].constraints, vec![p("p1")]);
    assert_eq!(ham.constraints, vec![p("p2"), p("p1")]);
    // both first class, none second class
    assert_eq!(ham.second_class.len(), 0);
    assert_eq!(ham.first_class.len(), 2);
    assert_eq!(ham.first_class_primary.len(), 1);
    // H = p1^2 / (2 a)
    assert_eq!(ham.hamiltonian, p("1/2*p1^2*exp(q1+q2)^(-1)"));
    // Dynamics on M' = {p1 = p2 = 0}: the (eq56) family reduces to
    // B d/dq2 and the extended (eq55) family to A d/dq1 + B d/dq2.
    let reducer = crate::symexpr::linalg::IdealReducer::new(&ham.constraints, tsq.coords());
    let generic = ham.dynamics.generic();
    let reduced: Vec<Expr> = generic
        .components
        .iter()
        .map(|c| reducer.reduce(c))
        .collect();
    assert_eq!(reduced[0], p("0"));
    assert_eq!(reduced[1], Expr::sym(ham.dynamics.multipliers[0].clone()));
    assert_eq!(reduced[2], p("0"));
    assert_eq!(reduced[3], p("0"));
    let ext = ham.extended_dynamics.generic();
    let reduced: Vec<Expr> = ext
        .components
        .iter()
        .map(|c| reducer.reduce(c))
        .collect();
    assert_eq!(reduced[0], Expr::sym(ham.extended_dynamics.multipliers[1].clone()));
    assert_eq!(reduced[1], Expr::sym(ham.extended_dynamics.multipliers[0].clone()));
}

#[test]
fn lagrangian_algorithm_on_singular_a() {
    let (sys, _) = singular_a();
    let lag = lagrangian_algorithm(&sys, &AlgorithmOptions::default(), &ctx()).unwrap();
    // exactly one generation: v1 = 0
    assert_eq!(lag.generations.len(), 1);
    assert_eq!(lag.generations[0].constraints, vec![p("v1")]);
    assert_eq!(lag.constraints, vec![p("v1")]);
    // solution family: beta d/dq2 + delta d/dv2 (esL04)
    let zctx = sys.tq.zero_ctx(&ctx());
    let reducer = crate::symexpr::linalg::IdealReducer::new(&lag.constraints, sys.tq.coords());
    for c in &lag.solutions.particular.components {
        assert!(reducer.weak_is_zero(c, &zctx).unwrap().status != ZeroStatus::ProvedNonzero);
    }
    assert_eq!(lag.solutions.kernel.len(), 2);
    let mut dirs: Vec<Vec<Expr>> = lag
        .solutions
        .kernel
        .iter()
        .map(|k| k.components.iter().map(|c| reducer.reduce(c)).collect())
        .collect();
    dirs.sort_by_key(|d| format!("{d:?}"));
    assert_eq!(dirs[0], vec![p("0"), p("0"), p("0"), p("1")]);
    assert_eq!(dirs[1], vec![p("0"), p("1"), p("0"), p("0")]);
}

#[test]
fn second_order_section_reproduces_the_lifted_field() {
    let (sys, tsq) = singular_a();
    let opts = AlgorithmOptions::default();
    let ham = hamiltonian_algorithm(&sys, &tsq, &opts, &ctx()).unwrap();
    let lag = lagrangian_algorithm(&sys, &opts, &ctx()).unwrap();
    // D = beta dq2 + delta dv2 with beta = beta(q1, q2): projectable.
    let beta = p("q1*q2 + q2^2");
    let delta = p("sin(q1)");
    let d = VectorField::new(
        &sys.tq,
        vec![p("0"), beta.clone(), p("0"), delta],
    )
    .unwrap();
    let y = VectorField::new(&tsq, vec![p("0"), beta.clone(), p("0"), p("0")]).unwrap();
    let s = second_order_section(&sys, &ham, &lag, &d, &y, &ctx()).unwrap();
    // sigma fixes v2 = beta (esL05); the lift is
    // beta dq2 + beta (d beta/dq2) dv2 (the sign that makes the lift
    // tangent to the section graph).
    assert_eq!(s.section, vec![p("0"), beta.clone()]);
    let expected =
        vec![p("0"), beta.clone(), p("0"), (beta.clone() * beta.diff("q2")).normalize()];
    assert_eq!(s.lifted.components, expected);
    // Tangent to Sigma = {v1 = 0, v2 = beta}: D~(v2 - beta) = 0 there.
    let sigma_ideal = vec![p("v1"), (p("v2") - beta).normalize()];
    let reducer = crate::symexpr::linalg::IdealReducer::new(&sigma_ideal, sys.tq.coords());
    let zctx = sys.tq.zero_ctx(&ctx());
    for c in &sigma_ideal {
        let v = reducer
            .weak_is_zero(&s.lifted.apply(c), &zctx)
            .unwrap();
        assert_eq!(v.status, ZeroStatus::ProvedZero);
    }
    // Second order on Sigma and solves the presymplectic equation there.
    let sold = crate::geometry::Soldering::new(&sys.tq).unwrap();
    let sd = sold.apply(&s.lifted).unwrap();
    let delta_field = sold.liouville();
    for (a, b) in sd.components.iter().zip(&delta_field.components) {
        let v = reducer.weak_is_zero(&(a - b), &zctx).unwrap();
        assert_eq!(v.status, ZeroStatus::ProvedZero);
    }
    let residual = sys
        .omega
        .interior(&s.lifted)
        .unwrap()
        .sub(&crate::geometry::KForm::d_scalar(&sys.tq, &sys.energy))
        .unwrap();
    for i in 0..sys.tq.dim() {
        let v = reducer
            .weak_is_zero(&residual.coefficient(&[i]), &zctx)
            .unwrap();
        assert_ne!(v.status, ZeroStatus::ProvedNonzero);
    }
    // A velocity-dependent beta is not projectable.
    let bad = VectorField::new(&sys.tq, vec![p("0"), p("v2*q1"), p("0"), p("0")]).unwrap();
    let bad_y = VectorField::new(&tsq, vec![p("0"), p("v2*q1"), p("0"), p("0")]).unwrap();
    assert!(matches!(
        second_order_section(&sys, &ham, &lag, &bad, &bad_y, &ctx()),
        Err(ConstraintError::NotProjectable)
    ));
}

#[test]
fn relativistic_particle_mass_shell_is_first_class() {
    let q = Chart::base(["q0", "q1", "q2", "q3"]);
    let tq = q.tangent_with(["v0", "v1", "v2", "v3"]);
    let radicand = p("v0^2 - v1^2 - v2^2 - v3^2");
    let tq = tq.with_assumptions([
        Assumption::Positive(radicand.clone()),
        Assumption::Positive(p("m")),
    ]);
    let q = tq.base_chart().unwrap().clone();
    let l = (p("-m") * Expr::sqrt(radicand)).normalize();
    let sys = LagrangianSystem::build(&l, &tq, &ctx()).unwrap();
    assert!(!sys.regular);
    let tsq = q.cotangent_with(["p0", "p1", "p2", "p3"]);
    let opts = AlgorithmOptions {
        declared_primaries: vec![p("-p0^2 + p1^2 + p2^2 + p3^2 + m^2")],
        ..Default::default()
    };
    let ham = hamiltonian_algorithm(&sys, &tsq, &opts, &ctx()).unwrap();
    assert_eq!(ham.hamiltonian, p("0"));
    assert_eq!(ham.generations.len(), 1, "no secondary constraints");
    assert_eq!(ham.constraints.len(), 1);
    assert_eq!(ham.second_class.len(), 0);
    assert_eq!(ham.first_class.len(), 1);
    assert_eq!(ham.first_class_primary.len(), 1);
}

#[test]
fn declared_primary_must_vanish_on_the_image() {
    let (sys, tsq) = singular_a();
    let opts = AlgorithmOptions {
        declared_primaries: vec![p("p1 - 1")],
        ..Default::default()
    };
    assert!(matches!(
        hamiltonian_algorithm(&sys, &tsq, &opts, &ctx()),
        Err(ConstraintError::BadDeclaredPrimary(_))
    ));
}

#[test]
fn exact_symplectic_lagrangian_reduces_to_leaf_dynamics() {
    // L = (y vx - x vy)/2 - H(x,y) on TM for the exact symplectic
    // (M = R^2, omega = dx^dy): the algorithm produces second-class
    // constraints only and the projected dynamics matches the direct
    // Hamiltonian field of omega.
    let m = Chart::base(["x", "y"]);
    let tm = m.tangent_with(["vx", "vy"]);
    let h = p("1/2*(x^2+y^2)");
    let l = (p("1/2*(y*vx - x*vy)") - h.clone()).normalize();
    let sys = LagrangianSystem::build(&l, &tm, &ctx()).unwrap();
    assert_eq!(sys.rank, 0);
    let tsm = sys.base.cotangent_with(["px", "py"]);
    let ham = hamiltonian_algorithm(&sys, &tsm, &AlgorithmOptions::default(), &ctx()).unwrap();
    assert_eq!(ham.constraints.len(), 2);
    assert_eq!(ham.second_class.len(), 2);
    assert!(ham.first_class.is_empty());
    assert_eq!(ham.generations.len(), 1, "second class fixes multipliers, no secondaries");
    // Projected (x, y) velocities against the leaf Hamiltonian field.
    let mut leaf = crate::geometry::KForm::zero(&m, 2);
    leaf.add_term(&[0, 1], Expr::one());
    let leaf = SymplecticForm::new(leaf, &ctx()).unwrap();
    let direct = leaf.hamiltonian_field(&h, &ctx()).unwrap();
    let reducer =
        crate::symexpr::linalg::IdealReducer::new(&ham.constraints, tsm.coords());
    let lifted = ham.dynamics.generic();
    for i in 0..2 {
        assert_eq!(
            reducer.reduce(&lifted.components[i]),
            direct.components[i],
            "leaf dynamics component {i}"
        );
    }
}

#[test]
fn monopole_lagrangian_is_type_ii_with_free_fiber_direction() {
    let q = Chart::base(["r", "th", "ph", "ps"]);
    let tq = q.tangent_with(["vr", "vth", "vph", "vps"]);
    let tq = tq.with_assumptions([
        Assumption::Positive(p("r")),
        Assumption::Nonzero(p("sin(th)")),
    ]);
    let l = p("1/2*(vr^2 + r^2*vth^2 + r^2*sin(th)^2*vph^2) + lam*(vps + vph*cos(th))");
    let sys = LagrangianSystem::build(&l, &tq, &ctx()).unwrap();
    assert_eq!(sys.rank, 3);
    let k = kernel_decomposition(&sys, &ctx()).unwrap();
    // ker omega_L = span{d_ps, d_vps}
    assert_eq!(k.kernel.len(), 2);
    let mut dirs: Vec<Vec<Expr>> = k.kernel.iter().map(|f| f.components.clone()).collect();
    dirs.sort_by_key(|d| format!("{d:?}"));
    let e_ps = vec![p("0"), p("0"), p("0"), p("1"), p("0"), p("0"), p("0"), p("0")];
    let e_vps = vec![p("0"), p("0"), p("0"), p("0"), p("0"), p("0"), p("0"), p("1")];
    assert!(dirs.contains(&e_ps) && dirs.contains(&e_vps));
    assert!(k.type_ii);

    let lag = lagrangian_algorithm(&sys, &AlgorithmOptions::default(), &ctx()).unwrap();
    assert!(lag.constraints.is_empty(), "no Lagrangian constraints");
    assert_eq!(lag.solutions.kernel.len(), 2);
    // The forced part matches the Euler-Lagrange accelerations.
    let d = &lag.solutions.particular;
    let zctx = sys.tq.zero_ctx(&ctx());
    let expected = [
        ("vr", "r*vth^2 + r*sin(th)^2*vph^2"),
        (
            "vth",
            "sin(th)*cos(th)*vph^2 - 2/r*vr*vth - lam/r^2*vph*sin(th)",
        ),
        (
            "vph",
            "lam*vth/(r^2*sin(th)) - 2/r*vr*vph - 2*cos(th)/sin(th)*vth*vph",
        ),
    ];
    for (i, (vel, acc)) in expected.iter().enumerate() {
        assert_eq!(d.components[i], p(vel), "base slot {i}");
        let diff = (d.components[4 + i].clone() - p(acc)).normalize();
        assert!(
            zctx.is_zero(&diff).unwrap().is_proved_zero(),
            "acceleration {i}: got {}",
            d.components[4 + i]
        );
    }
    // ps / vps slots are free multipliers.
    assert!(d.components[3].is_literal_zero() && d.components[7].is_literal_zero());

    // Type-II completion: D~ = D + (vps - alpha) d_ps is second order on
    // all of TQ.
    let generic = lag.solutions.generic();
    let completed = second_order_completion(&sys, &k, &generic, &ctx()).unwrap();
    let sold = crate::geometry::Soldering::new(&sys.tq).unwrap();
    assert!(sold.is_second_order(&completed, &ctx()).unwrap());
    // and still solves the presymplectic equation
    let residual = sys
        .omega
        .interior(&completed)
        .unwrap()
        .sub(&crate::geometry::KForm::d_scalar(&sys.tq, &sys.energy))
        .unwrap();
    assert!(residual.is_zero(&zctx).unwrap());
}

#[test]
fn bridge_operator_reproduces_lagrangian_constraints() {
    let (sys, tsq) = singular_a();
    let ham = hamiltonian_algorithm(&sys, &tsq, &AlgorithmOptions::default(), &ctx()).unwrap();
    let a = p("exp(q1+q2)");
    // K of the secondary p1 is dL/dq1 = (a v1 / 2) * v1: a multiple of
    // the first-generation Lagrangian constraint v1.
    let k_p1 = k_operator(&sys, &ham, &p("p1"));
    assert_eq!(k_p1, (p("1/2") * a.clone() * p("v1^2")).normalize());
    // constants map to zero
    assert_eq!(k_operator(&sys, &ham, &p("7")), p("0"));
    // (pond88), first relation: Phi^*{phi0, H0} equals the first
    // Lagrangian constraint expression A^s (dL/dq^s - d2L/dv dq v).
    let lhs = ham
        .legendre
        .pullback(&canonical_bracket(&tsq, &p("p2"), &ham.hamiltonian), &sys);
    let psi1 = {
        // basis A = (0, 1) of ker^V against the Euler-Lagrange right side
        let mut r = sys.lagrangian.diff("q2");
        for (k, v) in ["v1", "v2"].iter().enumerate() {
            r = r
                - sys.lagrangian.diff("v2").diff(sys.base.coord(k))
                    * Expr::sym(v.to_string());
        }
        r.normalize()
    };
    let zctx = sys.tq.zero_ctx(&ctx());
    let diff = (lhs.clone() - psi1.clone()).normalize();
    assert!(
        zctx.is_zero(&diff).unwrap().is_proved_zero(),
        "pond88: {lhs} vs {psi1}"
    );
    // and psi1 is the Lagrangian constraint v1 up to the nonvanishing
    // factor a/2 (d2 a = a here).
    assert_eq!(psi1, (p("1/2") * a.diff("q2") * p("v1^2")).normalize());
}
