use super::*;
use crate::geometry::SymplecticForm;

fn p(s: &str) -> Expr {
    Expr::parse_normalized(s).unwrap()
}

fn ctx() -> ZeroCtx {
    ZeroCtx::default()
}

fn plane() -> (Chart, Chart) {
    let q = Chart::base(["x", "y"]);
    let tq = q.tangent_with(["vx", "vy"]);
    (q, tq)
}

fn two_dof() -> (Chart, Chart) {
    let q = Chart::base(["q1", "q2"]);
    let tq = q.tangent_with(["v1", "v2"]);
    (q, tq)
}

#[test]
fn radial_potential_package() {
    let (_, tq) = plane();
    let l = p("1/2*(vx^2+vy^2) - (x^2+y^2)^s");
    let sys = LagrangianSystem::build(&l, &tq, &ctx()).unwrap();
    assert!(sys.regular);
    // theta_L = vx dx + vy dy
    assert_eq!(sys.theta.coefficient(&[0]), p("vx"));
    assert_eq!(sys.theta.coefficient(&[1]), p("vy"));
    assert_eq!(sys.theta.coefficient(&[2]), p("0"));
    // E_L = kinetic + potential
    assert_eq!(sys.energy, p("1/2*(vx^2+vy^2) + (x^2+y^2)^s"));
}

#[test]
fn alternative_oscillator_lagrangian_package() {
    let (_, tq) = two_dof();
    let l = p("v1*v2 - q1*q2");
    let sys = LagrangianSystem::build(&l, &tq, &ctx()).unwrap();
    assert!(sys.regular);
    // omega_{L'} = dq1 ^ dv2 + dq2 ^ dv1  (coords q1 q2 v1 v2 = 0 1 2 3)
    assert_eq!(sys.omega.coefficient(&[0, 3]), p("1"));
    assert_eq!(sys.omega.coefficient(&[1, 2]), p("1"));
    assert_eq!(sys.omega.coefficient(&[0, 2]), p("0"));
    assert_eq!(sys.omega.coefficient(&[0, 1]), p("0"));
}

#[test]
fn degenerate_kinetic_term_has_rank_one() {
    let (_, tq) = two_dof();
    let l = p("1/2*exp(q1+q2)*v1^2");
    let sys = LagrangianSystem::build(&l, &tq, &ctx()).unwrap();
    assert!(!sys.regular);
    assert_eq!(sys.rank, 1);
    // E_L = L for a homogeneous quadratic Lagrangian
    assert_eq!(sys.energy, sys.lagrangian);
}

#[test]
fn oscillator_second_order_field() {
    let (_, tq) = two_dof();
    let l = p("1/2*(v1^2+v2^2-q1^2-q2^2)");
    let sys = LagrangianSystem::build(&l, &tq, &ctx()).unwrap();
    let d = sys.solve_second_order_field(&ctx()).unwrap();
    assert_eq!(d.components, vec![p("v1"), p("v2"), p("-q1"), p("-q2")]);
    // The alternative Lagrangian describes the same dynamics.
    let alt = LagrangianSystem::build(&p("v1*v2 - q1*q2"), &tq, &ctx()).unwrap();
    let d2 = alt.solve_second_order_field(&ctx()).unwrap();
    assert_eq!(d.components, d2.components);
}

#[test]
fn free_particle_second_order_field() {
    let q = Chart::base(["q"]);
    let tq = q.tangent_with(["v"]);
    let sys = LagrangianSystem::build(&p("1/2*v^2"), &tq, &ctx()).unwrap();
    let d = sys.solve_second_order_field(&ctx()).unwrap();
    assert_eq!(d.components, vec![p("v"), p("0")]);
}

#[test]
fn euler_lagrange_admissibility() {
    // Radial reduced dynamics D_l against L' = v^2/2 - (l^2/(2 r^2) + V(r)).
    let q = Chart::base(["r"]).with_assumptions([crate::symexpr::Assumption::Positive(p("r"))]);
    let tq = q.tangent_with(["vr"]);
    let lp = p("1/2*vr^2 - l^2/(2*r^2) - r^s");
    let sys = LagrangianSystem::build(&lp, &tq, &ctx()).unwrap();
    let dl = VectorField::new(&tq, vec![p("vr"), p("l^2/r^3 - s*r^(s-1)")]).unwrap();
    let (_, _, ok) = sys.check_euler_lagrange(&dl, &ctx()).unwrap();
    assert!(ok, "reduced radial dynamics is admissible for L'");

    // Oscillator D with L = (v^2 - q^2)/2 is admissible ...
    let q1 = Chart::base(["q"]);
    let tq1 = q1.tangent_with(["v"]);
    let osc = LagrangianSystem::build(&p("1/2*(v^2-q^2)"), &tq1, &ctx()).unwrap();
    let d = VectorField::new(&tq1, vec![p("v"), p("-q")]).unwrap();
    let (_, _, ok) = osc.check_euler_lagrange(&d, &ctx()).unwrap();
    assert!(ok);

    // ... but not for the free Lagrangian: the residual keeps a q dq term.
    let free = LagrangianSystem::build(&p("1/2*v^2"), &tq1, &ctx()).unwrap();
    let (res, _, ok) = free.check_euler_lagrange(&d, &ctx()).unwrap();
    assert!(!ok);
    assert_eq!(res.coefficient(&[0]), p("-q"));
}

#[test]
fn legendre_regular_and_singular() {
    // Regular mechanical Lagrangian.
    let (_, tq) = plane();
    let tsq = Chart::base(["x", "y"]).cotangent_with(["px", "py"]);
    // Note: base charts must be the same object; rebuild over sys.base.
    let l = p("1/2*(vx^2+vy^2) - (x^2+y^2)^s");
    let sys = LagrangianSystem::build(&l, &tq, &ctx()).unwrap();
    let tsq = sys.base.cotangent_with(["px", "py"]);
    let leg = legendre(&sys, &tsq, &ctx()).unwrap();
    assert_eq!(leg.momenta, vec![p("vx"), p("vy")]);
    assert_eq!(
        leg.hamiltonian.clone().unwrap(),
        p("1/2*(px^2+py^2) + (x^2+y^2)^s")
    );
    // Phi_L^* omega_Q = omega_L
    let omega_q = SymplecticForm::canonical(&tsq, &ctx()).unwrap();
    let pulled = leg.coord_map(&sys).pullback_form(&omega_q.form).unwrap();
    assert!(pulled.sub(&sys.omega).unwrap().is_literal_zero());

    // Singular: image is the primary constraint p2 = 0.
    let (_, tq2) = two_dof();
    let sing = LagrangianSystem::build(&p("1/2*exp(q1+q2)*v1^2"), &tq2, &ctx()).unwrap();
    let tsq2 = sing.base.cotangent_with(["p1", "p2"]);
    let leg2 = legendre(&sing, &tsq2, &ctx()).unwrap();
    assert!(leg2.inverse.is_none());
    assert_eq!(leg2.image_constraints, vec![p("p2")]);
    assert_eq!(
        leg2.hamiltonian.clone().unwrap(),
        p("1/2*p1^2*exp(q1+q2)^(-1)")
    );

    // Alternative oscillator Lagrangian: crossed momenta.
    let alt = LagrangianSystem::build(&p("v1*v2 - q1*q2"), &tq2, &ctx()).unwrap();
    let tsq3 = alt.base.cotangent_with(["p1", "p2"]);
    let leg3 = legendre(&alt, &tsq3, &ctx()).unwrap();
    assert_eq!(leg3.momenta, vec![p("v2"), p("v1")]);
    assert_eq!(leg3.hamiltonian.clone().unwrap(), p("p1*p2 + q1*q2"));
}

#[test]
fn null_lagrangian_classification() {
    let q = Chart::base(["q"]);
    let tq = q.tangent_with(["v"]);
    // Pure potential.
    let c = classify_null(&p("q^3 + sin(q)"), &tq, &ctx()).unwrap();
    assert_eq!(c.potential, p("q^3 + sin(q)"));
    assert!(c.residual.is_literal_zero());
    assert!(c.omega_vanishes);

    // Pure gauge: L = v * g'(q) with g = q^3.
    let c = classify_null(&p("3*q^2*v"), &tq, &ctx()).unwrap();
    assert!(c.potential.is_literal_zero());
    assert_eq!(c.gauge.coefficient(&[0]), p("3*q^2"));
    assert_eq!(c.gauge_closed, ZeroStatus::ProvedZero);
    assert!(c.omega_vanishes);

    // L = q v on T R: alpha = q dq closed in dimension one, omega_L = 0.
    let c = classify_null(&p("q*v"), &tq, &ctx()).unwrap();
    assert_eq!(c.gauge.coefficient(&[0]), p("q"));
    assert_eq!(c.gauge_closed, ZeroStatus::ProvedZero);
    assert!(c.omega_vanishes);

    // A genuinely kinetic Lagrangian is not null.
    let c = classify_null(&p("1/2*v^2 + q*v"), &tq, &ctx()).unwrap();
    assert_eq!(c.residual, p("1/2*v^2"));
    assert!(!c.omega_vanishes);
}

#[test]
fn energy_is_conserved_for_regular_systems() {
    let (_, tq) = two_dof();
    let l = p("1/2*(v1^2+v2^2) - q1^4 - q2^2*q1");
    let sys = LagrangianSystem::build(&l, &tq, &ctx()).unwrap();
    let d = sys.solve_second_order_field(&ctx()).unwrap();
    let drift = d.apply(&sys.energy);
    assert!(drift.is_literal_zero(), "L_D E_L = {drift}");
}

#[test]
fn cartan_form_identity_eq39() {
    // i_A theta_L = L_{S(A)} L for any field A on TQ.
    let (_, tq) = two_dof();
    let l = p("1/2*(v1^2+v2^2) - q1*q2 + v1*q2");
    let sys = LagrangianSystem::build(&l, &tq, &ctx()).unwrap();
    let a = VectorField::new(&tq, vec![p("v2*q1"), p("sin(q2)"), p("v1^2"), p("q1")]).unwrap();
    let lhs = sys.theta.interior(&a).unwrap().scalar_value();
    let sa = sys.soldering().apply(&a).unwrap();
    let rhs = sa.apply(&sys.lagrangian);
    assert_eq!((lhs - rhs).normalize(), Expr::zero());
}
