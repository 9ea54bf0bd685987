use super::*;
use crate::geometry::SymplecticForm;
use crate::symexpr::Assumption;
use std::collections::BTreeMap;

fn p(s: &str) -> Expr {
    Expr::parse_normalized(s).unwrap()
}

fn ctx() -> ZeroCtx {
    ZeroCtx::default()
}

#[test]
fn constant_of_motion_on_non_integrable_equation() {
    // Z = {v1 = 0, v2 = alpha}: any function of the coordinate with
    // vanishing velocity is a constant of the motion.
    let m = Chart::base(["x1", "x2"]).with_assumptions([Assumption::Nonzero(p("alpha"))]);
    let tm = m.tangent_with(["v1", "v2"]);
    let z = ImplicitODE::new(&tm, vec![p("v1"), p("v2 - alpha")], OdeOrder::First).unwrap();
    let f = p("x1^s + sin(x1)"); // generic f~ of x1
    let v = check_constant_of_motion(&z, &f, &ctx()).unwrap();
    assert_eq!(v.status, ZeroStatus::ProvedZero, "tier {:?}", v.tier);
    // The conjugate-coordinate function is not conserved.
    let v = check_constant_of_motion(&z, &p("x2"), &ctx()).unwrap();
    assert_eq!(v.status, ZeroStatus::ProvedNonzero);
}

#[test]
fn energy_is_constant_on_hamiltonian_graph() {
    let m = Chart::base(["q"]).cotangent_with(["p"]);
    let tm = m.tangent_with(["vq", "vp"]);
    let h = p("1/2*(q^2+p^2)");
    let omega = SymplecticForm::canonical(&m, &ctx()).unwrap();
    let xh = omega.hamiltonian_field(&h, &ctx()).unwrap();
    let z = ImplicitODE::graph(&xh, &tm).unwrap();
    let v = check_constant_of_motion(&z, &h, &ctx()).unwrap();
    assert_eq!(v.status, ZeroStatus::ProvedZero);
}

#[test]
fn sphere_equation_rejects_coordinate_function() {
    // Z: x^2+y^2+vx^2+vy^2 = 1; f = x is not constant: d_N f = vx is
    // nonzero at the explicit point (0,0,1,0) of the sphere.
    let m = Chart::base(["x", "y"]);
    let tm = m.tangent_with(["vx", "vy"]);
    let z = ImplicitODE::new(
        &tm,
        vec![p("x^2+y^2+vx^2+vy^2-1")],
        OdeOrder::First,
    )
    .unwrap();
    let v = check_constant_of_motion(&z, &p("x"), &ctx()).unwrap();
    assert_eq!(v.status, ZeroStatus::ProvedNonzero);
    let mut env = BTreeMap::new();
    env.insert("x".into(), 0.0);
    env.insert("y".into(), 0.0);
    env.insert("vx".into(), 1.0);
    env.insert("vy".into(), 0.0);
    assert_eq!(v.derivative.eval(&env).unwrap(), 1.0);
}

#[test]
fn sphere_equation_in_radial_coordinates_has_angular_symmetry() {
    let m = Chart::base(["r", "phi"]).with_assumptions([Assumption::Positive(p("r"))]);
    let tm = m.tangent_with(["vr", "vphi"]);
    let z = ImplicitODE::new(
        &tm,
        vec![p("r^2 + r^2*vphi^2 + vr^2 - 1")],
        OdeOrder::First,
    )
    .unwrap();
    let x = VectorField::new(&m, vec![p("0"), p("1")]).unwrap();
    let v = check_symmetry(&z, &x, &ctx()).unwrap();
    assert_eq!(v.status, SymmetryStatus::Symmetry);
    // the Lie derivative vanishes identically, so A = 0
    let a = v.multiplier_matrix.unwrap();
    assert!(a[0][0].is_literal_zero());
}

#[test]
fn translation_preserves_constant_velocity_law() {
    let m = Chart::base(["x"]);
    let tm = m.tangent_with(["v"]);
    let z = ImplicitODE::new(&tm, vec![p("v - 1")], OdeOrder::First).unwrap();
    let x = VectorField::new(&m, vec![p("1")]).unwrap();
    let v = check_symmetry(&z, &x, &ctx()).unwrap();
    assert_eq!(v.status, SymmetryStatus::Symmetry);
}

#[test]
fn rotation_preserves_sphere_and_angular_momentum_level() {
    // Z of (sphere, x vy - y vx = L); X = x dy - y dx is a symmetry.
    let m = Chart::base(["x", "y"]);
    let tm = m.tangent_with(["vx", "vy"]);
    let z = ImplicitODE::new(
        &tm,
        vec![
            p("x^2+y^2+vx^2+vy^2-1"),
            p("x*vy - y*vx - L"),
        ],
        OdeOrder::First,
    )
    .unwrap();
    let x = VectorField::new(&m, vec![p("-y"), p("x")]).unwrap();
    let v = check_symmetry(&z, &x, &ctx()).unwrap();
    assert_eq!(v.status, SymmetryStatus::Symmetry);
    let a = v.multiplier_matrix.unwrap();
    for row in &a {
        for entry in row {
            assert!(entry.is_literal_zero(), "rotations preserve both levels exactly");
        }
    }
    // A non-symmetry for contrast: translation along x.
    let t = VectorField::new(&m, vec![p("1"), p("0")]).unwrap();
    let v = check_symmetry(&z, &t, &ctx()).unwrap();
    assert_eq!(v.status, SymmetryStatus::NotSymmetry);
}

#[test]
fn explicit_graph_symmetry_is_field_commutation() {
    // For Z = graph(Gamma): symmetry iff [X, Gamma] = 0, on a few fields.
    let m = Chart::base(["x", "y"]);
    let tm = m.tangent_with(["vx", "vy"]);
    let cases = [
        (vec![p("y"), p("-x")], vec![p("-y"), p("x")]),   // rotation vs rotation: commute
        (vec![p("x"), p("y")], vec![p("2*x"), p("2*y")]), // dilation family: commute
        (vec![p("y^2"), p("x")], vec![p("1"), p("0")]),   // generic: do not commute
    ];
    for (gc, xc) in cases {
        let gamma = VectorField::new(&m, gc).unwrap();
        let x = VectorField::new(&m, xc).unwrap();
        let z = ImplicitODE::graph(&gamma, &tm).unwrap();
        let verdict = check_symmetry(&z, &x, &ctx()).unwrap();
        let commutes = x.bracket(&gamma).unwrap().is_zero(&ctx()).unwrap();
        assert_eq!(
            verdict.status == SymmetryStatus::Symmetry,
            commutes,
            "graph symmetry must match [X, Gamma] = 0"
        );
    }
}

#[test]
fn hamiltonian_graph_is_lagrangian_in_lifted_form() {
    // Graph of X_H for H = (q^2+p^2)/2 inside (T(T*Q), omega_N).
    let m = Chart::base(["q"]).cotangent_with(["p"]);
    let tm = m.tangent_with(["v", "w"]);
    let mut omega = KForm::zero(&m, 2);
    omega.add_term(&[0, 1], Expr::one());
    let (omega_n, _) = crate::geometry::lift_symplectic(&omega, &tm).unwrap();
    let params = Chart::base(["q0", "p0"]);
    let map = CoordMap::new(
        &params,
        &tm,
        vec![p("q0"), p("p0"), p("p0"), p("-q0")],
    )
    .unwrap();
    let v = check_lagrangian_submanifold(&map, &omega_n, &ctx()).unwrap();
    assert!(v.is_lagrangian());
}

#[test]
fn closed_one_form_graph_is_lagrangian() {
    // Graph of dW for W = q^3 inside (T*Q, omega_Q).
    let m = Chart::base(["q"]).cotangent_with(["p"]);
    let omega = SymplecticForm::canonical(&m, &ctx()).unwrap();
    let params = Chart::base(["s"]);
    let map = CoordMap::new(&params, &m, vec![p("s"), p("3*s^2")]).unwrap();
    let v = check_lagrangian_submanifold(&map, &omega.form, &ctx()).unwrap();
    assert!(v.is_lagrangian());
}

#[test]
fn euler_lagrange_set_is_lagrangian() {
    // The free-particle Euler-Lagrange set (q, v) -> (q, p=v, v, w=0)
    // inside (T(T*Q), omega_N).
    let m = Chart::base(["q"]).cotangent_with(["p"]);
    let tm = m.tangent_with(["v", "w"]);
    let mut omega = KForm::zero(&m, 2);
    omega.add_term(&[0, 1], Expr::one());
    let (omega_n, _) = crate::geometry::lift_symplectic(&omega, &tm).unwrap();
    let params = Chart::base(["a", "b"]);
    let map = CoordMap::new(&params, &tm, vec![p("a"), p("b"), p("b"), p("0")]).unwrap();
    let v = check_lagrangian_submanifold(&map, &omega_n, &ctx()).unwrap();
    assert!(v.is_lagrangian());
    // A non-isotropic parametrization for contrast.
    let bad = CoordMap::new(&params, &tm, vec![p("a"), p("b"), p("0"), p("b")]).unwrap();
    let v = check_lagrangian_submanifold(&bad, &omega_n, &ctx()).unwrap();
    assert!(!v.is_lagrangian() && v.full_rank);
}
