//! Frozen reference values. Hand-derived quantities are pinned to the digits
//! they were computed with; published closed forms are checked in their
//! general form.

use std::f64::consts::PI;

use shadowkit::analytic::{
    bifurcation_eps, classify_stability, expansion_k2, layer_targets, maxwell_gap, maxwell_lambda,
    mu_dot, pitchfork_coeffs, sign_chart_for, Direction,
};
use shadowkit::layer::heteroclinic;
use shadowkit::model::{constant_state, equilibria_of_lambda};
use shadowkit::Params;

fn p_b() -> Params {
    Params::new(1.0, 0.0, 1.0, 4.0, 1.0, 1.0, 1.0).unwrap()
}

fn p_a() -> Params {
    Params::new(2.0, 1.2, 0.2, 4.0, 2.0, 1.0, 1.0).unwrap()
}

fn p_u() -> Params {
    Params::new(1.4, 0.0, 1.0, 4.0, 1.0, 1.0, 1.0).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn constant_states() {
    let cs = constant_state(&p_b()).unwrap();
    assert!(close(cs.v_bar, 1.0, 1e-14) && close(cs.lambda_bar, 6.0, 1e-13));
    let cs = constant_state(&p_a()).unwrap();
    assert!(close(cs.v_bar, 1.0, 1e-14) && close(cs.lambda_bar, 3.0, 1e-13));
}

#[test]
fn bifurcation_values() {
    let p = p_b();
    let e1 = bifurcation_eps(1, &p).unwrap();
    assert!(close(e1, 1.0 / (2.0 * PI * PI), 1e-16));
    assert!(close(e1, 0.0506606, 5e-8));
    for k in 2..=5u32 {
        assert!(close(
            bifurcation_eps(k, &p).unwrap() * (k * k) as f64,
            e1,
            1e-16
        ));
    }
    assert!(close(mu_dot(1, &p), -PI * PI, 1e-14));
}

#[test]
fn pitchfork_coefficients() {
    let pc = pitchfork_coeffs(1, &p_b()).unwrap();
    assert_eq!(pc.k1, 0.0);
    assert!(close(pc.k2, -0.0200521, 5e-6), "{}", pc.k2);
    assert!(
        close(pc.k2_expansion, -0.0390509, 1e-7),
        "{}",
        pc.k2_expansion
    );
    assert!(close(expansion_k2(1, &p_u()).unwrap(), 0.01365, 1e-5));
    let cls = classify_stability(1, &p_b()).unwrap();
    assert_eq!(cls.direction, Direction::Left);
    assert!(cls.stable);
    let cls = classify_stability(1, &p_u()).unwrap();
    assert_eq!(cls.direction, Direction::Right);
    assert!(!cls.stable);
}

#[test]
fn sign_chart_closed_forms() {
    for c2 in [0.5, 1.0, 3.0] {
        let chart = sign_chart_for(4.0 / 3.0, c2);
        assert_eq!(chart.roots_in_window.len(), 1);
        assert!(close(
            chart.roots_in_window[0],
            59.0 * c2 / 51.0,
            1e-12 * c2
        ));
        for v in [0.3, 1.0, 2.5] {
            let chart = sign_chart_for(v, c2);
            assert!(close(
                chart.eval(c2),
                2.0 * c2 * c2 * v * v,
                1e-12 * c2 * c2
            ));
        }
    }
}

#[test]
fn equilibria_closed_forms() {
    let p = p_b();
    let eq = equilibria_of_lambda(p.a2 / p.b2, &p).unwrap();
    assert!(close(eq.v1, 0.0, 1e-14) && close(eq.v2, (p.a2 - p.c2) / p.c2, 1e-14));
    let lam = (p.a2 + p.c2).powi(2) / (4.0 * p.b2 * p.c2);
    let eq = equilibria_of_lambda(lam, &p).unwrap();
    assert!(close(eq.v1, (p.a2 - p.c2) / (2.0 * p.c2), 1e-7));
    assert!(close(eq.v2, (p.a2 - p.c2) / (2.0 * p.c2), 1e-7));
}

#[test]
fn layer_and_maxwell_values() {
    let p = p_b();
    let t = layer_targets(0.25, &p).unwrap();
    assert!(close(t.v2_limit, 2.0, 1e-14) && close(t.lambda0_bar, 6.0, 1e-13));
    let gap = maxwell_gap(6.0, &p).unwrap();
    assert!(close(gap, -0.075, 5e-3), "{gap}");
    let ls = maxwell_lambda(&p).unwrap();
    assert!(close(ls, 5.919114993461895, 1e-12), "{ls}");
    assert!(maxwell_gap(ls, &p).unwrap().abs() < 1e-13);
    let h = heteroclinic(ls, &p, None, 1e-10).unwrap();
    assert!(close(h.v2, 2.075226048, 1e-8), "{}", h.v2);
    let h6 = heteroclinic(6.0, &p, Some(5.0), 1.0).unwrap();
    assert!(close(h6.kappa_minus, 1.41421, 1e-5));
    assert!(close(h6.kappa_plus, 0.81650, 1e-5));
}
