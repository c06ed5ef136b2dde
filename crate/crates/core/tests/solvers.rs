use std::f64::consts::PI;

use shadowkit::analytic::{bifurcation_eps, maxwell_lambda};
use shadowkit::discretize::{Grid, State};
use shadowkit::eigen::linearized_matrix;
use shadowkit::layer::{compose_ansatz, crossing, heteroclinic, layer_solve, LayerOptions};
use shadowkit::model::equilibria_of_lambda;
use shadowkit::solve::{newton, relax_oracle, solve_fixed_lambda};
use shadowkit::Params;

fn p_b() -> Params {
    Params::new(1.0, 0.0, 1.0, 4.0, 1.0, 1.0, 1.0).unwrap()
}

fn p_a() -> Params {
    Params::new(2.0, 1.2, 0.2, 4.0, 2.0, 1.0, 1.0).unwrap()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn agree(init: &[f64], lambda: f64, eps: f64, p: &Params) -> (Vec<f64>, f64) {
    let newton_v = solve_fixed_lambda(init, lambda, eps, p).unwrap();
    let relaxed = relax_oracle(init, lambda, eps, p, 1e5).unwrap();
    let d = sup_diff(&newton_v, &relaxed);
    (newton_v, d)
}

#[test]
fn constant_fixtures_agree() {
    let pb = p_b();
    let (v, d) = agree(&vec![2.01; 101], 6.0, 1e-2, &pb);
    assert!(d <= 1e-6 && (v[50] - 2.0).abs() < 1e-12);
    let (v, d) = agree(&vec![0.0; 101], 6.0, 1e-2, &pb);
    assert!(d <= 1e-6 && v.iter().all(|&x| x == 0.0));
    let grid = Grid::new(100, 1.0);
    let small: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|x| 0.05 * (1.0 + (3.0 * x).cos()))
        .collect();
    let (v, d) = agree(&small, 5.0, 1e-2, &pb);
    assert!(d <= 1e-6 && v.iter().all(|x| x.abs() < 1e-9));

    let pa = p_a();
    let v2 = equilibria_of_lambda(3.0, &pa).unwrap().v2;
    assert!((v2 - 2.0).abs() < 1e-12);
    let bump: Vec<f64> = grid.nodes().iter().map(|x| v2 + 0.02 * (x - 0.5)).collect();
    let (v, d) = agree(&bump, 3.0, 1e-2, &pa);
    assert!(d <= 1e-6 && (v[0] - 2.0).abs() < 1e-9);
}

/// Layer pinned next to `x = 0` at a λ slightly above the balanced value; its
/// single unstable rate is about `1e-2`.
#[test]
fn layered_fixture_agrees() {
    let p = p_b();
    let eps = 1e-3;
    let lambda = 5.922;
    let het = heteroclinic(maxwell_lambda(&p).unwrap(), &p, None, 1e-10).unwrap();
    let grid = Grid::new(200, 1.0);
    let seed = compose_ansatz(&het, 0.1, eps, &grid);
    let base = solve_fixed_lambda(&seed.v_eps, lambda, eps, &p).unwrap();
    let x = crossing(&base, &grid, 1.0).unwrap();
    assert!(x > 0.05 && x < 0.15 && base[0] < 0.1 && base[200] > 2.0);

    let init: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&base)
        .map(|(&x, &v)| {
            if x >= 0.7 {
                v - 0.02 * ((x - 0.7) / 0.3 * PI).sin().powi(2)
            } else {
                v
            }
        })
        .collect();
    let newton_v = solve_fixed_lambda(&init, lambda, eps, &p).unwrap();
    let relaxed = relax_oracle(&init, lambda, eps, &p, 1e4).unwrap();
    assert!(
        sup_diff(&newton_v, &relaxed) <= 1e-6,
        "{}",
        sup_diff(&newton_v, &relaxed)
    );
    assert!(sup_diff(&newton_v, &base) <= 1e-10);
}

#[test]
fn fixed_lambda_six_has_no_layered_equilibrium_near_ansatz() {
    let p = p_b();
    let r = layer_solve(
        0.25,
        1e-3,
        &p,
        &LayerOptions {
            n: Some(200),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(solve_fixed_lambda(&r.state.v, 6.0, 1e-3, &p).is_err());
}

#[test]
fn trivial_state_is_not_a_bifurcation_point() {
    let p = p_a();
    let e1 = bifurcation_eps(1, &p).unwrap();
    let grid = Grid::new(200, 1.0);
    for eps in [0.98 * e1, 1.02 * e1] {
        let init = State::constant(1e-3, p.a1 / p.b1, grid);
        let s = newton(&init, eps, &p, 1e-11, 50).unwrap();
        let m = linearized_matrix(&s, eps, &p).unwrap();
        let sv = m.singular_values();
        let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(smin > 1e-6 * sv.max(), "{smin}");
    }
}
