use shadowkit::analytic::{bifurcation_eps, expansion_k2, pitchfork_coeffs};
use shadowkit::continuation::{
    branch_from_bifurcation, detect_bifurcations, extend_to_small_eps, fit_pitchfork, Branch,
    ContinuationConfig,
};
use shadowkit::discretize::{Grid, State};
use shadowkit::eigen::leading_growth_rate;
use shadowkit::model::constant_state;
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

fn joined(p: &Params) -> Branch {
    let (plus, minus) = branch_from_bifurcation(1, p, &ContinuationConfig::default()).unwrap();
    Branch::joined(&plus, &minus)
}

#[test]
fn detection_recovers_first_three_modes() {
    for p in [p_b(), p_a()] {
        let e1 = bifurcation_eps(1, &p).unwrap();
        let found = detect_bifurcations(&p, (0.08 * e1, 1.5 * e1), 3, 800);
        assert_eq!(found.iter().map(|d| d.k).collect::<Vec<_>>(), vec![1, 2, 3]);
        for d in &found {
            let exact = bifurcation_eps(d.k, &p).unwrap();
            assert!((d.eps / exact - 1.0).abs() < 1e-4);
            assert!(d.kernel_mean.abs() < 1e-6);
            assert!(d.purity > 0.99);
        }
    }
}

#[test]
fn pitchfork_fit_matches_expansion() {
    for p in [p_b(), p_u()] {
        let b = joined(&p);
        let fit = fit_pitchfork(&b, 0.05).unwrap();
        let k2 = expansion_k2(1, &p).unwrap();
        assert!(fit.k1.abs() <= 1e-3 * (fit.k2 * 0.05).abs());
        assert!((fit.k2 / k2 - 1.0).abs() < 0.02, "{} vs {k2}", fit.k2);
        let l2 = pitchfork_coeffs(1, &p).unwrap().lambda2_bar;
        assert!((fit.lambda2 - l2).abs() < 5e-3, "{} vs {l2}", fit.lambda2);
    }
}

#[test]
fn branch_stability_follows_turning_direction() {
    for (p, stable) in [(p_b(), true), (p_u(), false)] {
        let b = joined(&p);
        let pts: Vec<_> = b.points.iter().filter(|pt| pt.s != 0.0).collect();
        assert!(pts.len() >= 8);
        for pt in pts {
            assert_eq!(pt.stable, Some(stable), "s = {}", pt.s);
            assert_eq!(pt.eps < b.origin_eps, stable);
        }
    }
}

#[test]
fn constant_state_rate_crosses_once() {
    let p = p_b();
    let cs = constant_state(&p).unwrap();
    let e1 = bifurcation_eps(1, &p).unwrap();
    let s = State::constant(cs.v_bar, cs.lambda_bar, Grid::new(200, 1.0));
    let eps: Vec<f64> = (0..=40)
        .map(|i| e1 * (0.9 + 0.2 * i as f64 / 40.0))
        .collect();
    let rates: Vec<f64> = eps
        .iter()
        .map(|&e| leading_growth_rate(&s, e, &p).unwrap())
        .collect();
    assert_eq!(
        rates
            .windows(2)
            .filter(|w| w[0].signum() != w[1].signum())
            .count(),
        1
    );
    assert!(rates.windows(2).all(|w| w[1] < w[0]));
    let mid = (rates[21] - rates[19]) / (eps[21] - eps[19]);
    assert!(
        (mid / -std::f64::consts::PI.powi(2) - 1.0).abs() < 1e-3,
        "{mid}"
    );
}

#[test]
fn mirror_half_branches() {
    let p = p_a();
    let (plus, minus) = branch_from_bifurcation(1, &p, &ContinuationConfig::default()).unwrap();
    for (a, b) in plus.points.iter().zip(&minus.points).skip(1) {
        assert!((a.eps - b.eps).abs() < 1e-9);
        let r = b.state.reflected();
        let d = a
            .state
            .v
            .iter()
            .zip(&r.v)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d < 1e-8);
    }
}

#[test]
fn extension_to_small_eps_stays_monotone_and_positive() {
    let p = p_b();
    let cfg = ContinuationConfig {
        n: 400,
        step: 0.004,
        max_step: 0.05,
        positivity_floor: 0.0,
        ..Default::default()
    };
    let (plus, _) = branch_from_bifurcation(1, &p, &cfg).unwrap();
    let e1 = bifurcation_eps(1, &p).unwrap();
    let ext = extend_to_small_eps(&plus, e1 / 50.0, &p, &cfg).unwrap();
    let last = ext.branch.points.last().unwrap();
    assert!(last.eps <= e1 / 50.0);
    assert_eq!(ext.monotone_fraction, 1.0);
    assert!(ext
        .branch
        .points
        .iter()
        .all(|pt| pt.state.min_v() > 0.0 && pt.lambda > 0.0));
    assert!(ext
        .branch
        .points
        .iter()
        .all(|pt| pt.eps <= ext.branch.origin_eps * (1.0 + 1e-12)));
}
