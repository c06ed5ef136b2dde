//! Damped Newton on the augmented and frozen-λ systems, and an explicit
//! gradient-flow relaxation used as an independent oracle.

use crate::discretize::{fixed_lambda_jacobian, jacobian, pde_residual, residual, Grid, State};
use crate::error::{Error, Result};
use crate::linalg::BorderedMatrix;
use crate::model::{reaction_f_v, Params};

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / 1048576.0;
const DOMAIN_FLOOR: f64 = -0.5;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 50;

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn half_sq(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

/// Iterates of a converged Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTrace {
    pub x: Vec<f64>,
    /// `‖R‖_∞` before each step, ending with the accepted value.
    pub history: Vec<f64>,
}

impl NewtonTrace {
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

/// Armijo-damped Newton for `R(x) = 0`.
///
/// The first `profile_len` unknowns are nodal values and must stay above
/// `-0.5`; trial points violating that are treated like failed line-search steps.
pub(crate) fn damped_newton<R, J>(
    x0: Vec<f64>,
    profile_len: usize,
    tol: f64,
    max_iter: usize,
    mut eval: R,
    mut jac: J,
) -> Result<NewtonTrace>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<BorderedMatrix>,
{
    let in_domain = |x: &[f64]| {
        x[..profile_len]
            .iter()
            .all(|&v| v > DOMAIN_FLOOR && v.is_finite())
    };
    if !in_domain(&x0) {
        return Err(Error::LeftDomain);
    }
    let mut x = x0;
    let mut r = eval(&x)?;
    let mut history = vec![inf_norm(&r)];
    for _ in 0..max_iter {
        if inf_norm(&r) <= tol {
            return Ok(NewtonTrace { x, history });
        }
        let a = jac(&x)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = a.factor()?.solve_refined(&a, &neg, 1)?;
        let phi = half_sq(&r);
        let mut t = 1.0;
        let mut saw_domain_exit = false;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + t * b).collect();
            if in_domain(&trial) {
                let rt = eval(&trial)?;
                let phit = half_sq(&rt);
                if phit.is_finite() && phit <= (1.0 - 2.0 * ARMIJO_C * t) * phi {
                    x = trial;
                    r = rt;
                    break;
                }
            } else {
                saw_domain_exit = true;
            }
            t *= 0.5;
            if t < MIN_STEP {
                return Err(if saw_domain_exit {
                    Error::LeftDomain
                } else {
                    Error::NoConvergence {
                        iterations: history.len() - 1,
                        residual: inf_norm(&r),
                    }
                });
            }
        }
        history.push(inf_norm(&r));
    }
    if inf_norm(&r) <= tol {
        return Ok(NewtonTrace { x, history });
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: inf_norm(&r),
    })
}

/// Newton on the augmented system, returning the iteration history as well.
pub fn newton_traced(
    init: &State,
    eps: f64,
    p: &Params,
    tol: f64,
    max_iter: usize,
) -> Result<(State, Vec<f64>)> {
    crate::discretize::check_len(&init.v, &init.grid)?;
    let grid = init.grid;
    let unpack = |x: &[f64]| State {
        v: x[..grid.len()].to_vec(),
        lambda: x[grid.len()],
        grid,
    };
    let trace = damped_newton(
        init.to_vec(),
        grid.len(),
        tol,
        max_iter,
        |x| residual(&unpack(x), eps, p),
        |x| jacobian(&unpack(x), eps, p),
    )?;
    Ok((unpack(&trace.x), trace.history))
}

/// Solves `residual(S) = 0` for `(v, λ)` starting from `init`.
pub fn newton(init: &State, eps: f64, p: &Params, tol: f64, max_iter: usize) -> Result<State> {
    newton_traced(init, eps, p, tol, max_iter).map(|(s, _)| s)
}

/// Newton on the PDE rows with `λ` frozen.
pub fn solve_fixed_lambda_with(
    init_v: &[f64],
    lambda: f64,
    eps: f64,
    p: &Params,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let grid = grid_for(init_v, p)?;
    let trace = damped_newton(
        init_v.to_vec(),
        grid.len(),
        tol,
        max_iter,
        |v| pde_residual(v, lambda, eps, &grid, p),
        |v| Ok(fixed_lambda_jacobian(v, lambda, eps, &grid, p, 0)),
    )?;
    Ok(trace.x)
}

pub fn solve_fixed_lambda(init_v: &[f64], lambda: f64, eps: f64, p: &Params) -> Result<Vec<f64>> {
    solve_fixed_lambda_with(init_v, lambda, eps, p, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

fn grid_for(v: &[f64], p: &Params) -> Result<Grid> {
    if v.len() < 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: v.len(),
        });
    }
    Ok(Grid::new(v.len() - 1, p.l))
}

/// Stationary tolerance on `‖v_t‖_∞` for [`relax_oracle`].
pub const RELAX_TOL: f64 = 1e-10;

/// Explicit-Euler march of `v_t = ε D²v + f(v, λ)` until `‖v_t‖_∞ ≤ 1e-10`.
///
/// Fails with `NoConvergence` if `t_end` is reached first.
pub fn relax_oracle(
    init_v: &[f64],
    lambda: f64,
    eps: f64,
    p: &Params,
    t_end: f64,
) -> Result<Vec<f64>> {
    let grid = grid_for(init_v, p)?;
    let h = grid.h();
    let bound = 10.0 * p.a2 / p.c2;
    let mut v = init_v.to_vec();
    let mut t = 0.0;
    let mut steps = 0usize;
    loop {
        let size = inf_norm(&v);
        if !size.is_finite() || size > bound {
            return Err(Error::Blowup(size));
        }
        let vt = pde_residual(&v, lambda, eps, &grid, p)?;
        let rate = inf_norm(&vt);
        if rate <= RELAX_TOL {
            return Ok(v);
        }
        if t >= t_end {
            return Err(Error::NoConvergence {
                iterations: steps,
                residual: rate,
            });
        }
        let stiff = v
            .iter()
            .map(|&x| reaction_f_v(x, lambda, p).abs())
            .fold(0.0, f64::max);
        let dt = (0.9 * h * h / (2.0 * eps))
            .min(0.9 / stiff.max(1e-12))
            .min(t_end - t)
            .max(f64::MIN_POSITIVE);
        for (x, d) in v.iter_mut().zip(&vt) {
            *x += dt * d;
        }
        t += dt;
        steps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::bifurcation_eps;
    use crate::discretize::amplitude;
    use crate::model::fixtures::{p_a, p_b};
    use std::f64::consts::PI;

    #[test]
    fn exact_state_takes_zero_iterations() {
        let grid = Grid::new(64, 1.0);
        let s = State::constant(1.0, 3.0, grid);
        let (out, hist) = newton_traced(&s, 0.02, &p_a(), 1e-12, 20).unwrap();
        assert_eq!(hist.len(), 1);
        assert_eq!(out, s);
    }

    #[test]
    fn returns_to_constant_state_away_from_bifurcation() {
        let p = p_a();
        let eps = 1.7 * bifurcation_eps(1, &p).unwrap();
        let grid = Grid::new(100, 1.0);
        // A localized bump has components on every cosine mode.
        let v: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|x| 1.0 + 1e-3 * (-(x - 0.3f64).powi(2) / 0.005).exp())
            .collect();
        let s = newton(
            &State {
                v,
                lambda: 3.0,
                grid,
            },
            eps,
            &p,
            1e-12,
            30,
        )
        .unwrap();
        assert!(amplitude(&s, 1, &p).unwrap().abs() <= 1e-12);
        assert!(s.v.iter().all(|x| (x - 1.0).abs() < 1e-11));
        assert!((s.lambda - 3.0).abs() < 1e-11);
    }

    #[test]
    fn lambda_leaves_zero_through_constraint_row() {
        let p = p_b();
        let grid = Grid::new(40, 1.0);
        let s = newton(&State::constant(4.0, 0.0, grid), 0.5, &p, 1e-11, 50).unwrap();
        assert!(s.lambda > 1.0);
        assert!(residual(&s, 0.5, &p)
            .unwrap()
            .iter()
            .all(|r| r.abs() <= 1e-11));
    }

    #[test]
    fn quadratic_convergence() {
        let p = p_a();
        let grid = Grid::new(80, 1.0);
        let eps = 0.2;
        let v: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|x| 1.0 + 1e-2 * (3.0 * PI * x).cos() + 1e-2 * x)
            .collect();
        let (_, hist) = newton_traced(
            &State {
                v,
                lambda: 3.01,
                grid,
            },
            eps,
            &p,
            1e-14,
            30,
        )
        .unwrap();
        let useful: Vec<f64> = hist.iter().copied().filter(|&e| e > 1e-13).collect();
        assert!(useful.len() >= 3);
        for w in useful.windows(2) {
            assert!(w[1] / (w[0] * w[0]) < 50.0, "{hist:?}");
        }
    }

    #[test]
    fn domain_guard() {
        let grid = Grid::new(10, 1.0);
        let s = State::constant(-0.7, 1.0, grid);
        assert_eq!(newton(&s, 0.1, &p_b(), 1e-10, 5), Err(Error::LeftDomain));
    }

    #[test]
    fn fixed_lambda_equilibria() {
        let p = p_b();
        let v = solve_fixed_lambda(&vec![2.0; 51], 6.0, 1e-3, &p).unwrap();
        assert!(v.iter().all(|x| (x - 2.0).abs() < 1e-14));
        let v = solve_fixed_lambda(&vec![1.0; 51], 6.0, 1e-3, &p).unwrap();
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn relaxation_examples() {
        let p = p_b();
        let v = relax_oracle(&vec![2.01; 41], 6.0, 1e-2, &p, 1e4).unwrap();
        assert!(v.iter().all(|x| (x - 2.0).abs() < 1e-9));
        let v = relax_oracle(&vec![0.0; 41], 6.0, 1e-2, &p, 1.0).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert!(matches!(
            relax_oracle(&vec![50.0; 41], 0.0, 1e-2, &p, 10.0),
            Err(Error::Blowup(_))
        ));
    }
}
