//! Linearized stability of discrete steady states.
//!
//! The bordered Jacobian `[[A, b], [cᵀ, d]]` couples the nodal dynamics
//! `v_t = A v + b λ` to the constraint `0 = cᵀv + d λ`, which holds at every
//! instant. The growth rates are therefore the eigenvalues of the operator
//! left after eliminating `λ`:
//!
//! * `d ≠ 0`: the Schur complement `A - b cᵀ / d`;
//! * `d = 0` (the case `b1 = 0`): the constraint pins `v` to the hyperplane
//!   `cᵀv = 0`, `λ = -cᵀA v / cᵀb`, and the flow is `(I - b cᵀ/cᵀb) A`
//!   restricted to that hyperplane.

use std::cmp::Ordering;

use nalgebra::{Complex, DMatrix, DVector};

use crate::discretize::{fixed_lambda_jacobian, jacobian_dense, Grid, State};
use crate::error::{Error, Result};
use crate::model::Params;

pub const DEFAULT_MARGIN: f64 = 1e-8;

/// The bordered Jacobian at `S`, as a dense matrix.
pub fn linearized_matrix(s: &State, eps: f64, p: &Params) -> Result<DMatrix<f64>> {
    jacobian_dense(s, eps, p)
}

/// Eliminates the trailing row and column of a bordered matrix as described
/// in the module docs. The result has size `N` (Schur) or `N - 1` (projection).
pub fn reduced_operator(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() - 1;
    let a = m.view((0, 0), (n, n)).into_owned();
    let b: DVector<f64> = m.view((0, n), (n, 1)).column(0).into_owned();
    let c: DVector<f64> = m.view((n, 0), (1, n)).row(0).transpose();
    let d = m[(n, n)];
    let scale = c.abs().sum() * b.amax().max(1.0);
    if d.abs() > 1e-13 * scale {
        return a - &b * c.transpose() / d;
    }

    let cb = c.dot(&b);
    // P A = A - b (cᵀA) / (cᵀb)
    let ct_a = c.transpose() * &a;
    let pa = &a - &b * ct_a / cb;

    // Householder reflector H with H e1 ∝ c; columns 2..N span c⊥.
    let sign = if c[0] >= 0.0 { 1.0 } else { -1.0 };
    let alpha = -sign * c.norm();
    let mut u = c.clone();
    u[0] -= alpha;
    let uu = u.dot(&u);
    let reflect = |mat: &DMatrix<f64>| -> DMatrix<f64> {
        // H M H with H = I - 2 u uᵀ / uᵀu
        let left = mat - (&u * (u.transpose() * mat)) * (2.0 / uu);
        &left - (&left * &u) * u.transpose() * (2.0 / uu)
    };
    let hmh = reflect(&pa);
    hmh.view((1, 1), (n - 1, n - 1)).into_owned()
}

fn order(a: &Complex<f64>, b: &Complex<f64>) -> Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

/// The `count` eigenvalues of largest real part, ties broken by larger imaginary part.
pub fn leading_spectrum(m: &DMatrix<f64>, count: usize) -> Result<Vec<Complex<f64>>> {
    if count > m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: count,
        });
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-14, 10_000)
        .ok_or(Error::ConvergenceFailure)?;
    let mut ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(order);
    ev.truncate(count);
    Ok(ev)
}

/// Spectrum of the reduced operator at `S`, leading `count` values.
pub fn stability_spectrum(
    s: &State,
    eps: f64,
    p: &Params,
    count: usize,
) -> Result<Vec<Complex<f64>>> {
    let red = reduced_operator(&linearized_matrix(s, eps, p)?);
    let count = count.min(red.nrows());
    leading_spectrum(&red, count)
}

/// Largest real part of the reduced spectrum.
pub fn leading_growth_rate(s: &State, eps: f64, p: &Params) -> Result<f64> {
    Ok(stability_spectrum(s, eps, p, 1)?[0].re)
}

fn classify(re: f64, margin: f64) -> Result<bool> {
    if re.abs() < margin {
        return Err(Error::Indeterminate(re));
    }
    Ok(re <= -margin)
}

/// Verdict for a spectrum sorted as by [`leading_spectrum`].
pub fn classify_spectrum(ev: &[Complex<f64>], margin: f64) -> Result<bool> {
    let lead = ev
        .first()
        .ok_or(Error::InsufficientData { needed: 1, have: 0 })?;
    classify(lead.re, margin)
}

/// True iff every growth rate has real part `≤ -margin`.
pub fn is_stable(s: &State, eps: f64, p: &Params, margin: f64) -> Result<bool> {
    classify(leading_growth_rate(s, eps, p)?, margin)
}

/// Stability of `v` as an equilibrium of `v_t = ε v'' + f(v, λ)` with `λ` frozen.
pub fn is_stable_fixed_lambda(
    v: &[f64],
    lambda: f64,
    eps: f64,
    p: &Params,
    margin: f64,
) -> Result<bool> {
    let grid = Grid::new(v.len() - 1, p.l);
    let m = fixed_lambda_jacobian(v, lambda, eps, &grid, p, 0).to_dense();
    classify(leading_spectrum(&m, 1)?[0].re, margin)
}
