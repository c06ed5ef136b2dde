//! Vertex-centred finite differences for the augmented system in `(v, λ)`.
//!
//! Unknown layout: `v_0 … v_n` followed by `λ`. Rows `0..=n` hold
//! `ε D²v + f(v_i, λ)` with Neumann ends by ghost reflection, row `n+1` the
//! trapezoid rule applied to `g(v, λ)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::BorderedMatrix;
use crate::model::{
    constant_state, constraint_g, constraint_g_lambda, constraint_g_v, reaction_f,
    reaction_f_lambda, reaction_f_v, Params,
};

pub const DEFAULT_CELLS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub l: f64,
}

impl Grid {
    pub fn new(n: usize, l: f64) -> Self {
        assert!(n >= 2, "grid needs at least two cells");
        assert!(l > 0.0 && l.is_finite(), "domain length must be positive");
        Self { n, l }
    }

    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.l
        } else {
            i as f64 * self.l / self.n as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n {
            0.5 * self.h()
        } else {
            self.h()
        }
    }

    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        let n = self.n;
        let inner: f64 = values[1..n].iter().sum();
        self.h() * (inner + 0.5 * (values[0] + values[n]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub v: Vec<f64>,
    pub lambda: f64,
    pub grid: Grid,
}

impl State {
    pub fn new(v: Vec<f64>, lambda: f64, grid: Grid) -> Result<Self> {
        check_len(&v, &grid)?;
        Ok(Self { v, lambda, grid })
    }

    pub fn constant(value: f64, lambda: f64, grid: Grid) -> Self {
        Self {
            v: vec![value; grid.len()],
            lambda,
            grid,
        }
    }

    /// Flattened unknown vector `(v_0, …, v_n, λ)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = self.v.clone();
        x.push(self.lambda);
        x
    }

    pub fn min_v(&self) -> f64 {
        self.v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_v(&self) -> f64 {
        self.v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Profile mirrored by `x ↦ L - x`.
    pub fn reflected(&self) -> Self {
        let mut v = self.v.clone();
        v.reverse();
        Self {
            v,
            lambda: self.lambda,
            grid: self.grid,
        }
    }
}

pub(crate) fn check_len(v: &[f64], grid: &Grid) -> Result<()> {
    if v.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Second difference with reflected ghost nodes at both ends.
pub fn second_difference(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len() - 1;
    let inv = 1.0 / (h * h);
    let mut out = Vec::with_capacity(n + 1);
    out.push(2.0 * (v[1] - v[0]) * inv);
    for i in 1..n {
        out.push((v[i - 1] - 2.0 * v[i] + v[i + 1]) * inv);
    }
    out.push(2.0 * (v[n - 1] - v[n]) * inv);
    out
}

/// Rows `0..=n` only: `ε D²v + f(v, λ)`.
pub fn pde_residual(v: &[f64], lambda: f64, eps: f64, grid: &Grid, p: &Params) -> Result<Vec<f64>> {
    check_len(v, grid)?;
    let d2 = second_difference(v, grid.h());
    Ok(d2
        .iter()
        .zip(v)
        .map(|(d, &vi)| eps * d + reaction_f(vi, lambda, p))
        .collect())
}

/// Trapezoid rule of `g(v, λ)` over the grid.
pub fn constraint_integral(v: &[f64], lambda: f64, grid: &Grid, p: &Params) -> f64 {
    let g: Vec<f64> = v.iter().map(|&vi| constraint_g(vi, lambda, p)).collect();
    grid.trapezoid(&g)
}

pub fn residual(s: &State, eps: f64, p: &Params) -> Result<Vec<f64>> {
    let mut r = pde_residual(&s.v, s.lambda, eps, &s.grid, p)?;
    r.push(constraint_integral(&s.v, s.lambda, &s.grid, p));
    Ok(r)
}

/// Tridiagonal part `ε D² + diag(f_v)`, with no border.
pub fn fixed_lambda_jacobian(
    v: &[f64],
    lambda: f64,
    eps: f64,
    grid: &Grid,
    p: &Params,
    borders: usize,
) -> BorderedMatrix {
    let n = grid.n;
    let c = eps / (grid.h() * grid.h());
    let mut a = BorderedMatrix::zeros(n + 1, borders);
    for i in 0..=n {
        a.diag[i] = -2.0 * c + reaction_f_v(v[i], lambda, p);
        if i > 0 {
            a.sub[i] = c;
        }
        if i < n {
            a.sup[i] = c;
        }
    }
    a.sup[0] = 2.0 * c;
    a.sub[n] = 2.0 * c;
    a
}

/// Bordered Jacobian of [`residual`] with respect to `(v, λ)`.
pub fn jacobian(s: &State, eps: f64, p: &Params) -> Result<BorderedMatrix> {
    check_len(&s.v, &s.grid)?;
    let grid = &s.grid;
    let mut a = fixed_lambda_jacobian(&s.v, s.lambda, eps, grid, p, 1);
    for (dst, &vi) in a.col_mut(0).iter_mut().zip(&s.v) {
        *dst = reaction_f_lambda(vi, p);
    }
    let mut corner = 0.0;
    for i in 0..=grid.n {
        let w = grid.trapezoid_weight(i);
        a.row_mut(0)[i] = w * constraint_g_v(s.v[i], s.lambda, p);
        corner += w * constraint_g_lambda(s.v[i], p);
    }
    a.set_corner(0, 0, corner);
    Ok(a)
}

pub fn jacobian_dense(s: &State, eps: f64, p: &Params) -> Result<DMatrix<f64>> {
    Ok(jacobian(s, eps, p)?.to_dense())
}

/// Trapezoid projection `(2/L) ∫ (v - v_ref) cos(kπx/L) dx`.
pub fn amplitude_about(v: &[f64], v_ref: f64, grid: &Grid, k: u32) -> f64 {
    let wave = k as f64 * PI / grid.l;
    let integrand: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(i, &vi)| (vi - v_ref) * (wave * grid.node(i)).cos())
        .collect();
    2.0 / grid.l * grid.trapezoid(&integrand)
}

/// Branch amplitude of `s` relative to the constant state of `p`.
pub fn amplitude(s: &State, k: u32, p: &Params) -> Result<f64> {
    let cs = constant_state(p)?;
    Ok(amplitude_about(&s.v, cs.v_bar, &s.grid, k))
}
