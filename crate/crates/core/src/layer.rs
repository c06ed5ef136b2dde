//! Single transition layers for small `ε` (with `b1 = 0`).
//!
//! The inner profile `V0` solves `V'' + f(V, λ) = 0` on the line with
//! `V0(-∞) = 0`, `V0(+∞) = v̄2(λ)`, `V0(0) = v̄2/2`. It is computed from the
//! first integral `V' = √R(V)`, `R(V) = -2 ∫_0^V f`, which exists only at the
//! equal-area value of `λ`. The outer solution is glued on with smooth
//! cut-offs and the result seeds Newton on the full augmented system.

use std::io::{self, Write};

use crate::analytic::{layer_targets, maxwell_gap, maxwell_lambda, LayerTargets};
use crate::discretize::{residual, second_difference, Grid, State};
use crate::error::{Error, Result};
use crate::model::{equilibria_of_lambda, reaction_f, Params};
use crate::output::{fmt_f64, write_table};
use crate::quad::gauss_legendre;
use crate::solve::newton_traced;

pub const DEFAULT_GAP_TOL: f64 = 1e-10;
pub const EPS_LAYER_MAX: f64 = 1e-3;

/// Nodes per side of the stretched `z` grid.
const HALF_NODES: usize = 800;
const MAX_DZ: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Heteroclinic {
    pub lambda: f64,
    pub z: Vec<f64>,
    pub v0: Vec<f64>,
    /// `V0'` at the nodes.
    pub slope: Vec<f64>,
    /// `v̄2 - V0` at the nodes, kept separately so the right tail keeps its digits.
    pub deficit: Vec<f64>,
    pub kappa_minus: f64,
    pub kappa_plus: f64,
    pub v2: f64,
    pub gap: f64,
    /// Largest change of `(V')²/2 + ∫_0^V f` along the orbit, with `V'` integrated
    /// independently from `V'' = -f(V)`.
    pub energy_drift: f64,
}

/// `f(v, λ) = v (v - v̄2) (b2 λ / ((1+v)(1+v̄2)) - c2)`, free of cancellation near both roots.
fn factored_f(v: f64, lambda: f64, v2: f64, p: &Params) -> f64 {
    v * (v - v2) * (p.b2 * lambda / ((1.0 + v) * (1.0 + v2)) - p.c2)
}

struct Orbit<'a> {
    lambda: f64,
    v2: f64,
    p: &'a Params,
}

impl Orbit<'_> {
    fn f(&self, v: f64) -> f64 {
        factored_f(v, self.lambda, self.v2, self.p)
    }

    /// `-2 ∫_0^V f`, for the left half.
    fn radicand_left(&self, v: f64) -> f64 {
        -2.0 * gauss_legendre(|u| self.f(u), 0.0, v)
    }

    /// `2 ∫_0^U f(v̄2 - w) dw`, for the right half in the deficit `U = v̄2 - V`.
    fn radicand_right(&self, u: f64) -> f64 {
        2.0 * gauss_legendre(|w| self.f_deficit(w), 0.0, u)
    }

    /// `f(v̄2 - w)` written in `w` so it stays relative-accurate as `w → 0`.
    fn f_deficit(&self, w: f64) -> f64 {
        let v = self.v2 - w;
        -v * w * (self.p.b2 * self.lambda / ((1.0 + v) * (1.0 + self.v2)) - self.p.c2)
    }
}

/// Integrates `y' = rhs(y)` for `y = (q, w)` over `[0, span]` with RK4 substeps.
fn rk4<F: Fn(f64, f64) -> Result<(f64, f64)>>(
    mut q: f64,
    mut w: f64,
    span: f64,
    rhs: &F,
) -> Result<(f64, f64)> {
    let steps = (span / MAX_DZ).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    for _ in 0..steps {
        let (k1q, k1w) = rhs(q, w)?;
        let (k2q, k2w) = rhs(q + 0.5 * h * k1q, w + 0.5 * h * k1w)?;
        let (k3q, k3w) = rhs(q + 0.5 * h * k2q, w + 0.5 * h * k2w)?;
        let (k4q, k4w) = rhs(q + h * k3q, w + h * k3w)?;
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    }
    Ok((q, w))
}

/// Heteroclinic connection `0 → v̄2(λ)` at a balanced `λ`.
///
/// `z_max` defaults to `40 / min(κ-, κ+)`.
pub fn heteroclinic(
    lambda: f64,
    p: &Params,
    z_max: Option<f64>,
    gap_tol: f64,
) -> Result<Heteroclinic> {
    let eq = equilibria_of_lambda(lambda, p)?;
    let v2 = eq.v2;
    let gap = maxwell_gap(lambda, p)?;
    if gap.abs() > gap_tol {
        return Err(Error::Unbalanced { gap, tol: gap_tol });
    }
    let kappa_minus = (p.b2 * lambda - p.a2).sqrt();
    let kappa_plus = (-v2 * (p.b2 * lambda / (1.0 + v2).powi(2) - p.c2)).sqrt();
    if !(kappa_minus > 0.0 && kappa_plus > 0.0) {
        return Err(Error::NegativeEnergy(0.0));
    }
    let z_max = z_max.unwrap_or(40.0 / kappa_minus.min(kappa_plus));

    let orbit = Orbit { lambda, v2, p };
    let half = 0.5 * v2;

    // Stretched nodes z = σ artanh(ζ), ζ uniform; dense in the core, sparse in the tails.
    let sigma = z_max / 3.0;
    let zeta_max = (z_max / sigma).tanh();
    let zs: Vec<f64> = (0..=HALF_NODES)
        .map(|i| sigma * (zeta_max * i as f64 / HALF_NODES as f64).atanh())
        .collect();

    let sqrt_checked = |r: f64, at: f64| {
        if r < 0.0 {
            Err(Error::NegativeEnergy(at))
        } else {
            Ok(r.sqrt())
        }
    };

    // Left half in s = -z: V' = -√R_L(V), W' = f(V).
    let w0_left = sqrt_checked(orbit.radicand_left(half), half)?;
    let rhs_left = |v: f64, _w: f64| -> Result<(f64, f64)> {
        let r = orbit.radicand_left(v.max(0.0));
        Ok((-sqrt_checked(r, v)?, orbit.f(v)))
    };
    // Right half in z: U' = -√R_R(U), W' = -f(v̄2 - U).
    let w0_right = sqrt_checked(orbit.radicand_right(half), half)?;
    let rhs_right = |u: f64, _w: f64| -> Result<(f64, f64)> {
        let r = orbit.radicand_right(u.max(0.0));
        Ok((-sqrt_checked(r, v2 - u)?, -orbit.f_deficit(u)))
    };

    let mut left = vec![(half, w0_left)];
    let mut right = vec![(half, w0_right)];
    let e_left0 = 0.5 * w0_left * w0_left - 0.5 * orbit.radicand_left(half);
    let e_right0 = 0.5 * w0_right * w0_right - 0.5 * orbit.radicand_right(half);
    let mut drift: f64 = 0.0;
    for i in 1..zs.len() {
        let dz = zs[i] - zs[i - 1];
        let (v, w) = *left.last().expect("non-empty");
        let (v, w) = rk4(v, w, dz, &rhs_left)?;
        drift = drift.max((0.5 * w * w - 0.5 * orbit.radicand_left(v) - e_left0).abs());
        left.push((v, w));
        let (u, w) = *right.last().expect("non-empty");
        let (u, w) = rk4(u, w, dz, &rhs_right)?;
        drift = drift.max((0.5 * w * w - 0.5 * orbit.radicand_right(u) - e_right0).abs());
        right.push((u, w));
    }

    let mut z = Vec::with_capacity(2 * HALF_NODES + 1);
    let mut v0 = Vec::with_capacity(z.capacity());
    let mut slope = Vec::with_capacity(z.capacity());
    let mut deficit = Vec::with_capacity(z.capacity());
    for i in (1..zs.len()).rev() {
        let v = left[i].0;
        z.push(-zs[i]);
        v0.push(v);
        slope.push(orbit.radicand_left(v).max(0.0).sqrt());
        deficit.push(v2 - v);
    }
    for (i, &zi) in zs.iter().enumerate() {
        let u = right[i].0;
        z.push(zi);
        v0.push(v2 - u);
        slope.push(orbit.radicand_right(u).max(0.0).sqrt());
        deficit.push(u);
    }

    Ok(Heteroclinic {
        lambda,
        z,
        v0,
        slope,
        deficit,
        kappa_minus,
        kappa_plus,
        v2,
        gap,
        energy_drift: drift,
    })
}

impl Heteroclinic {
    pub fn z_max(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    /// `V0(z)`: monotone cubic Hermite inside the grid, exponential tails outside.
    pub fn eval(&self, z: f64) -> f64 {
        let last = self.z.len() - 1;
        if z <= self.z[0] {
            return self.v0[0] * (self.kappa_minus * (z - self.z[0])).exp();
        }
        if z >= self.z[last] {
            return self.v2 - self.deficit[last] * (-self.kappa_plus * (z - self.z[last])).exp();
        }
        let i = self.z.partition_point(|&zz| zz <= z) - 1;
        let (z0, z1) = (self.z[i], self.z[i + 1]);
        let h = z1 - z0;
        let (y0, y1) = (self.v0[i], self.v0[i + 1]);
        let delta = (y1 - y0) / h;
        let (mut m0, mut m1) = (self.slope[i], self.slope[i + 1]);
        if delta <= 0.0 {
            m0 = 0.0;
            m1 = 0.0;
        } else {
            let (a, b) = (m0 / delta, m1 / delta);
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                m0 = tau * a * delta;
                m1 = tau * b * delta;
            }
        }
        let t = (z - z0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1
    }

    /// Least-squares slope of `ln V0` over the first `count` nodes, and of
    /// `ln(v̄2 - V0)` over the last `count` nodes (sign flipped).
    pub fn tail_rates(&self, count: usize) -> (f64, f64) {
        let fit = |xs: &[f64], ys: &[f64]| {
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
            sxy / sxx
        };
        let m = self.z.len();
        let zl = &self.z[..count];
        let yl: Vec<f64> = self.v0[..count].iter().map(|v| v.ln()).collect();
        let zr = &self.z[m - count..];
        let yr: Vec<f64> = self.deficit[m - count..].iter().map(|u| u.ln()).collect();
        (fit(zl, &yl), -fit(zr, &yr))
    }
}

/// `C^∞` step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    let phi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let (a, b) = (phi(t), phi(1.0 - t));
        a / (a + b)
    }
}

/// Plateau cut-off: 1 on `|y| ≤ L*/4`, 0 on `|y| ≥ L*/2`.
pub fn chi0(y: f64, lstar: f64) -> f64 {
    let q = lstar / 4.0;
    smooth_step(2.0 - y.abs() / q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerAnsatz {
    pub x0: f64,
    pub eps: f64,
    pub lstar: f64,
    pub lambda: f64,
    pub v2: f64,
    pub grid: Grid,
    pub v_eps: Vec<f64>,
    pub chi0: Vec<f64>,
    pub chi1: Vec<f64>,
}

/// `V_ε(x) = χ0(x - x0) V0((x - x0)/√ε) + χ1(x - x0)` sampled on `grid`.
pub fn compose_ansatz(h: &Heteroclinic, x0: f64, eps: f64, grid: &Grid) -> LayerAnsatz {
    assert!(
        x0 > 0.0 && x0 < grid.l,
        "layer position must lie inside the domain"
    );
    assert!(eps > 0.0, "ε must be positive");
    let lstar = x0.min(grid.l - x0);
    let root = eps.sqrt();
    let mut v_eps = Vec::with_capacity(grid.len());
    let mut c0 = Vec::with_capacity(grid.len());
    let mut c1 = Vec::with_capacity(grid.len());
    for x in grid.nodes() {
        let y = x - x0;
        let a = chi0(y, lstar);
        let b = if y <= 0.0 { 0.0 } else { h.v2 * (1.0 - a) };
        let inner = if a > 0.0 { a * h.eval(y / root) } else { 0.0 };
        v_eps.push(inner + b);
        c0.push(a);
        c1.push(b);
    }
    LayerAnsatz {
        x0,
        eps,
        lstar,
        lambda: h.lambda,
        v2: h.v2,
        grid: *grid,
        v_eps,
        chi0: c0,
        chi1: c1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GResidual {
    pub sup_g: f64,
    /// `sup |ε D²V_ε + f(V_ε, λ)|`, i.e. `√ε · sup_g`.
    pub raw_sup: f64,
    pub profile: Vec<f64>,
}

/// Scaled residual `ε^{-1/2} (ε D²V_ε + f(V_ε, λ))` of the ansatz.
pub fn residual_g(ansatz: &LayerAnsatz, lambda: f64, p: &Params) -> GResidual {
    residual_g_of(&ansatz.v_eps, &ansatz.grid, ansatz.eps, lambda, p)
}

pub fn residual_g_of(v: &[f64], grid: &Grid, eps: f64, lambda: f64, p: &Params) -> GResidual {
    let d2 = second_difference(v, grid.h());
    let root = eps.sqrt();
    let profile: Vec<f64> = d2
        .iter()
        .zip(v)
        .map(|(d, &vi)| (eps * d + reaction_f(vi, lambda, p)) / root)
        .collect();
    let sup_g = profile.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    GResidual {
        sup_g,
        raw_sup: sup_g * root,
        profile,
    }
}

/// `𝓘(ε, λ) = ∫ (a1 - c1 v)/(1+v) dx - ∫ b1 λ/(1+v)² dx` by the trapezoid rule on
/// the uniform grid implied by `v`.
pub fn constraint_i(_eps: f64, lambda: f64, v: &[f64], p: &Params) -> f64 {
    let grid = Grid::new(v.len() - 1, p.l);
    crate::discretize::constraint_integral(v, lambda, &grid, p)
}

/// Limit of `∂𝓘/∂λ` along step profiles `0 | v̄2(λ)` jumping at `x0`:
/// `(a1 + c1) b2 (L - x0) / ((1 + v̄2)² √((a2+c2)² - 4 b2 c2 λ))`.
pub fn constraint_i_lambda_limit(x0: f64, lambda: f64, p: &Params) -> Result<f64> {
    let v2 = equilibria_of_lambda(lambda, p)?.v2;
    let disc = (p.a2 + p.c2).powi(2) - 4.0 * p.b2 * p.c2 * lambda;
    Ok((p.a1 + p.c1) * p.b2 * (p.l - x0) / ((1.0 + v2).powi(2) * disc.sqrt()))
}

/// First `x` where `v` crosses `level` going up, by linear interpolation.
pub fn crossing(v: &[f64], grid: &Grid, level: f64) -> Option<f64> {
    (0..grid.n).find_map(|i| {
        if v[i] < level && v[i + 1] >= level {
            let t = (level - v[i]) / (v[i + 1] - v[i]);
            Some(grid.node(i) + t * grid.h())
        } else {
            None
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerOptions {
    /// Grid cells; `None` picks `max(400, ⌈12 L / √ε⌉)`.
    pub n: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub gap_tol: f64,
}

impl Default for LayerOptions {
    fn default() -> Self {
        Self {
            n: None,
            tol: 1e-10,
            max_iter: 60,
            gap_tol: DEFAULT_GAP_TOL,
        }
    }
}

pub fn default_cells(eps: f64, l: f64) -> usize {
    ((12.0 * l / eps.sqrt()).ceil() as usize).max(400)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerReport {
    pub state: State,
    pub eps: f64,
    pub x0: f64,
    pub lambda_eps: f64,
    /// Upward crossing of `v̄2(λ_ε)/2`.
    pub layer_x: f64,
    /// `sup |v_ε - V_ε|` with `V_ε` composed at `layer_x` from the balanced profile.
    pub sup_dev: f64,
    /// `sup |v_ε - V_ε|` with `V_ε` the seed composed at the requested `x0`.
    pub seed_dev: f64,
    pub targets: LayerTargets,
    pub maxwell_gap_at_lambda0: f64,
    /// The balanced `λ*` whose heteroclinic built the seed.
    pub lambda_balanced: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Builds `V_ε` at `x0`, seeds Newton with `(V_ε, λ̄0)` and reports on the converged state.
pub fn layer_solve(x0: f64, eps: f64, p: &Params, opts: &LayerOptions) -> Result<LayerReport> {
    if p.b1 != 0.0 {
        return Err(Error::RequiresB1Zero(p.b1));
    }
    let targets = layer_targets(x0, p)?;
    if !(eps > 0.0 && eps <= EPS_LAYER_MAX) {
        return Err(Error::InvalidParams(format!(
            "layer runs need 0 < eps <= {EPS_LAYER_MAX}, got {eps}"
        )));
    }
    let n = opts.n.unwrap_or_else(|| default_cells(eps, p.l));
    let grid = Grid::new(n, p.l);
    let lambda_star = maxwell_lambda(p)?;
    let het = heteroclinic(lambda_star, p, None, opts.gap_tol)?;
    let seed = compose_ansatz(&het, x0, eps, &grid);
    let init = State {
        v: seed.v_eps.clone(),
        lambda: targets.lambda0_bar,
        grid,
    };

    let (state, history) = newton_traced(&init, eps, p, opts.tol, opts.max_iter)
        .map_err(|e| Error::SeedRejected(e.to_string()))?;

    let lambda_eps = state.lambda;
    let v2_eps = equilibria_of_lambda(lambda_eps, p)?.v2;
    let layer_x = crossing(&state.v, &grid, 0.5 * v2_eps)
        .ok_or_else(|| Error::SeedRejected("converged profile has no transition".into()))?;
    let sup = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let recentred = compose_ansatz(&het, layer_x, eps, &grid);
    let sup_dev = sup(&state.v, &recentred.v_eps);
    let seed_dev = sup(&state.v, &seed.v_eps);
    let res = residual(&state, eps, p)?
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));

    Ok(LayerReport {
        state,
        eps,
        x0,
        lambda_eps,
        layer_x,
        sup_dev,
        seed_dev,
        targets,
        maxwell_gap_at_lambda0: maxwell_gap(targets.lambda0_bar, p)?,
        lambda_balanced: lambda_star,
        iterations: history.len() - 1,
        residual: res,
    })
}

impl LayerReport {
    /// Columns `x, v, V_eps, G_eps`, with `V_eps` the re-centred ansatz.
    pub fn write_profile_csv<W: Write>(
        &self,
        w: &mut W,
        p: &Params,
        header: &[(String, String)],
    ) -> io::Result<()> {
        let grid = self.state.grid;
        let het =
            heteroclinic(self.lambda_balanced, p, None, f64::INFINITY).map_err(io::Error::other)?;
        let ans = compose_ansatz(&het, self.layer_x, self.eps, &grid);
        let g = residual_g(&ans, het.lambda, p);
        let rows = grid.nodes().into_iter().enumerate().map(|(i, x)| {
            vec![
                fmt_f64(x),
                fmt_f64(self.state.v[i]),
                fmt_f64(ans.v_eps[i]),
                fmt_f64(g.profile[i]),
            ]
        });
        write_table(w, header, &["x", "v", "V_eps", "G_eps"], rows)
    }
}

/// Mirrors `s` about `x = L` onto `[0, 2L]`.
pub fn reflect_extend(s: &State) -> State {
    let n = s.grid.n;
    let mut v = s.v.clone();
    v.extend(s.v[..n].iter().rev());
    State {
        v,
        lambda: s.lambda,
        grid: Grid::new(2 * n, 2.0 * s.grid.l),
    }
}

/// Number of crossings of `level` (either direction).
pub fn count_crossings(v: &[f64], level: f64) -> usize {
    v.windows(2)
        .filter(|w| (w[0] - level) * (w[1] - level) < 0.0)
        .count()
}
