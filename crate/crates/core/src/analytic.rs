//! Closed-form bifurcation quantities.
//!
//! Everything here is evaluated from the constant state and the reaction
//! partials; no discretization is involved.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{
    constant_state, deriv_bundle, equilibria_of_lambda, reaction_f, ConstantState, Params,
};
use crate::quad;

fn wavenumber_sq(k: u32, l: f64) -> f64 {
    (k as f64 * PI / l).powi(2)
}

fn bifurcating_state(p: &Params) -> Result<ConstantState> {
    let cs = constant_state(p)?;
    if !(p.a2 > p.c2 && cs.v_bar < (p.a2 - p.c2) / (2.0 * p.c2)) {
        return Err(Error::NotPositive);
    }
    Ok(cs)
}

fn require_b1_zero(p: &Params) -> Result<()> {
    if p.b1 != 0.0 {
        return Err(Error::RequiresB1Zero(p.b1));
    }
    Ok(())
}

/// Bifurcation value `ε_k = (a2 - c2 - 2 c2 v̄) v̄ / ((1+v̄)(kπ/L)^2)`.
pub fn bifurcation_eps(k: u32, p: &Params) -> Result<f64> {
    assert!(k >= 1, "mode index starts at 1");
    let cs = bifurcating_state(p)?;
    let v = cs.v_bar;
    Ok((p.a2 - p.c2 - 2.0 * p.c2 * v) * v / ((1.0 + v) * wavenumber_sq(k, p.l)))
}

/// `t = b2 λ̄ / (1+v̄)^2`.
pub fn t_variable(cs: &ConstantState, p: &Params) -> f64 {
    p.b2 * cs.lambda_bar / (1.0 + cs.v_bar).powi(2)
}

/// Coefficients of the pitchfork normal form at `(v̄, λ̄, ε_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchforkCoeffs {
    pub k: u32,
    pub eps_k: f64,
    /// First-order coefficient of `ε_k(s)`; identically zero.
    pub k1: f64,
    /// Second-order coefficient from the closed form `F(t)/(24 v̄ (1+v̄)^2 (t - c2))`.
    pub k2: f64,
    /// Second-order coefficient from the s^3 solvability condition with exact partials.
    pub k2_expansion: f64,
    pub lambda2_bar: f64,
    /// `∫ φ2 dx`.
    pub int_phi2: f64,
    /// `∫ φ2 cos(2kπx/L) dx`.
    pub int_phi2_cos2k: f64,
    pub t: f64,
}

/// Pitchfork coefficients for mode `k`. Requires `b1 = 0`.
pub fn pitchfork_coeffs(k: u32, p: &Params) -> Result<PitchforkCoeffs> {
    require_b1_zero(p)?;
    let eps_k = bifurcation_eps(k, p)?;
    let cs = constant_state(p)?;
    let v = cs.v_bar;
    let t = t_variable(&cs, p);
    let chart = sign_chart(p)?;
    let f_t = chart.eval(t);
    let scale = 2.0 * p.l * p.l / (k as f64 * PI).powi(2);
    let k2 = scale * f_t / (24.0 * v * (1.0 + v).powi(2) * (t - p.c2));

    let d = deriv_bundle(v, cs.lambda_bar, p);
    let det = d.f_v * d.g_lambda - d.f_lambda * d.g_v;
    let int_phi2 = (d.f_lambda * d.g_vv - d.f_vv * d.g_lambda) * p.l / (4.0 * det);
    let lambda2_bar = (d.f_vv * d.g_v - d.f_v * d.g_vv) / (4.0 * det);
    let int_phi2_cos2k = p.l / (24.0 * eps_k) * (p.l / (k as f64 * PI)).powi(2) * d.f_vv;

    Ok(PitchforkCoeffs {
        k,
        eps_k,
        k1: 0.0,
        k2,
        k2_expansion: expansion_k2(k, p)?,
        lambda2_bar,
        int_phi2,
        int_phi2_cos2k,
        t,
    })
}

/// `K2` from the third-order solvability condition, valid for any `b1 >= 0`:
///
/// ```text
/// (kπ)^2/(2L^2) K2 = [f_vv g_vv f_λ - f_vλ (f_v g_vv - g_v f_vv)] / (8 det)
///                    + f_vv^2/(48 f_v) + f_vvv/16,   det = f_v g_λ - g_v f_λ
/// ```
pub fn expansion_k2(k: u32, p: &Params) -> Result<f64> {
    let cs = bifurcating_state(p)?;
    let d = deriv_bundle(cs.v_bar, cs.lambda_bar, p);
    let det = d.f_v * d.g_lambda - d.g_v * d.f_lambda;
    let rhs = (d.f_vv * d.g_vv * d.f_lambda - d.f_vlambda * (d.f_v * d.g_vv - d.g_v * d.f_vv))
        / (8.0 * det)
        + d.f_vv * d.f_vv / (48.0 * d.f_v)
        + d.f_vvv / 16.0;
    Ok(rhs * 2.0 * p.l * p.l / (k as f64 * PI).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    VbarBelow4_3,
    VbarEq4_3,
    VbarAbove4_3,
}

/// The quadratic `F(t) = α t^2 + β t + γ` whose sign sets the sign of `K2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignChart {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Real roots of `F` in `(c2, ∞)`, ascending.
    pub roots_in_window: Vec<f64>,
    pub regime: Regime,
    pub c2: f64,
}

impl SignChart {
    pub fn eval(&self, t: f64) -> f64 {
        (self.alpha * t + self.beta) * t + self.gamma
    }

    pub fn discriminant(&self) -> f64 {
        self.beta * self.beta - 4.0 * self.alpha * self.gamma
    }
}

const VBAR_4_3_TOL: f64 = 1e-12;

/// Builds `F` for the instance and locates its roots right of `c2`.
pub fn sign_chart(p: &Params) -> Result<SignChart> {
    require_b1_zero(p)?;
    let cs = constant_state(p)?;
    Ok(sign_chart_for(cs.v_bar, p.c2))
}

/// `F` as a function of `v̄` and `c2` alone.
pub fn sign_chart_for(v: f64, c2: f64) -> SignChart {
    let alpha = 3.0 * v - 4.0;
    let beta = -(12.0 * v * v + 7.0 * v - 8.0) * c2;
    let gamma = (14.0 * v * v + 4.0 * v - 4.0) * c2 * c2;
    let regime = if (v - 4.0 / 3.0).abs() <= VBAR_4_3_TOL {
        Regime::VbarEq4_3
    } else if v < 4.0 / 3.0 {
        Regime::VbarBelow4_3
    } else {
        Regime::VbarAbove4_3
    };
    let mut chart = SignChart {
        alpha,
        beta,
        gamma,
        roots_in_window: Vec::new(),
        regime,
        c2,
    };

    let candidates: Vec<f64> = if regime == Regime::VbarEq4_3 {
        vec![-gamma / beta]
    } else {
        let disc = chart.discriminant();
        if disc < 0.0 {
            Vec::new()
        } else {
            let q = -0.5 * (beta + beta.signum() * disc.sqrt());
            let mut r = Vec::with_capacity(2);
            if q != 0.0 {
                r.push(gamma / q);
            }
            if alpha != 0.0 {
                r.push(q / alpha);
            }
            r
        }
    };
    let mut roots: Vec<f64> = candidates
        .into_iter()
        .filter(|r| r.is_finite())
        .map(|mut r| {
            // One Newton polish against the un-linearized polynomial.
            let slope = 2.0 * chart.alpha * r + chart.beta;
            if slope != 0.0 && regime != Regime::VbarEq4_3 {
                r -= chart.eval(r) / slope;
            }
            r
        })
        .filter(|&r| r > c2)
        .collect();
    roots.sort_by(f64::total_cmp);
    chart.roots_in_window = roots;
    chart
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Branch bends toward `ε < ε_k`.
    Left,
    /// Branch bends toward `ε > ε_k`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityClass {
    pub direction: Direction,
    pub stable: bool,
    pub k2: f64,
}

/// Direction and stability of the branch bifurcating at `ε_k`, from the sign of `K2`.
pub fn classify_stability(k: u32, p: &Params) -> Result<StabilityClass> {
    let pc = pitchfork_coeffs(k, p)?;
    let chart = sign_chart(p)?;
    let f_t = chart.eval(pc.t);
    if f_t.abs() <= 1e-8 * p.c2 * p.c2 {
        return Err(Error::Degenerate { t: pc.t, f_t });
    }
    let (direction, stable) = if pc.k2 > 0.0 {
        (Direction::Right, false)
    } else {
        (Direction::Left, true)
    };
    Ok(StabilityClass {
        direction,
        stable,
        k2: pc.k2,
    })
}

/// Rate at which the critical eigenvalue of the constant state crosses zero:
/// `dμ/dε (ε_k) = -(kπ/L)^2`.
pub fn mu_dot(k: u32, p: &Params) -> f64 {
    -wavenumber_sq(k, p.l)
}

/// Limits predicted for a single-transition-layer solution at `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerTargets {
    pub x1: f64,
    pub x2: f64,
    pub x0: f64,
    /// `v̄2(λ̄0) = a1 L / (c1 L - (a1 + c1) x0)`.
    pub v2_limit: f64,
    pub lambda0_bar: f64,
}

pub fn layer_interval(p: &Params) -> Result<(f64, f64)> {
    require_b1_zero(p)?;
    if !(p.a2 - p.c2 > 2.0 * p.a1 * p.c2 / p.c1) {
        return Err(Error::HypothesisFailed);
    }
    let denom = (p.a1 + p.c1) * (p.a2 - p.c2);
    let x1 = (((p.a2 - p.c2) * p.c1 - 2.0 * p.a1 * p.c2) * p.l / denom).max(0.0);
    let x2 = ((p.a2 - p.c2) * p.c1 - p.a1 * p.c2) * p.l / denom;
    Ok((x1, x2))
}

pub fn layer_targets(x0: f64, p: &Params) -> Result<LayerTargets> {
    let (x1, x2) = layer_interval(p)?;
    if !(x0 > x1 && x0 < x2) {
        return Err(Error::X0OutOfRange { x0, x1, x2 });
    }
    let v2_limit = p.a1 * p.l / (p.c1 * p.l - (p.a1 + p.c1) * x0);
    let lambda0_bar = (p.a2 - p.c2 * v2_limit) * (1.0 + v2_limit) / p.b2;
    Ok(LayerTargets {
        x1,
        x2,
        x0,
        v2_limit,
        lambda0_bar,
    })
}

/// Equal-area defect `∫_0^{v̄2(λ)} f(v, λ) dv`.
pub fn maxwell_gap(lambda: f64, p: &Params) -> Result<f64> {
    let eq = equilibria_of_lambda(lambda, p)?;
    Ok(quad::integrate(
        |v| reaction_f(v, lambda, p),
        0.0,
        eq.v2,
        1e-15,
        1e-14,
    ))
}

/// The balanced λ* in the bistable window where `maxwell_gap` vanishes, by bisection.
pub fn maxwell_lambda(p: &Params) -> Result<f64> {
    let (mut lo, mut hi) = p.lambda_window();
    let mut g_lo = maxwell_gap(lo, p)?;
    let g_hi = maxwell_gap(hi, p)?;
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoMaxwellPoint);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = maxwell_gap(mid, p)?;
        if g == 0.0 {
            return Ok(mid);
        }
        if g.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
