//! Problem instance, reaction terms and the constant states they admit.
//!
//! The steady problem is
//!
//! ```text
//! eps v'' + f(v, lambda) = 0 on (0, L),  v'(0) = v'(L) = 0,
//! int_0^L g(v, lambda) dx = 0,
//! ```
//!
//! with `f(v, λ) = (a2 - b2 λ/(1+v) - c2 v) v` and
//! `g(v, λ) = (a1 - c1 v)/(1+v) - b1 λ/(1+v)^2`.

use crate::error::{Error, Result};

/// Reaction coefficients and domain length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub l: f64,
}

impl Params {
    /// Validated constructor: `a1, c1, a2, b2, c2, L > 0` and `b1 >= 0`.
    pub fn new(a1: f64, b1: f64, c1: f64, a2: f64, b2: f64, c2: f64, l: f64) -> Result<Self> {
        let p = Params {
            a1,
            b1,
            c1,
            a2,
            b2,
            c2,
            l,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a1", self.a1),
            ("c1", self.c1),
            ("a2", self.a2),
            ("b2", self.b2),
            ("c2", self.c2),
            ("L", self.l),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.b1.is_finite() && self.b1 >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "b1 must be nonnegative, got {}",
                self.b1
            )));
        }
        Ok(())
    }

    /// `A = a1/a2`.
    pub fn ratio_a(&self) -> f64 {
        self.a1 / self.a2
    }

    /// `B = b1/b2`.
    pub fn ratio_b(&self) -> f64 {
        self.b1 / self.b2
    }

    /// `C = c1/c2`.
    pub fn ratio_c(&self) -> f64 {
        self.c1 / self.c2
    }

    /// Open window `(a2/b2, (a2+c2)^2/(4 b2 c2))` of λ for which `f(·, λ)` is bistable.
    pub fn lambda_window(&self) -> (f64, f64) {
        (self.a2 / self.b2, self.lambda_max())
    }

    /// Largest λ for which `f(·, λ)` still has real positive roots.
    pub fn lambda_max(&self) -> f64 {
        (self.a2 + self.c2).powi(2) / (4.0 * self.b2 * self.c2)
    }
}

/// Reaction term `f(v, λ)`.
pub fn reaction_f(v: f64, lambda: f64, p: &Params) -> f64 {
    (p.a2 - p.b2 * lambda / (1.0 + v) - p.c2 * v) * v
}

/// Integrand of the nonlocal constraint, `g(v, λ)`.
pub fn constraint_g(v: f64, lambda: f64, p: &Params) -> f64 {
    (p.a1 - p.c1 * v) / (1.0 + v) - p.b1 * lambda / (1.0 + v).powi(2)
}

/// Spatially homogeneous positive solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantState {
    pub v_bar: f64,
    pub lambda_bar: f64,
}

/// Closed-form constant state. Requires `B > A > C` or `B < A < C`.
pub fn constant_state(p: &Params) -> Result<ConstantState> {
    let (a, b, c) = (p.ratio_a(), p.ratio_b(), p.ratio_c());
    if !ordering_holds(p) {
        return Err(Error::OrderingViolated { a, b, c });
    }
    let v_bar = p.a2 / p.c2 * (b - a) / (b - c);
    let lambda_bar = p.a2 / p.b2 * (a - c) / (b - c) * (1.0 + v_bar);
    Ok(ConstantState { v_bar, lambda_bar })
}

fn ordering_holds(p: &Params) -> bool {
    let (a, b, c) = (p.ratio_a(), p.ratio_b(), p.ratio_c());
    (b > a && a > c) || (b < a && a < c)
}

/// First, second and third partials of `f` and `g` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivBundle {
    pub f_v: f64,
    pub f_lambda: f64,
    pub f_vlambda: f64,
    pub f_vv: f64,
    pub f_vvv: f64,
    pub g_v: f64,
    pub g_lambda: f64,
    pub g_vv: f64,
}

/// Analytic partials of `f` and `g`.
pub fn deriv_bundle(v: f64, lambda: f64, p: &Params) -> DerivBundle {
    let q = 1.0 + v;
    let q2 = q * q;
    let q3 = q2 * q;
    let q4 = q3 * q;
    DerivBundle {
        f_v: p.a2 - p.b2 * lambda / q2 - 2.0 * p.c2 * v,
        f_lambda: -p.b2 * v / q,
        f_vlambda: -p.b2 / q2,
        f_vv: 2.0 * p.b2 * lambda / q3 - 2.0 * p.c2,
        f_vvv: -6.0 * p.b2 * lambda / q4,
        g_v: -(p.a1 + p.c1) / q2 + 2.0 * p.b1 * lambda / q3,
        g_lambda: -p.b1 / q2,
        g_vv: 2.0 * (p.a1 + p.c1) / q3 - 6.0 * p.b1 * lambda / q4,
    }
}

/// `∂f/∂v` alone; used in assembly loops.
#[inline]
pub fn reaction_f_v(v: f64, lambda: f64, p: &Params) -> f64 {
    p.a2 - p.b2 * lambda / (1.0 + v).powi(2) - 2.0 * p.c2 * v
}

/// `∂f/∂λ` alone.
#[inline]
pub fn reaction_f_lambda(v: f64, p: &Params) -> f64 {
    -p.b2 * v / (1.0 + v)
}

/// `∂g/∂v` alone.
#[inline]
pub fn constraint_g_v(v: f64, lambda: f64, p: &Params) -> f64 {
    -(p.a1 + p.c1) / (1.0 + v).powi(2) + 2.0 * p.b1 * lambda / (1.0 + v).powi(3)
}

/// `∂g/∂λ` alone.
#[inline]
pub fn constraint_g_lambda(v: f64, p: &Params) -> f64 {
    -p.b1 / (1.0 + v).powi(2)
}

/// The three roots `0 <= v1 <= v2` of `f(·, λ)` (with `v0 = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibria {
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
}

/// Roots of `f(·, λ)` for the frozen-λ problem.
pub fn equilibria_of_lambda(lambda: f64, p: &Params) -> Result<Equilibria> {
    let scale = (p.a2 + p.c2).powi(2);
    let mut disc = scale - 4.0 * p.b2 * p.c2 * lambda;
    if disc.abs() < 1e-14 * scale {
        disc = 0.0;
    }
    if disc < 0.0 {
        return Err(Error::NoRealRoots {
            lambda,
            max: p.lambda_max(),
        });
    }
    let root = disc.sqrt();
    let v2 = (p.a2 - p.c2 + root) / (2.0 * p.c2);
    // Product of the roots is (b2 λ - a2)/c2; avoids cancellation near λ = a2/b2.
    let v1 = if v2 != 0.0 {
        (p.b2 * lambda - p.a2) / (p.c2 * v2)
    } else {
        (p.a2 - p.c2 - root) / (2.0 * p.c2)
    };
    Ok(Equilibria { v0: 0.0, v1, v2 })
}

/// Outcome of the three admissibility predicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    /// `B > A > C` or `B < A < C`: a positive constant state exists.
    pub ordering: bool,
    /// `v̄ < (a2-c2)/(2c2)` and `a2 > c2`: bifurcation values are positive.
    pub positivity: bool,
    pub lambda_window: (f64, f64),
}

pub fn admissible(p: &Params) -> Admissibility {
    let ordering = ordering_holds(p);
    let positivity = match constant_state(p) {
        Ok(cs) => p.a2 > p.c2 && cs.v_bar < (p.a2 - p.c2) / (2.0 * p.c2),
        Err(_) => false,
    };
    Admissibility {
        ordering,
        positivity,
        lambda_window: p.lambda_window(),
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::Params;

    /// b1 = 0 instance with vbar = 1, lambdabar = 6.
    pub fn p_b() -> Params {
        Params::new(1.0, 0.0, 1.0, 4.0, 1.0, 1.0, 1.0).unwrap()
    }

    /// b1 > 0 instance with vbar = 1, lambdabar = 3.
    pub fn p_a() -> Params {
        Params::new(2.0, 1.2, 0.2, 4.0, 2.0, 1.0, 1.0).unwrap()
    }
}
