//! Steady states, pitchfork branches and transition layers of the shadow
//! system
//!
//! ```text
//! ε v'' + f(v, λ) = 0 on (0, L),   v'(0) = v'(L) = 0,   ∫_0^L g(v, λ) dx = 0
//! ```
//!
//! with `f = (a2 - b2 λ/(1+v) - c2 v) v` and
//! `g = (a1 - c1 v)/(1+v) - b1 λ/(1+v)^2`.

pub mod analytic;
pub mod continuation;
pub mod discretize;
pub mod eigen;
pub mod error;
pub mod layer;
pub mod linalg;
pub mod model;
pub mod output;
pub mod quad;
pub mod solve;

pub use error::{Error, Result};
pub use model::{ConstantState, Params};
