//! Pseudo-arclength continuation in `ε`.
//!
//! Unknowns are `X = (v_0 … v_n, λ, ε)`. Each step predicts along the unit
//! tangent and corrects with Newton on the residual extended by the
//! arclength row `⟨τ, X - X_prev⟩ = Δs`, where
//! `⟨a, b⟩ = (1/L) Σ w_i a_i b_i + a_λ b_λ + a_ε b_ε` with trapezoid weights `w_i`.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::discretize::{
    amplitude_about, constraint_integral, fixed_lambda_jacobian, jacobian, pde_residual,
    second_difference, Grid, State,
};
use crate::eigen::{leading_growth_rate, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::linalg::BorderedMatrix;
use crate::model::{
    constant_state, constraint_g_lambda, constraint_g_v, reaction_f_lambda, reaction_f_v, Params,
};
use crate::output::{fmt_f64, write_table};
use crate::solve::damped_newton;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationConfig {
    /// Number of grid cells.
    pub n: usize,
    /// Initial arclength step.
    pub step: f64,
    /// Upper bound for adaptive step growth.
    pub max_step: f64,
    /// Stop once `|s|` reaches this amplitude.
    pub s_max: f64,
    /// Stop once `ε` falls to this value.
    pub eps_min: f64,
    /// Corrector tolerance on the residual.
    pub tol: f64,
    pub max_points: usize,
    /// Stop when `min v` drops below this floor.
    pub positivity_floor: f64,
    /// Compute the leading growth rate of every point.
    pub stability: bool,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            n: 200,
            step: 0.002,
            max_step: 0.016,
            s_max: 0.05,
            eps_min: 0.0,
            tol: 1e-10,
            max_points: 4000,
            positivity_floor: 1e-3,
            stability: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub s: f64,
    pub eps: f64,
    pub lambda: f64,
    pub state: State,
    pub leading_eig: Option<f64>,
    pub stable: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchEvent {
    /// The `ε` component of the tangent changed sign between points `index - 1` and `index`.
    Fold { index: usize, eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EndReason {
    AmplitudeReached,
    EpsFloor,
    PositivityExhausted,
    LeftDomain,
    StepFailure(String),
    MaxPoints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub k: u32,
    /// Bifurcation value on the grid, `f̄_v / μ_k^h`.
    pub origin_eps: f64,
    pub origin_lambda: f64,
    pub origin_v: f64,
    pub points: Vec<BranchPoint>,
    pub events: Vec<BranchEvent>,
    pub end: EndReason,
}

impl Branch {
    /// Both half-branches merged into one list ordered by `s`, origin counted once.
    pub fn joined(plus: &Branch, minus: &Branch) -> Branch {
        let mut points: Vec<BranchPoint> = minus.points.iter().skip(1).rev().cloned().collect();
        points.extend(plus.points.iter().cloned());
        Branch {
            k: plus.k,
            origin_eps: plus.origin_eps,
            origin_lambda: plus.origin_lambda,
            origin_v: plus.origin_v,
            points,
            events: Vec::new(),
            end: plus.end.clone(),
        }
    }
}

/// Discrete Neumann eigenvalue `(4/h²) sin²(kπh/2L)`.
pub fn discrete_wavenumber_sq(k: u32, grid: &Grid) -> f64 {
    let h = grid.h();
    4.0 / (h * h) * (k as f64 * PI * h / (2.0 * grid.l)).sin().powi(2)
}

/// Bifurcation value of mode `k` for the discretized problem.
pub fn discrete_bifurcation_eps(k: u32, grid: &Grid, p: &Params) -> Result<f64> {
    let cs = constant_state(p)?;
    let fv = reaction_f_v(cs.v_bar, cs.lambda_bar, p);
    if fv <= 0.0 {
        return Err(Error::NotPositive);
    }
    Ok(fv / discrete_wavenumber_sq(k, grid))
}

struct Tracer<'a> {
    p: &'a Params,
    grid: Grid,
    wl: Vec<f64>,
    tol: f64,
    x: Vec<f64>,
    tangent: Vec<f64>,
    step: f64,
    min_step: f64,
    max_step: f64,
    easy: usize,
}

impl<'a> Tracer<'a> {
    fn new(
        p: &'a Params,
        grid: Grid,
        cfg: &ContinuationConfig,
        x: Vec<f64>,
        tangent: Vec<f64>,
    ) -> Self {
        let wl = (0..grid.len())
            .map(|i| grid.trapezoid_weight(i) / grid.l)
            .collect();
        let mut t = Self {
            p,
            grid,
            wl,
            tol: cfg.tol,
            x,
            tangent,
            step: cfg.step,
            min_step: cfg.step / 1024.0,
            max_step: cfg.max_step,
            easy: 0,
        };
        let norm = t.dot(&t.tangent, &t.tangent).sqrt();
        for v in &mut t.tangent {
            *v /= norm;
        }
        t
    }

    fn np(&self) -> usize {
        self.grid.len()
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let np = self.np();
        let mut s: f64 = (0..np).map(|i| self.wl[i] * a[i] * b[i]).sum();
        s += a[np] * b[np] + a[np + 1] * b[np + 1];
        s
    }

    fn residual(&self, x: &[f64], anchor: &[f64], tau: &[f64], ds: f64) -> Result<Vec<f64>> {
        let np = self.np();
        let (v, lambda, eps) = (&x[..np], x[np], x[np + 1]);
        let mut r = pde_residual(v, lambda, eps, &self.grid, self.p)?;
        r.push(constraint_integral(v, lambda, &self.grid, self.p));
        let diff: Vec<f64> = x.iter().zip(anchor).map(|(a, b)| a - b).collect();
        r.push(self.dot(tau, &diff) - ds);
        Ok(r)
    }

    fn jacobian(&self, x: &[f64], tau: &[f64]) -> BorderedMatrix {
        let np = self.np();
        let (v, lambda, eps) = (&x[..np], x[np], x[np + 1]);
        let mut a = fixed_lambda_jacobian(v, lambda, eps, &self.grid, self.p, 2);
        for (dst, &vi) in a.col_mut(0).iter_mut().zip(v) {
            *dst = reaction_f_lambda(vi, self.p);
        }
        a.col_mut(1)
            .copy_from_slice(&second_difference(v, self.grid.h()));
        let mut corner = 0.0;
        for i in 0..np {
            let w = self.grid.trapezoid_weight(i);
            a.row_mut(0)[i] = w * constraint_g_v(v[i], lambda, self.p);
            corner += w * constraint_g_lambda(v[i], self.p);
        }
        for i in 0..np {
            a.row_mut(1)[i] = self.wl[i] * tau[i];
        }
        a.set_corner(0, 0, corner);
        a.set_corner(1, 0, tau[np]);
        a.set_corner(1, 1, tau[np + 1]);
        a
    }

    fn tangent_at(&self, x: &[f64], tau_prev: &[f64]) -> Result<Vec<f64>> {
        let a = self.jacobian(x, tau_prev);
        let mut rhs = vec![0.0; x.len()];
        *rhs.last_mut().expect("non-empty") = 1.0;
        let mut t = a.solve(&rhs)?;
        let norm = self.dot(&t, &t).sqrt();
        let sign = if self.dot(&t, tau_prev) < 0.0 {
            -1.0
        } else {
            1.0
        };
        for v in &mut t {
            *v *= sign / norm;
        }
        Ok(t)
    }

    /// One predictor-corrector step, halving the step on failure.
    fn advance(&mut self) -> Result<()> {
        loop {
            let ds = self.step;
            let pred: Vec<f64> = self
                .x
                .iter()
                .zip(&self.tangent)
                .map(|(a, b)| a + ds * b)
                .collect();
            let anchor = self.x.clone();
            let tau = self.tangent.clone();
            let outcome = damped_newton(
                pred,
                self.np(),
                self.tol,
                12,
                |x| self.residual(x, &anchor, &tau, ds),
                |x| Ok(self.jacobian(x, &tau)),
            )
            .and_then(|trace| {
                let t = self.tangent_at(&trace.x, &tau)?;
                Ok((trace, t))
            });
            match outcome {
                Ok((trace, t)) => {
                    self.x = trace.x;
                    self.tangent = t;
                    if trace.history.len() <= 4 {
                        self.easy += 1;
                        if self.easy >= 3 {
                            self.step = (self.step * 1.3).min(self.max_step);
                            self.easy = 0;
                        }
                    } else {
                        self.easy = 0;
                    }
                    return Ok(());
                }
                Err(e) => {
                    self.easy = 0;
                    self.step *= 0.5;
                    if self.step < self.min_step {
                        return Err(e);
                    }
                }
            }
        }
    }

    fn point(&self, k: u32, v_ref: f64, stability: bool) -> BranchPoint {
        let np = self.np();
        let state = State {
            v: self.x[..np].to_vec(),
            lambda: self.x[np],
            grid: self.grid,
        };
        let eps = self.x[np + 1];
        let (leading_eig, stable) = if stability {
            match leading_growth_rate(&state, eps, self.p) {
                Ok(re) => (
                    Some(re),
                    if re.abs() < DEFAULT_MARGIN {
                        None
                    } else {
                        Some(re < 0.0)
                    },
                ),
                Err(_) => (None, None),
            }
        } else {
            (None, None)
        };
        BranchPoint {
            s: amplitude_about(&state.v, v_ref, &self.grid, k),
            eps,
            lambda: state.lambda,
            state,
            leading_eig,
            stable,
        }
    }
}

fn run(tracer: &mut Tracer, branch: &mut Branch, cfg: &ContinuationConfig, s_limit: f64) {
    loop {
        if branch.points.len() >= cfg.max_points {
            branch.end = EndReason::MaxPoints;
            return;
        }
        let eps_dir_before = tracer.tangent[tracer.np() + 1];
        if let Err(e) = tracer.advance() {
            branch.end = match e {
                Error::LeftDomain => EndReason::LeftDomain,
                other => EndReason::StepFailure(other.to_string()),
            };
            return;
        }
        let eps_dir_after = tracer.tangent[tracer.np() + 1];
        let pt = tracer.point(branch.k, branch.origin_v, cfg.stability);
        if eps_dir_before * eps_dir_after < 0.0 {
            branch.events.push(BranchEvent::Fold {
                index: branch.points.len(),
                eps: pt.eps,
            });
        }
        let (s, eps, vmin) = (pt.s, pt.eps, pt.state.min_v());
        branch.points.push(pt);
        if s.abs() >= s_limit {
            branch.end = EndReason::AmplitudeReached;
            return;
        }
        if vmin < cfg.positivity_floor {
            branch.end = EndReason::PositivityExhausted;
            return;
        }
        if eps <= cfg.eps_min {
            branch.end = EndReason::EpsFloor;
            return;
        }
    }
}

fn half_branch(k: u32, p: &Params, cfg: &ContinuationConfig, sign: f64) -> Result<Branch> {
    let grid = Grid::new(cfg.n, p.l);
    let cs = constant_state(p)?;
    let eps_k = discrete_bifurcation_eps(k, &grid, p)?;
    let np = grid.len();
    let mut x = vec![cs.v_bar; np];
    x.push(cs.lambda_bar);
    x.push(eps_k);
    let mut tangent: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|xi| sign * (k as f64 * PI * xi / p.l).cos())
        .collect();
    tangent.extend([0.0, 0.0]);

    let mut tracer = Tracer::new(p, grid, cfg, x, tangent);
    let origin = tracer.point(k, cs.v_bar, false);
    let mut branch = Branch {
        k,
        origin_eps: eps_k,
        origin_lambda: cs.lambda_bar,
        origin_v: cs.v_bar,
        points: vec![origin],
        events: Vec::new(),
        end: EndReason::MaxPoints,
    };
    tracer
        .advance()
        .map_err(|e| Error::SeedFailure(e.to_string()))?;
    let first = tracer.point(k, cs.v_bar, cfg.stability);
    branch.points.push(first);
    run(&mut tracer, &mut branch, cfg, cfg.s_max);
    Ok(branch)
}

/// Traces both half-branches of mode `k` from `(v̄, λ̄, ε_k)`, returned as `(+s, -s)`.
pub fn branch_from_bifurcation(
    k: u32,
    p: &Params,
    cfg: &ContinuationConfig,
) -> Result<(Branch, Branch)> {
    assert!(k >= 1, "mode index starts at 1");
    Ok((half_branch(k, p, cfg, 1.0)?, half_branch(k, p, cfg, -1.0)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchforkFit {
    pub k1: f64,
    pub k2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub points: usize,
}

fn fit_linear_quadratic(samples: &[(f64, f64)]) -> (f64, f64) {
    let (mut s2, mut s3, mut s4, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(s, y) in samples {
        s2 += s * s;
        s3 += s * s * s;
        s4 += s * s * s * s;
        y1 += s * y;
        y2 += s * s * y;
    }
    let det = s2 * s4 - s3 * s3;
    ((y1 * s4 - y2 * s3) / det, (s2 * y2 - s3 * y1) / det)
}

/// Least-squares fit of `ε - ε_k = K1 s + K2 s²` and `λ - λ̄ = Λ1 s + Λ2 s²`
/// over the points with `0 < |s| ≤ s_window`.
pub fn fit_pitchfork(b: &Branch, s_window: f64) -> Result<PitchforkFit> {
    let used: Vec<&BranchPoint> = b
        .points
        .iter()
        .filter(|pt| pt.s != 0.0 && pt.s.abs() <= s_window)
        .collect();
    if used.len() < 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            have: used.len(),
        });
    }
    let eps: Vec<(f64, f64)> = used
        .iter()
        .map(|pt| (pt.s, pt.eps - b.origin_eps))
        .collect();
    let lam: Vec<(f64, f64)> = used
        .iter()
        .map(|pt| (pt.s, pt.lambda - b.origin_lambda))
        .collect();
    let (k1, k2) = fit_linear_quadratic(&eps);
    let (lambda1, lambda2) = fit_linear_quadratic(&lam);
    Ok(PitchforkFit {
        k1,
        k2,
        lambda1,
        lambda2,
        points: used.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub k: u32,
    pub eps: f64,
    /// Mean of the kernel profile relative to its sup norm.
    pub kernel_mean: f64,
    /// Share of the kernel profile's cosine energy carried by mode `k`.
    pub purity: f64,
}

fn det_sign(s: &State, eps: f64, p: &Params) -> f64 {
    jacobian(s, eps, p)
        .and_then(|a| a.factor())
        .map(|lu| lu.log_det().0)
        .unwrap_or(0.0)
}

fn kernel_vector(s: &State, eps: f64, p: &Params) -> Option<Vec<f64>> {
    let a = jacobian(s, eps, p).ok()?;
    let lu = a.factor().ok()?;
    let grid = s.grid;
    let mut x: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|xi| 1.0 + xi / grid.l + (xi / grid.l).powi(3))
        .collect();
    x.push(1.0);
    for _ in 0..4 {
        x = lu.solve(&x).ok()?;
        let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        for v in &mut x {
            *v /= norm;
        }
    }
    x.truncate(grid.len());
    Some(x)
}

/// Scans the determinant of the constant-state Jacobian over `ε ∈ (lo, hi)` on a
/// geometric grid, bisects every sign change to relative width `1e-7` and names
/// the mode by projecting the kernel profile onto the cosines.
pub fn detect_bifurcations(p: &Params, range: (f64, f64), k_max: u32, n: usize) -> Vec<Detection> {
    let (lo, hi) = range;
    assert!(lo > 0.0 && hi > lo, "need 0 < lo < hi");
    let Ok(cs) = constant_state(p) else {
        return Vec::new();
    };
    let grid = Grid::new(n, p.l);
    let s = State::constant(cs.v_bar, cs.lambda_bar, grid);
    let samples = ((hi / lo).ln() / 1.01f64.ln()).ceil().max(2.0) as usize;
    let at = |i: usize| lo * (hi / lo).powf(i as f64 / samples as f64);

    let mut out = Vec::new();
    let mut prev = (at(0), det_sign(&s, at(0), p));
    for i in 1..=samples {
        let e = at(i);
        let sg = det_sign(&s, e, p);
        if sg != 0.0 && prev.1 != 0.0 && sg != prev.1 {
            let (mut a, mut b) = (prev.0, e);
            let sa = prev.1;
            while b / a - 1.0 > 1e-7 {
                let m = (a * b).sqrt();
                if det_sign(&s, m, p) == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            let eps = (a * b).sqrt();
            if let Some(kv) = kernel_vector(&s, eps, p) {
                let coeffs: Vec<f64> = (0..=k_max + 4)
                    .map(|j| {
                        amplitude_about(&kv, 0.0, &grid, j).abs() * if j == 0 { 0.5 } else { 1.0 }
                    })
                    .collect();
                let (mode, best) =
                    coeffs.iter().enumerate().fold(
                        (0, 0.0),
                        |acc, (j, &c)| if c > acc.1 { (j, c) } else { acc },
                    );
                let energy: f64 = coeffs.iter().map(|c| c * c).sum();
                if mode >= 1 && mode as u32 <= k_max {
                    out.push(Detection {
                        k: mode as u32,
                        eps,
                        kernel_mean: grid.trapezoid(&kv) / grid.l,
                        purity: best * best / energy,
                    });
                }
            }
        }
        prev = (e, sg);
    }
    out.sort_by(|x, y| y.eps.total_cmp(&x.eps));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub branch: Branch,
    /// Fraction of non-constant profiles that are strictly monotone in `x`.
    pub monotone_fraction: f64,
}

pub fn is_strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
}

/// Continues `b` from its last point until `ε ≤ eps_min`, with no amplitude limit.
/// `cfg.positivity_floor` still ends the run.
pub fn extend_to_small_eps(
    b: &Branch,
    eps_min: f64,
    p: &Params,
    cfg: &ContinuationConfig,
) -> Result<Extension> {
    if b.points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            have: b.points.len(),
        });
    }
    let last = &b.points[b.points.len() - 1];
    let prev = &b.points[b.points.len() - 2];
    let grid = last.state.grid;
    let pack = |pt: &BranchPoint| {
        let mut x = pt.state.v.clone();
        x.extend([pt.lambda, pt.eps]);
        x
    };
    let x = pack(last);
    let secant: Vec<f64> = x.iter().zip(pack(prev)).map(|(a, b)| a - b).collect();
    let cfg = ContinuationConfig {
        n: grid.n,
        eps_min,
        ..*cfg
    };
    let mut tracer = Tracer::new(p, grid, &cfg, x.clone(), secant);
    tracer.tangent = tracer.tangent_at(&x, &tracer.tangent.clone())?;
    let mut branch = b.clone();
    branch.events.clear();
    run(&mut tracer, &mut branch, &cfg, f64::INFINITY);

    let profiles: Vec<&BranchPoint> = branch.points.iter().filter(|pt| pt.s != 0.0).collect();
    let monotone = profiles
        .iter()
        .filter(|pt| is_strictly_monotone(&pt.state.v))
        .count();
    let monotone_fraction = if profiles.is_empty() {
        0.0
    } else {
        monotone as f64 / profiles.len() as f64
    };
    Ok(Extension {
        branch,
        monotone_fraction,
    })
}

pub const BRANCH_COLUMNS: [&str; 9] = [
    "s",
    "eps",
    "lambda",
    "v_min",
    "v_max",
    "v0",
    "vL",
    "leading_eig",
    "stable",
];

pub fn write_branch_csv<W: Write>(
    w: &mut W,
    b: &Branch,
    header: &[(String, String)],
) -> io::Result<()> {
    let rows = b.points.iter().map(|pt| {
        let v = &pt.state.v;
        vec![
            fmt_f64(pt.s),
            fmt_f64(pt.eps),
            fmt_f64(pt.lambda),
            fmt_f64(pt.state.min_v()),
            fmt_f64(pt.state.max_v()),
            fmt_f64(v[0]),
            fmt_f64(v[v.len() - 1]),
            pt.leading_eig.map(fmt_f64).unwrap_or_default(),
            pt.stable.map(|s| s.to_string()).unwrap_or_default(),
        ]
    });
    write_table(w, header, &BRANCH_COLUMNS, rows)
}

pub fn write_profile_csv<W: Write>(
    w: &mut W,
    state: &State,
    header: &[(String, String)],
) -> io::Result<()> {
    let rows = state
        .grid
        .nodes()
        .into_iter()
        .zip(&state.v)
        .map(|(x, v)| vec![fmt_f64(x), fmt_f64(*v)]);
    write_table(w, header, &["x", "v"], rows)
}
