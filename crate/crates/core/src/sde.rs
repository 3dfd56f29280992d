//! Time-discretized solvers for the limiting objects: the logistic Feller
//! SDE, the reflected SDE with local-time drift, and the Ornstein-Uhlenbeck
//! time change.
//!
//! These are verification aids. The full-truncation Euler scheme keeps the
//! square-root diffusion nonnegative and absorbs it at the first nonpositive
//! step; the reflected scheme clamps at 0 and books twice the clamped amount
//! into the local-time accumulator at level 0, matching the `½L_s(0)` drift
//! term of the reflected equation. The local time at the current level is
//! estimated by an `ε`-bin occupation histogram; `ε` is a bias-variance knob
//! with no prescribed value, defaulting to `dt^(1/3)`.

use serde::Serialize;
use thiserror::Error;

use crate::params::{ModelParams, RngStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("path not absorbed within the horizon (final value {final_value})")]
    NotAbsorbed { final_value: f64 },
    #[error("need at least {min} increments for the regression, got {got}")]
    TooFewIncrements { min: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    FellerLogistic,
    ReflectedH,
    Ou,
}

/// A path on a uniform grid with step `dt`; `values[k]` is the state at
/// `k·dt`.
#[derive(Debug, Clone, Serialize)]
pub struct DiffusionPath {
    pub dt: f64,
    pub values: Vec<f64>,
    pub kind: PathKind,
}

impl DiffusionPath {
    pub fn t_max(&self) -> f64 {
        self.dt * (self.values.len().saturating_sub(1)) as f64
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("paths contain the initial value")
    }

    /// Index of the first zero value, i.e. the absorption step.
    pub fn absorption_index(&self) -> Option<usize> {
        self.values.iter().position(|&v| v == 0.0)
    }
}

/// Full-truncation Euler for `dZ = σ√Z dW + (θZ − γZ²) dt`, started at `x`,
/// absorbed at the first nonpositive step.
pub fn euler_feller_logistic(
    params: &ModelParams,
    dt: f64,
    t_max: f64,
    rng: &mut RngStream,
) -> DiffusionPath {
    debug_assert!(dt > 0.0);
    let steps = (t_max / dt).round() as usize;
    let mut values = Vec::with_capacity(steps + 1);
    let mut z = params.x;
    values.push(z);
    let sqrt_dt = dt.sqrt();
    for _ in 0..steps {
        if z == 0.0 {
            values.resize(steps + 1, 0.0);
            break;
        }
        let drift = (params.theta * z - params.gamma * z * z) * dt;
        let diff = params.sigma * z.max(0.0).sqrt() * sqrt_dt * rng.normal();
        let next = z + drift + diff;
        z = if next > 0.0 { next } else { 0.0 };
        values.push(z);
    }
    DiffusionPath {
        dt,
        values,
        kind: PathKind::FellerLogistic,
    }
}

/// Growing occupation histogram over height bins of width `bin_width`, plus
/// the accumulator that tracks the local time at level 0 through the
/// reflection pushes.
#[derive(Debug, Clone, Serialize)]
pub struct LocalTimeEstimate {
    pub bin_width: f64,
    pub bins: Vec<f64>,
    pub zero_level_accumulator: f64,
    elapsed: f64,
}

impl LocalTimeEstimate {
    fn new(bin_width: f64) -> Self {
        LocalTimeEstimate {
            bin_width,
            bins: Vec::new(),
            zero_level_accumulator: 0.0,
            elapsed: 0.0,
        }
    }

    fn deposit(&mut self, h: f64, dt: f64) {
        let idx = (h / self.bin_width).floor() as usize;
        if idx >= self.bins.len() {
            self.bins.resize(idx + 1, 0.0);
        }
        self.bins[idx] += dt;
        self.elapsed += dt;
    }

    /// Occupation time of the bin containing `t`.
    pub fn occupation(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let idx = (t / self.bin_width).floor() as usize;
        self.bins.get(idx).copied().unwrap_or(0.0)
    }

    /// Scaled estimate `L̂(t) = (4/σ²) · occupation / ε`.
    pub fn scaled_estimate(&self, t: f64, sigma: f64) -> f64 {
        4.0 / (sigma * sigma) * self.occupation(t) / self.bin_width
    }

    /// Total mass deposited; equals the elapsed time.
    pub fn total_occupation(&self) -> f64 {
        self.elapsed
    }
}

#[derive(Debug, Clone)]
pub struct ReflectedOutput {
    pub h_path: DiffusionPath,
    /// Accumulated local time at 0 after each step.
    pub l0_path: Vec<f64>,
    /// First grid time at which `(σ²/4)·L(0)` exceeds `x`, if reached.
    pub s_x: Option<f64>,
    pub local_time: LocalTimeEstimate,
}

/// Default occupation bin width for a given step size.
pub fn default_bin_width(dt: f64) -> f64 {
    dt.cbrt()
}

/// Euler scheme for the reflected local-time-drift SDE:
/// `H ← max(0, H + (2/σ)√dt·ξ + (2θ/σ²)dt − γ·L̂(H)·dt)`, each clamped
/// amount `p` adding `2p` to the level-0 accumulator.
pub fn euler_reflected_localtime(
    params: &ModelParams,
    dt: f64,
    eps_bin: f64,
    s_max: f64,
    rng: &mut RngStream,
) -> ReflectedOutput {
    debug_assert!(dt > 0.0 && eps_bin > 0.0);
    let steps = (s_max / dt).round() as usize;
    let sigma_sq = params.sigma_sq();
    let noise_scale = 2.0 / params.sigma * dt.sqrt();
    let drift_up = 2.0 * params.theta / sigma_sq * dt;
    let threshold = 4.0 / sigma_sq * params.x;

    let mut local_time = LocalTimeEstimate::new(eps_bin);
    let mut values = Vec::with_capacity(steps + 1);
    let mut l0_path = Vec::with_capacity(steps + 1);
    let mut h = 0.0f64;
    let mut s_x = None;
    values.push(h);
    l0_path.push(0.0);
    for k in 1..=steps {
        let kill = if params.gamma > 0.0 {
            params.gamma * local_time.scaled_estimate(h, params.sigma) * dt
        } else {
            0.0
        };
        let raw = h + noise_scale * rng.normal() + drift_up - kill;
        if raw < 0.0 {
            local_time.zero_level_accumulator += -2.0 * raw;
            h = 0.0;
        } else {
            h = raw;
        }
        local_time.deposit(h, dt);
        values.push(h);
        l0_path.push(local_time.zero_level_accumulator);
        if s_x.is_none() && local_time.zero_level_accumulator > threshold {
            s_x = Some(k as f64 * dt);
        }
    }
    ReflectedOutput {
        h_path: DiffusionPath {
            dt,
            values,
            kind: PathKind::ReflectedH,
        },
        l0_path,
        s_x,
        local_time,
    }
}

#[derive(Debug, Clone)]
pub struct TimeChange {
    /// The mass path read in the additive-functional clock `A_t = ∫Z dr`,
    /// on a uniform grid of the new clock.
    pub u_path: DiffusionPath,
    /// New-clock time at which the mass path is absorbed.
    pub tau_x: f64,
    /// `∫ Z dt` over the whole path (trapezoid rule).
    pub area: f64,
}

/// Occupation time change of an absorbed logistic Feller path: computes
/// `A_t = ∫₀ᵗ Z dr` by trapezoid rule, inverts it monotonically, and reads
/// the path in the new clock, under which it is an Ornstein-Uhlenbeck
/// process up to its hitting time of 0.
pub fn lamperti_time_change(z_path: &DiffusionPath) -> Result<TimeChange, SdeError> {
    let absorbed_at = z_path.absorption_index().ok_or(SdeError::NotAbsorbed {
        final_value: z_path.last(),
    })?;
    let dt = z_path.dt;
    let values = &z_path.values;

    let mut cum = Vec::with_capacity(absorbed_at + 1);
    let mut a = 0.0;
    cum.push(0.0);
    for k in 1..=absorbed_at {
        a += dt * (values[k - 1] + values[k]) / 2.0;
        cum.push(a);
    }
    let tau_x = a;
    // the trapezoid area over the zero tail vanishes
    let area = tau_x;

    let u_dt = dt;
    let mut u_values = Vec::new();
    let mut k = 0usize;
    let mut u = 0.0;
    while u < tau_x {
        while k < absorbed_at && cum[k + 1] <= u {
            k += 1;
        }
        if k >= absorbed_at {
            break;
        }
        let seg = cum[k + 1] - cum[k];
        let frac = if seg > 0.0 { (u - cum[k]) / seg } else { 0.0 };
        u_values.push(values[k] + frac * (values[k + 1] - values[k]));
        u += u_dt;
    }
    u_values.push(0.0);
    Ok(TimeChange {
        u_path: DiffusionPath {
            dt: u_dt,
            values: u_values,
            kind: PathKind::Ou,
        },
        tau_x,
        area,
    })
}

/// One observation of the time-changed process: state, increment, and the
/// clock increment it happened over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuIncrement {
    pub u: f64,
    pub du: f64,
    pub step: f64,
}

/// Increments of the time-changed process read directly on the native grid:
/// `U(A_{t_k}) = Z_{t_k}` with clock steps `Δu_k = Z_{t_k}·dt`, so the
/// conditional mean and variance of `ΔU` are exactly `(θ−γU)Δu` and `σ²Δu`.
/// The final clamped step into absorption is excluded.
pub fn ou_increments(z_path: &DiffusionPath) -> Vec<OuIncrement> {
    let end = z_path.absorption_index().unwrap_or(z_path.values.len());
    let mut out = Vec::new();
    for k in 0..end.saturating_sub(1) {
        let z = z_path.values[k];
        let z_next = z_path.values[k + 1];
        if z > 0.0 && z_next > 0.0 {
            out.push(OuIncrement {
                u: z,
                du: z_next - z,
                step: z * z_path.dt,
            });
        }
    }
    out
}

/// Drift and diffusion estimates recovered from increments of an
/// Ornstein-Uhlenbeck process `dU = (θ − γU) du + σ dB`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OuFit {
    pub theta: f64,
    pub gamma: f64,
    pub sigma_sq: f64,
    pub se_theta: f64,
    pub se_gamma: f64,
    pub se_sigma_sq: f64,
    pub n_increments: usize,
}

/// Weighted least squares on standardized increments: regress `ΔU/√Δu` on
/// `(√Δu, U·√Δu)` without intercept; the residual variance estimates `σ²`.
pub fn ou_increment_fit(increments: &[OuIncrement]) -> Result<OuFit, SdeError> {
    let n = increments.len();
    if n < 10 {
        return Err(SdeError::TooFewIncrements { min: 10, got: n });
    }
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for inc in increments {
        let w = inc.step;
        let y = inc.du;
        // x1 = √Δu, x2 = U√Δu, y' = ΔU/√Δu: accumulate XᵀX and Xᵀy in
        // unstandardized form (each term carries a 1/Δu that cancels)
        s11 += w;
        s12 += w * inc.u;
        s22 += w * inc.u * inc.u;
        b1 += y;
        b2 += y * inc.u;
    }
    let det = s11 * s22 - s12 * s12;
    let a1 = (s22 * b1 - s12 * b2) / det;
    let a2 = (s11 * b2 - s12 * b1) / det;
    let mut rss = 0.0;
    for inc in increments {
        let resid = inc.du - (a1 + a2 * inc.u) * inc.step;
        rss += resid * resid / inc.step;
    }
    let sigma_sq = rss / (n as f64 - 2.0);
    let se_theta = (sigma_sq * s22 / det).sqrt();
    let se_gamma = (sigma_sq * s11 / det).sqrt();
    Ok(OuFit {
        theta: a1,
        gamma: -a2,
        sigma_sq,
        se_theta,
        se_gamma,
        se_sigma_sq: sigma_sq * (2.0 / (n as f64 - 2.0)).sqrt(),
        n_increments: n,
    })
}
