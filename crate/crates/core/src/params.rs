//! Model parameters and the reproducible random-stream policy shared by all
//! simulators.
//!
//! The parameter tuple is (σ, θ, γ, N, x): diffusion scale, supercritical
//! birth rate, competition rate, mass granularity and initial mass. The
//! discrete simulators work with the integer count `⌊Nx⌋` of ancestors, each
//! of mass `1/N`.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("sigma must be strictly positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("{name} must be nonnegative and finite, got {value}")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("N must be at least 1")]
    ZeroN,
}

/// The model parameter tuple (σ, θ, γ, N, x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Diffusion scale σ > 0.
    pub sigma: f64,
    /// Supercriticality θ ≥ 0.
    pub theta: f64,
    /// Competition rate γ ≥ 0.
    pub gamma: f64,
    /// Mass granularity N ≥ 1: individuals carry mass 1/N.
    pub capital_n: u32,
    /// Initial mass x ≥ 0. The discrete initial mass is ⌊Nx⌋/N.
    pub x: f64,
}

impl ModelParams {
    pub fn new(
        sigma: f64,
        theta: f64,
        gamma: f64,
        capital_n: u32,
        x: f64,
    ) -> Result<Self, ParamError> {
        Self {
            sigma,
            theta,
            gamma,
            capital_n,
            x,
        }
        .validate()
    }

    /// Checks the parameter domain and returns the normalized tuple.
    ///
    /// Validation is idempotent; `x` with non-integer `N·x` is kept as given
    /// and floored on demand by [`ModelParams::ancestor_count`], so that
    /// `x < 1/N` yields an empty forest rather than an error.
    pub fn validate(self) -> Result<Self, ParamError> {
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(ParamError::NonPositiveSigma(self.sigma));
        }
        for (name, value) in [("theta", self.theta), ("gamma", self.gamma), ("x", self.x)] {
            if !value.is_finite() || value < 0.0 {
                return Err(ParamError::NegativeRate { name, value });
            }
        }
        if self.capital_n == 0 {
            return Err(ParamError::ZeroN);
        }
        Ok(self)
    }

    /// N as a float.
    pub fn n(&self) -> f64 {
        f64::from(self.capital_n)
    }

    /// σ².
    pub fn sigma_sq(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Number of ancestors ⌊Nx⌋.
    pub fn ancestor_count(&self) -> u64 {
        (self.n() * self.x).floor() as u64
    }

    /// Discrete initial mass z0 = ⌊Nx⌋/N.
    pub fn z0(&self) -> f64 {
        self.ancestor_count() as f64 / self.n()
    }

    /// Same parameters with the branching drift switched off (θ = γ = 0),
    /// the null law of the Girsanov change of measure.
    pub fn null_law(&self) -> Self {
        Self {
            theta: 0.0,
            gamma: 0.0,
            ..*self
        }
    }
}

/// Seed policy: a master seed plus a stream id per replicate.
///
/// Streams with the same master seed and distinct ids are statistically
/// independent, so replicates parallelize without coordination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPolicy {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngPolicy {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }
}

/// Deterministic random stream backed by ChaCha12 with explicit stream
/// selection. Identical `(master_seed, stream_id)` reproduce identical draws
/// bit for bit.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

/// Builds the stream selected by `policy`.
pub fn make_stream(policy: RngPolicy) -> RngStream {
    let mut rng = ChaCha12Rng::seed_from_u64(policy.master_seed);
    rng.set_stream(policy.stream_id);
    RngStream { rng }
}

impl RngStream {
    /// Uniform draw on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        Open01.sample(&mut self.rng)
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Exponential draw with the given rate (mean 1/rate). `rate` must be
    /// strictly positive.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        let e: f64 = Exp1.sample(&mut self.rng);
        e / rate
    }
}
