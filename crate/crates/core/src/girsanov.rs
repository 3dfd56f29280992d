//! Closed-form likelihood ratios between exploration laws.
//!
//! A path simulated under the null dynamics (θ = γ = 0) is reweighted to a
//! target (θ, γ) by the exponential of a jump-measure change evaluated in
//! product form: one factor per clock event, minus the two compensator
//! integrals. Stopped at `τ_a = S_{a/N} ∧ s` the weight has unit mean under
//! the null law, which is what makes plain importance sampling consistent.
//!
//! Per event at stop time `τ`:
//! - each interior local minimum contributes `log(1 + 2θ/(Nσ²))`;
//! - each local maximum at height `h` contributes `log(1 + γ·Lᴺ(h)/N)`,
//!   where `Lᴺ(h) = 2·count(h)/(Nσ²)` is read from the completed-segment
//!   profile at that instant (the same convention the simulator's kill rate
//!   uses, so the factor is exactly the ratio of event intensities);
//! - reflections at height 0 contribute nothing;
//! - the compensators are `2θN · (falling time ≤ τ)` and
//!   `(γ/N) · Σ count·Δheight` over the heights risen through by time `τ`.
//!
//! Everything is accumulated in log space.

use thiserror::Error;

use crate::explore::{ExplorationResult, TurnKind};
use crate::params::ModelParams;
use crate::profile::LocalTimeProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GirsanovError {
    #[error("stop time {requested} lies beyond the explored horizon {covered}")]
    StopBeyondPath { requested: f64, covered: f64 },
    #[error("path was simulated under (θ={theta}, γ={gamma}), not under the null law")]
    PathNotNull { theta: f64, gamma: f64 },
    #[error("target (σ={sigma}, N={capital_n}) does not match the path parameters")]
    IncompatibleParams { sigma: f64, capital_n: u32 },
    #[error("effective sample size {ess:.2} too small for a weighted estimate")]
    DegenerateWeights { ess: f64 },
}

/// Stopping rule for the weight evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Fixed exploration time `s`; the path must cover it.
    FixedTime(f64),
    /// `τ = S_{trees/N} ∧ s`: the `trees`-th return to 0 or the fixed time,
    /// whichever comes first. `s` may be infinite on a completed path.
    ExcursionsOrTime { trees: u64, s: f64 },
}

/// Log likelihood ratio of a null path under a target law, with its pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GirsanovWeight {
    pub log_weight: f64,
    pub stop_time: f64,
    pub factor_log_minima: f64,
    pub factor_log_maxima: f64,
    pub compensator_down: f64,
    pub compensator_up: f64,
}

impl GirsanovWeight {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

fn resolve_stop(path: &ExplorationResult, stop: StopRule) -> Result<f64, GirsanovError> {
    let covered = path.s_end();
    let tau = match stop {
        StopRule::FixedTime(s) => s,
        StopRule::ExcursionsOrTime { trees, s } => match path.return_time(trees) {
            Some(s_a) => s_a.min(s),
            // the a-th return is not in the path: usable only if s cuts first
            None => s,
        },
    };
    if tau > covered {
        return Err(GirsanovError::StopBeyondPath {
            requested: tau,
            covered,
        });
    }
    Ok(tau)
}

/// Evaluates the Doléans weight of a null path against `target`, stopped by
/// `stop`. The path is replayed segment by segment, rebuilding the profile
/// the simulator saw, so factors and compensators use exactly the counts
/// that drove (or would have driven) the event rates.
pub fn weight(
    path: &ExplorationResult,
    target: &ModelParams,
    stop: StopRule,
) -> Result<GirsanovWeight, GirsanovError> {
    if path.params.theta != 0.0 || path.params.gamma != 0.0 {
        return Err(GirsanovError::PathNotNull {
            theta: path.params.theta,
            gamma: path.params.gamma,
        });
    }
    if target.sigma != path.params.sigma || target.capital_n != path.params.capital_n {
        return Err(GirsanovError::IncompatibleParams {
            sigma: target.sigma,
            capital_n: target.capital_n,
        });
    }
    let tau = resolve_stop(path, stop)?;

    let n = target.n();
    let sigma_sq = target.sigma_sq();
    let speed = 2.0 * n;
    let log_min_factor = (1.0 + 2.0 * target.theta / (n * sigma_sq)).ln();

    let mut factor_log_minima = 0.0;
    let mut factor_log_maxima = 0.0;
    let mut compensator_down = 0.0;
    let mut compensator_up = 0.0;
    let mut prof = LocalTimeProfile::new();

    for seg in path.segments() {
        if seg.s_start >= tau {
            break;
        }
        let complete = seg.s_end <= tau;
        if seg.rising {
            let h_reach = if complete {
                seg.hi
            } else {
                seg.lo + speed * (tau - seg.s_start)
            };
            compensator_up += target.gamma / n * prof.mass_between(seg.lo, h_reach);
            if complete && seg.end_kind == TurnKind::LocalMax {
                let count = f64::from(prof.query(seg.hi));
                let l_n = 2.0 * count / (n * sigma_sq);
                factor_log_maxima += (1.0 + target.gamma * l_n / n).ln();
            }
        } else {
            let duration = if complete {
                seg.duration()
            } else {
                tau - seg.s_start
            };
            compensator_down += 2.0 * target.theta * n * duration;
            if complete && seg.end_kind == TurnKind::LocalMin {
                factor_log_minima += log_min_factor;
            }
        }
        if !complete {
            break;
        }
        prof.add_segment(seg.lo, seg.hi)
            .expect("recorded segments are valid intervals");
    }

    Ok(GirsanovWeight {
        log_weight: factor_log_minima + factor_log_maxima - compensator_down - compensator_up,
        stop_time: tau,
        factor_log_minima,
        factor_log_maxima,
        compensator_down,
        compensator_up,
    })
}

/// Plain importance-sampling estimate `Σ wᵢ g(pathᵢ) / M` with its standard
/// error. Weights come from [`weight`] on null paths; values are the target
/// functional evaluated on those same paths.
pub fn importance_estimate(weights: &[f64], values: &[f64]) -> Result<(f64, f64), GirsanovError> {
    assert_eq!(weights.len(), values.len());
    let m = weights.len();
    let sum_w: f64 = weights.iter().sum();
    let sum_w2: f64 = weights.iter().map(|w| w * w).sum();
    let ess = if sum_w2 > 0.0 {
        sum_w * sum_w / sum_w2
    } else {
        0.0
    };
    if m < 2 || ess < 2.0 {
        return Err(GirsanovError::DegenerateWeights { ess });
    }
    let products: Vec<f64> = weights.iter().zip(values).map(|(w, g)| w * g).collect();
    let mf = m as f64;
    let mean = products.iter().sum::<f64>() / mf;
    let var = products
        .iter()
        .map(|p| (p - mean) * (p - mean))
        .sum::<f64>()
        / (mf - 1.0);
    Ok((mean, (var / mf).sqrt()))
}
