//! Exact continuous-time simulation of the discrete mass process.
//!
//! From state `k/N` the process jumps to `(k+1)/N` at rate `kNσ²/2 + kθ` and
//! to `(k-1)/N` at rate `kNσ²/2 + k(k-1)γ/N`; 0 is absorbing. Paths are
//! generated by exact Gillespie stepping: exponential holding times at the
//! total rate, then a categorical choice between up and down. No tau-leaping;
//! the simulated law is exact, which the distributional tests rely on.

use serde::Serialize;
use thiserror::Error;

use crate::params::{ModelParams, RngStream};

/// Default cap on jumps per path; supercritical regimes fail loudly instead
/// of spinning.
pub const DEFAULT_EVENT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MassError {
    #[error("event budget of {budget} jumps exceeded at t = {t}")]
    EventBudgetExceeded { budget: u64, t: f64 },
}

/// Up and down jump rates out of state `k/N`.
pub fn jump_rates(k: u64, params: &ModelParams) -> (f64, f64) {
    let kf = k as f64;
    let n = params.n();
    let half_branch = kf * n * params.sigma_sq() / 2.0;
    let up = half_branch + kf * params.theta;
    let down = half_branch + kf * (kf - 1.0) * params.gamma / n;
    (up, down)
}

/// Drift of the compensated mass process: `θz − γz(z − 1/N)`.
pub fn drift_oracle(z: f64, params: &ModelParams) -> f64 {
    params.theta * z - params.gamma * z * (z - 1.0 / params.n())
}

/// A piecewise-constant trajectory of the mass process. `levels[i]` is the
/// state reached at `jump_times[i]`; the state on `[0, jump_times[0])` is
/// `z0 = ⌊Nx⌋/N`.
#[derive(Debug, Clone, Serialize)]
pub struct MassPath {
    pub z0: f64,
    pub jump_times: Vec<f64>,
    pub levels: Vec<f64>,
    pub t_max: f64,
}

impl MassPath {
    /// Right-continuous evaluation at time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&s| s <= t);
        if idx == 0 {
            self.z0
        } else {
            self.levels[idx - 1]
        }
    }

    pub fn final_level(&self) -> f64 {
        self.levels.last().copied().unwrap_or(self.z0)
    }

    /// `∫₀ᵗ f(Z_r) dr`, summed exactly over the constant pieces.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, t_end: f64) -> f64 {
        let mut total = 0.0;
        let mut prev_t = 0.0;
        let mut prev_z = self.z0;
        for (&s, &z) in self.jump_times.iter().zip(&self.levels) {
            if s >= t_end {
                break;
            }
            total += f(prev_z) * (s - prev_t);
            prev_t = s;
            prev_z = z;
        }
        total + f(prev_z) * (t_end - prev_t)
    }
}

/// Simulates one exact path up to the last grid time and samples it on the
/// grid. `t_grid` must be sorted and nonnegative.
pub fn simulate_mass(
    params: &ModelParams,
    t_grid: &[f64],
    rng: &mut RngStream,
) -> Result<(MassPath, Vec<f64>), MassError> {
    simulate_mass_with_budget(params, t_grid, rng, DEFAULT_EVENT_BUDGET)
}

pub fn simulate_mass_with_budget(
    params: &ModelParams,
    t_grid: &[f64],
    rng: &mut RngStream,
    event_budget: u64,
) -> Result<(MassPath, Vec<f64>), MassError> {
    debug_assert!(t_grid.windows(2).all(|w| w[0] <= w[1]));
    let t_max = t_grid.last().copied().unwrap_or(0.0);
    let n = params.n();
    let mut k = params.ancestor_count();
    let mut t = 0.0;
    let mut path = MassPath {
        z0: k as f64 / n,
        jump_times: Vec::new(),
        levels: Vec::new(),
        t_max,
    };
    let mut events: u64 = 0;
    loop {
        let (up, down) = jump_rates(k, params);
        let total = up + down;
        if total == 0.0 {
            break; // absorbed at 0
        }
        t += rng.exponential(total);
        if t > t_max {
            break;
        }
        events += 1;
        if events > event_budget {
            return Err(MassError::EventBudgetExceeded {
                budget: event_budget,
                t,
            });
        }
        if rng.uniform() < up / total {
            k += 1;
        } else {
            k -= 1;
        }
        path.jump_times.push(t);
        path.levels.push(k as f64 / n);
    }
    let samples = t_grid.iter().map(|&t| path.value_at(t)).collect();
    Ok((path, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_stream, RngPolicy};
    use crate::stats::moments;

    fn p(sigma: f64, theta: f64, gamma: f64, n: u32, x: f64) -> ModelParams {
        ModelParams::new(sigma, theta, gamma, n, x).unwrap()
    }

    #[test]
    fn rates_match_direct_substitution() {
        // k=3, N=2, σ=1, θ=0.5, γ=0.25
        let (up, down) = jump_rates(3, &p(1.0, 0.5, 0.25, 2, 1.0));
        assert_eq!(up, 4.5);
        assert_eq!(down, 3.75);
    }

    #[test]
    fn rates_vanish_only_at_zero() {
        let params = p(1.3, 0.7, 2.0, 5, 1.0);
        assert_eq!(jump_rates(0, &params), (0.0, 0.0));
        let (up, down) = jump_rates(1, &params);
        assert!(up > 0.0 && down > 0.0);
        // competition needs a pair: k=1 leaves only the branching death rate
        assert_eq!(down, params.n() * params.sigma_sq() / 2.0);
    }

    #[test]
    fn drift_oracle_examples() {
        assert_eq!(drift_oracle(0.0, &p(1.0, 0.5, 0.25, 1, 1.0)), 0.0);
        assert_eq!(drift_oracle(1.0, &p(1.0, 0.5, 0.25, 1, 1.0)), 0.5);
        assert_eq!(drift_oracle(2.0, &p(1.0, 0.0, 1.0, 2, 1.0)), -3.0);
    }

    #[test]
    fn empty_start_stays_at_zero() {
        let params = p(1.0, 0.5, 0.25, 4, 0.1);
        let mut rng = make_stream(RngPolicy::new(1, 0));
        let (path, samples) = simulate_mass(&params, &[0.5, 1.0], &mut rng).unwrap();
        assert!(path.jump_times.is_empty());
        assert_eq!(samples, vec![0.0, 0.0]);
    }

    #[test]
    fn paths_are_valid_jump_chains() {
        let params = p(1.0, 0.4, 0.3, 3, 2.0);
        for stream in 0..20 {
            let mut rng = make_stream(RngPolicy::new(5, stream));
            let (path, _) = simulate_mass(&params, &[2.0], &mut rng).unwrap();
            let step = 1.0 / params.n();
            let mut prev = path.z0;
            for (&t, &z) in path.jump_times.iter().zip(&path.levels) {
                assert!(t > 0.0 && t <= 2.0);
                assert!(z >= 0.0);
                assert!(((z - prev).abs() - step).abs() < 1e-12);
                prev = z;
            }
            assert!(path.jump_times.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn critical_mass_is_a_martingale() {
        // θ=γ=0: E Z_t = z0 and Var Z_t = σ² z0 t, from the first two moment
        // identities of the compensated chain.
        let params = p(1.0, 0.0, 0.0, 4, 1.0);
        let grid = [0.5, 1.0];
        let reps = 10_000u64;
        let mut at: Vec<Vec<f64>> = vec![Vec::new(), Vec::new()];
        for i in 0..reps {
            let mut rng = make_stream(RngPolicy::new(99, i));
            let (_, s) = simulate_mass(&params, &grid, &mut rng).unwrap();
            at[0].push(s[0]);
            at[1].push(s[1]);
        }
        for (j, &t) in grid.iter().enumerate() {
            let m = moments(&at[j]).unwrap();
            let z0 = params.z0();
            assert!(
                (m.mean - z0).abs() <= 3.0 * m.se_mean,
                "t={t} mean {} se {}",
                m.mean,
                m.se_mean
            );
            let var_expected = params.sigma_sq() * z0 * t;
            assert!(
                (m.variance - var_expected).abs() <= 3.0 * m.se_variance,
                "t={t} var {} expected {var_expected} se {}",
                m.variance,
                m.se_variance
            );
        }
    }

    #[test]
    fn compensated_increments_average_to_zero() {
        // General (θ, γ): mean of Z_t − z0 − ∫ drift(Z_r) dr over replicates
        // is within 3 standard errors of 0.
        let params = p(1.0, 0.4, 0.3, 2, 1.5);
        let t_end = 1.0;
        let reps = 10_000u64;
        let mut residuals = Vec::with_capacity(reps as usize);
        for i in 0..reps {
            let mut rng = make_stream(RngPolicy::new(123, i));
            let (path, s) = simulate_mass(&params, &[t_end], &mut rng).unwrap();
            let drift_int = path.integrate(|z| drift_oracle(z, &params), t_end);
            residuals.push(s[0] - path.z0 - drift_int);
        }
        let m = moments(&residuals).unwrap();
        assert!(
            m.mean.abs() <= 3.0 * m.se_mean,
            "mean {} se {}",
            m.mean,
            m.se_mean
        );
    }

    #[test]
    fn holding_time_matches_total_rate() {
        // At level k with θ=γ=0 the total jump rate is kNσ².
        let params = p(1.0, 0.0, 0.0, 2, 1.5); // k0 = 3, rate 6
        let reps = 20_000u64;
        let mut holds = Vec::with_capacity(reps as usize);
        for i in 0..reps {
            let mut rng = make_stream(RngPolicy::new(7, i));
            let (path, _) = simulate_mass(&params, &[10.0], &mut rng).unwrap();
            if let Some(&first) = path.jump_times.first() {
                holds.push(first);
            }
        }
        assert_eq!(holds.len(), reps as usize);
        let m = moments(&holds).unwrap();
        let expected = 1.0 / 6.0;
        assert!((m.mean - expected).abs() <= 3.0 * m.se_mean);
    }

    #[test]
    fn budget_exceeded_is_reported() {
        let params = p(1.0, 0.0, 0.0, 10, 10.0);
        let mut rng = make_stream(RngPolicy::new(3, 0));
        let err = simulate_mass_with_budget(&params, &[50.0], &mut rng, 10).unwrap_err();
        assert!(matches!(
            err,
            MassError::EventBudgetExceeded { budget: 10, .. }
        ));
    }

    #[test]
    fn fixed_seed_reproduces_path() {
        let params = p(1.0, 0.3, 0.2, 4, 1.0);
        let mut a = make_stream(RngPolicy::new(11, 4));
        let mut b = make_stream(RngPolicy::new(11, 4));
        let (pa, _) = simulate_mass(&params, &[3.0], &mut a).unwrap();
        let (pb, _) = simulate_mass(&params, &[3.0], &mut b).unwrap();
        assert_eq!(pa.jump_times, pb.jump_times);
        assert_eq!(pa.levels, pb.levels);
    }
}
