//! Event-driven simulation of the exploration path of the random forest.
//!
//! The path starts at height 0 with slope `+2N`. While rising, the slope
//! flips at rate `N²σ² + 4γNℓ`, where `ℓ` is the unscaled local time already
//! accumulated at the current height; while falling, it flips at the constant
//! rate `N²σ² + 2Nθ`. Whenever the path reaches height 0 it is reflected (no
//! clock event), one tree is complete, and exploration ends once `⌊Nx⌋`
//! trees have been traversed.
//!
//! The kill rate along a rising segment uses the crossing counts of
//! *completed* segments only. The segment in progress touches its current
//! height for the first time at the current instant, so its own crossing is
//! not part of the accumulated local time; equivalently, an individual is
//! not its own left neighbor. Freezing the profile for the duration of the
//! segment makes the inhomogeneous rate piecewise constant in height, which
//! is sampled exactly piece by piece (no thinning, no bias).

use serde::Serialize;
use thiserror::Error;

use crate::params::{ModelParams, RngStream};
use crate::profile::LocalTimeProfile;

/// Default cap on turning points per path.
pub const DEFAULT_TURNING_POINT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExploreError {
    #[error("turning-point budget of {budget} exceeded at s = {s}")]
    EventBudgetExceeded { budget: u64, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Start,
    LocalMax,
    LocalMin,
    ReflectionAtZero,
    TerminalZero,
}

impl TurnKind {
    /// Local maxima and interior local minima are jump events of the driving
    /// clock; reflections at height 0 are not.
    pub fn is_clock_event(self) -> bool {
        matches!(self, TurnKind::LocalMax | TurnKind::LocalMin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningPoint {
    /// Exploration time.
    pub s: f64,
    /// Height (real time in the population picture).
    pub h: f64,
    pub kind: TurnKind,
}

/// One linear segment of the path, the per-event view of the log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub s_start: f64,
    pub s_end: f64,
    /// Lower endpoint height; the segment covers `[lo, hi)` in the profile.
    pub lo: f64,
    pub hi: f64,
    pub rising: bool,
    /// Kind of the turning point that ends the segment.
    pub end_kind: TurnKind,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.s_end - self.s_start
    }
}

/// Completed exploration: turning points, the stopping time, and the
/// local-time profile at that time.
#[derive(Debug, Clone)]
pub struct ExplorationResult {
    pub params: ModelParams,
    pub turning_points: Vec<TurningPoint>,
    /// Exploration time of the `⌊Nx⌋`-th return to height 0, `Some(0)` for an
    /// empty forest, `None` when the run was truncated by `s_max` first.
    pub s_n_x: Option<f64>,
    pub trees_completed: u64,
    pub profile: LocalTimeProfile,
}

#[derive(Debug, Clone, Copy)]
pub struct ExploreOptions {
    /// Truncate the exploration at this exploration time (the path still
    /// covers `[0, s_max]`; the segment in flight is completed).
    pub s_max: f64,
    pub turning_point_budget: u64,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            s_max: f64::INFINITY,
            turning_point_budget: DEFAULT_TURNING_POINT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rise {
    pub top_h: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fall {
    pub bottom_h: f64,
    pub duration: f64,
    pub hit_zero: bool,
}

/// Kill-clock rate (per unit exploration time) while rising through a stretch
/// where the completed-segment crossing count is `count`:
/// `N²σ² + 4γN·(count/(2N)) = N²σ² + 2γ·count`.
pub fn rising_rate(count: u32, params: &ModelParams) -> f64 {
    let n = params.n();
    n * n * params.sigma_sq() + 2.0 * params.gamma * f64::from(count)
}

/// Birth-clock rate (per unit exploration time) while falling:
/// `N²σ² + 2Nθ`.
pub fn falling_rate(params: &ModelParams) -> f64 {
    let n = params.n();
    n * n * params.sigma_sq() + 2.0 * n * params.theta
}

/// Samples the top of a rising segment started at `start_h` against the
/// frozen `profile`, by exact piecewise-exponential sampling over the
/// constant-count pieces above `start_h`. The terminal zero-count piece has
/// rate `N²σ² > 0`, so the segment ends almost surely.
pub fn simulate_rising(
    start_h: f64,
    profile: &LocalTimeProfile,
    params: &ModelParams,
    rng: &mut RngStream,
) -> Rise {
    let speed = 2.0 * params.n();
    for piece in profile.pieces_from(start_h) {
        let rate = rising_rate(piece.count, params);
        let e = rng.exponential(rate);
        let top = match piece.hi {
            Some(hi) => {
                let span = (hi - piece.lo) / speed;
                if e >= span {
                    continue;
                }
                piece.lo + speed * e
            }
            None => piece.lo + speed * e,
        };
        return Rise {
            top_h: top,
            duration: (top - start_h) / speed,
        };
    }
    unreachable!("pieces_from always ends with an unbounded piece");
}

/// Samples the bottom of a falling segment started at `start_h > 0`. If the
/// exponential drop would cross 0, the segment is cut there and flagged.
pub fn simulate_falling(start_h: f64, params: &ModelParams, rng: &mut RngStream) -> Fall {
    let speed = 2.0 * params.n();
    let e = rng.exponential(falling_rate(params));
    let drop = speed * e;
    if drop >= start_h {
        Fall {
            bottom_h: 0.0,
            duration: start_h / speed,
            hit_zero: true,
        }
    } else {
        Fall {
            bottom_h: start_h - drop,
            duration: e,
            hit_zero: false,
        }
    }
}

/// Explores the forest of `⌊Nx⌋` trees to completion.
pub fn explore_forest(
    params: &ModelParams,
    rng: &mut RngStream,
) -> Result<ExplorationResult, ExploreError> {
    explore_forest_with(params, ExploreOptions::default(), rng)
}

/// Explores until `⌊Nx⌋` trees are complete or the exploration time exceeds
/// `opts.s_max`, whichever comes first.
pub fn explore_forest_with(
    params: &ModelParams,
    opts: ExploreOptions,
    rng: &mut RngStream,
) -> Result<ExplorationResult, ExploreError> {
    let trees_target = params.ancestor_count();
    let mut result = ExplorationResult {
        params: *params,
        turning_points: vec![TurningPoint {
            s: 0.0,
            h: 0.0,
            kind: TurnKind::Start,
        }],
        s_n_x: None,
        trees_completed: 0,
        profile: LocalTimeProfile::new(),
    };
    if trees_target == 0 {
        result.s_n_x = Some(0.0);
        return Ok(result);
    }

    let mut s = 0.0;
    let mut h = 0.0;
    let budget = opts.turning_point_budget;
    loop {
        let rise = simulate_rising(h, &result.profile, params, rng);
        s += rise.duration;
        result
            .profile
            .add_segment(h, rise.top_h)
            .expect("rising segment is a valid interval");
        result.turning_points.push(TurningPoint {
            s,
            h: rise.top_h,
            kind: TurnKind::LocalMax,
        });
        if result.turning_points.len() as u64 > budget {
            return Err(ExploreError::EventBudgetExceeded { budget, s });
        }
        if s >= opts.s_max {
            return Ok(result);
        }

        let fall = simulate_falling(rise.top_h, params, rng);
        s += fall.duration;
        result
            .profile
            .add_segment(fall.bottom_h, rise.top_h)
            .expect("falling segment is a valid interval");
        if fall.hit_zero {
            result.trees_completed += 1;
            let done = result.trees_completed == trees_target;
            result.turning_points.push(TurningPoint {
                s,
                h: 0.0,
                kind: if done {
                    TurnKind::TerminalZero
                } else {
                    TurnKind::ReflectionAtZero
                },
            });
            if done {
                result.s_n_x = Some(s);
                return Ok(result);
            }
            h = 0.0;
        } else {
            result.turning_points.push(TurningPoint {
                s,
                h: fall.bottom_h,
                kind: TurnKind::LocalMin,
            });
            h = fall.bottom_h;
        }
        if result.turning_points.len() as u64 > budget {
            return Err(ExploreError::EventBudgetExceeded { budget, s });
        }
        if s >= opts.s_max {
            return Ok(result);
        }
    }
}

impl ExplorationResult {
    /// Exploration time covered by the path.
    pub fn s_end(&self) -> f64 {
        self.turning_points.last().map_or(0.0, |tp| tp.s)
    }

    pub fn is_complete(&self) -> bool {
        self.s_n_x.is_some()
    }

    /// Largest height reached.
    pub fn max_height(&self) -> f64 {
        self.turning_points.iter().fold(0.0, |m, tp| m.max(tp.h))
    }

    /// The per-event log: linear segments in exploration order, each with its
    /// height interval, duration, and whether it ended in a clock event
    /// (`LocalMax`/`LocalMin`) or at the reflecting boundary.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.turning_points.windows(2).map(|w| {
            let (a, b) = (w[0], w[1]);
            Segment {
                s_start: a.s,
                s_end: b.s,
                lo: a.h.min(b.h),
                hi: a.h.max(b.h),
                rising: b.h > a.h,
                end_kind: b.kind,
            }
        })
    }

    /// Height and slope sign at exploration time `s` (which must not exceed
    /// the covered horizon).
    pub fn state_at(&self, s: f64) -> (f64, f64) {
        debug_assert!(s >= 0.0 && s <= self.s_end());
        let speed = 2.0 * self.params.n();
        for seg in self.segments() {
            if s <= seg.s_end {
                let (h, v) = if seg.rising {
                    (seg.lo + speed * (s - seg.s_start), 1.0)
                } else {
                    (seg.hi - speed * (s - seg.s_start), -1.0)
                };
                return (h, v);
            }
        }
        (0.0, 1.0)
    }

    /// Crossing count at height `t` accumulated by exploration time `s`. The
    /// segment in flight at `s` contributes the levels it has already passed.
    pub fn crossings_at(&self, s: f64, t: f64) -> u64 {
        let speed = 2.0 * self.params.n();
        let mut crossings = 0u64;
        for seg in self.segments() {
            if seg.s_end <= s {
                crossings += u64::from(seg.lo <= t && t < seg.hi);
            } else if seg.s_start < s {
                let covered = if seg.rising {
                    let h_s = seg.lo + speed * (s - seg.s_start);
                    seg.lo <= t && t < h_s
                } else {
                    let h_s = seg.hi - speed * (s - seg.s_start);
                    h_s <= t && t < seg.hi
                };
                crossings += u64::from(covered);
                break;
            } else {
                break;
            }
        }
        crossings
    }

    /// Rebuilds the profile of segments completed by exploration time
    /// `s_stop`, in the same order the simulator added them.
    pub fn profile_at(&self, s_stop: f64) -> LocalTimeProfile {
        let mut prof = LocalTimeProfile::new();
        for seg in self.segments() {
            if seg.s_end > s_stop {
                break;
            }
            prof.add_segment(seg.lo, seg.hi)
                .expect("recorded segments are valid intervals");
        }
        prof
    }

    /// Exploration time of the `k`-th return to height 0, if the path
    /// contains it.
    pub fn return_time(&self, k: u64) -> Option<f64> {
        if k == 0 {
            return Some(0.0);
        }
        let mut seen = 0;
        for tp in &self.turning_points {
            if matches!(tp.kind, TurnKind::ReflectionAtZero | TurnKind::TerminalZero) {
                seen += 1;
                if seen == k {
                    return Some(tp.s);
                }
            }
        }
        None
    }

    /// The mass slice `t ↦ count(t)/(2N)` of the terminal profile, a
    /// nonnegative multiple of `1/N` at every grid point.
    pub fn slice(&self, t_grid: &[f64]) -> Vec<f64> {
        slice_of_profile(&self.profile, t_grid, &self.params)
    }

    /// Residual of the pathwise Tanaka decomposition of the scaled local
    /// time at level `t` up to time `s`:
    ///
    /// `L_s(t) − [2(H_s−t)⁺ + (2/(Nσ²))·V_s·1{H_s>t} − 2∫₀ˢ 1{H_r>t} (dM¹ − dM²)]`,
    ///
    /// where the two martingale integrals reduce to event counts minus
    /// `N²σ²` times the falling/rising time spent above `t`. Exact path
    /// algebra: the residual is floating-point noise for any valid path.
    /// `t` should avoid exact turning heights and `s` exact turning times.
    pub fn tanaka_residual(&self, s: f64, t: f64) -> f64 {
        let n = self.params.n();
        let sigma_sq = self.params.sigma_sq();
        let speed = 2.0 * n;
        let clock_rate = n * n * sigma_sq;

        let mut n_min = 0u64;
        let mut n_max = 0u64;
        let mut time_fall_above = 0.0;
        let mut time_rise_above = 0.0;
        for seg in self.segments() {
            if seg.s_start >= s {
                break;
            }
            let s_end_eff = seg.s_end.min(s);
            if seg.rising {
                let h_reach = seg.lo + speed * (s_end_eff - seg.s_start);
                let above = (h_reach - t.max(seg.lo)).max(0.0);
                time_rise_above += above / speed;
            } else {
                let h_reach = seg.hi - speed * (s_end_eff - seg.s_start);
                let above = (seg.hi - t.max(h_reach)).max(0.0);
                time_fall_above += above / speed;
            }
            if seg.s_end <= s {
                match seg.end_kind {
                    TurnKind::LocalMax if seg.hi > t => n_max += 1,
                    TurnKind::LocalMin if seg.lo > t => n_min += 1,
                    _ => {}
                }
            }
        }

        let (h_s, v_s) = self.state_at(s);
        let scale = 2.0 / (n * sigma_sq);
        let i1 = scale * (n_min as f64 - clock_rate * time_fall_above);
        let i2 = scale * (n_max as f64 - clock_rate * time_rise_above);
        let indicator = if h_s > t { 1.0 } else { 0.0 };
        let rhs = 2.0 * (h_s - t).max(0.0) + scale * v_s * indicator - 2.0 * (i1 - i2);

        let lhs = scale * self.crossings_at(s, t) as f64;
        lhs - rhs
    }
}

/// Slice values `count(t)/(2N)` of an arbitrary profile snapshot.
pub fn slice_of_profile(
    profile: &LocalTimeProfile,
    t_grid: &[f64],
    params: &ModelParams,
) -> Vec<f64> {
    let two_n = 2.0 * params.n();
    t_grid
        .iter()
        .map(|&t| f64::from(profile.query(t)) / two_n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mass::simulate_mass;
    use crate::params::{make_stream, RngPolicy};
    use crate::stats::{ks_two_sample, moments};

    fn p(sigma: f64, theta: f64, gamma: f64, n: u32, x: f64) -> ModelParams {
        ModelParams::new(sigma, theta, gamma, n, x).unwrap()
    }

    #[test]
    fn rates_match_direct_substitution() {
        // count 4, N=2, σ=1, γ=0.25: 4 + 2·0.25·4 = 6
        assert_eq!(rising_rate(4, &p(1.0, 0.9, 0.25, 2, 1.0)), 6.0);
        // falling: N²σ² + 2Nθ
        assert_eq!(falling_rate(&p(1.0, 0.5, 0.25, 2, 1.0)), 6.0);
    }

    #[test]
    fn rising_gain_without_competition() {
        // γ=0: height gain ~ Exp(Nσ²/2), mean 2/(Nσ²).
        let params = p(1.0, 0.0, 0.0, 2, 1.0);
        let profile = LocalTimeProfile::new();
        let mut rng = make_stream(RngPolicy::new(17, 0));
        let gains: Vec<f64> = (0..20_000)
            .map(|_| simulate_rising(0.0, &profile, &params, &mut rng).top_h)
            .collect();
        let m = moments(&gains).unwrap();
        let expected = 2.0 / (params.n() * params.sigma_sq());
        assert!((m.mean - expected).abs() <= 3.0 * m.se_mean);
    }

    #[test]
    fn first_rise_ignores_competition() {
        // On an empty profile the kill rate has no competition term, so the
        // same stream yields the same segment whatever γ is.
        let profile = LocalTimeProfile::new();
        let mut a = make_stream(RngPolicy::new(3, 9));
        let mut b = make_stream(RngPolicy::new(3, 9));
        let r0 = simulate_rising(0.0, &profile, &p(1.0, 0.0, 0.0, 2, 1.0), &mut a);
        let r5 = simulate_rising(0.0, &profile, &p(1.0, 0.0, 5.0, 2, 1.0), &mut b);
        assert_eq!(r0, r5);
    }

    #[test]
    fn rising_consumes_pieces_exactly() {
        // A huge count below level 1 forces the event into the first piece
        // almost always; above the support the rate drops back to N²σ².
        let params = p(1.0, 0.0, 10.0, 1, 1.0);
        let mut profile = LocalTimeProfile::new();
        for _ in 0..200 {
            profile.add_segment(0.0, 1.0).unwrap();
        }
        let mut rng = make_stream(RngPolicy::new(4, 2));
        let mut below = 0;
        let reps = 2000;
        for _ in 0..reps {
            let r = simulate_rising(0.0, &profile, &params, &mut rng);
            assert!(r.top_h > 0.0);
            if r.top_h < 1.0 {
                below += 1;
            }
        }
        // rate below 1 is 1 + 2·10·200 = 4001 per unit s, i.e. 2000.5 per
        // unit height: P(exceed height 1) = exp(-2000.5) ≈ 0
        assert_eq!(below, reps);
    }

    #[test]
    fn falling_hit_probability_is_exponential_tail() {
        // θ=0, N=1, σ=1: P(hit 0 from h) = exp(−h/2).
        let params = p(1.0, 0.0, 0.0, 1, 1.0);
        let mut rng = make_stream(RngPolicy::new(8, 0));
        let h = 1.4;
        let reps = 20_000;
        let hits = (0..reps)
            .filter(|_| simulate_falling(h, &params, &mut rng).hit_zero)
            .count();
        let p_hat = hits as f64 / reps as f64;
        let p_true = (-h / 2.0f64).exp();
        let se = (p_true * (1.0 - p_true) / reps as f64).sqrt();
        assert!(
            (p_hat - p_true).abs() <= 3.0 * se,
            "p_hat {p_hat} vs {p_true}"
        );
    }

    #[test]
    fn falling_mean_drop_shrinks_with_theta() {
        // E[drop | no hit] bounded by E[drop] = 2N/(N²σ²+2Nθ)
        let params = p(1.0, 500.0, 0.0, 1, 1.0);
        let mut rng = make_stream(RngPolicy::new(8, 1));
        let drops: Vec<f64> = (0..20_000)
            .map(|_| {
                let f = simulate_falling(10.0, &params, &mut rng);
                10.0 - f.bottom_h
            })
            .collect();
        let m = moments(&drops).unwrap();
        let expected = 2.0 / (1.0 + 2.0 * 500.0);
        assert!((m.mean - expected).abs() <= 3.0 * m.se_mean);
    }

    #[test]
    fn empty_forest_explores_nothing() {
        let params = p(1.0, 0.3, 0.2, 4, 0.2);
        let mut rng = make_stream(RngPolicy::new(1, 0));
        let r = explore_forest(&params, &mut rng).unwrap();
        assert_eq!(r.s_n_x, Some(0.0));
        assert_eq!(r.trees_completed, 0);
        assert_eq!(r.profile.query(0.0), 0);
        assert_eq!(r.slice(&[0.0, 1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn completed_runs_cross_zero_twice_per_tree() {
        for (n, x, seed) in [(1u32, 1.0, 10u64), (2, 1.0, 11), (4, 1.7, 12), (3, 2.0, 13)] {
            let params = p(1.0, 0.3, 0.2, n, x);
            for stream in 0..25 {
                let mut rng = make_stream(RngPolicy::new(seed, stream));
                let r = explore_forest(&params, &mut rng).unwrap();
                assert!(r.is_complete());
                assert_eq!(r.trees_completed, params.ancestor_count());
                assert_eq!(u64::from(r.profile.query(0.0)), 2 * params.ancestor_count());
            }
        }
    }

    #[test]
    fn occupation_identity_holds_pathwise() {
        let params = p(1.0, 0.3, 0.2, 4, 1.0);
        for stream in 0..50 {
            let mut rng = make_stream(RngPolicy::new(20, stream));
            let r = explore_forest(&params, &mut rng).unwrap();
            let s_x = r.s_n_x.unwrap();
            let integral = r.profile.integral(1.0 / (2.0 * params.n()));
            assert!(
                (integral - s_x).abs() <= 1e-9 * s_x.max(1.0),
                "stream {stream}: ∫Λ = {integral}, S = {s_x}"
            );
        }
    }

    #[test]
    fn turning_points_alternate_with_consistent_slopes() {
        let params = p(1.3, 0.4, 0.3, 3, 1.5);
        let mut rng = make_stream(RngPolicy::new(30, 0));
        let r = explore_forest(&params, &mut rng).unwrap();
        let speed = 2.0 * params.n();
        for seg in r.segments() {
            assert!(seg.hi > seg.lo);
            let dh = seg.hi - seg.lo;
            let ds = seg.duration();
            assert!((dh - speed * ds).abs() <= 1e-9 * dh.max(1.0));
            match seg.end_kind {
                TurnKind::LocalMax => assert!(seg.rising),
                TurnKind::LocalMin => {
                    assert!(!seg.rising);
                    assert!(seg.lo > 0.0);
                }
                TurnKind::ReflectionAtZero | TurnKind::TerminalZero => {
                    assert!(!seg.rising);
                    assert_eq!(seg.lo, 0.0);
                }
                TurnKind::Start => panic!("start cannot end a segment"),
            }
        }
        // rising and falling alternate
        let mut prev_rising = None;
        for seg in r.segments() {
            if let Some(prev) = prev_rising {
                assert_ne!(prev, seg.rising);
            }
            prev_rising = Some(seg.rising);
        }
    }

    #[test]
    fn slice_endpoints_are_exact() {
        let params = p(1.0, 0.3, 0.2, 4, 1.3); // ⌊Nx⌋ = 5
        let mut rng = make_stream(RngPolicy::new(40, 7));
        let r = explore_forest(&params, &mut rng).unwrap();
        let top = r.max_height();
        let values = r.slice(&[0.0, top + 0.5]);
        assert_eq!(values[0], 5.0 / 4.0);
        assert_eq!(values[1], 0.0);
        for v in r.slice(&[0.1, 0.2, 0.4]) {
            let k = v * params.n();
            assert_eq!(k, k.round());
        }
    }

    #[test]
    fn slice_matches_mass_process_in_law() {
        // Fixed t: the slice of the exploration at S_x and the jump process
        // at t have the same law; two-sample KS at 1% with 10^4 draws each.
        let params = p(1.0, 0.3, 0.2, 1, 1.0);
        let t = 0.5;
        let reps = 10_000u64;
        let mut slices = Vec::with_capacity(reps as usize);
        let mut masses = Vec::with_capacity(reps as usize);
        for i in 0..reps {
            let mut rng = make_stream(RngPolicy::new(50, i));
            let r = explore_forest(&params, &mut rng).unwrap();
            slices.push(r.slice(&[t])[0]);
            let mut rng = make_stream(RngPolicy::new(51, i));
            let (_, s) = simulate_mass(&params, &[t], &mut rng).unwrap();
            masses.push(s[0]);
        }
        let ks = ks_two_sample(&slices, &masses).unwrap();
        assert!(
            ks.p_value >= 0.01,
            "KS stat {} p {}",
            ks.statistic,
            ks.p_value
        );
    }

    #[test]
    fn tanaka_residual_on_handmade_path() {
        // N=1, σ=1, one tree: 0 → 1 → 0.4 → 1.2 → 0 with slope ±2.
        let params = p(1.0, 0.0, 0.0, 1, 1.0);
        let tps = vec![
            TurningPoint {
                s: 0.0,
                h: 0.0,
                kind: TurnKind::Start,
            },
            TurningPoint {
                s: 0.5,
                h: 1.0,
                kind: TurnKind::LocalMax,
            },
            TurningPoint {
                s: 0.8,
                h: 0.4,
                kind: TurnKind::LocalMin,
            },
            TurningPoint {
                s: 1.2,
                h: 1.2,
                kind: TurnKind::LocalMax,
            },
            TurningPoint {
                s: 1.8,
                h: 0.0,
                kind: TurnKind::TerminalZero,
            },
        ];
        let mut profile = LocalTimeProfile::new();
        profile.add_segment(0.0, 1.0).unwrap();
        profile.add_segment(0.4, 1.0).unwrap();
        profile.add_segment(0.4, 1.2).unwrap();
        profile.add_segment(0.0, 1.2).unwrap();
        let r = ExplorationResult {
            params,
            turning_points: tps,
            s_n_x: Some(1.8),
            trees_completed: 1,
            profile,
        };
        for &s in &[0.3, 0.7, 1.0, 1.5, 1.79] {
            for &t in &[0.2, 0.5, 0.9, 1.1, 2.0] {
                let res = r.tanaka_residual(s, t);
                assert!(res.abs() <= 1e-12, "s={s} t={t} residual {res}");
            }
        }
        // boundary cases: s=0 and t above the running maximum
        assert_eq!(r.tanaka_residual(0.0, 0.5), 0.0);
        assert_eq!(r.crossings_at(0.3, 2.0), 0);
    }

    #[test]
    fn tanaka_residual_on_simulated_paths() {
        let params = p(1.0, 0.3, 0.2, 2, 1.0);
        for stream in 0..20 {
            let mut rng = make_stream(RngPolicy::new(60, stream));
            let r = explore_forest(&params, &mut rng).unwrap();
            let s_x = r.s_n_x.unwrap();
            let mut probe = make_stream(RngPolicy::new(61, stream));
            for _ in 0..10 {
                let s = probe.uniform() * s_x;
                let t = probe.uniform() * r.max_height() * 1.05;
                let l = 4.0 / params.sigma_sq() * r.crossings_at(s, t) as f64 / (2.0 * params.n());
                let res = r.tanaka_residual(s, t);
                assert!(
                    res.abs() <= 1e-8 * (1.0 + l),
                    "stream {stream} s={s} t={t} residual {res}"
                );
            }
        }
    }

    #[test]
    fn truncation_covers_horizon_and_replays_consistently() {
        let params = p(1.0, 0.0, 0.0, 2, 2.0);
        let opts = ExploreOptions {
            s_max: 1.0,
            ..Default::default()
        };
        let mut rng = make_stream(RngPolicy::new(70, 0));
        let r = explore_forest_with(&params, opts, &mut rng).unwrap();
        assert!(r.s_end() >= 1.0);
        if !r.is_complete() {
            assert!(r.trees_completed < params.ancestor_count());
        }
        // replaying all completed segments reproduces the final profile
        let replay = r.profile_at(r.s_end());
        assert_eq!(replay, r.profile);
    }

    #[test]
    fn return_times_count_zero_hits() {
        let params = p(1.0, 0.3, 0.2, 2, 2.0); // 4 trees
        let mut rng = make_stream(RngPolicy::new(80, 0));
        let r = explore_forest(&params, &mut rng).unwrap();
        let s1 = r.return_time(1).unwrap();
        let s4 = r.return_time(4).unwrap();
        assert!(s1 < s4);
        assert_eq!(Some(s4), r.s_n_x);
        assert_eq!(r.return_time(5), None);
    }

    #[test]
    fn budget_exceeded_is_reported() {
        let params = p(1.0, 0.0, 0.0, 4, 4.0);
        let opts = ExploreOptions {
            turning_point_budget: 5,
            ..Default::default()
        };
        let mut rng = make_stream(RngPolicy::new(90, 0));
        let err = explore_forest_with(&params, opts, &mut rng).unwrap_err();
        assert!(matches!(
            err,
            ExploreError::EventBudgetExceeded { budget: 5, .. }
        ));
    }

    #[test]
    fn median_completion_time_grows_with_mass() {
        // Stress check: S_x is stochastically larger for larger x.
        let reps = 200u64;
        let mut medians = Vec::new();
        for (j, x) in [0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
            let params = p(1.0, 0.3, 0.2, 2, x);
            let mut sx: Vec<f64> = (0..reps)
                .map(|i| {
                    let mut rng = make_stream(RngPolicy::new(100 + j as u64, i));
                    explore_forest(&params, &mut rng).unwrap().s_n_x.unwrap()
                })
                .collect();
            sx.sort_by(f64::total_cmp);
            medians.push(sx[reps as usize / 2]);
        }
        for w in medians.windows(2) {
            assert!(w[1] >= w[0], "medians not monotone: {medians:?}");
        }
    }
}
