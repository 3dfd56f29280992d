//! The verification suite: eleven numbered criteria covering the pathwise
//! identities (occupation formula, crossing counts, Tanaka decomposition),
//! the distributional equalities (slice law vs. jump law, moment identities,
//! Girsanov martingale and reweighting), the diffusion limits, the time
//! change, and determinism of the suite itself.
//!
//! Every tolerance, sample size and parameter choice is pinned here. Each
//! criterion draws from its own block of random streams, so criteria are
//! independent and the whole suite is reproducible from the master seed
//! alone, regardless of worker count.

use rayon::prelude::*;

use crate::explore::{explore_forest, explore_forest_with, ExploreOptions};
use crate::girsanov::{importance_estimate, weight, StopRule};
use crate::mass::simulate_mass;
use crate::params::{make_stream, ModelParams, RngPolicy};
use crate::sde::{
    default_bin_width, euler_feller_logistic, euler_reflected_localtime, lamperti_time_change,
    ou_increment_fit, ou_increments,
};
use crate::stats::{ks_one_sample, ks_statistic, ks_two_sample, moments, TestReport};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy)]
pub struct AcceptanceConfig {
    pub master_seed: u64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            master_seed: 1280723762,
        }
    }
}

/// Stream blocks: each criterion owns disjoint stream ids of the master
/// seed, with replicate i of block b mapped to stream `b·2³² + i`.
fn policy(seed: u64, block: u64, replicate: u64) -> RngPolicy {
    debug_assert!(replicate < 1 << 32);
    RngPolicy::new(seed, (block << 32) | replicate)
}

const BLOCK_C12_EXPLORE: u64 = 1;
const BLOCK_C3_EXPLORE: u64 = 2;
const BLOCK_C3_PROBE: u64 = 3;
const BLOCK_C4_EXPLORE: u64 = 4; // +0..3
const BLOCK_C4_MASS: u64 = 8; // +0..3
const BLOCK_C5_MASS: u64 = 12;
const BLOCK_C5_EULER: u64 = 13;
const BLOCK_C6_EXPLORE: u64 = 14; // +0..2
const BLOCK_C7_NULL: u64 = 17;
const BLOCK_C7_TARGET: u64 = 18;
const BLOCK_C8_EXPLORE: u64 = 19; // +0..4
const BLOCK_C8_EULER: u64 = 24;
const BLOCK_C9_REFLECTED: u64 = 25;
const BLOCK_C10_FELLER: u64 = 26;

fn reference_params(capital_n: u32) -> ModelParams {
    ModelParams::new(1.0, 0.3, 0.2, capital_n, 1.0).unwrap()
}

/// Runs criteria 1-10 once.
pub fn run_core_criteria(cfg: &AcceptanceConfig) -> Vec<TestReport> {
    let seed = cfg.master_seed;
    let mut reports = Vec::with_capacity(10);
    reports.extend(criterion_1_2(seed));
    reports.push(criterion_3(seed));
    reports.push(criterion_4(seed));
    reports.push(criterion_5(seed));
    reports.push(criterion_6(seed));
    reports.push(criterion_7(seed));
    reports.push(criterion_8(seed));
    reports.push(criterion_9(seed));
    reports.push(criterion_10(seed));
    reports
}

/// Runs the full suite, criteria 1-11. Criterion 11 re-runs 1-10 with the
/// same seed and demands byte-identical serialized reports.
pub fn run_all(cfg: &AcceptanceConfig) -> Vec<TestReport> {
    let mut reports = run_core_criteria(cfg);
    let first = serde_json::to_vec(&reports).expect("reports serialize");
    let second = serde_json::to_vec(&run_core_criteria(cfg)).expect("reports serialize");
    let identical = first == second;
    reports.push(TestReport::from_statistic(
        "C11 determinism of the suite",
        if identical { 0.0 } else { 1.0 },
        0.0,
        first.len() as u64,
        format!(
            "criteria 1-10 re-run with seed {seed}: serialized reports {}",
            if identical {
                "byte-identical"
            } else {
                "DIFFER"
            },
            seed = cfg.master_seed,
        ),
    ));
    reports
}

/// C1: occupation identity `∫Λ dt = S_x` pathwise; C2: crossing count at 0
/// equals `2⌊Nx⌋`. 10³ explored paths at N=4, σ=1, θ=0.3, γ=0.2, x=1.
fn criterion_1_2(seed: u64) -> Vec<TestReport> {
    let params = reference_params(4);
    let reps = 1000u64;
    let rows: Vec<(f64, bool)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = make_stream(policy(seed, BLOCK_C12_EXPLORE, i));
            let r = explore_forest(&params, &mut rng).expect("within budget");
            let s_x = r.s_n_x.expect("complete");
            let integral = r.profile.integral(1.0 / (2.0 * params.n()));
            let rel = (integral - s_x).abs() / s_x.max(1.0);
            let crossings_ok = u64::from(r.profile.query(0.0)) == 2 * params.ancestor_count();
            (rel, crossings_ok)
        })
        .collect();
    let max_rel = rows.iter().fold(0.0f64, |m, &(r, _)| m.max(r));
    let bad_crossings = rows.iter().filter(|&&(_, ok)| !ok).count();
    vec![
        TestReport::from_statistic(
            "C1 occupation identity",
            max_rel,
            1e-9,
            reps,
            format!("max |∫Λ dt − S_x| / max(1, S_x) over {reps} paths"),
        ),
        TestReport::from_statistic(
            "C2 crossings at zero",
            bad_crossings as f64,
            0.0,
            reps,
            format!(
                "paths with profile(0) ≠ 2⌊Nx⌋ = {}",
                2 * params.ancestor_count()
            ),
        ),
    ]
}

/// C3: discrete Tanaka residual at 10 random (s, t) per path, 100 paths.
fn criterion_3(seed: u64) -> TestReport {
    let params = reference_params(4);
    let reps = 100u64;
    let worst: f64 = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = make_stream(policy(seed, BLOCK_C3_EXPLORE, i));
            let r = explore_forest(&params, &mut rng).expect("within budget");
            let s_x = r.s_n_x.expect("complete");
            let mut probe = make_stream(policy(seed, BLOCK_C3_PROBE, i));
            let mut m: f64 = 0.0;
            for _ in 0..10 {
                let s = probe.uniform() * s_x;
                let t = probe.uniform() * r.max_height() * 1.05;
                let l = 4.0 / params.sigma_sq() * r.crossings_at(s, t) as f64 / (2.0 * params.n());
                m = m.max(r.tanaka_residual(s, t).abs() / (1.0 + l));
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    TestReport::from_statistic(
        "C3 discrete Tanaka residual",
        worst,
        1e-8,
        reps * 10,
        "max |L_s(t) − Tanaka RHS| / (1 + L_s(t)) over random (s, t)".into(),
    )
}

/// C4: exact equality in law of the terminal slice and the jump process.
/// Two-sample KS per (N, t) cell; at least 8 of 9 cells accept at 1%.
fn criterion_4(seed: u64) -> TestReport {
    let t_grid = [0.25, 0.5, 1.0];
    let reps = 10_000u64;
    let mut notes = String::new();
    let mut failing = 0u32;
    for (j, n) in [1u32, 2, 4].into_iter().enumerate() {
        let params = reference_params(n);
        let slices: Vec<Vec<f64>> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut rng = make_stream(policy(seed, BLOCK_C4_EXPLORE + j as u64, i));
                explore_forest(&params, &mut rng)
                    .expect("within budget")
                    .slice(&t_grid)
            })
            .collect();
        let masses: Vec<Vec<f64>> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut rng = make_stream(policy(seed, BLOCK_C4_MASS + j as u64, i));
                simulate_mass(&params, &t_grid, &mut rng)
                    .expect("within budget")
                    .1
            })
            .collect();
        for (k, &t) in t_grid.iter().enumerate() {
            let a: Vec<f64> = slices.iter().map(|s| s[k]).collect();
            let b: Vec<f64> = masses.iter().map(|s| s[k]).collect();
            let ks = ks_two_sample(&a, &b).expect("sample sizes fixed");
            if ks.p_value < 0.01 {
                failing += 1;
            }
            notes.push_str(&format!(
                "N={n} t={t}: D={:.5} p={:.4}; ",
                ks.statistic, ks.p_value
            ));
        }
    }
    TestReport::from_statistic(
        "C4 slice law equals jump law",
        f64::from(failing),
        1.0,
        2 * reps * 9,
        format!("cells failing KS at 1% (allowance 1 of 9): {notes}"),
    )
}

/// C5: moment identities at θ=γ=0 for the jump process and the Euler scheme:
/// mean z0 and variance σ²z0t at t ∈ {0.5, 1}, with an O(dt) bias budget of
/// 5·dt·σ²z0 for the Euler variance.
fn criterion_5(seed: u64) -> TestReport {
    let params = ModelParams::new(1.0, 0.0, 0.0, 4, 1.0).unwrap();
    let z0 = params.z0();
    let t_grid = [0.5, 1.0];
    let reps = 10_000u64;
    let dt = 1e-3;

    let mass_samples: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = make_stream(policy(seed, BLOCK_C5_MASS, i));
            simulate_mass(&params, &t_grid, &mut rng)
                .expect("within budget")
                .1
        })
        .collect();
    let euler_samples: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = make_stream(policy(seed, BLOCK_C5_EULER, i));
            let path = euler_feller_logistic(&params, dt, 1.0, &mut rng);
            t_grid
                .iter()
                .map(|&t| path.values[(t / dt).round() as usize])
                .collect()
        })
        .collect();

    let mut worst: f64 = 0.0;
    let mut notes = String::new();
    for (label, samples, var_bias) in [
        ("mass", &mass_samples, 0.0),
        ("euler", &euler_samples, 5.0 * dt * params.sigma_sq() * z0),
    ] {
        for (k, &t) in t_grid.iter().enumerate() {
            let at: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let m = moments(&at).expect("enough samples");
            let z_mean = (m.mean - z0).abs() / m.se_mean;
            let z_var = ((m.variance - params.sigma_sq() * z0 * t).abs() - var_bias).max(0.0)
                / m.se_variance;
            worst = worst.max(z_mean).max(z_var);
            notes.push_str(&format!(
                "{label} t={t}: z_mean={z_mean:.2} z_var={z_var:.2}; "
            ));
        }
    }
    TestReport::from_statistic(
        "C5 moment identities at criticality",
        worst,
        3.0,
        2 * reps,
        format!("worst deviation in SE units, variance bias budget on euler: {notes}"),
    )
}

/// C6: unit mean of the Girsanov weight at τ_a = S_{a/N} ∧ s for
/// a ∈ {1,2,4}, s ∈ {1,5}, N ∈ {1,2}, 10⁴ null paths each.
fn criterion_6(seed: u64) -> TestReport {
    const CELLS: [(u64, f64); 6] = [(1, 1.0), (1, 5.0), (2, 1.0), (2, 5.0), (4, 1.0), (4, 5.0)];
    let reps = 10_000u64;
    let mut worst: f64 = 0.0;
    let mut notes = String::new();
    for (j, n) in [1u32, 2].into_iter().enumerate() {
        let x = 4.0 / f64::from(n);
        let null = ModelParams::new(1.0, 0.0, 0.0, n, x).unwrap();
        let target = ModelParams::new(1.0, 0.3, 0.2, n, x).unwrap();
        let opts = ExploreOptions {
            s_max: 5.0,
            ..Default::default()
        };
        let weights: Vec<[f64; 6]> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut rng = make_stream(policy(seed, BLOCK_C6_EXPLORE + j as u64, i));
                let path = explore_forest_with(&null, opts, &mut rng).expect("within budget");
                let mut out = [0.0; 6];
                for (c, (a, s)) in CELLS.into_iter().enumerate() {
                    out[c] = weight(&path, &target, StopRule::ExcursionsOrTime { trees: a, s })
                        .expect("stop covered by construction")
                        .weight();
                }
                out
            })
            .collect();
        for (c, (a, s)) in CELLS.into_iter().enumerate() {
            let ws: Vec<f64> = weights.iter().map(|w| w[c]).collect();
            let m = moments(&ws).expect("enough samples");
            let z = (m.mean - 1.0).abs() / m.se_mean;
            worst = worst.max(z);
            notes.push_str(&format!("N={n} a={a} s={s}: mean={:.4} z={z:.2}; ", m.mean));
        }
    }
    TestReport::from_statistic(
        "C6 Girsanov martingale property",
        worst,
        3.0,
        2 * reps,
        format!("worst |E[Y]−1| in SE units over 12 stopping cells: {notes}"),
    )
}

/// C7: importance-sampling consistency: weighted-null vs direct-target slice
/// means at t ∈ {0.25, 0.5}, N = 2, target θ=0.3, γ=0.2, 10⁴ paths each,
/// both stopped at τ = S_x ∧ 5. The reweighting identity is exact at any
/// fixed horizon; the short horizon keeps the weight tails light enough for
/// the 3·SE comparison to hold at its nominal level.
fn criterion_7(seed: u64) -> TestReport {
    let n = 2u32;
    let s_cut = 5.0;
    let t_grid = [0.25, 0.5];
    let reps = 10_000u64;
    let null = ModelParams::new(1.0, 0.0, 0.0, n, 1.0).unwrap();
    let target = reference_params(n);
    let trees = null.ancestor_count();
    let opts = ExploreOptions {
        s_max: s_cut,
        ..Default::default()
    };
    let stop = StopRule::ExcursionsOrTime { trees, s: s_cut };

    let weighted: Vec<(f64, Vec<f64>)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = make_stream(policy(seed, BLOCK_C7_NULL, i));
            let path = explore_forest_with(&null, opts, &mut rng).expect("within budget");
            let w = weight(&path, &target, stop).expect("stop covered by construction");
            let prof = path.profile_at(w.stop_time);
            let slice = crate::explore::slice_of_profile(&prof, &t_grid, &null);
            (w.weight(), slice)
        })
        .collect();
    let direct: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = make_stream(policy(seed, BLOCK_C7_TARGET, i));
            let path = explore_forest_with(&target, opts, &mut rng).expect("within budget");
            let tau = path.return_time(trees).map_or(s_cut, |s| s.min(s_cut));
            let prof = path.profile_at(tau);
            crate::explore::slice_of_profile(&prof, &t_grid, &target)
        })
        .collect();

    let ws: Vec<f64> = weighted.iter().map(|(w, _)| *w).collect();
    let mut worst: f64 = 0.0;
    let mut notes = String::new();
    for (k, &t) in t_grid.iter().enumerate() {
        let gs: Vec<f64> = weighted.iter().map(|(_, s)| s[k]).collect();
        let (est, se_w) = importance_estimate(&ws, &gs).expect("weights not degenerate");
        let d: Vec<f64> = direct.iter().map(|s| s[k]).collect();
        let md = moments(&d).expect("enough samples");
        let z = (est - md.mean).abs() / (se_w * se_w + md.se_mean * md.se_mean).sqrt();
        worst = worst.max(z);
        notes.push_str(&format!(
            "t={t}: weighted={est:.4}±{se_w:.4} direct={:.4}±{:.4} z={z:.2}; ",
            md.mean, md.se_mean
        ));
    }
    TestReport::from_statistic(
        "C7 importance-sampling consistency",
        worst,
        3.0,
        2 * reps,
        format!("weighted-null vs direct-target slice means in combined SE units: {notes}"),
    )
}

/// C8: convergence of the slice law to the logistic Feller marginal at
/// t = 0.5: KS distance nonincreasing in N up to slack 0.01 and ≤ 0.05 at
/// N = 32 (Euler reference at dt = 1e−4, 10⁴ paths).
fn criterion_8(seed: u64) -> TestReport {
    let t = 0.5;
    let reps = 10_000u64;
    let dt = 1e-4;
    let euler: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = make_stream(policy(seed, BLOCK_C8_EULER, i));
            let params = reference_params(1);
            euler_feller_logistic(&params, dt, t, &mut rng).last()
        })
        .collect();
    let mut distances = Vec::new();
    for (j, n) in [4u32, 8, 16, 32].into_iter().enumerate() {
        let params = reference_params(n);
        let slices: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut rng = make_stream(policy(seed, BLOCK_C8_EXPLORE + j as u64, i));
                explore_forest(&params, &mut rng)
                    .expect("within budget")
                    .slice(&[t])[0]
            })
            .collect();
        distances.push(ks_statistic(&slices, &euler));
    }
    let monotone = distances.windows(2).all(|w| w[1] <= w[0] + 0.01);
    let d_final = *distances.last().unwrap();
    let pass = monotone && d_final <= 0.05;
    TestReport {
        name: "C8 convergence to the diffusion limit".into(),
        statistic: d_final,
        threshold: 0.05,
        p_value: None,
        pass,
        n_samples: 5 * reps,
        notes: format!(
            "KS distances for N=4,8,16,32: {distances:?}; nonincreasing within 0.01: {monotone}"
        ),
    }
}

/// C9: the reflected Euler scheme at θ=γ=0 has the folded-normal marginal:
/// one-sample KS of H_1 against |N(0, 4/σ²)| at 1%, dt = 1e−4, 10⁴ paths.
fn criterion_9(seed: u64) -> TestReport {
    let params = ModelParams::new(1.0, 0.0, 0.0, 1, 1.0).unwrap();
    let dt = 1e-4;
    let reps = 10_000u64;
    let finals: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = make_stream(policy(seed, BLOCK_C9_REFLECTED, i));
            euler_reflected_localtime(&params, dt, default_bin_width(dt), 1.0, &mut rng)
                .h_path
                .last()
        })
        .collect();
    let sd = (4.0 / params.sigma_sq()).sqrt();
    let normal = Normal::new(0.0, sd).unwrap();
    let ks = ks_one_sample(&finals, |h| 2.0 * normal.cdf(h) - 1.0).expect("enough samples");
    TestReport::from_p_value(
        "C9 reflected solver marginal",
        ks.statistic,
        ks.p_value,
        0.01,
        reps,
        format!("one-sample KS of H_1 against the folded normal, dt={dt}"),
    )
}

/// C10: occupation time change: pathwise |τ_x − ∫Z dt| within grid tolerance on
/// absorbed paths, and the OU increment regression on the time-changed paths
/// recovers (θ, γ, σ²) = (1, 2, 0.25) within 3 SE. 10³ paths.
fn criterion_10(seed: u64) -> TestReport {
    let params = ModelParams::new(0.5, 1.0, 2.0, 1, 1.0).unwrap();
    let dt = 5e-4;
    let t_max = 200.0;
    let reps = 1000u64;
    let rows: Vec<(Option<f64>, Vec<crate::sde::OuIncrement>)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = make_stream(policy(seed, BLOCK_C10_FELLER, i));
            let path = euler_feller_logistic(&params, dt, t_max, &mut rng);
            let incs = ou_increments(&path);
            let identity_ratio = lamperti_time_change(&path).ok().map(|tc| {
                let max_z = path.values.iter().copied().fold(0.0, f64::max);
                (tc.tau_x - tc.area).abs() / (2.0 * dt * max_z)
            });
            (identity_ratio, incs)
        })
        .collect();

    let unabsorbed = rows.iter().filter(|(r, _)| r.is_none()).count();
    let identity_worst = rows.iter().filter_map(|(r, _)| *r).fold(0.0f64, f64::max);
    let incs: Vec<crate::sde::OuIncrement> = rows.into_iter().flat_map(|(_, incs)| incs).collect();
    let fit = ou_increment_fit(&incs).expect("enough increments");
    let z_theta = (fit.theta - params.theta).abs() / fit.se_theta;
    let z_gamma = (fit.gamma - params.gamma).abs() / fit.se_gamma;
    let z_sigma = (fit.sigma_sq - params.sigma_sq()).abs() / fit.se_sigma_sq;
    let worst_z = z_theta.max(z_gamma).max(z_sigma);
    TestReport {
        name: "C10 Ornstein-Uhlenbeck time change".into(),
        statistic: worst_z,
        threshold: 3.0,
        p_value: None,
        pass: worst_z <= 3.0 && identity_worst <= 1.0,
        n_samples: reps,
        notes: format!(
            "θ̂={:.4}±{:.4} γ̂={:.4}±{:.4} σ̂²={:.4}±{:.4} on {} increments; \
             max |τ_x−area| / (2·dt·max Z) = {identity_worst:.3}; unabsorbed paths: {unabsorbed}",
            fit.theta,
            fit.se_theta,
            fit.gamma,
            fit.se_gamma,
            fit.sigma_sq,
            fit.se_sigma_sq,
            fit.n_increments
        ),
    }
}
