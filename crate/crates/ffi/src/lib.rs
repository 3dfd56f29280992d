//! C ABI over the simulation core.
//!
//! All state lives behind opaque handles created and freed here; every
//! fallible call returns an [`LrkStatus`] and writes results through out
//! pointers. Handles are not thread-safe; use one handle per thread or
//! synchronize externally. Reproducibility follows the core conventions:
//! a call with the same (master_seed, stream_id) yields the same path.

use std::ffi::{c_char, CStr};

use logistic_rayknight::explore::{explore_forest_with, ExplorationResult, ExploreOptions};
use logistic_rayknight::girsanov::{weight, GirsanovError, StopRule};
use logistic_rayknight::mass::{simulate_mass, MassPath};
use logistic_rayknight::params::{make_stream, ModelParams, RngPolicy};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    BudgetExceeded = 3,
    StopBeyondPath = 4,
    /// The exploration was truncated before completing its forest.
    Incomplete = 5,
    InvalidArgument = 6,
}

/// Validated model parameters (opaque).
pub struct LrkParams {
    inner: ModelParams,
}

/// One exact trajectory of the discrete mass process (opaque).
pub struct LrkMassPath {
    inner: MassPath,
}

/// One exploration path with its local-time profile (opaque).
pub struct LrkExploration {
    inner: ExplorationResult,
}

/// Version of the library as a NUL-terminated static string.
#[no_mangle]
pub extern "C" fn lrk_version() -> *const c_char {
    static VERSION: &CStr = c"logistic-rayknight 0.1.0";
    VERSION.as_ptr()
}

/// Validates (σ, θ, γ, N, x) and allocates a parameter handle.
///
/// # Safety
/// `out` must be a valid pointer. On `Ok` it receives a handle that must be
/// released with [`lrk_params_free`].
#[no_mangle]
pub unsafe extern "C" fn lrk_params_new(
    sigma: f64,
    theta: f64,
    gamma: f64,
    capital_n: u32,
    x: f64,
    out: *mut *mut LrkParams,
) -> LrkStatus {
    if out.is_null() {
        return LrkStatus::NullPointer;
    }
    match ModelParams::new(sigma, theta, gamma, capital_n, x) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(LrkParams { inner }));
            LrkStatus::Ok
        }
        Err(_) => LrkStatus::InvalidParams,
    }
}

/// # Safety
/// `p` must be a handle from [`lrk_params_new`] not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn lrk_params_free(p: *mut LrkParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Discrete initial mass ⌊Nx⌋/N, or NaN on a null handle.
///
/// # Safety
/// `p` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lrk_params_z0(p: *const LrkParams) -> f64 {
    match p.as_ref() {
        Some(p) => p.inner.z0(),
        None => f64::NAN,
    }
}

/// Simulates one exact mass path on [0, t_max].
///
/// # Safety
/// `p` must be a live parameter handle; `out` a valid pointer. On `Ok` it
/// receives a handle to free with [`lrk_mass_free`].
#[no_mangle]
pub unsafe extern "C" fn lrk_mass_simulate(
    p: *const LrkParams,
    master_seed: u64,
    stream_id: u64,
    t_max: f64,
    out: *mut *mut LrkMassPath,
) -> LrkStatus {
    let Some(p) = p.as_ref() else {
        return LrkStatus::NullPointer;
    };
    if out.is_null() {
        return LrkStatus::NullPointer;
    }
    if !t_max.is_finite() || t_max < 0.0 {
        return LrkStatus::InvalidArgument;
    }
    let mut rng = make_stream(RngPolicy::new(master_seed, stream_id));
    match simulate_mass(&p.inner, &[t_max], &mut rng) {
        Ok((path, _)) => {
            *out = Box::into_raw(Box::new(LrkMassPath { inner: path }));
            LrkStatus::Ok
        }
        Err(_) => LrkStatus::BudgetExceeded,
    }
}

/// # Safety
/// `h` must be a handle from [`lrk_mass_simulate`] not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn lrk_mass_free(h: *mut LrkMassPath) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of jumps in the path; 0 on a null handle.
///
/// # Safety
/// `h` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lrk_mass_jump_count(h: *const LrkMassPath) -> u64 {
    h.as_ref().map_or(0, |h| h.inner.jump_times.len() as u64)
}

/// Right-continuous path value at time `t`; NaN on a null handle.
///
/// # Safety
/// `h` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lrk_mass_value_at(h: *const LrkMassPath, t: f64) -> f64 {
    h.as_ref().map_or(f64::NAN, |h| h.inner.value_at(t))
}

/// Jump `index` as (time, level reached).
///
/// # Safety
/// `h` must be a live handle; `out_t` and `out_z` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lrk_mass_jump(
    h: *const LrkMassPath,
    index: u64,
    out_t: *mut f64,
    out_z: *mut f64,
) -> LrkStatus {
    let Some(h) = h.as_ref() else {
        return LrkStatus::NullPointer;
    };
    if out_t.is_null() || out_z.is_null() {
        return LrkStatus::NullPointer;
    }
    let Some(i) = usize::try_from(index)
        .ok()
        .filter(|&i| i < h.inner.jump_times.len())
    else {
        return LrkStatus::InvalidArgument;
    };
    *out_t = h.inner.jump_times[i];
    *out_z = h.inner.levels[i];
    LrkStatus::Ok
}

/// Explores the forest of ⌊Nx⌋ trees; `s_max <= 0` means no truncation.
///
/// # Safety
/// `p` must be a live parameter handle; `out` a valid pointer. On `Ok` it
/// receives a handle to free with [`lrk_explore_free`].
#[no_mangle]
pub unsafe extern "C" fn lrk_explore(
    p: *const LrkParams,
    master_seed: u64,
    stream_id: u64,
    s_max: f64,
    out: *mut *mut LrkExploration,
) -> LrkStatus {
    let Some(p) = p.as_ref() else {
        return LrkStatus::NullPointer;
    };
    if out.is_null() {
        return LrkStatus::NullPointer;
    }
    let opts = ExploreOptions {
        s_max: if s_max > 0.0 { s_max } else { f64::INFINITY },
        ..Default::default()
    };
    let mut rng = make_stream(RngPolicy::new(master_seed, stream_id));
    match explore_forest_with(&p.inner, opts, &mut rng) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(LrkExploration { inner }));
            LrkStatus::Ok
        }
        Err(_) => LrkStatus::BudgetExceeded,
    }
}

/// # Safety
/// `h` must be a handle from [`lrk_explore`] not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn lrk_explore_free(h: *mut LrkExploration) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Completion time S_x of the exploration; `Incomplete` when the run was
/// truncated by `s_max` before all trees were traversed.
///
/// # Safety
/// `h` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lrk_explore_s_x(h: *const LrkExploration, out: *mut f64) -> LrkStatus {
    let Some(h) = h.as_ref() else {
        return LrkStatus::NullPointer;
    };
    if out.is_null() {
        return LrkStatus::NullPointer;
    }
    match h.inner.s_n_x {
        Some(s) => {
            *out = s;
            LrkStatus::Ok
        }
        None => LrkStatus::Incomplete,
    }
}

/// Crossing count of the terminal profile at height 0 (2⌊Nx⌋ on a complete
/// run); 0 on a null handle.
///
/// # Safety
/// `h` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lrk_explore_crossings_at_zero(h: *const LrkExploration) -> u64 {
    h.as_ref()
        .map_or(0, |h| u64::from(h.inner.profile.query(0.0)))
}

/// Number of turning points in the path; 0 on a null handle.
///
/// # Safety
/// `h` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lrk_explore_turning_point_count(h: *const LrkExploration) -> u64 {
    h.as_ref()
        .map_or(0, |h| h.inner.turning_points.len() as u64)
}

/// Turning point `index` as (exploration time, height).
///
/// # Safety
/// `h` must be a live handle; `out_s` and `out_h` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lrk_explore_turning_point(
    h: *const LrkExploration,
    index: u64,
    out_s: *mut f64,
    out_h: *mut f64,
) -> LrkStatus {
    let Some(h) = h.as_ref() else {
        return LrkStatus::NullPointer;
    };
    if out_s.is_null() || out_h.is_null() {
        return LrkStatus::NullPointer;
    }
    let Some(i) = usize::try_from(index)
        .ok()
        .filter(|&i| i < h.inner.turning_points.len())
    else {
        return LrkStatus::InvalidArgument;
    };
    let tp = h.inner.turning_points[i];
    *out_s = tp.s;
    *out_h = tp.h;
    LrkStatus::Ok
}

/// Writes the terminal mass slice `count(t)/(2N)` for `len` heights from
/// `ts` into `out_values`.
///
/// # Safety
/// `h` must be a live handle; `ts` and `out_values` must point to `len`
/// readable/writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lrk_explore_slice(
    h: *const LrkExploration,
    ts: *const f64,
    len: u64,
    out_values: *mut f64,
) -> LrkStatus {
    let Some(h) = h.as_ref() else {
        return LrkStatus::NullPointer;
    };
    if (ts.is_null() || out_values.is_null()) && len > 0 {
        return LrkStatus::NullPointer;
    }
    let Ok(len) = usize::try_from(len) else {
        return LrkStatus::InvalidArgument;
    };
    let grid = std::slice::from_raw_parts(ts, len);
    let values = h.inner.slice(grid);
    std::ptr::copy_nonoverlapping(values.as_ptr(), out_values, len);
    LrkStatus::Ok
}

/// Girsanov log-weight of a null-law exploration against `target`, stopped
/// at `τ = S_{trees/N} ∧ stop_s` (`stop_s <= 0` means no time cap).
///
/// # Safety
/// `h` and `target` must be live handles; `out_log_weight` and
/// `out_stop_time` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lrk_girsanov_log_weight(
    h: *const LrkExploration,
    target: *const LrkParams,
    stop_trees: u64,
    stop_s: f64,
    out_log_weight: *mut f64,
    out_stop_time: *mut f64,
) -> LrkStatus {
    let (Some(h), Some(target)) = (h.as_ref(), target.as_ref()) else {
        return LrkStatus::NullPointer;
    };
    if out_log_weight.is_null() || out_stop_time.is_null() {
        return LrkStatus::NullPointer;
    }
    let stop = StopRule::ExcursionsOrTime {
        trees: stop_trees,
        s: if stop_s > 0.0 { stop_s } else { f64::INFINITY },
    };
    match weight(&h.inner, &target.inner, stop) {
        Ok(w) => {
            *out_log_weight = w.log_weight;
            *out_stop_time = w.stop_time;
            LrkStatus::Ok
        }
        Err(GirsanovError::StopBeyondPath { .. }) => LrkStatus::StopBeyondPath,
        Err(_) => LrkStatus::InvalidArgument,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    unsafe fn params(sigma: f64, theta: f64, gamma: f64, n: u32, x: f64) -> *mut LrkParams {
        let mut p: *mut LrkParams = ptr::null_mut();
        assert_eq!(
            lrk_params_new(sigma, theta, gamma, n, x, &mut p),
            LrkStatus::Ok
        );
        p
    }

    #[test]
    fn version_is_a_c_string() {
        let v = unsafe { CStr::from_ptr(lrk_version()) };
        assert!(v.to_str().unwrap().starts_with("logistic-rayknight"));
    }

    #[test]
    fn params_lifecycle_and_validation() {
        unsafe {
            let p = params(1.0, 0.5, 0.25, 2, 0.7);
            assert_eq!(lrk_params_z0(p), 0.5);
            lrk_params_free(p);

            let mut bad: *mut LrkParams = ptr::null_mut();
            assert_eq!(
                lrk_params_new(0.0, 0.0, 0.0, 1, 1.0, &mut bad),
                LrkStatus::InvalidParams
            );
            assert_eq!(
                lrk_params_new(1.0, 0.0, 0.0, 1, 1.0, ptr::null_mut()),
                LrkStatus::NullPointer
            );
            assert!(lrk_params_z0(ptr::null()).is_nan());
        }
    }

    #[test]
    fn mass_path_round_trip_matches_core() {
        unsafe {
            let p = params(1.0, 0.3, 0.2, 4, 1.0);
            let mut h: *mut LrkMassPath = ptr::null_mut();
            assert_eq!(lrk_mass_simulate(p, 9, 3, 2.0, &mut h), LrkStatus::Ok);

            let mut rng = make_stream(RngPolicy::new(9, 3));
            let core = ModelParams::new(1.0, 0.3, 0.2, 4, 1.0).unwrap();
            let (path, _) = simulate_mass(&core, &[2.0], &mut rng).unwrap();
            assert_eq!(lrk_mass_jump_count(h), path.jump_times.len() as u64);
            assert_eq!(lrk_mass_value_at(h, 1.0), path.value_at(1.0));
            if !path.jump_times.is_empty() {
                let (mut t, mut z) = (0.0, 0.0);
                assert_eq!(lrk_mass_jump(h, 0, &mut t, &mut z), LrkStatus::Ok);
                assert_eq!(t, path.jump_times[0]);
                assert_eq!(z, path.levels[0]);
                assert_eq!(
                    lrk_mass_jump(h, lrk_mass_jump_count(h), &mut t, &mut z),
                    LrkStatus::InvalidArgument
                );
            }
            lrk_mass_free(h);
            lrk_params_free(p);
        }
    }

    #[test]
    fn exploration_surface() {
        unsafe {
            let p = params(1.0, 0.3, 0.2, 2, 1.0);
            let mut h: *mut LrkExploration = ptr::null_mut();
            assert_eq!(lrk_explore(p, 11, 0, 0.0, &mut h), LrkStatus::Ok);
            let mut s_x = 0.0;
            assert_eq!(lrk_explore_s_x(h, &mut s_x), LrkStatus::Ok);
            assert!(s_x > 0.0);
            assert_eq!(lrk_explore_crossings_at_zero(h), 4);
            assert!(lrk_explore_turning_point_count(h) >= 3);
            let (mut s, mut hh) = (f64::NAN, f64::NAN);
            assert_eq!(
                lrk_explore_turning_point(h, 0, &mut s, &mut hh),
                LrkStatus::Ok
            );
            assert_eq!((s, hh), (0.0, 0.0));

            let ts = [0.0, 0.5, 100.0];
            let mut out = [f64::NAN; 3];
            assert_eq!(
                lrk_explore_slice(h, ts.as_ptr(), 3, out.as_mut_ptr()),
                LrkStatus::Ok
            );
            assert_eq!(out[0], 1.0);
            assert_eq!(out[2], 0.0);
            lrk_explore_free(h);
            lrk_params_free(p);
        }
    }

    #[test]
    fn truncated_exploration_reports_incomplete() {
        unsafe {
            let p = params(1.0, 0.0, 0.0, 2, 2.0);
            let mut h: *mut LrkExploration = ptr::null_mut();
            assert_eq!(lrk_explore(p, 5, 0, 0.05, &mut h), LrkStatus::Ok);
            let mut s_x = f64::NAN;
            let status = lrk_explore_s_x(h, &mut s_x);
            assert!(matches!(status, LrkStatus::Ok | LrkStatus::Incomplete));
            lrk_explore_free(h);
            lrk_params_free(p);
        }
    }

    #[test]
    fn girsanov_weight_through_the_abi() {
        unsafe {
            let null_p = params(1.0, 0.0, 0.0, 1, 1.0);
            let target = params(1.0, 0.3, 0.2, 1, 1.0);
            let mut h: *mut LrkExploration = ptr::null_mut();
            assert_eq!(lrk_explore(null_p, 21, 4, 0.0, &mut h), LrkStatus::Ok);
            let (mut lw, mut st) = (f64::NAN, f64::NAN);
            assert_eq!(
                lrk_girsanov_log_weight(h, target, 1, 0.0, &mut lw, &mut st),
                LrkStatus::Ok
            );
            assert!(lw.is_finite());
            let mut s_x = 0.0;
            assert_eq!(lrk_explore_s_x(h, &mut s_x), LrkStatus::Ok);
            assert_eq!(st, s_x);
            // stopping beyond the explored horizon is flagged
            assert_eq!(
                lrk_girsanov_log_weight(h, target, 2, 0.0, &mut lw, &mut st),
                LrkStatus::StopBeyondPath
            );
            // non-null source path is an argument error
            let mut h2: *mut LrkExploration = ptr::null_mut();
            assert_eq!(lrk_explore(target, 21, 5, 0.0, &mut h2), LrkStatus::Ok);
            assert_eq!(
                lrk_girsanov_log_weight(h2, target, 1, 0.0, &mut lw, &mut st),
                LrkStatus::InvalidArgument
            );
            lrk_explore_free(h2);
            lrk_explore_free(h);
            lrk_params_free(target);
            lrk_params_free(null_p);
        }
    }
}
