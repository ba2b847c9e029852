//! C ABI over the satslam simulator.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/`*_run` function and released by the matching `*_free`. Fallible
//! calls return a [`SatslamStatus`]; on failure the message is available from
//! [`satslam_last_error`] until the next failing call on the same thread.
//! Strings returned through `char **` are owned by the caller and released
//! with [`satslam_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use satslam::harness::{plan_for, plan_reconnaissance, experiment_scene, run_experiment, simulate_experiment, ExperimentConfig, ExperimentOutput};
use satslam::planner::PlanOutcome;
use satslam::scene::ReconResult;
use satslam::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatslamStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Domain = 4,
    Numerical = 5,
    DegenerateGeometry = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 9,
}

pub struct SatslamConfig(ExperimentConfig);

pub struct SatslamRecon {
    plan_id: usize,
    recon: ReconResult,
}

pub struct SatslamPlan(PlanOutcome);

pub struct SatslamExperiment(ExperimentOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SatslamStatus {
    match e {
        Error::Config(_) => SatslamStatus::InvalidConfig,
        Error::Domain(_) | Error::BehindCamera { .. } | Error::UnknownVariable(_) | Error::Structural(_) => SatslamStatus::Domain,
        Error::SingularInformation { .. } | Error::RankDeficient { .. } | Error::NoInformativePlan { .. } => SatslamStatus::Numerical,
        Error::DegenerateGeometry(_) | Error::DegeneratePlanStep { .. } | Error::DegenerateScene { .. } => SatslamStatus::DegenerateGeometry,
        Error::Io { .. } => SatslamStatus::Io,
        Error::Json { .. } => SatslamStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (SatslamStatus, String)>) -> SatslamStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SatslamStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SatslamStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SatslamStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SatslamStatus, String) {
    (SatslamStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SatslamStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SatslamStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SatslamStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), (SatslamStatus, String)> {
    let c = CString::new(s).map_err(|_| (SatslamStatus::InvalidArgument, "string contains NUL".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn satslam_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn satslam_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default experiment configuration.
#[no_mangle]
pub extern "C" fn satslam_config_new() -> *mut SatslamConfig {
    Box::into_raw(Box::new(SatslamConfig(ExperimentConfig::default())))
}

/// Parses a JSON configuration; missing fields take their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn satslam_config_from_json(json: *const c_char, out: *mut *mut SatslamConfig) -> SatslamStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = as_str(json, "json")?;
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| (SatslamStatus::InvalidArgument, format!("configuration: {e}")))?;
        cfg.validate().map_err(lib_err)?;
        put(out, SatslamConfig(cfg));
        Ok(())
    })
}

/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn satslam_config_to_json(cfg: *const SatslamConfig, out: *mut *mut c_char) -> SatslamStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_string(out, cfg.0.to_json().map_err(lib_err)?)
    })
}

/// # Safety
/// `cfg` must be a valid configuration handle.
#[no_mangle]
pub unsafe extern "C" fn satslam_config_set_seed(cfg: *mut SatslamConfig, seed: u64) -> SatslamStatus {
    guard(|| {
        cfg.as_mut().ok_or_else(|| null("cfg"))?.0.master_seed = seed;
        Ok(())
    })
}

/// Sets the Monte-Carlo counts.
///
/// # Safety
/// `cfg` must be a valid configuration handle.
#[no_mangle]
pub unsafe extern "C" fn satslam_config_set_counts(cfg: *mut SatslamConfig, num_plans: usize, num_runs_per_plan: usize) -> SatslamStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        if num_plans == 0 || num_runs_per_plan == 0 {
            return Err((SatslamStatus::InvalidConfig, "counts must be at least 1".into()));
        }
        cfg.0.num_plans = num_plans;
        cfg.0.num_runs_per_plan = num_runs_per_plan;
        Ok(())
    })
}

/// Replaces the list of planning horizons.
///
/// # Safety
/// `cfg` must be a valid handle and `horizons` must point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn satslam_config_set_horizons(cfg: *mut SatslamConfig, horizons: *const usize, len: usize) -> SatslamStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        if horizons.is_null() {
            return Err(null("horizons"));
        }
        let hs = std::slice::from_raw_parts(horizons, len).to_vec();
        if hs.is_empty() || hs.contains(&0) {
            return Err((SatslamStatus::InvalidConfig, "horizons must be a nonempty list of positive counts".into()));
        }
        cfg.0.horizons = hs;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a valid handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn satslam_config_set_output_dir(cfg: *mut SatslamConfig, dir: *const c_char) -> SatslamStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.output_dir = PathBuf::from(as_str(dir, "dir")?);
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn satslam_config_free(cfg: *mut SatslamConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Simulates the reconnaissance orbit of plan `plan_id`.
///
/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn satslam_recon_run(cfg: *const SatslamConfig, plan_id: usize, out: *mut *mut SatslamRecon) -> SatslamStatus {
    guard(|| {
        let cfg = &as_ref(cfg, "cfg")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        cfg.validate().map_err(lib_err)?;
        let scene = experiment_scene(cfg).map_err(lib_err)?;
        let recon = plan_reconnaissance(cfg, &scene, plan_id).map_err(lib_err)?;
        put(out, SatslamRecon { plan_id, recon });
        Ok(())
    })
}

/// Number of pose variables in the reconnaissance graph.
///
/// # Safety
/// `recon` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn satslam_recon_num_poses(recon: *const SatslamRecon) -> usize {
    recon.as_ref().map_or(0, |r| r.recon.graph.pose_keys().count())
}

/// Number of landmarks seen during reconnaissance.
///
/// # Safety
/// `recon` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn satslam_recon_num_landmarks(recon: *const SatslamRecon) -> usize {
    recon.as_ref().map_or(0, |r| r.recon.map_ids.len())
}

/// True chaser position and velocity at the end of the orbit.
///
/// # Safety
/// `recon` must be valid; `position` and `velocity` must hold 3 doubles each.
#[no_mangle]
pub unsafe extern "C" fn satslam_recon_final_state(recon: *const SatslamRecon, position: *mut f64, velocity: *mut f64) -> SatslamStatus {
    guard(|| {
        let r = as_ref(recon, "recon")?;
        if position.is_null() || velocity.is_null() {
            return Err(null("output buffer"));
        }
        let s = &r.recon.final_state;
        std::slice::from_raw_parts_mut(position, 3).copy_from_slice(s.r.as_slice());
        std::slice::from_raw_parts_mut(velocity, 3).copy_from_slice(s.v.as_slice());
        Ok(())
    })
}

/// Reconnaissance factor graph and initial values as JSON.
///
/// # Safety
/// `recon` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn satslam_recon_graph_json(recon: *const SatslamRecon, out: *mut *mut c_char) -> SatslamStatus {
    guard(|| {
        let r = as_ref(recon, "recon")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_string(out, r.recon.graph.to_json().map_err(lib_err)?)
    })
}

/// # Safety
/// `recon` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn satslam_recon_free(recon: *mut SatslamRecon) {
    if !recon.is_null() {
        drop(Box::from_raw(recon));
    }
}

/// Scores candidate observation targets over `horizon` steps after the
/// reconnaissance orbit and keeps the most informative one.
///
/// # Safety
/// `cfg`, `recon` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn satslam_plan_active(
    cfg: *const SatslamConfig,
    recon: *const SatslamRecon,
    horizon: usize,
    out: *mut *mut SatslamPlan,
) -> SatslamStatus {
    guard(|| {
        let cfg = &as_ref(cfg, "cfg")?.0;
        let r = as_ref(recon, "recon")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if horizon == 0 {
            return Err((SatslamStatus::InvalidArgument, "horizon must be at least 1".into()));
        }
        let p = plan_for(cfg, &r.recon, r.plan_id, horizon).map_err(lib_err)?;
        put(out, SatslamPlan(p));
        Ok(())
    })
}

/// Chosen target and its candidate index.
///
/// # Safety
/// `plan` must be valid and `target` must hold 3 doubles; `best_index` may be null.
#[no_mangle]
pub unsafe extern "C" fn satslam_plan_target(plan: *const SatslamPlan, target: *mut f64, best_index: *mut usize) -> SatslamStatus {
    guard(|| {
        let p = &as_ref(plan, "plan")?.0;
        if target.is_null() {
            return Err(null("target"));
        }
        std::slice::from_raw_parts_mut(target, 3).copy_from_slice(p.target.as_slice());
        if !best_index.is_null() {
            *best_index = p.best_index;
        }
        Ok(())
    })
}

/// # Safety
/// `plan` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn satslam_plan_num_candidates(plan: *const SatslamPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.rewards.len())
}

/// Copies the candidate rewards (−inf marks infeasible candidates) into
/// `rewards`, which must hold `satslam_plan_num_candidates` values.
///
/// # Safety
/// `plan` must be valid and `rewards` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn satslam_plan_rewards(plan: *const SatslamPlan, rewards: *mut f64, len: usize) -> SatslamStatus {
    guard(|| {
        let p = &as_ref(plan, "plan")?.0;
        if rewards.is_null() {
            return Err(null("rewards"));
        }
        if len < p.rewards.len() {
            return Err((SatslamStatus::OutOfRange, format!("buffer holds {len} values, need {}", p.rewards.len())));
        }
        std::slice::from_raw_parts_mut(rewards, p.rewards.len()).copy_from_slice(&p.rewards);
        Ok(())
    })
}

/// # Safety
/// `plan` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn satslam_plan_free(plan: *mut SatslamPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Runs the Monte-Carlo experiment. With `persist` nonzero, records and
/// aggregates are also written under the configured output directory.
///
/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn satslam_experiment_run(cfg: *const SatslamConfig, persist: i32, out: *mut *mut SatslamExperiment) -> SatslamStatus {
    guard(|| {
        let cfg = &as_ref(cfg, "cfg")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = if persist != 0 { run_experiment(cfg) } else { simulate_experiment(cfg) }.map_err(lib_err)?;
        put(out, SatslamExperiment(o));
        Ok(())
    })
}

/// Number of completed episodes.
///
/// # Safety
/// `exp` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn satslam_experiment_num_records(exp: *const SatslamExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.0.records.len())
}

/// Number of excluded (failed) episodes.
///
/// # Safety
/// `exp` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn satslam_experiment_num_failures(exp: *const SatslamExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.0.failures.len())
}

/// Number of aggregate tables (one per strategy and horizon).
///
/// # Safety
/// `exp` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn satslam_experiment_num_tables(exp: *const SatslamExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.0.aggregates.len())
}

/// Per-step CSV of aggregate table `index`.
///
/// # Safety
/// `exp` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn satslam_experiment_table_csv(exp: *const SatslamExperiment, index: usize, out: *mut *mut c_char) -> SatslamStatus {
    guard(|| {
        let e = &as_ref(exp, "exp")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = e
            .aggregates
            .get(index)
            .ok_or_else(|| (SatslamStatus::OutOfRange, format!("table {index} of {}", e.aggregates.len())))?;
        put_string(out, t.steps_csv())
    })
}

/// All aggregate tables as a JSON array.
///
/// # Safety
/// `exp` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn satslam_experiment_aggregates_json(exp: *const SatslamExperiment, out: *mut *mut c_char) -> SatslamStatus {
    guard(|| {
        let e = &as_ref(exp, "exp")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = serde_json::to_string(&e.aggregates).map_err(|e| (SatslamStatus::InvalidArgument, e.to_string()))?;
        put_string(out, s)
    })
}

/// # Safety
/// `exp` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn satslam_experiment_free(exp: *mut SatslamExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}
