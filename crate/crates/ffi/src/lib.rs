//! C ABI for the optstop toolkit.
//!
//! Objects are opaque handles created by `optstop_*_new`-style functions and
//! released with the matching `_free`. Every function returns an
//! [`OptstopStatus`]; results go through out-pointers. After a failure,
//! [`optstop_last_error_message`] describes the error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use optstop::controller::{ControllerError, Decision, Policy, SessionConfig, SessionState};
use optstop::dist::{build_empirical, DirichletPosterior, DistError, EnergyDistribution};
use optstop::parallel::embarrassing_transform;
use optstop::solver::{generate_complete_instance, sample_batch, AnnealSchedule, IsingInstance, SolverError};
use optstop::stopping::{split_cost, time_to_target, CostModel, StopError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptstopStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    InvalidArgument = 2,
    /// Input data was rejected (unsorted support, bad weights, ...).
    Data = 3,
    /// The requested target has zero probability.
    Unreachable = 4,
    SessionClosed = 5,
    /// The optimality equation has no solution.
    NoSolution = 6,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptstopPolicy {
    GaussianMl = 0,
    BayesDirichlet = 1,
}

/// Optimal cost and its split into energy and effort.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OptstopSolution {
    pub optimal_cost: f64,
    pub mean_stop_step: f64,
    pub optimal_energy: f64,
    pub optimal_effort: f64,
}

/// Discrete energy distribution.
pub struct OptstopDistribution(EnergyDistribution);

/// Ising instance with integer couplings.
pub struct OptstopInstance(IsingInstance);

/// Online stopping session.
pub struct OptstopSession(SessionState);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(OptstopStatus, String);

impl Failure {
    fn null(name: &str) -> Self {
        Failure(OptstopStatus::NullPointer, format!("{name} is null"))
    }

    fn invalid(msg: impl ToString) -> Self {
        Failure(OptstopStatus::InvalidArgument, msg.to_string())
    }
}

impl From<DistError> for Failure {
    fn from(e: DistError) -> Self {
        Failure(OptstopStatus::Data, e.to_string())
    }
}

impl From<StopError> for Failure {
    fn from(e: StopError) -> Self {
        let status = match e {
            StopError::UnreachableTarget(_) => OptstopStatus::Unreachable,
            StopError::NoSolution(_) => OptstopStatus::NoSolution,
            StopError::Dist(_) => OptstopStatus::Data,
            StopError::InvalidCost { .. } | StopError::DomainError(_) => OptstopStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        Failure(OptstopStatus::InvalidArgument, e.to_string())
    }
}

impl From<ControllerError> for Failure {
    fn from(e: ControllerError) -> Self {
        let status = match e {
            ControllerError::SessionClosed => OptstopStatus::SessionClosed,
            ControllerError::InvalidConfig(_) | ControllerError::NonFinite(_) => {
                OptstopStatus::InvalidArgument
            }
            _ => OptstopStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn guard<F>(f: F) -> OptstopStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OptstopStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            OptstopStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(name))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(name));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn optstop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn optstop_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Distribution from a strictly increasing support and matching weights.
///
/// # Safety
/// `support` and `weights` must point to `len` readable doubles; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_distribution_new(
    support: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut *mut OptstopDistribution,
) -> OptstopStatus {
    guard(|| {
        let s = slice(support, len, "support")?.to_vec();
        let w = slice(weights, len, "weights")?.to_vec();
        let d = EnergyDistribution::new(s, w)?;
        write(out, Box::into_raw(Box::new(OptstopDistribution(d))), "out")
    })
}

/// Empirical distribution of `len` samples.
///
/// # Safety
/// `samples` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_distribution_from_samples(
    samples: *const f64,
    len: usize,
    out: *mut *mut OptstopDistribution,
) -> OptstopStatus {
    guard(|| {
        let d = build_empirical(slice(samples, len, "samples")?)?;
        write(out, Box::into_raw(Box::new(OptstopDistribution(d))), "out")
    })
}

/// # Safety
/// `d` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn optstop_distribution_free(d: *mut OptstopDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of support points.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_distribution_len(
    d: *const OptstopDistribution,
    out: *mut usize,
) -> OptstopStatus {
    guard(|| write(out, deref(d, "distribution")?.0.len(), "out"))
}

/// `P(e <= x)`.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_distribution_cdf(
    d: *const OptstopDistribution,
    x: f64,
    out: *mut f64,
) -> OptstopStatus {
    guard(|| write(out, deref(d, "distribution")?.0.cdf(x), "out"))
}

/// `E[(level - e)^+]`.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_distribution_partial_expectation(
    d: *const OptstopDistribution,
    level: f64,
    out: *mut f64,
) -> OptstopStatus {
    guard(|| write(out, deref(d, "distribution")?.0.partial_expectation(level), "out"))
}

/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_distribution_mean(
    d: *const OptstopDistribution,
    out: *mut f64,
) -> OptstopStatus {
    guard(|| write(out, deref(d, "distribution")?.0.mean(), "out"))
}

/// Optimal total cost at `unit_cost` per unit time and `run_time` per run.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_solve(
    d: *const OptstopDistribution,
    unit_cost: f64,
    run_time: f64,
    out: *mut OptstopSolution,
) -> OptstopStatus {
    guard(|| {
        let d = deref(d, "distribution")?;
        let s = split_cost(&d.0, &CostModel::new(unit_cost, run_time)?)?;
        write(
            out,
            OptstopSolution {
                optimal_cost: s.optimal_cost,
                mean_stop_step: s.mean_stop_step,
                optimal_energy: s.optimal_energy,
                optimal_effort: s.optimal_effort,
            },
            "out",
        )
    })
}

/// Distribution of the best of `n_cpu` independent draws; a new handle.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_embarrassing_transform(
    d: *const OptstopDistribution,
    n_cpu: u64,
    out: *mut *mut OptstopDistribution,
) -> OptstopStatus {
    guard(|| {
        let d = deref(d, "distribution")?;
        if n_cpu == 0 {
            return Err(Failure::invalid("n_cpu must be >= 1"));
        }
        let t = embarrassing_transform(&d.0, n_cpu);
        write(out, Box::into_raw(Box::new(OptstopDistribution(t))), "out")
    })
}

/// Expected time to reach a target of per-run probability `p` with
/// confidence `confidence`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_time_to_target(
    p: f64,
    confidence: f64,
    run_time: f64,
    out: *mut f64,
) -> OptstopStatus {
    guard(|| write(out, time_to_target(p, confidence, run_time)?, "out"))
}

/// Complete-graph instance with couplings drawn uniformly from `±{1..10}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_instance_generate(
    num_vars: usize,
    seed: u64,
    out: *mut *mut OptstopInstance,
) -> OptstopStatus {
    guard(|| {
        let inst = generate_complete_instance(num_vars, seed)?;
        write(out, Box::into_raw(Box::new(OptstopInstance(inst))), "out")
    })
}

/// # Safety
/// `inst` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn optstop_instance_free(inst: *mut OptstopInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_instance_num_vars(
    inst: *const OptstopInstance,
    out: *mut usize,
) -> OptstopStatus {
    guard(|| write(out, deref(inst, "instance")?.0.num_vars(), "out"))
}

/// Final energies of `n_runs` annealing runs, written to `energies`.
///
/// Run `i` uses a seed derived from `seed` and `i`; the result does not
/// depend on `workers`.
///
/// # Safety
/// `inst` must be a live handle and `energies` must have room for `n_runs`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn optstop_sa_sample(
    inst: *const OptstopInstance,
    t_init: f64,
    t_fin: f64,
    n_sweeps: u64,
    n_runs: u64,
    seed: u64,
    workers: usize,
    energies: *mut f64,
) -> OptstopStatus {
    guard(|| {
        let inst = deref(inst, "instance")?;
        if energies.is_null() {
            return Err(Failure::null("energies"));
        }
        let len = usize::try_from(n_runs).map_err(Failure::invalid)?;
        let sched = AnnealSchedule::new(t_init, t_fin, n_sweeps)?;
        let records = sample_batch(&inst.0, &sched, n_runs, seed, workers)?;
        let out = std::slice::from_raw_parts_mut(energies, len);
        for (slot, r) in out.iter_mut().zip(&records) {
            *slot = r.energy;
        }
        Ok(())
    })
}

/// New session with default burn-in, tail and override settings.
///
/// `prior` may be null. Otherwise it seeds the Dirichlet posterior of the
/// Bayesian policy with concentrations `prior_strength·weights`; the
/// Gaussian policy ignores it.
///
/// # Safety
/// `prior` must be null or a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_session_new(
    policy: OptstopPolicy,
    unit_cost: f64,
    run_time: f64,
    prior: *const OptstopDistribution,
    prior_strength: f64,
    out: *mut *mut OptstopSession,
) -> OptstopStatus {
    guard(|| {
        let policy = match policy {
            OptstopPolicy::GaussianMl => Policy::GaussianMl,
            OptstopPolicy::BayesDirichlet => Policy::BayesDirichlet,
        };
        let mut config = SessionConfig::new(policy, CostModel::new(unit_cost, run_time)?);
        if let Some(p) = prior.as_ref() {
            if !(prior_strength > 0.0 && prior_strength.is_finite()) {
                return Err(Failure::invalid("prior_strength must be positive"));
            }
            config = config.with_prior(DirichletPosterior::from_family(&p.0, prior_strength)?);
        }
        let state = SessionState::new(config)?;
        write(out, Box::into_raw(Box::new(OptstopSession(state))), "out")
    })
}

/// Feeds one energy. `should_stop` is set to 1 when the session stops.
///
/// # Safety
/// `s` must be a live handle and `should_stop` writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_session_observe(
    s: *mut OptstopSession,
    energy: f64,
    should_stop: *mut bool,
) -> OptstopStatus {
    guard(|| {
        let s = deref_mut(s, "session")?;
        if should_stop.is_null() {
            return Err(Failure::null("should_stop"));
        }
        let decision = s.0.observe(energy)?;
        write(should_stop, decision == Decision::Stop, "should_stop")
    })
}

/// Current stopping threshold. `has_target` is 0 while none is available.
///
/// # Safety
/// `s` must be a live handle; `target` and `has_target` writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_session_target(
    s: *const OptstopSession,
    target: *mut f64,
    has_target: *mut bool,
) -> OptstopStatus {
    guard(|| {
        let t = deref(s, "session")?.0.current_target();
        write(target, t.unwrap_or(f64::NAN), "target")?;
        write(has_target, t.is_some(), "has_target")
    })
}

/// Best energy plus accumulated cost. Fails before the first observation.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn optstop_session_realized_cost(
    s: *const OptstopSession,
    out: *mut f64,
) -> OptstopStatus {
    guard(|| {
        let cost = deref(s, "session")?
            .0
            .realized_cost()
            .ok_or_else(|| Failure(OptstopStatus::Data, "no observations yet".into()))?;
        write(out, cost, "out")
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn optstop_session_free(s: *mut OptstopSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
