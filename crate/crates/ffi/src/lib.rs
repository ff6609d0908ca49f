//! C ABI for the `sra` crate.
//!
//! Every fallible function returns an [`SraStatus`]; on failure the message
//! is available from [`sra_last_error_message`] on the same thread. Learners
//! are opaque handles created by [`sra_learner_new`] and released with
//! [`sra_learner_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sra::bounds::{gaussian_tail, theorem2_bound, BoundInputs};
use sra::metrics::{alarm_eval, roc_auc};
use sra::sa::{corollary1_rho, SraConfig, StepSchedule};
use sra::{Algorithm, EmLearner, Error, InitMode};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numeric = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SraAlgorithmKind {
    Sra = 0,
    Sem = 1,
    Iem = 2,
    Sdem = 3,
}

/// Learner hyperparameters. SRA uses `gamma` (may be infinite) and `rho`
/// when positive, otherwise the step-size rule from `beta` and `m`.
/// sEM and SDEM use `r`; iEM uses nothing.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SraAlgorithm {
    pub kind: SraAlgorithmKind,
    pub gamma: f64,
    pub rho: f64,
    pub beta: f64,
    pub m: f64,
    pub r: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SraStepReport {
    /// Negative log density of the observation before the update.
    pub score: f64,
    /// Nonzero when the update was dropped by the threshold.
    pub truncated: u8,
    pub delta_norm: f64,
}

/// Inputs of the truncated-scheme bound with a constant step `rho`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SraBoundInputs {
    pub c0: f64,
    pub c1: f64,
    pub d0: f64,
    pub d1: f64,
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
    pub l: f64,
    pub alpha: f64,
    pub u: f64,
    pub d: u32,
    pub v0n: f64,
    pub n: u64,
    pub rho: f64,
    pub gamma: f64,
    pub m: f64,
}

/// Opaque learner handle.
pub struct SraLearner {
    inner: EmLearner,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SraStatus, msg: impl Into<String>) -> SraStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> SraStatus {
    let status = match &e {
        Error::DimensionMismatch { .. } | Error::LengthMismatch(_) => SraStatus::DimensionMismatch,
        e if e.is_numeric() => SraStatus::Numeric,
        _ => SraStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> SraStatus) -> SraStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SraStatus::Panic, "internal panic"),
    }
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sra_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn algorithm(a: &SraAlgorithm) -> Result<Algorithm, Error> {
    Ok(match a.kind {
        SraAlgorithmKind::Sra if a.rho > 0.0 => {
            Algorithm::Sra(SraConfig::new(a.gamma, StepSchedule::Constant { rho: a.rho })?)
        }
        SraAlgorithmKind::Sra => Algorithm::Sra(SraConfig::from_gamma_beta_m(a.gamma, a.beta, a.m)?),
        SraAlgorithmKind::Sem => Algorithm::Sem { r: a.r },
        SraAlgorithmKind::Iem => Algorithm::Iem,
        SraAlgorithmKind::Sdem => Algorithm::Sdem { r: a.r },
    })
}

/// Create a learner with `k` components, initialized by moment matching on
/// `n_points` row-major points of dimension `dim`.
///
/// # Safety
/// `config` must point to a valid `SraAlgorithm`, `window` to
/// `n_points * dim` doubles and `out` to writable storage for a pointer.
#[no_mangle]
pub unsafe extern "C" fn sra_learner_new(
    config: *const SraAlgorithm,
    window: *const f64,
    n_points: usize,
    dim: usize,
    k: usize,
    out: *mut *mut SraLearner,
) -> SraStatus {
    guard(|| {
        if config.is_null() || window.is_null() || out.is_null() {
            return fail(SraStatus::NullPointer, "null argument");
        }
        if dim == 0 || n_points == 0 {
            return fail(SraStatus::InvalidArgument, "window must be non-empty");
        }
        let Some(len) = n_points.checked_mul(dim) else {
            return fail(SraStatus::InvalidArgument, "window size overflows");
        };
        // SAFETY: non-null, and the caller guarantees `len` readable doubles.
        let flat = unsafe { std::slice::from_raw_parts(window, len) };
        let points: Vec<Vec<f64>> = flat.chunks(dim).map(<[f64]>::to_vec).collect();
        // SAFETY: non-null and valid per the contract.
        let cfg = unsafe { &*config };
        let learner = algorithm(cfg)
            .and_then(|alg| sra::learners::init_from_window(alg, &points, k, InitMode::MomentMatch));
        match learner {
            Ok(inner) => {
                // SAFETY: `out` is non-null and writable.
                unsafe { *out = Box::into_raw(Box::new(SraLearner { inner })) };
                SraStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Score `y` under the current model, then update. On failure the learner
/// is unchanged.
///
/// # Safety
/// `learner` must come from `sra_learner_new`, `y` must point to `dim`
/// doubles and `report` may be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sra_learner_step(
    learner: *mut SraLearner,
    y: *const f64,
    dim: usize,
    report: *mut SraStepReport,
) -> SraStatus {
    guard(|| {
        if learner.is_null() || y.is_null() {
            return fail(SraStatus::NullPointer, "null argument");
        }
        // SAFETY: live handle per the contract.
        let l = unsafe { &mut *learner };
        // SAFETY: caller guarantees `dim` readable doubles.
        let y = unsafe { std::slice::from_raw_parts(y, dim) };
        match l.inner.step(y) {
            Ok(r) => {
                if !report.is_null() {
                    // SAFETY: non-null and writable.
                    unsafe {
                        *report = SraStepReport {
                            score: r.score,
                            truncated: r.truncated as u8,
                            delta_norm: r.theta_delta_norm,
                        }
                    };
                }
                SraStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Dimension and number of components.
///
/// # Safety
/// `learner` must be a live handle; `dim` and `k` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sra_learner_shape(
    learner: *const SraLearner,
    dim: *mut usize,
    k: *mut usize,
) -> SraStatus {
    if learner.is_null() {
        return fail(SraStatus::NullPointer, "null learner");
    }
    // SAFETY: live handle per the contract.
    let l = unsafe { &*learner };
    // SAFETY: each pointer is checked for NULL and otherwise writable.
    unsafe {
        if !dim.is_null() {
            *dim = l.inner.dim();
        }
        if !k.is_null() {
            *k = l.inner.model().k();
        }
    }
    SraStatus::Ok
}

/// Steps taken so far (including the initialization window) and updates
/// dropped by the threshold.
///
/// # Safety
/// `learner` must be a live handle; the outputs may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sra_learner_counts(
    learner: *const SraLearner,
    steps: *mut u64,
    dropped: *mut u64,
) -> SraStatus {
    if learner.is_null() {
        return fail(SraStatus::NullPointer, "null learner");
    }
    // SAFETY: live handle per the contract.
    let sa = unsafe { &*learner }.inner.sa_state();
    // SAFETY: each pointer is checked for NULL and otherwise writable.
    unsafe {
        if !steps.is_null() {
            *steps = sa.t;
        }
        if !dropped.is_null() {
            *dropped = sa.dropped;
        }
    }
    SraStatus::Ok
}

/// Copy the current mixture: `k` weights, `k*dim` means and `k*dim*dim`
/// row-major covariances. Any output may be NULL to skip it.
///
/// # Safety
/// `learner` must be a live handle and each non-NULL output must have room
/// for the number of doubles above.
#[no_mangle]
pub unsafe extern "C" fn sra_learner_params(
    learner: *const SraLearner,
    weights: *mut f64,
    means: *mut f64,
    covariances: *mut f64,
) -> SraStatus {
    if learner.is_null() {
        return fail(SraStatus::NullPointer, "null learner");
    }
    // SAFETY: live handle per the contract.
    let model = unsafe { &*learner }.inner.model();
    let d = model.dim();
    // SAFETY: the caller sized each non-NULL buffer as documented.
    unsafe {
        for (c, w) in model.weights().iter().enumerate() {
            if !weights.is_null() {
                *weights.add(c) = *w;
            }
            if !means.is_null() {
                for j in 0..d {
                    *means.add(c * d + j) = model.means()[c][j];
                }
            }
            if !covariances.is_null() {
                let s = &model.covariances()[c];
                for i in 0..d {
                    for j in 0..d {
                        *covariances.add(c * d * d + i * d + j) = s[(i, j)];
                    }
                }
            }
        }
    }
    SraStatus::Ok
}

/// # Safety
/// `learner` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sra_learner_free(learner: *mut SraLearner) {
    if !learner.is_null() {
        // SAFETY: created by Box::into_raw in sra_learner_new.
        drop(unsafe { Box::from_raw(learner) });
    }
}

/// Constant step size β·exp(−γ²/M²)/(2γ); NaN for invalid inputs.
#[no_mangle]
pub extern "C" fn sra_corollary1_rho(gamma: f64, beta: f64, m: f64) -> f64 {
    if gamma > 0.0 && beta > 0.0 && m > 0.0 {
        corollary1_rho(gamma, beta, m)
    } else {
        f64::NAN
    }
}

/// ∫_γ^∞ exp(−z²/M²) dz.
#[no_mangle]
pub extern "C" fn sra_gaussian_tail(gamma: f64, m: f64) -> f64 {
    gaussian_tail(gamma, m)
}

/// Truncated-scheme bound; `warning` (may be NULL) is set to 1 when ρ
/// exceeds the admissibility limit.
///
/// # Safety
/// `inputs` must be valid; `out` writable; `warning` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sra_theorem2_bound(
    inputs: *const SraBoundInputs,
    out: *mut f64,
    warning: *mut u8,
) -> SraStatus {
    guard(|| {
        if inputs.is_null() || out.is_null() {
            return fail(SraStatus::NullPointer, "null argument");
        }
        // SAFETY: valid per the contract.
        let i = unsafe { *inputs };
        let b = BoundInputs {
            c0: i.c0,
            c1: i.c1,
            d0: i.d0,
            d1: i.d1,
            sigma0_sq: i.sigma0_sq,
            sigma1_sq: i.sigma1_sq,
            l: i.l,
            alpha: i.alpha,
            u: i.u,
            d: i.d,
            v0n: i.v0n,
            n: i.n,
            schedule: StepSchedule::Constant { rho: i.rho },
            gamma: i.gamma,
            m: i.m,
        };
        match theorem2_bound(&b) {
            Ok(v) => {
                // SAFETY: checked non-null / writable.
                unsafe {
                    *out = v.value;
                    if !warning.is_null() {
                        *warning = v.warning.is_some() as u8;
                    }
                }
                SraStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Mann–Whitney ROC AUC; labels are nonzero for positives.
///
/// # Safety
/// `scores` and `labels` must point to `n` elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sra_roc_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> SraStatus {
    guard(|| {
        if scores.is_null() || labels.is_null() || out.is_null() {
            return fail(SraStatus::NullPointer, "null argument");
        }
        // SAFETY: caller guarantees `n` elements each.
        let (s, l) = unsafe {
            (std::slice::from_raw_parts(scores, n), std::slice::from_raw_parts(labels, n))
        };
        let l: Vec<bool> = l.iter().map(|&b| b != 0).collect();
        match roc_auc(s, &l) {
            Ok(v) => {
                // SAFETY: non-null and writable.
                unsafe { *out = v };
                SraStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Area under the benefit/false-alarm curve of `scores` (step t at index
/// t−1) over the 1-based range [t_start, t_end].
///
/// # Safety
/// `scores` must point to `n` doubles, `change_points` to `n_change_points`
/// values (or be NULL when that is 0); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sra_alarm_auc(
    scores: *const f64,
    n: usize,
    change_points: *const usize,
    n_change_points: usize,
    tau: usize,
    t_start: usize,
    t_end: usize,
    out: *mut f64,
) -> SraStatus {
    guard(|| {
        if scores.is_null() || out.is_null() || (change_points.is_null() && n_change_points > 0) {
            return fail(SraStatus::NullPointer, "null argument");
        }
        // SAFETY: caller guarantees the lengths.
        let s = unsafe { std::slice::from_raw_parts(scores, n) };
        let cps: &[usize] = if n_change_points == 0 {
            &[]
        } else {
            // SAFETY: non-null with `n_change_points` elements.
            unsafe { std::slice::from_raw_parts(change_points, n_change_points) }
        };
        match alarm_eval(s, cps, tau, t_start, t_end) {
            Ok(e) => {
                // SAFETY: non-null and writable.
                unsafe { *out = e.auc };
                SraStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
