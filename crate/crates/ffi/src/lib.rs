//! C ABI for the modcert certification toolkit.
//!
//! Every function returns a [`ModcertStatus`]; on failure a message for the
//! calling thread is available from [`modcert_last_error_message`]. Models and
//! reports are opaque handles that must be released with their `_free`
//! function. Strings returned by the library must be released with
//! [`modcert_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use libc::c_char;
use modcert::simulation::coverage_experiment_with_cap;
use modcert::{
    CertError, CertificationReport, ConfidenceLevel, CoverageConfig, GapScenario,
    IndependenceFactors, JointIndicatorModel, ModelSpec, ModuleBoundSet, OutputFormat, ProbBound,
    ReportStatus, TrialSummary, ValidationTask,
};

/// Result codes shared by every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModcertStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    InvalidArgument = 1,
    Validation = 2,
    AssumptionViolated = 3,
    Capacity = 4,
    Parse = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// A probability bound. `log_value` is meaningful only when `is_zero` is false.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModcertProbBound {
    pub value: f64,
    pub log_value: f64,
    pub is_zero: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModcertPlan {
    pub samples_required: u64,
    pub decision_threshold: u64,
    pub achieved_alpha: f64,
    pub achieved_beta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModcertCoverage {
    pub trials: u64,
    pub violations: u64,
    pub coverage: f64,
    pub base_seed: u64,
}

/// Output format selector for [`modcert_report_render`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModcertFormat {
    Json = 0,
    Text = 1,
}

/// Opaque joint indicator model.
pub struct ModcertModel(JointIndicatorModel);

/// Opaque certification report.
pub struct ModcertReport(CertificationReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum FfiError {
    Null(&'static str),
    Utf8,
    Cert(CertError),
}

impl From<CertError> for FfiError {
    fn from(e: CertError) -> Self {
        FfiError::Cert(e)
    }
}

fn status_of(e: &CertError) -> ModcertStatus {
    match e {
        CertError::Validation(_) => ModcertStatus::Validation,
        CertError::AssumptionViolated { .. } => ModcertStatus::AssumptionViolated,
        CertError::Capacity { .. } => ModcertStatus::Capacity,
        CertError::Parse { .. } => ModcertStatus::Parse,
        CertError::Io(_) => ModcertStatus::Io,
    }
}

/// Runs `f` behind the boundary: records errors and turns panics into
/// [`ModcertStatus::Internal`].
fn guard<F>(f: F) -> ModcertStatus
where
    F: FnOnce() -> Result<(), FfiError>,
{
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ModcertStatus::Ok,
        Ok(Err(FfiError::Null(what))) => {
            set_last_error(format!("null pointer passed for {what}"));
            ModcertStatus::InvalidArgument
        }
        Ok(Err(FfiError::Utf8)) => {
            set_last_error("string argument is not valid UTF-8".to_owned());
            ModcertStatus::InvalidArgument
        }
        Ok(Err(FfiError::Cert(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".to_owned());
            ModcertStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &'static str) -> Result<&'a [T], FfiError> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(FfiError::Null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &'static str) -> Result<&'a mut T, FfiError> {
    ptr.as_mut().ok_or(FfiError::Null(what))
}

unsafe fn c_str<'a>(ptr: *const c_char, what: &'static str) -> Result<&'a str, FfiError> {
    if ptr.is_null() {
        return Err(FfiError::Null(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| FfiError::Utf8)
}

impl From<ProbBound> for ModcertProbBound {
    fn from(b: ProbBound) -> Self {
        ModcertProbBound {
            value: b.value(),
            log_value: b.ln(),
            is_zero: b.is_zero(),
        }
    }
}

fn summaries(failures: &[u64], trials: &[u64]) -> Result<Vec<TrialSummary>, CertError> {
    failures
        .iter()
        .zip(trials)
        .map(|(&k, &m)| TrialSummary::new(k, m))
        .collect()
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn modcert_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn modcert_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Single-indicator Bernstein upper bound.
///
/// # Safety
/// `out` must be a valid pointer to a `ModcertProbBound`.
#[no_mangle]
pub unsafe extern "C" fn modcert_bernstein_upper_bound(
    failures: u64,
    trials: u64,
    delta: f64,
    out: *mut ModcertProbBound,
) -> ModcertStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let b = modcert::bernstein_upper_bound(
            &TrialSummary::new(failures, trials)?,
            ConfidenceLevel::new(delta)?,
        )?;
        *out = b.into();
        Ok(())
    })
}

/// Composed bound over `len` indicators.
///
/// # Safety
/// `failures`, `trials` and `factors` must each point to `len` readable
/// elements; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modcert_composition_bound(
    failures: *const u64,
    trials: *const u64,
    factors: *const f64,
    len: usize,
    delta: f64,
    out: *mut ModcertProbBound,
) -> ModcertStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = summaries(
            slice(failures, len, "failures")?,
            slice(trials, len, "trials")?,
        )?;
        let f = IndependenceFactors::new(slice(factors, len, "factors")?.to_vec())?;
        *out = modcert::composition_bound(&s, &f, ConfidenceLevel::new(delta)?)?.into();
        Ok(())
    })
}

/// `min(1, prod c_t p_t)` for known marginals.
///
/// # Safety
/// `marginals` and `factors` must point to `len` readable elements; `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modcert_conjunction_bound_analytic(
    marginals: *const f64,
    factors: *const f64,
    len: usize,
    out: *mut ModcertProbBound,
) -> ModcertStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let f = IndependenceFactors::new(slice(factors, len, "factors")?.to_vec())?;
        *out = modcert::conjunction_bound_analytic(slice(marginals, len, "marginals")?, &f)?.into();
        Ok(())
    })
}

/// System bound from `len` module bounds and a residual. Returns
/// `AssumptionViolated` when the module bounds sum above 0.5; the sum is
/// then written to `out_sum` if it is non-null.
///
/// # Safety
/// `module_bounds` must point to `len` readable elements (or be NULL when
/// `len` is 0); `out` must be valid for writes; `out_sum` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn modcert_system_bound(
    module_bounds: *const f64,
    len: usize,
    residual: f64,
    out: *mut ModcertProbBound,
    out_sum: *mut f64,
) -> ModcertStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let set =
            ModuleBoundSet::from_values(slice(module_bounds, len, "module_bounds")?, residual)?;
        if let Some(s) = out_sum.as_mut() {
            *s = set.module_sum();
        }
        *out = modcert::system_bound(&set)?.into();
        Ok(())
    })
}

/// Minimal end-to-end validation sample size.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modcert_validation_sample_size(
    epsilon: f64,
    delta: f64,
    out: *mut ModcertPlan,
) -> ModcertStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let p = modcert::validation_sample_size(&ValidationTask::new(epsilon, delta)?)?;
        *out = ModcertPlan {
            samples_required: p.samples_required,
            decision_threshold: p.decision_threshold,
            achieved_alpha: p.achieved_alpha,
            achieved_beta: p.achieved_beta,
        };
        Ok(())
    })
}

/// Minimal per-indicator samples for the modular plan with zero observed failures.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modcert_modular_certification_plan(
    target: f64,
    indicator_count: usize,
    factor: f64,
    delta: f64,
    out: *mut u64,
) -> ModcertStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = modcert::modular_certification_plan(&GapScenario::new(
            target,
            indicator_count,
            factor,
            delta,
        ))?;
        Ok(())
    })
}

fn model_out(
    out: *mut *mut ModcertModel,
    model: Result<JointIndicatorModel, CertError>,
) -> Result<(), FfiError> {
    let out = unsafe { out_ref(out, "out")? };
    *out = Box::into_raw(Box::new(ModcertModel(model?)));
    Ok(())
}

/// Independent-indicator model.
///
/// # Safety
/// `marginals` must point to `len` readable elements; `out` must be valid
/// for writes. Release the result with [`modcert_model_free`].
#[no_mangle]
pub unsafe extern "C" fn modcert_model_independent(
    marginals: *const f64,
    len: usize,
    out: *mut *mut ModcertModel,
) -> ModcertStatus {
    guard(|| {
        model_out(
            out,
            JointIndicatorModel::independent(slice(marginals, len, "marginals")?),
        )
    })
}

/// Common-cause mixture model.
///
/// # Safety
/// `base_rates` and `fault_rates` must point to `len` readable elements;
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modcert_model_common_cause(
    q: f64,
    base_rates: *const f64,
    fault_rates: *const f64,
    len: usize,
    out: *mut *mut ModcertModel,
) -> ModcertStatus {
    guard(|| {
        model_out(
            out,
            JointIndicatorModel::common_cause(
                q,
                slice(base_rates, len, "base_rates")?,
                slice(fault_rates, len, "fault_rates")?,
            ),
        )
    })
}

/// Model from a JSON model specification.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modcert_model_from_json(
    json: *const c_char,
    out: *mut *mut ModcertModel,
) -> ModcertStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        model_out(out, ModelSpec::from_json(text).and_then(|s| s.build()))
    })
}

/// # Safety
/// `model` must come from a `modcert_model_*` constructor and not be used
/// afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn modcert_model_free(model: *mut ModcertModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of indicators in `model`, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn modcert_model_indicator_count(model: *const ModcertModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.indicator_count())
}

/// Exact marginals, independence factors and conjunction probability.
/// `marginals` and `factors` receive `capacity` elements at most; the model
/// must have no more indicators than `capacity`.
///
/// # Safety
/// `model` must be a live handle; `marginals` and `factors` must be valid for
/// `capacity` writes; `conjunction` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modcert_model_exact_statistics(
    model: *const ModcertModel,
    marginals: *mut f64,
    factors: *mut f64,
    capacity: usize,
    conjunction: *mut f64,
) -> ModcertStatus {
    guard(|| {
        let model = model.as_ref().ok_or(FfiError::Null("model"))?;
        let conjunction = out_ref(conjunction, "conjunction")?;
        let t = model.0.indicator_count();
        if capacity < t {
            return Err(
                CertError::Validation(format!("capacity {capacity} < {t} indicators")).into(),
            );
        }
        if marginals.is_null() {
            return Err(FfiError::Null("marginals"));
        }
        if factors.is_null() {
            return Err(FfiError::Null("factors"));
        }
        let s = model.0.exact_statistics();
        std::slice::from_raw_parts_mut(marginals, t).copy_from_slice(&s.marginals);
        std::slice::from_raw_parts_mut(factors, t).copy_from_slice(&s.independence_factors);
        *conjunction = s.conjunction_prob;
        Ok(())
    })
}

/// Monte Carlo coverage of the composed bound on `model`.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modcert_coverage_experiment(
    model: *const ModcertModel,
    samples: u64,
    delta: f64,
    trials: u64,
    base_seed: u64,
    out: *mut ModcertCoverage,
) -> ModcertStatus {
    guard(|| {
        let model = model.as_ref().ok_or(FfiError::Null("model"))?;
        let out = out_ref(out, "out")?;
        let cfg = CoverageConfig {
            samples,
            delta,
            trials,
            base_seed,
        };
        let r =
            coverage_experiment_with_cap(&model.0, &cfg, modcert::simulation::DEFAULT_TRIAL_CAP)?;
        *out = ModcertCoverage {
            trials: r.trials,
            violations: r.violations,
            coverage: r.coverage,
            base_seed: r.base_seed,
        };
        Ok(())
    })
}

/// Run the scenario config at `path`. A report whose union-bound
/// certificate failed is still returned, with status `AssumptionViolated`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
/// Release the result with [`modcert_report_free`].
#[no_mangle]
pub unsafe extern "C" fn modcert_run_scenario_file(
    path: *const c_char,
    out: *mut *mut ModcertReport,
) -> ModcertStatus {
    let mut violated = false;
    let status = guard(|| {
        let out = out_ref(out, "out")?;
        let report = modcert::run_scenario_file(Path::new(c_str(path, "path")?))?;
        violated = report.status == ReportStatus::AssumptionViolated;
        *out = Box::into_raw(Box::new(ModcertReport(report)));
        Ok(())
    });
    if status == ModcertStatus::Ok && violated {
        set_last_error("module bounds sum above 0.5; system bound withheld".to_owned());
        return ModcertStatus::AssumptionViolated;
    }
    status
}

/// System bound of a certified report.
///
/// # Safety
/// `report` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modcert_report_system_bound(
    report: *const ModcertReport,
    out: *mut ModcertProbBound,
) -> ModcertStatus {
    guard(|| {
        let report = report.as_ref().ok_or(FfiError::Null("report"))?;
        let out = out_ref(out, "out")?;
        let system = report
            .0
            .system
            .as_ref()
            .ok_or_else(|| CertError::AssumptionViolated {
                sum: report.0.modules.iter().map(|m| m.bound.value()).sum(),
            })?;
        *out = system.bound.into();
        Ok(())
    })
}

/// Render a report. The returned string must be released with
/// [`modcert_string_free`]; NULL on failure.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn modcert_report_render(
    report: *const ModcertReport,
    format: ModcertFormat,
) -> *mut c_char {
    let Some(report) = report.as_ref() else {
        set_last_error("null pointer passed for report".to_owned());
        return ptr::null_mut();
    };
    let format = match format {
        ModcertFormat::Json => OutputFormat::Json,
        ModcertFormat::Text => OutputFormat::Text,
    };
    let text = modcert::emit_report(&report.0, format);
    CString::new(text).map_or(ptr::null_mut(), CString::into_raw)
}

/// # Safety
/// `report` must come from [`modcert_run_scenario_file`] and not be used
/// afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn modcert_report_free(report: *mut ModcertReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be a string returned by this library and not yet freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn modcert_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
