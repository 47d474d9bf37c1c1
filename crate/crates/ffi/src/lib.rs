//! C ABI over `noma-sat`.
//!
//! Every fallible entry point returns a [`NomaStatus`] and writes results
//! through out-pointers. On failure a message is kept per thread and can be
//! read with [`noma_last_error_message`]. Trained models are opaque handles
//! released with [`noma_svm_free`]; strings handed out are released with
//! [`noma_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use noma_sat::channel::Label;
use noma_sat::ga::{self, Fitness, GaConfig, SearchSpace};
use noma_sat::noma::{self, LinkBudget};
use noma_sat::svm::{self, Sample, SvmModel};
use noma_sat::{channel, Error, RngStream};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NomaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Training = 3,
    Config = 4,
    Io = 5,
    Serialization = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> NomaStatus {
    match err {
        Error::Domain(_) => NomaStatus::InvalidArgument,
        Error::Training(_) => NomaStatus::Training,
        Error::Config(_) => NomaStatus::Config,
        Error::Io { .. } | Error::Data { .. } => NomaStatus::Io,
        Error::Serialization(_) | Error::Csv(_) => NomaStatus::Serialization,
    }
}

struct Failure(NomaStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(NomaStatus::NullPointer, format!("{name} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> NomaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => NomaStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            NomaStatus::Panic
        }
    }
}

unsafe fn writable<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

/// Message describing the last failure on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn noma_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn noma_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NomaSrParams {
    pub b: f64,
    pub m: f64,
    pub omega: f64,
}

/// Shadowed-Rician parameters at elevation `theta_deg` (20 to 80 degrees).
///
/// # Safety
/// `out` must point to writable memory for one `NomaSrParams`.
#[no_mangle]
pub unsafe extern "C" fn noma_sr_params(theta_deg: f64, out: *mut NomaSrParams) -> NomaStatus {
    guard(|| {
        let out = writable(out, "out")?;
        let p = channel::sr_params(theta_deg)?;
        *out = NomaSrParams {
            b: p.b(),
            m: p.m(),
            omega: p.omega(),
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NomaLinkBudget {
    /// Power share of the near user, in (0, 1).
    pub alpha: f64,
    /// Linear transmit power.
    pub p_s: f64,
    pub noise_var: f64,
    pub pilots: u32,
}

impl NomaLinkBudget {
    fn budget(&self) -> Result<LinkBudget, Failure> {
        let b = LinkBudget {
            alpha: self.alpha,
            p_s: self.p_s,
            noise_var: self.noise_var,
            pilots: self.pilots,
        };
        b.validate()?;
        Ok(b)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NomaRateReport {
    pub rate_near: f64,
    pub rate_far: f64,
    pub sum_rate: f64,
    pub sic_ok: bool,
}

impl From<noma::RateReport> for NomaRateReport {
    fn from(r: noma::RateReport) -> Self {
        Self {
            rate_near: r.rate_near,
            rate_far: r.rate_far,
            sum_rate: r.sum_rate,
            sic_ok: r.sic_ok,
        }
    }
}

/// SINR of the far message at a receiver with channel gain `gain`.
///
/// # Safety
/// `budget` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn noma_sinr_far(
    budget: *const NomaLinkBudget,
    gain: f64,
    out: *mut f64,
) -> NomaStatus {
    guard(|| {
        let b = budget.as_ref().ok_or_else(|| null("budget"))?.budget()?;
        *writable(out, "out")? = noma::interference_limited_sinr(&b, gain);
        Ok(())
    })
}

/// SINR of the near message after successive interference cancellation.
///
/// # Safety
/// `budget` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn noma_sinr_near(
    budget: *const NomaLinkBudget,
    gain: f64,
    out: *mut f64,
) -> NomaStatus {
    guard(|| {
        let b = budget.as_ref().ok_or_else(|| null("budget"))?.budget()?;
        *writable(out, "out")? = noma::sic_sinr(&b, gain);
        Ok(())
    })
}

/// NOMA rates with the SIC role at the `near_gain` receiver.
///
/// # Safety
/// `budget` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn noma_pair_rates(
    budget: *const NomaLinkBudget,
    near_gain: f64,
    far_gain: f64,
    out: *mut NomaRateReport,
) -> NomaStatus {
    guard(|| {
        let b = budget.as_ref().ok_or_else(|| null("budget"))?.budget()?;
        *writable(out, "out")? = noma::noma_rates_from_gains(&b, near_gain, far_gain).into();
        Ok(())
    })
}

/// Equal-time TDMA rates of the same two users.
///
/// # Safety
/// `budget` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn noma_tdma_rates(
    budget: *const NomaLinkBudget,
    near_gain: f64,
    far_gain: f64,
    out: *mut NomaRateReport,
) -> NomaStatus {
    guard(|| {
        let b = budget.as_ref().ok_or_else(|| null("budget"))?.budget()?;
        *writable(out, "out")? = noma::tdma_rates_from_gains(&b, near_gain, far_gain).into();
        Ok(())
    })
}

/// Trained classifier handle.
pub struct NomaSvmModel {
    model: SvmModel,
}

unsafe fn read_samples(
    features: *const f64,
    labels: *const f64,
    n: usize,
) -> Result<Vec<Sample>, Failure> {
    if features.is_null() {
        return Err(null("features"));
    }
    if labels.is_null() {
        return Err(null("labels"));
    }
    let x = std::slice::from_raw_parts(features, 2 * n);
    let y = std::slice::from_raw_parts(labels, n);
    y.iter()
        .enumerate()
        .map(|(i, &label)| {
            let label = match label {
                1.0 => Label::Near,
                -1.0 => Label::Far,
                v => {
                    return Err(Failure(
                        NomaStatus::InvalidArgument,
                        format!("label {v} at row {i} is not -1 or +1"),
                    ));
                }
            };
            Ok(Sample::new([x[2 * i], x[2 * i + 1]], label))
        })
        .collect()
}

/// Trains a Gaussian-kernel SVM on `n` rows of `features` (row-major,
/// two columns) with labels in {-1, +1}. Features are standardized.
///
/// # Safety
/// `features` must hold `2 * n` doubles, `labels` `n` doubles, and `out`
/// must be writable. The handle written to `out` is released with
/// `noma_svm_free`.
#[no_mangle]
pub unsafe extern "C" fn noma_svm_train(
    features: *const f64,
    labels: *const f64,
    n: usize,
    c_reg: f64,
    width: f64,
    out: *mut *mut NomaSvmModel,
) -> NomaStatus {
    guard(|| {
        let out = writable(out, "out")?;
        *out = ptr::null_mut();
        let data = read_samples(features, labels, n)?;
        let model = svm::train(&data, c_reg, width)?;
        *out = Box::into_raw(Box::new(NomaSvmModel { model }));
        Ok(())
    })
}

/// Releases a model handle. NULL is ignored.
///
/// # Safety
/// `model` must come from `noma_svm_train` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn noma_svm_free(model: *mut NomaSvmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Decision value `g(x)` at the point `(x0, x1)`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn noma_svm_decision_value(
    model: *const NomaSvmModel,
    x0: f64,
    x1: f64,
    out: *mut f64,
) -> NomaStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *writable(out, "out")? = m.model.decision_value(&[x0, x1]);
        Ok(())
    })
}

/// Predicted label at `(x0, x1)`: +1 near, -1 far.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn noma_svm_classify(
    model: *const NomaSvmModel,
    x0: f64,
    x1: f64,
    out: *mut i32,
) -> NomaStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *writable(out, "out")? = match m.model.classify(&[x0, x1]) {
            Label::Near => 1,
            Label::Far => -1,
        };
        Ok(())
    })
}

/// Number of support vectors.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn noma_svm_support_count(
    model: *const NomaSvmModel,
    out: *mut usize,
) -> NomaStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *writable(out, "out")? = m.model.support_samples.len();
        Ok(())
    })
}

/// JSON document of the model. The string is released with `noma_string_free`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn noma_svm_to_json(
    model: *const NomaSvmModel,
    out: *mut *mut c_char,
) -> NomaStatus {
    guard(|| {
        let out = writable(out, "out")?;
        *out = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let json = serde_json::to_string(&m.model).map_err(Error::from)?;
        *out = CString::new(json)
            .map_err(|e| Failure(NomaStatus::Serialization, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NomaGaResult {
    pub best_c: f64,
    pub best_width: f64,
    pub best_mse: f64,
    pub generations_run: usize,
    pub evaluations: usize,
}

/// Genetic search for `(C, width)` with the default population, operators
/// and search intervals, scored by stratified cross-validation.
///
/// # Safety
/// Same layout rules as `noma_svm_train`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn noma_ga_optimize(
    features: *const f64,
    labels: *const f64,
    n: usize,
    seed: u64,
    max_generations: usize,
    out: *mut NomaGaResult,
) -> NomaStatus {
    guard(|| {
        let out = writable(out, "out")?;
        let data = read_samples(features, labels, n)?;
        let config = GaConfig {
            max_generations,
            ..GaConfig::default()
        };
        config.validate()?;
        let stream = RngStream::new(seed, 0);
        let fitness = Fitness::stratified(&data, config.folds, &mut stream.derive(0).generator())?;
        let r = ga::optimize(
            &fitness,
            &SearchSpace::default(),
            &config,
            &mut stream.derive(1).generator(),
        )?;
        *out = NomaGaResult {
            best_c: r.best_c,
            best_width: r.best_width,
            best_mse: r.best_mse,
            generations_run: r.generations_run,
            evaluations: r.evaluations,
        };
        Ok(())
    })
}
