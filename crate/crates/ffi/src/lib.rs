//! C ABI over `tradeoff-core`.
//!
//! Every fallible function returns a [`TradeoffStatus`] and writes its result
//! through an out-pointer. On failure the thread's last error message is set;
//! read it with [`tradeoff_last_error`]. Handles ([`TradeoffRng`],
//! [`TradeoffLedger`]) are opaque, created by `*_new` and released by the
//! matching `*_free`. Strings returned to the caller are released with
//! [`tradeoff_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use tradeoff_core::accountant::BudgetLedger;
use tradeoff_core::attack;
use tradeoff_core::frontier::{self, BoundConstants, FeasibilitySpec};
use tradeoff_core::mechanisms::{self, Candidate, PrivacyBudget, SensitivityBound};
use tradeoff_core::rng::{seeded, SeededRng};
use tradeoff_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeoffStatus {
    Ok = 0,
    InvalidParameter = 1,
    BudgetExhausted = 2,
    UnknownGroup = 3,
    EmptyGroup = 4,
    DegenerateLabels = 5,
    LengthMismatch = 6,
    BothLikelihoodsZero = 7,
    Infeasible = 8,
    NonFinite = 9,
    EmptyInput = 10,
    Dataset = 11,
    Io = 12,
    Json = 13,
    NullPointer = 14,
    InvalidUtf8 = 15,
    Panic = 16,
}

impl From<&Error> for TradeoffStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => Self::InvalidParameter,
            Error::BudgetExhausted { .. } => Self::BudgetExhausted,
            Error::UnknownGroup(_) => Self::UnknownGroup,
            Error::EmptyGroup(_) => Self::EmptyGroup,
            Error::DegenerateLabels { .. } => Self::DegenerateLabels,
            Error::LengthMismatch { .. } => Self::LengthMismatch,
            Error::BothLikelihoodsZero => Self::BothLikelihoodsZero,
            Error::Infeasible(_) => Self::Infeasible,
            Error::NonFinite(_) => Self::NonFinite,
            Error::EmptyInput(_) => Self::EmptyInput,
            Error::Dataset { .. } | Error::Csv(_) => Self::Dataset,
            Error::Json(_) => Self::Json,
            Error::Io(_) => Self::Io,
        }
    }
}

/// Seeded ChaCha random stream.
pub struct TradeoffRng(SeededRng);

/// Privacy ledger under basic composition.
pub struct TradeoffLedger(BudgetLedger);

/// Mirror of the core feasibility spec.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TradeoffFeasibilitySpec {
    pub u0: f64,
    pub u_threshold: f64,
    pub f_target: f64,
    pub d: u64,
    pub p: f64,
}

/// Mirror of the core bound constants; both are 1 by default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TradeoffBoundConstants {
    pub c_utility: f64,
    pub c_fairness: f64,
}

impl From<TradeoffBoundConstants> for BoundConstants {
    fn from(c: TradeoffBoundConstants) -> Self {
        BoundConstants {
            c_utility: c.c_utility,
            c_fairness: c.c_fairness,
        }
    }
}

/// Mirror of the core trade-off point.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TradeoffPoint {
    pub epsilon: f64,
    pub utility: f64,
    pub fairness_violation: f64,
    pub n: u64,
    pub p: f64,
    pub d: u64,
}

impl From<TradeoffFeasibilitySpec> for FeasibilitySpec {
    fn from(s: TradeoffFeasibilitySpec) -> Self {
        FeasibilitySpec {
            u0: s.u0,
            u_threshold: s.u_threshold,
            f_target: s.f_target,
            d: s.d,
            p: s.p,
        }
    }
}

impl From<TradeoffPoint> for frontier::TradeoffPoint {
    fn from(p: TradeoffPoint) -> Self {
        frontier::TradeoffPoint {
            epsilon: p.epsilon,
            utility: p.utility,
            fairness_violation: p.fairness_violation,
            n: p.n,
            p: p.p,
            d: p.d,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

struct Failure(TradeoffStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(TradeoffStatus::from(&e), format!("{}: {e}", e.name()))
    }
}

fn null(what: &str) -> Failure {
    Failure(TradeoffStatus::NullPointer, format!("NullPointer: {what} is null"))
}

/// Runs `body`, mapping errors and panics to a status and the last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TradeoffStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TradeoffStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("Panic: internal error".into());
            TradeoffStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or valid for a write of `T`.
unsafe fn write_out<T>(ptr: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    ptr.write(value);
    Ok(())
}

/// # Safety
/// `ptr` must be null or point to `len` readable `T`s.
unsafe fn read_slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(TradeoffStatus::InvalidUtf8, format!("InvalidUtf8: {what}")))
}

/// # Safety
/// `ptr` must be null or a live handle from this library.
unsafe fn handle<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread, or null if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tradeoff_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn tradeoff_status_name(status: TradeoffStatus) -> *const c_char {
    let name: &'static CStr = match status {
        TradeoffStatus::Ok => c"Ok",
        TradeoffStatus::InvalidParameter => c"InvalidParameter",
        TradeoffStatus::BudgetExhausted => c"BudgetExhausted",
        TradeoffStatus::UnknownGroup => c"UnknownGroup",
        TradeoffStatus::EmptyGroup => c"EmptyGroup",
        TradeoffStatus::DegenerateLabels => c"DegenerateLabels",
        TradeoffStatus::LengthMismatch => c"LengthMismatch",
        TradeoffStatus::BothLikelihoodsZero => c"BothLikelihoodsZero",
        TradeoffStatus::Infeasible => c"Infeasible",
        TradeoffStatus::NonFinite => c"NonFinite",
        TradeoffStatus::EmptyInput => c"EmptyInput",
        TradeoffStatus::Dataset => c"Dataset",
        TradeoffStatus::Io => c"Io",
        TradeoffStatus::Json => c"Json",
        TradeoffStatus::NullPointer => c"NullPointer",
        TradeoffStatus::InvalidUtf8 => c"InvalidUtf8",
        TradeoffStatus::Panic => c"Panic",
    };
    name.as_ptr()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn tradeoff_rng_new(seed: u64) -> *mut TradeoffRng {
    Box::into_raw(Box::new(TradeoffRng(seeded(seed))))
}

/// # Safety
/// `rng` must be null or a handle from [`tradeoff_rng_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_rng_free(rng: *mut TradeoffRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// # Safety
/// `rng` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_laplace_mechanism(
    rng: *mut TradeoffRng,
    true_answer: f64,
    sensitivity: f64,
    epsilon: f64,
    out: *mut f64,
) -> TradeoffStatus {
    guard(|| {
        let rng = handle(rng, "rng")?;
        let sens = SensitivityBound::new(sensitivity)?;
        let v = mechanisms::laplace_mechanism(true_answer, sens, epsilon, &mut rng.0)?;
        write_out(out, v.value, "out")
    })
}

/// # Safety
/// `rng` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_gaussian_mechanism(
    rng: *mut TradeoffRng,
    true_answer: f64,
    sensitivity: f64,
    epsilon: f64,
    delta: f64,
    out: *mut f64,
) -> TradeoffStatus {
    guard(|| {
        let rng = handle(rng, "rng")?;
        let sens = SensitivityBound::new(sensitivity)?;
        let budget = PrivacyBudget::new(epsilon, delta)?;
        let v = mechanisms::gaussian_mechanism(true_answer, sens, budget, &mut rng.0)?;
        write_out(out, v.value, "out")
    })
}

/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_gaussian_sigma(
    epsilon: f64,
    delta: f64,
    sensitivity: f64,
    out: *mut f64,
) -> TradeoffStatus {
    guard(|| {
        let sigma = mechanisms::gaussian_sigma(epsilon, delta, SensitivityBound::new(sensitivity)?)?;
        write_out(out, sigma, "out")
    })
}

/// Picks an index into `utilities` with the exponential mechanism.
///
/// # Safety
/// `rng` must be a live handle, `utilities` must hold `len` values and
/// `out_index` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_exponential_mechanism(
    rng: *mut TradeoffRng,
    utilities: *const f64,
    len: usize,
    delta_u: f64,
    epsilon: f64,
    out_index: *mut usize,
) -> TradeoffStatus {
    guard(|| {
        let rng = handle(rng, "rng")?;
        let utilities = read_slice(utilities, len, "utilities")?;
        let candidates: Vec<Candidate<usize>> =
            utilities.iter().enumerate().map(|(i, &u)| Candidate::new(i, u)).collect();
        let pick = mechanisms::exponential_mechanism(&candidates, delta_u, epsilon, &mut rng.0)?;
        write_out(out_index, pick.id, "out_index")
    })
}

/// Creates an empty ledger with the given cap.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_ledger_new(
    cap_epsilon: f64,
    cap_delta: f64,
    out: *mut *mut TradeoffLedger,
) -> TradeoffStatus {
    guard(|| {
        let ledger = BudgetLedger::new(PrivacyBudget::new(cap_epsilon, cap_delta)?);
        write_out(out, Box::into_raw(Box::new(TradeoffLedger(ledger))), "out")
    })
}

/// Parses a ledger from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_ledger_from_json(json: *const c_char, out: *mut *mut TradeoffLedger) -> TradeoffStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let ledger: BudgetLedger = serde_json::from_str(text).map_err(Error::from)?;
        write_out(out, Box::into_raw(Box::new(TradeoffLedger(ledger))), "out")
    })
}

/// # Safety
/// `ledger` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_ledger_free(ledger: *mut TradeoffLedger) {
    if !ledger.is_null() {
        drop(Box::from_raw(ledger));
    }
}

/// Records a charge. On failure (including `BudgetExhausted`) the ledger is
/// left unchanged.
///
/// # Safety
/// `ledger` must be a live handle; `label` must be null or a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_ledger_charge(
    ledger: *mut TradeoffLedger,
    epsilon: f64,
    delta: f64,
    label: *const c_char,
) -> TradeoffStatus {
    guard(|| {
        let ledger = handle(ledger, "ledger")?;
        let label = if label.is_null() { "" } else { read_str(label, "label")? };
        ledger.0 = ledger.0.charge(epsilon, delta, label)?;
        Ok(())
    })
}

/// # Safety
/// `ledger` must be a live handle; the out-pointers must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_ledger_spent(
    ledger: *const TradeoffLedger,
    out_epsilon: *mut f64,
    out_delta: *mut f64,
) -> TradeoffStatus {
    guard(|| {
        let ledger = ledger.as_ref().ok_or_else(|| null("ledger"))?;
        write_out(out_epsilon, ledger.0.spent_epsilon(), "out_epsilon")?;
        write_out(out_delta, ledger.0.spent_delta(), "out_delta")
    })
}

/// Serialises the ledger; free the string with [`tradeoff_string_free`].
///
/// # Safety
/// `ledger` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_ledger_to_json(ledger: *const TradeoffLedger, out: *mut *mut c_char) -> TradeoffStatus {
    guard(|| {
        let ledger = ledger.as_ref().ok_or_else(|| null("ledger"))?;
        let text = serde_json::to_string(&ledger.0).map_err(Error::from)?;
        let c = CString::new(text).expect("JSON has no NUL bytes");
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_utility_bound(
    u0: f64,
    d: f64,
    epsilon: f64,
    n: f64,
    consts: TradeoffBoundConstants,
    out: *mut f64,
) -> TradeoffStatus {
    guard(|| write_out(out, frontier::utility_bound(u0, d, epsilon, n, consts.into())?, "out"))
}

/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_fairness_bound(
    epsilon: f64,
    n: f64,
    p: f64,
    consts: TradeoffBoundConstants,
    out: *mut f64,
) -> TradeoffStatus {
    guard(|| write_out(out, frontier::fairness_bound(epsilon, n, p, consts.into())?, "out"))
}

/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_group_noise_se(n_a: f64, epsilon: f64, out: *mut f64) -> TradeoffStatus {
    guard(|| write_out(out, frontier::group_noise_se(n_a, epsilon)?, "out"))
}

/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_feasible(
    spec: TradeoffFeasibilitySpec,
    epsilon: f64,
    n: f64,
    consts: TradeoffBoundConstants,
    out: *mut bool,
) -> TradeoffStatus {
    guard(|| write_out(out, frontier::feasible(&spec.into(), epsilon, n, consts.into())?, "out"))
}

/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_critical_sample_size(
    spec: TradeoffFeasibilitySpec,
    epsilon: f64,
    consts: TradeoffBoundConstants,
    out: *mut f64,
) -> TradeoffStatus {
    guard(|| write_out(out, frontier::critical_sample_size(&spec.into(), epsilon, consts.into())?, "out"))
}

/// Writes `true` into `out_mask[i]` when `points[i]` is nondominated.
///
/// # Safety
/// `points` must hold `len` points and `out_mask` room for `len` flags.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_pareto_mask(
    points: *const TradeoffPoint,
    len: usize,
    out_mask: *mut bool,
) -> TradeoffStatus {
    guard(|| {
        let points: Vec<frontier::TradeoffPoint> = read_slice(points, len, "points")?.iter().map(|&p| p.into()).collect();
        let mask = frontier::pareto_mask(&points)?;
        if out_mask.is_null() {
            return Err(null("out_mask"));
        }
        ptr::copy_nonoverlapping(mask.as_ptr(), out_mask, mask.len());
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tradeoff_membership_posterior(
    prior: f64,
    likelihood_in: f64,
    likelihood_out: f64,
    out: *mut f64,
) -> TradeoffStatus {
    guard(|| write_out(out, attack::membership_posterior(prior, likelihood_in, likelihood_out)?, "out"))
}
