//! C ABI for the ehlora simulator.
//!
//! A scenario is built through an opaque [`EhlScenario`] handle by setting
//! configuration keys as strings, then run to obtain an opaque [`EhlReport`].
//! Every fallible call returns an [`EhlStatus`]; the message of the most
//! recent failure on the calling thread is available through
//! [`ehl_last_error_message`].
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ehlora::{EventLog, MetricsReport, RadioParams, ScenarioConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EhlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Unknown key, malformed value or inconsistent scenario.
    Config = 3,
    /// A numeric argument outside the model's domain.
    Domain = 4,
    Trace = 5,
    Io = 6,
    /// The simulation itself detected an invariant violation.
    Simulation = 7,
    /// The caller's buffer cannot hold the result; the required size is
    /// still written to `out_len`.
    BufferTooSmall = 8,
    Panic = 9,
}

/// Opaque scenario configuration.
pub struct EhlScenario {
    config: ScenarioConfig,
}

/// Opaque result of one simulation run.
pub struct EhlReport {
    report: MetricsReport,
    log: EventLog,
}

/// Summary metrics of a run. Inter-transmission statistics are NaN when
/// fewer than two packets were sent.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EhlMetrics {
    pub packets_sent: u64,
    pub p_max: u64,
    pub efficiency_pct: f64,
    pub on_fraction: f64,
    pub off_fraction: f64,
    pub charging_fraction: f64,
    pub mean_inter_tx_s: f64,
    pub stddev_inter_tx_s: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &ehlora::Error) -> EhlStatus {
    use ehlora::Error as E;
    match err {
        E::Domain(_) => EhlStatus::Domain,
        E::Config(_) => EhlStatus::Config,
        E::TraceFormat { .. } | E::Trace(_) => EhlStatus::Trace,
        E::Io(_) | E::Csv(_) => EhlStatus::Io,
        E::GateViolation { .. } | E::Transition { .. } => EhlStatus::Simulation,
    }
}

fn fail(status: EhlStatus, msg: impl Into<String>) -> EhlStatus {
    set_last_error(msg);
    status
}

fn from_error(err: ehlora::Error) -> EhlStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `f`, turning a panic into [`EhlStatus::Panic`].
fn guard(f: impl FnOnce() -> EhlStatus) -> EhlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(EhlStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, EhlStatus> {
    if p.is_null() {
        return Err(fail(EhlStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(EhlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Copies `s` plus a terminating NUL into `buf`. `out_len`, when non-null,
/// receives the string length without the NUL.
unsafe fn copy_out(s: &str, buf: *mut c_char, cap: usize, out_len: *mut usize) -> EhlStatus {
    if !out_len.is_null() {
        *out_len = s.len();
    }
    if buf.is_null() {
        return if cap == 0 {
            EhlStatus::Ok
        } else {
            fail(EhlStatus::NullPointer, "buffer is null")
        };
    }
    if cap < s.len() + 1 {
        return fail(
            EhlStatus::BufferTooSmall,
            format!("buffer of {cap} bytes cannot hold {} bytes", s.len() + 1),
        );
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    EhlStatus::Ok
}

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ehl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of the calling thread into `buf`.
/// Pass a null `buf` with `cap` 0 to query the length.
#[no_mangle]
pub unsafe extern "C" fn ehl_last_error_message(buf: *mut c_char, cap: usize, out_len: *mut usize) -> EhlStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    copy_out(&msg, buf, cap, out_len)
}

/// Creates a scenario with default settings. Never returns null.
#[no_mangle]
pub extern "C" fn ehl_scenario_new() -> *mut EhlScenario {
    Box::into_raw(Box::new(EhlScenario {
        config: ScenarioConfig::default(),
    }))
}

#[no_mangle]
pub unsafe extern "C" fn ehl_scenario_free(scenario: *mut EhlScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Sets one configuration key, using the same keys and value syntax as the
/// command-line `--set KEY=VALUE` option.
#[no_mangle]
pub unsafe extern "C" fn ehl_scenario_set(
    scenario: *mut EhlScenario,
    key: *const c_char,
    value: *const c_char,
) -> EhlStatus {
    guard(|| {
        let Some(scenario) = scenario.as_mut() else {
            return fail(EhlStatus::NullPointer, "scenario is null");
        };
        let key = match str_arg(key, "key") {
            Ok(k) => k,
            Err(s) => return s,
        };
        let value = match str_arg(value, "value") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match scenario.config.set(key, value) {
            Ok(()) => EhlStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Reads back a configuration key as text.
#[no_mangle]
pub unsafe extern "C" fn ehl_scenario_get(
    scenario: *const EhlScenario,
    key: *const c_char,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> EhlStatus {
    guard(|| {
        let Some(scenario) = scenario.as_ref() else {
            return fail(EhlStatus::NullPointer, "scenario is null");
        };
        let key = match str_arg(key, "key") {
            Ok(k) => k,
            Err(s) => return s,
        };
        match scenario.config.get(key) {
            Some(v) => copy_out(&v, buf, cap, out_len),
            None => fail(EhlStatus::Config, format!("unknown key `{key}`")),
        }
    })
}

/// Runs the scenario. On success `*out` owns a report that must be released
/// with [`ehl_report_free`]; on failure it is set to null.
#[no_mangle]
pub unsafe extern "C" fn ehl_scenario_run(scenario: *const EhlScenario, out: *mut *mut EhlReport) -> EhlStatus {
    guard(|| {
        if out.is_null() {
            return fail(EhlStatus::NullPointer, "output pointer is null");
        }
        *out = ptr::null_mut();
        let Some(scenario) = scenario.as_ref() else {
            return fail(EhlStatus::NullPointer, "scenario is null");
        };
        match ehlora::run_scenario(&scenario.config) {
            Ok((log, report)) => {
                *out = Box::into_raw(Box::new(EhlReport { report, log }));
                EhlStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ehl_report_free(report: *mut EhlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ehl_report_metrics(report: *const EhlReport, out: *mut EhlMetrics) -> EhlStatus {
    let (Some(r), false) = (report.as_ref(), out.is_null()) else {
        return fail(EhlStatus::NullPointer, "report or output pointer is null");
    };
    let m = &r.report;
    *out = EhlMetrics {
        packets_sent: m.packets_sent,
        p_max: m.p_max,
        efficiency_pct: m.efficiency_pct,
        on_fraction: m.on_fraction,
        off_fraction: m.off_fraction,
        charging_fraction: m.charging_fraction,
        mean_inter_tx_s: m.mean_inter_tx.unwrap_or(f64::NAN),
        stddev_inter_tx_s: m.stddev_inter_tx.unwrap_or(f64::NAN),
    };
    EhlStatus::Ok
}

/// Copies the tab-separated event log, header included, into `buf`.
#[no_mangle]
pub unsafe extern "C" fn ehl_report_event_log(
    report: *const EhlReport,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> EhlStatus {
    guard(|| {
        let Some(r) = report.as_ref() else {
            return fail(EhlStatus::NullPointer, "report is null");
        };
        copy_out(&r.log.to_text(), buf, cap, out_len)
    })
}

/// Time on air in seconds of an uplink with `payload` application bytes at
/// the given spreading factor, 125 kHz and coding rate 4/5.
#[no_mangle]
pub unsafe extern "C" fn ehl_time_on_air(spreading_factor: u8, payload: usize, out_s: *mut f64) -> EhlStatus {
    if out_s.is_null() {
        return fail(EhlStatus::NullPointer, "output pointer is null");
    }
    match ehlora::time_on_air(&RadioParams::with_sf(spreading_factor), payload) {
        Ok(t) => {
            *out_s = t;
            EhlStatus::Ok
        }
        Err(e) => from_error(e),
    }
}
