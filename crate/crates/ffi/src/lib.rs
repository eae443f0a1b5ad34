//! C ABI over `coexsim`.
//!
//! Every function returns a [`CoexStatus`]; results are written through
//! out-pointers. Objects are opaque handles created by `*_new`/`*_from_toml`
//! and released by the matching `*_free`. Strings returned to the caller
//! are freed with [`coex_string_free`]. The message of the last failure on
//! the calling thread is available from [`coex_last_error`].

use coexsim::analytic::{self, FixedPointSolution, ModelParams};
use coexsim::config::Config;
use coexsim::detection::{tail_busy, tail_idle, DetectionParams};
use coexsim::protocol::{decode_uci, encode_uci, UciFormat, UciPayload};
use coexsim::sim::{self, NodeClass, RunMetrics, ScenarioConfig};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoexStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotConverged = 3,
    ConfigError = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn fail(status: CoexStatus, msg: impl Into<String>) -> CoexStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> CoexStatus) -> CoexStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == CoexStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(CoexStatus::Panic, "internal panic"),
    }
}

macro_rules! out_ref {
    ($p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(r) => r,
            None => return fail(CoexStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

macro_rules! in_ref {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(r) => r,
            None => return fail(CoexStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn coex_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn coex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

fn read_str<'a>(s: *const c_char) -> Result<&'a str, CoexStatus> {
    if s.is_null() {
        return Err(fail(CoexStatus::NullPointer, "string argument is null"));
    }
    unsafe { CStr::from_ptr(s) }.to_str().map_err(|_| fail(CoexStatus::InvalidArgument, "string is not UTF-8"))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

// ---- detection -------------------------------------------------------------

/// P(Y > t) on an idle channel with `mu` time-bandwidth product.
///
/// # Safety
/// `out` must be null or valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn coex_tail_idle(t: f64, mu: u32, out: *mut f64) -> CoexStatus {
    guard(|| {
        let out = out_ref!(out);
        match tail_idle(t, mu) {
            Ok(v) => {
                *out = v;
                CoexStatus::Ok
            }
            Err(e) => fail(CoexStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// P(Y > t) with aggregate SNR `gamma`.
///
/// # Safety
/// `out` must be null or valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn coex_tail_busy(t: f64, mu: u32, gamma: f64, out: *mut f64) -> CoexStatus {
    guard(|| {
        let out = out_ref!(out);
        let r = DetectionParams::new(mu, gamma, t).and_then(|p| tail_busy(t, &p));
        match r {
            Ok(v) => {
                *out = v;
                CoexStatus::Ok
            }
            Err(e) => fail(CoexStatus::InvalidArgument, e.to_string()),
        }
    })
}

// ---- analytic --------------------------------------------------------------

/// WiFi transmit probability.
///
/// # Safety
/// `out` must be null or valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn coex_p_tx_wifi(q: f64, w0: u32, m: u32, p_b: f64, p_f: f64, out: *mut f64) -> CoexStatus {
    guard(|| {
        let out = out_ref!(out);
        match analytic::p_tx_wifi(q, w0, m, p_b, p_f) {
            Ok(v) => {
                *out = v;
                CoexStatus::Ok
            }
            Err(e) => fail(CoexStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Cat.4 transmit probability.
///
/// # Safety
/// `out` must be null or valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn coex_p_tx_cat4(q: f64, w0: u32, m: u32, p_b: f64, p_f: f64, out: *mut f64) -> CoexStatus {
    guard(|| {
        let out = out_ref!(out);
        match analytic::p_tx_cat4(q, w0, m, p_b, p_f) {
            Ok(v) => {
                *out = v;
                CoexStatus::Ok
            }
            Err(e) => fail(CoexStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Opaque analytic model parameters.
pub struct CoexModel {
    params: ModelParams,
}

/// Fixed point of the access model.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoexFixedPoint {
    pub p_tx_wifi: f64,
    pub p_tx_cat4: f64,
    pub p_b: f64,
    pub residual: f64,
    pub iterations: u32,
    pub converged: bool,
    /// Scheduled-uplink access probability at this point.
    pub access_sul: f64,
}

impl From<FixedPointSolution> for CoexFixedPoint {
    fn from(s: FixedPointSolution) -> Self {
        Self {
            p_tx_wifi: s.p_tx_wifi,
            p_tx_cat4: s.p_tx_cat4,
            p_b: s.p_b,
            residual: s.residual,
            iterations: s.iterations,
            converged: s.converged,
            access_sul: (1.0 - s.p_b) * s.p_tx_cat4,
        }
    }
}

/// Model with default parameters. Free with [`coex_model_free`].
#[no_mangle]
pub extern "C" fn coex_model_new() -> *mut CoexModel {
    Box::into_raw(Box::new(CoexModel { params: ModelParams::default() }))
}

/// Model from the `[model]` section of a TOML document.
///
/// # Safety
/// `toml` must be null or a nul-terminated string; `out` must be null or
/// valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn coex_model_from_toml(toml: *const c_char, out: *mut *mut CoexModel) -> CoexStatus {
    guard(|| {
        let out = out_ref!(out);
        *out = ptr::null_mut();
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Config::from_toml_str(text, &[]) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(CoexModel { params: c.model }));
                CoexStatus::Ok
            }
            Err(e) => fail(CoexStatus::ConfigError, e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn coex_model_free(model: *mut CoexModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Set the per-slot arrival probability.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn coex_model_set_q(model: *mut CoexModel, q: f64) -> CoexStatus {
    guard(|| {
        let m = out_ref!(model);
        if !(0.0..=1.0).contains(&q) {
            return fail(CoexStatus::InvalidArgument, format!("q = {q} outside [0, 1]"));
        }
        m.params.q = q;
        CoexStatus::Ok
    })
}

/// Set the uplink mode: 0 scheduled, 1 grant-less.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn coex_model_set_grantless(model: *mut CoexModel, grantless: bool) -> CoexStatus {
    guard(|| {
        let m = out_ref!(model);
        m.params.uplink_mode = if grantless { analytic::UplinkMode::Gul } else { analytic::UplinkMode::Sul };
        CoexStatus::Ok
    })
}

/// Solve the fixed point. On `NotConverged` the last iterate is written.
///
/// # Safety
/// `model` must be null or a live handle; `out` must be null or valid for
/// one `CoexFixedPoint` write.
#[no_mangle]
pub unsafe extern "C" fn coex_model_solve(model: *const CoexModel, out: *mut CoexFixedPoint) -> CoexStatus {
    guard(|| {
        let m = in_ref!(model);
        let out = out_ref!(out);
        match analytic::solve_fixed_point(&m.params) {
            Ok(s) => {
                *out = s.into();
                CoexStatus::Ok
            }
            Err(analytic::AnalyticError::NotConverged(s)) => {
                *out = (*s).into();
                fail(CoexStatus::NotConverged, "fixed point did not converge")
            }
            Err(e) => fail(CoexStatus::InvalidArgument, e.to_string()),
        }
    })
}

// ---- protocol --------------------------------------------------------------

/// UCI fields. `full` selects the 52-bit format; `a_csi` and
/// `harq_ack_bitmap` are ignored for the compact one.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoexUci {
    pub c_rnti: u16,
    pub harq_process: u8,
    pub ndi: bool,
    pub burst_len_sf: u8,
    pub carrier_idx: u8,
    pub full: bool,
    pub a_csi: u8,
    pub harq_ack_bitmap: u16,
}

impl From<&CoexUci> for UciPayload {
    fn from(u: &CoexUci) -> Self {
        UciPayload {
            c_rnti: u.c_rnti,
            harq_process: u.harq_process,
            ndi: u.ndi,
            burst_len_sf: u.burst_len_sf,
            carrier_idx: u.carrier_idx,
            format: if u.full { UciFormat::Full } else { UciFormat::Compact },
            a_csi: u.full.then_some(u.a_csi),
            harq_ack_bitmap: u.full.then_some(u.harq_ack_bitmap),
        }
    }
}

/// Encode into `bits` (one byte per bit, 0 or 1, MSB first).
///
/// # Safety
/// `uci` must be null or valid for reads; `bits` must be null or valid for
/// `cap` byte writes; `len` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn coex_uci_encode(uci: *const CoexUci, bits: *mut u8, cap: usize, len: *mut usize) -> CoexStatus {
    guard(|| {
        let u = in_ref!(uci);
        let len = out_ref!(len);
        if bits.is_null() {
            return fail(CoexStatus::NullPointer, "bits is null");
        }
        let encoded = match encode_uci(&u.into()) {
            Ok(b) => b,
            Err(e) => return fail(CoexStatus::InvalidArgument, e.to_string()),
        };
        *len = encoded.len();
        if cap < encoded.len() {
            return fail(CoexStatus::BufferTooSmall, format!("need {} bytes", encoded.len()));
        }
        let dst = unsafe { std::slice::from_raw_parts_mut(bits, encoded.len()) };
        for (d, b) in dst.iter_mut().zip(encoded) {
            *d = b as u8;
        }
        CoexStatus::Ok
    })
}

/// Decode `len` bits; the format follows from the length.
///
/// # Safety
/// `bits` must be null or valid for `len` byte reads; `out` must be null or
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn coex_uci_decode(bits: *const u8, len: usize, out: *mut CoexUci) -> CoexStatus {
    guard(|| {
        let out = out_ref!(out);
        if bits.is_null() {
            return fail(CoexStatus::NullPointer, "bits is null");
        }
        let src = unsafe { std::slice::from_raw_parts(bits, len) };
        if src.iter().any(|&b| b > 1) {
            return fail(CoexStatus::InvalidArgument, "bit values must be 0 or 1");
        }
        let v: Vec<bool> = src.iter().map(|&b| b == 1).collect();
        let fmt = if len == UciFormat::Full.bits() { UciFormat::Full } else { UciFormat::Compact };
        match decode_uci(&v, fmt) {
            Ok(p) => {
                *out = CoexUci {
                    c_rnti: p.c_rnti,
                    harq_process: p.harq_process,
                    ndi: p.ndi,
                    burst_len_sf: p.burst_len_sf,
                    carrier_idx: p.carrier_idx,
                    full: p.format == UciFormat::Full,
                    a_csi: p.a_csi.unwrap_or(0),
                    harq_ack_bitmap: p.harq_ack_bitmap.unwrap_or(0),
                };
                CoexStatus::Ok
            }
            Err(e) => fail(CoexStatus::InvalidArgument, e.to_string()),
        }
    })
}

// ---- simulator -------------------------------------------------------------

/// Opaque scenario configuration.
pub struct CoexScenario {
    config: ScenarioConfig,
}

/// Opaque run result.
pub struct CoexMetrics {
    metrics: RunMetrics,
}

/// Node classes for [`coex_metrics_class`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoexNodeClass {
    Ue = 0,
    Enb = 1,
    WifiSta = 2,
    WifiAp = 3,
}

/// Per-class access statistics.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoexClassStats {
    pub access_attempts: u64,
    pub access_successes: u64,
    pub collisions: u64,
    pub wasted_grants: u64,
    pub units_sent: u64,
    pub units_collided: u64,
}

/// Scenario from the `[scenario]` section of a TOML document; an empty
/// string gives the defaults.
///
/// # Safety
/// `toml` must be null or a nul-terminated string; `out` must be null or
/// valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn coex_scenario_from_toml(toml: *const c_char, out: *mut *mut CoexScenario) -> CoexStatus {
    guard(|| {
        let out = out_ref!(out);
        *out = ptr::null_mut();
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let cfg = match Config::from_toml_str(text, &[]) {
            Ok(c) => c.scenario,
            Err(e) => return fail(CoexStatus::ConfigError, e.to_string()),
        };
        if let Err(e) = cfg.validate() {
            return fail(CoexStatus::ConfigError, e.to_string());
        }
        *out = Box::into_raw(Box::new(CoexScenario { config: cfg }));
        CoexStatus::Ok
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn coex_scenario_free(scenario: *mut CoexScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn coex_scenario_set_seed(scenario: *mut CoexScenario, seed: u64) -> CoexStatus {
    guard(|| {
        out_ref!(scenario).config.seed = seed;
        CoexStatus::Ok
    })
}

/// Run the scenario. Free the result with [`coex_metrics_free`].
///
/// # Safety
/// `scenario` must be null or a live handle; `out` must be null or valid
/// for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn coex_scenario_run(scenario: *const CoexScenario, out: *mut *mut CoexMetrics) -> CoexStatus {
    guard(|| {
        let s = in_ref!(scenario);
        let out = out_ref!(out);
        *out = ptr::null_mut();
        match sim::run(&s.config) {
            Ok(metrics) => {
                *out = Box::into_raw(Box::new(CoexMetrics { metrics }));
                CoexStatus::Ok
            }
            Err(e) => fail(CoexStatus::ConfigError, e.to_string()),
        }
    })
}

/// # Safety
/// `metrics` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn coex_metrics_free(metrics: *mut CoexMetrics) {
    if !metrics.is_null() {
        drop(unsafe { Box::from_raw(metrics) });
    }
}

/// # Safety
/// `metrics` must be null or a live handle; `out` must be null or valid
/// for one write.
#[no_mangle]
pub unsafe extern "C" fn coex_metrics_class(
    metrics: *const CoexMetrics,
    class: CoexNodeClass,
    out: *mut CoexClassStats,
) -> CoexStatus {
    guard(|| {
        let m = in_ref!(metrics);
        let out = out_ref!(out);
        let c = match class {
            CoexNodeClass::Ue => NodeClass::Ue,
            CoexNodeClass::Enb => NodeClass::Enb,
            CoexNodeClass::WifiSta => NodeClass::WifiSta,
            CoexNodeClass::WifiAp => NodeClass::WifiAp,
        };
        let s = m.metrics.stats(c);
        *out = CoexClassStats {
            access_attempts: s.access_attempts,
            access_successes: s.access_successes,
            collisions: s.collisions,
            wasted_grants: s.wasted_grants,
            units_sent: s.units_sent,
            units_collided: s.units_collided,
        };
        CoexStatus::Ok
    })
}

/// Mean UPT in Mbps of (technology, direction); NaN when no file completed.
/// `wifi` selects the technology, `uplink` the direction.
///
/// # Safety
/// `metrics` must be null or a live handle; `out` must be null or valid
/// for one write.
#[no_mangle]
pub unsafe extern "C" fn coex_metrics_upt(metrics: *const CoexMetrics, wifi: bool, uplink: bool, out: *mut f64) -> CoexStatus {
    guard(|| {
        let m = in_ref!(metrics);
        let out = out_ref!(out);
        let tech = if wifi { sim::Technology::Wifi } else { sim::Technology::Mf };
        let dir = if uplink { sim::Direction::Ul } else { sim::Direction::Dl };
        *out = m.metrics.upt(tech, dir).unwrap_or(f64::NAN);
        CoexStatus::Ok
    })
}

/// Metrics CSV as a new string; free with [`coex_string_free`].
///
/// # Safety
/// `metrics` must be null or a live handle; `out` must be null or valid
/// for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn coex_metrics_csv(metrics: *const CoexMetrics, out: *mut *mut c_char) -> CoexStatus {
    guard(|| {
        let m = in_ref!(metrics);
        let out = out_ref!(out);
        *out = to_c_string(m.metrics.to_csv());
        CoexStatus::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_out_pointer_reported() {
        let s = unsafe { coex_tail_idle(1.0, 1, ptr::null_mut()) };
        assert_eq!(s, CoexStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(coex_last_error()) }.to_str().unwrap();
        assert!(msg.contains("null"));
    }

    #[test]
    fn success_clears_error() {
        let mut v = 0.0;
        assert_eq!(unsafe { coex_tail_idle(-1.0, 1, &mut v) }, CoexStatus::InvalidArgument);
        assert_eq!(unsafe { coex_tail_idle(0.0, 1, &mut v) }, CoexStatus::Ok);
        assert_eq!(v, 1.0);
        assert!(unsafe { CStr::from_ptr(coex_last_error()) }.to_bytes().is_empty());
    }
}
