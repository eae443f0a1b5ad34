use coexsim_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(coex_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn model_round_trip() {
    let m = coex_model_new();
    let mut fp = CoexFixedPoint::default();
    unsafe {
        assert_eq!(coex_model_set_q(m, 0.3), CoexStatus::Ok);
        assert_eq!(coex_model_solve(m, &mut fp), CoexStatus::Ok);
        assert!(fp.converged && (0.0..=1.0).contains(&fp.p_b));
        assert_eq!(coex_model_set_q(m, 1.5), CoexStatus::InvalidArgument);
        assert!(last_error().contains("1.5"));
        coex_model_free(m);
    }
}

#[test]
fn model_from_toml_rejects_unknown_keys() {
    let good = CString::new("[model]\nq = 0.2\nn_wifi = 2\n").unwrap();
    let bad = CString::new("[model]\nfrobnicate = 1\n").unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(coex_model_from_toml(good.as_ptr(), &mut m), CoexStatus::Ok);
        assert!(!m.is_null());
        coex_model_free(m);
        assert_eq!(coex_model_from_toml(bad.as_ptr(), &mut m), CoexStatus::ConfigError);
        assert!(m.is_null());
        assert_eq!(coex_model_from_toml(ptr::null(), &mut m), CoexStatus::NullPointer);
    }
}

#[test]
fn formulas_match_library() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(coex_p_tx_wifi(0.4, 16, 6, 0.2, 0.0, &mut v), CoexStatus::Ok);
        assert_eq!(v, coexsim::analytic::p_tx_wifi(0.4, 16, 6, 0.2, 0.0).unwrap());
        assert_eq!(coex_p_tx_cat4(0.4, 16, 6, 0.2, 0.0, &mut v), CoexStatus::Ok);
        assert_eq!(v, coexsim::analytic::p_tx_cat4(0.4, 16, 6, 0.2, 0.0).unwrap());
        assert_eq!(coex_tail_busy(3.0, 2, 5.0, &mut v), CoexStatus::Ok);
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn uci_encode_decode() {
    let u = CoexUci { c_rnti: 0xBEEF, harq_process: 7, ndi: true, burst_len_sf: 4, carrier_idx: 2, full: true, a_csi: 9, harq_ack_bitmap: 0x5A5A };
    let mut bits = [0u8; 64];
    let mut len = 0;
    let mut back = CoexUci::default();
    unsafe {
        assert_eq!(coex_uci_encode(&u, bits.as_mut_ptr(), 4, &mut len), CoexStatus::BufferTooSmall);
        assert_eq!(coex_uci_encode(&u, bits.as_mut_ptr(), bits.len(), &mut len), CoexStatus::Ok);
        assert_eq!(coex_uci_decode(bits.as_ptr(), len, &mut back), CoexStatus::Ok);
    }
    assert_eq!(back, u);
    bits[0] = 2;
    assert_eq!(unsafe { coex_uci_decode(bits.as_ptr(), len, &mut back) }, CoexStatus::InvalidArgument);
}

fn run(seed: u64) -> String {
    let toml = CString::new("[scenario]\nsim_duration_s = 2.0\n").unwrap();
    let mut s = ptr::null_mut();
    let mut m = ptr::null_mut();
    let mut csv = ptr::null_mut();
    unsafe {
        assert_eq!(coex_scenario_from_toml(toml.as_ptr(), &mut s), CoexStatus::Ok);
        assert_eq!(coex_scenario_set_seed(s, seed), CoexStatus::Ok);
        assert_eq!(coex_scenario_run(s, &mut m), CoexStatus::Ok);
        let mut st = CoexClassStats::default();
        assert_eq!(coex_metrics_class(m, CoexNodeClass::Ue, &mut st), CoexStatus::Ok);
        assert!(st.access_successes + st.collisions <= st.access_attempts);
        let mut upt = 0.0;
        assert_eq!(coex_metrics_upt(m, true, false, &mut upt), CoexStatus::Ok);
        assert_eq!(coex_metrics_csv(m, &mut csv), CoexStatus::Ok);
        let text = CStr::from_ptr(csv).to_str().unwrap().to_owned();
        coex_string_free(csv);
        coex_metrics_free(m);
        coex_scenario_free(s);
        text
    }
}

#[test]
fn scenario_runs_are_reproducible() {
    let a = run(11);
    assert_eq!(a, run(11));
    assert!(a.lines().count() > 1);
}

#[test]
fn invalid_scenario_is_rejected() {
    let toml = CString::new("[scenario]\nsim_duration_s = -1.0\n").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { coex_scenario_from_toml(toml.as_ptr(), &mut s) }, CoexStatus::ConfigError);
    assert!(s.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        coex_model_free(ptr::null_mut());
        coex_scenario_free(ptr::null_mut());
        coex_metrics_free(ptr::null_mut());
        coex_string_free(ptr::null_mut());
    }
}

#[test]
fn header_is_generated() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/coexsim.h")).unwrap();
    for sym in ["coex_model_solve", "coex_scenario_run", "coex_uci_encode", "COEX_STATUS_NOT_CONVERGED", "typedef struct CoexModel CoexModel"] {
        assert!(h.contains(sym), "{sym}");
    }
}
