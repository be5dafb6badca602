use std::ffi::{c_char, CStr, CString};
use std::ptr;

use ehlora_ffi::*;

fn last_error() -> String {
    let mut len = 0usize;
    unsafe {
        assert_eq!(ehl_last_error_message(ptr::null_mut(), 0, &mut len), EhlStatus::Ok);
        let mut buf = vec![0 as c_char; len + 1];
        assert_eq!(
            ehl_last_error_message(buf.as_mut_ptr(), buf.len(), ptr::null_mut()),
            EhlStatus::Ok
        );
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn set(s: *mut EhlScenario, k: &str, v: &str) -> EhlStatus {
    let k = CString::new(k).unwrap();
    let v = CString::new(v).unwrap();
    unsafe { ehl_scenario_set(s, k.as_ptr(), v.as_ptr()) }
}

#[test]
fn run_constant_scenario_through_handles() {
    let s = ehl_scenario_new();
    assert_eq!(set(s, "trace", "constant:100"), EhlStatus::Ok);
    assert_eq!(set(s, "capacitance_mf", "40"), EhlStatus::Ok);
    assert_eq!(set(s, "horizon_s", "3600"), EhlStatus::Ok);

    let mut report = ptr::null_mut();
    let mut m = EhlMetrics {
        packets_sent: 0,
        p_max: 0,
        efficiency_pct: 0.0,
        on_fraction: 0.0,
        off_fraction: 0.0,
        charging_fraction: 0.0,
        mean_inter_tx_s: 0.0,
        stddev_inter_tx_s: 0.0,
    };
    unsafe {
        assert_eq!(ehl_scenario_run(s, &mut report), EhlStatus::Ok);
        assert!(!report.is_null());
        assert_eq!(ehl_report_metrics(report, &mut m), EhlStatus::Ok);
    }
    assert!(m.packets_sent > 0 && m.packets_sent <= m.p_max);
    assert!((m.on_fraction + m.off_fraction + m.charging_fraction - 1.0).abs() < 1e-9);
    assert!(m.mean_inter_tx_s >= 5.0);

    let mut len = 0usize;
    let mut tiny = [0 as c_char; 4];
    unsafe {
        assert_eq!(
            ehl_report_event_log(report, tiny.as_mut_ptr(), tiny.len(), &mut len),
            EhlStatus::BufferTooSmall
        );
        let mut buf = vec![0 as c_char; len + 1];
        assert_eq!(
            ehl_report_event_log(report, buf.as_mut_ptr(), buf.len(), &mut len),
            EhlStatus::Ok
        );
        let text = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert!(text.starts_with("time_s\tevent"));
        assert_eq!(text.len(), len);
        ehl_report_free(report);
        ehl_scenario_free(s);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let s = ehl_scenario_new();
    assert_eq!(set(s, "no_such_key", "1"), EhlStatus::Config);
    assert!(last_error().contains("no_such_key"));
    assert_eq!(set(s, "sf", "13"), EhlStatus::Domain);
    assert!(!last_error().is_empty());

    let bad = [0xffu8 as c_char, 0];
    let v = CString::new("1").unwrap();
    unsafe {
        assert_eq!(ehl_scenario_set(s, bad.as_ptr(), v.as_ptr()), EhlStatus::InvalidUtf8);
        assert_eq!(
            ehl_scenario_set(ptr::null_mut(), v.as_ptr(), v.as_ptr()),
            EhlStatus::NullPointer
        );
        let mut out = ptr::null_mut();
        assert_eq!(ehl_scenario_run(ptr::null(), &mut out), EhlStatus::NullPointer);
        assert!(out.is_null());
        ehl_scenario_free(s);
        ehl_scenario_free(ptr::null_mut());
        ehl_report_free(ptr::null_mut());
    }
}

#[test]
fn get_round_trips_set_values() {
    let s = ehl_scenario_new();
    assert_eq!(set(s, "payload_b", "50"), EhlStatus::Ok);
    let key = CString::new("payload_b").unwrap();
    let mut buf = [0 as c_char; 32];
    let mut len = 0;
    unsafe {
        assert_eq!(
            ehl_scenario_get(s, key.as_ptr(), buf.as_mut_ptr(), buf.len(), &mut len),
            EhlStatus::Ok
        );
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "50");
        ehl_scenario_free(s);
    }
}

#[test]
fn airtime_matches_core() {
    let mut t = 0.0;
    unsafe {
        assert_eq!(ehl_time_on_air(7, 5, &mut t), EhlStatus::Ok);
        assert!((t - 0.05146).abs() < 5e-5);
        assert_eq!(ehl_time_on_air(6, 5, &mut t), EhlStatus::Domain);
        assert_eq!(ehl_time_on_air(7, 5, ptr::null_mut()), EhlStatus::NullPointer);
        assert!(!CStr::from_ptr(ehl_version()).to_bytes().is_empty());
    }
}

#[test]
fn header_declares_the_public_functions() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ehlora.h")).unwrap();
    for name in [
        "ehl_scenario_new",
        "ehl_scenario_set",
        "ehl_scenario_get",
        "ehl_scenario_run",
        "ehl_scenario_free",
        "ehl_report_metrics",
        "ehl_report_event_log",
        "ehl_report_free",
        "ehl_time_on_air",
        "ehl_last_error_message",
        "EHL_STATUS_BUFFER_TOO_SMALL",
        "typedef struct EhlScenario EhlScenario",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"ehlora.h\"\n\
         int probe(void) {\n\
           EhlScenario *s = ehl_scenario_new();\n\
           EhlStatus st = ehl_scenario_set(s, \"sf\", \"8\");\n\
           ehl_scenario_free(s);\n\
           return st == EHL_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .expect("a C compiler is required for this test");
    assert!(status.success());
}
