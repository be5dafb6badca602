use std::process::Command;

use ehlora::cli::run_cli;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("ehlora").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn rows(csv_text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(csv_text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _, err) = run(&["run", "--bogus"]);
    assert_ne!(code, 0);
    assert!(err.contains("--bogus"));
}

#[test]
fn binary_exits_nonzero_on_unknown_flag() {
    let status = Command::new(env!("CARGO_BIN_EXE_ehlora"))
        .args(["sweep", "--nope"])
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(!status.stderr.is_empty());
}

#[test]
fn conflicting_trace_sources_are_rejected() {
    let (code, _, err) = run(&["run", "--constant-mw", "5", "--synth", "5,1,30,1"]);
    assert_ne!(code, 0);
    assert!(err.contains("cannot be used with"), "{err}");
}

#[test]
fn run_refuses_a_list() {
    let (code, _, err) = run(&["run", "--constant-mw", "5,10"]);
    assert_eq!(code, 1);
    assert!(err.contains("sweep"), "{err}");
}

#[test]
fn run_prints_one_result_row() {
    let (code, out, _) = run(&["run", "--constant-mw", "100", "--horizon-s", "600", "--scheduler", "os"]);
    assert_eq!(code, 0);
    let header: Vec<_> = out.lines().next().unwrap().split(',').collect();
    assert_eq!(header[0], "scheduler");
    assert!(header.contains(&"packets_sent"));
    let rows = rows(&out);
    assert_eq!(rows.len(), 1);
    let sent: u64 = rows[0][header.iter().position(|h| *h == "packets_sent").unwrap()]
        .parse()
        .unwrap();
    assert!(sent > 100);
}

#[test]
fn sweep_expands_the_cartesian_product() {
    let (code, out, _) = run(&[
        "sweep",
        "--constant-mw",
        "1,10,100",
        "--capacitance-mf",
        "20,40",
        "--payload-b",
        "5,50",
        "--scheduler",
        "us,cs",
        "--horizon-s",
        "120",
    ]);
    assert_eq!(code, 0);
    let rows = rows(&out);
    assert_eq!(rows.len(), 24);
    // first key outermost
    assert_eq!(&rows[0][0], "us");
    assert_eq!(&rows[23][0], "cs");
}

#[test]
fn sweep_reports_failed_scenarios_and_exits_nonzero() {
    // v_low above v_high is invalid for the second scenario only
    let (code, out, err) = run(&["sweep", "--constant-mw", "5", "--v-low", "2.5,3.2", "--horizon-s", "60"]);
    assert_eq!(code, 1);
    assert!(err.contains("1 scenario(s) failed"), "{err}");
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let i = rdr.headers().unwrap().iter().position(|h| h == "error").unwrap();
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0][i].is_empty());
    assert!(!rows[1][i].is_empty());
}

#[test]
fn missing_trace_file_is_named_in_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let (code, _, err) = run(&["sweep", "--trace", missing.to_str().unwrap(), "--horizon-s", "60"]);
    assert_eq!(code, 1);
    assert!(err.contains("missing.csv"), "{err}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.conf");
    std::fs::write(
        &cfg,
        "# comment\nscheduler = cs\ntrace = constant:100\nhorizon_s = 300\npayload_b = 50\n",
    )
    .unwrap();
    let (code, out, _) = run(&["run", "--config", cfg.to_str().unwrap(), "--payload-b", "5"]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let get = |k: &str| row[headers.iter().position(|h| h == k).unwrap()].to_string();
    assert_eq!(get("scheduler"), "cs");
    assert_eq!(get("payload_b"), "5");
    assert_eq!(get("horizon_s"), "300");
}

#[test]
fn set_accepts_any_key() {
    let (code, out, _) = run(&[
        "run",
        "--constant-mw",
        "100",
        "--set",
        "horizon_s=60",
        "--set",
        "seed=7",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains(",7,") || out.contains(",7\n"));
    let (code, _, err) = run(&["run", "--set", "nonsense=1"]);
    assert_eq!(code, 1);
    assert!(err.contains("nonsense"));
}

#[test]
fn airtime_table_check_passes() {
    let (code, out, _) = run(&["airtime", "--check-table1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("51.46"));
    assert!(out.contains("338.43"));
}

#[test]
fn trace_gen_is_deterministic_and_covers_the_horizon() {
    let (code, a, _) = run(&["trace-gen", "--synth", "10,5,30,42"]);
    assert_eq!(code, 0);
    let (_, b, _) = run(&["trace-gen", "--synth", "10,5,30,42"]);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 32_401);
    let (_, c, _) = run(&["trace-gen", "--synth", "10,5,30,43"]);
    assert_ne!(a, c);
}

#[test]
fn trace_file_round_trips_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let (code, _, _) = run(&[
        "trace-gen",
        "--constant-mw",
        "100",
        "--horizon-s",
        "600",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let events = dir.path().join("events.tsv");
    let series = dir.path().join("series.csv");
    let (code, out, err) = run(&[
        "run",
        "--trace",
        trace.to_str().unwrap(),
        "--horizon-s",
        "600",
        "--events",
        events.to_str().unwrap(),
        "--series",
        series.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let (_, constant, _) = run(&["run", "--constant-mw", "100", "--horizon-s", "600"]);
    let sent = |text: &str| {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let i = rdr.headers().unwrap().iter().position(|h| h == "packets_sent").unwrap();
        rdr.records().next().unwrap().unwrap()[i].to_string()
    };
    assert_eq!(sent(&out), sent(&constant));
    assert!(std::fs::read_to_string(events).unwrap().starts_with("time_s\tevent"));
    assert_eq!(std::fs::read_to_string(series).unwrap().lines().count(), 1 + 5);
}
