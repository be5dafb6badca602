//! Command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::config::{Assignments, ScenarioConfig};
use crate::engine::{run_scenario, sweep};
use crate::mac::{max_payload, min_tx_interval, time_on_air, RadioParams};
use crate::metrics::{packet_series, write_results, write_series, DEFAULT_BUCKET};
use crate::trace::{synth_constant, synth_stochastic, SynthParams};

/// Airtimes of the 13-byte-overhead frames in the reference table, ms.
pub const TABLE1: &[(u8, usize, f64)] = &[
    (7, 0, 46.34),
    (7, 5, 51.46),
    (7, 50, 118.02),
    (7, 100, 189.70),
    (8, 0, 82.43),
    (8, 5, 92.67),
    (8, 50, 215.55),
    (8, 100, 338.43),
];

pub const TABLE1_TOLERANCE: f64 = 0.005;

#[derive(Debug, Parser)]
#[command(name = "ehlora", version, about = "Battery-less LoRaWAN end-device simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run exactly one scenario.
    Run(ScenarioArgs),
    /// Run the cartesian product of all list-valued flags.
    Sweep(ScenarioArgs),
    /// Print LoRa airtimes and duty-cycle intervals.
    Airtime(AirtimeArgs),
    /// Write a synthetic harvest trace.
    TraceGen(TraceGenArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").multiple(false))]
pub struct ScenarioArgs {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trace file with `time_s,power_mW` lines.
    #[arg(long, group = "source")]
    pub trace: Option<PathBuf>,
    /// Constant harvested power in mW (list allowed).
    #[arg(long, group = "source")]
    pub constant_mw: Option<String>,
    /// Synthetic trace: `mean_mW,std_mW,tau_s,seed`.
    #[arg(long, group = "source")]
    pub synth: Option<String>,
    #[arg(long)]
    pub capacitance_mf: Option<String>,
    #[arg(long)]
    pub payload_b: Option<String>,
    #[arg(long)]
    pub sf: Option<String>,
    /// `us`, `os`, `cs`, `fs[:v_th]`, `as[:x]`, `mins[:x]`, `aves[:g[:x]]` (list allowed).
    #[arg(long)]
    pub scheduler: Option<String>,
    /// `confirmed` or `unconfirmed`.
    #[arg(long)]
    pub traffic: Option<String>,
    /// `rx1` or `rx2`.
    #[arg(long)]
    pub ack_window: Option<String>,
    #[arg(long)]
    pub rx2_sf: Option<String>,
    #[arg(long)]
    pub horizon_s: Option<String>,
    #[arg(long)]
    pub interval_s: Option<String>,
    #[arg(long)]
    pub v_low: Option<String>,
    #[arg(long)]
    pub v_high: Option<String>,
    #[arg(long)]
    pub initial_v: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub generate_while_off: bool,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Results CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Event log (single run only).
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Per-interval packet counts (single run only).
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BUCKET)]
    pub bucket_s: f64,
}

#[derive(Debug, Args)]
pub struct AirtimeArgs {
    #[arg(long, default_value = "7,8", value_delimiter = ',')]
    pub sf: Vec<u8>,
    #[arg(long, default_value = "0,5,50,100", value_delimiter = ',')]
    pub payload_b: Vec<usize>,
    /// Compare against the reference table and fail on a mismatch.
    #[arg(long)]
    pub check_table1: bool,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).multiple(false))]
pub struct TraceGenArgs {
    #[arg(long, group = "source")]
    pub constant_mw: Option<f64>,
    /// `mean_mW,std_mW,tau_s,seed`.
    #[arg(long, group = "source")]
    pub synth: Option<String>,
    #[arg(long, default_value_t = 32_400.0)]
    pub horizon_s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub dt_s: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A parsed invocation: the command plus the merged configuration.
#[derive(Debug)]
pub struct RunSpec {
    pub command: Command,
    pub assignments: Assignments,
}

pub fn parse_args<I, T>(argv: I) -> Result<RunSpec, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let assignments = match &cli.command {
        Command::Run(a) | Command::Sweep(a) => flag_assignments(a),
        _ => Assignments::new(),
    };
    Ok(RunSpec {
        command: cli.command,
        assignments,
    })
}

fn flag_assignments(a: &ScenarioArgs) -> Assignments {
    let mut out = Assignments::new();
    if let Some(p) = &a.trace {
        out.set("trace_file", &p.to_string_lossy());
    }
    let pairs = [
        ("constant_mw", &a.constant_mw),
        ("synth", &a.synth),
        ("capacitance_mf", &a.capacitance_mf),
        ("payload_b", &a.payload_b),
        ("sf", &a.sf),
        ("scheduler", &a.scheduler),
        ("traffic", &a.traffic),
        ("ack_window", &a.ack_window),
        ("rx2_sf", &a.rx2_sf),
        ("horizon_s", &a.horizon_s),
        ("interval_s", &a.interval_s),
        ("v_low", &a.v_low),
        ("v_high", &a.v_high),
        ("initial_v", &a.initial_v),
        ("seed", &a.seed),
    ];
    for (k, v) in pairs {
        if let Some(v) = v {
            out.set(k, v);
        }
    }
    if a.generate_while_off {
        out.set("generate_while_off", "true");
    }
    for kv in &a.set {
        match kv.split_once('=') {
            Some((k, v)) => out.set(k.trim(), v),
            None => out.set(kv.trim(), ""),
        }
    }
    out
}

/// Configs for a run or sweep: file entries first, flags on top.
pub fn scenario_configs(args: &ScenarioArgs, flags: &Assignments) -> anyhow::Result<Vec<ScenarioConfig>> {
    let mut all = match &args.config {
        Some(p) => Assignments::read(p).with_context(|| format!("reading {}", p.display()))?,
        None => Assignments::new(),
    };
    all.merge(flags);
    Ok(all.expand(&ScenarioConfig::default())?)
}

fn output<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> anyhow::Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(stdout),
    })
}

pub fn cmd_run(args: &ScenarioArgs, flags: &Assignments, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let configs = scenario_configs(args, flags)?;
    if configs.len() != 1 {
        bail!(
            "`run` takes exactly one scenario but the flags describe {}; use `sweep`",
            configs.len()
        );
    }
    let cfg = &configs[0];
    let (log, report) = run_scenario(cfg)?;
    if let Some(p) = &args.events {
        let mut w = output(&Some(p.clone()), stdout)?;
        log.write_to(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &args.series {
        let series = packet_series(&log, cfg.horizon, args.bucket_s)?;
        let mut w = output(&Some(p.clone()), stdout)?;
        write_series(&mut w, &series, args.bucket_s)?;
        w.flush()?;
    }
    let mut w = output(&args.out, stdout)?;
    write_results(&mut w, [(report.config.clone(), Ok(&report))])?;
    w.flush()?;
    Ok(())
}

/// Returns the number of failed scenarios.
pub fn cmd_sweep(args: &ScenarioArgs, flags: &Assignments, stdout: &mut dyn Write) -> anyhow::Result<usize> {
    if args.events.is_some() || args.series.is_some() {
        bail!("--events and --series apply to `run` only");
    }
    let configs = scenario_configs(args, flags)?;
    let results = sweep(&configs);
    let failed = results.iter().filter(|r| r.is_err()).count();
    let mut w = output(&args.out, stdout)?;
    write_results(
        &mut w,
        configs
            .iter()
            .zip(&results)
            .map(|(c, r)| (c.echo(), r.as_ref().map_err(|e| e.to_string()))),
    )?;
    w.flush()?;
    Ok(failed)
}

/// Prints the airtime table; returns the number of reference mismatches
/// when `--check-table1` is set.
pub fn cmd_airtime(args: &AirtimeArgs, stdout: &mut dyn Write) -> anyhow::Result<usize> {
    writeln!(stdout, "sf,payload_b,toa_ms,min_interval_s")?;
    if args.check_table1 {
        let mut mismatches = 0;
        for &(sf, pl, expected_ms) in TABLE1 {
            let toa = time_on_air(&RadioParams::with_sf(sf), pl)?;
            let rel = (toa * 1e3 - expected_ms).abs() / expected_ms;
            let verdict = if rel <= TABLE1_TOLERANCE { "ok" } else { "MISMATCH" };
            if rel > TABLE1_TOLERANCE {
                mismatches += 1;
            }
            writeln!(
                stdout,
                "{sf},{pl},{:.2},{:.2},{verdict} (ref {expected_ms})",
                toa * 1e3,
                min_tx_interval(toa, 0.01)
            )?;
        }
        return Ok(mismatches);
    }
    for &sf in &args.sf {
        for &pl in &args.payload_b {
            if pl > max_payload(sf) {
                bail!("payload of {pl} B exceeds the {} B limit at SF{sf}", max_payload(sf));
            }
            let toa = time_on_air(&RadioParams::with_sf(sf), pl)?;
            writeln!(stdout, "{sf},{pl},{:.2},{:.2}", toa * 1e3, min_tx_interval(toa, 0.01))?;
        }
    }
    Ok(0)
}

pub fn cmd_trace_gen(args: &TraceGenArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let trace = match (&args.constant_mw, &args.synth) {
        (Some(p), _) => synth_constant(p / 1e3, args.horizon_s, args.dt_s)?,
        (None, Some(s)) => {
            let v: Vec<&str> = s.split(',').map(str::trim).collect();
            let [mean, std, tau, seed] = v[..] else {
                bail!("--synth expects mean,std,tau,seed");
            };
            let params = SynthParams {
                mean: mean.parse::<f64>().context("synth mean")? / 1e3,
                stddev: std.parse::<f64>().context("synth std")? / 1e3,
                correlation_time: tau.parse().context("synth tau")?,
                seed: seed.parse().context("synth seed")?,
            };
            synth_stochastic(&params, args.horizon_s, args.dt_s)?
        }
        (None, None) => bail!("a trace source is required"),
    };
    let mut w = output(&args.out, stdout)?;
    trace.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Runs the CLI and returns the process exit code.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let spec = match parse_args(argv) {
        Ok(s) => s,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    let result = match &spec.command {
        Command::Run(a) => cmd_run(a, &spec.assignments, stdout).map(|_| 0),
        Command::Sweep(a) => cmd_sweep(a, &spec.assignments, stdout).map(|failed| {
            if failed > 0 {
                let _ = writeln!(stderr, "{failed} scenario(s) failed; see the error column");
                1
            } else {
                0
            }
        }),
        Command::Airtime(a) => cmd_airtime(a, stdout).map(|m| i32::from(m > 0)),
        Command::TraceGen(a) => cmd_trace_gen(a, stdout).map(|_| 0),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}
