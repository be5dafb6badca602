//! Evaluation metrics computed from an event log, and the results CSV.

use std::io::{Read, Write};

use crate::config::{ScenarioConfig, CONFIG_KEYS};
use crate::device::DeviceState;
use crate::engine::{EventKind, EventLog};
use crate::error::{domain, Error, Result};

pub const DEFAULT_BUCKET: f64 = 120.0;

pub const METRIC_COLUMNS: &[&str] = &[
    "packets_sent",
    "p_max",
    "efficiency_pct",
    "on_fraction",
    "off_fraction",
    "charging_fraction",
    "mean_inter_tx_s",
    "stddev_inter_tx_s",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Every configuration key with its value.
    pub config: Vec<(String, String)>,
    pub packets_sent: u64,
    pub p_max: u64,
    pub efficiency_pct: f64,
    pub on_fraction: f64,
    pub off_fraction: f64,
    pub charging_fraction: f64,
    pub mean_inter_tx: Option<f64>,
    pub stddev_inter_tx: Option<f64>,
}

impl MetricsReport {
    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Duty-cycle-limited packet budget `sim_time / (100 t_packet)`, unfloored.
pub fn p_max_ratio(sim_time: f64, t_packet: f64) -> f64 {
    sim_time / (100.0 * t_packet)
}

pub fn p_max(sim_time: f64, t_packet: f64) -> u64 {
    p_max_ratio(sim_time, t_packet).floor() as u64
}

/// Packets sent as a percentage of the duty-cycle budget.
pub fn efficiency(p_sent: u64, sim_time: f64, t_packet: f64) -> Result<f64> {
    if !(t_packet > 0.0) {
        return Err(domain(format!("packet airtime must be positive, got {t_packet}")));
    }
    Ok(100.0 * p_sent as f64 / p_max_ratio(sim_time, t_packet))
}

/// Time the device first left the charging phase, if it ever did.
pub fn first_activation(log: &EventLog) -> Option<f64> {
    log.iter().find_map(|r| match r.kind {
        EventKind::State {
            from: DeviceState::Charging,
            ..
        } => Some(r.time),
        _ => None,
    })
}

/// Start times of the uplinks that completed.
pub fn send_times(log: &EventLog) -> Vec<f64> {
    log.iter()
        .filter_map(|r| match r.kind {
            EventKind::TxDone { start } => Some(start),
            _ => None,
        })
        .collect()
}

/// Mean and population standard deviation of the gaps between
/// successive completed uplinks after the first activation; `None` with
/// fewer than two such uplinks.
pub fn inter_tx_stats(log: &EventLog) -> Option<(f64, f64)> {
    let activated = first_activation(log)?;
    let starts: Vec<f64> = send_times(log).into_iter().filter(|&t| t >= activated).collect();
    gap_stats(&starts)
}

pub fn gap_stats(starts: &[f64]) -> Option<(f64, f64)> {
    if starts.len() < 2 {
        return None;
    }
    let gaps: Vec<f64> = starts.windows(2).map(|w| w[1] - w[0]).collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFractions {
    pub on: f64,
    pub off: f64,
    pub charging: f64,
}

/// Share of `[0, horizon]` spent charging (before the first activation),
/// off (after it), and on.
pub fn time_fractions(log: &EventLog, horizon: f64) -> TimeFractions {
    let charging = first_activation(log).unwrap_or(horizon).min(horizon);
    let mut off = 0.0;
    let mut off_since: Option<f64> = None;
    for r in log.iter() {
        if let EventKind::State { from, to } = r.kind {
            if to == DeviceState::Off {
                off_since = Some(r.time);
            } else if from == DeviceState::Off {
                off += r.time - off_since.take().unwrap_or(r.time);
            }
        }
    }
    if let Some(t) = off_since {
        off += horizon - t.min(horizon);
    }
    let charging = charging / horizon;
    let off = off / horizon;
    TimeFractions {
        on: 1.0 - charging - off,
        off,
        charging,
    }
}

/// Completed uplinks per `bucket`-second interval of `[0, horizon)`,
/// keyed by start time.
pub fn packet_series(log: &EventLog, horizon: f64, bucket: f64) -> Result<Vec<u64>> {
    if !(bucket > 0.0) {
        return Err(domain(format!("bucket width must be positive, got {bucket}")));
    }
    let n = (horizon / bucket).ceil().max(1.0) as usize;
    let mut counts = vec![0u64; n];
    for t in send_times(log) {
        counts[((t / bucket) as usize).min(n - 1)] += 1;
    }
    Ok(counts)
}

/// Writes `bucket_start_s,packets` rows.
pub fn write_series(w: &mut impl Write, series: &[u64], bucket: f64) -> Result<()> {
    writeln!(w, "bucket_start_s,packets")?;
    for (i, c) in series.iter().enumerate() {
        writeln!(w, "{},{}", i as f64 * bucket, c)?;
    }
    Ok(())
}

pub fn compute_metrics(cfg: &ScenarioConfig, log: &EventLog) -> Result<MetricsReport> {
    let toa = cfg.cycle.uplink_airtime()?;
    let packets_sent = send_times(log).len() as u64;
    let fractions = time_fractions(log, cfg.horizon);
    let stats = inter_tx_stats(log);
    Ok(MetricsReport {
        config: cfg.echo(),
        packets_sent,
        p_max: p_max(cfg.horizon, toa),
        efficiency_pct: efficiency(packets_sent, cfg.horizon, toa)?,
        on_fraction: fractions.on,
        off_fraction: fractions.off,
        charging_fraction: fractions.charging,
        mean_inter_tx: stats.map(|s| s.0),
        stddev_inter_tx: stats.map(|s| s.1),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV row per entry: config keys, metrics, then an `error` column
/// that is empty for successful runs.
pub fn write_results<'a, W: Write>(
    w: W,
    rows: impl IntoIterator<Item = (Vec<(String, String)>, std::result::Result<&'a MetricsReport, String>)>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<&str> = CONFIG_KEYS
        .iter()
        .chain(METRIC_COLUMNS)
        .copied()
        .chain(["error"])
        .collect();
    out.write_record(&header)?;
    for (config, result) in rows {
        let mut record: Vec<String> = CONFIG_KEYS
            .iter()
            .map(|k| {
                config
                    .iter()
                    .find(|(c, _)| c == k)
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default()
            })
            .collect();
        match result {
            Ok(r) => {
                record.extend([
                    r.packets_sent.to_string(),
                    r.p_max.to_string(),
                    r.efficiency_pct.to_string(),
                    r.on_fraction.to_string(),
                    r.off_fraction.to_string(),
                    r.charging_fraction.to_string(),
                    opt(r.mean_inter_tx),
                    opt(r.stddev_inter_tx),
                    String::new(),
                ]);
            }
            Err(e) => {
                record.extend(std::iter::repeat_n(String::new(), METRIC_COLUMNS.len()));
                record.push(e);
            }
        }
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

/// Results CSV for successful runs only.
pub fn write_report(w: impl Write, reports: &[MetricsReport]) -> Result<()> {
    write_results(w, reports.iter().map(|r| (r.config.clone(), Ok(r))))
}

/// Parses a results CSV back; rows carrying an error are skipped.
pub fn read_report(r: impl Read) -> Result<Vec<MetricsReport>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("missing column {name}")))
    };
    let idx: Vec<usize> = METRIC_COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let err_col = col("error")?;
    let bad = |s: &str| Error::Config(format!("unparseable value `{s}` in results"));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if !rec[err_col].is_empty() {
            continue;
        }
        let f = |i: usize| rec[idx[i]].parse::<f64>().map_err(|_| bad(&rec[idx[i]]));
        let u = |i: usize| rec[idx[i]].parse::<u64>().map_err(|_| bad(&rec[idx[i]]));
        let o = |i: usize| {
            if rec[idx[i]].is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        let config = CONFIG_KEYS
            .iter()
            .filter_map(|k| {
                headers
                    .iter()
                    .position(|h| h == *k)
                    .map(|p| (k.to_string(), rec[p].to_string()))
            })
            .collect();
        out.push(MetricsReport {
            config,
            packets_sent: u(0)?,
            p_max: u(1)?,
            efficiency_pct: f(2)?,
            on_fraction: f(3)?,
            off_fraction: f(4)?,
            charging_fraction: f(5)?,
            mean_inter_tx: o(6)?,
            stddev_inter_tx: o(7)?,
        });
    }
    Ok(out)
}
