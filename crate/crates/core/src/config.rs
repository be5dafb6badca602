//! Scenario configuration, its flat `key = value` text form, and the
//! cartesian expansion of list-valued keys into a sweep.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::energy::{HarvesterParams, LoadProfile, Thresholds, DEFAULT_WAKE_UP_DURATION};
use crate::error::{config, Result};
use crate::mac::{check_sf, AckWindow, ChannelPlan, RadioParams, Traffic, TxCycleSpec};
use crate::scheduler::{Policy, SchedulerPolicy};
use crate::trace::{synth_stochastic, HarvestTrace, SynthParams};

pub const DEFAULT_HORIZON: f64 = 32_400.0;
pub const DEFAULT_GENERATION_INTERVAL: f64 = 4.0;
pub const DEFAULT_CAPACITANCE: f64 = 0.040;
pub const DEFAULT_TRACE_DT: f64 = 1.0;

/// Where a scenario's harvested power comes from.
#[derive(Debug, Clone)]
pub enum TraceSource {
    /// Constant power in watts.
    Constant(f64),
    /// Synthetic autoregressive trace (watts, watts, seconds), seeded by the
    /// scenario seed and sampled every `trace_dt` seconds.
    Synthetic {
        mean: f64,
        stddev: f64,
        correlation_time: f64,
    },
    File(PathBuf),
    /// An already-loaded trace. `label` is what the config echo shows.
    Loaded {
        label: String,
        trace: Arc<HarvestTrace>,
    },
}

impl PartialEq for TraceSource {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

impl fmt::Display for TraceSource {
    /// Powers are shown in milliwatts, matching the trace file unit.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceSource::Constant(p) => write!(f, "constant:{}", p * 1e3),
            TraceSource::Synthetic {
                mean,
                stddev,
                correlation_time,
            } => {
                write!(f, "synth:{},{},{}", mean * 1e3, stddev * 1e3, correlation_time)
            }
            TraceSource::File(path) => write!(f, "file:{}", path.display()),
            TraceSource::Loaded { label, .. } => f.write_str(label),
        }
    }
}

impl TraceSource {
    /// Parses `constant:<mW>`, `synth:<mean mW>,<std mW>,<tau s>` or
    /// `file:<path>`; a bare value is taken as a file path.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(p) = s.strip_prefix("constant:") {
            let mw = parse_f64("constant power", p)?;
            if !(mw >= 0.0 && mw.is_finite()) {
                return Err(config(format!(
                    "constant power must be finite and non-negative, got {mw} mW"
                )));
            }
            return Ok(TraceSource::Constant(mw / 1e3));
        }
        if let Some(rest) = s.strip_prefix("synth:") {
            let v = parse_list(rest)?;
            let [mean, stddev, tau] = v[..] else {
                return Err(config(format!("synthetic trace needs mean,std,tau, got `{rest}`")));
            };
            return Ok(TraceSource::Synthetic {
                mean: mean / 1e3,
                stddev: stddev / 1e3,
                correlation_time: tau,
            });
        }
        let path = s.strip_prefix("file:").unwrap_or(s);
        if path.is_empty() {
            return Err(config("empty trace path"));
        }
        Ok(TraceSource::File(PathBuf::from(path)))
    }

    /// Reads a file source once so that every scenario sharing it reuses
    /// the samples. Other sources are returned unchanged.
    pub fn preload(&self) -> Result<Self> {
        match self {
            TraceSource::File(path) => Ok(TraceSource::Loaded {
                label: self.to_string(),
                trace: Arc::new(HarvestTrace::read_csv(path)?.rebased()),
            }),
            other => Ok(other.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub horizon: f64,
    pub generation_interval: f64,
    pub capacitance: f64,
    pub cycle: TxCycleSpec,
    pub channels: ChannelPlan,
    pub thresholds: Thresholds,
    pub harvester: HarvesterParams,
    pub loads: LoadProfile,
    pub wake_up_duration: f64,
    pub initial_voltage: f64,
    pub trace: TraceSource,
    pub trace_dt: f64,
    pub policy: Policy,
    pub seed: u64,
    pub generate_while_off: bool,
    /// Extends the cycle the schedulers reason about with the sleep that
    /// follows it until the duty-cycle gate reopens.
    pub guard_sleep: bool,
    pub recheck_interval: f64,
    pub os_grid: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            generation_interval: DEFAULT_GENERATION_INTERVAL,
            capacitance: DEFAULT_CAPACITANCE,
            cycle: TxCycleSpec::default(),
            channels: ChannelPlan::default(),
            thresholds: Thresholds::default(),
            harvester: HarvesterParams::default(),
            loads: LoadProfile::default(),
            wake_up_duration: DEFAULT_WAKE_UP_DURATION,
            initial_voltage: 0.0,
            trace: TraceSource::Constant(0.0),
            trace_dt: DEFAULT_TRACE_DT,
            policy: Policy::Unaware,
            seed: 0,
            generate_while_off: false,
            guard_sleep: true,
            recheck_interval: 0.1,
            os_grid: 0.1,
        }
    }
}

/// Keys in the order they appear in the config echo and results CSV.
pub const CONFIG_KEYS: &[&str] = &[
    "scheduler",
    "capacitance_mf",
    "payload_b",
    "sf",
    "traffic",
    "ack_window",
    "rx2_sf",
    "trace",
    "trace_dt_s",
    "seed",
    "horizon_s",
    "interval_s",
    "v_low",
    "v_high",
    "initial_v",
    "source_v",
    "min_power_w",
    "wake_up_s",
    "load.off",
    "load.sleep",
    "load.wake_up",
    "load.tx",
    "load.idle",
    "load.rx",
    "uplink_dc",
    "downlink_dc",
    "rx1_delay_s",
    "rx2_delay_s",
    "rx_symbols",
    "generate_while_off",
    "guard_sleep",
    "recheck_s",
    "os_grid_s",
];

/// Keys whose values are never split on commas.
const SCALAR_KEYS: &[&str] = &["trace", "synth"];

impl ScenarioConfig {
    pub fn scheduler(&self) -> SchedulerPolicy {
        SchedulerPolicy {
            policy: self.policy,
            generation_interval: self.generation_interval,
            recheck_interval: self.recheck_interval,
            os_grid: self.os_grid,
        }
    }

    /// Sets one key from its text form. Besides [`CONFIG_KEYS`] this
    /// accepts the shorthands `constant_mw`, `synth` (`mean,std,tau,seed`)
    /// and `trace_file`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let f = || parse_f64(key, v);
        match key.trim() {
            "scheduler" => self.policy = v.parse()?,
            "capacitance_mf" => self.capacitance = f()? / 1e3,
            "payload_b" => self.cycle.payload = parse_int(key, v)?,
            "sf" => {
                let sf = parse_int(key, v)?;
                check_sf(sf)?;
                self.cycle.radio = RadioParams {
                    spreading_factor: sf,
                    ..self.cycle.radio
                };
            }
            "traffic" => {
                self.cycle.traffic = match v.to_ascii_lowercase().as_str() {
                    "confirmed" => Traffic::Confirmed,
                    "unconfirmed" => Traffic::Unconfirmed,
                    _ => return Err(config(format!("traffic must be confirmed or unconfirmed, got `{v}`"))),
                }
            }
            "ack_window" => {
                self.cycle.ack_window = match v.to_ascii_lowercase().as_str() {
                    "rx1" => AckWindow::Rx1,
                    "rx2" => AckWindow::Rx2,
                    "none" => AckWindow::None,
                    _ => return Err(config(format!("ack_window must be rx1, rx2 or none, got `{v}`"))),
                }
            }
            "rx2_sf" => {
                let sf = parse_int(key, v)?;
                check_sf(sf)?;
                self.cycle.rx2_spreading_factor = sf;
                self.channels.rx2_spreading_factor = sf;
            }
            "trace" => self.trace = TraceSource::parse(v)?,
            "trace_file" => self.trace = TraceSource::File(PathBuf::from(v)),
            "constant_mw" => self.trace = TraceSource::parse(&format!("constant:{v}"))?,
            "synth" => {
                let parts: Vec<&str> = v.split(',').collect();
                let [mean, std, tau, seed] = parts[..] else {
                    return Err(config(format!("synth needs mean,std,tau,seed, got `{v}`")));
                };
                self.trace = TraceSource::parse(&format!("synth:{mean},{std},{tau}"))?;
                self.seed = parse_int(key, seed)?;
            }
            "trace_dt_s" => self.trace_dt = f()?,
            "seed" => self.seed = parse_int(key, v)?,
            "horizon_s" => self.horizon = f()?,
            "interval_s" => self.generation_interval = f()?,
            "v_low" => self.thresholds.v_low = f()?,
            "v_high" => self.thresholds.v_high = f()?,
            "initial_v" => self.initial_voltage = f()?,
            "source_v" => self.harvester.source_voltage = f()?,
            "min_power_w" => self.harvester.min_power_floor = f()?,
            "wake_up_s" => self.wake_up_duration = f()?,
            "load.off" => self.loads.off = f()?,
            "load.sleep" => self.loads.sleep = f()?,
            "load.wake_up" => self.loads.wake_up = f()?,
            "load.tx" => self.loads.tx = f()?,
            "load.idle" => self.loads.idle = f()?,
            "load.rx" => self.loads.rx = f()?,
            "uplink_dc" => self.channels.uplink_duty_cycle = f()?,
            "downlink_dc" => self.channels.downlink_duty_cycle = f()?,
            "rx1_delay_s" => self.cycle.rx1_delay = f()?,
            "rx2_delay_s" => self.cycle.rx2_delay = f()?,
            "rx_symbols" => self.cycle.rx_window_symbols = f()?,
            "generate_while_off" => self.generate_while_off = parse_bool(key, v)?,
            "guard_sleep" => self.guard_sleep = parse_bool(key, v)?,
            "recheck_s" => self.recheck_interval = f()?,
            "os_grid_s" => self.os_grid = f()?,
            other => return Err(config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Text value of `key`, as accepted back by [`ScenarioConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "scheduler" => self.policy.to_string(),
            "capacitance_mf" => (self.capacitance * 1e3).to_string(),
            "payload_b" => self.cycle.payload.to_string(),
            "sf" => self.cycle.radio.spreading_factor.to_string(),
            "traffic" => self.cycle.traffic.as_str().to_string(),
            "ack_window" => self.cycle.ack_window.as_str().to_string(),
            "rx2_sf" => self.cycle.rx2_spreading_factor.to_string(),
            "trace" => self.trace.to_string(),
            "trace_dt_s" => self.trace_dt.to_string(),
            "seed" => self.seed.to_string(),
            "horizon_s" => self.horizon.to_string(),
            "interval_s" => self.generation_interval.to_string(),
            "v_low" => self.thresholds.v_low.to_string(),
            "v_high" => self.thresholds.v_high.to_string(),
            "initial_v" => self.initial_voltage.to_string(),
            "source_v" => self.harvester.source_voltage.to_string(),
            "min_power_w" => self.harvester.min_power_floor.to_string(),
            "wake_up_s" => self.wake_up_duration.to_string(),
            "load.off" => self.loads.off.to_string(),
            "load.sleep" => self.loads.sleep.to_string(),
            "load.wake_up" => self.loads.wake_up.to_string(),
            "load.tx" => self.loads.tx.to_string(),
            "load.idle" => self.loads.idle.to_string(),
            "load.rx" => self.loads.rx.to_string(),
            "uplink_dc" => self.channels.uplink_duty_cycle.to_string(),
            "downlink_dc" => self.channels.downlink_duty_cycle.to_string(),
            "rx1_delay_s" => self.cycle.rx1_delay.to_string(),
            "rx2_delay_s" => self.cycle.rx2_delay.to_string(),
            "rx_symbols" => self.cycle.rx_window_symbols.to_string(),
            "generate_while_off" => self.generate_while_off.to_string(),
            "guard_sleep" => self.guard_sleep.to_string(),
            "recheck_s" => self.recheck_interval.to_string(),
            "os_grid_s" => self.os_grid.to_string(),
            _ => return None,
        };
        Some(s)
    }

    /// Every key with its value, in [`CONFIG_KEYS`] order.
    pub fn echo(&self) -> Vec<(String, String)> {
        CONFIG_KEYS
            .iter()
            .map(|k| (k.to_string(), self.get(k).expect("known key")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.capacitance > 0.0 && self.capacitance.is_finite()) {
            return Err(config(format!(
                "capacitance must be positive, got {}",
                self.capacitance
            )));
        }
        if !(self.initial_voltage >= 0.0 && self.initial_voltage <= self.harvester.source_voltage) {
            return Err(config(format!(
                "initial voltage must lie in [0, source voltage], got {}",
                self.initial_voltage
            )));
        }
        if !(self.wake_up_duration >= 0.0) {
            return Err(config("wake-up duration must be non-negative"));
        }
        if !(self.trace_dt > 0.0) {
            return Err(config("trace_dt_s must be positive"));
        }
        self.harvester.validate()?;
        self.loads.validate()?;
        self.thresholds.validate(self.harvester.source_voltage)?;
        self.channels.validate()?;
        self.cycle.validate()?;
        self.scheduler().validate(&self.thresholds)?;
        Ok(())
    }

    /// Materialises the harvest trace for this scenario.
    pub fn load_trace(&self) -> Result<Arc<HarvestTrace>> {
        match &self.trace {
            TraceSource::Constant(p) => Ok(Arc::new(HarvestTrace::constant(*p)?)),
            TraceSource::Synthetic {
                mean,
                stddev,
                correlation_time,
            } => {
                let params = SynthParams {
                    mean: *mean,
                    stddev: *stddev,
                    correlation_time: *correlation_time,
                    seed: self.seed,
                };
                Ok(Arc::new(synth_stochastic(&params, self.horizon, self.trace_dt)?))
            }
            TraceSource::File(path) => Ok(Arc::new(HarvestTrace::read_csv(path)?.rebased())),
            TraceSource::Loaded { trace, .. } => Ok(Arc::clone(trace)),
        }
    }
}

/// Ordered `key -> values` assignments. Later assignments to the same key
/// replace earlier ones in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignments {
    entries: Vec<(String, Vec<String>)>,
}

impl Assignments {
    pub fn new() -> Self {
        Self::default()
    }

    /// Splits `value` on commas unless the key takes comma-bearing values.
    pub fn set(&mut self, key: &str, value: &str) {
        let values = if SCALAR_KEYS.contains(&key) {
            vec![value.trim().to_string()]
        } else {
            value.split(',').map(|s| s.trim().to_string()).collect()
        };
        self.set_values(key, values);
    }

    pub fn set_values(&mut self, key: &str, values: Vec<String>) {
        let slot = slot_of(key);
        if let Some(e) = self.entries.iter_mut().find(|(k, _)| slot_of(k) == slot) {
            *e = (key.to_string(), values);
        } else {
            self.entries.push((key.to_string(), values));
        }
    }

    pub fn merge(&mut self, other: &Assignments) {
        for (k, v) in &other.entries {
            self.set_values(k, v.clone());
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of scenarios the cartesian product yields.
    pub fn scenario_count(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.len()).product()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(config(format!("line {}: expected `key = value`, got `{line}`", i + 1)));
            };
            out.set(k.trim(), v);
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// One config per element of the cartesian product, first key
    /// outermost.
    pub fn expand(&self, base: &ScenarioConfig) -> Result<Vec<ScenarioConfig>> {
        let mut configs = vec![base.clone()];
        for (key, values) in &self.entries {
            if values.is_empty() {
                return Err(config(format!("key `{key}` has no values")));
            }
            let mut next = Vec::with_capacity(configs.len() * values.len());
            for c in &configs {
                for v in values {
                    let mut c = c.clone();
                    c.set(key, v)?;
                    next.push(c);
                }
            }
            configs = next;
        }
        // one read per distinct file, shared by every scenario using it
        let mut loaded: Vec<(String, TraceSource)> = Vec::new();
        for c in &mut configs {
            if let TraceSource::File(_) = c.trace {
                let label = c.trace.to_string();
                match loaded.iter().find(|(l, _)| *l == label) {
                    Some((_, t)) => c.trace = t.clone(),
                    None => {
                        c.trace = c.trace.preload()?;
                        loaded.push((label, c.trace.clone()));
                    }
                }
            }
        }
        Ok(configs)
    }
}

/// The trace shorthands all assign the same slot.
fn slot_of(key: &str) -> &str {
    match key {
        "constant_mw" | "synth" | "trace_file" => "trace",
        k => k,
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| config(format!("`{key}` expects a number, got `{v}`")))
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| config(format!("`{key}` expects an integer, got `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(config(format!("`{key}` expects true or false, got `{v}`"))),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|p| parse_f64("list", p)).collect()
}
