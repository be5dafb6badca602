//! Harvested-power traces and the windowed statistics derived from them.
//!
//! A trace is a zero-order-hold signal: the power of a sample holds until
//! the next sample, and the last sample holds forever.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HarvestTrace {
    times: Vec<f64>,
    powers: Vec<f64>,
}

impl HarvestTrace {
    /// Builds a trace from `(time_s, power_w)` samples.
    pub fn new(samples: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (times, powers): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        if times.is_empty() {
            return Err(Error::Trace("trace has no samples".into()));
        }
        for (i, (&t, &p)) in times.iter().zip(&powers).enumerate() {
            if !t.is_finite() {
                return Err(Error::Trace(format!("sample {i}: timestamp {t} is not finite")));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::Trace(format!(
                    "sample {i}: power {p} must be finite and non-negative"
                )));
            }
            if i > 0 && t <= times[i - 1] {
                return Err(Error::Trace(format!(
                    "sample {i}: timestamps must be strictly increasing"
                )));
            }
        }
        Ok(Self { times, powers })
    }

    pub fn constant(power: f64) -> Result<Self> {
        Self::new([(0.0, power)])
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.powers.iter().copied())
    }

    /// The same signal shifted so that its first sample sits at time zero.
    pub fn rebased(&self) -> Self {
        let t0 = self.start();
        Self {
            times: self.times.iter().map(|t| t - t0).collect(),
            powers: self.powers.clone(),
        }
    }

    /// Index of the sample in force at `t` (`t` must not precede the trace).
    fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Power in force at time `t`.
    pub fn power_at(&self, t: f64) -> Result<f64> {
        if t < self.start() {
            return Err(domain(format!("time {t} precedes the trace start {}", self.start())));
        }
        Ok(self.powers[self.index_at(t)])
    }

    /// First sample timestamp strictly after `t`.
    pub fn next_sample_after(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&s| s <= t);
        self.times.get(i).copied()
    }

    /// Constant-power pieces covering `[from, from + duration)`, as
    /// `(duration, power)`; times before the trace start use the first sample.
    pub fn segments(&self, from: f64, duration: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let end = from + duration;
        let mut t = from;
        let mut i = if from < self.start() { 0 } else { self.index_at(from) };
        while t < end {
            let next = self.times.get(i + 1).copied().unwrap_or(f64::INFINITY).min(end);
            let next = if next <= t { end } else { next };
            out.push((next - t, self.powers[i]));
            t = next;
            i += 1;
            if i >= self.times.len() {
                i = self.times.len() - 1;
            }
        }
        out
    }

    fn clamp_window(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        if !(x > 0.0) {
            return Err(domain(format!("window length must be positive, got {x}")));
        }
        if t < self.start() {
            return Err(domain(format!("time {t} precedes the trace start {}", self.start())));
        }
        Ok(((t - x).max(self.start()), t))
    }

    /// Exact mean of the signal over `[t - x, t]`, or over the available
    /// prefix when the window reaches before the trace start.
    pub fn window_mean(&self, t: f64, x: f64) -> Result<f64> {
        let (a, b) = self.clamp_window(t, x)?;
        if b <= a {
            return self.power_at(t);
        }
        let energy: f64 = self.segments(a, b - a).iter().map(|&(dt, p)| dt * p).sum();
        Ok(energy / (b - a))
    }

    /// Minimum of the signal over `[t - x, t)`.
    pub fn window_min(&self, t: f64, x: f64) -> Result<f64> {
        let (a, b) = self.clamp_window(t, x)?;
        if b <= a {
            return self.power_at(t);
        }
        let lo = self.index_at(a);
        let hi = self.times.partition_point(|&s| s < b);
        Ok(self.powers[lo..hi.max(lo + 1)]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min))
    }

    /// Reads a `time_s,power_mW` text file; a non-numeric first line is a header.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file =
            std::fs::File::open(path).map_err(|e| Error::Trace(format!("cannot open {}: {e}", path.display())))?;
        Self::from_reader(file, path)
    }

    pub fn from_reader(reader: impl Read, label: &Path) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::TraceFormat {
            path: label.to_path_buf(),
            line,
            reason,
        };
        let mut samples = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split(',').map(str::trim);
            let (Some(t), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(bad(i + 1, "expected two comma-separated fields".into()));
            };
            match (t.parse::<f64>(), p.parse::<f64>()) {
                (Ok(t), Ok(p)) => samples.push((t, p / 1e3)),
                _ if samples.is_empty() && i == 0 => continue,
                _ => return Err(bad(i + 1, format!("cannot parse `{trimmed}`"))),
            }
        }
        Self::new(samples).map_err(|e| bad(0, e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// One `time_s,power_mW` line per sample, no header.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        for (t, p) in self.samples() {
            writeln!(w, "{},{}", t, to_milliwatts(p))?;
        }
        Ok(())
    }
}

/// Milliwatt value that reads back to exactly `watts` after division by 1e3.
fn to_milliwatts(watts: f64) -> f64 {
    let m = watts * 1e3;
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let bits = m.to_bits();
    [m, f64::from_bits(bits + 1), f64::from_bits(bits - 1)]
        .into_iter()
        .find(|c| c / 1e3 == watts)
        .unwrap_or(m)
}

/// Running window statistics over the last `window` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub window: f64,
    pub mean: f64,
    pub min: f64,
}

impl WindowStats {
    pub fn at(trace: &HarvestTrace, t: f64, window: f64) -> Result<Self> {
        Ok(Self {
            window,
            mean: trace.window_mean(t, window)?,
            min: trace.window_min(t, window)?,
        })
    }
}

/// Exponentially weighted mean and mean deviation of the windowed power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaEstimator {
    pub gain: f64,
    pub mean: f64,
    pub deviation: f64,
    pub window: f64,
}

impl EwmaEstimator {
    pub fn new(gain: f64, window: f64, initial_mean: f64) -> Result<Self> {
        if !(gain > 0.0 && gain <= 1.0) {
            return Err(domain(format!("EWMA gain must be in (0, 1], got {gain}")));
        }
        if !(window > 0.0) {
            return Err(domain(format!("window length must be positive, got {window}")));
        }
        Ok(Self {
            gain,
            mean: initial_mean,
            deviation: 0.0,
            window,
        })
    }

    /// Folds one windowed mean into the estimate. The deviation term uses
    /// the already-updated mean.
    pub fn update(&self, pbar: f64) -> Self {
        let g = self.gain;
        let mean = g * pbar + (1.0 - g) * self.mean;
        let deviation = g * (pbar - mean).abs() + (1.0 - g) * self.deviation;
        Self {
            mean,
            deviation,
            ..*self
        }
    }

    /// Predicted harvest: mean minus deviation, floored at zero.
    pub fn predict(&self) -> f64 {
        (self.mean - self.deviation).max(0.0)
    }
}

pub fn ewma_update(est: &EwmaEstimator, pbar: f64) -> EwmaEstimator {
    est.update(pbar)
}

pub fn ewma_predict(est: &EwmaEstimator) -> f64 {
    est.predict()
}

fn grid(duration: f64, dt: f64) -> Result<Vec<f64>> {
    if !(duration >= 0.0) {
        return Err(domain(format!("duration must be non-negative, got {duration}")));
    }
    if !(dt > 0.0) {
        return Err(domain(format!("sample spacing must be positive, got {dt}")));
    }
    let ratio = duration / dt;
    let n = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round()
    } else {
        ratio.floor()
    } as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

/// Uniform trace at `power` sampled every `dt` seconds over `[0, duration]`.
pub fn synth_constant(power: f64, duration: f64, dt: f64) -> Result<HarvestTrace> {
    if !(power >= 0.0) {
        return Err(domain(format!("power must be non-negative, got {power}")));
    }
    HarvestTrace::new(grid(duration, dt)?.into_iter().map(|t| (t, power)))
}

/// Parameters of a synthetic stochastic trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub mean: f64,
    pub stddev: f64,
    pub correlation_time: f64,
    pub seed: u64,
}

/// First-order autoregressive power process with the requested marginal
/// mean and standard deviation, clamped at zero. Deterministic per seed.
pub fn synth_stochastic(params: &SynthParams, duration: f64, dt: f64) -> Result<HarvestTrace> {
    let SynthParams {
        mean,
        stddev,
        correlation_time,
        seed,
    } = *params;
    if !(mean >= 0.0) || !(stddev >= 0.0) {
        return Err(domain("synthetic trace mean and stddev must be non-negative"));
    }
    if !(correlation_time > 0.0) {
        return Err(domain(format!(
            "correlation time must be positive, got {correlation_time}"
        )));
    }
    let times = grid(duration, dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = (-dt / correlation_time).exp();
    let innovation = stddev * (1.0 - phi * phi).sqrt();
    let z: f64 = StandardNormal.sample(&mut rng);
    let mut x = mean + stddev * z;
    let mut samples = Vec::with_capacity(times.len());
    for t in times {
        samples.push((t, x.max(0.0)));
        let eps: f64 = StandardNormal.sample(&mut rng);
        x = mean + phi * (x - mean) + innovation * eps;
    }
    HarvestTrace::new(samples)
}
