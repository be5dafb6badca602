//! Packet-scheduling policies.
//!
//! Every policy answers the same question when a packet is pending and the
//! duty-cycle gate is open: send now, or wait. The energy-modelling
//! policies differ only in the harvest they assume while the cycle runs.

use std::fmt;
use std::str::FromStr;

use crate::device::DeviceState;
use crate::energy::{Circuit, HarvesterParams, LoadProfile, Thresholds};
use crate::error::{config, domain, Result};
use crate::trace::{EwmaEstimator, HarvestTrace};

/// Extra voltage kept above the switch-off threshold when the oracle
/// checks a cycle, so that re-running the same cycle with differently
/// split segments cannot round below it.
pub const OS_VOLTAGE_MARGIN: f64 = 1e-12;

/// How far ahead the oracle looks for its next feasible start, seconds.
pub const OS_LOOKAHEAD: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Sends every generated packet regardless of energy.
    Unaware,
    /// Non-causal: sends once the real future harvest sustains the cycle.
    Optimal,
    /// Sends when the voltage exceeds a fixed threshold.
    FixedThreshold { v_th: f64 },
    /// Assumes no harvest during the cycle.
    Conservative,
    /// Assumes the mean harvest of the last `window` seconds.
    MovingAverage { window: f64 },
    /// Assumes the minimum harvest of the last `window` seconds.
    MinHarvest { window: f64 },
    /// Assumes EWMA mean minus EWMA deviation; `window` defaults to the
    /// generation interval.
    Aves { gain: f64, window: Option<f64> },
}

pub const DEFAULT_FS_THRESHOLD: f64 = 1.82;
pub const DEFAULT_WINDOW: f64 = 5.0;
pub const DEFAULT_AVES_GAIN: f64 = 0.1;

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Unaware => "us",
            Policy::Optimal => "os",
            Policy::FixedThreshold { .. } => "fs",
            Policy::Conservative => "cs",
            Policy::MovingAverage { .. } => "as",
            Policy::MinHarvest { .. } => "mins",
            Policy::Aves { .. } => "aves",
        }
    }

    pub fn validate(&self, thresholds: &Thresholds) -> Result<()> {
        match *self {
            Policy::FixedThreshold { v_th } if !(v_th >= thresholds.v_low) => {
                Err(config(format!("fs threshold {v_th} V is below the switch-off voltage")))
            }
            Policy::MovingAverage { window } | Policy::MinHarvest { window } if !(window > 0.0) => {
                Err(config(format!("window must be positive, got {window}")))
            }
            Policy::Aves { gain, window } => {
                if !(gain > 0.0 && gain <= 1.0) {
                    return Err(config(format!("aves gain must be in (0, 1], got {gain}")));
                }
                match window {
                    Some(w) if !(w > 0.0) => Err(config(format!("window must be positive, got {w}"))),
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Policy::FixedThreshold { v_th } => write!(f, "fs:{v_th}"),
            Policy::MovingAverage { window } => write!(f, "as:{window}"),
            Policy::MinHarvest { window } => write!(f, "mins:{window}"),
            Policy::Aves { gain, window: Some(w) } => write!(f, "aves:{gain}:{w}"),
            Policy::Aves { gain, window: None } => write!(f, "aves:{gain}"),
            p => f.write_str(p.name()),
        }
    }
}

impl FromStr for Policy {
    type Err = crate::Error;

    /// `name[:param[:param]]`, e.g. `us`, `fs:1.82`, `as:5`, `aves:0.1:4`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default().to_ascii_lowercase();
        let params: Vec<f64> = parts
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| config(format!("bad scheduler parameter `{p}` in `{s}`")))
            })
            .collect::<Result<_>>()?;
        let arity = |max: usize| {
            if params.len() > max {
                Err(config(format!("too many parameters for scheduler `{name}`")))
            } else {
                Ok(())
            }
        };
        let policy = match name.as_str() {
            "us" => {
                arity(0)?;
                Policy::Unaware
            }
            "os" => {
                arity(0)?;
                Policy::Optimal
            }
            "cs" => {
                arity(0)?;
                Policy::Conservative
            }
            "fs" => {
                arity(1)?;
                Policy::FixedThreshold {
                    v_th: params.first().copied().unwrap_or(DEFAULT_FS_THRESHOLD),
                }
            }
            "as" => {
                arity(1)?;
                Policy::MovingAverage {
                    window: params.first().copied().unwrap_or(DEFAULT_WINDOW),
                }
            }
            "mins" => {
                arity(1)?;
                Policy::MinHarvest {
                    window: params.first().copied().unwrap_or(DEFAULT_WINDOW),
                }
            }
            "aves" => {
                arity(2)?;
                Policy::Aves {
                    gain: params.first().copied().unwrap_or(DEFAULT_AVES_GAIN),
                    window: params.get(1).copied(),
                }
            }
            _ => return Err(config(format!("unknown scheduler `{s}`"))),
        };
        Ok(policy)
    }
}

/// A policy together with the application's generation interval and the
/// engine-facing recheck cadence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerPolicy {
    pub policy: Policy,
    pub generation_interval: f64,
    /// Longest wait between two evaluations of a deferred packet while a
    /// windowed mean is sliding, seconds.
    pub recheck_interval: f64,
    /// Spacing of candidate start times for the oracle policy, seconds.
    pub os_grid: f64,
}

impl SchedulerPolicy {
    pub fn new(policy: Policy, generation_interval: f64) -> Self {
        Self {
            policy,
            generation_interval,
            recheck_interval: 0.1,
            os_grid: 0.1,
        }
    }

    pub fn aves_window(&self) -> Option<f64> {
        match self.policy {
            Policy::Aves { window, .. } => Some(window.unwrap_or(self.generation_interval)),
            _ => None,
        }
    }

    /// Policies that hold a DC-blocked packet for release instead of
    /// waiting for the next generation.
    pub fn is_energy_aware(&self) -> bool {
        self.policy != Policy::Unaware
    }

    pub fn validate(&self, thresholds: &Thresholds) -> Result<()> {
        self.policy.validate(thresholds)?;
        if !(self.generation_interval > 0.0) {
            return Err(config(format!(
                "generation interval must be positive, got {}",
                self.generation_interval
            )));
        }
        if !(self.recheck_interval > 0.0 && self.os_grid > 0.0) {
            return Err(config("recheck intervals must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    SendNow,
    Defer { recheck_at: f64 },
    Drop,
}

/// Electrical parameters the energy-modelling policies reason about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyContext {
    pub harvester: HarvesterParams,
    pub loads: LoadProfile,
    pub capacitance: f64,
    pub thresholds: Thresholds,
}

impl EnergyContext {
    fn circuit(&self, state: DeviceState, power: f64) -> Result<Circuit> {
        Circuit::new(
            self.harvester.source_voltage,
            self.harvester.resistance(power)?,
            self.loads.resistance(state),
            self.capacitance,
        )
    }
}

/// Cycle timeline plus the harvest assumed while it runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePlan {
    pub segments: Vec<(DeviceState, f64)>,
    pub predicted_power: f64,
}

impl CyclePlan {
    /// Drops zero-length segments.
    pub fn new(segments: &[(DeviceState, f64)], predicted_power: f64) -> Result<Self> {
        if !(predicted_power >= 0.0) {
            return Err(domain(format!(
                "predicted power must be non-negative, got {predicted_power}"
            )));
        }
        if segments.iter().any(|s| !(s.1 >= 0.0)) {
            return Err(domain("cycle segment durations must be non-negative"));
        }
        Ok(Self {
            segments: segments.iter().copied().filter(|s| s.1 > 0.0).collect(),
            predicted_power,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RequiredVoltage {
    Volts(f64),
    /// Even a full capacitor at the source voltage cannot finish the cycle.
    Unreachable,
}

impl RequiredVoltage {
    pub fn admits(&self, voltage: f64) -> bool {
        match *self {
            RequiredVoltage::Volts(v) => voltage >= v,
            RequiredVoltage::Unreachable => false,
        }
    }
}

/// Lowest starting voltage that keeps the capacitor at or above the
/// switch-off threshold through every state of `plan`.
///
/// Within a state the voltage moves monotonically, so only state
/// boundaries need checking, and each boundary voltage is an increasing
/// affine function `a + b v0` of the start voltage. The requirement is
/// therefore the largest of the per-boundary inversions.
pub fn required_start_voltage(plan: &CyclePlan, ctx: &EnergyContext) -> Result<RequiredVoltage> {
    let v_low = ctx.thresholds.v_low;
    let (mut a, mut b) = (0.0, 1.0);
    let mut required = v_low;
    for &(state, dt) in &plan.segments {
        let (sa, sb) = ctx.circuit(state, plan.predicted_power)?.affine(dt);
        a = sa + sb * a;
        b *= sb;
        required = required.max((v_low - a) / b);
    }
    if required > ctx.harvester.source_voltage {
        Ok(RequiredVoltage::Unreachable)
    } else {
        Ok(RequiredVoltage::Volts(required))
    }
}

/// Whether starting the cycle at `now` with `voltage` stays above the
/// switch-off threshold against the real trace. Past its last sample the
/// trace holds its final value.
pub fn os_feasible(
    now: f64,
    voltage: f64,
    trace: &HarvestTrace,
    segments: &[(DeviceState, f64)],
    ctx: &EnergyContext,
) -> Result<bool> {
    let floor = ctx.thresholds.v_low + OS_VOLTAGE_MARGIN;
    if voltage < floor {
        return Ok(false);
    }
    let mut t = now;
    let mut v = voltage;
    for &(state, dt) in segments {
        for (piece, power) in trace.segments(t, dt) {
            v = ctx.circuit(state, power)?.voltage_after(v, piece)?;
            if v < floor {
                return Ok(false);
            }
        }
        t += dt;
    }
    Ok(true)
}

fn sleep_voltage(from: f64, voltage: f64, dt: f64, trace: &HarvestTrace, ctx: &EnergyContext) -> Result<f64> {
    let mut v = voltage;
    for (piece, power) in trace.segments(from, dt) {
        v = ctx.circuit(DeviceState::Sleep, power)?.voltage_after(v, piece)?;
    }
    Ok(v)
}

/// Earliest start in `(now, now + lookahead]` at which the oracle would
/// send, assuming the device sleeps until then. Candidates are probed on
/// a `grid`-spaced lattice and the first feasible interval is bisected
/// down to a nanosecond. `None` if nothing is feasible within the window
/// or the device would switch off first.
pub fn os_next_start(
    now: f64,
    voltage: f64,
    trace: &HarvestTrace,
    cycle: &[(DeviceState, f64)],
    ctx: &EnergyContext,
    grid: f64,
    lookahead: f64,
) -> Result<Option<f64>> {
    let (mut t0, mut v0) = (now, voltage);
    let steps = (lookahead / grid).ceil() as u64;
    for k in 1..=steps {
        let t1 = now + k as f64 * grid;
        let v1 = sleep_voltage(t0, v0, t1 - t0, trace, ctx)?;
        if v1 < ctx.thresholds.v_low {
            return Ok(None);
        }
        if os_feasible(t1, v1, trace, cycle, ctx)? {
            let (mut lo, mut hi) = (t0, t1);
            while hi - lo > 1e-9 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let vm = sleep_voltage(t0, v0, mid - t0, trace, ctx)?;
                if os_feasible(mid, vm, trace, cycle, ctx)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        (t0, v0) = (t1, v1);
    }
    Ok(None)
}

/// Inputs to one scheduling decision.
#[derive(Debug, Clone, Copy)]
pub struct DecisionInput<'a> {
    pub now: f64,
    pub voltage: f64,
    /// Timeline of the cycle that would start now.
    pub cycle: &'a [(DeviceState, f64)],
    /// Harvest observed so far; only `[.., now]` is consulted by causal policies.
    pub history: &'a HarvestTrace,
    /// Full future trace, available to the oracle policy only.
    pub oracle: Option<&'a HarvestTrace>,
    pub estimator: Option<&'a EwmaEstimator>,
    pub energy: &'a EnergyContext,
}

/// Harvest a causal energy-modelling policy assumes for the coming cycle.
pub fn predicted_power(policy: &SchedulerPolicy, input: &DecisionInput<'_>) -> Result<Option<f64>> {
    let p = match policy.policy {
        Policy::Conservative => Some(0.0),
        Policy::MovingAverage { window } => Some(input.history.window_mean(input.now, window)?),
        Policy::MinHarvest { window } => Some(input.history.window_min(input.now, window)?),
        Policy::Aves { .. } => match input.estimator {
            Some(est) => Some(est.predict()),
            None => Some(
                input
                    .history
                    .window_mean(input.now, policy.aves_window().unwrap_or(DEFAULT_WINDOW))?,
            ),
        },
        _ => None,
    };
    Ok(p)
}

/// Voltage threshold the policy applies at this instant, if it is a
/// threshold policy.
pub fn send_threshold(policy: &SchedulerPolicy, input: &DecisionInput<'_>) -> Result<Option<RequiredVoltage>> {
    if let Policy::FixedThreshold { v_th } = policy.policy {
        // strictly above: the smallest representable voltage past v_th
        return Ok(Some(RequiredVoltage::Volts(f64::from_bits(v_th.to_bits() + 1))));
    }
    match predicted_power(policy, input)? {
        Some(p) => Ok(Some(required_start_voltage(
            &CyclePlan::new(input.cycle, p)?,
            input.energy,
        )?)),
        None => Ok(None),
    }
}

pub fn decide(policy: &SchedulerPolicy, input: &DecisionInput<'_>) -> Result<Decision> {
    let now = input.now;
    match policy.policy {
        Policy::Unaware => Ok(Decision::SendNow),
        Policy::Optimal => {
            let trace = input
                .oracle
                .ok_or_else(|| config("the optimal sender needs the full harvest trace"))?;
            if os_feasible(now, input.voltage, trace, input.cycle, input.energy)? {
                return Ok(Decision::SendNow);
            }
            let next = os_next_start(
                now,
                input.voltage,
                trace,
                input.cycle,
                input.energy,
                policy.os_grid,
                OS_LOOKAHEAD,
            )?;
            Ok(Decision::Defer {
                recheck_at: next.unwrap_or(now + OS_LOOKAHEAD),
            })
        }
        _ => {
            let threshold = send_threshold(policy, input)?.expect("threshold policy");
            if threshold.admits(input.voltage) {
                return Ok(Decision::SendNow);
            }
            let target = match threshold {
                RequiredVoltage::Volts(v) => v,
                RequiredVoltage::Unreachable if policy.policy == Policy::Conservative => return Ok(Decision::Drop),
                RequiredVoltage::Unreachable => f64::INFINITY,
            };
            Ok(Decision::Defer {
                recheck_at: recheck_time(policy, input, target)?,
            })
        }
    }
}

/// Earliest instant at which a deferral can turn into a send: the
/// predicted threshold crossing while sleeping, the next trace sample, or
/// the next change of the windowed statistic the policy relies on.
fn recheck_time(policy: &SchedulerPolicy, input: &DecisionInput<'_>, target: f64) -> Result<f64> {
    let now = input.now;
    let history = input.history;
    let mut at = history.next_sample_after(now).unwrap_or(f64::INFINITY);
    let window = match policy.policy {
        Policy::MovingAverage { window } | Policy::MinHarvest { window } => Some(window),
        Policy::Aves { .. } if input.estimator.is_none() => policy.aves_window(),
        _ => None,
    };
    if let Some(x) = window {
        let tail = now - x;
        if let Some(next) = history.next_sample_after(tail) {
            at = at.min(next + x);
        }
        // a mean keeps sliding while the power leaving the window differs
        // from the power entering it
        let sliding = !matches!(policy.policy, Policy::MinHarvest { .. })
            && (tail < history.start() || history.power_at(tail)? != history.power_at(now)?);
        if sliding {
            at = at.min(now + policy.recheck_interval);
        }
    }
    if target.is_finite() {
        let sleep = input.energy.circuit(DeviceState::Sleep, history.power_at(now)?)?;
        if let Some(dt) = sleep.time_to_reach(input.voltage, target + 1e-9) {
            at = at.min(now + dt);
        }
    }
    Ok(at.max(now + 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::HarvesterParams;
    use crate::mac::{build_cycle_timeline, TxCycleSpec};
    use DeviceState::*;

    fn ctx(c: f64) -> EnergyContext {
        EnergyContext {
            harvester: HarvesterParams::default(),
            loads: LoadProfile::default(),
            capacitance: c,
            thresholds: Thresholds::default(),
        }
    }

    fn default_cycle() -> Vec<(DeviceState, f64)> {
        let spec = TxCycleSpec::default();
        build_cycle_timeline(&spec, spec.uplink_airtime().unwrap())
    }

    #[test]
    fn parse_policies() {
        assert_eq!("us".parse::<Policy>().unwrap(), Policy::Unaware);
        assert_eq!(
            "fs:1.9".parse::<Policy>().unwrap(),
            Policy::FixedThreshold { v_th: 1.9 }
        );
        assert_eq!("fs".parse::<Policy>().unwrap(), Policy::FixedThreshold { v_th: 1.82 });
        assert_eq!(
            "AS:10".parse::<Policy>().unwrap(),
            Policy::MovingAverage { window: 10.0 }
        );
        assert_eq!("mins".parse::<Policy>().unwrap(), Policy::MinHarvest { window: 5.0 });
        assert_eq!(
            "aves:0.2:8".parse::<Policy>().unwrap(),
            Policy::Aves {
                gain: 0.2,
                window: Some(8.0)
            }
        );
        assert!("xx".parse::<Policy>().is_err());
        assert!("cs:1".parse::<Policy>().is_err());
        assert!("as:abc".parse::<Policy>().is_err());
        for s in ["us", "os", "cs", "fs:1.82", "as:5", "mins:5", "aves:0.1", "aves:0.1:4"] {
            assert_eq!(s.parse::<Policy>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn single_state_discharge_requirement() {
        let c = ctx(0.04);
        let plan = CyclePlan::new(&[(Tx, 0.2)], 0.0).unwrap();
        let tau = LoadProfile::default().tx * 0.04;
        let expected = 1.8 * (0.2 / tau).exp();
        match required_start_voltage(&plan, &c).unwrap() {
            RequiredVoltage::Volts(v) => assert!((v - expected).abs() < 1e-12),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn strong_harvest_needs_only_v_low() {
        let plan = CyclePlan::new(&default_cycle(), 10.0).unwrap();
        assert_eq!(
            required_start_voltage(&plan, &ctx(0.04)).unwrap(),
            RequiredVoltage::Volts(1.8)
        );
    }

    #[test]
    fn small_capacitor_is_unreachable() {
        let plan = CyclePlan::new(&default_cycle(), 0.0).unwrap();
        assert_eq!(
            required_start_voltage(&plan, &ctx(0.002)).unwrap(),
            RequiredVoltage::Unreachable
        );
        assert!(matches!(
            required_start_voltage(&plan, &ctx(0.02)).unwrap(),
            RequiredVoltage::Volts(_)
        ));
    }

    #[test]
    fn cs_threshold_decision() {
        let c = ctx(0.04);
        let cycle = default_cycle();
        let RequiredVoltage::Volts(th) = required_start_voltage(&CyclePlan::new(&cycle, 0.0).unwrap(), &c).unwrap()
        else {
            panic!()
        };
        let hist = HarvestTrace::constant(1e-3).unwrap();
        let pol = SchedulerPolicy::new(Policy::Conservative, 4.0);
        let mk = |v| DecisionInput {
            now: 10.0,
            voltage: v,
            cycle: &cycle,
            history: &hist,
            oracle: None,
            estimator: None,
            energy: &c,
        };
        assert_eq!(decide(&pol, &mk(th + 0.1)).unwrap(), Decision::SendNow);
        match decide(&pol, &mk(th - 0.1)).unwrap() {
            Decision::Defer { recheck_at } => assert!(recheck_at > 10.0),
            d => panic!("{d:?}"),
        }
    }

    #[test]
    fn fixed_threshold_is_strict() {
        let c = ctx(0.04);
        let cycle = default_cycle();
        let hist = HarvestTrace::constant(0.0).unwrap();
        let pol = SchedulerPolicy::new(Policy::FixedThreshold { v_th: 1.82 }, 4.0);
        let mk = |v| DecisionInput {
            now: 0.0,
            voltage: v,
            cycle: &cycle,
            history: &hist,
            oracle: None,
            estimator: None,
            energy: &c,
        };
        assert!(matches!(decide(&pol, &mk(1.81)).unwrap(), Decision::Defer { .. }));
        assert!(matches!(decide(&pol, &mk(1.82)).unwrap(), Decision::Defer { .. }));
        assert_eq!(decide(&pol, &mk(1.8201)).unwrap(), Decision::SendNow);
    }

    #[test]
    fn unaware_always_sends() {
        let c = ctx(0.002);
        let cycle = default_cycle();
        let hist = HarvestTrace::constant(0.0).unwrap();
        let pol = SchedulerPolicy::new(Policy::Unaware, 4.0);
        let input = DecisionInput {
            now: 0.0,
            voltage: 1.85,
            cycle: &cycle,
            history: &hist,
            oracle: None,
            estimator: None,
            energy: &c,
        };
        assert_eq!(decide(&pol, &input).unwrap(), Decision::SendNow);
    }

    #[test]
    fn oracle_requires_trace() {
        let c = ctx(0.04);
        let cycle = default_cycle();
        let hist = HarvestTrace::constant(0.0).unwrap();
        let pol = SchedulerPolicy::new(Policy::Optimal, 4.0);
        let input = DecisionInput {
            now: 0.0,
            voltage: 3.0,
            cycle: &cycle,
            history: &hist,
            oracle: None,
            estimator: None,
            energy: &c,
        };
        assert!(matches!(decide(&pol, &input), Err(crate::Error::Config(_))));
    }

    #[test]
    fn oracle_on_constant_trace_matches_conservative_model() {
        let c = ctx(0.02);
        let cycle = default_cycle();
        for p in [0.0, 1e-3, 5e-3] {
            let trace = HarvestTrace::constant(p).unwrap();
            let RequiredVoltage::Volts(th) = required_start_voltage(&CyclePlan::new(&cycle, p).unwrap(), &c).unwrap()
            else {
                panic!()
            };
            for dv in [-0.05, -0.001, 0.001, 0.05] {
                let v = th + dv;
                assert_eq!(
                    os_feasible(0.0, v, &trace, &cycle, &c).unwrap(),
                    dv > 0.0,
                    "p={p} dv={dv}"
                );
            }
        }
    }

    #[test]
    fn cs_drops_when_unreachable() {
        let c = ctx(0.002);
        let cycle = default_cycle();
        let hist = HarvestTrace::constant(1e-3).unwrap();
        let pol = SchedulerPolicy::new(Policy::Conservative, 4.0);
        let input = DecisionInput {
            now: 0.0,
            voltage: 3.2,
            cycle: &cycle,
            history: &hist,
            oracle: None,
            estimator: None,
            energy: &c,
        };
        assert_eq!(decide(&pol, &input).unwrap(), Decision::Drop);
    }

    #[test]
    fn aves_uses_estimator() {
        let c = ctx(0.02);
        let cycle = default_cycle();
        let hist = HarvestTrace::constant(0.0).unwrap();
        let est = EwmaEstimator {
            gain: 0.1,
            mean: 0.5,
            deviation: 0.0,
            window: 4.0,
        };
        let pol = SchedulerPolicy::new(
            Policy::Aves {
                gain: 0.1,
                window: None,
            },
            4.0,
        );
        assert_eq!(pol.aves_window(), Some(4.0));
        let input = DecisionInput {
            now: 8.0,
            voltage: 1.81,
            cycle: &cycle,
            history: &hist,
            oracle: None,
            estimator: Some(&est),
            energy: &c,
        };
        assert_eq!(predicted_power(&pol, &input).unwrap(), Some(0.5));
        assert_eq!(decide(&pol, &input).unwrap(), Decision::SendNow);
    }
}
