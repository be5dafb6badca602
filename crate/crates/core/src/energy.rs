//! Harvester / capacitor / load electrical model.
//!
//! The harvester is an ideal source `E` behind a series resistance
//! `r_i = E^2 / P_h`, so that `P_h` is the maximum power it can deliver.
//! The device is a state-dependent load resistance `R_L(s)`. Seen from the
//! capacitor, the two form a Thevenin equivalent with resistance
//! `R_eq = R_L r_i / (R_L + r_i)` and open-circuit voltage `E R_eq / r_i`,
//! so within one state (and one constant-power trace segment) the capacitor
//! voltage relaxes exponentially toward that value with time constant
//! `R_eq C`.

use crate::device::DeviceState;
use crate::error::{domain, Result};

pub const DEFAULT_SOURCE_VOLTAGE: f64 = 3.3;
pub const DEFAULT_MIN_POWER_FLOOR: f64 = 1e-9;
pub const DEFAULT_WAKE_UP_DURATION: f64 = 0.010;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvesterParams {
    /// Ideal source voltage `E`, volts.
    pub source_voltage: f64,
    /// Harvested power at or below which the harvester is treated as absent, watts.
    pub min_power_floor: f64,
}

impl Default for HarvesterParams {
    fn default() -> Self {
        Self {
            source_voltage: DEFAULT_SOURCE_VOLTAGE,
            min_power_floor: DEFAULT_MIN_POWER_FLOOR,
        }
    }
}

impl HarvesterParams {
    pub fn new(source_voltage: f64, min_power_floor: f64) -> Result<Self> {
        let p = Self {
            source_voltage,
            min_power_floor,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.source_voltage > 0.0 && self.source_voltage.is_finite()) {
            return Err(domain(format!(
                "source voltage must be positive, got {}",
                self.source_voltage
            )));
        }
        if !(self.min_power_floor >= 0.0) {
            return Err(domain(format!(
                "power floor must be non-negative, got {}",
                self.min_power_floor
            )));
        }
        Ok(())
    }

    /// Series resistance for harvested power `power`; `f64::INFINITY` when absent.
    pub fn resistance(&self, power: f64) -> Result<f64> {
        if !(power >= 0.0) {
            return Err(domain(format!("harvested power must be non-negative, got {power}")));
        }
        if power <= self.min_power_floor {
            return Ok(f64::INFINITY);
        }
        Ok(self.source_voltage * self.source_voltage / power)
    }
}

/// Energy store. `voltage` is the instantaneous capacitor voltage and
/// `entry_voltage` the voltage when the current device state was entered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitorState {
    pub capacitance: f64,
    pub voltage: f64,
    pub entry_voltage: f64,
}

impl CapacitorState {
    pub fn new(capacitance: f64, voltage: f64) -> Result<Self> {
        if !(capacitance > 0.0 && capacitance.is_finite()) {
            return Err(domain(format!("capacitance must be positive, got {capacitance}")));
        }
        if !(voltage >= 0.0 && voltage.is_finite()) {
            return Err(domain(format!("capacitor voltage must be non-negative, got {voltage}")));
        }
        Ok(Self {
            capacitance,
            voltage,
            entry_voltage: voltage,
        })
    }

    /// Marks the start of a new device state at the current voltage.
    pub fn enter_state(&mut self) {
        self.entry_voltage = self.voltage;
    }
}

/// Equivalent load resistance per device state, ohms.
///
/// Defaults are SX127x-class current draws referred to 3.3 V: sleep 1.5 uA,
/// receive 11.2 mA, transmit at 14 dBm 28 mA. Between the uplink and the
/// receive windows the radio sleeps while the MCU keeps a timer running
/// (about 0.4 mA). Off is a near-open circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadProfile {
    pub off: f64,
    pub sleep: f64,
    pub wake_up: f64,
    pub tx: f64,
    pub idle: f64,
    pub rx: f64,
}

impl Default for LoadProfile {
    fn default() -> Self {
        Self {
            off: 1e9,
            sleep: 2.2e6,
            wake_up: 1100.0,
            tx: 118.0,
            idle: 8250.0,
            rx: 295.0,
        }
    }
}

impl LoadProfile {
    pub fn resistance(&self, state: DeviceState) -> f64 {
        match state {
            DeviceState::Charging | DeviceState::Off => self.off,
            DeviceState::Sleep => self.sleep,
            DeviceState::WakeUp => self.wake_up,
            DeviceState::Tx => self.tx,
            DeviceState::Idle => self.idle,
            DeviceState::Rx1 | DeviceState::Rx2 => self.rx,
        }
    }

    fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("off", self.off),
            ("sleep", self.sleep),
            ("wakeup", self.wake_up),
            ("tx", self.tx),
            ("idle", self.idle),
            ("rx", self.rx),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let entries = self.entries();
        for (name, r) in entries {
            if !(r > 0.0 && r.is_finite()) {
                return Err(domain(format!("load resistance for {name} must be positive, got {r}")));
            }
        }
        if entries.iter().any(|&(n, r)| n != "off" && r >= self.off) {
            return Err(domain("the off-state load must be the largest resistance"));
        }
        if entries.iter().any(|&(n, r)| n != "tx" && r <= self.tx) {
            return Err(domain("the transmit load must be the smallest resistance"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Switch-off voltage.
    pub v_low: f64,
    /// Reactivation voltage.
    pub v_high: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            v_low: 1.8,
            v_high: 3.0,
        }
    }
}

impl Thresholds {
    pub fn validate(&self, source_voltage: f64) -> Result<()> {
        if !(0.0 < self.v_low && self.v_low < self.v_high && self.v_high <= source_voltage) {
            return Err(domain(format!(
                "thresholds must satisfy 0 < v_low < v_high <= E, got {} / {} with E = {}",
                self.v_low, self.v_high, source_voltage
            )));
        }
        Ok(())
    }
}

/// `R_L r_i / (R_L + r_i)`; an infinite `harvester_r` means no harvester.
pub fn equivalent_resistance(load_r: f64, harvester_r: f64) -> Result<f64> {
    if !(load_r > 0.0 && load_r.is_finite()) {
        return Err(domain(format!("load resistance must be positive, got {load_r}")));
    }
    if !(harvester_r > 0.0) {
        return Err(domain(format!(
            "harvester resistance must be positive, got {harvester_r}"
        )));
    }
    if harvester_r.is_infinite() {
        return Ok(load_r);
    }
    Ok(load_r * harvester_r / (load_r + harvester_r))
}

/// `E^2 / P_h`, or infinity at or below the power floor.
pub fn harvester_resistance(power: f64, params: &HarvesterParams) -> Result<f64> {
    params.resistance(power)
}

/// Closed-form capacitor voltage after `dt` seconds in one state with a
/// constant harvester resistance, starting from `state.entry_voltage`.
pub fn voltage_after(state: &CapacitorState, r_eq: f64, harvester_r: f64, source_voltage: f64, dt: f64) -> Result<f64> {
    if !(dt >= 0.0) {
        return Err(domain(format!("elapsed time must be non-negative, got {dt}")));
    }
    if !(r_eq > 0.0) {
        return Err(domain(format!("equivalent resistance must be positive, got {r_eq}")));
    }
    Ok(relax(
        state.entry_voltage,
        steady_state(r_eq, harvester_r, source_voltage),
        r_eq * state.capacitance,
        dt,
    ))
}

/// Time until the voltage reaches `target`, or `None` if it never does.
pub fn time_to_reach(
    state: &CapacitorState,
    target: f64,
    r_eq: f64,
    harvester_r: f64,
    source_voltage: f64,
) -> Option<f64> {
    crossing_time(
        state.entry_voltage,
        target,
        steady_state(r_eq, harvester_r, source_voltage),
        r_eq * state.capacitance,
    )
}

/// Evolves the capacitor through consecutive `(duration, harvested power)`
/// segments at a fixed load, restarting the exponential at each boundary.
pub fn advance_piecewise(
    state: &CapacitorState,
    load_r: f64,
    segments: &[(f64, f64)],
    harvester: &HarvesterParams,
) -> Result<f64> {
    let mut v = state.entry_voltage;
    for &(dt, power) in segments {
        let circuit = Circuit::new(
            harvester.source_voltage,
            harvester.resistance(power)?,
            load_r,
            state.capacitance,
        )?;
        v = circuit.voltage_after(v, dt)?;
    }
    Ok(v)
}

fn steady_state(r_eq: f64, harvester_r: f64, source_voltage: f64) -> f64 {
    if harvester_r.is_infinite() {
        0.0
    } else {
        source_voltage * r_eq / harvester_r
    }
}

fn relax(v0: f64, v_inf: f64, tau: f64, dt: f64) -> f64 {
    if dt == 0.0 {
        return v0;
    }
    let x = -dt / tau;
    // v_inf (1 - e^x) + v0 e^x, written around v_inf for accuracy near steady state.
    v_inf * -x.exp_m1() + v0 * x.exp()
}

fn crossing_time(v0: f64, target: f64, v_inf: f64, tau: f64) -> Option<f64> {
    if target == v0 {
        return Some(0.0);
    }
    let between = if v0 < v_inf {
        v0 < target && target < v_inf
    } else {
        v_inf < target && target < v0
    };
    if !between {
        return None;
    }
    let ratio = (target - v_inf) / (v0 - v_inf);
    Some((-tau * ratio.ln()).max(0.0))
}

/// One state's RC circuit: fixed source, harvester and load resistances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circuit {
    pub source_voltage: f64,
    pub harvester_r: f64,
    pub load_r: f64,
    pub capacitance: f64,
    r_eq: f64,
}

impl Circuit {
    pub fn new(source_voltage: f64, harvester_r: f64, load_r: f64, capacitance: f64) -> Result<Self> {
        if !(capacitance > 0.0 && capacitance.is_finite()) {
            return Err(domain(format!("capacitance must be positive, got {capacitance}")));
        }
        let r_eq = equivalent_resistance(load_r, harvester_r)?;
        Ok(Self {
            source_voltage,
            harvester_r,
            load_r,
            capacitance,
            r_eq,
        })
    }

    pub fn equivalent_resistance(&self) -> f64 {
        self.r_eq
    }

    pub fn time_constant(&self) -> f64 {
        self.r_eq * self.capacitance
    }

    /// Voltage approached as `t -> infinity`.
    pub fn steady_state(&self) -> f64 {
        steady_state(self.r_eq, self.harvester_r, self.source_voltage)
    }

    pub fn voltage_after(&self, v0: f64, dt: f64) -> Result<f64> {
        if !(dt >= 0.0) {
            return Err(domain(format!("elapsed time must be non-negative, got {dt}")));
        }
        Ok(relax(v0, self.steady_state(), self.time_constant(), dt))
    }

    pub fn time_to_reach(&self, v0: f64, target: f64) -> Option<f64> {
        crossing_time(v0, target, self.steady_state(), self.time_constant())
    }

    /// `(a, b)` such that `voltage_after(v0, dt) = a + b v0`.
    pub fn affine(&self, dt: f64) -> (f64, f64) {
        let x = -dt / self.time_constant();
        (self.steady_state() * -x.exp_m1(), x.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn parallel_resistance() {
        assert_eq!(equivalent_resistance(1000.0, 1000.0).unwrap(), 500.0);
        assert_eq!(equivalent_resistance(50.0, f64::INFINITY).unwrap(), 50.0);
        assert!(close(equivalent_resistance(200.0, 800.0).unwrap(), 160.0, 1e-15));
        assert!(equivalent_resistance(0.0, 10.0).is_err());
        assert!(equivalent_resistance(10.0, -1.0).is_err());
    }

    #[test]
    fn harvester_resistance_from_power() {
        let h = HarvesterParams::default();
        assert_eq!(harvester_resistance(0.0, &h).unwrap(), f64::INFINITY);
        assert!(close(
            harvester_resistance(3.3 * 3.3 / 100.0, &h).unwrap(),
            100.0,
            1e-12
        ));
        assert!(close(harvester_resistance(7.2e-3, &h).unwrap(), 1512.5, 1e-12));
        assert_eq!(harvester_resistance(1e-10, &h).unwrap(), f64::INFINITY);
        assert!(harvester_resistance(-1e-3, &h).is_err());
    }

    #[test]
    fn voltage_after_limits() {
        let s = CapacitorState::new(0.1, 2.5).unwrap();
        assert_eq!(voltage_after(&s, 123.0, 456.0, 3.3, 0.0).unwrap(), 2.5);

        let s = CapacitorState::new(0.1, 3.0).unwrap();
        assert!(voltage_after(&s, 1e4, f64::INFINITY, 3.3, 1e7).unwrap() < 1e-12);

        let s = CapacitorState::new(0.02, 0.0).unwrap();
        let r_eq = equivalent_resistance(1e9, 1000.0).unwrap();
        let v = voltage_after(&s, r_eq, 1000.0, 3.3, 1e4).unwrap();
        assert!(close(v, 3.3 * r_eq / 1000.0, 1e-12));
        assert!((v - 3.3).abs() < 1e-5);

        assert!(voltage_after(&s, r_eq, 1000.0, 3.3, -1.0).is_err());
    }

    #[test]
    fn pure_discharge_is_exponential() {
        let s = CapacitorState::new(0.04, 2.7).unwrap();
        let v = voltage_after(&s, 500.0, f64::INFINITY, 3.3, 3.0).unwrap();
        assert!(close(v, 2.7 * (-3.0f64 / 20.0).exp(), 1e-15));
    }

    #[test]
    fn time_to_reach_cases() {
        let s = CapacitorState::new(0.1, 2.0).unwrap();
        assert_eq!(time_to_reach(&s, 2.0, 100.0, f64::INFINITY, 3.3), Some(0.0));
        assert_eq!(time_to_reach(&s, 2.5, 100.0, f64::INFINITY, 3.3), None);

        let s = CapacitorState::new(0.1, 0.0).unwrap();
        let r_eq = equivalent_resistance(1e9, 1000.0).unwrap();
        let t = time_to_reach(&s, 3.0, r_eq, 1000.0, 3.3).unwrap();
        let v_inf = 3.3 * r_eq / 1000.0;
        let expected = -r_eq * 0.1 * (1.0 - 3.0 / v_inf).ln();
        assert!(close(t, expected, 1e-12));
        let back = voltage_after(&s, r_eq, 1000.0, 3.3, t).unwrap();
        assert!((back - 3.0).abs() < 1e-9);
        // the steady state itself is only approached asymptotically
        assert_eq!(time_to_reach(&s, v_inf, r_eq, 1000.0, 3.3), None);
    }

    #[test]
    fn piecewise_fold() {
        let h = HarvesterParams::default();
        let s = CapacitorState::new(0.04, 2.2).unwrap();
        assert_eq!(advance_piecewise(&s, 2000.0, &[], &h).unwrap(), 2.2);

        let ri = h.resistance(5e-3).unwrap();
        let single = voltage_after(&s, equivalent_resistance(2000.0, ri).unwrap(), ri, 3.3, 1.5).unwrap();
        assert_eq!(advance_piecewise(&s, 2000.0, &[(1.5, 5e-3)], &h).unwrap(), single);

        let two = advance_piecewise(&s, 2000.0, &[(1.0, 5e-3), (1.0, 5e-3)], &h).unwrap();
        let one = advance_piecewise(&s, 2000.0, &[(2.0, 5e-3)], &h).unwrap();
        assert!(close(two, one, 1e-12));
    }

    #[test]
    fn load_profile_invariants() {
        LoadProfile::default().validate().unwrap();
        let bad = LoadProfile {
            tx: 1e7,
            ..LoadProfile::default()
        };
        assert!(bad.validate().is_err());
        let bad = LoadProfile {
            off: 10.0,
            ..LoadProfile::default()
        };
        assert!(bad.validate().is_err());
        assert!(Thresholds::default().validate(3.3).is_ok());
        assert!(Thresholds {
            v_low: 3.0,
            v_high: 1.8
        }
        .validate(3.3)
        .is_err());
        assert!(Thresholds {
            v_low: 1.8,
            v_high: 3.5
        }
        .validate(3.3)
        .is_err());
    }
}
