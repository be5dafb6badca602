//! LoRa airtime, EU868 duty-cycle accounting and the Class A transmission
//! cycle.

use crate::device::DeviceState;
use crate::error::{domain, Error, Result};

/// EU868 uplink channels sharing one 1% sub-band, MHz.
pub const UPLINK_CHANNELS_MHZ: [f64; 3] = [868.1, 868.3, 868.5];
/// Dedicated downlink channel used by RX2, MHz.
pub const RX2_CHANNEL_MHZ: f64 = 869.525;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub spreading_factor: u8,
    pub bandwidth_hz: f64,
    /// 1..=4 for coding rates 4/5..4/8.
    pub coding_rate: u8,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_on: bool,
    /// MAC + PHY bytes added to the application payload.
    pub overhead_bytes: u16,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            spreading_factor: 7,
            bandwidth_hz: 125_000.0,
            coding_rate: 1,
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
            overhead_bytes: 13,
        }
    }
}

impl RadioParams {
    pub fn with_sf(sf: u8) -> Self {
        Self {
            spreading_factor: sf,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_sf(self.spreading_factor)?;
        if !(self.bandwidth_hz > 0.0) {
            return Err(domain(format!("bandwidth must be positive, got {}", self.bandwidth_hz)));
        }
        if !(1..=4).contains(&self.coding_rate) {
            return Err(domain(format!(
                "coding rate index must be 1..=4, got {}",
                self.coding_rate
            )));
        }
        Ok(())
    }

    pub fn symbol_time(&self) -> f64 {
        f64::from(1u32 << self.spreading_factor) / self.bandwidth_hz
    }

    /// Low data rate optimisation is mandated once a symbol exceeds 16 ms.
    pub fn low_data_rate_optimize(&self) -> bool {
        self.symbol_time() > 0.016
    }
}

pub(crate) fn check_sf(sf: u8) -> Result<()> {
    if !(7..=12).contains(&sf) {
        return Err(domain(format!("spreading factor must be in 7..=12, got {sf}")));
    }
    Ok(())
}

/// Largest application payload for an EU868 data rate at 125 kHz.
pub fn max_payload(sf: u8) -> usize {
    match sf {
        7 | 8 => 222,
        9 => 115,
        _ => 51,
    }
}

/// Frame airtime in seconds for an application payload of `payload` bytes.
pub fn time_on_air(radio: &RadioParams, payload: usize) -> Result<f64> {
    radio.validate()?;
    let sf = radio.spreading_factor;
    if payload > max_payload(sf) {
        return Err(domain(format!(
            "payload of {payload} B exceeds the {} B limit at SF{sf}",
            max_payload(sf)
        )));
    }
    Ok(frame_airtime(radio, payload + usize::from(radio.overhead_bytes)))
}

fn frame_airtime(radio: &RadioParams, frame_bytes: usize) -> f64 {
    let sf = i64::from(radio.spreading_factor);
    let t_sym = radio.symbol_time();
    let de = i64::from(radio.low_data_rate_optimize());
    let ih = i64::from(!radio.explicit_header);
    let crc = i64::from(radio.crc_on);
    let num = 8 * frame_bytes as i64 - 4 * sf + 28 + 16 * crc - 20 * ih;
    let den = 4 * (sf - 2 * de);
    let blocks = if num > 0 { (num + den - 1) / den } else { 0 };
    let payload_symbols = 8 + blocks * (i64::from(radio.coding_rate) + 4);
    (f64::from(radio.preamble_symbols) + 4.25 + payload_symbols as f64) * t_sym
}

/// Minimum start-to-start spacing imposed by `duty_cycle` on frames of airtime `toa`.
pub fn min_tx_interval(toa: f64, duty_cycle: f64) -> f64 {
    toa / duty_cycle
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPlan {
    pub uplink_channels_mhz: [f64; 3],
    pub uplink_duty_cycle: f64,
    pub rx2_channel_mhz: f64,
    pub downlink_duty_cycle: f64,
    pub rx2_spreading_factor: u8,
}

impl Default for ChannelPlan {
    fn default() -> Self {
        Self {
            uplink_channels_mhz: UPLINK_CHANNELS_MHZ,
            uplink_duty_cycle: 0.01,
            rx2_channel_mhz: RX2_CHANNEL_MHZ,
            downlink_duty_cycle: 0.10,
            rx2_spreading_factor: 12,
        }
    }
}

impl ChannelPlan {
    pub fn validate(&self) -> Result<()> {
        for dc in [self.uplink_duty_cycle, self.downlink_duty_cycle] {
            if !(dc > 0.0 && dc <= 1.0) {
                return Err(domain(format!("duty cycle must be in (0, 1], got {dc}")));
            }
        }
        check_sf(self.rx2_spreading_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Allowed,
    BlockedUntil(f64),
}

/// Duty-cycle tokens. The whole 868.1/868.3/868.5 sub-band is one token;
/// the dedicated RX2 channel has its own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCycleState {
    pub next_allowed_uplink_start: f64,
    pub next_allowed_downlink_start: f64,
    pub uplink_duty_cycle: f64,
    pub downlink_duty_cycle: f64,
}

impl Default for DutyCycleState {
    fn default() -> Self {
        Self::new(0.01, 0.10)
    }
}

impl DutyCycleState {
    pub fn new(uplink_duty_cycle: f64, downlink_duty_cycle: f64) -> Self {
        Self {
            next_allowed_uplink_start: f64::NEG_INFINITY,
            next_allowed_downlink_start: f64::NEG_INFINITY,
            uplink_duty_cycle,
            downlink_duty_cycle,
        }
    }

    pub fn from_plan(plan: &ChannelPlan) -> Self {
        Self::new(plan.uplink_duty_cycle, plan.downlink_duty_cycle)
    }

    pub fn gate(&self, now: f64) -> Gate {
        gate_at(self.next_allowed_uplink_start, now)
    }

    pub fn gate_downlink(&self, now: f64) -> Gate {
        gate_at(self.next_allowed_downlink_start, now)
    }

    pub fn record_uplink(&mut self, start: f64, toa: f64) -> Result<()> {
        record(&mut self.next_allowed_uplink_start, start, toa, self.uplink_duty_cycle)
    }

    pub fn record_downlink(&mut self, start: f64, toa: f64) -> Result<()> {
        record(
            &mut self.next_allowed_downlink_start,
            start,
            toa,
            self.downlink_duty_cycle,
        )
    }
}

fn gate_at(release: f64, now: f64) -> Gate {
    if now >= release {
        Gate::Allowed
    } else {
        Gate::BlockedUntil(release)
    }
}

fn record(release: &mut f64, start: f64, toa: f64, duty_cycle: f64) -> Result<()> {
    if start < *release {
        return Err(Error::GateViolation {
            start,
            release: *release,
        });
    }
    *release = start + min_tx_interval(toa, duty_cycle);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Traffic {
    Confirmed,
    Unconfirmed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AckWindow {
    Rx1,
    Rx2,
    None,
}

impl Traffic {
    pub fn as_str(self) -> &'static str {
        match self {
            Traffic::Confirmed => "confirmed",
            Traffic::Unconfirmed => "unconfirmed",
        }
    }
}

impl AckWindow {
    pub fn as_str(self) -> &'static str {
        match self {
            AckWindow::Rx1 => "rx1",
            AckWindow::Rx2 => "rx2",
            AckWindow::None => "none",
        }
    }
}

/// Everything needed to time one Class A transmission cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxCycleSpec {
    pub payload: usize,
    pub radio: RadioParams,
    pub traffic: Traffic,
    /// Window in which the gateway answers a confirmed uplink.
    pub ack_window: AckWindow,
    pub rx2_spreading_factor: u8,
    /// Delay from the end of the uplink to RX1, seconds.
    pub rx1_delay: f64,
    /// Delay from the end of the uplink to RX2, seconds.
    pub rx2_delay: f64,
    /// Receive window timeout in symbols of the window's SF.
    pub rx_window_symbols: f64,
    /// Application payload of the downlink ACK, bytes.
    pub ack_payload: usize,
}

impl Default for TxCycleSpec {
    fn default() -> Self {
        Self {
            payload: 5,
            radio: RadioParams::default(),
            traffic: Traffic::Unconfirmed,
            ack_window: AckWindow::Rx1,
            rx2_spreading_factor: 12,
            rx1_delay: 1.0,
            rx2_delay: 2.0,
            rx_window_symbols: 5.0,
            ack_payload: 0,
        }
    }
}

impl TxCycleSpec {
    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        check_sf(self.rx2_spreading_factor)?;
        if !(self.rx1_delay > 0.0 && self.rx1_delay < self.rx2_delay) {
            return Err(domain(format!(
                "receive delays must satisfy 0 < rx1 < rx2, got {} / {}",
                self.rx1_delay, self.rx2_delay
            )));
        }
        if !(self.rx_window_symbols > 0.0) {
            return Err(domain("receive window timeout must be positive"));
        }
        if self.rx2_delay - self.rx1_delay <= self.window_timeout(self.radio.spreading_factor) {
            return Err(domain("RX1 window overlaps RX2"));
        }
        time_on_air(&self.radio, self.payload)?;
        Ok(())
    }

    fn radio_at(&self, sf: u8) -> RadioParams {
        RadioParams {
            spreading_factor: sf,
            ..self.radio
        }
    }

    pub fn window_timeout(&self, sf: u8) -> f64 {
        self.rx_window_symbols * self.radio_at(sf).symbol_time()
    }

    pub fn ack_airtime(&self, sf: u8) -> f64 {
        frame_airtime(
            &self.radio_at(sf),
            self.ack_payload + usize::from(self.radio.overhead_bytes),
        )
    }

    pub fn uplink_airtime(&self) -> Result<f64> {
        time_on_air(&self.radio, self.payload)
    }

    /// Window in which an ACK actually arrives under this spec.
    pub fn effective_ack(&self) -> AckWindow {
        match self.traffic {
            Traffic::Unconfirmed => AckWindow::None,
            Traffic::Confirmed => self.ack_window,
        }
    }
}

/// State sequence of one cycle, ending in a zero-length `Sleep`.
///
/// Delays are measured from the end of the uplink. A window that carries
/// the ACK stays open for the ACK airtime; an ACK in RX1 suppresses RX2.
pub fn build_cycle_timeline(spec: &TxCycleSpec, toa_uplink: f64) -> Vec<(DeviceState, f64)> {
    timeline_for_ack(spec, toa_uplink, spec.effective_ack())
}

/// Cycle timeline when the ACK actually arrives in `ack`, which may
/// differ from the configured window if the gateway was blocked.
pub fn timeline_for_ack(spec: &TxCycleSpec, toa_uplink: f64, ack: AckWindow) -> Vec<(DeviceState, f64)> {
    let sf = spec.radio.spreading_factor;
    let mut timeline = vec![(DeviceState::Tx, toa_uplink), (DeviceState::Idle, spec.rx1_delay)];
    let rx1 = if ack == AckWindow::Rx1 {
        spec.ack_airtime(sf)
    } else {
        spec.window_timeout(sf)
    };
    timeline.push((DeviceState::Rx1, rx1));
    if ack != AckWindow::Rx1 {
        let sf2 = spec.rx2_spreading_factor;
        timeline.push((DeviceState::Idle, spec.rx2_delay - spec.rx1_delay - rx1));
        let rx2 = if ack == AckWindow::Rx2 {
            spec.ack_airtime(sf2)
        } else {
            spec.window_timeout(sf2)
        };
        timeline.push((DeviceState::Rx2, rx2));
    }
    timeline.push((DeviceState::Sleep, 0.0));
    timeline
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(s: f64) -> f64 {
        s * 1e3
    }

    #[test]
    fn airtime_sf7_sf8() {
        let sf7 = RadioParams::with_sf(7);
        let sf8 = RadioParams::with_sf(8);
        assert!((ms(time_on_air(&sf7, 0).unwrap()) - 46.336).abs() < 1e-9);
        assert!((ms(time_on_air(&sf7, 5).unwrap()) - 51.456).abs() < 1e-9);
        assert!((ms(time_on_air(&sf8, 50).unwrap()) - 215.552).abs() < 1e-9);
        assert!((ms(time_on_air(&sf8, 100).unwrap()) - 338.432).abs() < 1e-9);
    }

    #[test]
    fn payload_limit() {
        assert!(time_on_air(&RadioParams::with_sf(7), 222).is_ok());
        assert!(time_on_air(&RadioParams::with_sf(7), 223).is_err());
        assert!(time_on_air(&RadioParams::with_sf(12), 52).is_err());
        assert!(time_on_air(&RadioParams::with_sf(13), 5).is_err());
    }

    #[test]
    fn low_data_rate_only_at_sf11_and_up() {
        for sf in 7..=10 {
            assert!(!RadioParams::with_sf(sf).low_data_rate_optimize());
        }
        assert!(RadioParams::with_sf(11).low_data_rate_optimize());
        assert!(RadioParams::with_sf(12).low_data_rate_optimize());
    }

    #[test]
    fn min_interval() {
        assert!((min_tx_interval(0.05146, 0.01) - 5.146).abs() < 1e-12);
        assert!((min_tx_interval(0.11802, 0.01) - 11.802).abs() < 1e-12);
        assert_eq!(min_tx_interval(0.3, 1.0), 0.3);
    }

    #[test]
    fn gate_and_record() {
        let mut dc = DutyCycleState::default();
        assert_eq!(dc.gate(0.0), Gate::Allowed);
        assert_eq!(dc.gate(-5.0), Gate::Allowed);
        dc.record_uplink(0.0, 0.05146).unwrap();
        match dc.gate(3.0) {
            Gate::BlockedUntil(t) => assert!((t - 5.146).abs() < 1e-12),
            g => panic!("unexpected {g:?}"),
        }
        assert_eq!(dc.gate(dc.next_allowed_uplink_start), Gate::Allowed);
        assert!(matches!(dc.record_uplink(1.0, 0.05), Err(Error::GateViolation { .. })));

        let mut dc = DutyCycleState::default();
        dc.record_uplink(0.0, 0.04634).unwrap();
        assert!((dc.next_allowed_uplink_start - 4.634).abs() < 1e-12);
        dc.record_uplink(100.0, 0.05146).unwrap();
        assert!((dc.next_allowed_uplink_start - 105.146).abs() < 1e-9);
        dc.record_uplink(200.0, 0.0).unwrap();
        assert_eq!(dc.next_allowed_uplink_start, 200.0);
    }

    #[test]
    fn unconfirmed_timeline() {
        let spec = TxCycleSpec::default();
        let toa = spec.uplink_airtime().unwrap();
        let tl = build_cycle_timeline(&spec, toa);
        let states: Vec<_> = tl.iter().map(|s| s.0).collect();
        use DeviceState::*;
        assert_eq!(states, vec![Tx, Idle, Rx1, Idle, Rx2, Sleep]);
        assert!((tl[0].1 - 0.051456).abs() < 1e-12);
        assert_eq!(tl[1].1, 1.0);
        assert!((tl[2].1 - 5.0 * 1.024e-3).abs() < 1e-12);
        assert!((tl[1].1 + tl[2].1 + tl[3].1 - 2.0).abs() < 1e-12);
        assert!((tl[4].1 - 5.0 * 32.768e-3).abs() < 1e-12);
        assert_eq!(tl[5].1, 0.0);
    }

    #[test]
    fn confirmed_rx1_skips_rx2() {
        let spec = TxCycleSpec {
            traffic: Traffic::Confirmed,
            ..TxCycleSpec::default()
        };
        let tl = build_cycle_timeline(&spec, spec.uplink_airtime().unwrap());
        assert!(tl.iter().all(|s| s.0 != DeviceState::Rx2));
        assert!((tl[2].1 - 0.046336).abs() < 1e-12);
        assert_eq!(tl.last().unwrap().0, DeviceState::Sleep);
    }

    #[test]
    fn confirmed_rx2_ack_uses_rx2_sf() {
        let spec = TxCycleSpec {
            traffic: Traffic::Confirmed,
            ack_window: AckWindow::Rx2,
            ..TxCycleSpec::default()
        };
        let tl = build_cycle_timeline(&spec, spec.uplink_airtime().unwrap());
        let rx2 = tl.iter().find(|s| s.0 == DeviceState::Rx2).unwrap().1;
        assert!((rx2 - spec.ack_airtime(12)).abs() < 1e-15);
        assert!(rx2 > 1.0);
    }

    #[test]
    fn rx2_sf_override() {
        let spec = TxCycleSpec {
            rx2_spreading_factor: 7,
            ..TxCycleSpec::default()
        };
        let tl = build_cycle_timeline(&spec, spec.uplink_airtime().unwrap());
        let rx2 = tl.iter().find(|s| s.0 == DeviceState::Rx2).unwrap().1;
        assert!((rx2 - 5.0 * 1.024e-3).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(TxCycleSpec::default().validate().is_ok());
        assert!(TxCycleSpec {
            rx1_delay: 2.0,
            ..TxCycleSpec::default()
        }
        .validate()
        .is_err());
        assert!(TxCycleSpec {
            payload: 300,
            ..TxCycleSpec::default()
        }
        .validate()
        .is_err());
        assert!(TxCycleSpec {
            rx2_spreading_factor: 6,
            ..TxCycleSpec::default()
        }
        .validate()
        .is_err());
    }
}
