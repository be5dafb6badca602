use std::fmt;

/// Operating state of the end device.
///
/// `Charging` only occurs before the first activation; afterwards the
/// non-operational state is `Off`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeviceState {
    Charging,
    Off,
    WakeUp,
    Sleep,
    Tx,
    Idle,
    Rx1,
    Rx2,
}

impl DeviceState {
    /// True for every state in which the device is powered.
    pub fn is_on(self) -> bool {
        !matches!(self, DeviceState::Charging | DeviceState::Off)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceState::Charging => "charging",
            DeviceState::Off => "off",
            DeviceState::WakeUp => "wakeup",
            DeviceState::Sleep => "sleep",
            DeviceState::Tx => "tx",
            DeviceState::Idle => "idle",
            DeviceState::Rx1 => "rx1",
            DeviceState::Rx2 => "rx2",
        }
    }

    /// Whether `self -> next` is a legal lifecycle transition.
    pub fn can_transition_to(self, next: DeviceState) -> bool {
        use DeviceState::*;
        if self.is_on() && next == Off {
            return true;
        }
        matches!(
            (self, next),
            (Charging, WakeUp)
                | (Off, WakeUp)
                | (WakeUp, Sleep)
                | (Sleep, Tx)
                | (Tx, Idle)
                | (Idle, Rx1)
                | (Idle, Rx2)
                | (Rx1, Sleep)
                | (Rx1, Idle)
                | (Rx2, Sleep)
        )
    }
}

impl fmt::Display for DeviceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
