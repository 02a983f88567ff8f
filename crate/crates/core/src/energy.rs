//! Hardware units, power states, per-unit cost tables and the energy ledger.
//!
//! Every joule a node spends is recorded against exactly one
//! [`SubCategory`], and every sub-category belongs to exactly one
//! [`Constituent`]. Constituent totals are plain sums of their
//! sub-categories.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("duration must be >= 0, got {0}")]
    NegativeDuration(f64),
    #[error("charge to {sub} must be >= 0, got {amount}")]
    NegativeCharge { sub: SubCategory, amount: f64 },
    #[error("{field}: {constraint}")]
    InvalidParams { field: String, constraint: String },
}

/// Hardware units of a sensor node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Processing,
    Sensing,
    Memory,
    Transceiver,
}

impl UnitKind {
    pub const ALL: [UnitKind; 4] = [
        UnitKind::Processing,
        UnitKind::Sensing,
        UnitKind::Memory,
        UnitKind::Transceiver,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            UnitKind::Processing => "processing",
            UnitKind::Sensing => "sensing",
            UnitKind::Memory => "memory",
            UnitKind::Transceiver => "transceiver",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerState {
    Sleep,
    Awake,
    Active,
    Idle,
}

impl PowerState {
    pub const ALL: [PowerState; 4] = [
        PowerState::Sleep,
        PowerState::Awake,
        PowerState::Active,
        PowerState::Idle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PowerState::Sleep => "sleep",
            PowerState::Awake => "awake",
            PowerState::Active => "active",
            PowerState::Idle => "idle",
        }
    }
}

/// The five legal switches between power states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateTransition {
    IdleToSleep,
    SleepToAwake,
    AwakeToActive,
    ActiveToIdle,
    IdleToActive,
}

impl StateTransition {
    pub const ALL: [StateTransition; 5] = [
        StateTransition::IdleToSleep,
        StateTransition::SleepToAwake,
        StateTransition::AwakeToActive,
        StateTransition::ActiveToIdle,
        StateTransition::IdleToActive,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `(from, to)` pair for this transition.
    pub fn endpoints(self) -> (PowerState, PowerState) {
        use PowerState::*;
        match self {
            StateTransition::IdleToSleep => (Idle, Sleep),
            StateTransition::SleepToAwake => (Sleep, Awake),
            StateTransition::AwakeToActive => (Awake, Active),
            StateTransition::ActiveToIdle => (Active, Idle),
            StateTransition::IdleToActive => (Idle, Active),
        }
    }

    /// The transition taking `from` to `to`, if that switch is legal.
    pub fn between(from: PowerState, to: PowerState) -> Option<StateTransition> {
        StateTransition::ALL
            .into_iter()
            .find(|t| t.endpoints() == (from, to))
    }
}

/// Steady-state draw of one unit in each state, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatePowers {
    pub sleep: f64,
    pub awake: f64,
    pub active: f64,
    pub idle: f64,
}

impl StatePowers {
    pub fn get(&self, state: PowerState) -> f64 {
        match state {
            PowerState::Sleep => self.sleep,
            PowerState::Awake => self.awake,
            PowerState::Active => self.active,
            PowerState::Idle => self.idle,
        }
    }

    pub fn set(&mut self, state: PowerState, watts: f64) {
        match state {
            PowerState::Sleep => self.sleep = watts,
            PowerState::Awake => self.awake = watts,
            PowerState::Active => self.active = watts,
            PowerState::Idle => self.idle = watts,
        }
    }
}

/// One-off cost of each switch, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionCosts {
    pub idle_to_sleep: f64,
    pub sleep_to_awake: f64,
    pub awake_to_active: f64,
    pub active_to_idle: f64,
    pub idle_to_active: f64,
}

impl TransitionCosts {
    pub fn get(&self, t: StateTransition) -> f64 {
        match t {
            StateTransition::IdleToSleep => self.idle_to_sleep,
            StateTransition::SleepToAwake => self.sleep_to_awake,
            StateTransition::AwakeToActive => self.awake_to_active,
            StateTransition::ActiveToIdle => self.active_to_idle,
            StateTransition::IdleToActive => self.idle_to_active,
        }
    }

    pub fn set(&mut self, t: StateTransition, joules: f64) {
        match t {
            StateTransition::IdleToSleep => self.idle_to_sleep = joules,
            StateTransition::SleepToAwake => self.sleep_to_awake = joules,
            StateTransition::AwakeToActive => self.awake_to_active = joules,
            StateTransition::ActiveToIdle => self.active_to_idle = joules,
            StateTransition::IdleToActive => self.idle_to_active = joules,
        }
    }
}

/// A value per hardware unit, laid out as named JSON fields.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerUnit<T> {
    pub processing: T,
    pub sensing: T,
    pub memory: T,
    pub transceiver: T,
}

impl<T> PerUnit<T> {
    pub fn get(&self, unit: UnitKind) -> &T {
        match unit {
            UnitKind::Processing => &self.processing,
            UnitKind::Sensing => &self.sensing,
            UnitKind::Memory => &self.memory,
            UnitKind::Transceiver => &self.transceiver,
        }
    }

    pub fn get_mut(&mut self, unit: UnitKind) -> &mut T {
        match unit {
            UnitKind::Processing => &mut self.processing,
            UnitKind::Sensing => &mut self.sensing,
            UnitKind::Memory => &mut self.memory,
            UnitKind::Transceiver => &mut self.transceiver,
        }
    }
}

/// The physics table: unit draws, switch costs, radio costs and battery.
///
/// When `sensing_power_coeff > 0` the sensing unit's Active draw is not taken
/// from `state_power` but derived per run as `sensing_power_coeff * r_s^2`
/// (see [`EnergyParams::for_sensing_radius`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    pub state_power: PerUnit<StatePowers>,
    pub transition_cost: PerUnit<TransitionCosts>,
    /// J/byte, transmit electronics.
    pub tx_elec: f64,
    /// J/byte, receive electronics.
    pub rx_elec: f64,
    /// J/(byte * m^path_loss_exponent).
    pub tx_amp: f64,
    pub path_loss_exponent: f64,
    /// W/m^2.
    pub sensing_power_coeff: f64,
    /// bytes/s.
    pub bitrate: f64,
    pub header_bytes: u32,
    /// J.
    pub battery_capacity: f64,
    /// W, constant-rate harvesting; 0 disables it.
    pub harvest_rate: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        let sp = |sleep, awake, active, idle| StatePowers {
            sleep,
            awake,
            active,
            idle,
        };
        let tc = |x: f64| TransitionCosts {
            idle_to_sleep: x,
            sleep_to_awake: 4.0 * x,
            awake_to_active: 2.0 * x,
            active_to_idle: x,
            idle_to_active: x,
        };
        EnergyParams {
            state_power: PerUnit {
                processing: sp(1e-7, 1e-4, 6e-3, 1e-6),
                sensing: sp(1e-7, 1e-5, 4e-2, 1e-6),
                memory: sp(1e-7, 1e-5, 1e-3, 1e-6),
                transceiver: sp(1e-7, 1e-4, 2e-6, 2e-6),
            },
            transition_cost: PerUnit {
                processing: tc(1e-8),
                sensing: tc(1e-8),
                memory: tc(1e-8),
                transceiver: tc(2e-8),
            },
            tx_elec: 4e-7,
            rx_elec: 4e-7,
            tx_amp: 8e-10,
            path_loss_exponent: 2.0,
            sensing_power_coeff: 1e-4,
            bitrate: 31_250.0,
            header_bytes: 8,
            battery_capacity: 0.25,
            harvest_rate: 0.0,
        }
    }
}

impl EnergyParams {
    /// All-zero tables with unit bitrate and capacity; handy as a test base.
    pub fn zeroed() -> Self {
        EnergyParams {
            state_power: PerUnit::default(),
            transition_cost: PerUnit::default(),
            tx_elec: 0.0,
            rx_elec: 0.0,
            tx_amp: 0.0,
            path_loss_exponent: 2.0,
            sensing_power_coeff: 0.0,
            bitrate: 1.0,
            header_bytes: 1,
            battery_capacity: 1.0,
            harvest_rate: 0.0,
        }
    }

    pub fn state_power(&self, unit: UnitKind, state: PowerState) -> f64 {
        self.state_power.get(unit).get(state)
    }

    pub fn transition_cost(&self, unit: UnitKind, transition: StateTransition) -> f64 {
        self.transition_cost.get(unit).get(transition)
    }

    /// Copy of these params with the sensing unit's Active draw set to
    /// `sensing_power_coeff * radius^2`. A zero coefficient keeps the table value.
    pub fn for_sensing_radius(&self, radius: f64) -> EnergyParams {
        let mut p = self.clone();
        if self.sensing_power_coeff > 0.0 {
            p.state_power.sensing.active = self.sensing_power_coeff * radius * radius;
        }
        p
    }

    /// Seconds needed to put `bytes` on the air.
    pub fn airtime(&self, bytes: u32) -> f64 {
        f64::from(bytes) / self.bitrate
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        let invalid = |field: String, constraint: &str| EnergyError::InvalidParams {
            field,
            constraint: constraint.to_string(),
        };
        for unit in UnitKind::ALL {
            for state in PowerState::ALL {
                let w = self.state_power(unit, state);
                if !(w.is_finite() && w >= 0.0) {
                    return Err(invalid(
                        format!("state_power.{}.{}", unit.name(), state.name()),
                        "must be >= 0",
                    ));
                }
            }
            for t in StateTransition::ALL {
                let j = self.transition_cost(unit, t);
                if !(j.is_finite() && j >= 0.0) {
                    return Err(invalid(
                        format!("transition_cost.{}.{}", unit.name(), transition_key(t)),
                        "must be >= 0",
                    ));
                }
            }
            let active = self.state_power(unit, PowerState::Active);
            let idle = self.state_power(unit, PowerState::Idle);
            let sleep = self.state_power(unit, PowerState::Sleep);
            // The sensing Active draw is radius-derived when the coefficient is set.
            let check_active = !(unit == UnitKind::Sensing && self.sensing_power_coeff > 0.0);
            if check_active && active < idle {
                return Err(invalid(
                    format!("state_power.{}.active", unit.name()),
                    "must be >= state_power idle",
                ));
            }
            if idle < sleep {
                return Err(invalid(
                    format!("state_power.{}.idle", unit.name()),
                    "must be >= state_power sleep",
                ));
            }
        }
        let non_negative = [
            ("tx_elec", self.tx_elec),
            ("rx_elec", self.rx_elec),
            ("tx_amp", self.tx_amp),
            ("path_loss_exponent", self.path_loss_exponent),
            ("sensing_power_coeff", self.sensing_power_coeff),
            ("harvest_rate", self.harvest_rate),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name.to_string(), "must be >= 0"));
            }
        }
        if !(self.bitrate.is_finite() && self.bitrate > 0.0) {
            return Err(invalid("bitrate".into(), "must be > 0"));
        }
        if !(self.battery_capacity.is_finite() && self.battery_capacity > 0.0) {
            return Err(invalid("battery_capacity".into(), "must be > 0"));
        }
        Ok(())
    }
}

pub(crate) fn transition_key(t: StateTransition) -> &'static str {
    match t {
        StateTransition::IdleToSleep => "idle_to_sleep",
        StateTransition::SleepToAwake => "sleep_to_awake",
        StateTransition::AwakeToActive => "awake_to_active",
        StateTransition::ActiveToIdle => "active_to_idle",
        StateTransition::IdleToActive => "idle_to_active",
    }
}

/// Energy of one unit dwelling in `state` for `duration` seconds.
pub fn state_energy(
    unit: UnitKind,
    state: PowerState,
    duration: f64,
    params: &EnergyParams,
) -> Result<f64, EnergyError> {
    if duration.is_nan() || duration < 0.0 {
        return Err(EnergyError::NegativeDuration(duration));
    }
    Ok(params.state_power(unit, state) * duration)
}

pub fn transition_energy(unit: UnitKind, transition: StateTransition, params: &EnergyParams) -> f64 {
    params.transition_cost(unit, transition)
}

/// First-order radio model: electronics plus amplifier over `distance`.
pub fn tx_energy(bytes: u32, distance: f64, params: &EnergyParams) -> f64 {
    let b = f64::from(bytes);
    let reach = if params.path_loss_exponent == 2.0 {
        distance * distance
    } else {
        distance.powf(params.path_loss_exponent)
    };
    params.tx_elec * b + params.tx_amp * b * reach
}

pub fn rx_energy(bytes: u32, params: &EnergyParams) -> f64 {
    params.rx_elec * f64::from(bytes)
}

/// The five energy constituents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Constituent {
    Individual,
    Local,
    Global,
    Sink,
    Environment,
}

impl Constituent {
    pub const ALL: [Constituent; 5] = [
        Constituent::Individual,
        Constituent::Local,
        Constituent::Global,
        Constituent::Sink,
        Constituent::Environment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Constituent::Individual => "individual",
            Constituent::Local => "local",
            Constituent::Global => "global",
            Constituent::Sink => "sink",
            Constituent::Environment => "environment",
        }
    }
}

impl fmt::Display for Constituent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SubCategory {
    StateDwell,
    Transition,
    PacketProcessing,
    Mon,
    Sec,
    IdleListen,
    LocalProto,
    Coll,
    Ohear,
    Topo,
    Route,
    GlobalProto,
    PktLs,
    Snk,
    Harvest,
}

impl SubCategory {
    pub const COUNT: usize = 15;

    pub const ALL: [SubCategory; SubCategory::COUNT] = [
        SubCategory::StateDwell,
        SubCategory::Transition,
        SubCategory::PacketProcessing,
        SubCategory::Mon,
        SubCategory::Sec,
        SubCategory::IdleListen,
        SubCategory::LocalProto,
        SubCategory::Coll,
        SubCategory::Ohear,
        SubCategory::Topo,
        SubCategory::Route,
        SubCategory::GlobalProto,
        SubCategory::PktLs,
        SubCategory::Snk,
        SubCategory::Harvest,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn constituent(self) -> Constituent {
        use SubCategory::*;
        match self {
            StateDwell | Transition | PacketProcessing => Constituent::Individual,
            Mon | Sec | IdleListen | LocalProto | Coll | Ohear => Constituent::Local,
            Topo | Route | GlobalProto | PktLs => Constituent::Global,
            Snk => Constituent::Sink,
            Harvest => Constituent::Environment,
        }
    }

    pub fn name(self) -> &'static str {
        use SubCategory::*;
        match self {
            StateDwell => "state_dwell",
            Transition => "transition",
            PacketProcessing => "packet_processing",
            Mon => "mon",
            Sec => "sec",
            IdleListen => "idle",
            LocalProto => "local_proto",
            Coll => "coll",
            Ohear => "ohear",
            Topo => "topo",
            Route => "route",
            GlobalProto => "global_proto",
            PktLs => "pktls",
            Snk => "snk",
            Harvest => "harvest",
        }
    }
}

impl fmt::Display for SubCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-node joules keyed by sub-category (and hence constituent).
///
/// Environment entries are credits and are stored as non-positive values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    entries: [f64; SubCategory::COUNT],
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `amount` joules against `sub`. Harvest amounts are credited,
    /// i.e. stored with a minus sign.
    pub fn charge(&mut self, sub: SubCategory, amount: f64) -> Result<(), EnergyError> {
        if amount.is_nan() || amount < 0.0 {
            return Err(EnergyError::NegativeCharge { sub, amount });
        }
        let signed = if sub == SubCategory::Harvest { -amount } else { amount };
        self.entries[sub.index()] += signed;
        Ok(())
    }

    pub fn get(&self, sub: SubCategory) -> f64 {
        self.entries[sub.index()]
    }

    pub fn constituent_total(&self, c: Constituent) -> f64 {
        SubCategory::ALL
            .iter()
            .filter(|s| s.constituent() == c)
            .map(|s| self.entries[s.index()])
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// `(constituent, sub-category, joules)` for every cell, in declaration order.
    pub fn iter(&self) -> impl Iterator<Item = (Constituent, SubCategory, f64)> + '_ {
        SubCategory::ALL
            .iter()
            .map(move |&s| (s.constituent(), s, self.entries[s.index()]))
    }
}
