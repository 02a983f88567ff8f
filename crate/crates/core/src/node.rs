//! Sensor node state: per-unit power states, battery, transmit queue and the
//! node's energy ledger.
//!
//! All battery movement goes through [`SensorNode::spend`] or
//! [`SensorNode::harvest`], each of which writes the same amount to the
//! ledger, so `initial_battery - battery == ledger.total()` holds at all times.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{
    EnergyLedger, EnergyParams, PowerState, StateTransition, SubCategory, UnitKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const SINK: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_sink(self) -> bool {
        self == NodeId::SINK
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PacketClass {
    SensedData,
    NeighborMonitor,
    Security,
    LocalControl,
    GlobalControl,
    SinkControl,
    Ack,
}

impl PacketClass {
    pub const ALL: [PacketClass; 7] = [
        PacketClass::SensedData,
        PacketClass::NeighborMonitor,
        PacketClass::Security,
        PacketClass::LocalControl,
        PacketClass::GlobalControl,
        PacketClass::SinkControl,
        PacketClass::Ack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PacketClass::SensedData => "sensed_data",
            PacketClass::NeighborMonitor => "neighbor_monitor",
            PacketClass::Security => "security",
            PacketClass::LocalControl => "local_control",
            PacketClass::GlobalControl => "global_control",
            PacketClass::SinkControl => "sink_control",
            PacketClass::Ack => "ack",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    pub class: PacketClass,
    pub origin: NodeId,
    pub sender: NodeId,
    /// `None` for broadcasts.
    pub next_hop: Option<NodeId>,
    pub size: u32,
    pub hops: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NodeError {
    #[error("node {node}: no legal transition {from:?} -> {to:?} for {unit:?}")]
    IllegalTransition {
        node: NodeId,
        unit: UnitKind,
        from: PowerState,
        to: PowerState,
    },
    #[error("node {0} is dead")]
    Dead(NodeId),
}

/// Outcome of pushing onto a full queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueFull;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorNode {
    pub id: NodeId,
    pub position: (f64, f64),
    pub battery: f64,
    pub initial_battery: f64,
    pub battery_capacity: f64,
    /// Mains-powered nodes (the sink) record charges but never drain.
    pub mains_powered: bool,
    pub mains_draw: f64,
    pub unit_state: [PowerState; 4],
    /// Time of each unit's last transition.
    pub dwell_since: [f64; 4],
    /// Dwell energy has been charged up to this time for all units.
    pub settled_at: f64,
    /// Accumulated seconds per (unit, state).
    pub dwell_time: [[f64; 4]; 4],
    pub queue: VecDeque<Packet>,
    pub queue_capacity: usize,
    pub ledger: EnergyLedger,
    pub alive: bool,
    pub death_time: Option<f64>,
    pub retry_count: HashMap<u64, u32>,
}

impl SensorNode {
    /// A battery-powered node with every unit Idle at time 0 and a full battery.
    pub fn new(id: NodeId, position: (f64, f64), params: &EnergyParams, queue_capacity: usize) -> Self {
        SensorNode {
            id,
            position,
            battery: params.battery_capacity,
            initial_battery: params.battery_capacity,
            battery_capacity: params.battery_capacity,
            mains_powered: false,
            mains_draw: 0.0,
            unit_state: [PowerState::Idle; 4],
            dwell_since: [0.0; 4],
            settled_at: 0.0,
            dwell_time: [[0.0; 4]; 4],
            queue: VecDeque::with_capacity(queue_capacity),
            queue_capacity,
            ledger: EnergyLedger::new(),
            alive: true,
            death_time: None,
            retry_count: HashMap::new(),
        }
    }

    pub fn new_sink(position: (f64, f64), params: &EnergyParams, queue_capacity: usize) -> Self {
        let mut n = SensorNode::new(NodeId::SINK, position, params, queue_capacity);
        n.mains_powered = true;
        n
    }

    pub fn state(&self, unit: UnitKind) -> PowerState {
        self.unit_state[unit.index()]
    }

    /// Energy that has left this node's supply (battery or mains) so far.
    pub fn drained(&self) -> f64 {
        (self.initial_battery - self.battery) + self.mains_draw
    }

    /// Combined draw of all units in their current states, in watts.
    pub fn current_draw(&self, params: &EnergyParams) -> f64 {
        UnitKind::ALL
            .iter()
            .map(|&u| params.state_power(u, self.state(u)))
            .sum()
    }

    /// Draw `amount` from the supply and record it against `sub`.
    ///
    /// A battery node pays at most its remaining charge; the ledger records
    /// exactly what was paid. Hitting zero kills the node at `now`.
    /// Returns the amount actually paid.
    pub fn spend(&mut self, sub: SubCategory, amount: f64, now: f64) -> f64 {
        debug_assert!(sub != SubCategory::Harvest);
        debug_assert!(amount >= 0.0, "negative spend {amount} to {sub}");
        if !self.alive || amount <= 0.0 {
            return 0.0;
        }
        let paid = if self.mains_powered {
            self.mains_draw += amount;
            amount
        } else {
            let paid = amount.min(self.battery);
            self.battery -= paid;
            paid
        };
        self.ledger
            .charge(sub, paid)
            .expect("spend amounts are non-negative");
        if !self.mains_powered && self.battery <= 0.0 {
            self.battery = 0.0;
            self.kill(now);
        }
        debug_assert!(self.reconciles(1e-9), "ledger/battery mismatch at node {}", self.id);
        paid
    }

    /// Battery bookkeeping shared by every charge path: floors at zero and
    /// makes death permanent. The amount is booked to Individual/StateDwell.
    pub fn drain(&mut self, amount: f64, now: f64) -> f64 {
        self.spend(SubCategory::StateDwell, amount, now)
    }

    pub(crate) fn kill(&mut self, now: f64) {
        if self.alive {
            self.alive = false;
            self.death_time = Some(now);
        }
    }

    /// Ledger and supply agree to within `rel` of the energy moved.
    pub fn reconciles(&self, rel: f64) -> bool {
        let scale = self.ledger.total().abs().max(self.initial_battery).max(1e-300);
        (self.drained() - self.ledger.total()).abs() <= rel * scale
    }

    /// Charge dwell energy of every unit for the time since the last settle.
    /// Transceiver Idle time is idle listening; everything else is state dwell.
    pub fn settle(&mut self, now: f64, params: &EnergyParams) {
        if !self.alive || now <= self.settled_at {
            return;
        }
        let dt = now - self.settled_at;
        for unit in UnitKind::ALL {
            let state = self.state(unit);
            self.dwell_time[unit.index()][state.index()] += dt;
        }
        self.settled_at = now;
        for unit in UnitKind::ALL {
            let state = self.state(unit);
            let energy = params.state_power(unit, state) * dt;
            self.spend(dwell_category(unit, state), energy, now);
            if !self.alive {
                break;
            }
        }
    }

    /// Switch `unit` to `target`, charging the ending state's dwell and the
    /// switch cost.
    pub fn apply_transition(
        &mut self,
        unit: UnitKind,
        target: PowerState,
        now: f64,
        params: &EnergyParams,
    ) -> Result<(), NodeError> {
        if !self.alive {
            return Err(NodeError::Dead(self.id));
        }
        let from = self.state(unit);
        let transition = StateTransition::between(from, target).ok_or(NodeError::IllegalTransition {
            node: self.id,
            unit,
            from,
            to: target,
        })?;
        self.settle(now, params);
        if !self.alive {
            return Err(NodeError::Dead(self.id));
        }
        self.unit_state[unit.index()] = target;
        self.dwell_since[unit.index()] = now;
        self.spend(SubCategory::Transition, params.transition_cost(unit, transition), now);
        Ok(())
    }

    /// Credit harvested energy for an interval of `dt` seconds, capped at the
    /// battery's headroom. Returns the credited amount.
    pub fn harvest(&mut self, dt: f64, params: &EnergyParams) -> f64 {
        if !self.alive || self.mains_powered || dt <= 0.0 || params.harvest_rate <= 0.0 {
            return 0.0;
        }
        let credit = (params.harvest_rate * dt).min(self.battery_capacity - self.battery);
        if credit <= 0.0 {
            return 0.0;
        }
        self.battery += credit;
        self.ledger
            .charge(SubCategory::Harvest, credit)
            .expect("credit is positive");
        credit
    }

    /// Transmit-queue occupancy ratio.
    pub fn busy_degree(&self) -> f64 {
        if self.queue_capacity == 0 {
            return 1.0;
        }
        self.queue.len() as f64 / self.queue_capacity as f64
    }

    pub fn enqueue(&mut self, packet: Packet) -> Result<(), QueueFull> {
        if self.queue.len() >= self.queue_capacity {
            return Err(QueueFull);
        }
        self.queue.push_back(packet);
        Ok(())
    }
}

pub(crate) fn dwell_category(unit: UnitKind, state: PowerState) -> SubCategory {
    if unit == UnitKind::Transceiver && state == PowerState::Idle {
        SubCategory::IdleListen
    } else {
        SubCategory::StateDwell
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node_with(params: &EnergyParams) -> SensorNode {
        SensorNode::new(NodeId(1), (0.0, 0.0), params, 10)
    }

    #[test]
    fn transceiver_idle_to_sleep_charges_idle_listening() {
        let mut p = EnergyParams::zeroed();
        p.state_power.transceiver.idle = 1e-3;
        p.transition_cost.transceiver.idle_to_sleep = 0.0025;
        let mut n = node_with(&p);
        n.apply_transition(UnitKind::Transceiver, PowerState::Sleep, 10.0, &p).unwrap();
        assert!((n.ledger.get(SubCategory::IdleListen) - 0.01).abs() < 1e-15);
        assert_eq!(n.ledger.get(SubCategory::Transition), 0.0025);
        assert_eq!(n.ledger.get(SubCategory::StateDwell), 0.0);
        assert_eq!(n.state(UnitKind::Transceiver), PowerState::Sleep);
        assert!(n.reconciles(1e-12));
    }

    #[test]
    fn zero_dwell_zero_cost_leaves_battery() {
        let p = EnergyParams::zeroed();
        let mut n = node_with(&p);
        n.apply_transition(UnitKind::Memory, PowerState::Sleep, 0.0, &p).unwrap();
        assert_eq!(n.battery, p.battery_capacity);
    }

    #[test]
    fn full_cycle_matches_hand_ledger() {
        // Processing unit runs Idle -> Sleep -> Awake -> Active -> Idle at t = 2, 3, 5, 9.
        let mut p = EnergyParams::zeroed();
        p.battery_capacity = 100.0;
        p.state_power.processing = crate::energy::StatePowers { sleep: 0.25, awake: 0.5, active: 2.0, idle: 1.0 };
        p.transition_cost.processing = crate::energy::TransitionCosts {
            idle_to_sleep: 0.125,
            sleep_to_awake: 0.375,
            awake_to_active: 0.0625,
            active_to_idle: 0.03125,
            idle_to_active: 99.0,
        };
        let mut n = node_with(&p);
        let steps = [(PowerState::Sleep, 2.0), (PowerState::Awake, 3.0), (PowerState::Active, 5.0), (PowerState::Idle, 9.0)];
        for (s, t) in steps {
            n.apply_transition(UnitKind::Processing, s, t, &p).unwrap();
        }
        // idle 2 s, sleep 1 s, awake 2 s, active 4 s
        let dwell = 1.0 * 2.0 + 0.25 * 1.0 + 0.5 * 2.0 + 2.0 * 4.0;
        let switches = 0.125 + 0.375 + 0.0625 + 0.03125;
        assert_eq!(n.ledger.get(SubCategory::StateDwell), dwell);
        assert_eq!(n.ledger.get(SubCategory::Transition), switches);
        assert_eq!(n.battery, 100.0 - dwell - switches);
        let row = n.dwell_time[UnitKind::Processing.index()];
        assert_eq!(row.iter().sum::<f64>(), 9.0);
    }

    #[test]
    fn illegal_transition_rejected() {
        let p = EnergyParams::zeroed();
        let mut n = node_with(&p);
        n.apply_transition(UnitKind::Sensing, PowerState::Sleep, 1.0, &p).unwrap();
        let err = n.apply_transition(UnitKind::Sensing, PowerState::Active, 2.0, &p).unwrap_err();
        assert!(matches!(err, NodeError::IllegalTransition { .. }));
    }

    #[test]
    fn harvest_cases() {
        let p = EnergyParams::zeroed();
        let mut n = node_with(&p);
        n.harvest(100.0, &p);
        assert_eq!(n.battery, 1.0);
        assert_eq!(n.ledger.get(SubCategory::Harvest), 0.0);

        let mut p = EnergyParams::zeroed();
        p.harvest_rate = 1e-3;
        let mut n = node_with(&p);
        assert_eq!(n.harvest(1000.0, &p), 0.0);

        n.spend(SubCategory::Route, 0.05, 0.0);
        let credited = n.harvest(100.0, &p);
        assert!((credited - 0.05).abs() < 1e-15);
        assert!((n.battery - 1.0).abs() < 1e-15);
        assert!((n.ledger.get(SubCategory::Harvest) + 0.05).abs() < 1e-15);
        assert!(n.reconciles(1e-12));
    }

    #[test]
    fn dead_nodes_do_not_revive() {
        let mut p = EnergyParams::zeroed();
        p.harvest_rate = 1.0;
        let mut n = node_with(&p);
        n.spend(SubCategory::Route, 5.0, 3.0);
        assert!(!n.alive);
        assert_eq!(n.death_time, Some(3.0));
        assert_eq!(n.harvest(10.0, &p), 0.0);
        assert_eq!(n.battery, 0.0);
        let before = n.ledger;
        n.spend(SubCategory::Mon, 1.0, 4.0);
        n.settle(10.0, &p);
        assert_eq!(n.ledger, before);
        assert!(n.apply_transition(UnitKind::Memory, PowerState::Sleep, 11.0, &p).is_err());
    }

    #[test]
    fn busy_degree_ratio() {
        let p = EnergyParams::zeroed();
        let mut n = node_with(&p);
        assert_eq!(n.busy_degree(), 0.0);
        let pkt = Packet {
            id: 0,
            class: PacketClass::SensedData,
            origin: n.id,
            sender: n.id,
            next_hop: None,
            size: 10,
            hops: 0,
        };
        for _ in 0..3 {
            n.enqueue(pkt.clone()).unwrap();
        }
        assert!((n.busy_degree() - 0.3).abs() < 1e-15);
        for _ in 0..7 {
            n.enqueue(pkt.clone()).unwrap();
        }
        assert_eq!(n.busy_degree(), 1.0);
        assert_eq!(n.enqueue(pkt), Err(QueueFull));
    }

    #[test]
    fn drain_floor_and_absorbing_death() {
        let p = EnergyParams::zeroed();
        let mut n = node_with(&p);
        n.drain(0.0, 0.0);
        assert_eq!(n.battery, 1.0);
        n.drain(0.4, 1.0);
        assert!((n.battery - 0.6).abs() < 1e-15 && n.alive);

        let mut n = node_with(&p);
        n.drain(0.7, 0.0);
        n.drain(0.5, 2.0);
        assert_eq!(n.battery, 0.0);
        assert!(!n.alive);
        assert_eq!(n.death_time, Some(2.0));
        n.drain(0.5, 3.0);
        assert_eq!(n.battery, 0.0);
        assert!((n.ledger.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sink_never_dies() {
        let p = EnergyParams::zeroed();
        let mut s = SensorNode::new_sink((0.0, 0.0), &p, 4);
        s.spend(SubCategory::Route, 10.0, 1.0);
        assert!(s.alive);
        assert_eq!(s.battery, p.battery_capacity);
        assert_eq!(s.drained(), 10.0);
        assert!(s.reconciles(1e-12));
    }
}
