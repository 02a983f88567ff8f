//! Deterministic discrete-event engine.
//!
//! A run executes sensing, unicast forwarding with acks, collisions,
//! overhearing, neighbor-monitoring beacons, sink floods and harvesting in
//! `(time, seq)` order. Every joule is paid through [`Simulation::pay`] or a
//! unit transition, both of which book it to exactly one ledger cell.
//!
//! Battery depletion between events is found analytically: each node's
//! continuous draw is known, so the time its battery reaches zero is
//! predicted and checked before the next queued event is popped.

pub mod attribution;
pub mod engine;

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, SimConfig};
use crate::energy::{
    rx_energy, tx_energy, Constituent, EnergyLedger, EnergyParams, PowerState, SubCategory, UnitKind,
};
use crate::network::{covering_nodes, deploy, distance, Point, Topology};
use crate::node::{dwell_category, NodeId, Packet, PacketClass, SensorNode};
use crate::output::fmt_num;
use crate::routing::{candidates, emit_monitor_beacon, NeighborInfo, NeighborReport, RoutingPolicy};

pub use attribution::{attribution, Role};
pub use engine::{Event, EventKind, EventQueue};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("expected {expected} positions, got {got}")]
    PositionCount { expected: usize, got: usize },
}

/// Counts of packet work at one node, keyed by the constituent that paid for it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketCounts {
    /// Packet-processing events.
    pub individual: u64,
    /// Local-class packets sent or cleanly received.
    pub local: u64,
    /// Global-class packets sent or cleanly received, plus drops.
    pub global: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeOutcome {
    pub id: NodeId,
    pub death_time: Option<f64>,
    pub initial_battery: f64,
    pub final_battery: f64,
    pub drained: f64,
    pub mains_powered: bool,
    /// Seconds spent per (unit, state).
    pub dwell_time: [[f64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub seed: u64,
    pub policy: String,
    pub monitored_node: NodeId,
    pub lifetime: f64,
    pub censored: bool,
    pub end_time: f64,
    pub ledgers: Vec<EnergyLedger>,
    pub packet_counts: Vec<PacketCounts>,
    pub nodes: Vec<NodeOutcome>,
    pub env_events: u64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub collisions: u64,
}

impl SimResult {
    pub fn monitored_ledger(&self) -> &EnergyLedger {
        &self.ledgers[self.monitored_node.index()]
    }

    pub fn monitored_counts(&self) -> PacketCounts {
        self.packet_counts[self.monitored_node.index()]
    }

    /// Per-node lifetime: death time, or the end of the run if still alive.
    pub fn node_lifetime(&self, id: NodeId) -> (f64, bool) {
        match self.nodes[id.index()].death_time {
            Some(t) => (t, false),
            None => (self.end_time, true),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FloodPurpose {
    Topology,
    Control,
    Requery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Beacon,
    Flood(u64),
    Periodic { security: bool },
}

#[derive(Debug, Default)]
struct MacState {
    /// A TxStart is scheduled or an ack is awaited.
    busy: bool,
    awaiting: Option<u64>,
    transmitting: Option<u64>,
    transmit_end: f64,
    pending_senses: u32,
    pending: VecDeque<Broadcast>,
}

#[derive(Debug)]
struct Transmission {
    id: u64,
    packet: Packet,
    sender: NodeId,
    role: Role,
    flood: Option<u64>,
    report: Option<NeighborReport>,
    /// Nodes where this packet overlapped another in-range transmission.
    corrupted: Vec<NodeId>,
    /// Nodes that were themselves transmitting and could not listen.
    deaf: Vec<NodeId>,
}

/// One simulation instance; owns all node state exclusively.
pub struct Simulation {
    cfg: SimConfig,
    params: EnergyParams,
    policy: RoutingPolicy,
    seed: u64,
    topo: Topology,
    nodes: Vec<SensorNode>,
    alive: Vec<bool>,
    info: Vec<NeighborInfo>,
    mac: Vec<MacState>,
    counts: Vec<PacketCounts>,
    flood_seen: Vec<HashSet<u64>>,
    floods: Vec<FloodPurpose>,
    active: Vec<Transmission>,
    queue: EventQueue,
    now: f64,
    predicted_death: Vec<f64>,
    touched: Vec<bool>,
    touched_list: Vec<NodeId>,
    event_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    mac_rng: ChaCha8Rng,
    monitored: NodeId,
    trace: Option<Vec<String>>,
    next_packet_id: u64,
    next_tx_id: u64,
    env_events: u64,
    generated: u64,
    delivered: u64,
    dropped: u64,
    collisions: u64,
}

const STREAM_DEPLOY: u64 = 0;
const STREAM_EVENTS: u64 = 1;
const STREAM_POLICY: u64 = 2;
const STREAM_MAC: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Run `config` with `seed` to completion.
pub fn run(config: &SimConfig, seed: u64) -> Result<SimResult, SimError> {
    Ok(Simulation::new(config, seed)?.run())
}

impl Simulation {
    /// Validate `config` and deploy nodes from the seed's deployment stream.
    pub fn new(config: &SimConfig, seed: u64) -> Result<Self, SimError> {
        config.validate()?;
        let positions = deploy(&config.deployment.to_deployment(), &mut stream(seed, STREAM_DEPLOY));
        Self::with_positions(config, seed, positions)
    }

    /// Like [`Simulation::new`] but with explicit node positions (index 0 is the sink).
    pub fn with_positions(config: &SimConfig, seed: u64, positions: Vec<Point>) -> Result<Self, SimError> {
        config.validate()?;
        let expected = config.deployment.node_count as usize;
        if positions.len() != expected {
            return Err(SimError::PositionCount {
                expected,
                got: positions.len(),
            });
        }
        let params = config.energy.for_sensing_radius(config.deployment.sensing_radius);
        let q = config.protocol.queue_capacity as usize;
        let topo = Topology::from_positions(positions, config.deployment.tx_radius);
        let nodes: Vec<SensorNode> = topo
            .node_ids()
            .map(|id| {
                let pos = topo.position(id);
                if id.is_sink() {
                    SensorNode::new_sink(pos, &params, q)
                } else {
                    SensorNode::new(id, pos, &params, q)
                }
            })
            .collect();
        let n = nodes.len();
        let monitored = pick_monitored(&topo, config.deployment.to_deployment().centroid());
        let mut sim = Simulation {
            policy: config.policy(),
            cfg: config.clone(),
            params,
            seed,
            topo,
            nodes,
            alive: vec![true; n],
            info: vec![NeighborInfo::new(); n],
            mac: (0..n).map(|_| MacState::default()).collect(),
            counts: vec![PacketCounts::default(); n],
            flood_seen: vec![HashSet::new(); n],
            floods: Vec::new(),
            active: Vec::new(),
            queue: EventQueue::new(),
            now: 0.0,
            predicted_death: vec![f64::INFINITY; n],
            touched: vec![false; n],
            touched_list: Vec::new(),
            event_rng: stream(seed, STREAM_EVENTS),
            policy_rng: stream(seed, STREAM_POLICY),
            mac_rng: stream(seed, STREAM_MAC),
            monitored,
            trace: None,
            next_packet_id: 0,
            next_tx_id: 0,
            env_events: 0,
            generated: 0,
            delivered: 0,
            dropped: 0,
            collisions: 0,
        };
        sim.schedule_initial();
        Ok(sim)
    }

    pub fn monitored_node(&self) -> NodeId {
        self.monitored
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    /// Override the monitored node.
    pub fn set_monitored(&mut self, id: NodeId) {
        self.monitored = id;
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    /// Add one environmental event at `time` on top of the generated stream.
    pub fn inject_env_event(&mut self, time: f64, position: Point) {
        self.queue.schedule(time, EventKind::EnvEvent { position });
    }

    fn schedule_initial(&mut self) {
        let n = self.nodes.len();
        let traffic_on = self.cfg.traffic.event_rate > 0.0;
        if traffic_on {
            self.schedule_next_env_event();
            // network establishment and periodic sink control only matter with traffic
            self.start_flood(FloodPurpose::Topology);
            self.queue
                .schedule(self.cfg.protocol.sink_interval, EventKind::SinkBeacon);
        }
        let phase = |period: f64, id: usize| period * id as f64 / n as f64;
        for i in 1..n {
            let node = NodeId(i as u32);
            if self.policy.uses_beacons() {
                let t = phase(self.cfg.protocol.monitor_interval, i);
                self.queue.schedule(t, EventKind::BeaconDue { node });
            }
            for (interval, security) in [
                (self.cfg.traffic.security_interval, true),
                (self.cfg.traffic.local_control_interval, false),
            ] {
                if interval > 0.0 {
                    self.queue
                        .schedule(phase(interval, i), EventKind::PeriodicBroadcast { node, security });
                }
            }
        }
        if self.params.harvest_rate > 0.0 {
            self.queue
                .schedule(self.cfg.experiment.harvest_tick, EventKind::HarvestTick);
        }
        for i in 0..n {
            self.mark(NodeId(i as u32));
        }
        self.refresh_predictions();
    }

    fn schedule_next_env_event(&mut self) {
        if self.env_events >= self.cfg.traffic.max_events {
            return;
        }
        self.env_events += 1;
        let u: f64 = self.event_rng.random();
        let gap = -(1.0 - u).ln() / self.cfg.traffic.event_rate;
        let x = self.event_rng.random::<f64>() * self.cfg.deployment.width;
        let y = self.event_rng.random::<f64>() * self.cfg.deployment.height;
        self.queue
            .schedule(self.now + gap, EventKind::EnvEvent { position: (x, y) });
    }

    /// Execute events until the monitored node dies or the horizon passes.
    pub fn run(mut self) -> SimResult {
        self.run_loop();
        self.finish()
    }

    /// Like [`Simulation::run`], also returning the event trace lines.
    pub fn run_traced(mut self) -> (SimResult, Vec<String>) {
        if self.trace.is_none() {
            self.enable_trace();
        }
        self.run_loop();
        let trace = self.trace.take().unwrap_or_default();
        (self.finish(), trace)
    }

    fn run_loop(&mut self) {
        let horizon = self.cfg.experiment.max_sim_time;
        loop {
            let next_event = self.queue.peek_time().unwrap_or(f64::INFINITY);
            let (doomed, death_at) = self.earliest_predicted_death();
            if death_at <= next_event && death_at <= horizon {
                self.now = death_at;
                self.deplete(doomed);
            } else if next_event <= horizon {
                let ev = self.queue.pop().expect("peeked");
                self.now = ev.time;
                self.dispatch(ev);
            } else {
                self.now = horizon;
                break;
            }
            self.refresh_predictions();
            if !self.alive[self.monitored.index()] {
                break;
            }
        }
    }

    fn finish(mut self) -> SimResult {
        let end = self.now;
        for i in 0..self.nodes.len() {
            let params = &self.params;
            self.nodes[i].settle(end, params);
        }
        let m = &self.nodes[self.monitored.index()];
        let (lifetime, censored) = match m.death_time {
            Some(t) => (t, false),
            None => (end, true),
        };
        SimResult {
            seed: self.seed,
            policy: self.policy.name().to_string(),
            monitored_node: self.monitored,
            lifetime,
            censored,
            end_time: end,
            ledgers: self.nodes.iter().map(|n| n.ledger).collect(),
            packet_counts: self.counts.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeOutcome {
                    id: n.id,
                    death_time: n.death_time,
                    initial_battery: n.initial_battery,
                    final_battery: n.battery,
                    drained: n.drained(),
                    mains_powered: n.mains_powered,
                    dwell_time: n.dwell_time,
                })
                .collect(),
            env_events: self.env_events,
            generated: self.generated,
            delivered: self.delivered,
            dropped: self.dropped,
            collisions: self.collisions,
        }
    }

    fn earliest_predicted_death(&self) -> (NodeId, f64) {
        let mut best = (NodeId::SINK, f64::INFINITY);
        for (i, &t) in self.predicted_death.iter().enumerate() {
            if t < best.1 {
                best = (NodeId(i as u32), t);
            }
        }
        best
    }

    fn mark(&mut self, id: NodeId) {
        if !self.touched[id.index()] {
            self.touched[id.index()] = true;
            self.touched_list.push(id);
        }
    }

    fn refresh_predictions(&mut self) {
        for id in std::mem::take(&mut self.touched_list) {
            let i = id.index();
            self.touched[i] = false;
            let n = &self.nodes[i];
            self.alive[i] = n.alive;
            self.predicted_death[i] = if !n.alive || n.mains_powered {
                f64::INFINITY
            } else {
                let draw = n.current_draw(&self.params);
                if draw > 0.0 {
                    n.settled_at + n.battery / draw
                } else {
                    f64::INFINITY
                }
            };
        }
    }

    fn deplete(&mut self, id: NodeId) {
        let now = self.now;
        self.record_trace("depletion", Some(id), String::new());
        let params = &self.params;
        let node = &mut self.nodes[id.index()];
        node.settle(now, params);
        if node.alive && node.battery <= 1e-9 * node.battery_capacity {
            // rounding residue of the analytic prediction
            let unit = UnitKind::ALL
                .into_iter()
                .max_by(|a, b| {
                    params
                        .state_power(*a, node.state(*a))
                        .total_cmp(&params.state_power(*b, node.state(*b)))
                })
                .expect("four units");
            let residual = node.battery;
            node.spend(dwell_category(unit, node.state(unit)), residual, now);
            node.kill(now);
        }
        self.mark(id);
    }

    fn record_trace(&mut self, kind: &str, node: Option<NodeId>, detail: String) {
        if self.trace.is_none() {
            return;
        }
        let seq = self.queue.next_seq();
        self.push_trace_line(self.now, seq, kind, node, detail);
    }

    fn push_trace_line(&mut self, time: f64, seq: u64, kind: &str, node: Option<NodeId>, detail: String) {
        if let Some(lines) = self.trace.as_mut() {
            let node = node.map_or_else(|| "-".to_string(), |n| n.to_string());
            lines.push(format!("{}\t{}\t{}\t{}\t{}", fmt_num(time), seq, kind, node, detail));
        }
    }

    fn dispatch(&mut self, ev: Event) {
        if self.trace.is_some() {
            let (node, detail) = match &ev.kind {
                EventKind::EnvEvent { position } => (None, format!("{},{}", fmt_num(position.0), fmt_num(position.1))),
                EventKind::SenseDone { node }
                | EventKind::TxStart { node }
                | EventKind::BeaconDue { node } => (Some(*node), String::new()),
                EventKind::PeriodicBroadcast { node, security } => {
                    (Some(*node), if *security { "security" } else { "local_control" }.to_string())
                }
                EventKind::TxEnd { tx } => (
                    self.active.iter().find(|t| t.id == *tx).map(|t| t.sender),
                    format!("tx={tx}"),
                ),
                EventKind::AckTimeout { node, tx } => (Some(*node), format!("tx={tx}")),
                EventKind::FloodRelay { node, flood } => (Some(*node), format!("flood={flood}")),
                EventKind::SinkBeacon => (Some(NodeId::SINK), String::new()),
                EventKind::HarvestTick => (None, String::new()),
            };
            self.push_trace_line(ev.time, ev.seq, ev.kind.name(), node, detail);
        }
        match ev.kind {
            EventKind::EnvEvent { position } => self.on_env_event(position),
            EventKind::SenseDone { node } => self.on_sense_done(node),
            EventKind::TxStart { node } => self.on_tx_start(node),
            EventKind::TxEnd { tx } => self.on_tx_end(tx),
            EventKind::AckTimeout { node, tx } => self.on_ack_timeout(node, tx),
            EventKind::BeaconDue { node } => {
                if self.alive[node.index()] {
                    self.queue
                        .schedule(self.now + self.cfg.protocol.monitor_interval, EventKind::BeaconDue { node });
                    self.broadcast(node, Broadcast::Beacon);
                }
            }
            EventKind::PeriodicBroadcast { node, security } => {
                if self.alive[node.index()] {
                    let interval = if security {
                        self.cfg.traffic.security_interval
                    } else {
                        self.cfg.traffic.local_control_interval
                    };
                    self.queue
                        .schedule(self.now + interval, EventKind::PeriodicBroadcast { node, security });
                    self.broadcast(node, Broadcast::Periodic { security });
                }
            }
            EventKind::SinkBeacon => {
                self.queue
                    .schedule(self.now + self.cfg.protocol.sink_interval, EventKind::SinkBeacon);
                self.start_flood(FloodPurpose::Control);
            }
            EventKind::FloodRelay { node, flood } => {
                if self.alive[node.index()] {
                    self.broadcast(node, Broadcast::Flood(flood));
                }
            }
            EventKind::HarvestTick => self.on_harvest_tick(),
        }
    }

    // ---- charging -------------------------------------------------------

    /// Pay `amount` at `id` into `sub`, settling dwell first. When `counted`,
    /// the work increments the packet counter of `sub`'s constituent.
    fn pay(&mut self, id: NodeId, sub: SubCategory, amount: f64, counted: bool) {
        let i = id.index();
        if !self.nodes[i].alive {
            return;
        }
        let now = self.now;
        self.nodes[i].settle(now, &self.params);
        if !self.nodes[i].alive {
            self.mark(id);
            return;
        }
        if counted {
            let c = &mut self.counts[i];
            match sub.constituent() {
                Constituent::Individual => c.individual += 1,
                Constituent::Local => c.local += 1,
                Constituent::Global => c.global += 1,
                Constituent::Sink | Constituent::Environment => {}
            }
        }
        self.nodes[i].spend(sub, amount, now);
        self.mark(id);
    }

    fn transition(&mut self, id: NodeId, unit: UnitKind, target: PowerState) {
        let now = self.now;
        let node = &mut self.nodes[id.index()];
        if node.alive {
            if let Err(e) = node.apply_transition(unit, target, now, &self.params) {
                debug_assert!(matches!(e, crate::node::NodeError::Dead(_)), "{e}");
            }
            self.mark(id);
        }
    }

    fn processing_energy(&self, bytes: u32) -> f64 {
        self.params.state_power(UnitKind::Processing, PowerState::Active) * self.params.airtime(bytes)
    }

    fn process(&mut self, id: NodeId, class: PacketClass, bytes: u32) {
        let (_, sub) = attribution(class, Role::Processor);
        let e = self.processing_energy(bytes);
        self.pay(id, sub, e, sub == SubCategory::PacketProcessing);
    }

    fn backoff(&mut self) -> f64 {
        let w = self.cfg.protocol.backoff_window;
        if w > 0.0 {
            self.mac_rng.random::<f64>() * w
        } else {
            0.0
        }
    }

    // ---- sensing --------------------------------------------------------

    fn on_env_event(&mut self, position: Point) {
        if self.cfg.traffic.event_rate > 0.0 {
            self.schedule_next_env_event();
        }
        let covering: Vec<NodeId> = covering_nodes(position, &self.topo, self.cfg.deployment.sensing_radius)
            .into_iter()
            .filter(|n| self.alive[n.index()])
            .collect();
        if covering.is_empty() {
            let someone_responsible = self.alive.iter().skip(1).any(|&a| a);
            if self.cfg.protocol.miss_requery && self.cfg.traffic.event_rate > 0.0 && someone_responsible {
                self.start_flood(FloodPurpose::Requery);
            }
            return;
        }
        let sense_time = self.params.airtime(self.cfg.traffic.data_packet_bytes);
        for id in covering {
            if self.nodes[id.index()].state(UnitKind::Sensing) != PowerState::Active {
                self.transition(id, UnitKind::Sensing, PowerState::Active);
            }
            if !self.nodes[id.index()].alive {
                continue;
            }
            self.mac[id.index()].pending_senses += 1;
            self.queue
                .schedule(self.now + sense_time, EventKind::SenseDone { node: id });
        }
    }

    fn on_sense_done(&mut self, id: NodeId) {
        if !self.nodes[id.index()].alive {
            return;
        }
        let mac = &mut self.mac[id.index()];
        mac.pending_senses -= 1;
        if mac.pending_senses == 0 {
            self.transition(id, UnitKind::Sensing, PowerState::Idle);
        }
        let bytes = self.cfg.traffic.data_packet_bytes;
        let packet = Packet {
            id: self.alloc_packet_id(),
            class: PacketClass::SensedData,
            origin: id,
            sender: id,
            next_hop: None,
            size: bytes,
            hops: 0,
        };
        self.generated += 1;
        self.process(id, PacketClass::SensedData, bytes);
        if !self.nodes[id.index()].alive {
            return;
        }
        if self.nodes[id.index()].enqueue(packet).is_err() {
            self.dropped += 1;
            self.charge_drop(id, bytes);
            return;
        }
        self.try_send(id);
    }

    fn alloc_packet_id(&mut self) -> u64 {
        let id = self.next_packet_id;
        self.next_packet_id += 1;
        id
    }

    fn charge_drop(&mut self, id: NodeId, bytes: u32) {
        let (_, sub) = attribution(PacketClass::SensedData, Role::Dropper);
        let e = self.processing_energy(bytes);
        self.pay(id, sub, e, true);
    }

    // ---- unicast data ---------------------------------------------------

    fn try_send(&mut self, id: NodeId) {
        let i = id.index();
        if !self.nodes[i].alive || self.mac[i].busy || self.nodes[i].queue.is_empty() {
            return;
        }
        self.mac[i].busy = true;
        let at = self.now + self.backoff();
        self.queue.schedule(at, EventKind::TxStart { node: id });
    }

    fn on_tx_start(&mut self, id: NodeId) {
        let i = id.index();
        if !self.nodes[i].alive {
            return;
        }
        if self.mac[i].transmitting.is_some() {
            let at = self.mac[i].transmit_end;
            self.queue.schedule(at, EventKind::TxStart { node: id });
            return;
        }
        let Some(mut packet) = self.nodes[i].queue.front().cloned() else {
            self.mac[i].busy = false;
            return;
        };
        let cands = candidates(id, &self.topo, &self.alive);
        let capacity = self.params.battery_capacity;
        let choice = self
            .policy
            .select_next_hop(&cands, &self.info[i], capacity, &mut self.policy_rng);
        let Some(next_hop) = choice else {
            // no route toward the sink
            self.drop_head(id);
            self.mac[i].busy = false;
            self.try_send(id);
            return;
        };
        let retries = self.nodes[i].retry_count.get(&packet.id).copied().unwrap_or(0);
        let role = if retries > 0 { Role::Retransmitter } else { Role::Sender };
        packet.sender = id;
        packet.next_hop = Some(next_hop);
        match self.begin_transmission(id, packet, role, None, None) {
            Some(tx) => {
                self.mac[i].awaiting = Some(tx);
                let data_air = self.params.airtime(self.cfg.traffic.data_packet_bytes);
                let ack_air = self.params.airtime(self.cfg.traffic.ack_bytes);
                let timeout = 2.0 * data_air + ack_air + self.cfg.protocol.ack_guard;
                self.queue
                    .schedule(self.now + timeout, EventKind::AckTimeout { node: id, tx });
            }
            None => self.mac[i].busy = false,
        }
    }

    fn drop_head(&mut self, id: NodeId) {
        let i = id.index();
        if let Some(p) = self.nodes[i].queue.pop_front() {
            self.nodes[i].retry_count.remove(&p.id);
            self.dropped += 1;
            self.charge_drop(id, p.size);
        }
    }

    fn on_ack_timeout(&mut self, id: NodeId, tx: u64) {
        let i = id.index();
        if !self.nodes[i].alive || self.mac[i].awaiting != Some(tx) {
            return;
        }
        self.mac[i].awaiting = None;
        let Some(head) = self.nodes[i].queue.front().map(|p| p.id) else {
            self.mac[i].busy = false;
            return;
        };
        let retries = {
            let r = self.nodes[i].retry_count.entry(head).or_insert(0);
            *r += 1;
            *r
        };
        if retries > self.cfg.protocol.max_retries {
            self.drop_head(id);
            self.mac[i].busy = false;
            self.try_send(id);
        } else {
            let at = self.now + self.backoff();
            self.queue.schedule(at, EventKind::TxStart { node: id });
        }
    }

    // ---- the shared medium ----------------------------------------------

    fn begin_transmission(
        &mut self,
        sender: NodeId,
        packet: Packet,
        role: Role,
        flood: Option<u64>,
        report: Option<NeighborReport>,
    ) -> Option<u64> {
        if !self.nodes[sender.index()].alive {
            return None;
        }
        self.transition(sender, UnitKind::Transceiver, PowerState::Active);
        let reach = packet
            .next_hop
            .map_or(self.topo.tx_radius, |d| self.topo.distance(sender, d));
        let (_, sub) = attribution(packet.class, role);
        let energy = tx_energy(packet.size, reach, &self.params);
        self.pay(sender, sub, energy, true);
        if !self.nodes[sender.index()].alive {
            return None;
        }
        let id = self.next_tx_id;
        self.next_tx_id += 1;
        let end = self.now + self.params.airtime(packet.size);
        let mut tx = Transmission {
            id,
            packet,
            sender,
            role,
            flood,
            report,
            corrupted: Vec::new(),
            deaf: Vec::new(),
        };
        for other in self.active.iter_mut() {
            let o = other.sender;
            if self.topo.in_range(o, sender) {
                tx.deaf.push(o);
                other.deaf.push(sender);
            }
            for &r in self.topo.neighbors(sender) {
                if r != o && self.topo.in_range(o, r) {
                    tx.corrupted.push(r);
                    other.corrupted.push(r);
                }
            }
        }
        self.active.push(tx);
        let mac = &mut self.mac[sender.index()];
        mac.transmitting = Some(id);
        mac.transmit_end = end;
        self.queue.schedule(end, EventKind::TxEnd { tx: id });
        Some(id)
    }

    fn on_tx_end(&mut self, tx_id: u64) {
        let Some(pos) = self.active.iter().position(|t| t.id == tx_id) else {
            return;
        };
        let tx = self.active.swap_remove(pos);
        let s = tx.sender;
        self.mac[s.index()].transmitting = None;
        if !self.nodes[s.index()].alive {
            return;
        }
        self.transition(s, UnitKind::Transceiver, PowerState::Idle);
        let size = tx.packet.size;
        let receivers: Vec<NodeId> = self
            .topo
            .neighbors(s)
            .iter()
            .copied()
            .filter(|r| self.alive[r.index()])
            .collect();
        for r in receivers {
            if tx.deaf.contains(&r) {
                continue;
            }
            let addressed = tx.packet.next_hop.is_none_or(|d| d == r);
            if !addressed {
                let (_, sub) = attribution(tx.packet.class, Role::Overhearer);
                let e = rx_energy(self.params.header_bytes.min(size), &self.params);
                self.pay(r, sub, e, false);
            } else if tx.corrupted.contains(&r) {
                self.collisions += 1;
                let (_, sub) = attribution(tx.packet.class, Role::CollidedReceiver);
                let e = rx_energy(size, &self.params);
                self.pay(r, sub, e, false);
            } else {
                self.receive(r, &tx);
            }
        }
        if let Some(next) = self.mac[s.index()].pending.pop_front() {
            self.start_broadcast(s, next);
        }
    }

    fn receive(&mut self, r: NodeId, tx: &Transmission) {
        let class = tx.packet.class;
        let size = tx.packet.size;
        let rx = rx_energy(size, &self.params);
        if let Some(fid) = tx.flood {
            let role = if tx.role == Role::TopologySetup {
                Role::TopologySetup
            } else {
                Role::Receiver
            };
            let (_, sub) = attribution(class, role);
            self.pay(r, sub, rx, true);
            let proc_sub = if role == Role::TopologySetup {
                sub
            } else {
                attribution(class, Role::Processor).1
            };
            let e = self.processing_energy(size);
            self.pay(r, proc_sub, e, proc_sub == SubCategory::PacketProcessing);
            if !r.is_sink() && self.nodes[r.index()].alive && self.flood_seen[r.index()].insert(fid) {
                let jitter = self.cfg.protocol.flood_jitter;
                let delay = if jitter > 0.0 {
                    self.mac_rng.random::<f64>() * jitter
                } else {
                    0.0
                };
                self.queue
                    .schedule(self.now + delay, EventKind::FloodRelay { node: r, flood: fid });
            }
            return;
        }
        let (_, sub) = attribution(class, Role::Receiver);
        self.pay(r, sub, rx, true);
        self.process(r, class, size);
        if !self.nodes[r.index()].alive {
            return;
        }
        match class {
            PacketClass::NeighborMonitor => {
                if let Some(mut report) = tx.report {
                    report.hop_dist = self.topo.hop_dist(tx.sender);
                    self.info[r.index()].record(tx.sender, report);
                }
            }
            PacketClass::SensedData => self.accept_data(r, tx),
            _ => {}
        }
    }

    fn accept_data(&mut self, r: NodeId, tx: &Transmission) {
        if r.is_sink() {
            self.delivered += 1;
            self.send_ack(r, tx);
            return;
        }
        let mut copy = tx.packet.clone();
        copy.sender = r;
        copy.next_hop = None;
        copy.hops += 1;
        if self.nodes[r.index()].enqueue(copy).is_err() {
            // rejected: no ack, the sender will retry elsewhere
            self.charge_drop(r, tx.packet.size);
            return;
        }
        self.send_ack(r, tx);
        self.try_send(r);
    }

    fn send_ack(&mut self, r: NodeId, tx: &Transmission) {
        let s = tx.sender;
        let ack_bytes = self.cfg.traffic.ack_bytes;
        let (_, tx_sub) = attribution(PacketClass::Ack, Role::Sender);
        let (_, rx_sub) = attribution(PacketClass::Ack, Role::Receiver);
        let e_tx = tx_energy(ack_bytes, self.topo.distance(r, s), &self.params);
        self.pay(r, tx_sub, e_tx, true);
        let e_rx = rx_energy(ack_bytes, &self.params);
        self.pay(s, rx_sub, e_rx, true);
        let si = s.index();
        if !self.nodes[si].alive || self.mac[si].awaiting != Some(tx.id) {
            return;
        }
        self.mac[si].awaiting = None;
        if let Some(p) = self.nodes[si].queue.pop_front() {
            self.nodes[si].retry_count.remove(&p.id);
        }
        if self.nodes[si].queue.is_empty() {
            self.mac[si].busy = false;
        } else {
            let at = self.now + self.params.airtime(ack_bytes) + self.backoff();
            self.queue.schedule(at, EventKind::TxStart { node: s });
        }
    }

    // ---- broadcasts -------------------------------------------------------

    fn broadcast(&mut self, id: NodeId, what: Broadcast) {
        if self.mac[id.index()].transmitting.is_some() {
            self.mac[id.index()].pending.push_back(what);
        } else {
            self.start_broadcast(id, what);
        }
    }

    fn start_broadcast(&mut self, id: NodeId, what: Broadcast) {
        if !self.nodes[id.index()].alive {
            return;
        }
        let control_bytes = self.cfg.traffic.control_bytes;
        match what {
            Broadcast::Beacon => {
                let now = self.now;
                self.nodes[id.index()].settle(now, &self.params);
                let pid = self.alloc_packet_id();
                let (packet, report) = emit_monitor_beacon(&self.nodes[id.index()], pid, self.cfg.traffic.beacon_bytes);
                self.begin_transmission(id, packet, Role::Sender, None, Some(report));
            }
            Broadcast::Flood(fid) => {
                let role = if self.floods[fid as usize] == FloodPurpose::Topology {
                    Role::TopologySetup
                } else {
                    Role::Sender
                };
                let packet = Packet {
                    id: self.alloc_packet_id(),
                    class: PacketClass::SinkControl,
                    origin: NodeId::SINK,
                    sender: id,
                    next_hop: None,
                    size: control_bytes,
                    hops: 0,
                };
                self.begin_transmission(id, packet, role, Some(fid), None);
            }
            Broadcast::Periodic { security } => {
                let class = if security {
                    PacketClass::Security
                } else {
                    PacketClass::LocalControl
                };
                let packet = Packet {
                    id: self.alloc_packet_id(),
                    class,
                    origin: id,
                    sender: id,
                    next_hop: None,
                    size: control_bytes,
                    hops: 0,
                };
                self.begin_transmission(id, packet, Role::Sender, None, None);
            }
        }
    }

    fn start_flood(&mut self, purpose: FloodPurpose) {
        let fid = self.floods.len() as u64;
        self.floods.push(purpose);
        self.flood_seen[NodeId::SINK.index()].insert(fid);
        self.broadcast(NodeId::SINK, Broadcast::Flood(fid));
    }

    fn on_harvest_tick(&mut self) {
        let tick = self.cfg.experiment.harvest_tick;
        self.queue.schedule(self.now + tick, EventKind::HarvestTick);
        let now = self.now;
        for i in 1..self.nodes.len() {
            if self.nodes[i].alive {
                self.nodes[i].settle(now, &self.params);
                self.nodes[i].harvest(tick, &self.params);
                self.mark(NodeId(i as u32));
            }
        }
    }
}

/// The reachable sensor nearest `centroid` (ties to the lowest id); falls
/// back to the nearest sensor of any kind, then to the sink.
pub fn pick_monitored(topo: &Topology, centroid: Point) -> NodeId {
    let nearest = |reachable_only: bool| {
        topo.node_ids()
            .filter(|id| !id.is_sink())
            .filter(|&id| !reachable_only || topo.hop_dist(id).is_some())
            .min_by(|&a, &b| {
                distance(topo.position(a), centroid)
                    .total_cmp(&distance(topo.position(b), centroid))
                    .then(a.cmp(&b))
            })
    };
    nearest(true).or_else(|| nearest(false)).unwrap_or(NodeId::SINK)
}

#[cfg(test)]
mod tests;
