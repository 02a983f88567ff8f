//! Time-ordered event queue with deterministic tie-breaking.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::network::Point;
use crate::node::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    EnvEvent { position: Point },
    SenseDone { node: NodeId },
    TxStart { node: NodeId },
    TxEnd { tx: u64 },
    AckTimeout { node: NodeId, tx: u64 },
    BeaconDue { node: NodeId },
    PeriodicBroadcast { node: NodeId, security: bool },
    SinkBeacon,
    FloodRelay { node: NodeId, flood: u64 },
    HarvestTick,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::EnvEvent { .. } => "env_event",
            EventKind::SenseDone { .. } => "sense_done",
            EventKind::TxStart { .. } => "tx_start",
            EventKind::TxEnd { .. } => "tx_end",
            EventKind::AckTimeout { .. } => "ack_timeout",
            EventKind::BeaconDue { .. } => "beacon_due",
            EventKind::PeriodicBroadcast { .. } => "periodic_broadcast",
            EventKind::SinkBeacon => "sink_beacon",
            EventKind::FloodRelay { .. } => "flood_relay",
            EventKind::HarvestTick => "harvest_tick",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl Ord for Event {
    // reversed so BinaryHeap pops the earliest (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind) -> u64 {
        debug_assert!(time.is_finite());
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
        seq
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Next sequence number to be handed out.
    pub fn next_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }
}
