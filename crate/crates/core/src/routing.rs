//! Next-hop selection and the neighbor-monitoring reports that feed it.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::network::Topology;
use crate::node::{NodeId, Packet, PacketClass, SensorNode};

/// What a node last heard from one neighbor's monitoring beacon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborReport {
    pub residual: f64,
    pub busy: f64,
    pub report_time: f64,
    pub hop_dist: Option<u32>,
}

/// Per-node table of neighbor reports. Entries change only on beacon receipt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NeighborInfo {
    reports: BTreeMap<NodeId, NeighborReport>,
}

impl NeighborInfo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, neighbor: NodeId, report: NeighborReport) {
        self.reports.insert(neighbor, report);
    }

    pub fn get(&self, neighbor: NodeId) -> Option<&NeighborReport> {
        self.reports.get(&neighbor)
    }

    /// Reported (residual, busy) for `neighbor`, or the optimistic default of a
    /// full battery and an empty queue when nothing has been heard yet.
    pub fn residual_and_busy(&self, neighbor: NodeId, capacity: f64) -> (f64, f64) {
        self.reports
            .get(&neighbor)
            .map_or((capacity, 0.0), |r| (r.residual, r.busy))
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoutingPolicy {
    Random,
    Selective { alpha: f64, beta: f64 },
}

impl RoutingPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            RoutingPolicy::Random => "random",
            RoutingPolicy::Selective { .. } => "selective",
        }
    }

    pub fn uses_beacons(&self) -> bool {
        matches!(self, RoutingPolicy::Selective { .. })
    }

    pub fn select_next_hop<R: Rng + ?Sized>(
        &self,
        candidates: &[NodeId],
        info: &NeighborInfo,
        capacity: f64,
        rng: &mut R,
    ) -> Option<NodeId> {
        match *self {
            RoutingPolicy::Random => select_next_hop_random(candidates, rng),
            RoutingPolicy::Selective { alpha, beta } => {
                select_next_hop_selective(candidates, info, alpha, beta, capacity)
            }
        }
    }
}

/// Alive neighbors strictly closer (in hops) to the sink, ascending by id.
pub fn candidates(node: NodeId, topology: &Topology, alive: &[bool]) -> Vec<NodeId> {
    let Some(own) = topology.hop_dist(node) else {
        return Vec::new();
    };
    topology
        .neighbors(node)
        .iter()
        .copied()
        .filter(|n| alive[n.index()])
        .filter(|&n| topology.hop_dist(n).is_some_and(|h| h < own))
        .collect()
}

pub fn select_next_hop_random<R: Rng + ?Sized>(candidates: &[NodeId], rng: &mut R) -> Option<NodeId> {
    if candidates.is_empty() {
        return None;
    }
    Some(candidates[rng.random_range(0..candidates.len())])
}

/// Highest `alpha * residual/capacity - beta * busy`; ties go to the lowest id.
pub fn select_next_hop_selective(
    candidates: &[NodeId],
    info: &NeighborInfo,
    alpha: f64,
    beta: f64,
    capacity: f64,
) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for &c in candidates {
        let (residual, busy) = info.residual_and_busy(c, capacity);
        let score = alpha * (residual / capacity) - beta * busy;
        let better = match best {
            None => true,
            Some((id, s)) => score > s || (score == s && c < id),
        };
        if better {
            best = Some((c, score));
        }
    }
    best.map(|(id, _)| id)
}

/// Broadcast advertising the node's residual energy and busy degree.
pub fn emit_monitor_beacon(node: &SensorNode, packet_id: u64, bytes: u32) -> (Packet, NeighborReport) {
    let packet = Packet {
        id: packet_id,
        class: PacketClass::NeighborMonitor,
        origin: node.id,
        sender: node.id,
        next_hop: None,
        size: bytes,
        hops: 0,
    };
    let report = NeighborReport {
        residual: node.battery,
        busy: node.busy_degree(),
        report_time: node.settled_at,
        hop_dist: None,
    };
    (packet, report)
}
