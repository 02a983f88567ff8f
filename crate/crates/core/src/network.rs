//! Deployment geometry: node placement, unit-disk neighbor tables, hop
//! distances to the sink and event coverage.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::node::NodeId;

pub type Point = (f64, f64);

pub fn distance(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub width: f64,
    pub height: f64,
    /// Total nodes including the sink (id 0).
    pub node_count: u32,
    pub sink_position: Point,
    pub tx_radius: f64,
    pub sensing_radius: f64,
}

impl Deployment {
    pub fn centroid(&self) -> Point {
        (self.width / 2.0, self.height / 2.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.0) && (0.0..=self.height).contains(&p.1)
    }
}

/// Sink at `sink_position`, every other node uniform over the area.
pub fn deploy<R: Rng + ?Sized>(d: &Deployment, rng: &mut R) -> Vec<Point> {
    let mut positions = Vec::with_capacity(d.node_count as usize);
    positions.push(d.sink_position);
    for _ in 1..d.node_count {
        let x = rng.random::<f64>() * d.width;
        let y = rng.random::<f64>() * d.height;
        positions.push((x, y));
    }
    positions
}

/// Symmetric unit-disk adjacency (inclusive boundary), each list sorted by id.
///
/// Nodes are bucketed on a grid of `tx_radius` cells so only the 3x3
/// surrounding cells are examined per node.
pub fn build_neighbors(positions: &[Point], tx_radius: f64) -> Vec<Vec<NodeId>> {
    let cell_of = |p: Point| ((p.0 / tx_radius).floor() as i64, (p.1 / tx_radius).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in positions.iter().enumerate() {
        grid.entry(cell_of(p)).or_default().push(i);
    }
    let mut neighbors = vec![Vec::new(); positions.len()];
    for (i, &p) in positions.iter().enumerate() {
        let (cx, cy) = cell_of(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &j in bucket {
                    if j != i && distance(p, positions[j]) <= tx_radius {
                        neighbors[i].push(NodeId(j as u32));
                    }
                }
            }
        }
        neighbors[i].sort_unstable();
    }
    neighbors
}

/// Breadth-first hop count from the sink over `neighbors`; `None` if unreachable.
pub fn hop_distances(neighbors: &[Vec<NodeId>]) -> Vec<Option<u32>> {
    let mut dist = vec![None; neighbors.len()];
    if neighbors.is_empty() {
        return dist;
    }
    let mut frontier = VecDeque::new();
    dist[NodeId::SINK.index()] = Some(0);
    frontier.push_back(NodeId::SINK);
    while let Some(u) = frontier.pop_front() {
        let du = dist[u.index()].expect("queued nodes have a distance");
        for &v in &neighbors[u.index()] {
            if dist[v.index()].is_none() {
                dist[v.index()] = Some(du + 1);
                frontier.push_back(v);
            }
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub positions: Vec<Point>,
    pub tx_radius: f64,
    pub neighbors: Vec<Vec<NodeId>>,
    pub hop_dist: Vec<Option<u32>>,
}

impl Topology {
    pub fn from_positions(positions: Vec<Point>, tx_radius: f64) -> Self {
        let neighbors = build_neighbors(&positions, tx_radius);
        let hop_dist = hop_distances(&neighbors);
        Topology {
            positions,
            tx_radius,
            neighbors,
            hop_dist,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, id: NodeId) -> Point {
        self.positions[id.index()]
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        distance(self.position(a), self.position(b))
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.neighbors[id.index()]
    }

    pub fn hop_dist(&self, id: NodeId) -> Option<u32> {
        self.hop_dist[id.index()]
    }

    pub fn in_range(&self, a: NodeId, b: NodeId) -> bool {
        a != b && self.distance(a, b) <= self.tx_radius
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.positions.len() as u32).map(NodeId)
    }
}

/// Non-sink nodes within `sensing_radius` of `event_pos`, ascending by id.
pub fn covering_nodes(event_pos: Point, topology: &Topology, sensing_radius: f64) -> Vec<NodeId> {
    topology
        .node_ids()
        .filter(|id| !id.is_sink())
        .filter(|&id| distance(topology.position(id), event_pos) <= sensing_radius)
        .collect()
}
