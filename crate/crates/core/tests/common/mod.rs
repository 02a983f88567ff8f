#![allow(dead_code)]

use edasim::network::{distance, Point};
use edasim::sim::Simulation;
use edasim::{NodeId, PolicyKind, SimConfig, SimResult, SubCategory};
use rand::Rng;

pub const GOLDEN_JSON: &str = include_str!("../fixtures/golden.json");

/// Sink, relay B, source A on a line, 32 m apart.
pub const GOLDEN_POSITIONS: [Point; 3] = [(0.0, 0.0), (32.0, 0.0), (64.0, 0.0)];
pub const GOLDEN_EVENT: (f64, Point) = (1.0, (64.0, 0.0));

pub fn golden_config() -> SimConfig {
    SimConfig::from_json_str(GOLDEN_JSON).expect("golden fixture parses")
}

pub fn golden_run() -> SimResult {
    let cfg = golden_config();
    let mut sim = Simulation::with_positions(&cfg, 1, GOLDEN_POSITIONS.to_vec()).unwrap();
    sim.inject_env_event(GOLDEN_EVENT.0, GOLDEN_EVENT.1);
    sim.run()
}

/// Hand-derived ledger of the golden scenario, one `(node, cell, joules)`
/// per non-zero entry.
///
/// Timeline: A senses for 1/16 s from t = 1, processes and sends the packet
/// to B; B acks, forwards to the sink and A overhears the header; the sink
/// acks. B beacons at t = 2 (heard by A and the sink), A at t = 4 (heard by B).
pub fn golden_oracle() -> Vec<(u32, SubCategory, f64)> {
    const E: f64 = 1.0 / 1024.0; // J per byte, tx and rx electronics
    const AMP: f64 = 1.0 / 1_048_576.0; // J per byte per m^2
    const BITRATE: f64 = 1024.0;
    const P_PROC: f64 = 1.0 / 16.0;
    const P_RADIO: f64 = 1.0 / 32.0;
    const P_SENSE: f64 = (1.0 / 1024.0) * 4.0 * 4.0;
    const SENSE_UP: f64 = 1.0 / 2048.0;
    const SENSE_DOWN: f64 = 1.0 / 4096.0;
    const RADIO_UP: f64 = 1.0 / 8192.0;
    const RADIO_DOWN: f64 = 1.0 / 16384.0;
    let t = |bytes: f64| bytes / BITRATE;
    let tx = |bytes: f64, d: f64| bytes * E + bytes * AMP * d * d;
    let rx = |bytes: f64| bytes * E;
    let (data, ack, beacon, header) = (64.0, 8.0, 16.0, 8.0);
    let hop = 32.0;
    let radius = 40.0;
    let radio_cycle = RADIO_UP + RADIO_DOWN;
    let processing = P_PROC * t(data) + P_PROC * t(beacon);

    use SubCategory::*;
    vec![
        (0, PacketProcessing, processing),
        (0, Mon, rx(beacon)),
        (0, Route, rx(data) + tx(ack, hop)),
        (1, StateDwell, P_RADIO * t(data) + P_RADIO * t(beacon)),
        (1, Transition, 2.0 * radio_cycle),
        (1, PacketProcessing, processing),
        (1, Mon, tx(beacon, radius) + rx(beacon)),
        (1, Route, rx(data) + tx(ack, hop) + tx(data, hop) + rx(ack)),
        (2, StateDwell, P_SENSE * t(data) + P_RADIO * t(data) + P_RADIO * t(beacon)),
        (2, Transition, SENSE_UP + SENSE_DOWN + 2.0 * radio_cycle),
        (2, PacketProcessing, processing),
        (2, Mon, rx(beacon) + tx(beacon, radius)),
        (2, Ohear, rx(header)),
        (2, Route, tx(data, hop) + rx(ack)),
    ]
}

/// Entry-by-entry comparison; returns the mismatches.
pub fn golden_mismatches(result: &SimResult) -> Vec<String> {
    let oracle = golden_oracle();
    let mut bad = Vec::new();
    for (node, ledger) in result.ledgers.iter().enumerate() {
        for sub in SubCategory::ALL {
            let want = oracle
                .iter()
                .find(|(n, s, _)| *n as usize == node && *s == sub)
                .map_or(0.0, |e| e.2);
            let got = ledger.get(sub);
            if got != want {
                bad.push(format!("node {node} {sub}: got {got:e}, want {want:e}"));
            }
        }
    }
    bad
}

pub fn brute_neighbors(positions: &[Point], r: f64) -> Vec<Vec<NodeId>> {
    (0..positions.len())
        .map(|i| {
            (0..positions.len())
                .filter(|&j| j != i && distance(positions[i], positions[j]) <= r)
                .map(|j| NodeId(j as u32))
                .collect()
        })
        .collect()
}

/// All-pairs shortest hop counts by Floyd-Warshall; row 0 is the sink's.
pub fn floyd_warshall_from_sink(positions: &[Point], r: f64) -> Vec<Option<u32>> {
    let n = positions.len();
    const INF: u32 = u32::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if i != j && distance(positions[i], positions[j]) <= r {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d[0].iter().map(|&x| (x < INF).then_some(x)).collect()
}

pub fn random_positions<R: Rng>(rng: &mut R, n: usize, side: f64) -> Vec<Point> {
    (0..n)
        .map(|_| (rng.random::<f64>() * side, rng.random::<f64>() * side))
        .collect()
}

/// Two-node run where only the transceiver idles at `watts`.
pub fn idle_lifetime(capacity: f64, watts: f64) -> SimResult {
    let mut cfg = SimConfig::default();
    cfg.deployment.node_count = 2;
    cfg.traffic.event_rate = 0.0;
    cfg.protocol.policy = PolicyKind::Random;
    cfg.experiment.max_sim_time = 1e12;
    let e = &mut cfg.energy;
    e.battery_capacity = capacity;
    for u in edasim::UnitKind::ALL {
        let sp = e.state_power.get_mut(u);
        sp.sleep = 0.0;
        sp.idle = 0.0;
    }
    e.state_power.transceiver.idle = watts;
    e.state_power.transceiver.active = e.state_power.transceiver.active.max(watts);
    edasim::run(&cfg, 1).unwrap()
}
