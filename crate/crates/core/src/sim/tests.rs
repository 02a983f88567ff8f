use super::*;
use crate::config::PolicyKind;

const E: f64 = 1.0 / 1024.0; // per-byte electronics
const AMP: f64 = 1.0 / 1_048_576.0; // per-byte amplifier per m^2
const P_PROC: f64 = 1.0 / 16.0;

fn tx(bytes: u32, d: f64) -> f64 {
    f64::from(bytes) * E + f64::from(bytes) * AMP * d * d
}

fn rx(bytes: u32) -> f64 {
    f64::from(bytes) * E
}

fn proc(bytes: u32) -> f64 {
    P_PROC * f64::from(bytes) / 1024.0
}

/// Quiet network on explicit positions: no background traffic, Random
/// policy, zero idle draw, no backoff.
fn scenario(positions: &[Point], tx_radius: f64, sensing_radius: f64) -> SimConfig {
    let mut c = SimConfig::default();
    c.deployment.width = 100.0;
    c.deployment.height = 100.0;
    c.deployment.node_count = positions.len() as u32;
    c.deployment.sink_position = [positions[0].0, positions[0].1];
    c.deployment.tx_radius = tx_radius;
    c.deployment.sensing_radius = sensing_radius;
    let mut e = EnergyParams::zeroed();
    e.bitrate = 1024.0;
    e.tx_elec = E;
    e.rx_elec = E;
    e.tx_amp = AMP;
    e.header_bytes = 8;
    e.battery_capacity = 1024.0;
    e.state_power.processing.active = P_PROC;
    c.energy = e;
    c.traffic.event_rate = 0.0;
    c.traffic.data_packet_bytes = 64;
    c.traffic.beacon_bytes = 16;
    c.traffic.ack_bytes = 8;
    c.traffic.control_bytes = 16;
    c.protocol.policy = PolicyKind::Random;
    c.protocol.backoff_window = 0.0;
    c.protocol.flood_jitter = 0.0;
    c.protocol.ack_guard = 1.0 / 64.0;
    c.experiment.max_sim_time = 10.0;
    c
}

fn sim(cfg: &SimConfig, positions: &[Point]) -> Simulation {
    Simulation::with_positions(cfg, 1, positions.to_vec()).unwrap()
}

fn cell(r: &SimResult, node: usize, sub: SubCategory) -> f64 {
    r.ledgers[node].get(sub)
}

fn trace_nodes(lines: &[String], kind: &str) -> Vec<u32> {
    lines
        .iter()
        .filter_map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[2] == kind).then(|| f[3].parse().unwrap())
        })
        .collect()
}

fn small_default(seed_events: u64) -> SimConfig {
    let mut c = SimConfig::default();
    c.deployment.node_count = 40;
    c.deployment.tx_radius = 70.0;
    c.traffic.max_events = seed_events;
    c
}

#[test]
fn one_event_two_covering_nodes_two_packets() {
    let pos = [(0.0, 0.0), (20.0, 0.0), (20.0, 10.0)];
    let cfg = scenario(&pos, 30.0, 6.0);
    let mut s = sim(&cfg, &pos);
    s.inject_env_event(1.0, (20.0, 5.0));
    let r = s.run();
    assert_eq!(r.generated, 2);
    for n in [1, 2] {
        assert_eq!(cell(&r, n, SubCategory::PacketProcessing), proc(64));
    }
}

#[test]
fn uncovered_event_charges_nothing() {
    let pos = [(0.0, 0.0), (20.0, 0.0)];
    let cfg = scenario(&pos, 30.0, 5.0);
    let mut s = sim(&cfg, &pos);
    s.inject_env_event(1.0, (80.0, 80.0));
    let r = s.run();
    assert_eq!(r.generated, 0);
    assert!(r.ledgers.iter().all(|l| l.total() == 0.0));
}

#[test]
fn sensing_dwell_follows_radius_squared() {
    let pos = [(0.0, 0.0), (20.0, 0.0)];
    let dwell = |rs: f64| {
        let mut cfg = scenario(&pos, 30.0, rs);
        cfg.energy.sensing_power_coeff = 1.0 / 256.0;
        let mut s = sim(&cfg, &pos);
        s.inject_env_event(1.0, (20.0, 0.0));
        cell(&s.run(), 1, SubCategory::StateDwell)
    };
    let (a, b) = (dwell(2.0), dwell(4.0));
    assert!(a > 0.0);
    assert!((b - 4.0 * a).abs() <= 1e-15);
}

#[test]
fn lone_transmission_has_no_collision_or_overhearing() {
    let pos = [(0.0, 0.0), (20.0, 0.0)];
    let cfg = scenario(&pos, 30.0, 1.0);
    let mut s = sim(&cfg, &pos);
    s.inject_env_event(1.0, (20.0, 0.0));
    let r = s.run();
    assert_eq!(r.delivered, 1);
    for n in 0..2 {
        assert_eq!(cell(&r, n, SubCategory::Coll), 0.0);
        assert_eq!(cell(&r, n, SubCategory::Ohear), 0.0);
    }
    assert_eq!(cell(&r, 1, SubCategory::Route), tx(64, 20.0) + rx(8));
    assert_eq!(cell(&r, 0, SubCategory::Route), rx(64) + tx(8, 20.0));
}

#[test]
fn bystander_pays_header_overhearing() {
    let pos = [(0.0, 0.0), (20.0, 0.0), (20.0, 20.0)];
    let cfg = scenario(&pos, 30.0, 1.0);
    let mut s = sim(&cfg, &pos);
    s.inject_env_event(1.0, (20.0, 0.0));
    let r = s.run();
    assert_eq!(r.delivered, 1);
    assert_eq!(cell(&r, 2, SubCategory::Ohear), rx(8));
    assert_eq!(r.ledgers[2].total(), rx(8));
    assert_eq!(r.packet_counts[2], PacketCounts::default());
}

#[test]
fn hidden_senders_collide_at_common_relay() {
    // two senders out of each other's range, both one hop from relay 1
    let pos = [(0.0, 0.0), (30.0, 0.0), (30.0, 30.0), (60.0, 0.0)];
    let mut cfg = scenario(&pos, 35.0, 1.0);
    cfg.protocol.max_retries = 1;
    let mut s = sim(&cfg, &pos);
    s.inject_env_event(1.0, pos[2]);
    s.inject_env_event(1.0, pos[3]);
    let r = s.run();
    // two rounds (first try, one retry), two corrupted receptions each
    assert_eq!(r.collisions, 4);
    assert_eq!(cell(&r, 1, SubCategory::Coll), 4.0 * rx(64));
    assert_eq!(r.ledgers[1].total(), 4.0 * rx(64));
    assert_eq!(r.delivered, 0);
    assert_eq!(r.dropped, 2);
    for n in [2, 3] {
        assert_eq!(cell(&r, n, SubCategory::Route), tx(64, 30.0));
        assert_eq!(cell(&r, n, SubCategory::PktLs), tx(64, 30.0) + proc(64));
        assert_eq!(cell(&r, n, SubCategory::PacketProcessing), proc(64));
    }
}

#[test]
fn flood_rebroadcasts_once_per_node() {
    let pos = [(0.0, 0.0), (32.0, 0.0), (64.0, 0.0)];
    let mut cfg = scenario(&pos, 40.0, 1.0);
    cfg.traffic.event_rate = 1.0;
    cfg.traffic.max_events = 0;
    cfg.protocol.flood_jitter = 0.1;
    cfg.protocol.sink_interval = 100.0;
    let (r, lines) = sim(&cfg, &pos).run_traced();
    let mut relays = trace_nodes(&lines, "flood_relay");
    relays.sort_unstable();
    assert_eq!(relays, vec![1, 2]);
    let t = tx(16, 40.0);
    let hear = rx(16) + proc(16);
    assert_eq!(cell(&r, 0, SubCategory::Topo), t + hear);
    assert_eq!(cell(&r, 1, SubCategory::Topo), t + 2.0 * hear);
    assert_eq!(cell(&r, 2, SubCategory::Topo), t + hear);
    for n in 0..3 {
        assert_eq!(cell(&r, n, SubCategory::Snk), 0.0);
    }
}

#[test]
fn missed_event_requery_charges_sink_cell_everywhere() {
    let pos = [(0.0, 0.0), (32.0, 0.0), (64.0, 0.0)];
    let mut cfg = scenario(&pos, 40.0, 1.0);
    cfg.traffic.event_rate = 1.0;
    cfg.traffic.max_events = 0;
    cfg.protocol.sink_interval = 100.0;
    let mut s = sim(&cfg, &pos);
    s.inject_env_event(5.0, (90.0, 90.0));
    let r = s.run();
    for n in 0..3 {
        assert!(cell(&r, n, SubCategory::Snk) > 0.0, "node {n}");
    }
    cfg.protocol.miss_requery = false;
    let mut s = sim(&cfg, &pos);
    s.inject_env_event(5.0, (90.0, 90.0));
    let r = s.run();
    assert!(r.ledgers.iter().all(|l| l.get(SubCategory::Snk) == 0.0));
}

#[test]
fn null_run_is_censored_and_free() {
    let mut cfg = SimConfig::default();
    cfg.traffic.event_rate = 0.0;
    cfg.protocol.policy = PolicyKind::Random;
    cfg.experiment.max_sim_time = 500.0;
    for u in UnitKind::ALL {
        cfg.energy.state_power.get_mut(u).idle = 0.0;
        cfg.energy.state_power.get_mut(u).sleep = 0.0;
    }
    let r = run(&cfg, 4).unwrap();
    assert!(r.censored);
    assert_eq!(r.lifetime, 500.0);
    assert_eq!(r.generated, 0);
    assert!(r.ledgers.iter().all(|l| l.total() == 0.0));
}

#[test]
fn idle_listening_lifetime_is_analytic() {
    let pos = [(0.0, 0.0), (50.0, 50.0)];
    let mut cfg = scenario(&pos, 30.0, 1.0);
    cfg.energy.battery_capacity = 0.25;
    cfg.energy.state_power.transceiver.idle = 3e-3;
    cfg.energy.state_power.transceiver.active = 3e-3;
    cfg.experiment.max_sim_time = 1e6;
    let r = sim(&cfg, &pos).run();
    let want = 0.25 / 3e-3;
    assert!(!r.censored);
    assert!((r.lifetime - want).abs() <= 1e-9 * want);
    assert!((cell(&r, 1, SubCategory::IdleListen) - 0.25).abs() <= 1e-12);
}

#[test]
fn beacons_follow_the_monitor_period() {
    let pos = [(0.0, 0.0), (20.0, 0.0), (40.0, 0.0), (60.0, 0.0)];
    let mut cfg = scenario(&pos, 30.0, 1.0);
    cfg.protocol.policy = PolicyKind::Selective;
    cfg.protocol.monitor_interval = 5.0;
    cfg.experiment.max_sim_time = 50.0;
    let (_, lines) = sim(&cfg, &pos).run_traced();
    let due = trace_nodes(&lines, "beacon_due");
    for n in 1..4 {
        let k = due.iter().filter(|&&x| x == n).count();
        assert!((9..=11).contains(&k), "node {n} sent {k}");
    }
    assert!(!due.contains(&0));
}

#[test]
fn random_policy_sends_no_beacons() {
    let cfg = small_default(300).with_policy(PolicyKind::Random);
    let (r, lines) = Simulation::new(&cfg, 2).unwrap().run_traced();
    assert!(trace_nodes(&lines, "beacon_due").is_empty());
    assert!(r.ledgers.iter().all(|l| l.get(SubCategory::Mon) == 0.0));
}

#[test]
fn two_node_beacon_hand_ledger() {
    let pos = [(0.0, 0.0), (24.0, 0.0)];
    let mut cfg = scenario(&pos, 32.0, 1.0);
    cfg.protocol.policy = PolicyKind::Selective;
    cfg.protocol.monitor_interval = 4.0;
    cfg.experiment.max_sim_time = 5.0;
    let r = sim(&cfg, &pos).run();
    // one beacon from node 1 at t = 2, broadcast at full radius
    assert_eq!(cell(&r, 1, SubCategory::Mon), tx(16, 32.0));
    assert_eq!(cell(&r, 0, SubCategory::Mon), rx(16));
    assert_eq!(cell(&r, 0, SubCategory::PacketProcessing), proc(16));
    assert_eq!(r.packet_counts[1].local, 1);
    assert_eq!(r.packet_counts[0].local, 1);
}

#[test]
fn same_seed_same_result_and_trace() {
    let cfg = small_default(1500);
    let a = Simulation::new(&cfg, 9).unwrap().run_traced();
    let b = Simulation::new(&cfg, 9).unwrap().run_traced();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    let c = run(&cfg, 10).unwrap();
    assert_ne!(a.0.ledgers, c.ledgers);
}

#[test]
fn ledgers_reconcile_with_supply() {
    for policy in PolicyKind::ALL {
        let cfg = small_default(2000).with_policy(policy);
        let r = run(&cfg, 3).unwrap();
        for (l, n) in r.ledgers.iter().zip(&r.nodes) {
            let scale = n.initial_battery.max(1.0);
            assert!((l.total() - n.drained).abs() <= 1e-9 * scale, "{:?}", n.id);
        }
        assert!(r.delivered + r.dropped <= r.generated);
        assert!(r.lifetime <= cfg.experiment.max_sim_time);
    }
}

#[test]
fn dwell_time_covers_each_node_life() {
    let cfg = small_default(2000);
    let r = run(&cfg, 5).unwrap();
    for n in &r.nodes {
        let end = n.death_time.unwrap_or(r.end_time);
        for unit in n.dwell_time {
            let total: f64 = unit.iter().sum();
            assert!((total - end).abs() <= 1e-9 * end.max(1.0), "{:?}", n.id);
        }
    }
}

#[test]
fn monitored_node_is_nearest_reachable_to_centroid() {
    // node 1 sits on the centroid but is isolated
    let pos = [(0.0, 0.0), (50.0, 50.0), (20.0, 0.0), (45.0, 45.0)];
    let topo = Topology::from_positions(pos.to_vec(), 25.0);
    assert_eq!(pick_monitored(&topo, (50.0, 50.0)), NodeId(2));
    let topo = Topology::from_positions(pos.to_vec(), 55.0);
    assert_eq!(pick_monitored(&topo, (50.0, 50.0)), NodeId(1));
    let topo = Topology::from_positions(pos.to_vec(), 1.0);
    assert_eq!(pick_monitored(&topo, (50.0, 50.0)), NodeId(1));
}
