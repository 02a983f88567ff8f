mod common;

use edasim::sim::PacketCounts;
use edasim::NodeId;

#[test]
fn golden_ledger_matches_hand_oracle() {
    let r = common::golden_run();
    let bad = common::golden_mismatches(&r);
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn golden_counters_and_outcome() {
    let r = common::golden_run();
    let c = |individual, local, global| PacketCounts {
        individual,
        local,
        global,
    };
    assert_eq!(r.packet_counts, vec![c(2, 1, 2), c(2, 2, 4), c(2, 2, 2)]);
    assert_eq!(r.monitored_node, NodeId(1));
    assert!(r.censored);
    assert_eq!(r.lifetime, 6.0);
    assert_eq!((r.generated, r.delivered, r.dropped, r.collisions), (1, 1, 0, 0));
}

#[test]
fn golden_fixture_is_a_complete_config() {
    let cfg = common::golden_config();
    let back = edasim::SimConfig::from_json_str(&cfg.to_json_string()).unwrap();
    assert_eq!(cfg, back);
}
