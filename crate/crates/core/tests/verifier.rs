//! Harness behavior: determinism, mutation detection, shrinking and replay.

use stabsim_core::verifier::{check_suite, check_suite_with, replay, Mutation, Suite};

#[test]
fn every_suite_passes_at_full_size() {
    for s in Suite::ALL {
        let trials = if s == Suite::LoKraus { 100 } else { 300 };
        let r = check_suite(s, trials, 8, 11).unwrap();
        assert!(r.passed(), "{}", r.summary());
    }
}

#[test]
fn reports_are_deterministic() {
    let a = check_suite_with(Suite::GraphRules, 200, 6, 5, Mutation::LcSkipsOnePair).unwrap();
    let b = check_suite_with(Suite::GraphRules, 200, 6, 5, Mutation::LcSkipsOnePair).unwrap();
    assert_eq!(a, b);
}

#[test]
fn broken_local_complement_is_caught_and_shrunk() {
    let r = check_suite_with(Suite::GraphRules, 300, 8, 3, Mutation::LcSkipsOnePair).unwrap();
    assert!(!r.passed());
    for f in &r.failures {
        assert_eq!(f.kind, "mismatch");
        // the smallest witness is a path on three nodes: v and two
        // unconnected neighbors
        let edges = f.instance["edges"].as_array().unwrap();
        assert_eq!(f.instance["n"], 3, "{}", f.instance);
        assert_eq!(edges.len(), 2, "{}", f.instance);
        let again = replay(Suite::GraphRules, &f.instance, Mutation::LcSkipsOnePair).unwrap();
        assert_eq!(again.map(|x| x.kind), Some("mismatch"));
        assert!(replay(Suite::GraphRules, &f.instance, Mutation::None)
            .unwrap()
            .is_none());
    }
}
