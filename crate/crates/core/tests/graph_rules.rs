//! Graph rewrite rules against the tableau pipeline on random inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stabsim_core::graph::{check_outcome, fusion_steps, ghz_ops, type1_steps, ClusterGraph, Step};
use stabsim_core::{Basis, Branch};

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> ClusterGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    ClusterGraph::from_edges(n, &edges).unwrap()
}

/// Two random components: nodes `0..a` and `a..a+b`.
fn two_components(rng: &mut ChaCha8Rng, a: usize, b: usize) -> ClusterGraph {
    let g1 = random_graph(rng, a, 0.5);
    let g2 = random_graph(rng, b, 0.5);
    let mut edges: Vec<(usize, usize)> = g1.edges();
    edges.extend(g2.edges().into_iter().map(|(u, v)| (u + a, v + a)));
    ClusterGraph::from_edges(a + b, &edges).unwrap()
}

fn assert_rule(g: &ClusterGraph, steps: &[Step], out: &stabsim_core::RuleOutcome, what: &str) {
    assert!(!out.computed_by_oracle, "{what}: fell back on {g:?}");
    for seed in 0..4 {
        let c = check_outcome(g, steps, out, seed).unwrap();
        assert!(
            c.matches,
            "{what} on {g:?} -> {:?}\nexpected {:?}\ngot {:?}",
            out.graph, c.expected, c.got
        );
    }
}

#[test]
fn single_qubit_measurements() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let n = rng.random_range(2..7);
        let g = random_graph(&mut rng, n, 0.5);
        let v = rng.random_range(0..n);
        let z = g.measure_z(v).unwrap();
        assert_rule(&g, &[Step::single(n, v, Basis::Z)], &z, "Z");
        let y = g.measure_y(v).unwrap();
        assert_rule(&g, &[Step::single(n, v, Basis::Y)], &y, "Y");
        for &u in g.neighbors(v).iter().chain(std::iter::once(&usize::MAX)).take(3) {
            let choice = if u == usize::MAX { None } else { Some(u) };
            let x = g.measure_x(v, choice).unwrap();
            assert_rule(&g, &[Step::single(n, v, Basis::X)], &x, "X");
        }
    }
}

#[test]
fn two_adjacent_x() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut tried = 0;
    while tried < 200 {
        let n = rng.random_range(2..7);
        let g = random_graph(&mut rng, n, 0.6);
        let Some((u, v)) = g.edges().first().copied() else {
            continue;
        };
        tried += 1;
        let out = g.two_adjacent_x(u, v).unwrap();
        let steps = [Step::single(n, u, Basis::X), Step::single(n, v, Basis::X)];
        assert_rule(&g, &steps, &out, "XX");
    }
}

#[test]
fn cnot_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tried = 0;
    while tried < 200 {
        let n = rng.random_range(2..7);
        let g = random_graph(&mut rng, n, 0.5);
        let c = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if c == t || g.has_edge(c, t) {
            continue;
        }
        tried += 1;
        let out = g.cnot(c, t).unwrap();
        let mut tab = g.to_tableau();
        tab.apply_gate(stabsim_core::GateId::Cnot, &[c, t]).unwrap();
        let chk = stabsim_core::graph::compare_with_graph(&tab, &out).unwrap();
        assert!(chk.matches, "CNOT {c},{t} on {g:?}");
    }
}

#[test]
fn rotated_fusions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for ty in 1..=4u8 {
        for branch in [Branch::Success, Branch::Failure] {
            for _ in 0..100 {
                let a = rng.random_range(1..5);
                let b = rng.random_range(1..5);
                let g = two_components(&mut rng, a, b);
                let c = rng.random_range(0..a);
                let t = a + rng.random_range(0..b);
                let out = g.fuse(c, t, ty, branch, &[]).unwrap();
                let steps = fusion_steps(g.num_nodes(), c, t, ty, branch);
                assert_rule(&g, &steps, &out, &format!("fusion {ty} {branch:?}"));
            }
        }
    }
}

#[test]
fn type1_fusions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for variant in 1..=4u8 {
        for branch in [Branch::Success, Branch::Failure] {
            for _ in 0..100 {
                let a = rng.random_range(1..5);
                let b = rng.random_range(1..5);
                let g = two_components(&mut rng, a, b);
                let c = rng.random_range(0..a);
                let t = a + rng.random_range(0..b);
                let out = g.fuse_type1(c, t, variant, branch, &[]).unwrap();
                let steps = type1_steps(g.num_nodes(), c, t, variant, branch);
                assert_rule(&g, &steps, &out, &format!("type-I {variant} {branch:?}"));
            }
        }
    }
}

#[test]
fn n_fusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let k = rng.random_range(2..5);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(1..4)).collect();
        let mut edges = Vec::new();
        let mut qubits = Vec::new();
        let mut off = 0;
        for &s in &sizes {
            let sub = random_graph(&mut rng, s, 0.6);
            edges.extend(sub.edges().into_iter().map(|(u, v)| (u + off, v + off)));
            qubits.push(off + rng.random_range(0..s));
            off += s;
        }
        let g = ClusterGraph::from_edges(off, &edges).unwrap();
        let out = g.n_fusion(&qubits, None, None).unwrap();
        let steps = [Step::Measure(ghz_ops(off, &qubits))];
        assert_rule(&g, &steps, &out, "n-fusion");
    }
}

#[test]
fn type1_xx_every_hadamard_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..80 {
        let a = rng.random_range(1..5);
        let b = rng.random_range(1..5);
        let g = two_components(&mut rng, a, b);
        let c = rng.random_range(0..a);
        let t = a + rng.random_range(0..b);
        let steps = type1_steps(g.num_nodes(), c, t, 4, Branch::Success);
        let mut pairs: Vec<[usize; 2]> = Vec::new();
        pairs.extend(g.neighbors(t).iter().map(|&u| [c, u]));
        pairs.extend(g.neighbors(c).iter().map(|&v| [c, v]));
        for &v in g.neighbors(c) {
            pairs.extend(g.neighbors(t).iter().map(|&u| [v, u]));
        }
        for p in pairs {
            let out = g.fuse_type1(c, t, 4, Branch::Success, &p).unwrap();
            assert_rule(&g, &steps, &out, &format!("type-I 4 pair {p:?}"));
        }
    }
}

#[test]
fn every_neighbor_choice() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..80 {
        let a = rng.random_range(2..5);
        let b = rng.random_range(2..5);
        let g = two_components(&mut rng, a, b);
        let c = rng.random_range(0..a);
        let t = a + rng.random_range(0..b);
        let n = g.num_nodes();
        let all: Vec<usize> = g.neighbors(c).union(g.neighbors(t)).copied().collect();
        for &u in &all {
            for ty in [1, 2] {
                let out = g.fuse(c, t, ty, Branch::Success, &[u]).unwrap();
                assert_rule(&g, &fusion_steps(n, c, t, ty, Branch::Success), &out, "merge choice");
            }
        }
        for &u in g.neighbors(c) {
            let out = g.fuse(c, t, 3, Branch::Failure, &[u]).unwrap();
            assert_rule(
                &g,
                &fusion_steps(n, c, t, 3, Branch::Failure),
                &out,
                "type 3 failure choice",
            );
            for &w in g.neighbors(t) {
                let out = g.fuse(c, t, 1, Branch::Failure, &[u, w]).unwrap();
                assert_rule(
                    &g,
                    &fusion_steps(n, c, t, 1, Branch::Failure),
                    &out,
                    "type 1 failure choice",
                );
            }
        }
        let mut opts: Vec<usize> = g.neighbors(t).iter().copied().collect();
        opts.push(c);
        for i in opts {
            let out = g.fuse_type1(c, t, 3, Branch::Success, &[i]).unwrap();
            assert_rule(&g, &type1_steps(n, c, t, 3, Branch::Success), &out, "type-I 3 choice");
        }
    }
}

fn assert_oracle(g: &ClusterGraph, steps: &[Step], out: &stabsim_core::RuleOutcome) {
    assert!(out.computed_by_oracle);
    for seed in 0..4 {
        assert!(
            check_outcome(g, steps, out, seed).unwrap().matches,
            "oracle outcome on {g:?}"
        );
    }
}

#[test]
fn fallback_when_preconditions_fail() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut seen = 0;
    while seen < 100 {
        let n = rng.random_range(3..7);
        let g = random_graph(&mut rng, n, 0.6);
        let c = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if c == t || g.in_distinct_components(&[c, t]) {
            continue;
        }
        seen += 1;
        for ty in 1..=4 {
            for br in [Branch::Success, Branch::Failure] {
                let out = g.fuse(c, t, ty, br, &[]).unwrap();
                assert_oracle(&g, &fusion_steps(n, c, t, ty, br), &out);
                let out = g.fuse_type1(c, t, ty, br, &[]).unwrap();
                assert_oracle(&g, &type1_steps(n, c, t, ty, br), &out);
            }
        }
    }
}

#[test]
fn measurements_on_tagged_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(3..7);
        let g = random_graph(&mut rng, n, 0.6);
        let v = rng.random_range(0..n);
        let tagged = g.measure_y(v).unwrap().graph;
        for w in tagged.active_nodes() {
            for b in [Basis::X, Basis::Y, Basis::Z] {
                let out = match b {
                    Basis::X => tagged.measure_x(w, None),
                    Basis::Y => tagged.measure_y(w),
                    Basis::Z => tagged.measure_z(w),
                }
                .unwrap();
                let steps = [Step::single(n, w, b)];
                for seed in 0..3 {
                    assert!(check_outcome(&tagged, &steps, &out, seed).unwrap().matches);
                }
            }
        }
    }
}

#[test]
fn checker_rejects_a_wrong_edge() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut seen = 0;
    while seen < 100 {
        let n = rng.random_range(3..7);
        let g = random_graph(&mut rng, n, 0.5);
        let v = rng.random_range(0..n);
        let mut out = g.measure_x(v, None).unwrap();
        let live = out.graph.active_nodes();
        if live.len() < 2 {
            continue;
        }
        seen += 1;
        out.graph.toggle_edge(live[0], live[1]);
        let c = check_outcome(&g, &[Step::single(n, v, Basis::X)], &out, 0).unwrap();
        assert!(!c.matches);
    }
}
