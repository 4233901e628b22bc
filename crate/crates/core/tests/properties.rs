//! Property tests for the algebraic and structural invariants.

use std::collections::BTreeSet;

use num_complex::Complex64 as C;
use proptest::prelude::*;
use stabsim_core::optics::{FastAxis, FockState, LoElement};
use stabsim_core::{Basis, ClusterGraph, GateId, Pauli, PauliString, Tableau};

fn pauli_string(n: usize) -> impl Strategy<Value = PauliString> {
    (prop::collection::vec(0usize..4, n), 0u8..4).prop_map(|(lits, phase)| {
        let lits: Vec<Pauli> = lits.into_iter().map(|i| Pauli::ALL[i]).collect();
        PauliString::from_literals(&lits, phase)
    })
}

fn triple() -> impl Strategy<Value = (PauliString, PauliString, PauliString)> {
    (1usize..=4).prop_flat_map(|n| (pauli_string(n), pauli_string(n), pauli_string(n)))
}

fn matmul(a: &[Vec<C>], b: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn max_diff(a: &[Vec<C>], b: &[Vec<C>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
enum TabOp {
    Gate(GateId, usize, usize),
    Measure(usize, Basis),
    Pauli(Vec<usize>, u8),
}

fn tab_ops(n: usize) -> impl Strategy<Value = Vec<TabOp>> {
    let op = prop_oneof![
        4 => (0usize..8, 0..n, 0..n).prop_map(|(g, a, b)| TabOp::Gate(GateId::ALL[g], a, b)),
        1 => (0..n, 0usize..3).prop_map(|(q, b)| TabOp::Measure(q, [Basis::X, Basis::Y, Basis::Z][b])),
        1 => (prop::collection::vec(0usize..4, n), 0u8..2).prop_map(|(l, s)| TabOp::Pauli(l, s)),
    ];
    prop::collection::vec(op, 0..40)
}

fn element(qubits: usize) -> impl Strategy<Value = LoElement> {
    let q = 0..qubits;
    prop_oneof![
        (q.clone(), q.clone())
            .prop_filter("distinct", |(a, b)| a != b)
            .prop_map(|(a, b)| LoElement::Pbs(a, b)),
        (q.clone(), -90.0f64..90.0).prop_map(|(q, d)| LoElement::Hwp(q, d)),
        (q.clone(), any::<bool>()).prop_map(|(q, h)| LoElement::Qwp(q, if h { FastAxis::H } else { FastAxis::V })),
        q.prop_map(LoElement::Rot45),
    ]
}

/// Random three-photon state over two dual-rail qubits (four modes).
fn three_photons() -> impl Strategy<Value = FockState> {
    prop::collection::vec(((0u8..4, 0u8..4, 0u8..4), -1.0f64..1.0, -1.0f64..1.0), 1..6).prop_map(|terms| {
        let terms: Vec<(Vec<u8>, C)> = terms
            .into_iter()
            .map(|((a, b, c), re, im)| {
                let mut occ = vec![0u8; 4];
                for m in [a, b, c] {
                    occ[m as usize] += 1;
                }
                (occ, C::new(re, im))
            })
            .collect();
        let raw = FockState::from_occupations(2, &terms).unwrap();
        let n = raw.norm_sqr().sqrt().max(1e-3);
        let scaled: Vec<(Vec<u8>, C)> = raw.terms().iter().map(|(o, a)| (o.clone(), a / n)).collect();
        FockState::from_occupations(2, &scaled).unwrap()
    })
}

fn graph(n_max: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..=n_max).prop_flat_map(|n| {
        let pair = (0..n, 0..n).prop_filter("no self edge", |(a, b)| a != b);
        (Just(n), prop::collection::vec(pair, 0..3 * n))
    })
}

proptest! {
    #[test]
    fn multiply_is_associative_and_matches_matrices((a, b, c) in triple()) {
        let ab = a.multiply(&b).unwrap();
        let left = ab.multiply(&c).unwrap();
        let right = a.multiply(&b.multiply(&c).unwrap()).unwrap();
        prop_assert_eq!(&left, &right);
        prop_assert!(max_diff(&ab.to_matrix(), &matmul(&a.to_matrix(), &b.to_matrix())) < 1e-12);
    }

    #[test]
    fn commutes_agrees_with_product_order((a, b, _) in triple()) {
        let same = a.multiply(&b).unwrap() == b.multiply(&a).unwrap();
        prop_assert_eq!(a.commutes(&b).unwrap(), same);
    }

    #[test]
    fn anticommuting_pair_product_commutes((a, b, c) in triple()) {
        prop_assume!(!a.commutes(&b).unwrap() && !a.commutes(&c).unwrap());
        prop_assert!(a.commutes(&b.multiply(&c).unwrap()).unwrap());
    }

    #[test]
    fn tableau_invariants_survive_any_sequence(
        (n, ops, seed) in (1usize..=6).prop_flat_map(|n| (Just(n), tab_ops(n), any::<u64>()))
    ) {
        let mut t = Tableau::new_computational(n).unwrap().with_seed(seed);
        for op in ops {
            match op {
                TabOp::Gate(g, a, b) => {
                    if g.arity() == 1 {
                        t.apply_gate(g, &[a]).unwrap();
                    } else if a != b {
                        t.apply_gate(g, &[a, b]).unwrap();
                    }
                }
                TabOp::Measure(q, basis) => {
                    t.measure(q, basis).unwrap();
                }
                TabOp::Pauli(lits, s) => {
                    let lits: Vec<Pauli> = lits.into_iter().map(|i| Pauli::ALL[i]).collect();
                    let p = PauliString::from_literals(&lits, 2 * s);
                    if !p.is_identity_bits() {
                        t.measure_pauli(&p, None).unwrap();
                    }
                }
            }
            t.check_invariants().unwrap();
        }
    }

    #[test]
    fn joint_measure_of_one_op_is_measure(
        (n, ops, q, b, seed) in (1usize..=5).prop_flat_map(|n| (Just(n), tab_ops(n), 0..n, 0usize..3, any::<u64>()))
    ) {
        let mut t = Tableau::new_plus(n).unwrap().with_seed(seed);
        for op in ops {
            if let TabOp::Gate(g, a, c) = op {
                if g.arity() == 1 {
                    t.apply_gate(g, &[a]).unwrap();
                } else if a != c {
                    t.apply_gate(g, &[a, c]).unwrap();
                }
            }
        }
        let basis = [Basis::X, Basis::Y, Basis::Z][b];
        let mut single = t.clone();
        let r1 = single.measure(q, basis).unwrap();
        let r2 = t.joint_measure(&[PauliString::single(n, q, basis.literal())]).unwrap();
        prop_assert_eq!(r1.outcome, r2[0].outcome);
        prop_assert_eq!(single.serialize(), t.serialize());
    }

    #[test]
    fn repeated_edges_cancel((n, edges) in graph(8)) {
        let g = ClusterGraph::from_edges(n, &edges).unwrap();
        let mut set = BTreeSet::new();
        for &(u, v) in &edges {
            let e = (u.min(v), u.max(v));
            if !set.remove(&e) {
                set.insert(e);
            }
        }
        prop_assert_eq!(g.edges(), set.into_iter().collect::<Vec<_>>());
        let mut doubled = edges.clone();
        doubled.extend(edges.iter().copied());
        prop_assert_eq!(ClusterGraph::from_edges(n, &doubled).unwrap().num_edges(), 0);
    }

    #[test]
    fn measure_z_never_adds_edges((n, edges, v) in graph(8).prop_flat_map(|(n, e)| (Just(n), Just(e), 0..n))) {
        let g = ClusterGraph::from_edges(n, &edges).unwrap();
        let out = g.measure_z(v).unwrap();
        let before: BTreeSet<_> = g.edges().into_iter().collect();
        for e in out.graph.edges() {
            prop_assert!(before.contains(&e), "new edge {:?}", e);
        }
        prop_assert!(out.graph.num_edges() <= g.num_edges());
    }

    #[test]
    fn elements_preserve_norm_and_photon_number(s in three_photons(), e in element(2)) {
        let mut out = s.clone();
        out.apply_element(&e).unwrap();
        prop_assert!((out.norm_sqr() - s.norm_sqr()).abs() < 1e-12, "{} vs {}", out.norm_sqr(), s.norm_sqr());
        prop_assert_eq!(out.photon_number(), Some(3));
    }
}

#[test]
fn single_qubit_products_match_matrices() {
    for a in Pauli::ALL {
        for b in Pauli::ALL {
            for (pa, pb) in [(0u8, 0u8), (1, 3), (2, 1)] {
                let x = PauliString::from_literals(&[a], pa);
                let y = PauliString::from_literals(&[b], pb);
                let got = x.multiply(&y).unwrap().to_matrix();
                assert!(max_diff(&got, &matmul(&x.to_matrix(), &y.to_matrix())) < 1e-12);
            }
        }
    }
}

#[test]
fn detector_is_not_a_linear_element() {
    let mut s = FockState::plus(1);
    assert!(s
        .apply_element(&LoElement::Detect(0, stabsim_core::optics::DetectBasis::HV))
        .is_err());
    assert!(s.apply_element(&LoElement::Rot45(1)).is_err());
}
