use stabsim::session::{ExportFormat, Mode, Op, Session, SessionError, Status};
use stabsim_core::{Basis, Branch, GateId};

fn cluster(n: usize, edges: &[[usize; 2]]) -> Op {
    Op::NewCluster {
        n: Some(n),
        edges: edges.to_vec(),
    }
}

fn measure(qubit: usize, basis: Basis) -> Op {
    Op::Measure {
        qubit,
        basis,
        outcome: None,
        choice: None,
    }
}

fn star() -> Op {
    cluster(4, &[[1, 2], [1, 3], [1, 4]])
}

#[test]
fn z_measurement_splits_line() {
    let mut s = Session::new(0);
    s.submit(cluster(5, &[[1, 2], [2, 3], [3, 4], [4, 5]]), Mode::Auto)
        .unwrap();
    let r = s.submit(measure(3, Basis::Z), Mode::Auto).unwrap();
    assert_eq!(r.status, Status::Ok);
    assert_eq!(r.snapshot.graph.unwrap().edges, vec![[1, 2], [4, 5]]);
    assert_eq!(r.snapshot.components, vec![vec![1, 2], vec![4, 5]]);
    assert!(r.snapshot.consistent);
}

#[test]
fn x_on_star_center_asks_for_a_neighbor() {
    let mut s = Session::new(3);
    s.submit(star(), Mode::Interactive).unwrap();
    let r = s.submit(measure(1, Basis::X), Mode::Interactive).unwrap();
    assert_eq!(r.status, Status::NeedsChoice);
    assert_eq!(r.choices.unwrap(), vec![vec![2], vec![3], vec![4]]);
    assert_eq!(r.snapshot.history_len, 1);

    // Nothing else is accepted until the choice is made.
    let err = s.submit(measure(2, Basis::Z), Mode::Interactive).unwrap_err();
    assert!(matches!(err, SessionError::Pending(_)));
    assert!(matches!(
        s.choose(7, Mode::Interactive),
        Err(SessionError::BadChoice { index: 7, count: 3 })
    ));

    let r = s.choose(1, Mode::Interactive).unwrap();
    assert_eq!(r.status, Status::Ok);
    let rec = r.record.unwrap();
    assert_eq!(rec.hadamards, vec![3]);
    assert_eq!(r.snapshot.graph.unwrap().edges, vec![[2, 3], [3, 4]]);
    assert!(r.snapshot.consistent);
    assert!(s.pending().is_none());
}

#[test]
fn auto_mode_takes_first_option_and_warns() {
    let mut s = Session::new(3);
    s.submit(star(), Mode::Auto).unwrap();
    let r = s.submit(measure(1, Basis::X), Mode::Auto).unwrap();
    assert_eq!(r.status, Status::Ok);
    assert_eq!(r.record.unwrap().hadamards, vec![2]);
    assert_eq!(s.take_warnings().len(), 1);
}

#[test]
fn undo_drops_pending_choice_before_history() {
    let mut s = Session::new(3);
    s.submit(star(), Mode::Interactive).unwrap();
    let h0 = s.snapshot().state_hash;
    s.submit(measure(1, Basis::X), Mode::Interactive).unwrap();
    assert_ne!(s.snapshot().state_hash, h0);
    s.undo().unwrap();
    assert_eq!(s.snapshot().state_hash, h0);
    s.undo().unwrap();
    assert_eq!(s.snapshot().n, 0);
    assert!(s.undo().is_err());
}

#[test]
fn undo_after_fuse_restores_state() {
    for fusion_type in 1..=4u8 {
        for branch in [Branch::Success, Branch::Failure] {
            let mut s = Session::new(11);
            s.submit(cluster(6, &[[1, 2], [2, 3], [4, 5], [5, 6]]), Mode::Auto)
                .unwrap();
            s.submit(measure(1, Basis::Z), Mode::Auto).unwrap();
            let before = s.snapshot();
            let r = s
                .submit(
                    Op::Fuse {
                        fusion_type,
                        control: 3,
                        target: 4,
                        branch,
                        choices: None,
                    },
                    Mode::Auto,
                )
                .unwrap();
            assert!(r.snapshot.consistent, "type {fusion_type} {branch:?}");
            s.undo().unwrap();
            assert_eq!(s.snapshot(), before, "type {fusion_type} {branch:?}");
        }
    }
}

#[test]
fn replay_from_file_is_bit_exact() {
    let ops = vec![
        cluster(7, &[[1, 2], [2, 3], [3, 4], [5, 6], [6, 7]]),
        measure(2, Basis::Y),
        Op::Apply {
            gate: GateId::Cnot,
            qubits: vec![3, 5],
        },
        measure(4, Basis::X),
        Op::Type1Fuse {
            variant: 1,
            control: 1,
            target: 6,
            branch: Branch::Success,
            choices: None,
        },
        Op::Lc { qubit: 7 },
        Op::Apply {
            gate: GateId::H,
            qubits: vec![5],
        },
    ];
    for seed in 0..20 {
        let mut s = Session::new(seed);
        for op in &ops {
            s.submit(op.clone(), Mode::Auto).unwrap();
        }
        let file = s.to_file();
        let text = serde_json::to_string(&file).unwrap();
        let back = Session::from_file(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.snapshot(), s.snapshot(), "seed {seed}");
        assert_eq!(
            back.export(ExportFormat::Tableau).unwrap(),
            s.export(ExportFormat::Tableau).unwrap()
        );
    }
}

#[test]
fn tampered_outcome_fails_replay() {
    let mut s = Session::new(5);
    s.submit(cluster(3, &[[1, 2], [2, 3]]), Mode::Auto).unwrap();
    s.submit(measure(2, Basis::Y), Mode::Auto).unwrap();
    let mut file = s.to_file();
    file.history[1].outcomes[0] *= -1;
    assert!(matches!(Session::from_file(&file), Err(SessionError::Replay(_))));
}

#[test]
fn hadamard_leaves_graph_form_until_resolved() {
    let mut s = Session::new(1);
    s.submit(cluster(2, &[[1, 2]]), Mode::Interactive).unwrap();
    let r = s
        .submit(
            Op::Apply {
                gate: GateId::H,
                qubits: vec![1],
            },
            Mode::Interactive,
        )
        .unwrap();
    assert_eq!(r.status, Status::NeedsChoice);
    assert!(r.snapshot.graph.is_none());
    assert_eq!(r.snapshot.history_len, 2);
    let options = r.choices.unwrap();
    assert!(!options.is_empty());
    let r = s.choose(0, Mode::Interactive).unwrap();
    assert!(r.snapshot.graph.is_some());
    assert!(r.snapshot.consistent);
    assert_eq!(r.snapshot.history_len, 3);
}

#[test]
fn every_op_keeps_graph_and_tableau_in_step() {
    use rand::{Rng, SeedableRng};
    for seed in 0..200u64 {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let n = 8;
        let edges: Vec<[usize; 2]> = (1..n).map(|v| [v, v + 1]).chain([[2, 5], [3, 7]]).collect();
        let mut s = Session::new(seed);
        s.submit(cluster(n, &edges), Mode::Auto).unwrap();
        for step in 0..12 {
            let active: Vec<usize> = s.snapshot().components.concat();
            if active.len() < 2 {
                break;
            }
            let a = active[rng.random_range(0..active.len())];
            let b = *active
                .iter()
                .filter(|&&x| x != a)
                .nth(rng.random_range(0..active.len() - 1))
                .unwrap();
            let basis = [Basis::X, Basis::Y, Basis::Z][rng.random_range(0..3)];
            let op = match rng.random_range(0..6) {
                0 => measure(a, basis),
                1 => Op::Lc { qubit: a },
                2 => Op::Apply {
                    gate: [GateId::Cz, GateId::Cnot][rng.random_range(0..2)],
                    qubits: vec![a, b],
                },
                3 => Op::Apply {
                    gate: [GateId::H, GateId::P, GateId::Pdg, GateId::X][rng.random_range(0..4)],
                    qubits: vec![a],
                },
                4 => Op::Fuse {
                    fusion_type: rng.random_range(1..=4),
                    control: a,
                    target: b,
                    branch: if rng.random_bool(0.5) {
                        Branch::Success
                    } else {
                        Branch::Failure
                    },
                    choices: None,
                },
                _ => Op::Type1Fuse {
                    variant: rng.random_range(1..=4),
                    control: a,
                    target: b,
                    branch: Branch::Success,
                    choices: None,
                },
            };
            let r = s
                .submit(op.clone(), Mode::Auto)
                .unwrap_or_else(|e| panic!("seed {seed} step {step} {op:?}: {e}"));
            assert!(r.snapshot.consistent, "seed {seed} step {step} {op:?}");
        }
        let back = Session::from_file(&s.to_file()).unwrap();
        assert_eq!(back.snapshot().state_hash, s.snapshot().state_hash, "seed {seed}");
    }
}

#[test]
fn to_graph_rejects_measured_qubits() {
    let mut s = Session::new(0);
    s.submit(cluster(3, &[[1, 2], [2, 3]]), Mode::Auto).unwrap();
    s.submit(measure(1, Basis::Z), Mode::Auto).unwrap();
    let h = s.snapshot().state_hash;
    let err = s
        .submit(
            Op::ToGraph {
                hadamards: Some(vec![1]),
            },
            Mode::Auto,
        )
        .unwrap_err();
    assert!(matches!(err, SessionError::Invalid(_)));
    assert_eq!(s.snapshot().state_hash, h);
}
