//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::time::{Duration, Instant};

use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stabsim_core::dense::DenseState;
use stabsim_core::graph::{check_outcome, compare_with_graph, extract_graph, Extracted, Step};
use stabsim_core::kmap::{builtin_rule, literals_for_index};
use stabsim_core::optics::{
    self, build_named, build_type1, build_type2, compile_circuit_to_lo, extract_kraus, success_probability, FockState,
    LoCircuit, QOp, QuantumCircuit,
};
use stabsim_core::tableau::canonical_form;
use stabsim_core::verifier::{
    check_cluster_recognition, check_lo_stabilizer, check_rows, check_suite, lo_stabilizer_builders,
    outcome_statistics, random_stabilizer_state, reference_rows, rotated_type2_rows, CircuitCase, Suite,
};
use stabsim_core::{Basis, ClusterGraph, GateId, PauliString, Tableau};

struct Outcome {
    ok: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        ok: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        ok: false,
        detail: detail.into(),
    }
}

fn ps(s: &str) -> PauliString {
    PauliString::parse(s).unwrap()
}

fn unsigned(gens: &[PauliString]) -> Vec<String> {
    canonical_form(gens, false).iter().map(|p| p.to_string()).collect()
}

fn edges1(g: &ClusterGraph) -> Vec<(usize, usize)> {
    g.edges().into_iter().map(|(u, v)| (u + 1, v + 1)).collect()
}

// ---------------------------------------------------------------------

fn gate_matrix(g: GateId) -> Vec<Vec<C>> {
    let k = g.arity();
    let d = 1 << k;
    let qubits: Vec<usize> = (0..k).collect();
    let mut m = vec![vec![C::new(0.0, 0.0); d]; d];
    for j in 0..d {
        let mut s = DenseState::basis(k, j).unwrap();
        s.apply_gate(g, &qubits).unwrap();
        for i in 0..d {
            m[i][j] = s.amplitudes()[i];
        }
    }
    m
}

fn mul(a: &[Vec<C>], b: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn dagger(a: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| a[j][i].conj()).collect()).collect()
}

fn gate_rule_fidelity() -> Outcome {
    let mut checked = 0;
    // every literal input against U P U† on matrices
    for g in GateId::ALL {
        let k = g.arity();
        let u = gate_matrix(g);
        let rule = builtin_rule(g);
        for idx in 0..1usize << (2 * k) {
            let lits = literals_for_index(k, idx);
            let p = PauliString::from_literals(&lits, 0);
            let want = mul(&mul(&u, &p.to_matrix()), &dagger(&u));
            let (out, flip) = rule.eval(&lits);
            let got = PauliString::from_literals(&out, if flip { 2 } else { 0 }).to_matrix();
            let diff = want
                .iter()
                .flatten()
                .zip(got.iter().flatten())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if diff > 1e-12 {
                return fail(format!(
                    "{g} on {}: rule gives {}",
                    p,
                    PauliString::from_literals(&out, 0)
                ));
            }
            checked += 1;
        }
    }
    // published conjugation table
    let table: &[(GateId, &str, &str)] = &[
        (GateId::H, "X", "+Z"),
        (GateId::H, "Y", "-Y"),
        (GateId::H, "Z", "+X"),
        (GateId::P, "X", "+Y"),
        (GateId::P, "Y", "-X"),
        (GateId::P, "Z", "+Z"),
        (GateId::Cnot, "XI", "+XX"),
        (GateId::Cnot, "YI", "+YX"),
        (GateId::Cnot, "ZI", "+ZI"),
        (GateId::Cnot, "IX", "+IX"),
        (GateId::Cnot, "IY", "+ZY"),
        (GateId::Cnot, "IZ", "+ZZ"),
        (GateId::Cnot, "XZ", "-YY"),
        (GateId::Cz, "XI", "+XZ"),
        (GateId::Cz, "YI", "+YZ"),
        (GateId::Cz, "ZI", "+ZI"),
        (GateId::Cz, "IX", "+ZX"),
        (GateId::Cz, "IY", "+ZY"),
        (GateId::Cz, "IZ", "+IZ"),
        (GateId::Cz, "XX", "+YY"),
    ];
    for &(g, input, output) in table {
        let (out, flip) = builtin_rule(g).eval(&ps(input).literals());
        let got = PauliString::from_literals(&out, if flip { 2 } else { 0 }).to_string();
        if got != output {
            return fail(format!("{g} {input}: got {got}, table says {output}"));
        }
    }
    pass(format!(
        "{checked} literal inputs over 8 gates, {} table rows, 0 mismatches",
        table.len()
    ))
}

fn p_rule_literal() -> Outcome {
    let e = builtin_rule(GateId::P).expressions();
    let get = |k: &str| {
        e.iter()
            .find(|(n, _)| n == k)
            .map(|(_, x)| x.display().to_string())
            .unwrap_or_default()
    };
    let (x, z, r) = (get("x'"), get("z'"), get("r"));
    let line = format!("x′ = {x}, z′ = {z}, r += {r}");
    if x == "x" && z == "x ⊕ z" && r == "x·z" {
        pass(line)
    } else {
        fail(line)
    }
}

fn tableau_dense() -> Outcome {
    let r = check_suite(Suite::Gates, 1000, 5, 2024).unwrap();
    if !r.passed() {
        return fail(r.summary());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let repeats = 10_000;
    let sigma = 0.5 / (repeats as f64).sqrt();
    let (mut circuits, mut worst): (usize, f64) = (0, 0.0);
    while circuits < 10 {
        let case = CircuitCase::random(&mut rng, 5, 20, 5, false);
        let stats = match outcome_statistics(&case, repeats, case.seed) {
            Ok(s) => s,
            Err(e) => return fail(e.to_string()),
        };
        let Some(&(_, plus)) = stats.first() else { continue };
        circuits += 1;
        let z = (plus as f64 / repeats as f64 - 0.5).abs() / sigma;
        worst = worst.max(z);
        if z > 3.0 {
            return fail(format!(
                "first random outcome frequency {plus}/{repeats} is {z:.2}σ from 1/2"
            ));
        }
    }
    pass(format!(
        "1000 circuits (20 gates + 5 measurements, n ≤ 5) exact; 10 random outcomes over 10^4 repeats, worst {worst:.2}σ"
    ))
}

// ---------------------------------------------------------------------
// Worked examples

fn example_star_fusion() -> Result<(), String> {
    let g = ["XZZIII", "ZXIIII", "ZIXIII", "IIIXZZ", "IIIZXI", "IIIZIX"];
    let want = ["IXIXII", "IZIZII", "ZIXIII", "ZIIIZZ", "XIZIXI", "XIZIIX"];
    for seed in 0..8 {
        let mut t = Tableau::from_stabilizers(&g.map(ps)).unwrap().with_seed(seed);
        t.joint_measure(&[ps("IXIXII"), ps("IZIZII")]).unwrap();
        if unsigned(t.stabilizers()) != unsigned(&want.map(ps)) {
            return Err(format!(
                "two-star fusion: {:?} vs {:?}",
                unsigned(t.stabilizers()),
                unsigned(&want.map(ps))
            ));
        }
    }
    Ok(())
}

fn example_ghz_fusion() -> Result<(), String> {
    let g = ["XXIIII", "ZZIIII", "IIXXII", "IIZZII", "IIIIXX", "IIIIZZ"];
    let want = ["XIXIXI", "ZIZIII", "ZIIIZI", "IXIXIX", "IZIZII", "IZIIIZ"];
    for seed in 0..8 {
        let mut t = Tableau::from_stabilizers(&g.map(ps)).unwrap().with_seed(seed);
        t.joint_measure(&[ps("XIXIXI"), ps("ZIZIII"), ps("ZIIIZI")]).unwrap();
        if unsigned(t.stabilizers()) != unsigned(&want.map(ps)) {
            return Err(format!("three-Bell GHZ fusion: {:?}", unsigned(t.stabilizers())));
        }
    }
    Ok(())
}

fn example_bell_fusion() -> Result<(), String> {
    // CNOT(1,3), H(1), Z on 1 and 3, then Z_2^{m1} X_4^{m3}: exact signs
    for seed in 0..8 {
        let mut t = Tableau::from_stabilizers(&["XXII", "ZZII", "IIXX", "IIZZ"].map(ps))
            .unwrap()
            .with_seed(seed);
        t.apply_gate(GateId::Cnot, &[0, 2]).unwrap();
        t.apply_gate(GateId::H, &[0]).unwrap();
        let m1 = t.measure(0, Basis::Z).unwrap().outcome;
        let m3 = t.measure(2, Basis::Z).unwrap().outcome;
        let want_x = if m1 == 1 { "+IXIX" } else { "-IXIX" };
        let want_z = if m3 == 1 { "+IZIZ" } else { "-IZIZ" };
        if t.stabilizer_sign(&ps(want_x)) != Some(true) || t.stabilizer_sign(&ps(want_z)) != Some(true) {
            return Err(format!("Bell fusion residual signs, m = ({m1}, {m3})"));
        }
        if m1 == -1 {
            t.apply_gate(GateId::Z, &[1]).unwrap();
        }
        if m3 == -1 {
            t.apply_gate(GateId::X, &[3]).unwrap();
        }
        if t.stabilizer_sign(&ps("+IXIX")) != Some(true) || t.stabilizer_sign(&ps("+IZIZ")) != Some(true) {
            return Err("corrected state is not ψ+ on 2, 4".into());
        }
    }
    Ok(())
}

fn rule_edges(
    name: &str,
    g: &ClusterGraph,
    steps: &[Step],
    out: &stabsim_core::RuleOutcome,
    want: &[(usize, usize)],
) -> Result<(), String> {
    if edges1(&out.graph) != want {
        return Err(format!("{name}: edges {:?}", edges1(&out.graph)));
    }
    for seed in 0..4 {
        if !check_outcome(g, steps, out, seed).map_err(|e| e.to_string())?.matches {
            return Err(format!("{name}: tableau disagrees"));
        }
    }
    Ok(())
}

fn worked_examples() -> Outcome {
    let mut done = Vec::new();
    let mut run = |name: &str, r: Result<(), String>| -> Result<(), String> {
        r?;
        done.push(name.to_string());
        Ok(())
    };
    let res = (|| -> Result<(), String> {
        run("two-star fusion", example_star_fusion())?;
        run("three-Bell GHZ fusion", example_ghz_fusion())?;
        run("Bell fusion", example_bell_fusion())?;

        let line = ClusterGraph::line(5);
        let z = line.measure_z(2).map_err(|e| e.to_string())?;
        run(
            "Z on a line",
            rule_edges(
                "Z on a line",
                &line,
                &[Step::single(5, 2, Basis::Z)],
                &z,
                &[(1, 2), (4, 5)],
            ),
        )?;

        let mut t = ClusterGraph::star(4, 0).to_tableau();
        t.measure(0, Basis::X).map_err(|e| e.to_string())?;
        let want = ["XIII", "IZZZ", "IXXI", "IXIX"].map(ps);
        run(
            "star X generators",
            (unsigned(t.stabilizers()) == unsigned(&want))
                .then_some(())
                .ok_or_else(|| format!("star X: {:?}", unsigned(t.stabilizers()))),
        )?;

        let x = line.measure_x(2, Some(1)).map_err(|e| e.to_string())?;
        run(
            "X on a line with H on 2",
            rule_edges(
                "X on a line",
                &line,
                &[Step::single(5, 2, Basis::X)],
                &x,
                &[(1, 4), (2, 4), (4, 5)],
            ),
        )?;

        let g9 = ClusterGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (2, 3), (1, 4)]).unwrap();
        let lc = g9.local_complement(0).map_err(|e| e.to_string())?;
        let want9 = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (2, 5)];
        let mut tab = g9.to_tableau();
        for (gate, q) in [
            (GateId::H, 0),
            (GateId::P, 0),
            (GateId::H, 0),
            (GateId::Pdg, 1),
            (GateId::Pdg, 2),
            (GateId::Pdg, 3),
        ] {
            tab.apply_gate(gate, &[q]).unwrap();
        }
        let lc_ok = edges1(&lc) == want9 && compare_with_graph(&tab, &lc).map(|c| c.matches).unwrap_or(false);
        run(
            "local complementation",
            lc_ok.then_some(()).ok_or_else(|| format!("LC: {:?}", edges1(&lc))),
        )?;

        let star5 = ClusterGraph::star(5, 0);
        let y = star5.measure_y(0).map_err(|e| e.to_string())?;
        run(
            "Y on a star",
            rule_edges(
                "Y on a star",
                &star5,
                &[Step::single(5, 0, Basis::Y)],
                &y,
                &[(2, 3), (2, 4), (2, 5), (3, 4), (3, 5), (4, 5)],
            ),
        )?;

        let g21 = ClusterGraph::from_edges(6, &[(0, 1), (0, 2), (0, 3), (2, 3), (1, 4), (1, 5), (2, 4)]).unwrap();
        let xx = g21.two_adjacent_x(0, 1).map_err(|e| e.to_string())?;
        run(
            "adjacent X pair",
            rule_edges(
                "adjacent X",
                &g21,
                &[Step::single(6, 0, Basis::X), Step::single(6, 1, Basis::X)],
                &xx,
                &[(3, 4), (3, 6), (4, 5), (4, 6)],
            ),
        )?;

        let mut e22: Vec<(usize, usize)> = (0..4).map(|i| (i, i + 1)).collect();
        e22.extend((5..9).map(|i| (i, i + 1)));
        let g22 = ClusterGraph::from_edges(10, &e22).unwrap();
        let cx = g22.cnot(2, 7).map_err(|e| e.to_string())?;
        let mut want22: Vec<(usize, usize)> = e22.iter().map(|&(u, v)| (u + 1, v + 1)).collect();
        want22.extend([(3, 7), (3, 9)]);
        want22.sort();
        let mut tab = g22.to_tableau();
        tab.apply_gate(GateId::Cnot, &[2, 7]).unwrap();
        let ok22 = edges1(&cx) == want22 && compare_with_graph(&tab, &cx).map(|c| c.matches).unwrap_or(false);
        run(
            "CNOT across two lines",
            ok22.then_some(()).ok_or_else(|| format!("CNOT: {:?}", edges1(&cx))),
        )?;
        Ok(())
    })();
    match res {
        Ok(()) => pass(format!("{} examples: {}", done.len(), done.join(", "))),
        Err(e) => fail(e),
    }
}

// ---------------------------------------------------------------------

fn graph_suites() -> Outcome {
    let mut parts = Vec::new();
    for s in [
        Suite::GraphRules,
        Suite::FusionsTableII,
        Suite::FusionsTableV,
        Suite::NFusion,
    ] {
        let r = check_suite(s, 500, 8, 31).unwrap();
        if !r.passed() {
            return fail(r.summary());
        }
        parts.push(s.name());
    }
    pass(format!("{} × 500 instances, n ≤ 8, 0 mismatches", parts.join(", ")))
}

fn lo_kraus_tables() -> Outcome {
    let mut rows = reference_rows();
    let words: [&[GateId]; 5] = [&[], &[GateId::H], &[GateId::P], &[GateId::H, GateId::P], &[GateId::Y]];
    for rc in words {
        for rt in words {
            rows.extend(rotated_type2_rows(rc, rt).unwrap());
        }
    }
    let checks = check_rows(&rows).unwrap();
    let bad: Vec<_> = checks.iter().filter(|c| !c.ok()).collect();
    if let Some(b) = bad.first() {
        return fail(format!(
            "{} / {}: distance {:e}",
            b.row.builder,
            b.row.patterns.join(" or "),
            b.by_label
        ));
    }
    let relabeled: Vec<String> = checks
        .iter()
        .filter(|c| !c.row.labels_consistent)
        .map(|c| {
            format!(
                "[{}] realized by [{}]",
                c.row.patterns.join(", "),
                c.realized_by.join(", ")
            )
        })
        .collect();
    let worst = checks
        .iter()
        .filter(|c| c.row.labels_consistent)
        .map(|c| c.by_label)
        .fold(0.0, f64::max);
    pass(format!(
        "{} rows, worst |Δ| {worst:.1e}; pattern names differ for {} three-qubit rows: {}",
        checks.len(),
        relabeled.len(),
        relabeled.join("; ")
    ))
}

fn lo_success_probabilities() -> Outcome {
    // X_t before the CNOT, compiled: the waveplate-rotated type-I circuit
    let x_t = QuantumCircuit {
        ops: vec![
            QOp::Gate {
                gate: GateId::X,
                targets: vec![2],
            },
            QOp::Gate {
                gate: GateId::Cnot,
                targets: vec![1, 2],
            },
            QOp::Measure {
                measure: "Z".into(),
                target: 2,
            },
        ],
    };
    let mut cases: Vec<(String, LoCircuit, f64)> = vec![
        ("type1".into(), build_type1(), 0.5),
        ("type1 after X_t".into(), compile_circuit_to_lo(&x_t).unwrap(), 0.5),
        ("type1_cz".into(), build_named("type1_cz").unwrap(), 0.5),
        ("type2".into(), build_type2(), 0.5),
        ("ghz3".into(), build_named("ghz3").unwrap(), 0.25),
    ];
    for n in 2..=5 {
        cases.push((
            format!("ghz{n}"),
            build_named(&format!("ghz{n}")).unwrap(),
            0.5f64.powi(n as i32 - 1),
        ));
    }
    // |++⟩ lies in the +1 eigenspace of X⊗X, so ⟨++|++⟩ = 1 is the only
    // success weight of |0⟩⟨++| ± |1⟩⟨−−|
    cases.push(("type1_xx".into(), build_named("type1_xx").unwrap(), 1.0));
    let mut worst: f64 = 0.0;
    for (name, c, want) in &cases {
        let p = success_probability(c, &FockState::plus(c.qubits)).unwrap();
        worst = worst.max((p - want).abs());
        if (p - want).abs() >= 1e-9 {
            return fail(format!("{name}: {p} ≠ {want}"));
        }
    }
    pass(format!(
        "{} circuits on |+…+⟩ (type-I variants 0.5, type1_xx 1), worst |Δ| {worst:.1e}",
        cases.len()
    ))
}

fn kraus_completeness() -> Outcome {
    let mut names: Vec<String> = optics::BUILDERS.iter().map(|s| s.to_string()).collect();
    names.extend((2..=5).map(|n| format!("ghz{n}")));
    names.extend(["type2_rotated:H,P".into(), "type2_rotated:P*H,Y".into()]);
    let mut worst: f64 = 0.0;
    for n in &names {
        let e = extract_kraus(&build_named(n).unwrap()).unwrap().completeness_error();
        worst = worst.max(e);
        if e > 1e-9 {
            return fail(format!("{n}: Σ K†K off by {e:e}"));
        }
    }
    pass(format!("{} builders, worst deviation {worst:.1e}", names.len()))
}

fn lo_stabilizer() -> Outcome {
    let builders = lo_stabilizer_builders();
    for b in &builders {
        let r = check_lo_stabilizer(b, 50, 8, 5);
        if !r.passed() {
            return fail(r.summary());
        }
    }
    pass(format!("{} builders × 50 random clusters", builders.len()))
}

fn cluster_recognition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut with_options = 0;
    for i in 0..200 {
        let n = 1 + i % 6;
        let t = random_stabilizer_state(&mut rng, n, 30).unwrap();
        match check_cluster_recognition(&t) {
            Ok(opts) if !opts.is_empty() => with_options += 1,
            Ok(_) => {}
            Err(e) => return fail(format!("state {i}: {e}")),
        }
    }
    let bell = Tableau::from_stabilizers(&[ps("XX"), ps("ZZ")]).unwrap();
    match extract_graph(&bell) {
        Extracted::NotACluster { hadamard_options } if hadamard_options == vec![vec![0], vec![1]] => pass(format!(
            "200 states ({with_options} needed Hadamards); Bell options {{1}}, {{2}}"
        )),
        other => fail(format!("Bell read-back: {other:?}")),
    }
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("gate-rule fidelity", Duration::from_secs(1), gate_rule_fidelity),
        ("P-gate rule literal", Duration::from_secs(1), p_rule_literal),
        ("tableau vs dense oracle", Duration::from_secs(60), tableau_dense),
        ("worked examples", Duration::from_secs(5), worked_examples),
        ("graph-rule equivalence", Duration::from_secs(120), graph_suites),
        ("LO Kraus tables", Duration::from_secs(10), lo_kraus_tables),
        (
            "LO success probabilities",
            Duration::from_secs(10),
            lo_success_probabilities,
        ),
        ("Kraus completeness", Duration::from_secs(5), kraus_completeness),
        ("LO vs stabilizer", Duration::from_secs(60), lo_stabilizer),
        ("cluster recognition", Duration::from_secs(10), cluster_recognition),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let in_time = took <= budget;
        let ok = out.ok && in_time;
        if !ok {
            failed += 1;
        }
        let timing = format!("{:.2}s of {}s", took.as_secs_f64(), budget.as_secs());
        println!(
            "{} {name}: {} ({timing}{})",
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
