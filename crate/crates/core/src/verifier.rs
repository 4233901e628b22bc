//! Randomized cross-checks between independent routes: tableau against the
//! dense state vector, graph rules against the tableau pipeline, and the
//! optics model against both the reference projector tables and the
//! tableau.
//!
//! Every trial derives its own seed from `(seed, trial)`, so reports are
//! reproducible and independent of the worker pool. Failing instances are
//! shrunk before they are reported.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dense::{dense_from_tableau, DenseState, MAX_DENSE_QUBITS};
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::graph::{
    check_outcome, compare_with_graph, extract_graph, fusion_steps, ghz_ops, restricted_generators, type1_steps,
    Branch, ClusterGraph, Extracted, RuleOutcome, Step,
};
use crate::kmap::GateId;
use crate::optics::{self, extract_kraus, kraus_distance, FockState, KrausOp, Pattern};
use crate::pauli::{Pauli, PauliString};
use crate::tableau::{canonical_form, Basis, Tableau};

const TOL: f64 = 1e-9;

/// Check suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Suite {
    #[serde(rename = "gates")]
    Gates,
    #[serde(rename = "measurements")]
    Measurements,
    #[serde(rename = "graph_rules")]
    GraphRules,
    #[serde(rename = "fusions_tableII")]
    FusionsTableII,
    #[serde(rename = "fusions_tableV")]
    FusionsTableV,
    #[serde(rename = "n_fusion")]
    NFusion,
    #[serde(rename = "lo_kraus")]
    LoKraus,
    #[serde(rename = "lo_stabilizer")]
    LoStabilizer,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Gates,
        Suite::Measurements,
        Suite::GraphRules,
        Suite::FusionsTableII,
        Suite::FusionsTableV,
        Suite::NFusion,
        Suite::LoKraus,
        Suite::LoStabilizer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gates => "gates",
            Suite::Measurements => "measurements",
            Suite::GraphRules => "graph_rules",
            Suite::FusionsTableII => "fusions_tableII",
            Suite::FusionsTableV => "fusions_tableV",
            Suite::NFusion => "n_fusion",
            Suite::LoKraus => "lo_kraus",
            Suite::LoStabilizer => "lo_stabilizer",
        }
    }

    fn dense_backed(self) -> bool {
        matches!(self, Suite::Gates | Suite::Measurements | Suite::LoStabilizer)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Unsupported(format!("unknown suite `{s}`")))
    }
}

/// Deliberate defects for harness sanity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Local complementation leaves the first neighbor pair untouched.
    LcSkipsOnePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub trial: usize,
    /// Seed that regenerates the original instance.
    pub seed: u64,
    /// Shrunk instance; feed to [`replay`].
    pub instance: serde_json::Value,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub suite: String,
    pub trials: usize,
    pub n_max: usize,
    pub seed: u64,
    pub failures: Vec<Failure>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: {} trials, n ≤ {}, seed {}: {}",
            self.suite,
            self.trials,
            self.n_max,
            self.seed,
            if self.passed() {
                "ok".to_string()
            } else {
                format!("{} failures", self.failures.len())
            }
        );
        for f in self.failures.iter().take(5) {
            s.push_str(&format!(
                "\n  trial {} (seed {}): {}: {}\n    {}",
                f.trial, f.seed, f.kind, f.message, f.instance
            ));
        }
        s
    }
}

/// Trial seed: SplitMix64 of the suite seed and trial index.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Why an instance failed; shrinking only keeps candidates of the same kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fail {
    pub kind: &'static str,
    pub message: String,
}

impl Fail {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Fail {
            kind,
            message: message.into(),
        }
    }
}

fn rejected(e: Error) -> Fail {
    Fail::new("rejected", e.to_string())
}

/// A randomly generated instance with its own check and shrink moves.
pub trait Case: Clone + Serialize + DeserializeOwned + Send {
    fn check(&self, m: Mutation) -> std::result::Result<(), Fail>;
    fn shrink(&self) -> Vec<Self>;
}

fn guarded<T: Case>(case: &T, m: Mutation) -> std::result::Result<(), Fail> {
    match catch_unwind(AssertUnwindSafe(|| case.check(m))) {
        Ok(r) => r,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(Fail::new("panic", msg))
        }
    }
}

fn shrink_case<T: Case>(mut case: T, mut fail: Fail, m: Mutation) -> (T, Fail) {
    'outer: for _ in 0..500 {
        for cand in case.shrink() {
            if let Err(f) = guarded(&cand, m) {
                if f.kind == fail.kind {
                    case = cand;
                    fail = f;
                    continue 'outer;
                }
            }
        }
        break;
    }
    (case, fail)
}

/// Runs `trials` instances from `gen` in parallel; failures are shrunk and
/// reported in trial order.
pub fn run_cases<T, G>(suite: &str, trials: usize, n_max: usize, seed: u64, m: Mutation, gen: G) -> CheckReport
where
    T: Case,
    G: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let failures: Vec<Failure> = (0..trials)
        .into_par_iter()
        .filter_map(|i| {
            let s = trial_seed(seed, i);
            let case = gen(&mut ChaCha8Rng::seed_from_u64(s));
            let fail = guarded(&case, m).err()?;
            let (small, fail) = shrink_case(case, fail, m);
            Some(Failure {
                trial: i,
                seed: s,
                instance: serde_json::to_value(&small).unwrap_or(serde_json::Value::Null),
                kind: fail.kind.to_string(),
                message: fail.message,
            })
        })
        .collect();
    CheckReport {
        suite: suite.to_string(),
        trials,
        n_max,
        seed,
        failures,
    }
}

pub fn check_suite(suite: Suite, trials: usize, n_max: usize, seed: u64) -> Result<CheckReport> {
    check_suite_with(suite, trials, n_max, seed, Mutation::None)
}

pub fn check_suite_with(suite: Suite, trials: usize, n_max: usize, seed: u64, m: Mutation) -> Result<CheckReport> {
    if suite.dense_backed() && n_max > MAX_DENSE_QUBITS {
        return Err(Error::pre(format!(
            "{suite} is dense-backed; n_max must be ≤ {MAX_DENSE_QUBITS}"
        )));
    }
    let min = match suite {
        Suite::Gates | Suite::Measurements | Suite::LoKraus => 1,
        _ => 2,
    };
    if n_max < min {
        return Err(Error::pre(format!("{suite} needs n_max ≥ {min}")));
    }
    let name = suite.name();
    Ok(match suite {
        Suite::Gates => run_cases(name, trials, n_max, seed, m, |r| {
            CircuitCase::random(r, n_max, 20, 5, false)
        }),
        Suite::Measurements => run_cases(name, trials, n_max, seed, m, |r| {
            CircuitCase::random(r, n_max, 10, 10, true)
        }),
        Suite::GraphRules => run_cases(name, trials, n_max, seed, m, |r| GraphCase::random_rule(r, n_max)),
        Suite::FusionsTableII => run_cases(name, trials, n_max, seed, m, |r| {
            GraphCase::random_fusion(r, n_max, false)
        }),
        Suite::FusionsTableV => run_cases(name, trials, n_max, seed, m, |r| {
            GraphCase::random_fusion(r, n_max, true)
        }),
        Suite::NFusion => run_cases(name, trials, n_max, seed, m, |r| GraphCase::random_n_fusion(r, n_max)),
        Suite::LoKraus => run_cases(name, trials, n_max, seed, m, LoKrausCase::random),
        Suite::LoStabilizer => run_cases(name, trials, n_max, seed, m, |r| {
            let names = lo_stabilizer_builders();
            let b = names[r.random_range(0..names.len())].clone();
            LoStabilizerCase::random(r, &b, n_max)
        }),
    })
}

/// Re-checks a reported instance; `Ok(None)` means it now passes.
pub fn replay(suite: Suite, instance: &serde_json::Value, m: Mutation) -> Result<Option<Fail>> {
    fn go<T: Case>(v: &serde_json::Value, m: Mutation) -> Result<Option<Fail>> {
        let case: T = serde_json::from_value(v.clone()).map_err(|e| Error::parse(1, 1, e.to_string()))?;
        Ok(guarded(&case, m).err())
    }
    match suite {
        Suite::Gates | Suite::Measurements => go::<CircuitCase>(instance, m),
        Suite::GraphRules | Suite::FusionsTableII | Suite::FusionsTableV | Suite::NFusion => {
            go::<GraphCase>(instance, m)
        }
        Suite::LoKraus => go::<LoKrausCase>(instance, m),
        Suite::LoStabilizer => go::<LoStabilizerCase>(instance, m),
    }
}

// ---------------------------------------------------------------------
// Circuits: tableau against the dense state vector

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CircuitOp {
    /// 1-based qubits.
    Gate { gate: GateId, qubits: Vec<usize> },
    /// Hermitian Pauli string such as `-XIZ`.
    Measure { measure: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitCase {
    pub n: usize,
    pub seed: u64,
    pub ops: Vec<CircuitOp>,
}

/// Outcome log of one circuit run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitRun {
    /// `(op index, outcome, deterministic)` per measurement.
    pub records: Vec<(usize, i8, bool)>,
}

fn random_pauli(rng: &mut ChaCha8Rng, n: usize, multi: bool) -> PauliString {
    if !multi {
        let q = rng.random_range(0..n);
        let p = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
        return PauliString::single(n, q, p);
    }
    loop {
        let lits: Vec<Pauli> = (0..n).map(|_| Pauli::ALL[rng.random_range(0..4)]).collect();
        let p = PauliString::from_literals(&lits, if rng.random_bool(0.5) { 0 } else { 2 });
        if !p.is_identity_bits() {
            return p;
        }
    }
}

fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> CircuitOp {
    loop {
        let gate = GateId::ALL[rng.random_range(0..GateId::ALL.len())];
        if gate.arity() == 2 && n < 2 {
            continue;
        }
        let a = rng.random_range(0..n);
        let qubits = if gate.arity() == 2 {
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            vec![a + 1, b + 1]
        } else {
            vec![a + 1]
        };
        return CircuitOp::Gate { gate, qubits };
    }
}

impl CircuitCase {
    /// `gates` random gates with `measurements` measurements at random
    /// positions; single-qubit X/Y/Z unless `multi`.
    pub fn random(rng: &mut ChaCha8Rng, n_max: usize, gates: usize, measurements: usize, multi: bool) -> Self {
        let n = rng.random_range(1..=n_max);
        let mut ops: Vec<CircuitOp> = (0..gates).map(|_| random_gate(rng, n)).collect();
        for _ in 0..measurements {
            let at = rng.random_range(0..=ops.len());
            let p = random_pauli(rng, n, multi);
            ops.insert(at, CircuitOp::Measure { measure: p.to_string() });
        }
        CircuitCase {
            n,
            seed: rng.random(),
            ops,
        }
    }

    /// Runs the tableau alone with the given RNG seed.
    pub fn run_tableau(&self, seed: u64) -> Result<CircuitRun> {
        let mut t = Tableau::new_computational(self.n)?.with_seed(seed);
        let mut records = Vec::new();
        for (i, op) in self.ops.iter().enumerate() {
            match op {
                CircuitOp::Gate { gate, qubits } => {
                    let q: Vec<usize> = qubits.iter().map(|&x| x.wrapping_sub(1)).collect();
                    t.apply_gate(*gate, &q)?;
                }
                CircuitOp::Measure { measure } => {
                    let r = t.measure_pauli(&PauliString::parse(measure)?, None)?;
                    records.push((i, r.outcome, r.deterministic));
                }
            }
        }
        Ok(CircuitRun { records })
    }
}

impl Case for CircuitCase {
    fn check(&self, _m: Mutation) -> std::result::Result<(), Fail> {
        let n = self.n;
        let mut t = Tableau::new_computational(n).map_err(rejected)?.with_seed(self.seed);
        let mut d = DenseState::zero(n).map_err(rejected)?;
        for (i, op) in self.ops.iter().enumerate() {
            match op {
                CircuitOp::Gate { gate, qubits } => {
                    let q: Vec<usize> = qubits.iter().map(|&x| x.wrapping_sub(1)).collect();
                    t.apply_gate(*gate, &q).map_err(rejected)?;
                    d.apply_gate(*gate, &q).map_err(rejected)?;
                }
                CircuitOp::Measure { measure } => {
                    let p = PauliString::parse(measure).map_err(rejected)?;
                    let prob = d.prob_plus(&p);
                    let r = t.measure_pauli(&p, None).map_err(rejected)?;
                    let random = (prob - 0.5).abs() < TOL;
                    if !random && prob.min(1.0 - prob) > TOL {
                        return Err(Fail::new("dense", format!("op {i}: P(+1) = {prob} is not 0, 1/2 or 1")));
                    }
                    if r.deterministic == random {
                        return Err(Fail::new(
                            "classification",
                            format!(
                                "op {i}: tableau says deterministic={}, dense P(+1) = {prob}",
                                r.deterministic
                            ),
                        ));
                    }
                    if !random && (r.outcome == 1) != (prob > 0.5) {
                        return Err(Fail::new(
                            "outcome",
                            format!("op {i}: tableau {} but dense P(+1) = {prob}", r.outcome),
                        ));
                    }
                    d = d.project(&p, r.outcome == 1);
                    d.normalize();
                }
            }
            t.check_invariants()
                .map_err(|e| Fail::new("invariant", format!("op {i}: {e}")))?;
            for s in t.stabilizers() {
                if !d.is_stabilized_by(s, TOL) {
                    return Err(Fail::new(
                        "stabilizer",
                        format!("op {i}: state is not stabilized by {s}"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn shrink(&self) -> Vec<Self> {
        (0..self.ops.len())
            .map(|i| {
                let mut c = self.clone();
                c.ops.remove(i);
                c
            })
            .collect()
    }
}

/// Frequency of `+1` for each random measurement over `repeats` reseeded
/// runs, as `(op index, plus count)`. Fails if any measurement changes its
/// deterministic/random classification between runs.
pub fn outcome_statistics(case: &CircuitCase, repeats: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let first = case.run_tableau(seed)?;
    let mut plus = vec![0usize; first.records.len()];
    for r in 0..repeats {
        let run = case.run_tableau(trial_seed(seed, r))?;
        for (k, (&(i, out, det), &(_, _, det0))) in run.records.iter().zip(&first.records).enumerate() {
            if det != det0 {
                return Err(Error::Internal(format!("measurement at op {i} changed classification")));
            }
            if out == 1 {
                plus[k] += 1;
            }
        }
    }
    Ok(first
        .records
        .iter()
        .zip(plus)
        .filter(|((_, _, det), _)| !det)
        .map(|((i, _, _), p)| (*i, p))
        .collect())
}

// ---------------------------------------------------------------------
// Graph rules against the tableau pipeline

/// Operation applied to a graph; node ids are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GraphOp {
    MeasureZ {
        v: usize,
    },
    MeasureX {
        v: usize,
        u: Option<usize>,
    },
    MeasureY {
        v: usize,
    },
    Lc {
        v: usize,
    },
    Cnot {
        c: usize,
        t: usize,
    },
    AdjacentX {
        u: usize,
        v: usize,
    },
    Fuse {
        c: usize,
        t: usize,
        fusion_type: u8,
        branch: Branch,
        choices: Vec<usize>,
    },
    FuseType1 {
        c: usize,
        t: usize,
        variant: u8,
        branch: Branch,
        choices: Vec<usize>,
    },
    NFusion {
        qubits: Vec<usize>,
        i: Option<usize>,
        j: Option<usize>,
    },
}

impl GraphOp {
    fn nodes(&self) -> Vec<usize> {
        match self {
            GraphOp::MeasureZ { v } | GraphOp::MeasureY { v } | GraphOp::Lc { v } => vec![*v],
            GraphOp::MeasureX { v, u } => std::iter::once(*v).chain(*u).collect(),
            GraphOp::Cnot { c, t } => vec![*c, *t],
            GraphOp::AdjacentX { u, v } => vec![*u, *v],
            GraphOp::Fuse { c, t, choices, .. } | GraphOp::FuseType1 { c, t, choices, .. } => {
                [*c, *t].into_iter().chain(choices.iter().copied()).collect()
            }
            GraphOp::NFusion { qubits, i, j } => qubits.iter().copied().chain(*i).chain(*j).collect(),
        }
    }

    fn map(&self, f: impl Fn(usize) -> usize) -> GraphOp {
        let mut op = self.clone();
        match &mut op {
            GraphOp::MeasureZ { v } | GraphOp::MeasureY { v } | GraphOp::Lc { v } => *v = f(*v),
            GraphOp::MeasureX { v, u } => {
                *v = f(*v);
                *u = u.map(&f);
            }
            GraphOp::Cnot { c, t } => {
                *c = f(*c);
                *t = f(*t);
            }
            GraphOp::AdjacentX { u, v } => {
                *u = f(*u);
                *v = f(*v);
            }
            GraphOp::Fuse { c, t, choices, .. } | GraphOp::FuseType1 { c, t, choices, .. } => {
                *c = f(*c);
                *t = f(*t);
                choices.iter_mut().for_each(|x| *x = f(*x));
            }
            GraphOp::NFusion { qubits, i, j } => {
                qubits.iter_mut().for_each(|x| *x = f(*x));
                *i = i.map(&f);
                *j = j.map(&f);
            }
        }
        op
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphCase {
    pub n: usize,
    /// 1-based edges.
    pub edges: Vec<[usize; 2]>,
    pub op: GraphOp,
    pub seed: u64,
}

fn random_edges(rng: &mut ChaCha8Rng, nodes: std::ops::Range<usize>, p: f64) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for u in nodes.clone() {
        for v in u + 1..nodes.end {
            if rng.random_bool(p) {
                e.push((u, v));
            }
        }
    }
    e
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> Option<T> {
    (!xs.is_empty()).then(|| xs[rng.random_range(0..xs.len())])
}

/// Partition sizes, each at least 1, summing to at most `n_max`.
fn sizes(rng: &mut ChaCha8Rng, parts: usize, n_max: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (0..parts).map(|_| rng.random_range(1..=4)).collect();
    while s.iter().sum::<usize>() > n_max {
        let i = s.iter().enumerate().max_by_key(|x| *x.1).map(|x| x.0).unwrap_or(0);
        s[i] -= 1;
    }
    s
}

impl GraphCase {
    fn new(n: usize, edges: &[(usize, usize)], op: GraphOp, seed: u64) -> Self {
        GraphCase {
            n,
            edges: edges.iter().map(|&(u, v)| [u + 1, v + 1]).collect(),
            op: op.map(|x| x + 1),
            seed,
        }
    }

    pub fn graph(&self) -> Result<ClusterGraph> {
        let e: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&[u, v]| (u.wrapping_sub(1), v.wrapping_sub(1)))
            .collect();
        ClusterGraph::from_edges(self.n, &e)
    }

    /// Single-qubit measurement, LC, CNOT or adjacent-X on a random graph.
    pub fn random_rule(rng: &mut ChaCha8Rng, n_max: usize) -> Self {
        let n = rng.random_range(2..=n_max);
        let p = rng.random_range(0.3..0.7);
        let edges = random_edges(rng, 0..n, p);
        let g = ClusterGraph::from_edges(n, &edges).expect("generated edges are valid");
        let v = rng.random_range(0..n);
        let op = match rng.random_range(0..6) {
            0 => GraphOp::MeasureZ { v },
            1 => {
                let nb: Vec<usize> = g.neighbors(v).iter().copied().collect();
                let u = if rng.random_bool(0.5) { pick(rng, &nb) } else { None };
                GraphOp::MeasureX { v, u }
            }
            2 => GraphOp::MeasureY { v },
            3 => GraphOp::Lc { v },
            4 => {
                let pairs: Vec<(usize, usize)> = (0..n)
                    .flat_map(|c| (0..n).map(move |t| (c, t)))
                    .filter(|&(c, t)| c != t && !g.has_edge(c, t))
                    .collect();
                match pick(rng, &pairs) {
                    Some((c, t)) => GraphOp::Cnot { c, t },
                    None => GraphOp::Lc { v },
                }
            }
            _ => match pick(rng, &edges) {
                Some((u, w)) => GraphOp::AdjacentX { u, v: w },
                None => GraphOp::MeasureZ { v },
            },
        };
        GraphCase::new(n, &edges, op, rng.random())
    }

    /// Two-qubit fusion across two random components; `type1` selects the
    /// type-I variants instead of the rotated fusions.
    pub fn random_fusion(rng: &mut ChaCha8Rng, n_max: usize, type1: bool) -> Self {
        let s = sizes(rng, 2, n_max);
        let (a, b) = (s[0], s[1]);
        let mut edges = random_edges(rng, 0..a, 0.5);
        edges.extend(random_edges(rng, a..a + b, 0.5));
        let g = ClusterGraph::from_edges(a + b, &edges).expect("generated edges are valid");
        let c = rng.random_range(0..a);
        let t = a + rng.random_range(0..b);
        let kind: u8 = rng.random_range(1..=4);
        let branch = if rng.random_bool(0.5) {
            Branch::Success
        } else {
            Branch::Failure
        };
        let default = rng.random_bool(0.4);
        let opts = g.fusion_choice_options(c, t, type1, kind, branch);
        let choices = if default || opts.is_empty() {
            Vec::new()
        } else {
            opts[rng.random_range(0..opts.len())].clone()
        };
        let op = if type1 {
            GraphOp::FuseType1 {
                c,
                t,
                variant: kind,
                branch,
                choices,
            }
        } else {
            GraphOp::Fuse {
                c,
                t,
                fusion_type: kind,
                branch,
                choices,
            }
        };
        GraphCase::new(a + b, &edges, op, rng.random())
    }

    /// GHZ projection on one qubit from each of 2–4 components.
    pub fn random_n_fusion(rng: &mut ChaCha8Rng, n_max: usize) -> Self {
        let k = rng.random_range(2..=n_max.min(4));
        let s = sizes(rng, k, n_max);
        let mut edges = Vec::new();
        let mut qubits = Vec::new();
        let mut off = 0;
        for &m in &s {
            edges.extend(random_edges(rng, off..off + m, 0.6));
            qubits.push(off + rng.random_range(0..m));
            off += m;
        }
        let g = ClusterGraph::from_edges(off, &edges).expect("generated edges are valid");
        let (mut i, mut j) = (None, None);
        if rng.random_bool(0.5) {
            let with_nb: Vec<usize> = qubits.iter().copied().filter(|&q| g.degree(q) > 0).collect();
            if let Some(q) = pick(rng, &with_nb) {
                i = Some(q);
                let nb: Vec<usize> = g.neighbors(q).iter().copied().collect();
                j = pick(rng, &nb);
            }
        }
        GraphCase::new(off, &edges, GraphOp::NFusion { qubits, i, j }, rng.random())
    }

    fn rule(&self, g: &ClusterGraph) -> Result<(RuleOutcome, Vec<Step>)> {
        let n = self.n;
        let z = |x: usize| x.wrapping_sub(1);
        Ok(match &self.op {
            GraphOp::MeasureZ { v } => (g.measure_z(z(*v))?, vec![Step::single(n, z(*v), Basis::Z)]),
            GraphOp::MeasureX { v, u } => (g.measure_x(z(*v), u.map(z))?, vec![Step::single(n, z(*v), Basis::X)]),
            GraphOp::MeasureY { v } => (g.measure_y(z(*v))?, vec![Step::single(n, z(*v), Basis::Y)]),
            GraphOp::AdjacentX { u, v } => (
                g.two_adjacent_x(z(*u), z(*v))?,
                vec![Step::single(n, z(*u), Basis::X), Step::single(n, z(*v), Basis::X)],
            ),
            GraphOp::Fuse {
                c,
                t,
                fusion_type,
                branch,
                choices,
            } => {
                let ch: Vec<usize> = choices.iter().map(|&x| z(x)).collect();
                (
                    g.fuse(z(*c), z(*t), *fusion_type, *branch, &ch)?,
                    fusion_steps(n, z(*c), z(*t), *fusion_type, *branch),
                )
            }
            GraphOp::FuseType1 {
                c,
                t,
                variant,
                branch,
                choices,
            } => {
                let ch: Vec<usize> = choices.iter().map(|&x| z(x)).collect();
                (
                    g.fuse_type1(z(*c), z(*t), *variant, *branch, &ch)?,
                    type1_steps(n, z(*c), z(*t), *variant, *branch),
                )
            }
            GraphOp::NFusion { qubits, i, j } => {
                let q: Vec<usize> = qubits.iter().map(|&x| z(x)).collect();
                (g.n_fusion(&q, i.map(z), j.map(z))?, vec![Step::Measure(ghz_ops(n, &q))])
            }
            GraphOp::Lc { .. } | GraphOp::Cnot { .. } => unreachable!("unitary ops are checked separately"),
        })
    }
}

fn mismatch(expected: &[String], got: &[String]) -> Fail {
    Fail::new(
        "mismatch",
        format!("expected ⟨{}⟩, got ⟨{}⟩", expected.join(", "), got.join(", ")),
    )
}

impl Case for GraphCase {
    fn check(&self, m: Mutation) -> std::result::Result<(), Fail> {
        let g = self.graph().map_err(|e| Fail::new("invalid", e.to_string()))?;
        let unitary = |out: ClusterGraph, gates: Vec<(GateId, Vec<usize>)>| -> std::result::Result<(), Fail> {
            let mut t = g.to_tableau();
            for (gate, q) in gates {
                t.apply_gate(gate, &q).map_err(rejected)?;
            }
            let chk = compare_with_graph(&t, &out).map_err(rejected)?;
            if chk.matches {
                Ok(())
            } else {
                Err(mismatch(&chk.expected, &chk.got))
            }
        };
        match self.op {
            GraphOp::Lc { v } => {
                let v = v.wrapping_sub(1);
                let mut out = g.local_complement(v).map_err(rejected)?;
                let nb: Vec<usize> = g.neighbors(v).iter().copied().collect();
                if m == Mutation::LcSkipsOnePair && nb.len() >= 2 {
                    out.toggle_edge(nb[0], nb[1]);
                }
                // √X on v and √Z† on its neighbors, up to phase
                let mut gates = vec![(GateId::H, vec![v]), (GateId::P, vec![v]), (GateId::H, vec![v])];
                gates.extend(nb.iter().map(|&u| (GateId::Pdg, vec![u])));
                unitary(out, gates)
            }
            GraphOp::Cnot { c, t } => {
                let (c, t) = (c.wrapping_sub(1), t.wrapping_sub(1));
                let out = g.cnot(c, t).map_err(rejected)?;
                unitary(out, vec![(GateId::Cnot, vec![c, t])])
            }
            _ => {
                let (out, steps) = self.rule(&g).map_err(rejected)?;
                if out.computed_by_oracle {
                    return Err(Fail::new("fallback", "rule fell back to the tableau oracle"));
                }
                for s in [self.seed, self.seed.wrapping_add(1)] {
                    let chk = check_outcome(&g, &steps, &out, s).map_err(rejected)?;
                    if !chk.matches {
                        return Err(mismatch(&chk.expected, &chk.got));
                    }
                }
                Ok(())
            }
        }
    }

    fn shrink(&self) -> Vec<Self> {
        let mut out = Vec::new();
        for i in 0..self.edges.len() {
            let mut c = self.clone();
            c.edges.remove(i);
            out.push(c);
        }
        let used = self.op.nodes();
        for w in (1..=self.n).rev() {
            if used.contains(&w) || self.n <= 2 {
                continue;
            }
            let f = |x: usize| if x > w { x - 1 } else { x };
            out.push(GraphCase {
                n: self.n - 1,
                edges: self
                    .edges
                    .iter()
                    .filter(|e| !e.contains(&w))
                    .map(|&[a, b]| [f(a), f(b)])
                    .collect(),
                op: self.op.map(f),
                seed: self.seed,
            });
        }
        out
    }
}

// ---------------------------------------------------------------------
// Optics: Kraus maps

/// One projector row of a reference table: the patterns that share it and
/// its `(output occupation, logical input, coefficient)` entries, up to scale.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausRow {
    pub builder: String,
    pub patterns: Vec<String>,
    pub terms: Vec<(Vec<u8>, usize, C)>,
    /// `false` where the listed pattern names do not produce this projector
    /// in the optics model although some other pattern does.
    pub labels_consistent: bool,
}

impl KrausRow {
    fn new(builder: &str, patterns: &[&str], terms: &[(&[u8], usize, f64)]) -> Self {
        KrausRow {
            builder: builder.into(),
            patterns: patterns.iter().map(|s| s.to_string()).collect(),
            terms: terms.iter().map(|&(r, c, a)| (r.to_vec(), c, C::new(a, 0.0))).collect(),
            labels_consistent: true,
        }
    }

    fn inconsistent(mut self) -> Self {
        self.labels_consistent = false;
        self
    }

    pub fn op(&self, inputs: usize) -> KrausOp {
        let mut rows: Vec<Vec<u8>> = self.terms.iter().map(|t| t.0.clone()).collect();
        rows.sort();
        rows.dedup();
        let mut matrix = vec![vec![C::new(0.0, 0.0); 1 << inputs]; rows.len()];
        for (r, col, a) in &self.terms {
            let i = rows.iter().position(|x| x == r).expect("row present");
            matrix[i][*col] += a;
        }
        KrausOp {
            pattern: Pattern { counts: vec![] },
            label: self.patterns.join(" or "),
            success: false,
            rows,
            matrix,
        }
    }
}

/// Projector tables for the type-I, type-II and three-qubit GHZ circuits.
pub fn reference_rows() -> Vec<KrausRow> {
    let s = optics::S;
    let (h, v, e, hv): (&[u8], &[u8], &[u8], &[u8]) = (&[1, 0], &[0, 1], &[], &[1, 1]);
    vec![
        KrausRow::new("type1", &["H_t"], &[(h, 0, 1.0), (v, 3, 1.0)]),
        KrausRow::new("type1", &["V_t"], &[(h, 0, 1.0), (v, 3, -1.0)]),
        KrausRow::new("type1", &["H_t^2"], &[(&[0, 0], 2, 1.0)]),
        KrausRow::new("type1", &["V_t^2"], &[(&[0, 0], 2, -1.0)]),
        KrausRow::new("type1", &["none"], &[(hv, 1, 1.0)]),
        KrausRow::new("type2", &["H_cH_t", "V_cV_t"], &[(e, 0, s), (e, 3, s)]),
        KrausRow::new("type2", &["H_cV_t", "V_cH_t"], &[(e, 0, s), (e, 3, -s)]),
        KrausRow::new("type2", &["H_c^2"], &[(e, 1, 1.0)]),
        KrausRow::new("type2", &["V_c^2"], &[(e, 1, -1.0)]),
        KrausRow::new("type2", &["H_t^2"], &[(e, 2, 1.0)]),
        KrausRow::new("type2", &["V_t^2"], &[(e, 2, -1.0)]),
        KrausRow::new(
            "ghz3",
            &["H_cH_t1H_t2", "H_cV_t1V_t2", "V_cH_t1V_t2", "V_cV_t1H_t2"],
            &[(e, 0, s), (e, 7, s)],
        ),
        KrausRow::new(
            "ghz3",
            &["V_cV_t1V_t2", "V_cH_t1H_t2", "H_cV_t1H_t2", "H_cH_t1V_t2"],
            &[(e, 0, s), (e, 7, -s)],
        ),
        KrausRow::new("ghz3", &["H_c^2H_t1", "H_c^2V_t1"], &[(e, 1, 1.0)]),
        KrausRow::new("ghz3", &["V_c^2H_t1", "V_c^2V_t1"], &[(e, 1, -1.0)]),
        KrausRow::new("ghz3", &["H_c^2H_t2", "H_c^2V_t2"], &[(e, 2, 1.0)]).inconsistent(),
        KrausRow::new("ghz3", &["V_c^2H_t2", "V_c^2V_t2"], &[(e, 2, -1.0)]).inconsistent(),
        KrausRow::new("ghz3", &["H_t1^2H_t2", "H_t1^2V_t2"], &[(e, 4, 1.0)]),
        KrausRow::new("ghz3", &["V_t1^2H_t2", "V_t1^2V_t2"], &[(e, 4, -1.0)]),
        KrausRow::new("ghz3", &["H_t1H_t2^2", "V_t1V_t2^2"], &[(e, 6, 1.0)]),
        KrausRow::new("ghz3", &["H_t1V_t2^2", "V_t1H_t2^2"], &[(e, 6, -1.0)]),
        KrausRow::new("ghz3", &["H_c^3", "H_cV_c^2"], &[(e, 3, 1.0)]).inconsistent(),
        KrausRow::new("ghz3", &["V_c^3", "H_c^2V_c"], &[(e, 3, -1.0)]).inconsistent(),
    ]
}

/// `(⟨00| ± ⟨11|)/√2 · R_c† R_t†` and `⟨01|, ⟨10|` times the same rotation,
/// computed on the dense oracle.
pub fn rotated_type2_rows(rc: &[GateId], rt: &[GateId]) -> Result<Vec<KrausRow>> {
    let name = format!(
        "type2_rotated:{},{}",
        rc.iter().map(|g| g.name()).collect::<Vec<_>>().join("*"),
        rt.iter().map(|g| g.name()).collect::<Vec<_>>().join("*")
    );
    // columns of R_c† ⊗ R_t†
    let mut cols = Vec::new();
    for j in 0..4 {
        let mut d = DenseState::basis(2, j)?;
        for (q, r) in [(0, rc), (1, rt)] {
            for g in r.iter().rev() {
                d.apply_gate(g.inverse(), &[q])?;
            }
        }
        cols.push(d);
    }
    let s = optics::S;
    let bras: [(&[&str], [f64; 4]); 4] = [
        (&["H_cH_t", "V_cV_t"], [s, 0.0, 0.0, s]),
        (&["H_cV_t", "V_cH_t"], [s, 0.0, 0.0, -s]),
        (&["H_c^2", "V_c^2"], [0.0, 1.0, 0.0, 0.0]),
        (&["H_t^2", "V_t^2"], [0.0, 0.0, 1.0, 0.0]),
    ];
    Ok(bras
        .iter()
        .map(|(pats, b)| {
            let terms = (0..4)
                .map(|j| {
                    let a: C = (0..4).map(|i| cols[j].amplitudes()[i] * b[i]).sum();
                    (vec![], j, a)
                })
                .filter(|t| t.2.norm() > TOL)
                .collect();
            KrausRow {
                builder: name.clone(),
                patterns: pats.iter().map(|p| p.to_string()).collect(),
                terms,
                labels_consistent: true,
            }
        })
        .collect())
}

/// Result of matching one reference row against the optics model.
#[derive(Debug, Clone, PartialEq)]
pub struct RowCheck {
    pub row: KrausRow,
    /// Worst distance over the row's named patterns; infinite if a name is
    /// missing.
    pub by_label: f64,
    /// Patterns of the model that realize the row's projector.
    pub realized_by: Vec<String>,
}

impl RowCheck {
    /// Named patterns match, or for rows flagged inconsistent, some pattern
    /// realizes the projector.
    pub fn ok(&self) -> bool {
        self.by_label < TOL || (!self.row.labels_consistent && !self.realized_by.is_empty())
    }
}

pub fn check_rows(rows: &[KrausRow]) -> Result<Vec<RowCheck>> {
    let mut out = Vec::new();
    for row in rows {
        let circ = optics::build_named(&row.builder)?;
        let map = extract_kraus(&circ)?;
        let reference = row.op(circ.qubits);
        let by_label = row
            .patterns
            .iter()
            .map(|p| {
                map.get(p)
                    .map(|k| kraus_distance(k, &reference))
                    .unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max);
        let realized_by = map
            .ops
            .iter()
            .filter(|k| kraus_distance(k, &reference) < TOL)
            .map(|k| k.label.clone())
            .collect();
        out.push(RowCheck {
            row: row.clone(),
            by_label,
            realized_by,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoKrausCase {
    pub builder: String,
    /// Logical input amplitudes as `[re, im]`.
    pub input: Vec<[f64; 2]>,
}

fn random_word(rng: &mut ChaCha8Rng) -> Vec<GateId> {
    let singles = [GateId::H, GateId::P, GateId::Pdg, GateId::X, GateId::Y, GateId::Z];
    (0..rng.random_range(0..4))
        .map(|_| singles[rng.random_range(0..singles.len())])
        .collect()
}

fn word_name(w: &[GateId]) -> String {
    if w.is_empty() {
        "I".into()
    } else {
        w.iter().map(|g| g.name()).collect::<Vec<_>>().join("*")
    }
}

impl LoKrausCase {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let builder = match rng.random_range(0..optics::BUILDERS.len() + 2) {
            k if k < optics::BUILDERS.len() => optics::BUILDERS[k].to_string(),
            k if k == optics::BUILDERS.len() => format!("ghz{}", rng.random_range(2..=5)),
            _ => format!(
                "type2_rotated:{},{}",
                word_name(&random_word(rng)),
                word_name(&random_word(rng))
            ),
        };
        let qubits = optics::build_named(&builder).map(|c| c.qubits).unwrap_or(2);
        let mut input: Vec<[f64; 2]> = (0..1 << qubits)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let norm = input.iter().map(|a| a[0] * a[0] + a[1] * a[1]).sum::<f64>().sqrt();
        input.iter_mut().for_each(|a| {
            a[0] /= norm;
            a[1] /= norm;
        });
        LoKrausCase { builder, input }
    }
}

impl Case for LoKrausCase {
    fn check(&self, _m: Mutation) -> std::result::Result<(), Fail> {
        let circ = optics::build_named(&self.builder).map_err(rejected)?;
        let map = extract_kraus(&circ).map_err(rejected)?;
        let err = map.completeness_error();
        if err > TOL {
            return Err(Fail::new("completeness", format!("Σ K†K deviates from I by {err:e}")));
        }
        let psi: Vec<C> = self.input.iter().map(|a| C::new(a[0], a[1])).collect();
        let fock = FockState::from_logical(circ.qubits, &psi).map_err(rejected)?;
        let results = optics::simulate(&circ, &fock).map_err(rejected)?;
        let total: f64 = results.iter().map(|r| r.probability).sum();
        if (total - 1.0).abs() > TOL {
            return Err(Fail::new("unitarity", format!("pattern probabilities sum to {total}")));
        }
        for r in &results {
            let detected: usize = r.pattern.counts.iter().map(|&(_, h, v)| (h + v) as usize).sum();
            let left = r.residual.photon_number().unwrap_or(usize::MAX);
            if detected + left != circ.qubits {
                return Err(Fail::new(
                    "photons",
                    format!("{}: {detected} detected + {left} left", r.label),
                ));
            }
        }
        // Kraus matrices applied to the input against direct propagation
        for k in &map.ops {
            let out: Vec<C> = k
                .matrix
                .iter()
                .map(|row| row.iter().zip(&psi).map(|(a, b)| a * b).sum())
                .collect();
            let p: f64 = out.iter().map(|a| a.norm_sqr()).sum();
            let sim = results.iter().find(|r| r.pattern == k.pattern);
            let sp = sim.map(|r| r.probability).unwrap_or(0.0);
            if (p - sp).abs() > TOL {
                return Err(Fail::new(
                    "linearity",
                    format!("{}: Kraus gives p = {p}, simulation {sp}", k.label),
                ));
            }
            if let (Some(r), true) = (sim, p > 1e-12) {
                for (occ, a) in k.rows.iter().zip(&out) {
                    let b = r.residual.terms().get(occ).copied().unwrap_or_default();
                    if (a / p.sqrt() - b).norm() > 1e-7 {
                        return Err(Fail::new(
                            "linearity",
                            format!("{}: residual differs at {occ:?}", k.label),
                        ));
                    }
                }
            }
        }
        let mut rows: Vec<KrausRow> = reference_rows()
            .into_iter()
            .filter(|r| r.builder == self.builder)
            .collect();
        if let Some((rc, rt)) = optics::rotated_parts(&self.builder).map_err(rejected)? {
            rows.extend(rotated_type2_rows(&rc, &rt).map_err(rejected)?);
        }
        for chk in check_rows(&rows).map_err(rejected)? {
            if !chk.ok() {
                return Err(Fail::new(
                    "reference",
                    format!("{}: distance {:e}", chk.row.patterns.join(" or "), chk.by_label),
                ));
            }
        }
        Ok(())
    }

    fn shrink(&self) -> Vec<Self> {
        Vec::new()
    }
}

// ---------------------------------------------------------------------
// Optics against the tableau

/// Fusion builders covered by the optics↔tableau check.
pub fn lo_stabilizer_builders() -> Vec<String> {
    let mut v: Vec<String> = optics::BUILDERS.iter().map(|s| s.to_string()).collect();
    v.push("ghz4".into());
    v.push("type2_rotated:H,P".into());
    v.push("type2_rotated:P*H,X".into());
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoStabilizerCase {
    pub builder: String,
    pub n: usize,
    /// 1-based edges.
    pub edges: Vec<[usize; 2]>,
    /// Graph node fed to each circuit qubit, 1-based.
    pub qubits: Vec<usize>,
    pub seed: u64,
}

impl LoStabilizerCase {
    pub fn random(rng: &mut ChaCha8Rng, builder: &str, n_max: usize) -> Self {
        let k = optics::build_named(builder).map(|c| c.qubits).unwrap_or(2);
        let n = rng.random_range(k..=n_max.clamp(k, 8));
        let p = rng.random_range(0.3..0.7);
        let edges = random_edges(rng, 0..n, p);
        let mut nodes: Vec<usize> = (0..n).collect();
        let mut qubits = Vec::new();
        for _ in 0..k {
            let i = rng.random_range(0..nodes.len());
            qubits.push(nodes.remove(i) + 1);
        }
        LoStabilizerCase {
            builder: builder.to_string(),
            n,
            edges: edges.iter().map(|&(u, v)| [u + 1, v + 1]).collect(),
            qubits,
            seed: rng.random(),
        }
    }

    /// Equivalent tableau pipeline on success.
    fn steps(&self, q: &[usize]) -> Result<Vec<Step>> {
        let n = self.n;
        let name = self.builder.trim().to_ascii_lowercase();
        Ok(match name.as_str() {
            "type1" => type1_steps(n, q[0], q[1], 1, Branch::Success),
            "type1_cz" => type1_steps(n, q[0], q[1], 3, Branch::Success),
            "type1_xx" => type1_steps(n, q[0], q[1], 4, Branch::Success),
            "type2" => fusion_steps(n, q[0], q[1], 2, Branch::Success),
            "type2_flip" => {
                let mut s = vec![Step::Gate(GateId::X, vec![q[1]])];
                s.extend(fusion_steps(n, q[0], q[1], 2, Branch::Success));
                s
            }
            _ if name.starts_with("ghz") => vec![Step::Measure(ghz_ops(n, q))],
            _ => {
                let (rc, rt) = optics::rotated_parts(&name)?
                    .ok_or_else(|| Error::Unsupported(format!("no tableau equivalent for `{name}`")))?;
                let mut s = Vec::new();
                for (qq, r) in [(q[0], &rc), (q[1], &rt)] {
                    for g in r.iter().rev() {
                        s.push(Step::Gate(g.inverse(), vec![qq]));
                    }
                }
                s.extend(fusion_steps(n, q[0], q[1], 2, Branch::Success));
                s
            }
        })
    }
}

/// Applies a circuit Kraus operator to the mapped qubits of `d`. Detected
/// qubits that carry no output are left in `|0⟩`.
fn apply_kraus(d: &DenseState, k: &[Vec<C>], qubits: &[usize], outputs: &[usize]) -> Result<DenseState> {
    let n = d.num_qubits();
    let bit = |q: usize| 1usize << (n - 1 - q);
    let kq = qubits.len();
    let mask: usize = qubits.iter().map(|&q| bit(q)).sum();
    let mut out = vec![C::new(0.0, 0.0); 1 << n];
    for (b, &a) in d.amplitudes().iter().enumerate() {
        if a.norm() < 1e-15 {
            continue;
        }
        let col: usize = (0..kq)
            .filter(|&i| b & bit(qubits[i]) != 0)
            .map(|i| 1 << (kq - 1 - i))
            .sum();
        let rest = b & !mask;
        for (r, row) in k.iter().enumerate() {
            let mut idx = rest;
            for (j, &o) in outputs.iter().enumerate() {
                if (r >> (outputs.len() - 1 - j)) & 1 == 1 {
                    idx |= bit(qubits[o]);
                }
            }
            out[idx] += row[col] * a;
        }
    }
    DenseState::from_amplitudes(n, out)
}

impl Case for LoStabilizerCase {
    fn check(&self, _m: Mutation) -> std::result::Result<(), Fail> {
        let e: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&[u, v]| (u.wrapping_sub(1), v.wrapping_sub(1)))
            .collect();
        let g = ClusterGraph::from_edges(self.n, &e).map_err(|e| Fail::new("invalid", e.to_string()))?;
        let q: Vec<usize> = self.qubits.iter().map(|&x| x.wrapping_sub(1)).collect();
        let circ = optics::build_named(&self.builder).map_err(rejected)?;
        if circ.qubits != q.len() {
            return Err(Fail::new("invalid", "qubit map does not match the circuit"));
        }
        let detected: Vec<usize> = circ.detected().iter().map(|&i| q[i]).collect();
        let keep: Vec<usize> = (0..self.n).filter(|v| !detected.contains(v)).collect();
        let mut t = g.to_tableau().with_seed(self.seed);
        crate::graph::run_steps(&mut t, &self.steps(&q).map_err(rejected)?).map_err(rejected)?;
        let gens = restricted_generators(&t, &keep);
        if gens.len() != keep.len() {
            return Err(Fail::new("tableau", "kept qubits are entangled with the measured ones"));
        }
        let d = dense_from_tableau(&g.to_tableau()).map_err(rejected)?;
        let map = extract_kraus(&circ).map_err(rejected)?;
        for k in map.ops.iter().filter(|k| k.success) {
            let m = k
                .logical()
                .ok_or_else(|| Fail::new("optics", format!("{}: success output is not dual-rail", k.label)))?;
            let mut r = apply_kraus(&d, &m, &q, &map.outputs).map_err(rejected)?;
            // zero-weight patterns say nothing about the residual
            if r.normalize() < 1e-6 {
                continue;
            }
            for s in &gens {
                let ev = r.expectation(s);
                if (ev.norm() - 1.0).abs() > 1e-7 {
                    return Err(Fail::new(
                        "residual",
                        format!("{}: ⟨{s}⟩ = {:.3}{:+.3}i on the residual", k.label, ev.re, ev.im),
                    ));
                }
            }
        }
        Ok(())
    }

    fn shrink(&self) -> Vec<Self> {
        let mut out = Vec::new();
        for i in 0..self.edges.len() {
            let mut c = self.clone();
            c.edges.remove(i);
            out.push(c);
        }
        for w in (1..=self.n).rev() {
            if self.qubits.contains(&w) {
                continue;
            }
            let f = |x: usize| if x > w { x - 1 } else { x };
            out.push(LoStabilizerCase {
                n: self.n - 1,
                edges: self
                    .edges
                    .iter()
                    .filter(|e| !e.contains(&w))
                    .map(|&[a, b]| [f(a), f(b)])
                    .collect(),
                qubits: self.qubits.iter().map(|&x| f(x)).collect(),
                ..self.clone()
            });
        }
        out
    }
}

/// Runs the optics↔tableau check for one builder only.
pub fn check_lo_stabilizer(builder: &str, trials: usize, n_max: usize, seed: u64) -> CheckReport {
    run_cases(
        &format!("lo_stabilizer[{builder}]"),
        trials,
        n_max,
        seed,
        Mutation::None,
        |r| LoStabilizerCase::random(r, builder, n_max),
    )
}

// ---------------------------------------------------------------------
// Graph-state recognition

/// Random stabilizer state from `gates` random H, P and CNOT gates on
/// `|0…0⟩`.
pub fn random_stabilizer_state(rng: &mut ChaCha8Rng, n: usize, gates: usize) -> Result<Tableau> {
    let mut t = Tableau::new_computational(n)?;
    for _ in 0..gates {
        match rng.random_range(0..3) {
            0 => t.apply_gate(GateId::H, &[rng.random_range(0..n)])?,
            1 => t.apply_gate(GateId::P, &[rng.random_range(0..n)])?,
            _ if n > 1 => {
                let a = rng.random_range(0..n);
                let b = (a + rng.random_range(1..n)) % n;
                t.apply_gate(GateId::Cnot, &[a, b])?;
            }
            _ => {}
        }
    }
    Ok(t)
}

fn x_rank(t: &Tableau, live: &[usize]) -> usize {
    let gens = restricted_generators(t, live);
    let mut m = BitMatrix::zeros(gens.len(), live.len());
    for (r, g) in gens.iter().enumerate() {
        for (c, &q) in live.iter().enumerate() {
            m.set(r, c, g.x_bit(q));
        }
    }
    m.rank()
}

fn same_state_unsigned(a: &Tableau, b: &Tableau) -> bool {
    canonical_form(a.stabilizers(), false) == canonical_form(b.stabilizers(), false)
}

/// Checks graph read-back on `t`: a direct extraction must reproduce the
/// state, and otherwise every Hadamard option must give a full-rank X block
/// on the unparked qubits and an extraction that reproduces the rotated
/// state. Returns the options.
pub fn check_cluster_recognition(t: &Tableau) -> std::result::Result<Vec<Vec<usize>>, String> {
    let n = t.num_qubits();
    let parked: Vec<usize> = (0..n)
        .filter(|&q| t.stabilizer_sign(&PauliString::single(n, q, Pauli::Z)).is_some())
        .collect();
    let live: Vec<usize> = (0..n).filter(|q| !parked.contains(q)).collect();
    match extract_graph(t) {
        Extracted::Graph(g) => {
            if x_rank(t, &live) != live.len() {
                return Err("graph extracted from a rank-deficient X block".into());
            }
            if !same_state_unsigned(&g.to_tableau(), t) {
                return Err("extracted graph does not reproduce the state".into());
            }
            Ok(vec![])
        }
        Extracted::NotACluster { hadamard_options } => {
            if hadamard_options.is_empty() {
                return Err("no Hadamard option offered".into());
            }
            for opt in &hadamard_options {
                let mut r = t.clone();
                for &q in opt {
                    r.apply_gate(GateId::H, &[q]).map_err(|e| e.to_string())?;
                }
                if x_rank(&r, &live) != live.len() {
                    return Err(format!("option {opt:?} leaves the X block rank-deficient"));
                }
                match extract_graph(&r) {
                    Extracted::Graph(g) if same_state_unsigned(&g.to_tableau(), &r) => {}
                    Extracted::Graph(_) => return Err(format!("option {opt:?}: extracted graph is wrong")),
                    Extracted::NotACluster { .. } => return Err(format!("option {opt:?} does not give a graph")),
                }
            }
            Ok(hadamard_options)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
            assert_eq!(serde_json::to_value(s).unwrap(), serde_json::json!(s.name()));
        }
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn kraus_application_on_bell_pair() {
        // ⟨00|+⟨11| on a Bell pair leaves nothing but the norm
        let t =
            Tableau::from_stabilizers(&[PauliString::parse("XX").unwrap(), PauliString::parse("ZZ").unwrap()]).unwrap();
        let d = dense_from_tableau(&t).unwrap();
        let s = optics::S;
        let k = vec![vec![C::new(s, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(s, 0.0)]];
        let r = apply_kraus(&d, &k, &[0, 1], &[]).unwrap();
        assert!((r.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((r.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_runs_pass() {
        for s in Suite::ALL {
            let r = check_suite(s, 20, 5, 1).unwrap();
            assert!(r.passed(), "{}", r.summary());
        }
    }

    #[test]
    fn dense_limit_enforced() {
        assert!(check_suite(Suite::Gates, 1, 11, 0).is_err());
    }
}
