//! Stateful sessions.
//!
//! A session owns the exact stabilizer tableau and a graph view kept up to
//! date by the graph rewrite rules. Every accepted operation is appended to
//! the history; replaying the history from the seed reproduces the session
//! bit for bit because each operation reseeds the tableau from
//! `(seed, history index)`.
//!
//! All qubit numbers in [`Op`] are 1-based.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stabsim_core::graph::{
    compare_with_graph, extract_graph, fusion_steps, ghz_ops, restrict_to, type1_steps, Extracted, GraphJson, Step,
};
use stabsim_core::verifier::trial_seed;
use stabsim_core::{Basis, Branch, ClusterGraph, GateId, RuleOutcome, Tableau};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Engine(#[from] stabsim_core::Error),
    #[error("a choice is pending: {0}")]
    Pending(String),
    #[error("no choice is pending")]
    NoPending,
    #[error("choice {index} out of range (0..{count})")]
    BadChoice { index: usize, count: usize },
    #[error("no cluster yet; start with new_cluster or import")]
    NoState,
    #[error("the state is not a graph state; resolve it with to_graph")]
    NotAGraph,
    #[error("qubit {qubit} out of range 1..={n}")]
    Qubit { qubit: usize, n: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("history does not replay: {0}")]
    Replay(String),
}

pub type Result<T> = std::result::Result<T, SessionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Dot,
    Tableau,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case")]
pub enum Op {
    NewCluster {
        n: Option<usize>,
        #[serde(default)]
        edges: Vec<[usize; 2]>,
    },
    Import {
        format: ExportFormat,
        data: String,
    },
    Apply {
        gate: GateId,
        qubits: Vec<usize>,
    },
    Measure {
        qubit: usize,
        basis: Basis,
        /// Post-selected outcome, `+1` or `-1`.
        outcome: Option<i8>,
        /// Neighbor receiving the Hadamard after an X measurement.
        choice: Option<usize>,
    },
    Fuse {
        fusion_type: u8,
        control: usize,
        target: usize,
        branch: Branch,
        choices: Option<Vec<usize>>,
    },
    Type1Fuse {
        variant: u8,
        control: usize,
        target: usize,
        branch: Branch,
        choices: Option<Vec<usize>>,
    },
    Nfuse {
        qubits: Vec<usize>,
        i: Option<usize>,
        j: Option<usize>,
    },
    Lc {
        qubit: usize,
    },
    ToGraph {
        hadamards: Option<Vec<usize>>,
    },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::NewCluster { .. } => "new_cluster",
            Op::Import { .. } => "import",
            Op::Apply { .. } => "apply",
            Op::Measure { .. } => "measure",
            Op::Fuse { .. } => "fuse",
            Op::Type1Fuse { .. } => "type1_fuse",
            Op::Nfuse { .. } => "nfuse",
            Op::Lc { .. } => "lc",
            Op::ToGraph { .. } => "to_graph",
        }
    }

    /// The same operation with its choice slot filled by `option`.
    fn with_choice(&self, option: &[usize]) -> Op {
        let mut op = self.clone();
        match &mut op {
            Op::Measure { choice, .. } => *choice = option.first().copied(),
            Op::Fuse { choices, .. } | Op::Type1Fuse { choices, .. } => *choices = Some(option.to_vec()),
            Op::Nfuse { i, j, .. } => {
                *i = option.first().copied();
                *j = option.get(1).copied();
            }
            Op::ToGraph { hadamards } => *hadamards = Some(option.to_vec()),
            _ => {}
        }
        op
    }

    fn resolves_pending(&self) -> bool {
        matches!(self, Op::ToGraph { hadamards: Some(_) })
    }
}

/// One accepted operation and what it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub op: Op,
    /// Measurement outcomes in execution order.
    #[serde(default)]
    pub outcomes: Vec<i8>,
    /// The outcome was post-selected.
    #[serde(default)]
    pub forced: bool,
    /// Hadamards applied by the rule, 1-based.
    #[serde(default)]
    pub hadamards: Vec<usize>,
    #[serde(default)]
    pub computed_by_oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pending {
    pub op: Op,
    /// Each option is the value that fills the op's choice slot (1-based).
    pub options: Vec<Vec<usize>>,
    /// The choice follows an operation already in the history.
    #[serde(default)]
    pub after_recorded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: usize,
    pub seed: u64,
    /// `None` while the state is not a graph state.
    pub graph: Option<GraphJson>,
    /// Canonical signed stabilizer generators of the full register.
    pub generators: Vec<String>,
    pub components: Vec<Vec<usize>>,
    pub pending: Option<Pending>,
    pub history_len: usize,
    /// The graph view and the tableau agree up to signs.
    pub consistent: bool,
    pub state_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NeedsChoice,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpResponse {
    pub status: Status,
    pub snapshot: Snapshot,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// The history entry appended by this request.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<HistoryEntry>,
}

/// How unresolved choices are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Stop and report the options.
    Interactive,
    /// Take the first option and report a warning.
    Auto,
}

#[derive(Debug, Clone)]
struct State {
    tableau: Tableau,
    graph: Option<ClusterGraph>,
    /// Qubits still in play while `graph` is `None`.
    active: Option<Vec<usize>>,
}

enum Exec {
    Done {
        entry: HistoryEntry,
        /// The new state is not a graph state; these Hadamard sets fix it.
        then_choose: Option<Vec<Vec<usize>>>,
    },
    Choice(Vec<Vec<usize>>),
}

/// Persistent form: the seed and the history are enough to rebuild.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionFile {
    pub seed: u64,
    pub history: Vec<HistoryEntry>,
    #[serde(default)]
    pub pending: Option<Pending>,
}

#[derive(Debug, Clone)]
pub struct Session {
    seed: u64,
    state: Option<State>,
    pending: Option<Pending>,
    history: Vec<HistoryEntry>,
    warnings: Vec<String>,
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|x| x + 1).collect()
}

impl Session {
    pub fn new(seed: u64) -> Self {
        Session {
            seed,
            state: None,
            pending: None,
            history: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn pending(&self) -> Option<&Pending> {
        self.pending.as_ref()
    }

    pub fn tableau(&self) -> Option<&Tableau> {
        self.state.as_ref().map(|s| &s.tableau)
    }

    pub fn graph(&self) -> Option<&ClusterGraph> {
        self.state.as_ref().and_then(|s| s.graph.as_ref())
    }

    /// Warnings from choices resolved by default since the last call.
    pub fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }

    /// Rebuilds a session by replaying `history`; recorded outcomes must
    /// come out the same.
    pub fn replay(seed: u64, history: &[HistoryEntry]) -> Result<Session> {
        let mut s = Session::new(seed);
        for (k, h) in history.iter().enumerate() {
            let r = s.submit(h.op.clone(), Mode::Interactive)?;
            let got = r.record.as_ref().map(|e| &e.outcomes);
            if got != Some(&h.outcomes) {
                return Err(SessionError::Replay(format!(
                    "entry {k} ({}) gave {:?}, history says {:?}",
                    h.op.name(),
                    got,
                    h.outcomes
                )));
            }
        }
        Ok(s)
    }

    pub fn to_file(&self) -> SessionFile {
        SessionFile {
            seed: self.seed,
            history: self.history.clone(),
            pending: self.pending.clone(),
        }
    }

    pub fn from_file(f: &SessionFile) -> Result<Session> {
        let mut s = Session::replay(f.seed, &f.history)?;
        if f.pending.is_some() {
            s.pending = f.pending.clone();
        }
        Ok(s)
    }

    /// Runs `op`. While a choice is pending only a `to_graph` with explicit
    /// Hadamards is accepted.
    pub fn submit(&mut self, op: Op, mode: Mode) -> Result<OpResponse> {
        if let Some(p) = &self.pending {
            if !op.resolves_pending() {
                return Err(SessionError::Pending(format!(
                    "{} awaits one of {} options",
                    p.op.name(),
                    p.options.len()
                )));
            }
        }
        let before = self.state.clone();
        let reseed = trial_seed(self.seed, self.history.len());
        if let Some(s) = &mut self.state {
            s.tableau.reseed(reseed);
        }
        let result = self.exec(&op, reseed);
        match result {
            Err(e) => {
                self.state = before;
                Err(e)
            }
            Ok(Exec::Choice(options)) => {
                self.state = before;
                if mode == Mode::Auto {
                    self.warnings.push(format!(
                        "{}: {} options, taking {:?}",
                        op.name(),
                        options.len(),
                        options[0]
                    ));
                    return self.submit(op.with_choice(&options[0]), mode);
                }
                self.pending = Some(Pending {
                    op,
                    options: options.clone(),
                    after_recorded: false,
                });
                Ok(self.respond(Status::NeedsChoice, Some(options), None, None))
            }
            Ok(Exec::Done { entry, then_choose }) => {
                self.pending = None;
                self.history.push(entry.clone());
                if let Some(options) = then_choose {
                    let follow = Op::ToGraph { hadamards: None };
                    if mode == Mode::Auto {
                        self.warnings.push(format!(
                            "state is not a graph state; applying Hadamards on {:?}",
                            options[0]
                        ));
                        let mut r = self.submit(follow.with_choice(&options[0]), mode)?;
                        r.record = Some(entry);
                        return Ok(r);
                    }
                    self.pending = Some(Pending {
                        op: follow,
                        options: options.clone(),
                        after_recorded: true,
                    });
                    return Ok(self.respond(
                        Status::NeedsChoice,
                        Some(options),
                        Some("choose Hadamards that turn the state into a graph state".into()),
                        Some(entry),
                    ));
                }
                Ok(self.respond(Status::Ok, None, None, Some(entry)))
            }
        }
    }

    /// Resolves the pending choice with option `index`.
    pub fn choose(&mut self, index: usize, mode: Mode) -> Result<OpResponse> {
        let p = self.pending.clone().ok_or(SessionError::NoPending)?;
        let opt = p.options.get(index).ok_or(SessionError::BadChoice {
            index,
            count: p.options.len(),
        })?;
        self.pending = None;
        match self.submit(p.op.with_choice(opt), mode) {
            Ok(r) => Ok(r),
            Err(e) => {
                self.pending = Some(p);
                Err(e)
            }
        }
    }

    /// Drops the last accepted operation (or the pending choice) and
    /// rebuilds from the seed.
    pub fn undo(&mut self) -> Result<OpResponse> {
        match self.pending.take() {
            Some(p) if !p.after_recorded => {}
            _ => {
                if self.history.pop().is_none() {
                    return Err(SessionError::Invalid("nothing to undo".into()));
                }
                *self = Session::replay(self.seed, &self.history)?;
            }
        }
        Ok(self.respond(Status::Ok, None, None, None))
    }

    pub fn snapshot(&self) -> Snapshot {
        let (n, generators, graph, components, consistent) = match &self.state {
            None => (0, vec![], None, vec![], true),
            Some(s) => {
                let gens = s
                    .tableau
                    .canonical_generators(true)
                    .iter()
                    .map(|p| p.to_string())
                    .collect();
                let (gj, comps, ok) = match &s.graph {
                    None => (None, vec![], true),
                    Some(g) => (
                        Some(g.to_json()),
                        g.components().iter().map(|c| one_based(c)).collect(),
                        compare_with_graph(&s.tableau, g).map(|c| c.matches).unwrap_or(false),
                    ),
                };
                (s.tableau.num_qubits(), gens, gj, comps, ok)
            }
        };
        let mut h = Sha256::new();
        if let Some(s) = &self.state {
            h.update(s.tableau.serialize());
        }
        h.update(serde_json::to_string(&graph).unwrap_or_default());
        h.update(serde_json::to_string(&self.pending).unwrap_or_default());
        Snapshot {
            n,
            seed: self.seed,
            graph,
            generators,
            components,
            pending: self.pending.clone(),
            history_len: self.history.len(),
            consistent,
            state_hash: hex::encode(h.finalize()),
        }
    }

    pub fn respond(
        &self,
        status: Status,
        choices: Option<Vec<Vec<usize>>>,
        message: Option<String>,
        record: Option<HistoryEntry>,
    ) -> OpResponse {
        OpResponse {
            status,
            snapshot: self.snapshot(),
            choices,
            message,
            record,
        }
    }

    pub fn export(&self, format: ExportFormat) -> Result<String> {
        let s = self.state.as_ref().ok_or(SessionError::NoState)?;
        match format {
            ExportFormat::Tableau => Ok(s.tableau.serialize()),
            ExportFormat::Json => {
                let g = s.graph.as_ref().ok_or(SessionError::NotAGraph)?;
                Ok(serde_json::to_string_pretty(&g.to_json()).expect("graph JSON serializes") + "\n")
            }
            ExportFormat::Dot => Ok(s.graph.as_ref().ok_or(SessionError::NotAGraph)?.to_dot()),
        }
    }

    // -----------------------------------------------------------------

    fn exec(&mut self, op: &Op, seed: u64) -> Result<Exec> {
        let entry = |op: &Op| HistoryEntry {
            op: op.clone(),
            outcomes: vec![],
            forced: false,
            hadamards: vec![],
            computed_by_oracle: false,
        };
        match op {
            Op::NewCluster { n, edges } => {
                let n = n.unwrap_or_else(|| edges.iter().flatten().copied().max().unwrap_or(0));
                if n == 0 {
                    return Err(SessionError::Invalid("a cluster needs at least one qubit".into()));
                }
                let mut e = Vec::with_capacity(edges.len());
                for &[u, v] in edges {
                    e.push((qubit(u, n)?, qubit(v, n)?));
                }
                let g = ClusterGraph::from_edges(n, &e)?;
                self.state = Some(State {
                    tableau: g.to_tableau().with_seed(seed),
                    graph: Some(g),
                    active: None,
                });
                Ok(Exec::Done {
                    entry: entry(op),
                    then_choose: None,
                })
            }
            Op::Import { format, data } => {
                let (tableau, graph) = match format {
                    ExportFormat::Json => {
                        let j: GraphJson = serde_json::from_str(data)
                            .map_err(|e| SessionError::Invalid(format!("graph JSON: {e}")))?;
                        let g = ClusterGraph::from_json(&j)?;
                        (g.to_tableau(), Some(g))
                    }
                    ExportFormat::Dot => {
                        let g = ClusterGraph::from_json(&parse_dot(data)?)?;
                        (g.to_tableau(), Some(g))
                    }
                    ExportFormat::Tableau => (Tableau::deserialize(data)?, None),
                };
                let mut st = State {
                    tableau: tableau.with_seed(seed),
                    graph,
                    active: None,
                };
                let then_choose = if st.graph.is_none() {
                    refresh(&mut st, None)?
                } else {
                    None
                };
                self.state = Some(st);
                Ok(Exec::Done {
                    entry: entry(op),
                    then_choose,
                })
            }
            Op::Apply { gate, qubits } => {
                let st = self.state.as_mut().ok_or(SessionError::NoState)?;
                let n = st.tableau.num_qubits();
                if qubits.len() != gate.arity() {
                    return Err(SessionError::Invalid(format!("{gate} takes {} qubit(s)", gate.arity())));
                }
                let q: Vec<usize> = qubits.iter().map(|&x| qubit(x, n)).collect::<Result<_>>()?;
                if q.len() == 2 && q[0] == q[1] {
                    return Err(SessionError::Invalid("control equals target".into()));
                }
                if let Some(g) = &st.graph {
                    for &v in &q {
                        if !g.is_active(v) {
                            return Err(SessionError::Invalid(format!("qubit {} was measured", v + 1)));
                        }
                    }
                }
                st.tableau.apply_gate(*gate, &q)?;
                let mut then_choose = None;
                let view = st.graph.take();
                let keep = view.as_ref().map(|g| g.active_nodes());
                match (view, gate) {
                    (Some(g), GateId::X | GateId::Y | GateId::Z) => st.graph = Some(g),
                    (Some(mut g), GateId::Cz) => {
                        g.toggle_edge(q[0], q[1]);
                        st.graph = Some(g);
                    }
                    (Some(mut g), GateId::P | GateId::Pdg) => {
                        g.add_phase(q[0], if *gate == GateId::P { 1 } else { 3 });
                        st.graph = Some(g);
                    }
                    (Some(g), GateId::Cnot) => match g.cnot(q[0], q[1]) {
                        Ok(g2) => st.graph = Some(g2),
                        Err(_) => then_choose = refresh(st, keep)?,
                    },
                    _ => then_choose = refresh(st, keep)?,
                }
                Ok(Exec::Done {
                    entry: entry(op),
                    then_choose,
                })
            }
            Op::Measure {
                qubit: v,
                basis,
                outcome,
                choice,
            } => {
                let st = self.state.as_mut().ok_or(SessionError::NoState)?;
                let g = st.graph.as_ref().ok_or(SessionError::NotAGraph)?;
                let v = active(g, *v)?;
                let forced = match outcome {
                    None => None,
                    Some(1) => Some(true),
                    Some(-1) => Some(false),
                    Some(o) => return Err(SessionError::Invalid(format!("outcome {o} is not ±1"))),
                };
                let rule = match basis {
                    Basis::Z => g.measure_z(v)?,
                    Basis::Y => g.measure_y(v)?,
                    Basis::X => {
                        let nb: Vec<usize> = g.neighbors(v).iter().copied().collect();
                        match choice {
                            None if nb.len() > 1 => return Ok(Exec::Choice(nb.iter().map(|&u| vec![u + 1]).collect())),
                            None => g.measure_x(v, None)?,
                            Some(u) => g.measure_x(v, Some(active(g, *u)?))?,
                        }
                    }
                };
                let rec = st.tableau.measure_forced(v, *basis, forced)?;
                let mut e = entry(op);
                e.outcomes.push(rec.outcome);
                e.forced = rec.forced;
                finish(st, rule, e)
            }
            Op::Fuse {
                fusion_type,
                control,
                target,
                branch,
                choices,
            }
            | Op::Type1Fuse {
                variant: fusion_type,
                control,
                target,
                branch,
                choices,
            } => {
                let type1 = matches!(op, Op::Type1Fuse { .. });
                let st = self.state.as_mut().ok_or(SessionError::NoState)?;
                let g = st.graph.as_ref().ok_or(SessionError::NotAGraph)?;
                let (c, t) = (active(g, *control)?, active(g, *target)?);
                let options = g.fusion_choice_options(c, t, type1, *fusion_type, *branch);
                let ch: Vec<usize> = match choices {
                    None if options.len() > 1 => {
                        return Ok(Exec::Choice(options.iter().map(|o| one_based(o)).collect()))
                    }
                    None => options.first().cloned().unwrap_or_default(),
                    Some(ch) => ch.iter().map(|&x| active(g, x)).collect::<Result<_>>()?,
                };
                let n = g.num_nodes();
                let (rule, steps) = if type1 {
                    (
                        g.fuse_type1(c, t, *fusion_type, *branch, &ch)?,
                        type1_steps(n, c, t, *fusion_type, *branch),
                    )
                } else {
                    (
                        g.fuse(c, t, *fusion_type, *branch, &ch)?,
                        fusion_steps(n, c, t, *fusion_type, *branch),
                    )
                };
                let e = run_recorded(&mut st.tableau, &steps, entry(op))?;
                finish(st, rule, e)
            }
            Op::Nfuse { qubits, i, j } => {
                let st = self.state.as_mut().ok_or(SessionError::NoState)?;
                let g = st.graph.as_ref().ok_or(SessionError::NotAGraph)?;
                let q: Vec<usize> = qubits.iter().map(|&x| active(g, x)).collect::<Result<_>>()?;
                let options = g.n_fusion_choice_options(&q);
                let (i, j) = match (i, j) {
                    (None, None) if options.len() > 1 => {
                        return Ok(Exec::Choice(options.iter().map(|&(a, b)| vec![a + 1, b + 1]).collect()))
                    }
                    _ => (
                        i.map(|x| active(g, x)).transpose()?,
                        j.map(|x| active(g, x)).transpose()?,
                    ),
                };
                let rule = g.n_fusion(&q, i, j)?;
                let steps = vec![Step::Measure(ghz_ops(g.num_nodes(), &q))];
                let e = run_recorded(&mut st.tableau, &steps, entry(op))?;
                finish(st, rule, e)
            }
            Op::Lc { qubit: v } => {
                let st = self.state.as_mut().ok_or(SessionError::NoState)?;
                let g = st.graph.as_ref().ok_or(SessionError::NotAGraph)?;
                let v = active(g, *v)?;
                let nb: Vec<usize> = g.neighbors(v).iter().copied().collect();
                // √(−iX_v) ∏ √(iZ_u) up to global phase
                for gate in [GateId::H, GateId::P, GateId::H] {
                    st.tableau.apply_gate(gate, &[v])?;
                }
                for &u in &nb {
                    st.tableau.apply_gate(GateId::Pdg, &[u])?;
                }
                let tagged = std::iter::once(v).chain(nb.iter().copied()).any(|x| g.is_tagged(x));
                let mut then_choose = None;
                if tagged {
                    let keep = Some(g.active_nodes());
                    then_choose = refresh(st, keep)?;
                } else {
                    st.graph = Some(g.local_complement(v)?);
                }
                Ok(Exec::Done {
                    entry: entry(op),
                    then_choose,
                })
            }
            Op::ToGraph { hadamards } => {
                let st = self.state.as_mut().ok_or(SessionError::NoState)?;
                let n = st.tableau.num_qubits();
                let keep = st
                    .graph
                    .as_ref()
                    .map(|g| g.active_nodes())
                    .or_else(|| st.active.clone());
                let mut e = entry(op);
                if let Some(h) = hadamards {
                    for &x in h {
                        let q = qubit(x, n)?;
                        if keep.as_ref().is_some_and(|k| !k.contains(&q)) {
                            return Err(SessionError::Invalid(format!("qubit {x} was measured")));
                        }
                        st.tableau.apply_gate(GateId::H, &[q])?;
                        e.hadamards.push(x);
                    }
                }
                st.graph = None;
                match refresh(st, keep)? {
                    None => Ok(Exec::Done {
                        entry: e,
                        then_choose: None,
                    }),
                    Some(options) if hadamards.is_none() => Ok(Exec::Choice(options)),
                    Some(_) => Err(SessionError::Invalid(
                        "those Hadamards do not turn the state into a graph state".into(),
                    )),
                }
            }
        }
    }
}

fn qubit(x: usize, n: usize) -> Result<usize> {
    if x == 0 || x > n {
        return Err(SessionError::Qubit { qubit: x, n });
    }
    Ok(x - 1)
}

fn active(g: &ClusterGraph, x: usize) -> Result<usize> {
    let v = qubit(x, g.num_nodes())?;
    if !g.is_active(v) {
        return Err(SessionError::Invalid(format!("qubit {x} was measured")));
    }
    Ok(v)
}

fn run_recorded(t: &mut Tableau, steps: &[Step], mut e: HistoryEntry) -> Result<HistoryEntry> {
    for s in steps {
        match s {
            Step::Gate(g, q) => t.apply_gate(*g, q)?,
            Step::Measure(ops) => {
                for r in t.joint_measure(ops)? {
                    e.outcomes.push(r.outcome);
                }
            }
        }
    }
    Ok(e)
}

/// Applies the rule's local unitaries to the tableau and installs its graph.
fn finish(st: &mut State, rule: RuleOutcome, mut e: HistoryEntry) -> Result<Exec> {
    for u in &rule.required_unitaries {
        if !u.absorbed {
            st.tableau.apply_gate(u.gate, &[u.target])?;
            if u.gate == GateId::H {
                e.hadamards.push(u.target + 1);
            }
        }
    }
    e.computed_by_oracle = rule.computed_by_oracle;
    st.graph = Some(rule.graph);
    st.active = None;
    Ok(Exec::Done {
        entry: e,
        then_choose: None,
    })
}

/// Re-reads the graph view from the tableau on `keep` (all qubits if
/// `None`). Returns the Hadamard options when the state is not a graph
/// state.
fn refresh(st: &mut State, keep: Option<Vec<usize>>) -> Result<Option<Vec<Vec<usize>>>> {
    let n = st.tableau.num_qubits();
    let keep = keep.unwrap_or_else(|| (0..n).collect());
    let reduced = restrict_to(&st.tableau, &keep)?;
    match extract_graph(&reduced) {
        Extracted::Graph(mut g) => {
            let removed: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
            for v in removed {
                g.delete_node(v);
            }
            st.graph = Some(g);
            st.active = None;
            Ok(None)
        }
        Extracted::NotACluster { hadamard_options } => {
            st.graph = None;
            st.active = Some(keep);
            if hadamard_options.is_empty() {
                return Err(SessionError::Invalid(
                    "no Hadamard set turns this state into a graph state".into(),
                ));
            }
            Ok(Some(hadamard_options.iter().map(|o| one_based(o)).collect()))
        }
    }
}

/// Reads the DOT form written by `export --format dot`.
pub fn parse_dot(text: &str) -> Result<GraphJson> {
    let bad = |line: usize, msg: &str| SessionError::Invalid(format!("DOT line {line}: {msg}"));
    let mut nodes: BTreeMap<usize, (bool, u8)> = BTreeMap::new();
    let mut edges = Vec::new();
    let mut opened = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !opened {
            if !(line.starts_with("graph") && line.ends_with('{')) {
                return Err(bad(i + 1, "expected `graph <name> {`"));
            }
            opened = true;
            continue;
        }
        if line == "}" {
            break;
        }
        let stmt = line.strip_suffix(';').ok_or_else(|| bad(i + 1, "missing `;`"))?.trim();
        let id = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| bad(i + 1, "node ids are positive integers"))
        };
        if let Some((a, b)) = stmt.split_once("--") {
            let (a, b) = (id(a)?, id(b)?);
            nodes.entry(a).or_default();
            nodes.entry(b).or_default();
            edges.push([a, b]);
            continue;
        }
        let (name, attrs) = match stmt.split_once('[') {
            Some((n, rest)) => (n, rest.strip_suffix(']').ok_or_else(|| bad(i + 1, "unclosed `[`"))?),
            None => (stmt, ""),
        };
        let v = id(name)?;
        let slot = nodes.entry(v).or_default();
        for attr in attrs.split(',').map(str::trim).filter(|a| !a.is_empty()) {
            match attr
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim().trim_matches('"')))
            {
                Some(("shape", "doublecircle")) => slot.0 = true,
                Some(("xlabel", tag)) => {
                    slot.1 = tag
                        .strip_prefix("P^")
                        .and_then(|k| k.parse().ok())
                        .ok_or_else(|| bad(i + 1, "phase label must be P^k"))?
                }
                _ => return Err(bad(i + 1, &format!("unknown attribute `{attr}`"))),
            }
        }
    }
    if !opened {
        return Err(bad(1, "empty input"));
    }
    let n = nodes.keys().copied().max().unwrap_or(0);
    if nodes.contains_key(&0) {
        return Err(bad(1, "node ids start at 1"));
    }
    Ok(GraphJson {
        n,
        edges,
        self_loops: nodes.iter().filter(|(_, s)| s.0).map(|(v, _)| *v).collect(),
        phase_tags: nodes
            .iter()
            .filter(|(_, s)| s.1 != 0)
            .map(|(v, s)| (v.to_string(), s.1))
            .collect(),
        ledger: vec![],
        removed: (1..=n).filter(|v| !nodes.contains_key(v)).collect(),
    })
}
