//! Cluster states as graphs and their rewrite rules.
//!
//! A [`ClusterGraph`] holds `n` node slots. Measured nodes are marked removed
//! rather than renumbered so that node ids keep matching tableau qubits.
//! Internally nodes are 0-based; the JSON and DOT forms use 1-based labels.
//!
//! `phase_tags[v] = k` means the physical state is `P_v^k` applied to the
//! graph state; a self-loop on `v` means the stabilizer of `v` carries `Y_v`
//! in place of `X_v`, which is the same as one extra `P_v`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::kmap::GateId;
use crate::pauli::{Pauli, PauliString};
use crate::tableau::{reduce_in_column_order, Basis, Tableau};

/// One emitted local correction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub op: String,
    pub target: usize,
}

/// A local unitary a rule requires after the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalOp {
    pub gate: GateId,
    pub target: usize,
    /// Tracked in the graph's phase tags instead of being applied.
    #[serde(default)]
    pub absorbed: bool,
}

impl LocalOp {
    pub fn h(target: usize) -> Self {
        LocalOp {
            gate: GateId::H,
            target,
            absorbed: false,
        }
    }

    pub fn pdg_absorbed(target: usize) -> Self {
        LocalOp {
            gate: GateId::Pdg,
            target,
            absorbed: true,
        }
    }
}

impl fmt::Display for LocalOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} on {}", self.gate, self.target + 1)?;
        if self.absorbed {
            f.write_str(" (phase tag)")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Success,
    Failure,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Branch> {
        match s.trim().to_ascii_lowercase().as_str() {
            "success" | "s" | "ok" => Ok(Branch::Success),
            "failure" | "fail" | "f" => Ok(Branch::Failure),
            _ => Err(Error::parse(1, 1, format!("unknown branch `{s}`"))),
        }
    }
}

/// Result of a measurement-type rewrite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub graph: ClusterGraph,
    pub required_unitaries: Vec<LocalOp>,
    pub branch: Branch,
    pub choice_used: Vec<usize>,
    /// Nodes removed by this rule.
    pub measured: Vec<usize>,
    /// The rule's preconditions did not hold and the result was computed via
    /// the tableau.
    pub computed_by_oracle: bool,
}

/// Simple undirected graph with per-node phase bookkeeping.
#[derive(Clone, PartialEq, Eq)]
pub struct ClusterGraph {
    n: usize,
    adj: Vec<BTreeSet<usize>>,
    removed: BTreeSet<usize>,
    self_loops: BTreeSet<usize>,
    phase_tags: BTreeMap<usize, u8>,
    ledger: Vec<LedgerEntry>,
}

impl ClusterGraph {
    /// `n` isolated nodes.
    pub fn new(n: usize) -> Self {
        ClusterGraph {
            n,
            adj: vec![BTreeSet::new(); n],
            removed: BTreeSet::new(),
            self_loops: BTreeSet::new(),
            phase_tags: BTreeMap::new(),
            ledger: Vec::new(),
        }
    }

    /// Graph from 0-based edges. Repeated edges cancel.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = ClusterGraph::new(n);
        for &(u, v) in edges {
            g.check_node(u)?;
            g.check_node(v)?;
            if u == v {
                return Err(Error::pre(format!("self edge on node {}", u + 1)));
            }
            g.toggle_edge(u, v);
        }
        Ok(g)
    }

    /// Path `0 – 1 – … – (n-1)`.
    pub fn line(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        ClusterGraph::from_edges(n, &edges).expect("valid line")
    }

    /// Star with the given center.
    pub fn star(n: usize, center: usize) -> Self {
        let edges: Vec<_> = (0..n).filter(|&i| i != center).map(|i| (center, i)).collect();
        ClusterGraph::from_edges(n, &edges).expect("valid star")
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.n {
            return Err(Error::Index { index: v, len: self.n });
        }
        Ok(())
    }

    fn check_active(&self, v: usize) -> Result<()> {
        self.check_node(v)?;
        if self.removed.contains(&v) {
            return Err(Error::pre(format!("node {} has been measured", v + 1)));
        }
        Ok(())
    }

    pub fn is_active(&self, v: usize) -> bool {
        v < self.n && !self.removed.contains(&v)
    }

    pub fn active_nodes(&self) -> Vec<usize> {
        (0..self.n).filter(|v| !self.removed.contains(v)).collect()
    }

    pub fn removed(&self) -> &BTreeSet<usize> {
        &self.removed
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(&v)
    }

    /// Sorted 0-based edges `(u, v)` with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for &v in self.adj[u].range(u + 1..) {
                out.push((u, v));
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn self_loops(&self) -> &BTreeSet<usize> {
        &self.self_loops
    }

    pub fn phase_tags(&self) -> &BTreeMap<usize, u8> {
        &self.phase_tags
    }

    pub fn phase_tag(&self, v: usize) -> u8 {
        self.phase_tags.get(&v).copied().unwrap_or(0)
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    pub fn push_ledger(&mut self, op: impl Into<String>, target: usize) {
        self.ledger.push(LedgerEntry { op: op.into(), target });
    }

    pub fn clear_ledger(&mut self) {
        self.ledger.clear();
    }

    /// Adds `k` quarter turns (`P^k`) to node `v`.
    pub fn add_phase(&mut self, v: usize, k: u8) {
        let e = self.phase_tags.entry(v).or_insert(0);
        *e = (*e + k) % 4;
        if *e == 0 {
            self.phase_tags.remove(&v);
        }
    }

    /// `true` if `v` carries any phase tag or self-loop.
    pub fn is_tagged(&self, v: usize) -> bool {
        self.phase_tag(v) != 0 || self.self_loops.contains(&v)
    }

    /// XOR-toggles edge `{u, v}`; a would-be self-loop becomes a phase tag.
    pub fn toggle_edge(&mut self, u: usize, v: usize) {
        if u == v {
            self.add_phase(u, 1);
            return;
        }
        if !self.adj[u].remove(&v) {
            self.adj[u].insert(v);
            self.adj[v].insert(u);
        } else {
            self.adj[v].remove(&u);
        }
    }

    /// Drops every edge at `v`; `v` stays active.
    pub fn isolate(&mut self, v: usize) {
        let nb: Vec<usize> = self.adj[v].iter().copied().collect();
        for u in nb {
            self.toggle_edge(u, v);
        }
    }

    /// Removes `v` and its edges.
    pub fn delete_node(&mut self, v: usize) {
        let nb: Vec<usize> = self.adj[v].iter().copied().collect();
        for u in nb {
            self.adj[u].remove(&v);
        }
        self.adj[v].clear();
        self.removed.insert(v);
        self.self_loops.remove(&v);
        self.phase_tags.remove(&v);
    }

    /// Toggles every edge between distinct members of `a` and `b`, iterating
    /// over ordered pairs: a pair with both ends in `a ∩ b` is visited twice
    /// and cancels. Removed nodes are skipped.
    pub fn toggle_between(&mut self, a: &BTreeSet<usize>, b: &BTreeSet<usize>) {
        for &x in a {
            for &y in b {
                if x != y && !self.removed.contains(&x) && !self.removed.contains(&y) {
                    self.toggle_edge(x, y);
                }
            }
        }
    }

    /// Connected components of the active nodes, each sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in self.active_nodes() {
            if seen[s] {
                continue;
            }
            let mut comp = Vec::new();
            let mut q = VecDeque::from([s]);
            seen[s] = true;
            while let Some(v) = q.pop_front() {
                comp.push(v);
                for &w in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        q.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    fn component_of(&self) -> Vec<usize> {
        let mut id = vec![usize::MAX; self.n];
        for (k, c) in self.components().iter().enumerate() {
            for &v in c {
                id[v] = k;
            }
        }
        id
    }

    /// `true` if the given nodes lie in pairwise distinct components.
    pub fn in_distinct_components(&self, nodes: &[usize]) -> bool {
        let id = self.component_of();
        let set: BTreeSet<usize> = nodes.iter().map(|&v| id[v]).collect();
        set.len() == nodes.len()
    }

    /// Stabilizer tableau of the state this graph describes. Removed nodes are
    /// put in `|0⟩`.
    pub fn to_tableau(&self) -> Tableau {
        let n = self.n;
        let mut destab = Vec::with_capacity(n);
        let mut stab = Vec::with_capacity(n);
        for v in 0..n {
            if self.removed.contains(&v) {
                destab.push(PauliString::single(n, v, Pauli::X));
                stab.push(PauliString::single(n, v, Pauli::Z));
                continue;
            }
            let mut s = PauliString::single(
                n,
                v,
                if self.self_loops.contains(&v) {
                    Pauli::Y
                } else {
                    Pauli::X
                },
            );
            for &w in &self.adj[v] {
                s.set(w, Pauli::Z);
            }
            destab.push(PauliString::single(n, v, Pauli::Z));
            stab.push(s);
        }
        let mut t = Tableau::from_rows(destab, stab).expect("graph tableau is valid");
        for (&v, &k) in &self.phase_tags {
            for _ in 0..k {
                t.apply_gate(GateId::P, &[v]).expect("node in range");
            }
        }
        t
    }

    // -----------------------------------------------------------------
    // Elementary rewrites

    /// Complements the neighborhood of `v`.
    pub fn local_complement(&self, v: usize) -> Result<ClusterGraph> {
        self.check_active(v)?;
        let mut g = self.clone();
        g.lc_in_place(v);
        Ok(g)
    }

    pub(crate) fn lc_in_place(&mut self, v: usize) {
        let nb: Vec<usize> = self.adj[v].iter().copied().collect();
        for i in 0..nb.len() {
            for j in i + 1..nb.len() {
                self.toggle_edge(nb[i], nb[j]);
            }
        }
    }

    /// Graph after `CNOT(c, t)`: toggles edges from `c` to every neighbor of
    /// `t`. Defined for non-adjacent `c`, `t`.
    pub fn cnot(&self, c: usize, t: usize) -> Result<ClusterGraph> {
        self.check_active(c)?;
        self.check_active(t)?;
        if c == t {
            return Err(Error::pre("control equals target"));
        }
        if self.has_edge(c, t) {
            return Err(Error::pre("graph rule for CNOT needs non-adjacent control and target"));
        }
        if self.is_tagged(c) || self.is_tagged(t) {
            return Err(Error::pre("graph rule for CNOT needs untagged control and target"));
        }
        let mut g = self.clone();
        let nb: Vec<usize> = self.adj[t].iter().copied().collect();
        for w in nb {
            g.toggle_edge(c, w);
        }
        Ok(g)
    }

    fn outcome(self, unitaries: Vec<LocalOp>, branch: Branch, choice: Vec<usize>, measured: Vec<usize>) -> RuleOutcome {
        RuleOutcome {
            graph: self,
            required_unitaries: unitaries,
            branch,
            choice_used: choice,
            measured,
            computed_by_oracle: false,
        }
    }

    fn untagged(&self, nodes: &[usize]) -> bool {
        nodes.iter().all(|&v| !self.is_tagged(v))
    }

    /// Pivot on edge `v–u` then delete `v`; the X-measurement core.
    fn pivot_delete(&mut self, v: usize, u: usize) {
        self.lc_in_place(v);
        self.lc_in_place(u);
        self.lc_in_place(v);
        self.delete_node(v);
    }

    fn pick(options: &BTreeSet<usize>, choice: Option<usize>, what: &str) -> Result<usize> {
        match choice {
            Some(u) if options.contains(&u) => Ok(u),
            Some(u) => Err(Error::pre(format!("{} is not a valid {what}", u + 1))),
            None => options
                .iter()
                .next()
                .copied()
                .ok_or_else(|| Error::pre(format!("no {what} available"))),
        }
    }

    /// Pauli-Z measurement: delete `v`.
    pub fn measure_z(&self, v: usize) -> Result<RuleOutcome> {
        self.check_active(v)?;
        let mut g = self.clone();
        g.delete_node(v);
        Ok(g.outcome(vec![], Branch::NotApplicable, vec![], vec![v]))
    }

    /// Pauli-X measurement of `v` with Hadamard on the chosen neighbor `u`.
    pub fn measure_x(&self, v: usize, u: Option<usize>) -> Result<RuleOutcome> {
        self.check_active(v)?;
        if self.adj[v].is_empty() {
            let mut g = self.clone();
            g.delete_node(v);
            return Ok(g.outcome(vec![], Branch::NotApplicable, vec![], vec![v]));
        }
        let u = Self::pick(&self.adj[v], u, "neighbor")?;
        if !self.untagged(&[v, u]) {
            return self.oracle_single(v, Basis::X);
        }
        let mut g = self.clone();
        g.pivot_delete(v, u);
        Ok(g.outcome(vec![LocalOp::h(u)], Branch::NotApplicable, vec![u], vec![v]))
    }

    /// Pauli-Y measurement: complement the neighborhood of `v`, delete `v`,
    /// and record `P†` on each former neighbor as a phase tag.
    pub fn measure_y(&self, v: usize) -> Result<RuleOutcome> {
        self.check_active(v)?;
        if self.is_tagged(v) {
            return self.oracle_single(v, Basis::Y);
        }
        let nb: Vec<usize> = self.adj[v].iter().copied().collect();
        let mut g = self.clone();
        g.lc_in_place(v);
        g.delete_node(v);
        for &w in &nb {
            g.add_phase(w, 1);
        }
        let ops = nb.iter().map(|&w| LocalOp::pdg_absorbed(w)).collect();
        Ok(g.outcome(ops, Branch::NotApplicable, vec![], vec![v]))
    }

    /// Pauli-X measurements of adjacent `u` and `v`.
    pub fn two_adjacent_x(&self, u: usize, v: usize) -> Result<RuleOutcome> {
        self.check_active(u)?;
        self.check_active(v)?;
        if !self.has_edge(u, v) {
            return Err(Error::pre(format!("{} and {} are not adjacent", u + 1, v + 1)));
        }
        if !self.untagged(&[u, v]) {
            return self.oracle_steps(
                &[Step::single(self.n, u, Basis::X), Step::single(self.n, v, Basis::X)],
                &[u, v],
                Branch::NotApplicable,
            );
        }
        let mut a = self.adj[u].clone();
        a.remove(&v);
        let mut b = self.adj[v].clone();
        b.remove(&u);
        let mut g = self.clone();
        g.toggle_between(&a, &b);
        g.delete_node(u);
        g.delete_node(v);
        Ok(g.outcome(vec![], Branch::NotApplicable, vec![], vec![u, v]))
    }

    // -----------------------------------------------------------------
    // Fusions

    /// Two-qubit fusion with rotations from the four-row table
    /// (1: `H,H`; 2: `I,I`; 3: `H,I`; 4: `I,PH`).
    ///
    /// `choices` supplies the Hadamard targets where the rule needs them: one
    /// node `u ∈ N_c ∪ N_t` for rows 1–2 on success, `u ∈ N_c` then
    /// `u' ∈ N_t` for row 1 on failure, `u ∈ N_c` for row 3 on failure.
    pub fn fuse(&self, c: usize, t: usize, fusion_type: u8, branch: Branch, choices: &[usize]) -> Result<RuleOutcome> {
        self.check_active(c)?;
        self.check_active(t)?;
        if c == t {
            return Err(Error::pre("control equals target"));
        }
        if !(1..=4).contains(&fusion_type) {
            return Err(Error::pre(format!("fusion type {fusion_type} not in 1..=4")));
        }
        if branch == Branch::NotApplicable {
            return Err(Error::pre("fusion needs a success or failure branch"));
        }
        let steps = fusion_steps(self.n, c, t, fusion_type, branch);
        if !self.in_distinct_components(&[c, t]) || !self.untagged(&self.rule_support(&[c, t])) {
            return self.oracle_steps(&steps, &[c, t], branch);
        }
        let nc = self.adj[c].clone();
        let nt = self.adj[t].clone();
        let mut g = self.clone();
        let mut ops = Vec::new();
        let mut used = Vec::new();
        match (fusion_type, branch) {
            (1 | 2, Branch::Success) => {
                let all: BTreeSet<usize> = nc.union(&nt).copied().collect();
                if all.is_empty() {
                    g.delete_node(c);
                    g.delete_node(t);
                } else {
                    let u = Self::pick(&all, choices.first().copied(), "Hadamard target in N_c ∪ N_t")?;
                    let (v, w) = if nc.contains(&u) { (c, t) } else { (t, c) };
                    g.merge_x(v, w, u);
                    ops.push(LocalOp::h(u));
                    used.push(u);
                }
            }
            (1, Branch::Failure) => {
                let mut k = 0;
                for v in [c, t] {
                    let nb = g.adj[v].clone();
                    if nb.is_empty() {
                        g.delete_node(v);
                        continue;
                    }
                    let u = Self::pick(&nb, choices.get(k).copied(), "Hadamard target")?;
                    k += 1;
                    g.pivot_delete(v, u);
                    ops.push(LocalOp::h(u));
                    used.push(u);
                }
            }
            (2, Branch::Failure) => {
                g.delete_node(c);
                g.delete_node(t);
            }
            (3, Branch::Success) => {
                g.toggle_between(&nc, &nt);
                g.delete_node(c);
                g.delete_node(t);
            }
            (3, Branch::Failure) => {
                g.delete_node(t);
                if nc.is_empty() {
                    g.delete_node(c);
                } else {
                    let u = Self::pick(&nc, choices.first().copied(), "Hadamard target in N_c")?;
                    g.pivot_delete(c, u);
                    ops.push(LocalOp::h(u));
                    used.push(u);
                }
            }
            (4, Branch::Success) => {
                g.lc_in_place(c);
                g.delete_node(c);
                g.delete_node(t);
                g.toggle_between(&nc, &nt);
                for &w in &nc {
                    g.add_phase(w, 1);
                    ops.push(LocalOp::pdg_absorbed(w));
                }
            }
            (4, Branch::Failure) => {
                g.delete_node(c);
                g.lc_in_place(t);
                g.delete_node(t);
                for &w in &nt {
                    g.add_phase(w, 1);
                    ops.push(LocalOp::pdg_absorbed(w));
                }
            }
            _ => unreachable!(),
        }
        Ok(g.outcome(ops, branch, used, vec![c, t]))
    }

    /// Success rule shared by rows 1–2 and the n-fusion: pivot on `v–u`,
    /// connect `u` and its original neighborhood to the neighbors of the
    /// other fused node `w`, delete both.
    fn merge_x(&mut self, v: usize, w: usize, u: usize) {
        self.merge_x_many(v, &[w], u);
    }

    fn merge_x_many(&mut self, v: usize, others: &[usize], u: usize) {
        let mut nu = self.adj[u].clone();
        nu.remove(&v);
        nu.insert(u);
        let mut nw = BTreeSet::new();
        for &w in others {
            nw.extend(self.adj[w].iter().copied());
        }
        self.pivot_delete(v, u);
        for &w in others {
            self.delete_node(w);
        }
        self.toggle_between(&nw, &nu);
    }

    /// Type-I fusion and its rotated variants; `t` is destroyed and `c`
    /// survives on success.
    ///
    /// Variants: 1 `|0⟩⟨00|±|1⟩⟨11|`; 2 `|0⟩⟨01|±|1⟩⟨10|`; 3 (CZ type)
    /// `|0⟩⟨0+|±|1⟩⟨1−|`; 4 `|0⟩⟨++|±|1⟩⟨−−|`.
    pub fn fuse_type1(
        &self,
        c: usize,
        t: usize,
        variant: u8,
        branch: Branch,
        choices: &[usize],
    ) -> Result<RuleOutcome> {
        self.check_active(c)?;
        self.check_active(t)?;
        if c == t {
            return Err(Error::pre("control equals target"));
        }
        if !(1..=4).contains(&variant) {
            return Err(Error::pre(format!("variant {variant} not in 1..=4")));
        }
        if branch == Branch::NotApplicable {
            return Err(Error::pre("fusion needs a success or failure branch"));
        }
        let steps = type1_steps(self.n, c, t, variant, branch);
        let measured = if branch == Branch::Success { vec![t] } else { vec![c, t] };
        if !self.in_distinct_components(&[c, t]) || !self.untagged(&self.rule_support(&[c, t])) {
            return self.oracle_steps(&steps, &measured, branch);
        }
        let nt = self.adj[t].clone();
        let mut g = self.clone();
        let mut ops = Vec::new();
        let mut used = Vec::new();
        match (variant, branch) {
            (1 | 2, Branch::Success) => {
                for &w in &nt {
                    g.toggle_edge(c, w);
                }
                g.delete_node(t);
            }
            (1 | 2, Branch::Failure) => {
                g.delete_node(c);
                g.delete_node(t);
            }
            (3, Branch::Success) => {
                // CZ between c and t, then X measurement of t.
                g.toggle_edge(c, t);
                let opts = g.adj[t].clone();
                let i = Self::pick(&opts, choices.first().copied(), "Hadamard target in N_t ∪ {c}")?;
                g.pivot_delete(t, i);
                ops.push(LocalOp::h(i));
                used.push(i);
            }
            (3, Branch::Failure) => {
                g.delete_node(c);
                if nt.is_empty() {
                    g.delete_node(t);
                } else {
                    let i = Self::pick(&nt, choices.first().copied(), "Hadamard target in N_t")?;
                    g.pivot_delete(t, i);
                    ops.push(LocalOp::h(i));
                    used.push(i);
                }
            }
            (4, Branch::Success) => {
                let (og, oops, oused) = self.type1_xx_success(c, t, choices)?;
                g = og;
                ops = oops;
                used = oused;
            }
            (4, Branch::Failure) => {
                let mut k = 0;
                for v in [c, t] {
                    let nb = g.adj[v].clone();
                    if nb.is_empty() {
                        g.delete_node(v);
                        continue;
                    }
                    let u = Self::pick(&nb, choices.get(k).copied(), "Hadamard target")?;
                    k += 1;
                    g.pivot_delete(v, u);
                    ops.push(LocalOp::h(u));
                    used.push(u);
                }
            }
            _ => unreachable!(),
        }
        Ok(g.outcome(ops, branch, used, measured))
    }

    /// Success branch of the `|0⟩⟨++|±|1⟩⟨−−|` type-I variant. The two
    /// Hadamards go on a pair from `{c} ∪ N_c ∪ N_t`: `(c, u ∈ N_t)`,
    /// `(c, v ∈ N_c)` or `(v ∈ N_c, u ∈ N_t)`.
    fn type1_xx_success(
        &self,
        c: usize,
        t: usize,
        choices: &[usize],
    ) -> Result<(ClusterGraph, Vec<LocalOp>, Vec<usize>)> {
        let nc = self.adj[c].clone();
        let nt = self.adj[t].clone();
        let pair: (usize, usize) = match choices {
            [] => match (nc.first(), nt.first()) {
                (Some(&v), Some(&u)) => (v, u),
                (None, Some(&u)) => (c, u),
                (Some(&v), None) => (c, v),
                (None, None) => (c, c),
            },
            [a, b] => (*a, *b),
            _ => return Err(Error::pre("this fusion needs a pair of Hadamard targets")),
        };
        let mut g = self.clone();
        let closed = |x: usize, skip: usize| -> BTreeSet<usize> {
            let mut s = self.adj[x].clone();
            s.insert(x);
            s.remove(&skip);
            s
        };
        let (ops, used) = match pair {
            (a, b) if a == c && b == c => {
                g.delete_node(t);
                (vec![LocalOp::h(c)], vec![c])
            }
            (a, u) | (u, a) if a == c && nt.contains(&u) => {
                g.pivot_delete(t, u);
                g.toggle_between(&nc, &closed(u, t));
                (vec![LocalOp::h(c), LocalOp::h(u)], vec![c, u])
            }
            (a, v) | (v, a) if a == c && nc.contains(&v) => {
                let nv = closed(v, c);
                g.lc_in_place(v);
                g.lc_in_place(c);
                g.lc_in_place(v);
                g.isolate(c);
                g.delete_node(t);
                let mut from = nv;
                from.insert(c);
                g.toggle_between(&from, &nt);
                (vec![LocalOp::h(c), LocalOp::h(v)], vec![c, v])
            }
            (v, u) | (u, v) if nc.contains(&v) && nt.contains(&u) => {
                let mut to = closed(v, c);
                to.extend(closed(u, t));
                g.lc_in_place(v);
                g.lc_in_place(c);
                g.lc_in_place(v);
                g.pivot_delete(t, u);
                g.isolate(c);
                for w in to {
                    g.toggle_edge(c, w);
                }
                (vec![LocalOp::h(v), LocalOp::h(u)], vec![v, u])
            }
            (a, b) => {
                return Err(Error::pre(format!(
                    "{} and {} are not a valid Hadamard pair for this fusion",
                    a + 1,
                    b + 1
                )))
            }
        };
        Ok((g, ops, used))
    }

    /// GHZ-type projection on `qubits` (`X…X`, `Z_1Z_k`) with the Hadamard
    /// placed on `j ∈ N_i`.
    pub fn n_fusion(&self, qubits: &[usize], i: Option<usize>, j: Option<usize>) -> Result<RuleOutcome> {
        if qubits.len() < 2 {
            return Err(Error::pre("n-fusion needs at least two qubits"));
        }
        for (k, &q) in qubits.iter().enumerate() {
            self.check_active(q)?;
            if qubits[..k].contains(&q) {
                return Err(Error::pre(format!("repeated qubit {}", q + 1)));
            }
        }
        let steps = vec![Step::Measure(ghz_ops(self.n, qubits))];
        if !self.in_distinct_components(qubits) || !self.untagged(&self.rule_support(qubits)) {
            return self.oracle_steps(&steps, qubits, Branch::Success);
        }
        let i = match i {
            Some(i) if qubits.contains(&i) => i,
            Some(i) => return Err(Error::pre(format!("{} is not a fused qubit", i + 1))),
            None => match qubits.iter().copied().filter(|&q| !self.adj[q].is_empty()).min() {
                Some(i) => i,
                None => {
                    let mut g = self.clone();
                    for &q in qubits {
                        g.delete_node(q);
                    }
                    return Ok(g.outcome(vec![], Branch::Success, vec![], qubits.to_vec()));
                }
            },
        };
        let j = Self::pick(&self.adj[i], j, "Hadamard target in N_i")?;
        let others: Vec<usize> = qubits.iter().copied().filter(|&q| q != i).collect();
        let mut g = self.clone();
        g.merge_x_many(i, &others, j);
        Ok(g.outcome(vec![LocalOp::h(j)], Branch::Success, vec![i, j], qubits.to_vec()))
    }

    /// Valid `choices` arguments for [`fuse`](Self::fuse) (`type1 = false`)
    /// or [`fuse_type1`](Self::fuse_type1). Empty when the rule needs no
    /// choice or would fall back to the tableau.
    pub fn fusion_choice_options(&self, c: usize, t: usize, type1: bool, kind: u8, branch: Branch) -> Vec<Vec<usize>> {
        if c >= self.n || t >= self.n || c == t {
            return vec![];
        }
        if !self.in_distinct_components(&[c, t]) || !self.untagged(&self.rule_support(&[c, t])) {
            return vec![];
        }
        let nc: Vec<usize> = self.adj[c].iter().copied().collect();
        let nt: Vec<usize> = self.adj[t].iter().copied().collect();
        let singles = |xs: Vec<usize>| xs.into_iter().map(|u| vec![u]).collect::<Vec<_>>();
        match (type1, kind, branch) {
            (false, 1 | 2, Branch::Success) => {
                let all: BTreeSet<usize> = nc.iter().chain(&nt).copied().collect();
                singles(all.into_iter().collect())
            }
            (false, 1, Branch::Failure) | (true, 4, Branch::Failure) => match (nc.is_empty(), nt.is_empty()) {
                (true, true) => vec![],
                (false, true) => singles(nc),
                (true, false) => singles(nt),
                (false, false) => nc.iter().flat_map(|&u| nt.iter().map(move |&w| vec![u, w])).collect(),
            },
            (false, 3, Branch::Failure) => singles(nc),
            (true, 3, Branch::Success) => {
                let mut opts: BTreeSet<usize> = nt.iter().copied().collect();
                opts.insert(c);
                singles(opts.into_iter().collect())
            }
            (true, 3, Branch::Failure) => singles(nt),
            (true, 4, Branch::Success) => {
                let mut pairs: Vec<Vec<usize>> = nt.iter().map(|&u| vec![c, u]).collect();
                pairs.extend(nc.iter().map(|&v| vec![c, v]));
                for &v in &nc {
                    pairs.extend(nt.iter().map(|&u| vec![v, u]));
                }
                pairs
            }
            _ => vec![],
        }
    }

    /// Valid `(i, j)` Hadamard placements for [`n_fusion`](Self::n_fusion).
    pub fn n_fusion_choice_options(&self, qubits: &[usize]) -> Vec<(usize, usize)> {
        if qubits.iter().any(|&q| q >= self.n) || !self.in_distinct_components(qubits) {
            return vec![];
        }
        if !self.untagged(&self.rule_support(qubits)) {
            return vec![];
        }
        let mut out = Vec::new();
        for &i in qubits {
            out.extend(self.adj[i].iter().map(|&j| (i, j)));
        }
        out
    }

    /// Nodes whose local frame a rule touches: the fused nodes and their
    /// neighbors.
    fn rule_support(&self, nodes: &[usize]) -> Vec<usize> {
        let mut s: BTreeSet<usize> = nodes.iter().copied().collect();
        for &v in nodes {
            s.extend(self.adj[v].iter().copied());
        }
        s.into_iter().collect()
    }

    // -----------------------------------------------------------------
    // Oracle fallback

    fn oracle_single(&self, v: usize, basis: Basis) -> Result<RuleOutcome> {
        self.oracle_steps(&[Step::single(self.n, v, basis)], &[v], Branch::NotApplicable)
    }

    /// Runs `steps` on the tableau and reads the graph back, applying the
    /// first Hadamard option when the result is not a graph state.
    pub fn oracle_steps(&self, steps: &[Step], measured: &[usize], branch: Branch) -> Result<RuleOutcome> {
        let mut t = self.to_tableau();
        run_steps(&mut t, steps)?;
        let keep: Vec<usize> = self
            .active_nodes()
            .into_iter()
            .filter(|v| !measured.contains(v))
            .collect();
        // park measured qubits in |0⟩ so the readback sees a product state
        let reduced = restrict_to(&t, &keep)?;
        let (mut g, ops) = match extract_graph(&reduced) {
            Extracted::Graph(g) => (g, vec![]),
            Extracted::NotACluster { hadamard_options } => {
                let opt = hadamard_options
                    .first()
                    .cloned()
                    .ok_or_else(|| Error::Internal("no Hadamard option restores a graph".into()))?;
                let mut r = reduced.clone();
                for &q in &opt {
                    r.apply_gate(GateId::H, &[q])?;
                }
                match extract_graph(&r) {
                    Extracted::Graph(g) => (g, opt.iter().map(|&q| LocalOp::h(q)).collect()),
                    Extracted::NotACluster { .. } => {
                        return Err(Error::Internal("Hadamard option did not restore a graph".into()))
                    }
                }
            }
        };
        for v in 0..self.n {
            if !keep.contains(&v) {
                g.removed.insert(v);
            }
        }
        g.ledger = self.ledger.clone();
        let mut out = g.outcome(ops, branch, vec![], measured.to_vec());
        out.computed_by_oracle = true;
        Ok(out)
    }
}

/// One step of a tableau pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Gate(GateId, Vec<usize>),
    /// Joint measurement; outcomes are drawn.
    Measure(Vec<PauliString>),
}

impl Step {
    pub fn single(n: usize, q: usize, b: Basis) -> Step {
        Step::Measure(vec![PauliString::single(n, q, b.literal())])
    }
}

pub fn run_steps(t: &mut Tableau, steps: &[Step]) -> Result<()> {
    for s in steps {
        match s {
            Step::Gate(g, q) => t.apply_gate(*g, q)?,
            Step::Measure(ops) => {
                t.joint_measure(ops)?;
            }
        }
    }
    Ok(())
}

fn pauli_on(n: usize, lits: &[(usize, Pauli)]) -> PauliString {
    PauliString::from_sparse(n, lits)
}

/// Measurement physics of the four rotated two-qubit fusions.
pub fn fusion_steps(n: usize, c: usize, t: usize, fusion_type: u8, branch: Branch) -> Vec<Step> {
    use Pauli::*;
    let m = |a: Pauli, b: Pauli| pauli_on(n, &[(c, a), (t, b)]);
    match (fusion_type, branch) {
        (1 | 2, Branch::Success) => vec![Step::Measure(vec![m(X, X), m(Z, Z)])],
        (3, Branch::Success) => vec![Step::Measure(vec![m(Z, X), m(X, Z)])],
        (4, Branch::Success) => vec![Step::Measure(vec![m(X, Z), m(Z, Y)])],
        (1, _) => vec![Step::single(n, c, Basis::X), Step::single(n, t, Basis::X)],
        (2, _) => vec![Step::single(n, c, Basis::Z), Step::single(n, t, Basis::Z)],
        (3, _) => vec![Step::single(n, c, Basis::X), Step::single(n, t, Basis::Z)],
        _ => vec![Step::single(n, c, Basis::Z), Step::single(n, t, Basis::Y)],
    }
}

/// Measurement physics of the type-I variants; on success `c` carries the
/// output.
pub fn type1_steps(n: usize, c: usize, t: usize, variant: u8, branch: Branch) -> Vec<Step> {
    use Pauli::*;
    let m = |a: Pauli, b: Pauli| pauli_on(n, &[(c, a), (t, b)]);
    match (variant, branch) {
        (1 | 2, Branch::Success) => vec![Step::Measure(vec![m(Z, Z)]), Step::single(n, t, Basis::X)],
        (1 | 2, _) => vec![Step::single(n, c, Basis::Z), Step::single(n, t, Basis::Z)],
        (3, Branch::Success) => vec![Step::Gate(GateId::Cz, vec![c, t]), Step::single(n, t, Basis::X)],
        (3, _) => vec![Step::single(n, c, Basis::Z), Step::single(n, t, Basis::X)],
        (4, Branch::Success) => vec![
            Step::Gate(GateId::H, vec![c]),
            Step::Gate(GateId::Cz, vec![c, t]),
            Step::single(n, t, Basis::X),
        ],
        _ => vec![Step::single(n, c, Basis::X), Step::single(n, t, Basis::X)],
    }
}

/// `X…X` and `Z_{q1} Z_{qk}` on the fused qubits.
pub fn ghz_ops(n: usize, qubits: &[usize]) -> Vec<PauliString> {
    let mut ops = vec![pauli_on(n, &qubits.iter().map(|&q| (q, Pauli::X)).collect::<Vec<_>>())];
    for &q in &qubits[1..] {
        ops.push(pauli_on(n, &[(qubits[0], Pauli::Z), (q, Pauli::Z)]));
    }
    ops
}

// ---------------------------------------------------------------------
// Restriction and read-back

/// Signed generators of the subgroup supported on `keep`, from elimination
/// that clears the other qubits' columns first.
pub fn restricted_generators(t: &Tableau, keep: &[usize]) -> Vec<PauliString> {
    let n = t.num_qubits();
    let keep_set: BTreeSet<usize> = keep.iter().copied().collect();
    let gone: Vec<usize> = (0..n).filter(|q| !keep_set.contains(q)).collect();
    let mut cols: Vec<usize> = Vec::with_capacity(2 * n);
    for &q in &gone {
        cols.push(q);
        cols.push(n + q);
    }
    for &q in keep {
        cols.push(q);
    }
    for &q in keep {
        cols.push(n + q);
    }
    let rows = reduce_in_column_order(t.stabilizers(), &cols);
    rows.into_iter()
        .filter(|r| !r.is_identity_bits() && gone.iter().all(|&q| !r.x_bit(q) && !r.z_bit(q)))
        .collect()
}

/// Tableau on the same register where qubits outside `keep` are reset to
/// `|0⟩`. Fails if the kept qubits are entangled with the rest.
pub fn restrict_to(t: &Tableau, keep: &[usize]) -> Result<Tableau> {
    let n = t.num_qubits();
    let mut gens = restricted_generators(t, keep);
    if gens.len() != keep.len() {
        return Err(Error::pre("kept qubits are entangled with the discarded ones"));
    }
    for q in 0..n {
        if !keep.contains(&q) {
            gens.push(PauliString::single(n, q, Pauli::Z));
        }
    }
    Tableau::from_stabilizers(&gens)
}

/// Result of reading a tableau as a graph state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extracted {
    Graph(ClusterGraph),
    NotACluster { hadamard_options: Vec<Vec<usize>> },
}

/// Default cap on enumerated Hadamard options.
pub const HADAMARD_OPTION_CAP: usize = 64;

/// Reads the stabilizer group as a graph state. Qubits whose stabilizer is
/// exactly `±Z_q` and which carry no X support anywhere are reported removed.
pub fn extract_graph(t: &Tableau) -> Extracted {
    extract_graph_capped(t, HADAMARD_OPTION_CAP)
}

pub fn extract_graph_capped(t: &Tableau, cap: usize) -> Extracted {
    let n = t.num_qubits();
    // qubits parked in a Z eigenstate count as removed
    let parked: Vec<usize> = (0..n)
        .filter(|&q| t.stabilizer_sign(&PauliString::single(n, q, Pauli::Z)).is_some())
        .collect();
    let live: Vec<usize> = (0..n).filter(|q| !parked.contains(q)).collect();
    let gens = restricted_generators(t, &live);
    match graph_from_generators(n, &live, &gens) {
        Some(mut g) => {
            for &q in &parked {
                g.removed.insert(q);
            }
            Extracted::Graph(g)
        }
        None => Extracted::NotACluster {
            hadamard_options: hadamard_options(n, &live, &gens, cap),
        },
    }
}

fn x_block(live: &[usize], gens: &[PauliString]) -> BitMatrix {
    let mut m = BitMatrix::zeros(gens.len(), live.len());
    for (r, g) in gens.iter().enumerate() {
        for (c, &q) in live.iter().enumerate() {
            m.set(r, c, g.x_bit(q));
        }
    }
    m
}

fn graph_from_generators(n: usize, live: &[usize], gens: &[PauliString]) -> Option<ClusterGraph> {
    if x_block(live, gens).rank() != live.len() {
        return None;
    }
    let cols: Vec<usize> = live.to_vec();
    let rows = reduce_in_column_order(gens, &cols);
    let mut g = ClusterGraph::new(n);
    for (k, &q) in live.iter().enumerate() {
        let r = &rows[k];
        debug_assert!(r.x_bit(q));
        if r.z_bit(q) {
            g.self_loops.insert(q);
        }
        if r.is_negative() {
            g.push_ledger("Z", q);
        }
        for &w in live {
            if w > q && r.z_bit(w) {
                g.toggle_edge(q, w);
            }
        }
    }
    Some(g)
}

fn hadamard_options(n: usize, live: &[usize], gens: &[PauliString], cap: usize) -> Vec<Vec<usize>> {
    let k = live.len();
    let xb = x_block(live, gens);
    let mut zb = BitMatrix::zeros(gens.len(), k);
    for (r, g) in gens.iter().enumerate() {
        for (c, &q) in live.iter().enumerate() {
            zb.set(r, c, g.z_bit(q));
        }
    }
    let min = k - xb.rank();
    let mut out = Vec::new();
    for size in min..=k {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let mut m = xb.clone();
            for &c in &idx {
                for r in 0..m.rows() {
                    m.set(r, c, zb.get(r, c));
                }
            }
            if m.rank() == k {
                out.push(idx.iter().map(|&c| live[c]).collect());
                if out.len() >= cap {
                    return out;
                }
            }
            if !next_comb(&mut idx, k) {
                break;
            }
        }
    }
    let _ = n;
    out
}

fn next_comb(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Comparison of a rule outcome against the tableau pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutcomeCheck {
    pub matches: bool,
    /// Pauli corrections (`Z` on a node) that align signs; 0-based targets.
    pub fixups: Vec<LedgerEntry>,
    pub expected: Vec<String>,
    pub got: Vec<String>,
}

/// Runs `steps` on `input`, applies the non-absorbed unitaries of `out`, and
/// compares the unsigned stabilizer group on the surviving nodes with the
/// outcome graph.
pub fn check_outcome(input: &ClusterGraph, steps: &[Step], out: &RuleOutcome, seed: u64) -> Result<OutcomeCheck> {
    let mut t = input.to_tableau().with_seed(seed);
    run_steps(&mut t, steps)?;
    for op in &out.required_unitaries {
        if !op.absorbed {
            t.apply_gate(op.gate, &[op.target])?;
        }
    }
    compare_with_graph(&t, &out.graph)
}

/// Compares the restriction of `t` to the active nodes of `g` with `g`.
pub fn compare_with_graph(t: &Tableau, g: &ClusterGraph) -> Result<OutcomeCheck> {
    if t.num_qubits() != g.num_nodes() {
        return Err(Error::Dimension {
            expected: g.num_nodes(),
            got: t.num_qubits(),
        });
    }
    let keep = g.active_nodes();
    let unsigned = |gens: Vec<PauliString>| -> Vec<String> {
        crate::tableau::canonical_form(&gens, false)
            .iter()
            .map(|p| p.to_string())
            .collect()
    };
    let actual = restricted_generators(t, &keep);
    let gt = g.to_tableau();
    let want = restricted_generators(&gt, &keep);
    let expected = unsigned(want);
    let got = if actual.is_empty() { vec![] } else { unsigned(actual) };
    let matches = expected == got;
    let mut fixups = Vec::new();
    if matches {
        for &v in &keep {
            let s = &gt.stabilizers()[v];
            if t.stabilizer_sign(s) == Some(false) {
                fixups.push(LedgerEntry {
                    op: "Z".into(),
                    target: v,
                });
            }
        }
    }
    Ok(OutcomeCheck {
        matches,
        fixups,
        expected,
        got,
    })
}

// ---------------------------------------------------------------------
// Serialization

/// JSON form; node ids are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub self_loops: Vec<usize>,
    #[serde(default)]
    pub phase_tags: BTreeMap<String, u8>,
    #[serde(default)]
    pub ledger: Vec<LedgerEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed: Vec<usize>,
}

impl ClusterGraph {
    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.n,
            edges: self.edges().into_iter().map(|(u, v)| [u + 1, v + 1]).collect(),
            self_loops: self.self_loops.iter().map(|v| v + 1).collect(),
            phase_tags: self.phase_tags.iter().map(|(v, k)| ((v + 1).to_string(), *k)).collect(),
            ledger: self
                .ledger
                .iter()
                .map(|e| LedgerEntry {
                    op: e.op.clone(),
                    target: e.target + 1,
                })
                .collect(),
            removed: self.removed.iter().map(|v| v + 1).collect(),
        }
    }

    pub fn from_json(j: &GraphJson) -> Result<ClusterGraph> {
        let node = |v: usize| -> Result<usize> {
            if v == 0 || v > j.n {
                return Err(Error::Index { index: v, len: j.n });
            }
            Ok(v - 1)
        };
        let mut g = ClusterGraph::new(j.n);
        let mut seen = BTreeSet::new();
        for [u, v] in &j.edges {
            let (a, b) = (node(*u)?, node(*v)?);
            if a == b {
                return Err(Error::pre(format!("self edge on node {u}; use self_loops")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::pre(format!("duplicate edge {u}-{v}")));
            }
            g.toggle_edge(a, b);
        }
        for &v in &j.self_loops {
            g.self_loops.insert(node(v)?);
        }
        for (k, &c) in &j.phase_tags {
            let v: usize = k
                .parse()
                .map_err(|_| Error::parse(1, 1, format!("bad phase tag key `{k}`")))?;
            if c % 4 != 0 {
                g.phase_tags.insert(node(v)?, c % 4);
            }
        }
        for e in &j.ledger {
            g.ledger.push(LedgerEntry {
                op: e.op.clone(),
                target: node(e.target)?,
            });
        }
        for &v in &j.removed {
            let v = node(v)?;
            if !g.adj[v].is_empty() {
                return Err(Error::pre(format!("removed node {} has edges", v + 1)));
            }
            g.removed.insert(v);
        }
        Ok(g)
    }

    /// DOT rendering with nodes in id order.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph cluster {\n");
        for v in self.active_nodes() {
            let mut attrs = Vec::new();
            if self.self_loops.contains(&v) {
                attrs.push("shape=doublecircle".to_string());
            }
            let tag = self.phase_tag(v);
            if tag != 0 {
                attrs.push(format!("xlabel=\"P^{tag}\""));
            }
            if attrs.is_empty() {
                s.push_str(&format!("  {};\n", v + 1));
            } else {
                s.push_str(&format!("  {} [{}];\n", v + 1, attrs.join(", ")));
            }
        }
        for (u, v) in self.edges() {
            s.push_str(&format!("  {} -- {};\n", u + 1, v + 1));
        }
        s.push_str("}\n");
        s
    }
}

impl fmt::Debug for ClusterGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e: Vec<String> = self
            .edges()
            .iter()
            .map(|(u, v)| format!("{}-{}", u + 1, v + 1))
            .collect();
        write!(f, "ClusterGraph(n={}, edges=[{}]", self.n, e.join(","))?;
        if !self.removed.is_empty() {
            write!(
                f,
                ", removed={:?}",
                self.removed.iter().map(|v| v + 1).collect::<Vec<_>>()
            )?;
        }
        if !self.phase_tags.is_empty() {
            write!(
                f,
                ", tags={:?}",
                self.phase_tags.iter().map(|(v, k)| (v + 1, *k)).collect::<Vec<_>>()
            )?;
        }
        f.write_str(")")
    }
}

impl Serialize for ClusterGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ClusterGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = GraphJson::deserialize(d)?;
        ClusterGraph::from_json(&j).map_err(serde::de::Error::custom)
    }
}
