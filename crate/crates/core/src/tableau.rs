//! Stabilizer tableau with destabilizers.
//!
//! Rows `0..n` are destabilizers, rows `n..2n` the stabilizers and row `2n`
//! is scratch space for deterministic measurements. Row signs are stored as a
//! phase exponent restricted to `{0, 2}`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::kmap::{builtin_packed, BooleanUpdateRule, GateId};
use crate::pauli::{Pauli, PauliString};

/// Measurement basis for single-qubit measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub fn literal(self) -> Pauli {
        match self {
            Basis::X => Pauli::X,
            Basis::Y => Pauli::Y,
            Basis::Z => Pauli::Z,
        }
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Basis> {
        match s.trim().to_ascii_uppercase().as_str() {
            "X" => Ok(Basis::X),
            "Y" => Ok(Basis::Y),
            "Z" => Ok(Basis::Z),
            _ => Err(Error::parse(1, 1, format!("unknown basis `{s}`"))),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

/// Result of measuring one Pauli operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub operator: PauliString,
    /// `+1` or `-1`.
    pub outcome: i8,
    pub deterministic: bool,
    /// The outcome was post-selected rather than drawn.
    #[serde(default)]
    pub forced: bool,
}

/// CHP-style tableau.
#[derive(Clone)]
pub struct Tableau {
    n: usize,
    rows: Vec<PauliString>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl PartialEq for Tableau {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.rows[..2 * self.n] == other.rows[..2 * other.n]
    }
}

impl Eq for Tableau {}

impl Tableau {
    /// `|0…0⟩`: stabilizers `Z_i`, destabilizers `X_i`.
    pub fn new_computational(n: usize) -> Result<Self> {
        Self::new_product(n, Pauli::X, Pauli::Z)
    }

    /// `|+…+⟩`: stabilizers `X_i`, destabilizers `Z_i`.
    pub fn new_plus(n: usize) -> Result<Self> {
        Self::new_product(n, Pauli::Z, Pauli::X)
    }

    fn new_product(n: usize, destab: Pauli, stab: Pauli) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut rows = Vec::with_capacity(2 * n + 1);
        rows.extend((0..n).map(|q| PauliString::single(n, q, destab)));
        rows.extend((0..n).map(|q| PauliString::single(n, q, stab)));
        rows.push(PauliString::identity(n));
        Ok(Tableau {
            n,
            rows,
            seed: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    /// Tableau whose stabilizer group is generated by `gens` (signs kept).
    /// Destabilizers are found by symplectic elimination.
    pub fn from_stabilizers(gens: &[PauliString]) -> Result<Self> {
        let n = gens.first().map(|g| g.num_qubits()).ok_or(Error::Empty)?;
        if gens.len() != n {
            return Err(Error::pre(format!("{} generators for {n} qubits", gens.len())));
        }
        for g in gens {
            if g.num_qubits() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: g.num_qubits(),
                });
            }
            if g.phase() % 2 == 1 {
                return Err(Error::pre(format!("generator {g} is not Hermitian")));
            }
        }
        for (i, a) in gens.iter().enumerate() {
            for b in &gens[i + 1..] {
                if !a.commutes_unchecked(b) {
                    return Err(Error::pre(format!("generators {a} and {b} anticommute")));
                }
            }
        }
        if xz_matrix(gens).rank() != n {
            return Err(Error::pre("generators are not independent"));
        }
        // ⟨d, S_j⟩ = δ_ij: rows of `sym` are S_j with x and z swapped
        let mut sym = BitMatrix::zeros(n, 2 * n);
        for (j, g) in gens.iter().enumerate() {
            for q in 0..n {
                sym.set(j, q, g.z_bit(q));
                sym.set(j, n + q, g.x_bit(q));
            }
        }
        let mut destabs: Vec<PauliString> = Vec::with_capacity(n);
        for i in 0..n {
            let e: Vec<bool> = (0..n).map(|j| j == i).collect();
            let v = sym
                .solve(&e)
                .ok_or_else(|| Error::Internal("no destabilizer solution".into()))?;
            let mut d = PauliString::identity(n);
            for q in 0..n {
                d.set_x(q, v[q]);
                d.set_z(q, v[n + q]);
            }
            destabs.push(d);
        }
        for i in 0..n {
            for j in 0..i {
                if !destabs[i].commutes_unchecked(&destabs[j]) {
                    let s = gens[j].clone();
                    destabs[i].mul_assign_right(&s);
                }
            }
            destabs[i].set_phase(0);
        }
        let mut rows = destabs;
        rows.extend(gens.iter().cloned());
        rows.push(PauliString::identity(n));
        let t = Tableau {
            n,
            rows,
            seed: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        t.check_invariants()?;
        Ok(t)
    }

    /// Builds from explicit destabilizer and stabilizer rows.
    pub fn from_rows(destab: Vec<PauliString>, stab: Vec<PauliString>) -> Result<Self> {
        let n = stab.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        if destab.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: destab.len(),
            });
        }
        let mut rows = destab;
        rows.extend(stab);
        for r in &rows {
            if r.num_qubits() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: r.num_qubits(),
                });
            }
        }
        rows.push(PauliString::identity(n));
        let t = Tableau {
            n,
            rows,
            seed: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        t.check_invariants()?;
        Ok(t)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.reseed(seed);
        self
    }

    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn destabilizers(&self) -> &[PauliString] {
        &self.rows[..self.n]
    }

    pub fn stabilizers(&self) -> &[PauliString] {
        &self.rows[self.n..2 * self.n]
    }

    pub fn row(&self, i: usize) -> &PauliString {
        &self.rows[i]
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::Index { index: q, len: self.n });
        }
        Ok(())
    }

    /// Verifies commutation structure, rank and sign restrictions.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n;
        for i in 0..2 * n {
            if self.rows[i].phase() % 2 == 1 {
                return Err(Error::Internal(format!("row {i} has imaginary phase")));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let d = &self.rows[i];
                let s = &self.rows[n + j];
                if d.commutes_unchecked(s) == (i == j) {
                    return Err(Error::Internal(format!(
                        "destabilizer {i} / stabilizer {j} commutation is wrong"
                    )));
                }
                if j > i {
                    if !s.commutes_unchecked(&self.rows[n + i]) {
                        return Err(Error::Internal(format!("stabilizers {i},{j} anticommute")));
                    }
                    if !d.commutes_unchecked(&self.rows[j]) {
                        return Err(Error::Internal(format!("destabilizers {i},{j} anticommute")));
                    }
                }
            }
        }
        if xz_matrix(&self.rows[..2 * n]).rank() != 2 * n {
            return Err(Error::Internal("rows are not independent".into()));
        }
        Ok(())
    }

    #[inline]
    fn debug_check(&self) {
        #[cfg(debug_assertions)]
        if self.n <= 64 {
            if let Err(e) = self.check_invariants() {
                panic!("tableau invariant broken: {e}");
            }
        }
    }

    /// Applies a built-in gate.
    pub fn apply_gate(&mut self, gate: GateId, qubits: &[usize]) -> Result<()> {
        self.check_operands(gate.arity(), qubits)?;
        self.apply_packed(builtin_packed(gate), qubits);
        self.debug_check();
        Ok(())
    }

    /// Applies a gate given by its derived Boolean rule.
    pub fn apply_rule(&mut self, rule: &BooleanUpdateRule, qubits: &[usize]) -> Result<()> {
        self.check_operands(rule.arity, qubits)?;
        let packed = rule.packed();
        self.apply_packed(&packed, qubits);
        self.debug_check();
        Ok(())
    }

    fn check_operands(&self, arity: usize, qubits: &[usize]) -> Result<()> {
        if qubits.len() != arity {
            return Err(Error::Dimension {
                expected: arity,
                got: qubits.len(),
            });
        }
        for (i, &q) in qubits.iter().enumerate() {
            self.check_qubit(q)?;
            if qubits[..i].contains(&q) {
                return Err(Error::pre(format!("repeated qubit {q}")));
            }
        }
        Ok(())
    }

    fn apply_packed(&mut self, table: &[(u8, bool)], qubits: &[usize]) {
        for row in self.rows[..2 * self.n].iter_mut() {
            let mut idx = 0usize;
            for (j, &q) in qubits.iter().enumerate() {
                idx |= (row.x_bit(q) as usize) << (2 * j);
                idx |= (row.z_bit(q) as usize) << (2 * j + 1);
            }
            let (out, flip) = table[idx];
            for (j, &q) in qubits.iter().enumerate() {
                row.set_x(q, (out >> (2 * j)) & 1 == 1);
                row.set_z(q, (out >> (2 * j + 1)) & 1 == 1);
            }
            if flip {
                row.set_phase(row.phase() + 2);
            }
        }
    }

    /// Row `h` ← row `k` · row `h`.
    pub fn rowsum(&mut self, h: usize, k: usize) -> Result<()> {
        let last = 2 * self.n;
        if h > last || k > last {
            return Err(Error::Index {
                index: h.max(k),
                len: last + 1,
            });
        }
        if h == k {
            return Err(Error::pre("rowsum requires distinct rows"));
        }
        let mut prod = self.rows[k].clone();
        prod.mul_assign_right(&self.rows[h]);
        if prod.phase() % 2 == 1 {
            return Err(Error::Internal(format!(
                "rowsum({h},{k}) produced an odd phase; rows anticommute"
            )));
        }
        self.rows[h] = prod;
        Ok(())
    }

    /// Single-qubit measurement in the given basis.
    pub fn measure(&mut self, qubit: usize, basis: Basis) -> Result<MeasurementRecord> {
        self.measure_forced(qubit, basis, None)
    }

    /// Single-qubit measurement; `forced` post-selects the outcome when it is
    /// random and must agree with it when deterministic.
    pub fn measure_forced(&mut self, qubit: usize, basis: Basis, forced: Option<bool>) -> Result<MeasurementRecord> {
        self.check_qubit(qubit)?;
        let m = PauliString::single(self.n, qubit, basis.literal());
        self.measure_pauli(&m, forced)
    }

    /// Measures a Hermitian Pauli operator. `forced = Some(true)` selects the
    /// `+1` outcome.
    pub fn measure_pauli(&mut self, m: &PauliString, forced: Option<bool>) -> Result<MeasurementRecord> {
        let n = self.n;
        if m.num_qubits() != n {
            return Err(Error::Dimension {
                expected: n,
                got: m.num_qubits(),
            });
        }
        if m.phase() % 2 == 1 {
            return Err(Error::pre(format!("{m} is not Hermitian")));
        }
        if m.is_identity_bits() {
            return Err(Error::pre("cannot measure the identity"));
        }
        let pivot = (n..2 * n).find(|&i| !self.rows[i].commutes_unchecked(m));
        let record = match pivot {
            Some(b) => {
                for i in 0..2 * n {
                    if i != b && i != b - n && !self.rows[i].commutes_unchecked(m) {
                        self.rowsum(i, b)?;
                    }
                }
                self.rows[b - n] = self.rows[b].clone();
                let plus = match forced {
                    Some(v) => v,
                    None => self.rng.random::<bool>(),
                };
                let mut row = m.clone();
                if !plus {
                    row.set_phase(row.phase() + 2);
                }
                self.rows[b] = row;
                MeasurementRecord {
                    operator: m.clone(),
                    outcome: if plus { 1 } else { -1 },
                    deterministic: false,
                    forced: forced.is_some(),
                }
            }
            None => {
                let scratch = 2 * n;
                self.rows[scratch] = PauliString::identity(n);
                for i in 0..n {
                    if !self.rows[i].commutes_unchecked(m) {
                        self.rowsum(scratch, i + n)?;
                    }
                }
                let acc = std::mem::replace(&mut self.rows[scratch], PauliString::identity(n));
                if !acc.same_bits(m) {
                    return Err(Error::Internal(format!(
                        "deterministic measurement of {m} reconstructed {acc}"
                    )));
                }
                let plus = acc.phase() == m.phase();
                if let Some(f) = forced {
                    if f != plus {
                        return Err(Error::pre(format!(
                            "outcome of {m} is deterministically {}",
                            if plus { "+1" } else { "-1" }
                        )));
                    }
                }
                MeasurementRecord {
                    operator: m.clone(),
                    outcome: if plus { 1 } else { -1 },
                    deterministic: true,
                    forced: false,
                }
            }
        };
        self.debug_check();
        Ok(record)
    }

    /// Measures a set of mutually commuting, independent Pauli operators.
    pub fn joint_measure(&mut self, ops: &[PauliString]) -> Result<Vec<MeasurementRecord>> {
        self.joint_measure_forced(ops, None)
    }

    pub fn joint_measure_forced(
        &mut self,
        ops: &[PauliString],
        forced: Option<&[bool]>,
    ) -> Result<Vec<MeasurementRecord>> {
        if let Some(f) = forced {
            if f.len() != ops.len() {
                return Err(Error::Dimension {
                    expected: ops.len(),
                    got: f.len(),
                });
            }
        }
        for (i, a) in ops.iter().enumerate() {
            if a.num_qubits() != self.n {
                return Err(Error::Dimension {
                    expected: self.n,
                    got: a.num_qubits(),
                });
            }
            for b in &ops[i + 1..] {
                if !a.commutes_unchecked(b) {
                    return Err(Error::pre(format!("{a} and {b} anticommute")));
                }
            }
        }
        if xz_matrix(ops).rank() != ops.len() {
            return Err(Error::pre("measurement operators are not independent"));
        }
        let mut out = Vec::with_capacity(ops.len());
        for (i, m) in ops.iter().enumerate() {
            out.push(self.measure_pauli(m, forced.map(|f| f[i]))?);
        }
        Ok(out)
    }

    /// Expectation sign of `p` if it belongs to the stabilizer group up to
    /// sign: `Some(true)` for `+p`, `Some(false)` for `-p`, `None` otherwise.
    pub fn stabilizer_sign(&self, p: &PauliString) -> Option<bool> {
        let n = self.n;
        if p.num_qubits() != n || p.phase() % 2 == 1 {
            return None;
        }
        if self.stabilizers().iter().any(|s| !s.commutes_unchecked(p)) {
            return None;
        }
        let mut acc = PauliString::identity(n);
        for i in 0..n {
            if !self.rows[i].commutes_unchecked(p) {
                let mut next = self.rows[n + i].clone();
                next.mul_assign_right(&acc);
                acc = next;
            }
        }
        if !acc.same_bits(p) {
            return None;
        }
        Some(acc.phase() == p.phase())
    }

    /// Reduced row-echelon generators of the stabilizer group, columns ordered
    /// `x_1..x_n, z_1..z_n`. Signs are tracked when `with_signs`, otherwise
    /// every generator has phase 0.
    pub fn canonical_generators(&self, with_signs: bool) -> Vec<PauliString> {
        canonical_form(self.stabilizers(), with_signs)
    }

    /// Applies a Pauli operator (as a gate) to the state.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: p.num_qubits(),
            });
        }
        for row in self.rows[..2 * self.n].iter_mut() {
            if !row.commutes_unchecked(p) {
                row.set_phase(row.phase() + 2);
            }
        }
        Ok(())
    }

    /// Text form: `n=<int>` then destabilizer and stabilizer lines.
    pub fn serialize(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for r in &self.rows[..2 * self.n] {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }

    pub fn deserialize(text: &str) -> Result<Tableau> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| Error::parse(1, 1, "empty input"))?;
        let n: usize = head
            .trim()
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::parse(1, 1, "expected `n=<int>`"))?;
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut rows = Vec::with_capacity(2 * n);
        for (lineno, line) in lines {
            let t = line.trim();
            if !(t.starts_with('+') || t.starts_with('-')) {
                return Err(Error::parse(lineno + 1, 1, "row must start with a sign"));
            }
            let p = PauliString::parse(t).map_err(|e| match e {
                Error::Parse { column, message, .. } => Error::parse(lineno + 1, column, message),
                other => other,
            })?;
            if p.num_qubits() != n {
                return Err(Error::parse(lineno + 1, 1, format!("expected {n} literals")));
            }
            if p.phase() % 2 == 1 {
                return Err(Error::parse(lineno + 1, 1, "imaginary row sign"));
            }
            rows.push(p);
        }
        if rows.len() != 2 * n {
            return Err(Error::parse(
                text.lines().count(),
                1,
                format!("expected {} rows, found {}", 2 * n, rows.len()),
            ));
        }
        let stab = rows.split_off(n);
        Tableau::from_rows(rows, stab)
    }

    pub fn to_json(&self) -> TableauJson {
        TableauJson {
            n: self.n,
            destab: self.destabilizers().iter().map(|p| p.to_string()).collect(),
            stab: self.stabilizers().iter().map(|p| p.to_string()).collect(),
        }
    }

    pub fn from_json(j: &TableauJson) -> Result<Tableau> {
        let parse = |v: &[String]| v.iter().map(|s| PauliString::parse(s)).collect::<Result<Vec<_>>>();
        let t = Tableau::from_rows(parse(&j.destab)?, parse(&j.stab)?)?;
        if t.n != j.n {
            return Err(Error::Dimension {
                expected: j.n,
                got: t.n,
            });
        }
        Ok(t)
    }
}

impl fmt::Debug for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// JSON form of a tableau.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableauJson {
    pub n: usize,
    pub destab: Vec<String>,
    pub stab: Vec<String>,
}

/// `[x | z]` bit matrix of a list of Pauli strings.
pub fn xz_matrix(rows: &[PauliString]) -> BitMatrix {
    let n = rows.first().map(|r| r.num_qubits()).unwrap_or(0);
    let mut m = BitMatrix::zeros(rows.len(), 2 * n);
    for (i, r) in rows.iter().enumerate() {
        for q in 0..n {
            m.set(i, q, r.x_bit(q));
            m.set(i, n + q, r.z_bit(q));
        }
    }
    m
}

fn col_bit(p: &PauliString, n: usize, c: usize) -> bool {
    if c < n {
        p.x_bit(c)
    } else {
        p.z_bit(c - n)
    }
}

/// RREF over GF(2) of commuting generators with column order `x..., z...`.
pub fn canonical_form(gens: &[PauliString], with_signs: bool) -> Vec<PauliString> {
    let cols: Vec<usize> = match gens.first() {
        Some(g) => (0..2 * g.num_qubits()).collect(),
        None => return Vec::new(),
    };
    let mut rows = reduce_in_column_order(gens, &cols);
    rows.retain(|r| !r.is_identity_bits());
    if !with_signs {
        for r in rows.iter_mut() {
            r.set_phase(0);
        }
    }
    rows
}

/// Gauss–Jordan elimination of commuting generators, visiting columns in the
/// given order; products keep exact phases. Returns rows in pivot order
/// followed by any zero rows.
pub fn reduce_in_column_order(gens: &[PauliString], cols: &[usize]) -> Vec<PauliString> {
    let mut rows: Vec<PauliString> = gens.to_vec();
    let n = match rows.first() {
        Some(r) => r.num_qubits(),
        None => return rows,
    };
    let mut r = 0;
    for &c in cols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| col_bit(&rows[i], n, c)) else {
            continue;
        };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r && col_bit(&rows[i], n, c) {
                let mut prod = rows[r].clone();
                prod.mul_assign_right(&rows[i]);
                rows[i] = prod;
            }
        }
        r += 1;
    }
    rows
}
