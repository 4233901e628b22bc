//! Boolean update rules for Clifford gates, derived from Pauli conjugation
//! tables.
//!
//! A gate on `k` qubits is described by how it conjugates each of the `4^k`
//! Hermitian Pauli literal tuples. From that table we read off truth tables for
//! the `2k` output bits and for the sign increment, then minimize each with
//! Quine–McCluskey for display. The tableau executes the truth tables.
//!
//! Input bits are ordered `x1, z1, x2, z2, …`; bit `2j` of a table index is
//! `x` of qubit `j` and bit `2j+1` is its `z`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

/// Largest arity accepted by the rule machinery.
pub const MAX_ARITY: usize = 3;

/// Built-in gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateId {
    H,
    P,
    Pdg,
    X,
    Y,
    Z,
    #[serde(rename = "CNOT")]
    Cnot,
    #[serde(rename = "CZ")]
    Cz,
}

impl GateId {
    pub const ALL: [GateId; 8] = [
        GateId::H,
        GateId::P,
        GateId::Pdg,
        GateId::X,
        GateId::Y,
        GateId::Z,
        GateId::Cnot,
        GateId::Cz,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateId::Cnot | GateId::Cz => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateId::H => "H",
            GateId::P => "P",
            GateId::Pdg => "Pdg",
            GateId::X => "X",
            GateId::Y => "Y",
            GateId::Z => "Z",
            GateId::Cnot => "CNOT",
            GateId::Cz => "CZ",
        }
    }

    /// The inverse gate.
    pub fn inverse(self) -> GateId {
        match self {
            GateId::P => GateId::Pdg,
            GateId::Pdg => GateId::P,
            g => g,
        }
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateId {
    type Err = Error;
    fn from_str(s: &str) -> Result<GateId> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "H" => GateId::H,
            "P" | "S" => GateId::P,
            "PDG" | "P†" | "PDAG" | "SDG" | "S†" => GateId::Pdg,
            "X" => GateId::X,
            "Y" => GateId::Y,
            "Z" => GateId::Z,
            "CNOT" | "CX" => GateId::Cnot,
            "CZ" => GateId::Cz,
            _ => return Err(Error::UnknownGate(s.to_string())),
        })
    }
}

/// Literal tuple for a table index.
pub fn literals_for_index(k: usize, idx: usize) -> Vec<Pauli> {
    (0..k)
        .map(|j| Pauli::from_bits((idx >> (2 * j)) & 1 == 1, (idx >> (2 * j + 1)) & 1 == 1))
        .collect()
}

/// Table index for a literal tuple.
pub fn index_for_literals(lits: &[Pauli]) -> usize {
    lits.iter().enumerate().fold(0, |acc, (j, p)| {
        let (x, z) = p.bits();
        acc | ((x as usize) << (2 * j)) | ((z as usize) << (2 * j + 1))
    })
}

fn lit_string(lits: &[Pauli]) -> String {
    lits.iter().map(|p| p.to_char()).collect()
}

/// Signed Pauli image of every literal tuple under conjugation `U σ U†`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjugationTable {
    arity: usize,
    /// Indexed by input tuple; `(output literals, negative sign)`.
    images: Vec<(Vec<Pauli>, bool)>,
}

impl ConjugationTable {
    /// Builds and validates a table from its full image list.
    pub fn new(arity: usize, images: Vec<(Vec<Pauli>, bool)>) -> Result<Self> {
        if arity == 0 || arity > MAX_ARITY {
            return Err(Error::InvalidTable(format!("arity {arity} not in 1..={MAX_ARITY}")));
        }
        if images.len() != 1 << (2 * arity) {
            return Err(Error::InvalidTable(format!(
                "expected {} entries, got {}",
                1 << (2 * arity),
                images.len()
            )));
        }
        if images.iter().any(|(l, _)| l.len() != arity) {
            return Err(Error::InvalidTable("image of wrong width".into()));
        }
        let t = ConjugationTable { arity, images };
        t.validate()?;
        Ok(t)
    }

    /// Builds a table from the images of `X_j` and `Z_j` for each qubit; the
    /// rest follows multiplicatively.
    pub fn from_generators(arity: usize, x_images: &[PauliString], z_images: &[PauliString]) -> Result<Self> {
        if x_images.len() != arity || z_images.len() != arity {
            return Err(Error::InvalidTable("one X and one Z image per qubit required".into()));
        }
        let mut images = Vec::with_capacity(1 << (2 * arity));
        for idx in 0..1usize << (2 * arity) {
            let lits = literals_for_index(arity, idx);
            let mut acc = PauliString::identity(arity);
            for (j, p) in lits.iter().enumerate() {
                match p {
                    Pauli::I => {}
                    Pauli::X => acc = acc.multiply(&x_images[j])?,
                    Pauli::Z => acc = acc.multiply(&z_images[j])?,
                    Pauli::Y => {
                        // Y = i X Z
                        let mut y = x_images[j].multiply(&z_images[j])?;
                        y.set_phase(y.phase() + 1);
                        acc = acc.multiply(&y)?;
                    }
                }
            }
            if acc.phase() % 2 == 1 {
                return Err(Error::InvalidTable(format!(
                    "image of {} is anti-Hermitian",
                    lit_string(&lits)
                )));
            }
            images.push((acc.literals(), acc.phase() == 2));
        }
        ConjugationTable::new(arity, images)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn image(&self, input: &[Pauli]) -> (&[Pauli], bool) {
        let (l, s) = &self.images[index_for_literals(input)];
        (l, *s)
    }

    pub fn image_at(&self, idx: usize) -> (&[Pauli], bool) {
        let (l, s) = &self.images[idx];
        (l, *s)
    }

    fn signed(&self, idx: usize) -> PauliString {
        let (l, s) = &self.images[idx];
        PauliString::from_literals(l, if *s { 2 } else { 0 })
    }

    /// Checks identity preservation, bijectivity and the homomorphism property
    /// including phases.
    pub fn validate(&self) -> Result<()> {
        let k = self.arity;
        let size = 1usize << (2 * k);
        let (id, neg) = &self.images[0];
        if id.iter().any(|&p| p != Pauli::I) || *neg {
            return Err(Error::InvalidTable("identity must map to +identity".into()));
        }
        let outs: BTreeSet<usize> = self.images.iter().map(|(l, _)| index_for_literals(l)).collect();
        if outs.len() != size {
            return Err(Error::InvalidTable("map is not a bijection on Pauli literals".into()));
        }
        for a in 0..size {
            let pa = PauliString::from_literals(&literals_for_index(k, a), 0);
            let ia = self.signed(a);
            for b in 0..size {
                let pb = PauliString::from_literals(&literals_for_index(k, b), 0);
                let prod = pa.multiply(&pb)?;
                let c = index_for_literals(&prod.literals());
                let mut want = self.signed(c);
                want.set_phase(want.phase() + prod.phase());
                let got = ia.multiply(&self.signed(b))?;
                if got != want {
                    return Err(Error::InvalidTable(format!(
                        "image of {}·{} is not the product of images",
                        lit_string(&literals_for_index(k, a)),
                        lit_string(&literals_for_index(k, b))
                    )));
                }
            }
        }
        Ok(())
    }

    /// Table of `second ∘ self`, i.e. the gate `U_second · U_self`.
    pub fn then(&self, second: &ConjugationTable) -> Result<ConjugationTable> {
        if self.arity != second.arity {
            return Err(Error::Dimension {
                expected: self.arity,
                got: second.arity,
            });
        }
        let images = self
            .images
            .iter()
            .map(|(l, s)| {
                let (l2, s2) = second.image(l);
                (l2.to_vec(), s ^ s2)
            })
            .collect();
        ConjugationTable::new(self.arity, images)
    }
}

/// Truth tables for every output bit and the sign increment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanUpdateRule {
    pub arity: usize,
    /// `outputs[b][idx]` for output bit `b` in `x1', z1', x2', …` order.
    pub outputs: Vec<Vec<bool>>,
    /// Sign increment per input.
    pub r_increment: Vec<bool>,
}

/// A minimized expression in two forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expression {
    pub sop: String,
    pub anf: String,
}

impl Expression {
    /// Whichever form has fewer literal occurrences; SOP on ties.
    pub fn display(&self) -> &str {
        let count = |s: &str| s.chars().filter(|c| c.is_ascii_alphabetic()).count();
        if count(&self.anf) < count(&self.sop) {
            &self.anf
        } else {
            &self.sop
        }
    }
}

/// Serializable rule export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleExport {
    pub gate: String,
    pub arity: usize,
    pub expressions: BTreeMap<String, String>,
    pub sop: BTreeMap<String, String>,
    pub anf: BTreeMap<String, String>,
}

pub fn input_names(k: usize) -> Vec<String> {
    if k == 1 {
        return vec!["x".into(), "z".into()];
    }
    (1..=k).flat_map(|j| [format!("x{j}"), format!("z{j}")]).collect()
}

pub fn output_names(k: usize) -> Vec<String> {
    let mut v: Vec<String> = input_names(k).into_iter().map(|s| format!("{s}'")).collect();
    v.push("r".into());
    v
}

impl BooleanUpdateRule {
    /// Applies the rule to a literal tuple.
    pub fn eval(&self, input: &[Pauli]) -> (Vec<Pauli>, bool) {
        self.eval_index(index_for_literals(input))
    }

    pub fn eval_index(&self, idx: usize) -> (Vec<Pauli>, bool) {
        let lits = (0..self.arity)
            .map(|j| Pauli::from_bits(self.outputs[2 * j][idx], self.outputs[2 * j + 1][idx]))
            .collect();
        (lits, self.r_increment[idx])
    }

    /// Packed lookup: output bits in index layout plus the sign increment.
    pub(crate) fn packed(&self) -> Vec<(u8, bool)> {
        (0..self.r_increment.len())
            .map(|idx| {
                let mut out = 0u8;
                for (b, tt) in self.outputs.iter().enumerate() {
                    if tt[idx] {
                        out |= 1 << b;
                    }
                }
                (out, self.r_increment[idx])
            })
            .collect()
    }

    /// The conjugation table this rule encodes.
    pub fn to_table(&self) -> Result<ConjugationTable> {
        let images = (0..self.r_increment.len()).map(|i| self.eval_index(i)).collect();
        ConjugationTable::new(self.arity, images)
    }

    /// Minimized expressions keyed by output name (`x'`, `z'`, … , `r`).
    pub fn expressions(&self) -> Vec<(String, Expression)> {
        let names = input_names(self.arity);
        let nvars = 2 * self.arity;
        output_names(self.arity)
            .into_iter()
            .zip(self.outputs.iter().chain(std::iter::once(&self.r_increment)))
            .map(|(name, tt)| {
                let e = Expression {
                    sop: render_sop(&minimize(nvars, tt), &names),
                    anf: render_anf(&anf(nvars, tt), &names),
                };
                (name, e)
            })
            .collect()
    }

    pub fn export(&self, gate: &str) -> RuleExport {
        let mut expressions = BTreeMap::new();
        let mut sop = BTreeMap::new();
        let mut anf = BTreeMap::new();
        for (name, e) in self.expressions() {
            expressions.insert(name.clone(), e.display().to_string());
            sop.insert(name.clone(), e.sop);
            anf.insert(name, e.anf);
        }
        RuleExport {
            gate: gate.to_string(),
            arity: self.arity,
            expressions,
            sop,
            anf,
        }
    }

    /// Text report, one line per output bit.
    pub fn report(&self, gate: &str) -> String {
        let mut s = format!("gate {gate} (arity {})\n", self.arity);
        for (name, e) in self.expressions() {
            s.push_str(&format!("  {name:<4} = {}\n", e.display()));
            if e.display() != e.sop {
                s.push_str(&format!("         sop: {}\n", e.sop));
            }
        }
        s
    }
}

/// Reads truth tables off a conjugation table.
pub fn derive_rule(table: &ConjugationTable) -> Result<BooleanUpdateRule> {
    table.validate()?;
    let k = table.arity();
    let size = 1usize << (2 * k);
    let mut outputs = vec![vec![false; size]; 2 * k];
    let mut r_increment = vec![false; size];
    for idx in 0..size {
        let (lits, neg) = table.image_at(idx);
        for (j, p) in lits.iter().enumerate() {
            let (x, z) = p.bits();
            outputs[2 * j][idx] = x;
            outputs[2 * j + 1][idx] = z;
        }
        r_increment[idx] = neg;
    }
    Ok(BooleanUpdateRule {
        arity: k,
        outputs,
        r_increment,
    })
}

/// First input on which `rule` and `table` disagree, as a literal string.
pub fn verify_rule(rule: &BooleanUpdateRule, table: &ConjugationTable) -> std::result::Result<(), String> {
    if rule.arity != table.arity() {
        return Err(format!("arity {} vs {}", rule.arity, table.arity()));
    }
    for idx in 0..1usize << (2 * rule.arity) {
        let (lits, neg) = rule.eval_index(idx);
        let (tl, tn) = table.image_at(idx);
        if lits != tl || neg != tn {
            return Err(lit_string(&literals_for_index(rule.arity, idx)));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Quine–McCluskey

/// A product term: `mask` marks variables that appear, `value` their polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Implicant {
    pub mask: u32,
    pub value: u32,
}

impl Implicant {
    fn covers(&self, m: u32) -> bool {
        m & self.mask == self.value
    }

    fn literals(&self) -> u32 {
        self.mask.count_ones()
    }

    /// Sort key: fewer literals first, then variable order with positive
    /// literals before negated ones.
    fn key(&self, nvars: usize) -> (u32, Vec<u8>) {
        let lits = (0..nvars)
            .map(|v| {
                if (self.mask >> v) & 1 == 0 {
                    2
                } else if (self.value >> v) & 1 == 1 {
                    0
                } else {
                    1
                }
            })
            .collect();
        (self.literals(), lits)
    }
}

fn prime_implicants(nvars: usize, minterms: &[u32]) -> Vec<Implicant> {
    let full = if nvars == 32 { u32::MAX } else { (1u32 << nvars) - 1 };
    let mut current: BTreeSet<Implicant> = minterms.iter().map(|&m| Implicant { mask: full, value: m }).collect();
    let mut primes = BTreeSet::new();
    while !current.is_empty() {
        let terms: Vec<Implicant> = current.iter().copied().collect();
        let mut used = vec![false; terms.len()];
        let mut next = BTreeSet::new();
        for i in 0..terms.len() {
            for j in i + 1..terms.len() {
                let (a, b) = (terms[i], terms[j]);
                if a.mask != b.mask {
                    continue;
                }
                let diff = a.value ^ b.value;
                if diff.count_ones() == 1 {
                    next.insert(Implicant {
                        mask: a.mask & !diff,
                        value: a.value & !diff,
                    });
                    used[i] = true;
                    used[j] = true;
                }
            }
        }
        for (t, u) in terms.iter().zip(&used) {
            if !u {
                primes.insert(*t);
            }
        }
        current = next;
    }
    primes.into_iter().collect()
}

/// Minimal sum-of-products cover of the true set of `tt`.
pub fn minimize(nvars: usize, tt: &[bool]) -> Vec<Implicant> {
    let minterms: Vec<u32> = (0..tt.len() as u32).filter(|&m| tt[m as usize]).collect();
    if minterms.is_empty() {
        return Vec::new();
    }
    let mut primes = prime_implicants(nvars, &minterms);
    primes.sort_by_key(|p| p.key(nvars));

    let mut chosen: Vec<Implicant> = Vec::new();
    let mut uncovered: BTreeSet<u32> = minterms.iter().copied().collect();
    for &m in &minterms {
        let covering: Vec<&Implicant> = primes.iter().filter(|p| p.covers(m)).collect();
        if covering.len() == 1 && !chosen.contains(covering[0]) {
            chosen.push(*covering[0]);
        }
    }
    for c in &chosen {
        uncovered.retain(|&m| !c.covers(m));
    }
    let rest: Vec<Implicant> = primes
        .iter()
        .filter(|p| !chosen.contains(p) && uncovered.iter().any(|&m| p.covers(m)))
        .copied()
        .collect();
    if !uncovered.is_empty() {
        chosen.extend(min_cover(&rest, &uncovered));
    }
    chosen.sort_by_key(|p| p.key(nvars));
    chosen
}

/// Smallest subset of `cands` covering `targets`; among equal sizes the
/// fewest literals, then the first in lexicographic combination order.
fn min_cover(cands: &[Implicant], targets: &BTreeSet<u32>) -> Vec<Implicant> {
    for size in 1..=cands.len() {
        let mut best: Option<(u32, Vec<usize>)> = None;
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            if targets.iter().all(|&m| idx.iter().any(|&i| cands[i].covers(m))) {
                let cost: u32 = idx.iter().map(|&i| cands[i].literals()).sum();
                if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                    best = Some((cost, idx.clone()));
                }
            }
            if !next_combination(&mut idx, cands.len()) {
                break;
            }
        }
        if let Some((_, sel)) = best {
            return sel.into_iter().map(|i| cands[i]).collect();
        }
    }
    cands.to_vec()
}

/// Advances `idx` to the next `k`-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
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

pub fn render_sop(terms: &[Implicant], names: &[String]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let rendered: Vec<String> = terms
        .iter()
        .map(|t| {
            if t.mask == 0 {
                return "1".to_string();
            }
            (0..names.len())
                .filter(|&v| (t.mask >> v) & 1 == 1)
                .map(|v| {
                    if (t.value >> v) & 1 == 1 {
                        names[v].clone()
                    } else {
                        format!("!{}", names[v])
                    }
                })
                .collect::<Vec<_>>()
                .join("·")
        })
        .collect();
    rendered.join(" + ")
}

/// Algebraic normal form coefficients (monomial bitmasks with coefficient 1).
pub fn anf(nvars: usize, tt: &[bool]) -> Vec<u32> {
    let mut c: Vec<bool> = tt.to_vec();
    for v in 0..nvars {
        for m in 0..c.len() {
            if (m >> v) & 1 == 1 {
                c[m] ^= c[m ^ (1 << v)];
            }
        }
    }
    let mut monos: Vec<u32> = (0..c.len() as u32).filter(|&m| c[m as usize]).collect();
    monos.sort_by_key(|&m| {
        let bits: Vec<u32> = (0..nvars as u32).filter(|v| (m >> v) & 1 == 1).collect();
        (m.count_ones(), bits)
    });
    monos
}

pub fn render_anf(monos: &[u32], names: &[String]) -> String {
    if monos.is_empty() {
        return "0".into();
    }
    monos
        .iter()
        .map(|&m| {
            if m == 0 {
                "1".to_string()
            } else {
                (0..names.len())
                    .filter(|&v| (m >> v) & 1 == 1)
                    .map(|v| names[v].clone())
                    .collect::<Vec<_>>()
                    .join("·")
            }
        })
        .collect::<Vec<_>>()
        .join(" ⊕ ")
}

// ---------------------------------------------------------------------------
// Built-in tables

/// Generator images and the full literal transcription for one gate.
struct Transcription {
    arity: usize,
    /// `(input, output)` pairs; inputs cover every single-qubit X, Y, Z.
    rows: &'static [(&'static str, &'static str)],
}

const H_ROWS: Transcription = Transcription {
    arity: 1,
    rows: &[("X", "Z"), ("Y", "-Y"), ("Z", "X")],
};
const P_ROWS: Transcription = Transcription {
    arity: 1,
    rows: &[("X", "Y"), ("Y", "-X"), ("Z", "Z")],
};
const CNOT_ROWS: Transcription = Transcription {
    arity: 2,
    rows: &[
        ("XI", "XX"),
        ("YI", "YX"),
        ("ZI", "ZI"),
        ("IX", "IX"),
        ("IY", "ZY"),
        ("IZ", "ZZ"),
    ],
};
const CZ_ROWS: Transcription = Transcription {
    arity: 2,
    rows: &[
        ("XI", "XZ"),
        ("YI", "YZ"),
        ("ZI", "ZI"),
        ("IX", "ZX"),
        ("IY", "ZY"),
        ("IZ", "IZ"),
    ],
};

fn from_transcription(t: &Transcription) -> Result<ConjugationTable> {
    let parse = |s: &str| PauliString::parse(s);
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for j in 0..t.arity {
        let find = |p: Pauli| -> Result<PauliString> {
            let key = PauliString::single(t.arity, j, p).literal_string();
            let (_, out) = t
                .rows
                .iter()
                .find(|(i, _)| *i == key)
                .ok_or_else(|| Error::InvalidTable(format!("missing row {key}")))?;
            parse(out)
        };
        xs.push(find(Pauli::X)?);
        zs.push(find(Pauli::Z)?);
    }
    let table = ConjugationTable::from_generators(t.arity, &xs, &zs)?;
    // the transcribed Y rows must agree with the generated ones
    for (i, o) in t.rows {
        let input = parse(i)?.literals();
        let want = parse(o)?;
        let (l, neg) = table.image(&input);
        if l != want.literals().as_slice() || neg != want.is_negative() {
            return Err(Error::InvalidTable(format!("row {i} -> {o} is inconsistent")));
        }
    }
    Ok(table)
}

/// Conjugation tables for all built-in gates.
pub fn builtin_tables() -> BTreeMap<GateId, ConjugationTable> {
    let h = from_transcription(&H_ROWS).expect("H table");
    let p = from_transcription(&P_ROWS).expect("P table");
    let z = p.then(&p).expect("Z = P·P");
    let x = h.then(&z).and_then(|t| t.then(&h)).expect("X = H Z H");
    let y = z.then(&x).expect("Y ∝ X·Z");
    let pdg = z.then(&p).expect("P† = P·Z");
    let cnot = from_transcription(&CNOT_ROWS).expect("CNOT table");
    let cz = from_transcription(&CZ_ROWS).expect("CZ table");
    BTreeMap::from([
        (GateId::H, h),
        (GateId::P, p),
        (GateId::Pdg, pdg),
        (GateId::X, x),
        (GateId::Y, y),
        (GateId::Z, z),
        (GateId::Cnot, cnot),
        (GateId::Cz, cz),
    ])
}

struct BuiltinRule {
    rule: BooleanUpdateRule,
    packed: Vec<(u8, bool)>,
}

static BUILTIN_RULES: LazyLock<BTreeMap<GateId, BuiltinRule>> = LazyLock::new(|| {
    builtin_tables()
        .into_iter()
        .map(|(g, t)| {
            let rule = derive_rule(&t).expect("builtin table is valid");
            let packed = rule.packed();
            (g, BuiltinRule { rule, packed })
        })
        .collect()
});

/// The derived rule for a built-in gate.
pub fn builtin_rule(g: GateId) -> &'static BooleanUpdateRule {
    &BUILTIN_RULES[&g].rule
}

pub(crate) fn builtin_packed(g: GateId) -> &'static [(u8, bool)] {
    &BUILTIN_RULES[&g].packed
}
