//! Dual-rail polarization optics.
//!
//! Qubit `q` (0-based) owns modes `2q` (H) and `2q+1` (V); `|0⟩ = |H⟩`,
//! `|1⟩ = |V⟩`. Elements act linearly on creation operators and are lifted to
//! Fock space by expanding products of creation operators. Photon number is
//! bounded by the number of input photons, so states stay tiny.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::kmap::GateId;

const TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Polarization basis of a detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectBasis {
    HV,
    DA,
}

/// Fast axis of a quarter-wave plate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FastAxis {
    H,
    V,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoElement {
    /// H-V polarizing beam splitter; exchanges the V modes of the two qubits.
    Pbs(usize, usize),
    /// Half-wave plate at `θ` degrees.
    Hwp(usize, f64),
    Qwp(usize, FastAxis),
    /// 45° polarizer modeled as the polarization Hadamard.
    Rot45(usize),
    /// Absorbing 45° polarizer; not norm preserving.
    LossyPolarizer(usize),
    Detect(usize, DetectBasis),
}

impl LoElement {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            LoElement::Pbs(a, b) => vec![a, b],
            LoElement::Hwp(q, _)
            | LoElement::Qwp(q, _)
            | LoElement::Rot45(q)
            | LoElement::LossyPolarizer(q)
            | LoElement::Detect(q, _) => vec![q],
        }
    }

    /// Single-photon matrix on the element's modes; column `i` is the image
    /// of creation operator `i`.
    fn matrix(&self) -> Option<(Vec<usize>, Vec<Vec<C>>)> {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        match *self {
            LoElement::Pbs(a, b) => Some((vec![2 * a + 1, 2 * b + 1], vec![vec![z, o], vec![o, z]])),
            LoElement::Hwp(q, deg) => Some((vec![2 * q, 2 * q + 1], hwp(deg))),
            LoElement::Rot45(q) => Some((vec![2 * q, 2 * q + 1], hwp(22.5))),
            LoElement::Qwp(q, axis) => {
                let s = if axis == FastAxis::H { -1.0 } else { 1.0 };
                let e = C::from_polar(1.0, s * std::f64::consts::FRAC_PI_4);
                Some((vec![2 * q, 2 * q + 1], vec![vec![e, z], vec![z, e.conj()]]))
            }
            LoElement::LossyPolarizer(q) => {
                let h = c(0.5, 0.0);
                Some((vec![2 * q, 2 * q + 1], vec![vec![h, h], vec![h, h]]))
            }
            LoElement::Detect(..) => None,
        }
    }
}

/// `[[cos2θ, sin2θ], [sin2θ, −cos2θ]]`, θ in degrees.
pub fn hwp(deg: f64) -> Vec<Vec<C>> {
    let t = (2.0 * deg).to_radians();
    let (s, co) = t.sin_cos();
    let r = |x: f64| c(if x.abs() < 1e-15 { 0.0 } else { x }, 0.0);
    vec![vec![r(co), r(s)], vec![r(s), r(-co)]]
}

impl fmt::Display for LoElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoElement::Pbs(a, b) => write!(f, "PBS({},{})", a + 1, b + 1),
            LoElement::Hwp(q, d) => write!(f, "HWP({},{d}°)", q + 1),
            LoElement::Qwp(q, a) => write!(f, "QWP({},{a:?})", q + 1),
            LoElement::Rot45(q) => write!(f, "ROT45({})", q + 1),
            LoElement::LossyPolarizer(q) => write!(f, "POL45({})", q + 1),
            LoElement::Detect(q, b) => write!(f, "DETECT({},{b:?})", q + 1),
        }
    }
}

/// Sparse Fock state over `2m` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    qubits: usize,
    amps: BTreeMap<Vec<u8>, C>,
}

impl FockState {
    pub fn vacuum(qubits: usize) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(vec![0; 2 * qubits], c(1.0, 0.0));
        FockState { qubits, amps }
    }

    /// Dual-rail encoding of a logical state; index bit `n-1-q` is qubit `q`.
    pub fn from_logical(qubits: usize, amps: &[C]) -> Result<Self> {
        if amps.len() != 1 << qubits {
            return Err(Error::Dimension {
                expected: 1 << qubits,
                got: amps.len(),
            });
        }
        let mut out = BTreeMap::new();
        for (b, &a) in amps.iter().enumerate() {
            if a.norm() > TOL {
                out.insert(dual_rail_occupation(qubits, b), a);
            }
        }
        Ok(FockState { qubits, amps: out })
    }

    pub fn basis(qubits: usize, index: usize) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(dual_rail_occupation(qubits, index), c(1.0, 0.0));
        FockState { qubits, amps }
    }

    /// `|+⟩^{⊗n}` in dual rail.
    pub fn plus(qubits: usize) -> Self {
        let a = c((1.0 / (1u64 << qubits) as f64).sqrt(), 0.0);
        FockState::from_logical(qubits, &vec![a; 1 << qubits]).expect("sizes match")
    }

    pub fn from_occupations(qubits: usize, terms: &[(Vec<u8>, C)]) -> Result<Self> {
        let mut amps = BTreeMap::new();
        for (occ, a) in terms {
            if occ.len() != 2 * qubits {
                return Err(Error::Dimension {
                    expected: 2 * qubits,
                    got: occ.len(),
                });
            }
            *amps.entry(occ.clone()).or_insert(c(0.0, 0.0)) += a;
        }
        Ok(FockState { qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u8>, C> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn photon_number(&self) -> Option<usize> {
        let mut n = None;
        for occ in self.amps.keys() {
            let k: usize = occ.iter().map(|&x| x as usize).sum();
            match n {
                None => n = Some(k),
                Some(m) if m != k => return None,
                _ => {}
            }
        }
        n
    }

    /// `true` if every qubit holds at most one photon in every term.
    pub fn at_most_one_per_qubit(&self) -> bool {
        self.amps
            .keys()
            .all(|occ| occ.chunks(2).all(|p| p[0] as usize + p[1] as usize <= 1))
    }

    /// Applies a waveplate, polarizer or PBS in place.
    pub fn apply_element(&mut self, e: &LoElement) -> Result<()> {
        if let Some(&q) = e.qubits().iter().find(|&&q| q >= self.qubits) {
            return Err(Error::pre(format!(
                "element touches qubit {} of {}",
                q + 1,
                self.qubits
            )));
        }
        let (modes, m) = e
            .matrix()
            .ok_or_else(|| Error::pre("a detector is not a linear element"))?;
        self.apply_linear(&modes, &m);
        Ok(())
    }

    /// Applies a single-photon linear map on `modes`.
    fn apply_linear(&mut self, modes: &[usize], m: &[Vec<C>]) {
        let k = modes.len();
        let mut out: BTreeMap<Vec<u8>, C> = BTreeMap::new();
        for (occ, &amp) in &self.amps {
            let local: Vec<u8> = modes.iter().map(|&i| occ[i]).collect();
            let mut norm = 1.0;
            let mut ops = Vec::new();
            for (i, &n) in local.iter().enumerate() {
                norm /= factorial(n).sqrt();
                for _ in 0..n {
                    ops.push(i);
                }
            }
            let mut terms: BTreeMap<Vec<u8>, C> = BTreeMap::new();
            terms.insert(vec![0; k], c(norm, 0.0));
            for &i in &ops {
                let mut next: BTreeMap<Vec<u8>, C> = BTreeMap::new();
                for (t, &a) in &terms {
                    for j in 0..k {
                        if m[j][i].norm() < TOL {
                            continue;
                        }
                        let mut t2 = t.clone();
                        t2[j] += 1;
                        *next.entry(t2).or_insert(c(0.0, 0.0)) += a * m[j][i];
                    }
                }
                terms = next;
            }
            for (t, a) in terms {
                let f: f64 = t.iter().map(|&n| factorial(n)).product::<f64>().sqrt();
                let mut full = occ.clone();
                for (j, &mode) in modes.iter().enumerate() {
                    full[mode] = t[j];
                }
                *out.entry(full).or_insert(c(0.0, 0.0)) += amp * a * f;
            }
        }
        out.retain(|_, a| a.norm() > TOL);
        self.amps = out;
    }
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

fn dual_rail_occupation(qubits: usize, index: usize) -> Vec<u8> {
    let mut occ = vec![0u8; 2 * qubits];
    for q in 0..qubits {
        let bit = (index >> (qubits - 1 - q)) & 1;
        occ[2 * q + bit] = 1;
    }
    occ
}

/// Optical circuit over `qubits` spatial qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct LoCircuit {
    pub qubits: usize,
    pub elements: Vec<LoElement>,
    /// Names used in detection patterns, one per qubit.
    pub labels: Vec<String>,
}

impl LoCircuit {
    pub fn new(labels: &[&str]) -> Self {
        LoCircuit {
            qubits: labels.len(),
            elements: Vec::new(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn push(&mut self, e: LoElement) -> &mut Self {
        self.elements.push(e);
        self
    }

    /// Detected qubits in detection order.
    pub fn detected(&self) -> Vec<usize> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                LoElement::Detect(q, _) => Some(*q),
                _ => None,
            })
            .collect()
    }

    /// Qubits that are never detected.
    pub fn outputs(&self) -> Vec<usize> {
        let d = self.detected();
        (0..self.qubits).filter(|q| !d.contains(q)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut detected = vec![false; self.qubits];
        for e in &self.elements {
            let qs = e.qubits();
            for &q in &qs {
                if q >= self.qubits {
                    return Err(Error::Index {
                        index: q,
                        len: self.qubits,
                    });
                }
                if detected[q] {
                    return Err(Error::pre(format!("{e} acts on qubit {} after its detection", q + 1)));
                }
            }
            if let LoElement::Pbs(a, b) = e {
                if a == b {
                    return Err(Error::pre("PBS needs two distinct qubits"));
                }
            }
            if let LoElement::Detect(q, _) = e {
                detected[*q] = true;
            }
        }
        if self.labels.len() != self.qubits {
            return Err(Error::Dimension {
                expected: self.qubits,
                got: self.labels.len(),
            });
        }
        Ok(())
    }
}

/// Photon counts `(H, V)` per detected qubit, by qubit index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    pub counts: Vec<(usize, u8, u8)>,
}

impl Pattern {
    /// One photon at every detector.
    pub fn is_success(&self) -> bool {
        self.counts.iter().all(|&(_, h, v)| h + v == 1)
    }

    pub fn label(&self, labels: &[String]) -> String {
        let mut s = String::new();
        for &(q, h, v) in &self.counts {
            for (p, k) in [("H", h), ("V", v)] {
                match k {
                    0 => {}
                    1 => s.push_str(&format!("{p}_{}", labels[q])),
                    _ => s.push_str(&format!("{p}_{}^{k}", labels[q])),
                }
            }
        }
        if s.is_empty() {
            s.push_str("none");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternResult {
    pub pattern: Pattern,
    pub label: String,
    pub probability: f64,
    /// Normalized post-detection state on the output qubits.
    pub residual: FockState,
}

fn propagate(circ: &LoCircuit, input: &FockState) -> Result<FockState> {
    circ.validate()?;
    if input.qubits != circ.qubits {
        return Err(Error::Dimension {
            expected: circ.qubits,
            got: input.qubits,
        });
    }
    if !input.at_most_one_per_qubit() {
        return Err(Error::pre("input is outside the dual-rail subspace"));
    }
    let mut s = input.clone();
    for e in &circ.elements {
        if let LoElement::Detect(q, DetectBasis::DA) = e {
            s.apply_linear(&[2 * q, 2 * q + 1], &hwp(22.5));
        }
        if let Some((modes, m)) = e.matrix() {
            s.apply_linear(&modes, &m);
        }
    }
    Ok(s)
}

/// Splits a propagated state by detection pattern, unnormalized.
fn split(circ: &LoCircuit, s: &FockState) -> BTreeMap<Pattern, FockState> {
    let mut det = circ.detected();
    det.sort_unstable();
    let outs = circ.outputs();
    let mut out: BTreeMap<Pattern, FockState> = BTreeMap::new();
    for (occ, &a) in &s.amps {
        let p = Pattern {
            counts: det.iter().map(|&q| (q, occ[2 * q], occ[2 * q + 1])).collect(),
        };
        let rest: Vec<u8> = outs.iter().flat_map(|&q| [occ[2 * q], occ[2 * q + 1]]).collect();
        let e = out.entry(p).or_insert_with(|| FockState {
            qubits: outs.len(),
            amps: BTreeMap::new(),
        });
        *e.amps.entry(rest).or_insert(c(0.0, 0.0)) += a;
    }
    out
}

/// Runs the circuit and enumerates the reachable detection patterns.
pub fn simulate(circ: &LoCircuit, input: &FockState) -> Result<Vec<PatternResult>> {
    let s = propagate(circ, input)?;
    let mut out = Vec::new();
    for (p, mut r) in split(circ, &s) {
        let prob = r.norm_sqr();
        if prob < 1e-24 {
            continue;
        }
        let n = prob.sqrt();
        r.amps.values_mut().for_each(|a| *a /= n);
        out.push(PatternResult {
            label: p.label(&circ.labels),
            pattern: p,
            probability: prob,
            residual: r,
        });
    }
    Ok(out)
}

/// Total probability of success-classified patterns.
pub fn success_probability(circ: &LoCircuit, input: &FockState) -> Result<f64> {
    Ok(simulate(circ, input)?
        .iter()
        .filter(|r| r.pattern.is_success())
        .map(|r| r.probability)
        .sum())
}

/// One Kraus operator: rows are output occupations, columns logical inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausOp {
    pub pattern: Pattern,
    pub label: String,
    pub success: bool,
    pub rows: Vec<Vec<u8>>,
    pub matrix: Vec<Vec<C>>,
}

impl KrausOp {
    pub fn entry(&self, row: &[u8], col: usize) -> C {
        self.rows
            .iter()
            .position(|r| r == row)
            .map(|i| self.matrix[i][col])
            .unwrap_or(c(0.0, 0.0))
    }

    /// Dense `2^k × 2^m` matrix if every row is a dual-rail output state.
    pub fn logical(&self) -> Option<Vec<Vec<C>>> {
        let k = self.rows.first().map(|r| r.len() / 2)?;
        let cols = self.matrix.first().map(|r| r.len()).unwrap_or(0);
        let mut m = vec![vec![c(0.0, 0.0); cols]; 1 << k];
        for (r, occ) in self.rows.iter().enumerate() {
            let idx = logical_index(occ)?;
            m[idx] = self.matrix[r].clone();
        }
        Some(m)
    }

    /// Copy scaled to unit Frobenius norm with the first nonzero entry real
    /// and positive.
    pub fn normalized(&self) -> KrausOp {
        let mut k = self.clone();
        let norm: f64 = k.matrix.iter().flatten().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let first = k.matrix.iter().flatten().find(|a| a.norm() > 1e-9).copied();
        if let Some(f) = first {
            let ph = f / f.norm();
            for a in k.matrix.iter_mut().flatten() {
                *a /= ph * norm;
            }
        }
        k
    }
}

fn logical_index(occ: &[u8]) -> Option<usize> {
    let mut idx = 0;
    for p in occ.chunks(2) {
        idx <<= 1;
        match (p[0], p[1]) {
            (1, 0) => {}
            (0, 1) => idx |= 1,
            _ => return None,
        }
    }
    Some(idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausMap {
    pub inputs: usize,
    pub outputs: Vec<usize>,
    pub ops: Vec<KrausOp>,
}

impl KrausMap {
    pub fn get(&self, label: &str) -> Option<&KrausOp> {
        self.ops.iter().find(|k| k.label == label)
    }

    /// `Σ K†K`.
    pub fn completeness(&self) -> Vec<Vec<C>> {
        let d = 1 << self.inputs;
        let mut s = vec![vec![c(0.0, 0.0); d]; d];
        for k in &self.ops {
            for i in 0..d {
                for j in 0..d {
                    s[i][j] += k.matrix.iter().map(|row| row[i].conj() * row[j]).sum::<C>();
                }
            }
        }
        s
    }

    /// Largest entrywise deviation of `Σ K†K` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let s = self.completeness();
        let mut worst: f64 = 0.0;
        for (i, row) in s.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a - c(want, 0.0)).norm());
            }
        }
        worst
    }
}

/// Kraus operators per detection pattern, from every dual-rail basis input.
pub fn extract_kraus(circ: &LoCircuit) -> Result<KrausMap> {
    let n = circ.qubits;
    let d = 1 << n;
    let mut cols: Vec<BTreeMap<Pattern, FockState>> = Vec::with_capacity(d);
    for b in 0..d {
        let s = propagate(circ, &FockState::basis(n, b))?;
        cols.push(split(circ, &s));
    }
    let mut patterns: BTreeMap<Pattern, std::collections::BTreeSet<Vec<u8>>> = BTreeMap::new();
    for col in &cols {
        for (p, r) in col {
            let e = patterns.entry(p.clone()).or_default();
            e.extend(r.amps.iter().filter(|(_, a)| a.norm() > TOL).map(|(o, _)| o.clone()));
        }
    }
    let mut ops = Vec::new();
    for (p, rows) in patterns {
        let rows: Vec<Vec<u8>> = rows.into_iter().collect();
        if rows.is_empty() {
            continue;
        }
        let mut m = vec![vec![c(0.0, 0.0); d]; rows.len()];
        for (b, col) in cols.iter().enumerate() {
            if let Some(r) = col.get(&p) {
                for (i, occ) in rows.iter().enumerate() {
                    if let Some(a) = r.amps.get(occ) {
                        m[i][b] = *a;
                    }
                }
            }
        }
        ops.push(KrausOp {
            label: p.label(&circ.labels),
            success: p.is_success(),
            pattern: p,
            rows,
            matrix: m,
        });
    }
    Ok(KrausMap {
        inputs: n,
        outputs: circ.outputs(),
        ops,
    })
}

/// Largest entrywise difference between two operators after dividing out
/// scale and one global phase.
pub fn kraus_distance(a: &KrausOp, b: &KrausOp) -> f64 {
    let (a, b) = (a.normalized(), b.normalized());
    let mut rows: Vec<&Vec<u8>> = a.rows.iter().chain(b.rows.iter()).collect();
    rows.sort();
    rows.dedup();
    let cols = a.matrix.first().or(b.matrix.first()).map(|r| r.len()).unwrap_or(0);
    let mut worst: f64 = 0.0;
    for r in rows {
        for col in 0..cols {
            worst = worst.max((a.entry(r, col) - b.entry(r, col)).norm());
        }
    }
    worst
}

// ---------------------------------------------------------------------
// Builders

fn type1_stage(circ: &mut LoCircuit, c_: usize, t: usize) {
    circ.push(LoElement::Pbs(c_, t));
    circ.push(LoElement::Rot45(t));
    circ.push(LoElement::Detect(t, DetectBasis::HV));
}

fn type2_stage(circ: &mut LoCircuit, c_: usize, t: usize) {
    circ.push(LoElement::Pbs(c_, t));
    circ.push(LoElement::Detect(c_, DetectBasis::DA));
    circ.push(LoElement::Detect(t, DetectBasis::DA));
}

/// Type-I fusion: PBS, 45° polarizer on `t`, H/V detector on `t`.
pub fn build_type1() -> LoCircuit {
    let mut circ = LoCircuit::new(&["c", "t"]);
    type1_stage(&mut circ, 0, 1);
    circ
}

/// Type-I fusion preceded by a 45° polarizer on `t`: `|0⟩⟨0+| ± |1⟩⟨1−|`.
pub fn build_type1_cz() -> LoCircuit {
    let mut circ = LoCircuit::new(&["c", "t"]);
    circ.push(LoElement::Rot45(1));
    type1_stage(&mut circ, 0, 1);
    circ
}

/// Type-I fusion preceded by 45° polarizers on both inputs:
/// `|0⟩⟨++| ± |1⟩⟨−−|`.
pub fn build_type1_xx() -> LoCircuit {
    let mut circ = LoCircuit::new(&["c", "t"]);
    circ.push(LoElement::Rot45(0));
    circ.push(LoElement::Rot45(1));
    type1_stage(&mut circ, 0, 1);
    circ
}

/// Type-II fusion: PBS then D/A detectors on both qubits.
pub fn build_type2() -> LoCircuit {
    let mut circ = LoCircuit::new(&["c", "t"]);
    type2_stage(&mut circ, 0, 1);
    circ
}

/// Waveplates implementing `g` up to global phase.
pub fn waveplates(g: GateId, q: usize) -> Result<Vec<LoElement>> {
    Ok(match g {
        GateId::H => vec![LoElement::Rot45(q)],
        GateId::Z => vec![LoElement::Hwp(q, 0.0)],
        GateId::X => vec![LoElement::Hwp(q, 45.0)],
        // X·Z = −iY
        GateId::Y => vec![LoElement::Hwp(q, 0.0), LoElement::Hwp(q, 45.0)],
        GateId::P => vec![LoElement::Qwp(q, FastAxis::H)],
        GateId::Pdg => vec![LoElement::Qwp(q, FastAxis::V)],
        GateId::Cnot | GateId::Cz => return Err(Error::Unsupported(format!("{g} is not a single-qubit rotation"))),
    })
}

/// Type-II fusion after `R_c†` and `R_t†`; each rotation is a product of
/// single-qubit gates applied left to right.
pub fn build_type2_rotated(rc: &[GateId], rt: &[GateId]) -> Result<LoCircuit> {
    let mut circ = LoCircuit::new(&["c", "t"]);
    for (q, r) in [(0, rc), (1, rt)] {
        for g in r.iter().rev() {
            circ.elements.extend(waveplates(g.inverse(), q)?);
        }
    }
    type2_stage(&mut circ, 0, 1);
    Ok(circ)
}

/// Type-II fusion projecting on `(|01⟩ ± |10⟩)/√2`.
pub fn build_type2_flip() -> LoCircuit {
    let mut circ = LoCircuit::new(&["c", "t"]);
    circ.push(LoElement::Hwp(1, 45.0));
    type2_stage(&mut circ, 0, 1);
    circ
}

/// `n`-qubit GHZ projection: `n−2` type-I stages from `c` into `t_1 …
/// t_{n−2}`, then a type-II stage on `c, t_{n−1}`.
pub fn build_ghz_fusion(n: usize) -> Result<LoCircuit> {
    if n < 2 {
        return Err(Error::pre("GHZ fusion needs at least two qubits"));
    }
    let mut labels: Vec<String> = vec!["c".into()];
    if n == 2 {
        labels.push("t".into());
    } else {
        labels.extend((1..n).map(|k| format!("t{k}")));
    }
    let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    let mut circ = LoCircuit::new(&refs);
    for t in 1..n - 1 {
        type1_stage(&mut circ, 0, t);
    }
    type2_stage(&mut circ, 0, n - 1);
    Ok(circ)
}

/// Names accepted by [`build_named`].
pub const BUILDERS: [&str; 6] = ["type1", "type1_cz", "type1_xx", "type2", "type2_flip", "ghz3"];

/// Builder lookup by name; `ghzN` and `type2_rotated:RC,RT` are accepted too.
pub fn build_named(name: &str) -> Result<LoCircuit> {
    let lower = name.trim().to_ascii_lowercase();
    match lower.as_str() {
        "type1" => Ok(build_type1()),
        "type1_cz" => Ok(build_type1_cz()),
        "type1_xx" => Ok(build_type1_xx()),
        "type2" => Ok(build_type2()),
        "type2_flip" => Ok(build_type2_flip()),
        _ => {
            if let Some(k) = lower.strip_prefix("ghz") {
                let n: usize = k
                    .parse()
                    .map_err(|_| Error::parse(1, 4, format!("bad GHZ size in `{name}`")))?;
                return build_ghz_fusion(n);
            }
            if let Some((rc, rt)) = rotated_parts(&lower)? {
                return build_type2_rotated(&rc, &rt);
            }
            Err(Error::Unsupported(format!("unknown circuit builder `{name}`")))
        }
    }
}

/// Splits `type2_rotated:RC,RT` into its two gate words (`*`-joined, `I` for
/// identity); `None` for other names.
pub fn rotated_parts(name: &str) -> Result<Option<(Vec<GateId>, Vec<GateId>)>> {
    let lower = name.trim().to_ascii_lowercase();
    let Some(rest) = lower.strip_prefix("type2_rotated:") else {
        return Ok(None);
    };
    let (a, b) = rest
        .split_once(',')
        .ok_or_else(|| Error::parse(1, 15, "expected `type2_rotated:RC,RT`"))?;
    let parse = |s: &str| -> Result<Vec<GateId>> {
        s.split('*')
            .filter(|x| !x.is_empty() && *x != "i")
            .map(|x| x.parse())
            .collect()
    };
    Ok(Some((parse(a)?, parse(b)?)))
}

// ---------------------------------------------------------------------
// Circuit → optics compilation

/// Two-qubit stabilizer circuit in the template family: single-qubit gates,
/// one CNOT or CZ, single-qubit gates on the control, then a Z measurement of
/// the target with outcome +1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumCircuit {
    pub ops: Vec<QOp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QOp {
    Gate { gate: GateId, targets: Vec<usize> },
    Measure { measure: String, target: usize },
}

/// Compiles a template circuit on qubits 1 (control) and 2 (target).
pub fn compile_circuit_to_lo(qc: &QuantumCircuit) -> Result<LoCircuit> {
    let mut pre: [Vec<GateId>; 2] = [vec![], vec![]];
    let mut post: Vec<GateId> = vec![];
    let mut entangler: Option<(GateId, usize, usize)> = None;
    let mut measured = None;
    for op in &qc.ops {
        if measured.is_some() {
            return Err(Error::Unsupported(format!("{op:?} follows the measurement")));
        }
        match op {
            QOp::Gate { gate, targets } => {
                let qs: Vec<usize> = targets.iter().map(|&q| q.wrapping_sub(1)).collect();
                if qs.iter().any(|&q| q > 1) {
                    return Err(Error::Unsupported(format!("{gate} touches a qubit outside 1..2")));
                }
                match (gate.arity(), entangler) {
                    (2, None) => {
                        if qs.len() != 2 || qs[0] == qs[1] {
                            return Err(Error::Unsupported(format!("{gate} needs two distinct qubits")));
                        }
                        entangler = Some((*gate, qs[0], qs[1]));
                    }
                    (2, Some(_)) => return Err(Error::Unsupported(format!("second entangling gate {gate}"))),
                    (_, None) => pre[qs[0]].push(*gate),
                    (_, Some((_, c0, _))) if qs[0] == c0 => post.push(*gate),
                    (_, Some(_)) => {
                        return Err(Error::Unsupported(format!(
                            "{gate} on the target after the entangling gate"
                        )))
                    }
                }
            }
            QOp::Measure { measure, target } => {
                if !measure.eq_ignore_ascii_case("z") {
                    return Err(Error::Unsupported(format!("{measure} measurement")));
                }
                measured = Some(target.wrapping_sub(1));
            }
        }
    }
    let (g, c_, t) = entangler.ok_or_else(|| Error::Unsupported("no entangling gate".into()))?;
    if measured != Some(t) {
        return Err(Error::Unsupported("the target must be measured in Z".into()));
    }
    let labels = if c_ == 0 { ["c", "t"] } else { ["t", "c"] };
    let mut circ = LoCircuit::new(&labels);
    for (q, gates) in pre.iter().enumerate() {
        for &gate in gates {
            circ.elements.extend(waveplates(gate, q)?);
        }
    }
    // CZ = H_t · CNOT · H_t; the trailing H_t cancels the type-I polarizer
    if g == GateId::Cz {
        circ.push(LoElement::Rot45(t));
    }
    circ.push(LoElement::Pbs(c_, t));
    if g == GateId::Cnot {
        circ.push(LoElement::Rot45(t));
    }
    for &gate in &post {
        circ.elements.extend(waveplates(gate, c_)?);
    }
    circ.push(LoElement::Detect(t, DetectBasis::HV));
    Ok(circ)
}

/// Kraus operator of a template circuit for outcome +1, rows over the
/// control, columns over both qubits.
pub fn circuit_kraus(qc: &QuantumCircuit) -> Result<Vec<Vec<C>>> {
    use crate::dense::DenseState;
    let mut cols = Vec::new();
    let mut tq = 1;
    for op in &qc.ops {
        if let QOp::Measure { target, .. } = op {
            tq = target - 1;
        }
    }
    for b in 0..4 {
        let mut s = DenseState::basis(2, b)?;
        for op in &qc.ops {
            if let QOp::Gate { gate, targets } = op {
                let qs: Vec<usize> = targets.iter().map(|q| q - 1).collect();
                s.apply_gate(*gate, &qs)?;
            }
        }
        let a = s.amplitudes();
        // keep the measured qubit at 0, read the other
        let keep: Vec<C> = (0..2)
            .map(|v| {
                let idx = if tq == 1 { v << 1 } else { v };
                a[idx]
            })
            .collect();
        cols.push(keep);
    }
    Ok((0..2).map(|r| (0..4).map(|b| cols[b][r]).collect()).collect())
}

// ---------------------------------------------------------------------
// JSON

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementJson {
    pub kind: String,
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitJson {
    pub spatial_modes: usize,
    pub elements: Vec<ElementJson>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

impl LoCircuit {
    pub fn to_json(&self) -> CircuitJson {
        let q = |q: usize| Value::from(q + 1);
        let elements = self
            .elements
            .iter()
            .map(|e| {
                let (kind, args) = match *e {
                    LoElement::Pbs(a, b) => ("PBS", vec![q(a), q(b)]),
                    LoElement::Hwp(x, d) => ("HWP", vec![q(x), Value::from(d)]),
                    LoElement::Qwp(x, a) => ("QWP", vec![q(x), Value::from(format!("{a:?}"))]),
                    LoElement::Rot45(x) => ("ROT45", vec![q(x)]),
                    LoElement::LossyPolarizer(x) => ("POL45", vec![q(x)]),
                    LoElement::Detect(x, b) => ("DETECT", vec![q(x), Value::from(format!("{b:?}"))]),
                };
                ElementJson {
                    kind: kind.into(),
                    args,
                }
            })
            .collect();
        CircuitJson {
            spatial_modes: self.qubits,
            elements,
            inputs: (1..=self.qubits).collect(),
            outputs: self.outputs().iter().map(|q| q + 1).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn from_json(j: &CircuitJson) -> Result<LoCircuit> {
        let m = j.spatial_modes;
        let labels = if j.labels.is_empty() {
            (1..=m).map(|q| q.to_string()).collect()
        } else {
            j.labels.clone()
        };
        let mut circ = LoCircuit {
            qubits: m,
            elements: vec![],
            labels,
        };
        for (i, e) in j.elements.iter().enumerate() {
            let bad = |msg: &str| Error::parse(1, i + 1, format!("element {}: {msg}", i + 1));
            let qa = |k: usize| -> Result<usize> {
                let v = e
                    .args
                    .get(k)
                    .and_then(|v| v.as_u64())
                    .ok_or_else(|| bad("expected a qubit"))? as usize;
                if v == 0 || v > m {
                    return Err(Error::Index { index: v, len: m });
                }
                Ok(v - 1)
            };
            let sa = |k: usize| -> Result<String> {
                e.args
                    .get(k)
                    .and_then(|v| v.as_str())
                    .map(|s| s.to_ascii_uppercase())
                    .ok_or_else(|| bad("expected a string"))
            };
            let el = match e.kind.to_ascii_uppercase().as_str() {
                "PBS" => LoElement::Pbs(qa(0)?, qa(1)?),
                "HWP" => LoElement::Hwp(
                    qa(0)?,
                    e.args
                        .get(1)
                        .and_then(|v| v.as_f64())
                        .ok_or_else(|| bad("expected an angle"))?,
                ),
                "QWP" => LoElement::Qwp(
                    qa(0)?,
                    match sa(1)?.as_str() {
                        "H" => FastAxis::H,
                        "V" => FastAxis::V,
                        _ => return Err(bad("fast axis must be H or V")),
                    },
                ),
                "ROT45" => LoElement::Rot45(qa(0)?),
                "POL45" => LoElement::LossyPolarizer(qa(0)?),
                "DETECT" => LoElement::Detect(
                    qa(0)?,
                    match sa(1)?.as_str() {
                        "HV" => DetectBasis::HV,
                        "DA" => DetectBasis::DA,
                        _ => return Err(bad("basis must be HV or DA")),
                    },
                ),
                other => return Err(bad(&format!("unknown element `{other}`"))),
            };
            circ.elements.push(el);
        }
        circ.validate()?;
        Ok(circ)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrausJson {
    pub pattern: String,
    pub classification: String,
    /// Output occupations, modes `[H_1, V_1, …]` of the output qubits.
    pub rows: Vec<Vec<u8>>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl KrausMap {
    pub fn to_json(&self) -> Vec<KrausJson> {
        self.ops
            .iter()
            .map(|k| {
                let n = k.normalized();
                KrausJson {
                    pattern: k.label.clone(),
                    classification: if k.success { "success" } else { "failure" }.into(),
                    rows: k.rows.clone(),
                    matrix: n
                        .matrix
                        .iter()
                        .map(|r| r.iter().map(|a| [clean(a.re), clean(a.im)]).collect())
                        .collect(),
                }
            })
            .collect()
    }
}

fn clean(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// `1/√2`, for tests and tables.
pub const S: f64 = FRAC_1_SQRT_2;

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(v: &[u8]) -> Vec<u8> {
        v.to_vec()
    }

    #[test]
    fn pbs_moves_vertical_photon() {
        let mut s = FockState::from_occupations(2, &[(occ(&[1, 0, 0, 1]), c(1.0, 0.0))]).unwrap();
        let (m, mat) = LoElement::Pbs(0, 1).matrix().unwrap();
        s.apply_linear(&m, &mat);
        assert_eq!(s.terms().keys().collect::<Vec<_>>(), [&occ(&[1, 1, 0, 0])]);
    }

    #[test]
    fn hadamard_plate() {
        let mut s = FockState::basis(1, 0);
        s.apply_linear(&[0, 1], &hwp(22.5));
        let t = s.terms();
        assert!((t[&occ(&[1, 0])].re - S).abs() < 1e-12);
        assert!((t[&occ(&[0, 1])].re - S).abs() < 1e-12);
        s.apply_linear(&[0, 1], &hwp(22.5));
        assert!((s.terms()[&occ(&[1, 0])].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bunching_amplitude() {
        // HOM-style: two photons through a Hadamard on one qubit's modes
        let mut s = FockState::from_occupations(1, &[(occ(&[1, 1]), c(1.0, 0.0))]).unwrap();
        s.apply_linear(&[0, 1], &hwp(22.5));
        let t = s.terms();
        assert!(t.get(&occ(&[1, 1])).is_none());
        assert!((t[&occ(&[2, 0])].re - S).abs() < 1e-12);
        assert!((t[&occ(&[0, 2])].re + S).abs() < 1e-12);
    }

    #[test]
    fn type1_on_hh() {
        let r = simulate(&build_type1(), &FockState::basis(2, 0)).unwrap();
        let ht = r.iter().find(|p| p.label == "H_t").unwrap();
        assert!((ht.probability - 0.5).abs() < 1e-12);
        assert_eq!(ht.residual.terms().keys().collect::<Vec<_>>(), [&occ(&[1, 0])]);
        let hv = simulate(&build_type1(), &FockState::basis(2, 1)).unwrap();
        assert_eq!(hv.len(), 1);
        assert_eq!(hv[0].label, "none");
        let vac = simulate(&build_type1(), &FockState::vacuum(2)).unwrap();
        assert_eq!(vac.len(), 1);
        assert!((vac[0].probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_dual_rail_input() {
        let s = FockState::from_occupations(2, &[(occ(&[2, 0, 0, 0]), c(1.0, 0.0))]).unwrap();
        assert!(simulate(&build_type1(), &s).is_err());
    }

    #[test]
    fn ghz2_equals_type2() {
        let a = extract_kraus(&build_ghz_fusion(2).unwrap()).unwrap();
        let b = extract_kraus(&build_type2()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip() {
        let circ = build_type1_xx();
        let j = circ.to_json();
        assert_eq!(j.outputs, [1]);
        let back = LoCircuit::from_json(&j).unwrap();
        assert_eq!(back, circ);
    }

    #[test]
    fn waveplate_gates_match_dense() {
        use crate::dense::DenseState;
        for g in [GateId::H, GateId::P, GateId::Pdg, GateId::X, GateId::Y, GateId::Z] {
            let mut circ = LoCircuit::new(&["q"]);
            circ.elements = waveplates(g, 0).unwrap();
            let inputs = [
                (vec![c(1.0, 0.0), c(0.0, 0.0)], 0),
                (vec![c(0.0, 0.0), c(1.0, 0.0)], 1),
                (vec![c(S, 0.0), c(0.0, S)], 2),
            ];
            for (amps, b) in inputs {
                let out = propagate(&circ, &FockState::from_logical(1, &amps).unwrap()).unwrap();
                let mut d = DenseState::from_amplitudes(1, amps).unwrap();
                d.apply_gate(g, &[0]).unwrap();
                let got: Vec<C> = [occ(&[1, 0]), occ(&[0, 1])]
                    .iter()
                    .map(|o| out.terms().get(o).copied().unwrap_or(c(0.0, 0.0)))
                    .collect();
                let want = DenseState::from_amplitudes(1, got).unwrap();
                assert!(want.equal_up_to_phase(&d, 1e-12), "{g} on {b}");
            }
        }
    }
}
