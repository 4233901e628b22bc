//! State-vector oracle for small registers.
//!
//! Basis index bit `n-1-q` holds qubit `q`, so qubit 1 is the most
//! significant bit and `|b_1 b_2 … b_n⟩` reads left to right.

use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::kmap::GateId;
use crate::pauli::PauliString;
use crate::tableau::Tableau;

/// Largest register the oracle accepts.
pub const MAX_DENSE_QUBITS: usize = 10;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    n: usize,
    amps: Vec<C>,
}

impl DenseState {
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        if n > MAX_DENSE_QUBITS {
            return Err(Error::pre(format!("dense oracle limited to {MAX_DENSE_QUBITS} qubits")));
        }
        let mut amps = vec![C::new(0.0, 0.0); 1 << n];
        amps[index] = C::new(1.0, 0.0);
        Ok(DenseState { n, amps })
    }

    pub fn plus(n: usize) -> Result<Self> {
        let mut s = Self::zero(n)?;
        let a = C::new((1.0 / (1u64 << n) as f64).sqrt(), 0.0);
        s.amps.iter_mut().for_each(|x| *x = a);
        Ok(s)
    }

    pub fn from_amplitudes(n: usize, amps: Vec<C>) -> Result<Self> {
        if amps.len() != 1 << n {
            return Err(Error::Dimension {
                expected: 1 << n,
                got: amps.len(),
            });
        }
        Ok(DenseState { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C] {
        &self.amps
    }

    fn bit(&self, q: usize) -> usize {
        self.n - 1 - q
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
        n
    }

    pub fn inner(&self, other: &DenseState) -> C {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `P|ψ⟩` for a Pauli string including its phase.
    pub fn apply_pauli(&self, p: &PauliString) -> DenseState {
        let mut xmask = 0usize;
        for q in 0..self.n {
            if p.x_bit(q) {
                xmask |= 1 << self.bit(q);
            }
        }
        let global = [C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(-1.0, 0.0), C::new(0.0, -1.0)][p.phase() as usize];
        let mut out = vec![C::new(0.0, 0.0); self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            if a == C::new(0.0, 0.0) {
                continue;
            }
            let mut f = global;
            for q in 0..self.n {
                let one = (b >> self.bit(q)) & 1 == 1;
                match (p.x_bit(q), p.z_bit(q)) {
                    (false, true) if one => f = -f,
                    (true, true) => f *= if one { C::new(0.0, -1.0) } else { C::new(0.0, 1.0) },
                    _ => {}
                }
            }
            out[b ^ xmask] += f * a;
        }
        DenseState { n: self.n, amps: out }
    }

    /// `(I + P)/2 |ψ⟩`, unnormalized.
    pub fn project(&self, p: &PauliString, plus: bool) -> DenseState {
        let pp = self.apply_pauli(p);
        let s = if plus { 0.5 } else { -0.5 };
        let amps = self.amps.iter().zip(&pp.amps).map(|(a, b)| a * 0.5 + b * s).collect();
        DenseState { n: self.n, amps }
    }

    /// Probability of the `+1` outcome of a Hermitian Pauli measurement.
    pub fn prob_plus(&self, p: &PauliString) -> f64 {
        self.project(p, true).norm_sqr() / self.norm_sqr()
    }

    /// `⟨ψ|P|ψ⟩` for normalized `ψ`.
    pub fn expectation(&self, p: &PauliString) -> C {
        self.inner(&self.apply_pauli(p))
    }

    /// `true` if `P|ψ⟩ = |ψ⟩` within `tol`.
    pub fn is_stabilized_by(&self, p: &PauliString, tol: f64) -> bool {
        let pp = self.apply_pauli(p);
        self.amps.iter().zip(&pp.amps).all(|(a, b)| (a - b).norm() < tol)
    }

    fn map_pairs(&mut self, q: usize, m: [[C; 2]; 2]) {
        let bit = 1 << self.bit(q);
        for b in 0..self.amps.len() {
            if b & bit == 0 {
                let (a0, a1) = (self.amps[b], self.amps[b | bit]);
                self.amps[b] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[b | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    /// Applies a single-qubit unitary given as a 2×2 matrix.
    pub fn apply_1q(&mut self, q: usize, m: [[C; 2]; 2]) {
        self.map_pairs(q, m);
    }

    pub fn apply_gate(&mut self, g: GateId, qubits: &[usize]) -> Result<()> {
        let z = C::new(0.0, 0.0);
        let o = C::new(1.0, 0.0);
        let i = C::new(0.0, 1.0);
        let h = C::new(SQRT_HALF, 0.0);
        match g {
            GateId::H => self.map_pairs(qubits[0], [[h, h], [h, -h]]),
            GateId::P => self.map_pairs(qubits[0], [[o, z], [z, i]]),
            GateId::Pdg => self.map_pairs(qubits[0], [[o, z], [z, -i]]),
            GateId::X => self.map_pairs(qubits[0], [[z, o], [o, z]]),
            GateId::Y => self.map_pairs(qubits[0], [[z, -i], [i, z]]),
            GateId::Z => self.map_pairs(qubits[0], [[o, z], [z, -o]]),
            GateId::Cnot | GateId::Cz => {
                let (c, t) = (1 << self.bit(qubits[0]), 1 << self.bit(qubits[1]));
                for b in 0..self.amps.len() {
                    if b & c == 0 {
                        continue;
                    }
                    if g == GateId::Cz {
                        if b & t != 0 {
                            self.amps[b] = -self.amps[b];
                        }
                    } else if b & t == 0 {
                        self.amps.swap(b, b | t);
                    }
                }
            }
        }
        Ok(())
    }

    /// Vector equality up to a global phase.
    pub fn equal_up_to_phase(&self, other: &DenseState, tol: f64) -> bool {
        let ov = self.inner(other).norm();
        let n1 = self.norm_sqr().sqrt();
        let n2 = other.norm_sqr().sqrt();
        (ov - n1 * n2).abs() < tol
    }
}

/// State vector of a tableau: `Π (I+S_i)/2` applied to a seed basis state,
/// normalized. The seeds tried are `|0…0⟩`, `|+…+⟩`, then every computational
/// basis state in order.
pub fn dense_from_tableau(t: &Tableau) -> Result<DenseState> {
    let n = t.num_qubits();
    let project_all = |mut s: DenseState| {
        for g in t.stabilizers() {
            s = s.project(g, true);
        }
        s
    };
    let mut seeds = vec![DenseState::zero(n)?, DenseState::plus(n)?];
    let mut s = None;
    for seed in seeds.drain(..) {
        let p = project_all(seed);
        if p.norm_sqr() > 1e-12 {
            s = Some(p);
            break;
        }
    }
    if s.is_none() {
        for b in 1..1usize << n {
            let p = project_all(DenseState::basis(n, b)?);
            if p.norm_sqr() > 1e-12 {
                s = Some(p);
                break;
            }
        }
    }
    let mut s = s.ok_or_else(|| Error::Internal("stabilizer projector annihilated every seed".into()))?;
    s.normalize();
    Ok(s)
}
