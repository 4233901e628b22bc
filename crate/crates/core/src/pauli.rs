//! Pauli strings over `n` qubits in symplectic form.
//!
//! Qubit `j` (0-based) occupies bit `j % 64` of word `j / 64` in both the `x`
//! and `z` vectors. The overall phase is stored as a power of `i` modulo 4.
//! Per qubit, `(x, z)` encodes `I = (0,0)`, `X = (1,0)`, `Z = (0,1)` and
//! `Y = (1,1)`, where `Y` is the Hermitian Pauli matrix (not `XZ`).
//!
//! The text form puts qubit 1 leftmost and accepts an optional prefix from
//! `+`, `-`, `i`, `+i`, `-i`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-qubit Pauli literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' | '_' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Exponent of `i` picked up when multiplying literal `(x1,z1)` on the left of
/// `(x2,z2)`. Returns -1, 0 or 1.
pub fn g(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    let (x1, z1, x2, z2) = (x1 as i32, z1 as i32, x2 as i32, z2 as i32);
    match (x1, z1) {
        (0, 0) => 0,
        (1, 1) => z2 - x2,
        (1, 0) => z2 * (2 * x2 - 1),
        _ => x2 * (1 - 2 * z2),
    }
}

pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// Phase exponent contributed by the word-wise product `(x1,z1)·(x2,z2)`.
#[inline]
pub(crate) fn word_phase(x1: u64, z1: u64, x2: u64, z2: u64) -> i32 {
    let (xo1, yo1, zo1) = (x1 & !z1, x1 & z1, !x1 & z1);
    let (xo2, yo2, zo2) = (x2 & !z2, x2 & z2, !x2 & z2);
    let plus = (xo1 & yo2) | (yo1 & zo2) | (zo1 & xo2);
    let minus = (xo1 & zo2) | (yo1 & xo2) | (zo1 & yo2);
    plus.count_ones() as i32 - minus.count_ones() as i32
}

/// An `n`-qubit Pauli operator `i^phase · P_1 ⊗ … ⊗ P_n`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

impl PauliString {
    /// The identity on `n` qubits.
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliString {
            n,
            x: vec![0; w],
            z: vec![0; w],
            phase: 0,
        }
    }

    /// A single literal `p` on qubit `q` of an `n`-qubit register.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.set(q, p);
        s
    }

    /// Builds a string from literals with the given phase exponent.
    pub fn from_literals(lits: &[Pauli], phase: u8) -> Self {
        let mut s = Self::identity(lits.len());
        for (q, &p) in lits.iter().enumerate() {
            s.set(q, p);
        }
        s.phase = phase & 3;
        s
    }

    /// Builds a string from literals on selected qubits.
    pub fn from_sparse(n: usize, lits: &[(usize, Pauli)]) -> Self {
        let mut s = Self::identity(n);
        for &(q, p) in lits {
            s.set(q, p);
        }
        s
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn set_phase(&mut self, phase: u8) {
        self.phase = phase & 3;
    }

    /// `true` when the phase is `-1` or `-i`.
    pub fn is_negative(&self) -> bool {
        self.phase >= 2
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub fn x_bit(&self, q: usize) -> bool {
        (self.x[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn z_bit(&self, q: usize) -> bool {
        (self.z[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn set_x(&mut self, q: usize, v: bool) {
        let m = 1u64 << (q % 64);
        if v {
            self.x[q / 64] |= m;
        } else {
            self.x[q / 64] &= !m;
        }
    }

    pub fn set_z(&mut self, q: usize, v: bool) {
        let m = 1u64 << (q % 64);
        if v {
            self.z[q / 64] |= m;
        } else {
            self.z[q / 64] &= !m;
        }
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x_bit(q), self.z_bit(q))
    }

    pub fn set(&mut self, q: usize, p: Pauli) {
        let (x, z) = p.bits();
        self.set_x(q, x);
        self.set_z(q, z);
    }

    pub fn literals(&self) -> Vec<Pauli> {
        (0..self.n).map(|q| self.get(q)).collect()
    }

    /// Qubits carrying a non-identity literal.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.x_bit(q) || self.z_bit(q)).collect()
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    pub fn is_identity_bits(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    /// Same literals, ignoring phase.
    pub fn same_bits(&self, other: &PauliString) -> bool {
        self.n == other.n && self.x == other.x && self.z == other.z
    }

    fn check_dim(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(())
    }

    /// The product `self · other`, phase exact.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        self.check_dim(other)?;
        let mut out = self.clone();
        out.mul_assign_right(other);
        Ok(out)
    }

    /// In-place `self ← self · other`. Dimensions must already agree.
    pub(crate) fn mul_assign_right(&mut self, other: &PauliString) {
        let mut p = self.phase as i32 + other.phase as i32;
        for w in 0..self.x.len() {
            p += word_phase(self.x[w], self.z[w], other.x[w], other.z[w]);
            self.x[w] ^= other.x[w];
            self.z[w] ^= other.z[w];
        }
        self.phase = p.rem_euclid(4) as u8;
    }

    /// `true` iff the symplectic inner product vanishes.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_dim(other)?;
        Ok(self.commutes_unchecked(other))
    }

    pub(crate) fn commutes_unchecked(&self, other: &PauliString) -> bool {
        let mut acc = 0u32;
        for w in 0..self.x.len() {
            acc ^= ((self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w])).count_ones() & 1;
        }
        acc == 0
    }

    /// Parses the text form, e.g. `-XIZ`, `+iY`, `ZZ`.
    pub fn parse(text: &str) -> Result<PauliString> {
        let t = text.trim();
        let chars: Vec<char> = t.chars().collect();
        let mut pos = 0;
        let mut phase = 0u8;
        if pos < chars.len() && (chars[pos] == '+' || chars[pos] == '-') {
            if chars[pos] == '-' {
                phase = 2;
            }
            pos += 1;
        }
        if pos < chars.len() && chars[pos] == 'i' {
            phase = (phase + 1) & 3;
            pos += 1;
        }
        let mut lits = Vec::with_capacity(chars.len() - pos);
        for (k, &c) in chars.iter().enumerate().skip(pos) {
            match Pauli::from_char(c) {
                Some(p) => lits.push(p),
                None => {
                    return Err(Error::parse(
                        1,
                        k + 1,
                        format!("unexpected character `{c}` in Pauli string"),
                    ))
                }
            }
        }
        if lits.is_empty() {
            return Err(Error::parse(1, pos + 1, "no Pauli literals"));
        }
        Ok(PauliString::from_literals(&lits, phase))
    }

    /// Literal characters without the phase prefix.
    pub fn literal_string(&self) -> String {
        (0..self.n).map(|q| self.get(q).to_char()).collect()
    }

    /// Expands into a dense `2^n × 2^n` matrix (row-major) with qubit 0 as
    /// the most significant bit. Intended for small oracles only.
    #[allow(clippy::needless_range_loop)]
    pub fn to_matrix(&self) -> Vec<Vec<num_complex::Complex64>> {
        use num_complex::Complex64 as C;
        let dim = 1usize << self.n;
        let mut m = vec![vec![C::new(0.0, 0.0); dim]; dim];
        let ph = [C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(-1.0, 0.0), C::new(0.0, -1.0)];
        for col in 0..dim {
            let mut r = col;
            let mut amp = ph[self.phase as usize];
            for q in 0..self.n {
                let bit = self.n - 1 - q;
                let b = (col >> bit) & 1;
                let (x, z) = (self.x_bit(q), self.z_bit(q));
                if x {
                    r ^= 1 << bit;
                }
                match (x, z) {
                    (false, true) if b == 1 => amp = -amp,
                    (true, true) => {
                        // Y|0> = i|1>, Y|1> = -i|0>
                        amp *= if b == 0 { C::new(0.0, 1.0) } else { C::new(0.0, -1.0) };
                    }
                    _ => {}
                }
            }
            m[r][col] = amp;
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}{}", self.literal_string())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PauliString::parse(s)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PauliString::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    fn matmul(a: &[Vec<C>], b: &[Vec<C>]) -> Vec<Vec<C>> {
        let n = a.len();
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
            .collect()
    }

    fn close(a: &[Vec<C>], b: &[Vec<C>]) -> bool {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .all(|(x, y)| (x - y).norm() < 1e-12)
    }

    #[test]
    fn single_qubit_products_match_matrices() {
        for a in Pauli::ALL {
            for b in Pauli::ALL {
                let pa = PauliString::from_literals(&[a], 0);
                let pb = PauliString::from_literals(&[b], 0);
                let prod = pa.multiply(&pb).unwrap();
                let want = matmul(&pa.to_matrix(), &pb.to_matrix());
                assert!(close(&prod.to_matrix(), &want), "{a:?}·{b:?}");
            }
        }
    }

    #[test]
    fn xx_times_zz_is_minus_yy() {
        let p = PauliString::parse("XX").unwrap();
        let q = PauliString::parse("ZZ").unwrap();
        assert_eq!(p.multiply(&q).unwrap().to_string(), "-YY");
    }

    #[test]
    fn zx_is_i_y_and_xz_is_minus_i_y() {
        let x = PauliString::parse("X").unwrap();
        let z = PauliString::parse("Z").unwrap();
        assert_eq!(z.multiply(&x).unwrap().to_string(), "+iY");
        assert_eq!(x.multiply(&z).unwrap().to_string(), "-iY");
        assert_eq!(x.multiply(&x).unwrap().to_string(), "+I");
    }

    #[test]
    fn commutation_examples() {
        let p = |s| PauliString::parse(s).unwrap();
        assert!(p("XX").commutes(&p("ZZ")).unwrap());
        assert!(!p("X").commutes(&p("Z")).unwrap());
        assert!(p("XZ").commutes(&p("ZX")).unwrap());
    }

    #[test]
    fn parse_forms() {
        let p = PauliString::parse("-XX").unwrap();
        assert_eq!(p.phase(), 2);
        assert!(p.x_bit(0) && p.x_bit(1) && !p.z_bit(0));
        let q = PauliString::parse("ZIZ").unwrap();
        assert_eq!(q.num_qubits(), 3);
        assert_eq!((q.z_bit(0), q.z_bit(1), q.z_bit(2)), (true, false, true));
        assert_eq!(PauliString::parse("iY").unwrap().phase(), 1);
        assert_eq!(PauliString::parse("-iY").unwrap().phase(), 3);
        assert!(matches!(PauliString::parse("XQ"), Err(Error::Parse { column: 2, .. })));
        assert!(PauliString::parse("-").is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let a = PauliString::parse("XX").unwrap();
        let b = PauliString::parse("X").unwrap();
        assert!(matches!(a.multiply(&b), Err(Error::Dimension { .. })));
        assert!(a.commutes(&b).is_err());
    }

    #[test]
    fn g_function_table() {
        // g(left, right) for the nontrivial pairs
        assert_eq!(g(false, true, true, false), 1); // Z·X
        assert_eq!(g(true, false, false, true), -1); // X·Z
        assert_eq!(g(true, true, false, true), 1); // Y·Z
        assert_eq!(g(true, false, true, true), 1); // X·Y
    }

    #[test]
    fn words_cross_boundary() {
        let mut a = PauliString::identity(130);
        a.set(0, Pauli::X);
        a.set(64, Pauli::Z);
        a.set(129, Pauli::Y);
        let s = a.to_string();
        let b = PauliString::parse(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weight(), 3);
        assert_eq!(a.support(), vec![0, 64, 129]);
    }
}
