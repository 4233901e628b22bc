//! Dense GF(2) matrices with word-packed rows.

use std::fmt;

/// A `rows × cols` matrix over GF(2).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    cols: usize,
    words: usize,
    data: Vec<Vec<u64>>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64).max(1);
        BitMatrix {
            cols,
            words,
            data: vec![vec![0; words]; rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(cols: usize, rows: &[Vec<bool>]) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &b) in r.iter().enumerate() {
                m.set(i, j, b);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.data.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.data[r][c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let m = 1u64 << (c % 64);
        if v {
            self.data[r][c / 64] |= m;
        } else {
            self.data[r][c / 64] &= !m;
        }
    }

    pub fn row(&self, r: usize) -> Vec<bool> {
        (0..self.cols).map(|c| self.get(r, c)).collect()
    }

    pub fn push_row(&mut self, bits: &[bool]) {
        let mut w = vec![0u64; self.words];
        for (c, &b) in bits.iter().enumerate() {
            if b {
                w[c / 64] |= 1 << (c % 64);
            }
        }
        self.data.push(w);
    }

    pub fn row_is_zero(&self, r: usize) -> bool {
        self.data[r].iter().all(|&w| w == 0)
    }

    /// `row[dst] ^= row[src]`.
    pub fn xor_row(&mut self, dst: usize, src: usize) {
        if dst == src {
            return;
        }
        let (a, b) = if dst < src {
            let (lo, hi) = self.data.split_at_mut(src);
            (&mut lo[dst], &hi[0])
        } else {
            let (lo, hi) = self.data.split_at_mut(dst);
            (&mut hi[0], &lo[src])
        };
        for (x, y) in a.iter_mut().zip(b) {
            *x ^= y;
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        self.data.swap(a, b);
    }

    /// Reduced row-echelon form in place; returns pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows() {
                break;
            }
            let Some(p) = (r..self.rows()).find(|&i| self.get(i, c)) else {
                continue;
            };
            self.swap_rows(r, p);
            for i in 0..self.rows() {
                if i != r && self.get(i, c) {
                    self.xor_row(i, r);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Submatrix made of the listed columns, in order.
    pub fn select_cols(&self, cols: &[usize]) -> BitMatrix {
        let mut m = BitMatrix::zeros(self.rows(), cols.len());
        for r in 0..self.rows() {
            for (j, &c) in cols.iter().enumerate() {
                m.set(r, j, self.get(r, c));
            }
        }
        m
    }

    /// Solves `self · v = b` for `v`; `None` if inconsistent.
    pub fn solve(&self, b: &[bool]) -> Option<Vec<bool>> {
        let mut aug = BitMatrix::zeros(self.rows(), self.cols + 1);
        for (r, &br) in b.iter().enumerate().take(self.rows()) {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, self.cols, br);
        }
        let pivots = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut v = vec![false; self.cols];
        for (r, &c) in pivots.iter().enumerate() {
            v[c] = aug.get(r, self.cols);
        }
        Some(v)
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows() {
            let s: String = (0..self.cols).map(|c| if self.get(r, c) { '1' } else { '0' }).collect();
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_solve() {
        let m = BitMatrix::from_rows(
            3,
            &[
                vec![true, true, false],
                vec![false, true, true],
                vec![true, false, true],
            ],
        );
        assert_eq!(m.rank(), 2);
        let v = m.solve(&[true, true, false]).unwrap();
        for (r, want) in [true, true, false].into_iter().enumerate() {
            let dot = (0..3).filter(|&c| m.get(r, c) && v[c]).count() % 2 == 1;
            assert_eq!(dot, want);
        }
        assert_eq!(m.solve(&[true, false, false]), None);
    }

    #[test]
    fn rref_pivots() {
        let mut m = BitMatrix::from_rows(4, &[vec![false, true, false, true], vec![false, true, true, false]]);
        assert_eq!(m.rref(), vec![1, 2]);
        assert_eq!(m.row(0), vec![false, true, false, true]);
        assert_eq!(m.row(1), vec![false, false, true, true]);
    }
}
