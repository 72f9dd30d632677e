//! Band matrix storage and LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: column-major with
//! `2 kl + ku + 1` rows per column, the top `kl` rows reserved for the
//! fill-in produced by row interchanges.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ldab, data: vec![0.0; ldab * n] }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j <= i + self.ku && i <= j + self.kl
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ldab
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.offset(i, j)]
        } else {
            0.0
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let k = self.offset(i, j);
        self.data[k] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let k = self.offset(i, j);
        self.data[k] += value;
    }

    /// Clears row `i` inside the band.
    pub fn zero_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            let k = self.offset(i, j);
            self.data[k] = 0.0;
        }
    }

    /// Number of stored nonzero entries in row `i`.
    pub fn row_nnz(&self, i: usize) -> usize {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        (lo..=hi).filter(|&j| self.get(i, j) != 0.0).count()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Factorizes in place; pivots smaller than `1e-14 · max|A|` are rejected.
    pub fn factorize(mut self) -> Result<BandedLu> {
        let (n, kl, ku, ld) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let tol = 1e-14 * self.max_abs().max(f64::MIN_POSITIVE);
        let a = &mut self.data;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ld + kv;
            let mut jp = 0;
            let mut best = a[col].abs();
            for r in 1..=km {
                let v = a[col + r].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            ipiv[j] = j + jp;
            if !(best > tol) {
                return Err(Error::SingularMatrix { index: j });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let base = c * ld + kv - c;
                    a.swap(base + j, base + j + jp);
                }
            }
            if km > 0 {
                let inv = 1.0 / a[col];
                for r in 1..=km {
                    a[col + r] *= inv;
                }
                for c in j + 1..=ju {
                    let base = c * ld + kv - c;
                    let u = a[base + j];
                    if u != 0.0 {
                        for r in 1..=km {
                            a[base + j + r] -= a[col + r] * u;
                        }
                    }
                }
            }
        }
        Ok(BandedLu { m: self, ipiv })
    }
}

/// LU factors of a [`BandedMatrix`].
#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        let (n, kl, ku, ld) = (self.m.n, self.m.kl, self.m.ku, self.m.ldab);
        if b.len() != n {
            return Err(Error::SizeMismatch { expected: n, found: b.len() });
        }
        let kv = kl + ku;
        let a = &self.m.data;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                let col = j * ld + kv;
                for r in 1..=km {
                    b[j + r] -= a[col + r] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ld + kv;
            b[j] /= a[col];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= a[col + i - j] * bj;
                }
            }
        }
        Ok(())
    }
}

/// Solves `jac · x = rhs`.
pub fn banded_solve(jac: BandedMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != jac.dim() {
        return Err(Error::SizeMismatch { expected: jac.dim(), found: rhs.len() });
    }
    let lu = jac.factorize()?;
    let mut x = rhs.to_vec();
    lu.solve_in_place(&mut x)?;
    Ok(x)
}
