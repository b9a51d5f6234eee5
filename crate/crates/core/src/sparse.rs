//! Compressed sparse rows, banded factorizations and the coordinate-triplet
//! text format.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::dense::Matrix;
use crate::{Error, Result};

/// CSR matrix with sorted, duplicate-free column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        // Stable sort keeps the summation order of duplicates deterministic.
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Empty `n × m` matrix.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, Vec::new())
    }

    /// Row count.
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    /// Column count.
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// All entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Entry lookup (zero when not stored).
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec length");
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `y = A' x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "matvec_t length");
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                y[c] += v * x[r];
            }
        }
        y
    }

    /// `x' A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        crate::dense::dot(x, &self.matvec(y))
    }

    /// `self + alpha * other` (union pattern).
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let trip: Vec<_> = self
            .triplets()
            .chain(other.triplets().map(|(r, c, v)| (r, c, alpha * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    /// `alpha * self`.
    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Transpose.
    pub fn transpose(&self) -> CsrMatrix {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)).collect())
    }

    /// `(A + A')/2`.
    pub fn sym_part(&self) -> CsrMatrix {
        self.add_scaled(1.0, &self.transpose()).scaled(0.5)
    }

    /// Largest absolute stored entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Lower and upper bandwidths of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut lo = 0;
        let mut up = 0;
        for (r, c, _) in self.triplets() {
            if c < r {
                lo = lo.max(r - c);
            } else {
                up = up.max(c - r);
            }
        }
        (lo, up)
    }

    /// Dense copy.
    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// One `row col value` line per stored entry, sorted by row then column.
    pub fn to_triplet_text(&self) -> String {
        let mut s = String::new();
        for (r, c, v) in self.triplets() {
            let _ = writeln!(s, "{r} {c} {v:e}");
        }
        s
    }

    /// Parse the triplet text format. Dimensions must be supplied.
    pub fn from_triplet_text(nrows: usize, ncols: usize, text: &str) -> Result<Self> {
        let mut trip = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| tok.ok_or(()).and_then(|t| t.parse::<f64>().map_err(|_| ()));
            let r = it.next().and_then(|t| t.parse::<usize>().ok());
            let c = it.next().and_then(|t| t.parse::<usize>().ok());
            let v = parse(it.next()).ok();
            match (r, c, v) {
                (Some(r), Some(c), Some(v)) if r < nrows && c < ncols => trip.push((r, c, v)),
                _ => {
                    return Err(Error::Contract(format!(
                        "line {}: expected `row col value` within {nrows}x{ncols}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(Self::from_triplets(nrows, ncols, trip))
    }
}

/// Banded LU factorization with partial pivoting (LAPACK `gbtf2` layout).
///
/// Row `i` stores columns `i - kl ..= i + ku + kl`; the extra `kl` upper
/// diagonals absorb fill from row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factor a square CSR matrix.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::contract("LU of a non-square matrix"));
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for (r, c, v) in a.triplets() {
            band[r * width + (c + kl - r)] = v;
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = band[idx(k, k)].abs();
            for i in (k + 1)..=last_row {
                let v = band[idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            if best <= 1e-14 * scale {
                return Err(Error::Singular { row: k, pivot: best });
            }
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    band.swap(idx(k, j), idx(p, j));
                }
            }
            let piv = band[idx(k, k)];
            for i in (k + 1)..=last_row {
                let m = band[idx(i, k)] / piv;
                lower[k * kl + (i - k - 1)] = m;
                band[idx(i, k)] = 0.0;
                if m != 0.0 {
                    for j in (k + 1)..=last_col {
                        band[idx(i, j)] -= m * band[idx(k, j)];
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            width,
            band,
            lower,
            pivots,
        })
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "rhs length");
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in (k + 1)..=(k + kl).min(n - 1) {
                    x[i] -= self.lower[k * kl + (i - k - 1)] * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..=(i + ku + kl).min(n - 1) {
                s -= self.band[i * w + (j + kl - i)] * x[j];
            }
            x[i] = s / self.band[i * w + kl];
        }
        x
    }
}

/// Banded Cholesky `A = L L'` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    kd: usize,
    /// Row `i` stores `L[i, i-kd ..= i]`.
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factor the lower triangle of `a`; fails with [`Error::Singular`] when not positive definite.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::contract("Cholesky of a non-square matrix"));
        }
        let n = a.nrows();
        let (kd, _) = a.bandwidths();
        let w = kd + 1;
        let mut band = vec![0.0; n * w];
        let idx = |i: usize, j: usize| i * w + (j + kd - i);
        for (r, c, v) in a.triplets() {
            if c <= r {
                band[idx(r, c)] = v;
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..n {
            let j0 = i.saturating_sub(kd);
            for j in j0..=i {
                let mut s = band[idx(i, j)];
                let k0 = j0.max(j.saturating_sub(kd));
                for k in k0..j {
                    s -= band[idx(i, k)] * band[idx(j, k)];
                }
                if j == i {
                    if !(s > 1e-14 * scale) {
                        return Err(Error::Singular { row: i, pivot: s });
                    }
                    band[idx(i, i)] = libm::sqrt(s);
                } else {
                    band[idx(i, j)] = s / band[idx(j, j)];
                }
            }
        }
        Ok(BandedCholesky { n, kd, band })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        let idx = |i: usize, j: usize| i * w + (j + kd - i);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(kd)..i {
                s -= self.band[idx(i, k)] * y[k];
            }
            y[i] = s / self.band[idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..=(i + kd).min(n.saturating_sub(1)) {
                s -= self.band[idx(k, i)] * y[k];
            }
            y[i] = s / self.band[idx(i, i)];
        }
        y
    }
}
