//! Dense matrices over a [`Scalar`] with Gaussian elimination, plus an SVD
//! rank for floating point.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: fmt::Debug> fmt::Debug for Mat<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[r * self.cols..(r + 1) * self.cols])?;
        }
        Ok(())
    }
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (r, c): (usize, usize)) -> &S {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row.iter().cloned());
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<S> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Mat<T> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map(|x| x.clone() * s.clone())
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out[(i, j)].clone() + a.clone() * rhs[(k, j)].clone();
                    out[(i, j)] = v;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() - b.clone()).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::is_zero)
    }

    /// Keep the listed rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])].clone())
    }

    pub fn to_f64(&self) -> Mat<f64> {
        self.map(Scalar::to_f64)
    }

    /// Reduced row echelon form in place; returns pivot columns.
    ///
    /// Entries with `is_negligible(tol)` are treated as zero, so `tol` only
    /// matters for floats.
    pub fn rref_in_place(&mut self, tol: f64) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let mut best = None;
            let mut best_w = 0.0;
            for r in row..self.rows {
                let v = &self[(r, col)];
                if v.is_negligible(tol) {
                    continue;
                }
                let w = v.pivot_weight();
                if best.is_none() || w > best_w {
                    best = Some(r);
                    best_w = w;
                }
            }
            let Some(p) = best else { continue };
            self.swap_rows(p, row);
            let inv = self[(row, col)].inv().expect("pivot is nonzero");
            for c in col..self.cols {
                let v = self[(row, c)].clone() * inv.clone();
                self[(row, c)] = v;
            }
            for r in 0..self.rows {
                if r == row {
                    continue;
                }
                let f = self[(r, col)].clone();
                if f.is_zero() {
                    continue;
                }
                for c in col..self.cols {
                    let v = self[(r, c)].clone() - f.clone() * self[(row, c)].clone();
                    self[(r, c)] = v;
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Rank by elimination. Exact for exact scalars.
    pub fn rank(&self) -> usize {
        self.clone().rank_consuming()
    }

    fn rank_consuming(mut self) -> usize {
        // Forward elimination only; cheaper than full rref.
        let mut rank = 0;
        for col in 0..self.cols {
            if rank == self.rows {
                break;
            }
            let Some(p) = (rank..self.rows)
                .filter(|&r| !self[(r, col)].is_zero())
                .max_by(|&a, &b| {
                    self[(a, col)]
                        .pivot_weight()
                        .partial_cmp(&self[(b, col)].pivot_weight())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
            else {
                continue;
            };
            self.swap_rows(p, rank);
            let inv = self[(rank, col)].inv().expect("pivot is nonzero");
            for r in rank + 1..self.rows {
                let f = self[(r, col)].clone();
                if f.is_zero() {
                    continue;
                }
                let f = f * inv.clone();
                for c in col..self.cols {
                    let v = self[(r, c)].clone() - f.clone() * self[(rank, c)].clone();
                    self[(r, c)] = v;
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn determinant(&self) -> S {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let mut m = self.clone();
        let n = self.rows;
        let mut det = S::one();
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| !m[(r, col)].is_zero()) else {
                return S::zero();
            };
            if p != col {
                m.swap_rows(p, col);
                det = -det;
            }
            let pivot = m[(col, col)].clone();
            det = det * pivot.clone();
            let inv = pivot.inv().expect("pivot is nonzero");
            for r in col + 1..n {
                let f = m[(r, col)].clone();
                if f.is_zero() {
                    continue;
                }
                let f = f * inv.clone();
                for c in col..n {
                    let v = m[(r, c)].clone() - f.clone() * m[(col, c)].clone();
                    m[(r, c)] = v;
                }
            }
        }
        det
    }

    /// Solve `self · X = rhs` for square nonsingular `self`.
    pub fn solve(&self, rhs: &Self, tol: f64) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "solve needs a square system");
        assert_eq!(self.rows, rhs.rows, "right-hand side has wrong height");
        let n = self.rows;
        let m = rhs.cols;
        let mut aug = Self::zeros(n, n + m);
        for r in 0..n {
            for c in 0..n {
                aug[(r, c)] = self[(r, c)].clone();
            }
            for c in 0..m {
                aug[(r, n + c)] = rhs[(r, c)].clone();
            }
        }
        let pivots = aug.rref_in_place(tol);
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some(Self::from_fn(n, m, |r, c| aug[(r, n + c)].clone()))
    }

    pub fn inverse(&self, tol: f64) -> Option<Self> {
        self.solve(&Self::identity(self.rows), tol)
    }
}

impl Mat<f64> {
    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn singular_values(&self) -> Vec<f64> {
        if self.rows == 0 || self.cols == 0 {
            return Vec::new();
        }
        let mut s: Vec<f64> = self.to_nalgebra().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        s
    }

    /// Numerical rank with singular values below `rel_tol · σ_max` treated as zero.
    pub fn svd_rank(&self, rel_tol: f64) -> SvdRank {
        SvdRank::from_singular_values(self.singular_values(), rel_tol)
    }
}

/// Numerical rank with the spectral gap at the cut.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdRank {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// `σ_rank / σ_{rank+1}`; infinite when nothing was cut or the cut value is 0.
    pub gap: f64,
}

impl SvdRank {
    pub fn from_singular_values(sv: Vec<f64>, rel_tol: f64) -> Self {
        let smax = sv.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return SvdRank { rank: 0, singular_values: sv, gap: f64::INFINITY };
        }
        let rank = sv.iter().take_while(|&&s| s > rel_tol * smax).count();
        let gap = match (rank.checked_sub(1).map(|i| sv[i]), sv.get(rank)) {
            (Some(a), Some(&b)) if b > 0.0 => a / b,
            _ => f64::INFINITY,
        };
        SvdRank { rank, singular_values: sv, gap }
    }
}

/// Numerical rank of a small dense row-major matrix given as nested rows.
pub fn rank_f64(rows: &[Vec<f64>], rel_tol: f64) -> SvdRank {
    Mat::from_rows(rows).svd_rank(rel_tol)
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
