//! Homogeneous polynomials, symmetric tensors and flattenings.
//!
//! Monomials of a fixed degree are ordered graded-lexicographically:
//! `x₁² < x₁x₂ < x₂²`, i.e. larger leading exponents come first. The same
//! order indexes dense coefficient vectors everywhere in the crate.
//! Coefficients are stored raw; multinomial factors are only introduced when
//! converting to a [`SymmetricTensor`].

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;

use crate::error::{PnnError, Result};
use crate::linalg::Mat;
use crate::scalar::{format_rational, parse_rational, Rational, Scalar};

/// Exponent vector of a monomial.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    /// Sorted tuple of variable indices `j₁ ≤ … ≤ j_r` (0-based).
    pub fn to_sorted_tuple(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree() as usize);
        for (var, &e) in self.0.iter().enumerate() {
            out.extend(std::iter::repeat_n(var, e as usize));
        }
        out
    }

    /// Inverse of [`MultiIndex::to_sorted_tuple`]; order of `tuple` is irrelevant.
    pub fn from_tuple(n_vars: usize, tuple: &[usize]) -> Self {
        let mut e = vec![0u32; n_vars];
        for &j in tuple {
            e[j] += 1;
        }
        MultiIndex(e)
    }

    /// Evaluate the monomial at `x`.
    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        self.0
            .iter()
            .zip(x)
            .filter(|(e, _)| **e > 0)
            .fold(S::one(), |acc, (&e, xi)| acc * xi.pow(e))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// `binom(n, k)` with overflow detection.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// `binom(n, k)` for sizes that are known to be small; panics on overflow.
pub fn binom(n: usize, k: usize) -> usize {
    binomial(n as u64, k as u64).expect("binomial coefficient overflow") as usize
}

/// Exact `binom(n, k)` as a big integer.
pub fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Number of monomials of `degree` in `n_vars` variables.
pub fn monomial_count(n_vars: usize, degree: usize) -> usize {
    if n_vars == 0 {
        return usize::from(degree == 0);
    }
    binom(n_vars + degree - 1, degree)
}

/// All monomials of `degree` in `n_vars` variables, graded-lex order.
pub fn enumerate_multiindices(n_vars: usize, degree: usize) -> Vec<MultiIndex> {
    assert!(n_vars >= 1, "at least one variable required");
    let mut out = Vec::with_capacity(monomial_count(n_vars, degree));
    let mut cur = vec![0u32; n_vars];
    fill(&mut cur, 0, degree as u32, &mut out);
    out
}

fn fill(cur: &mut Vec<u32>, pos: usize, rem: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == cur.len() {
        cur[pos] = rem;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for v in (0..=rem).rev() {
        cur[pos] = v;
        fill(cur, pos + 1, rem - v, out);
    }
    cur[pos] = 0;
}

/// Position of `idx` in [`enumerate_multiindices`] of its own degree.
pub fn monomial_rank(idx: &[u32]) -> usize {
    let n = idx.len();
    let mut rem: u32 = idx.iter().sum();
    let mut rank = 0;
    for (i, &e) in idx.iter().enumerate().take(n.saturating_sub(1)) {
        let parts = n - i - 1;
        for v in e + 1..=rem {
            rank += monomial_count(parts, (rem - v) as usize);
        }
        rem -= e;
    }
    rank
}

/// `r! / (i₁!⋯i_n!)` with overflow detection.
pub fn multinomial(index: &MultiIndex) -> Result<u64> {
    let mut acc: u64 = 1;
    let mut total: u64 = 0;
    for &e in &index.0 {
        total += e as u64;
        let b = binomial(total, e as u64)
            .ok_or_else(|| PnnError::Computation(format!("multinomial of {index:?} overflows u64")))?;
        acc = acc
            .checked_mul(b)
            .ok_or_else(|| PnnError::Computation(format!("multinomial of {index:?} overflows u64")))?;
    }
    Ok(acc)
}

/// Exact multinomial coefficient as a big integer.
pub fn multinomial_big(index: &MultiIndex) -> BigUint {
    let mut acc = BigUint::one();
    let mut total: u64 = 0;
    for &e in &index.0 {
        total += e as u64;
        acc *= binomial_big(total, e as u64);
    }
    acc
}

/// A homogeneous polynomial stored densely in graded-lex order.
#[derive(Clone, PartialEq, Debug)]
pub struct HomogeneousPoly<S> {
    n_vars: usize,
    degree: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> HomogeneousPoly<S> {
    pub fn zero(n_vars: usize, degree: usize) -> Self {
        HomogeneousPoly { n_vars, degree, coeffs: vec![S::zero(); monomial_count(n_vars, degree)] }
    }

    pub fn from_dense(n_vars: usize, degree: usize, coeffs: Vec<S>) -> Result<Self> {
        let expected = monomial_count(n_vars, degree);
        if coeffs.len() != expected {
            return Err(PnnError::InvalidInput(format!(
                "expected {expected} coefficients for degree {degree} in {n_vars} variables, got {}",
                coeffs.len()
            )));
        }
        Ok(HomogeneousPoly { n_vars, degree, coeffs })
    }

    /// Build from `(exponents, coefficient)` pairs; repeated monomials add up.
    pub fn from_terms(n_vars: usize, degree: usize, terms: &[(Vec<u32>, S)]) -> Result<Self> {
        let mut p = Self::zero(n_vars, degree);
        for (e, c) in terms {
            if e.len() != n_vars || e.iter().sum::<u32>() as usize != degree {
                return Err(PnnError::InvalidInput(format!(
                    "monomial {e:?} is not of degree {degree} in {n_vars} variables"
                )));
            }
            let k = monomial_rank(e);
            p.coeffs[k] = p.coeffs[k].clone() + c.clone();
        }
        Ok(p)
    }

    /// The linear form `Σ vᵢ xᵢ`.
    pub fn linear(v: &[S]) -> Self {
        let n = v.len();
        let mut p = Self::zero(n, 1);
        for (i, vi) in v.iter().enumerate() {
            // x_i has exponent e_i; its graded-lex rank is i.
            p.coeffs[i] = vi.clone();
        }
        p
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.coeffs
    }

    pub fn coeff(&self, idx: &MultiIndex) -> S {
        if idx.n_vars() != self.n_vars || idx.degree() as usize != self.degree {
            return S::zero();
        }
        self.coeffs[monomial_rank(&idx.0)].clone()
    }

    pub fn set_coeff(&mut self, idx: &MultiIndex, value: S) {
        assert_eq!(idx.n_vars(), self.n_vars);
        assert_eq!(idx.degree() as usize, self.degree);
        self.coeffs[monomial_rank(&idx.0)] = value;
    }

    pub fn basis(&self) -> Vec<MultiIndex> {
        enumerate_multiindices(self.n_vars, self.degree)
    }

    /// Nonzero terms in graded-lex order.
    pub fn terms(&self) -> Vec<(MultiIndex, S)> {
        self.basis()
            .into_iter()
            .zip(self.coeffs.iter().cloned())
            .filter(|(_, c)| !c.is_zero())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_zero)
    }

    pub fn eval(&self, x: &[S]) -> S {
        assert_eq!(x.len(), self.n_vars);
        self.basis()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| !c.is_zero())
            .fold(S::zero(), |acc, (m, c)| acc + c.clone() * m.eval(x))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.n_vars, self.degree), (other.n_vars, other.degree));
        HomogeneousPoly {
            n_vars: self.n_vars,
            degree: self.degree,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        HomogeneousPoly {
            n_vars: self.n_vars,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n_vars, other.n_vars);
        let degree = self.degree + other.degree;
        let mut out = Self::zero(self.n_vars, degree);
        let lhs: Vec<_> = self.terms();
        let rhs: Vec<_> = other.terms();
        let mut buf = vec![0u32; self.n_vars];
        for (a, ca) in &lhs {
            for (b, cb) in &rhs {
                for k in 0..self.n_vars {
                    buf[k] = a.0[k] + b.0[k];
                }
                let pos = monomial_rank(&buf);
                out.coeffs[pos] = out.coeffs[pos].clone() + ca.clone() * cb.clone();
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = HomogeneousPoly { n_vars: self.n_vars, degree: 0, coeffs: vec![S::one()] };
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Convert every coefficient to another backend.
    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> HomogeneousPoly<T> {
        HomogeneousPoly { n_vars: self.n_vars, degree: self.degree, coeffs: self.coeffs.iter().map(f).collect() }
    }
}

/// `scale · (v · x)^r`, expanded with multinomial coefficients.
pub fn power_form<S: Scalar>(v: &[S], r: u32, scale: &S) -> HomogeneousPoly<S> {
    assert!(!v.is_empty(), "power_form needs at least one variable");
    let basis = enumerate_multiindices(v.len(), r as usize);
    let coeffs = basis
        .iter()
        .map(|m| scale.clone() * S::from_biguint(&multinomial_big(m)) * m.eval(v))
        .collect();
    HomogeneousPoly { n_vars: v.len(), degree: r as usize, coeffs }
}

/// Symmetric tensor stored once per orbit, indexed like the monomials.
#[derive(Clone, PartialEq, Debug)]
pub struct SymmetricTensor<S> {
    dim: usize,
    order: usize,
    entries: Vec<S>,
}

impl<S: Scalar> SymmetricTensor<S> {
    pub fn zero(dim: usize, order: usize) -> Self {
        SymmetricTensor { dim, order, entries: vec![S::zero(); monomial_count(dim, order)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Entry at any index tuple; symmetric positions share one value.
    pub fn get(&self, tuple: &[usize]) -> S {
        assert_eq!(tuple.len(), self.order);
        let idx = MultiIndex::from_tuple(self.dim, tuple);
        self.entries[monomial_rank(&idx.0)].clone()
    }

    pub fn set(&mut self, tuple: &[usize], value: S) {
        assert_eq!(tuple.len(), self.order);
        let idx = MultiIndex::from_tuple(self.dim, tuple);
        self.entries[monomial_rank(&idx.0)] = value;
    }

    /// One value per sorted tuple, in graded-lex order of the matching monomials.
    pub fn orbit_entries(&self) -> &[S] {
        &self.entries
    }

    /// `v ⊗ ⋯ ⊗ v` (order copies).
    pub fn outer_power(v: &[S], order: usize) -> Self {
        let basis = enumerate_multiindices(v.len(), order);
        SymmetricTensor { dim: v.len(), order, entries: basis.iter().map(|m| m.eval(v)).collect() }
    }

    pub fn to_dense(&self) -> DenseTensor<S> {
        let shape = vec![self.dim; self.order];
        let total = self.dim.pow(self.order as u32);
        let mut data = Vec::with_capacity(total);
        let mut tuple = vec![0usize; self.order];
        for _ in 0..total {
            data.push(self.get(&tuple));
            increment(&mut tuple, &shape);
        }
        DenseTensor { shape, data }
    }

    pub fn flatten(&self, row_part: &[usize]) -> Result<Flattening<S>> {
        self.to_dense().flatten(row_part)
    }

    pub fn is_rank_one(&self, tol: f64) -> RankOneVerdict {
        self.to_dense().is_rank_one(tol)
    }
}

/// Coefficients divided by multinomials so the tensor re-expands to `p`.
pub fn poly_to_tensor<S: Scalar>(p: &HomogeneousPoly<S>) -> SymmetricTensor<S> {
    let entries = p
        .basis()
        .iter()
        .zip(p.coeffs())
        .map(|(m, c)| {
            c.div(&S::from_biguint(&multinomial_big(m)))
                .expect("multinomial coefficient vanishes in this backend")
        })
        .collect();
    SymmetricTensor { dim: p.n_vars(), order: p.degree(), entries }
}

pub fn tensor_to_poly<S: Scalar>(t: &SymmetricTensor<S>) -> HomogeneousPoly<S> {
    let basis = enumerate_multiindices(t.dim, t.order);
    let coeffs = basis
        .iter()
        .zip(&t.entries)
        .map(|(m, v)| v.clone() * S::from_biguint(&multinomial_big(m)))
        .collect();
    HomogeneousPoly { n_vars: t.dim, degree: t.order, coeffs }
}

fn increment(tuple: &mut [usize], shape: &[usize]) {
    for k in (0..tuple.len()).rev() {
        tuple[k] += 1;
        if tuple[k] < shape[k] {
            return;
        }
        tuple[k] = 0;
    }
}

/// A general dense tensor, row-major with the first mode most significant.
#[derive(Clone, PartialEq, Debug)]
pub struct DenseTensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

/// A matrix reshaping of a tensor along a bipartition of its modes.
#[derive(Clone, PartialEq, Debug)]
pub struct Flattening<S> {
    pub row_part: Vec<usize>,
    pub col_part: Vec<usize>,
    pub matrix: Mat<S>,
}

/// Outcome of a rank-one test.
#[derive(Clone, Debug, PartialEq)]
pub enum RankOneVerdict {
    Zero,
    RankOne,
    NotRankOne(MinorWitness),
}

impl RankOneVerdict {
    pub fn is_rank_one(&self) -> bool {
        matches!(self, RankOneVerdict::RankOne)
    }
}

/// A 2×2 minor of a flattening that does not vanish.
#[derive(Clone, Debug, PartialEq)]
pub struct MinorWitness {
    pub row_part: Vec<usize>,
    pub rows: (usize, usize),
    pub cols: (usize, usize),
    /// Value of the minor after scaling the tensor so its largest entry is ±1.
    pub normalized_value: f64,
}

impl fmt::Display for MinorWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "flattening with row modes {:?}: minor rows {:?} cols {:?} = {:.6e} (normalized)",
            self.row_part, self.rows, self.cols, self.normalized_value
        )
    }
}

impl<S: Scalar> DenseTensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        let total: usize = shape.iter().product();
        if shape.is_empty() || data.len() != total {
            return Err(PnnError::InvalidInput(format!(
                "tensor of shape {shape:?} needs {total} entries, got {}",
                data.len()
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    fn offset(&self, tuple: &[usize]) -> usize {
        tuple.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn get(&self, tuple: &[usize]) -> S {
        self.data[self.offset(tuple)].clone()
    }

    /// Append a mode: `blocks[k]` becomes the slice at last index `k`.
    pub fn stack(blocks: &[DenseTensor<S>]) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| PnnError::InvalidInput("nothing to stack".into()))?;
        if blocks.iter().any(|b| b.shape != first.shape) {
            return Err(PnnError::InvalidInput("stacked tensors differ in shape".into()));
        }
        let k = blocks.len();
        let mut data = Vec::with_capacity(first.data.len() * k);
        for i in 0..first.data.len() {
            for b in blocks {
                data.push(b.data[i].clone());
            }
        }
        let mut shape = first.shape.clone();
        shape.push(k);
        Ok(DenseTensor { shape, data })
    }

    pub fn flatten(&self, row_part: &[usize]) -> Result<Flattening<S>> {
        let order = self.order();
        let mut rows: Vec<usize> = row_part.to_vec();
        rows.sort_unstable();
        rows.dedup();
        if rows.is_empty() || rows.len() >= order || rows.iter().any(|&m| m >= order) || rows.len() != row_part.len() {
            return Err(PnnError::InvalidInput(format!(
                "row modes {row_part:?} must be a nonempty proper subset of 0..{order}"
            )));
        }
        let cols: Vec<usize> = (0..order).filter(|m| !rows.contains(m)).collect();
        let row_shape: Vec<usize> = rows.iter().map(|&m| self.shape[m]).collect();
        let col_shape: Vec<usize> = cols.iter().map(|&m| self.shape[m]).collect();
        let nr: usize = row_shape.iter().product();
        let nc: usize = col_shape.iter().product();
        let mut matrix = Mat::zeros(nr, nc);
        let mut full = vec![0usize; order];
        let mut ri = vec![0usize; rows.len()];
        for r in 0..nr {
            let mut ci = vec![0usize; cols.len()];
            for c in 0..nc {
                for (k, &m) in rows.iter().enumerate() {
                    full[m] = ri[k];
                }
                for (k, &m) in cols.iter().enumerate() {
                    full[m] = ci[k];
                }
                matrix[(r, c)] = self.get(&full);
                increment(&mut ci, &col_shape);
            }
            increment(&mut ri, &row_shape);
        }
        Ok(Flattening { row_part: rows, col_part: cols, matrix })
    }

    /// Every bipartition up to swapping rows and columns (mode 0 on the row side).
    pub fn bipartitions(&self) -> Vec<Vec<usize>> {
        let order = self.order();
        let mut out = Vec::new();
        if order < 2 {
            return out;
        }
        for mask in 0u64..(1 << (order - 1)) {
            let mut part = vec![0];
            for m in 1..order {
                if mask >> (m - 1) & 1 == 1 {
                    part.push(m);
                }
            }
            if part.len() < order {
                out.push(part);
            }
        }
        out
    }

    /// All 2×2 minors of all flattenings vanish, relative to the largest
    /// entry. Exact scalars ignore `tol`.
    pub fn is_rank_one(&self, tol: f64) -> RankOneVerdict {
        let Some((pivot_pos, _)) = self
            .data
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .max_by(|a, b| {
                a.1.to_f64().abs().partial_cmp(&b.1.to_f64().abs()).unwrap_or(Ordering::Equal)
            })
        else {
            return RankOneVerdict::Zero;
        };
        let pivot = self.data[pivot_pos].clone();
        let inv = pivot.inv().expect("pivot is nonzero");
        let normalized: Vec<S> = self.data.iter().map(|v| v.clone() * inv.clone()).collect();
        let t = DenseTensor { shape: self.shape.clone(), data: normalized };
        let pivot_tuple = unravel(pivot_pos, &self.shape);
        if self.order() < 2 {
            return RankOneVerdict::RankOne;
        }
        for part in self.bipartitions() {
            let fl = t.flatten(&part).expect("valid bipartition");
            let (p, q) = flat_position(&pivot_tuple, &fl, &self.shape);
            let m = &fl.matrix;
            let mpq = m[(p, q)].clone();
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    let minor = m[(i, j)].clone() * mpq.clone() - m[(i, q)].clone() * m[(p, j)].clone();
                    if !minor.is_negligible(tol) {
                        return RankOneVerdict::NotRankOne(MinorWitness {
                            row_part: fl.row_part.clone(),
                            rows: (p, i),
                            cols: (q, j),
                            normalized_value: minor.to_f64(),
                        });
                    }
                }
            }
        }
        RankOneVerdict::RankOne
    }
}

fn unravel(mut pos: usize, shape: &[usize]) -> Vec<usize> {
    let mut t = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        t[k] = pos % shape[k];
        pos /= shape[k];
    }
    t
}

fn flat_position<S>(tuple: &[usize], fl: &Flattening<S>, shape: &[usize]) -> (usize, usize) {
    let r = fl.row_part.iter().fold(0, |acc, &m| acc * shape[m] + tuple[m]);
    let c = fl.col_part.iter().fold(0, |acc, &m| acc * shape[m] + tuple[m]);
    (r, c)
}

/// Parse one or more polynomials in the text format
///
/// ```text
/// 2 2
/// 2,0	1
/// 1,1	-1/2
/// ```
///
/// A header line `n_vars degree` starts each polynomial; each term line is an
/// exponent tuple, a tab, and a decimal or rational coefficient. Blank lines
/// and `#` comments are ignored.
pub fn parse_polys(text: &str) -> Result<Vec<HomogeneousPoly<Rational>>> {
    let mut out = Vec::new();
    let mut current: Option<(usize, usize, Vec<(Vec<u32>, Rational)>)> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| PnnError::Parse { line: lineno + 1, msg };
        if let Some((tuple, coeff)) = line.split_once('\t') {
            let Some((n, d, terms)) = current.as_mut() else {
                return Err(err("term before header line".into()));
            };
            let exps = parse_tuple(tuple).ok_or_else(|| err(format!("bad exponent tuple `{tuple}`")))?;
            if exps.len() != *n || exps.iter().sum::<u32>() as usize != *d {
                return Err(err(format!("monomial {exps:?} does not match header `{n} {d}`")));
            }
            let c = parse_rational(coeff).ok_or_else(|| err(format!("bad coefficient `{coeff}`")))?;
            terms.push((exps, c));
        } else {
            let nums: Vec<&str> = line.split_whitespace().collect();
            let header = match nums.as_slice() {
                [n, d] => n.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
                _ => None,
            };
            let Some((n, d)) = header.filter(|(n, _)| *n >= 1) else {
                return Err(err(format!("expected header `n_vars degree` or a tab-separated term, got `{line}`")));
            };
            if let Some((pn, pd, terms)) = current.take() {
                out.push(HomogeneousPoly::from_terms(pn, pd, &terms)?);
            }
            current = Some((n, d, Vec::new()));
        }
    }
    if let Some((n, d, terms)) = current {
        out.push(HomogeneousPoly::from_terms(n, d, &terms)?);
    }
    if out.is_empty() {
        return Err(PnnError::Parse { line: 0, msg: "no polynomial found".into() });
    }
    Ok(out)
}

fn parse_tuple(s: &str) -> Option<Vec<u32>> {
    let s = s.trim().trim_start_matches('(').trim_end_matches(')');
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().ok())
        .collect()
}

/// Render a polynomial in the text format read by [`parse_polys`].
pub fn format_poly(p: &HomogeneousPoly<Rational>) -> String {
    let mut s = format!("{} {}\n", p.n_vars(), p.degree());
    for (m, c) in p.terms() {
        let exps: Vec<String> = m.0.iter().map(u32::to_string).collect();
        s.push_str(&format!("{}\t{}\n", exps.join(","), format_rational(&c)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::from_i64(n)
    }

    fn sample_cubic() -> HomogeneousPoly<Rational> {
        HomogeneousPoly::from_terms(2, 3, &[(vec![3, 0], q(1)), (vec![1, 2], q(3)), (vec![0, 3], q(3))]).unwrap()
    }

    #[test]
    fn enumeration_order_and_counts() {
        let b = enumerate_multiindices(2, 2);
        assert_eq!(b.iter().map(|m| m.0.clone()).collect::<Vec<_>>(), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(enumerate_multiindices(1, 5), vec![MultiIndex(vec![5])]);
        assert_eq!(enumerate_multiindices(3, 4).len(), 15);
        assert_eq!(enumerate_multiindices(3, 0), vec![MultiIndex(vec![0, 0, 0])]);
    }

    #[test]
    fn rank_matches_enumeration_position() {
        for n in 1..5 {
            for d in 0..6 {
                let b = enumerate_multiindices(n, d);
                assert!(b.windows(2).all(|w| w[0] < w[1]));
                for (i, m) in b.iter().enumerate() {
                    assert_eq!(monomial_rank(&m.0), i);
                }
            }
        }
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(multinomial(&MultiIndex(vec![2, 0])).unwrap(), 1);
        assert_eq!(multinomial(&MultiIndex(vec![1, 1])).unwrap(), 2);
        assert_eq!(multinomial(&MultiIndex(vec![2, 1, 1])).unwrap(), 12);
        assert!(multinomial(&MultiIndex(vec![40, 40, 40])).is_err());
        assert_eq!(multinomial_big(&MultiIndex(vec![2, 1, 1])), BigUint::from(12u32));
    }

    #[test]
    fn sample_cubic_flattening() {
        let t = poly_to_tensor(&sample_cubic());
        let fl = t.flatten(&[0, 1]).unwrap();
        let expected = Mat::from_rows(&[
            vec![q(1), q(0)],
            vec![q(0), q(1)],
            vec![q(0), q(1)],
            vec![q(1), q(3)],
        ]);
        assert_eq!(fl.matrix, expected);
        assert_eq!(fl.matrix.transpose(), t.flatten(&[2]).unwrap().matrix);
        assert_eq!(tensor_to_poly(&t), sample_cubic());
        assert!(!t.is_rank_one(0.0).is_rank_one());
    }

    #[test]
    fn order_two_flattening_is_the_matrix() {
        let p = HomogeneousPoly::from_terms(2, 2, &[(vec![2, 0], q(1)), (vec![1, 1], q(4)), (vec![0, 2], q(5))]).unwrap();
        let t = poly_to_tensor(&p);
        let m = t.flatten(&[0]).unwrap().matrix;
        assert_eq!(m, Mat::from_rows(&[vec![q(1), q(2)], vec![q(2), q(5)]]));
    }

    #[test]
    fn flatten_rejects_improper_parts() {
        let t = SymmetricTensor::<f64>::zero(2, 3);
        assert!(t.flatten(&[]).is_err());
        assert!(t.flatten(&[0, 1, 2]).is_err());
        assert!(t.flatten(&[3]).is_err());
    }

    #[test]
    fn single_entry_tensor_is_a_square() {
        let mut t = SymmetricTensor::zero(2, 2);
        t.set(&[0, 0], q(1));
        assert_eq!(tensor_to_poly(&t).terms(), vec![(MultiIndex(vec![2, 0]), q(1))]);
    }

    #[test]
    fn rank_one_verdicts() {
        let v = [q(1), q(2)];
        assert!(SymmetricTensor::outer_power(&v, 3).is_rank_one(0.0).is_rank_one());
        let w = [q(1), q(-1)];
        let sum = tensor_to_poly(&SymmetricTensor::outer_power(&v, 3)).add(&tensor_to_poly(&SymmetricTensor::outer_power(&w, 3)));
        assert!(matches!(poly_to_tensor(&sum).is_rank_one(0.0), RankOneVerdict::NotRankOne(_)));
        assert_eq!(SymmetricTensor::<f64>::zero(3, 2).is_rank_one(1e-9), RankOneVerdict::Zero);
    }

    #[test]
    fn power_form_examples() {
        let p = power_form(&[q(1), q(1)], 2, &q(1));
        assert_eq!(p.coeffs(), &[q(1), q(2), q(1)]);
        let (a, b, s) = (q(3), q(-2), q(5));
        let p = power_form(&[a.clone(), b.clone()], 2, &s);
        assert_eq!(p.coeffs(), &[s.clone() * a.clone() * a.clone(), s.clone() * q(2) * a * b.clone(), s * b.clone() * b]);
    }

    #[test]
    fn mul_and_pow_agree_with_power_form() {
        let v = [q(2), q(-1), q(3)];
        assert_eq!(HomogeneousPoly::linear(&v).pow(4), power_form(&v, 4, &q(1)));
    }

    #[test]
    fn text_format_roundtrip() {
        let text = format_poly(&sample_cubic());
        assert_eq!(parse_polys(&text).unwrap(), vec![sample_cubic()]);
        let two = parse_polys("# two quadrics\n2 2\n(2,0)\t0.5\n1 1\t-3/4\n2 2\n0,2\t1e1\n").unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].coeffs()[0], Rational::new(1.into(), 2.into()));
        assert_eq!(two[1].coeffs()[2], q(10));
        assert!(parse_polys("2 2\n3,0\t1\n").is_err());
        assert!(parse_polys("1,1\t1\n").is_err());
    }
}
