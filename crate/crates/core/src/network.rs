//! Architectures, weights and the parameter map from weights to coefficients.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PnnError, Result};
use crate::linalg::Mat;
use crate::scalar::{format_rational, parse_rational, RandomScalar, Rational, Scalar};
use crate::symtensor::{binomial, enumerate_multiindices, monomial_count, HomogeneousPoly, MultiIndex};

/// Largest ambient dimension `coefficients` will expand by default.
pub const DEFAULT_AMBIENT_CAP: usize = 250_000;

/// Widths `(d₀,…,d_L)` and activation degree `r`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
    r: u32,
}

impl Architecture {
    pub fn new(widths: Vec<usize>, r: u32) -> Result<Self> {
        if widths.len() < 2 {
            return Err(PnnError::InvalidArchitecture(format!(
                "need at least an input and an output width, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(PnnError::InvalidArchitecture(format!("widths must be positive: {widths:?}")));
        }
        if r == 0 {
            return Err(PnnError::InvalidArchitecture("activation degree must be at least 1".into()));
        }
        let layers = widths.len() - 1;
        let degree = (r as u64)
            .checked_pow(layers as u32 - 1)
            .filter(|&d| d <= u32::MAX as u64)
            .ok_or_else(|| PnnError::InvalidArchitecture("output degree overflows".into()))?;
        let per_output = binomial(widths[0] as u64 + degree - 1, degree)
            .ok_or_else(|| PnnError::InvalidArchitecture("ambient dimension overflows".into()))?;
        per_output
            .checked_mul(*widths.last().unwrap() as u64)
            .filter(|&a| a <= usize::MAX as u64 / 2)
            .ok_or_else(|| PnnError::InvalidArchitecture("ambient dimension overflows".into()))?;
        Ok(Architecture { widths, r })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation_degree(&self) -> u32 {
        self.r
    }

    /// Number of weight matrices `L`.
    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// `r^{L−1}`.
    pub fn output_degree(&self) -> u32 {
        self.r.pow(self.layers() as u32 - 1)
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1]).sum()
    }

    /// Monomials per output polynomial.
    pub fn monomials_per_output(&self) -> usize {
        monomial_count(self.input_dim(), self.output_degree() as usize)
    }

    pub fn ambient_dim(&self) -> usize {
        self.output_dim() * self.monomials_per_output()
    }

    /// Parameter count minus the dimension of the rescaling fibres, capped by
    /// the ambient dimension.
    pub fn expected_dim(&self) -> usize {
        let hidden: usize = self.widths[1..self.widths.len() - 1].iter().sum();
        (self.param_count() - hidden).min(self.ambient_dim())
    }

    /// Shape `(rows, cols)` of `W_l`, `l` 1-based.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.widths[l], self.widths[l - 1])
    }

    /// The same widths with another activation degree.
    pub fn with_degree(&self, r: u32) -> Result<Self> {
        Architecture::new(self.widths.clone(), r)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w: Vec<String> = self.widths.iter().map(usize::to_string).collect();
        write!(f, "{}:{}", w.join("-"), self.r)
    }
}

impl FromStr for Architecture {
    type Err = PnnError;

    /// `d0-d1-...-dL:r`, e.g. `2-2-3:2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || PnnError::InvalidArchitecture(format!("expected `d0-d1-...-dL:r`, got `{s}`"));
        let (w, r) = s.trim().split_once(':').ok_or_else(bad)?;
        let widths = w
            .split('-')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        let r = r.trim().parse::<u32>().map_err(|_| bad())?;
        Architecture::new(widths, r)
    }
}

/// The weight matrices `(W₁,…,W_L)`, `W_l` of shape `d_l × d_{l−1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector<S> {
    matrices: Vec<Mat<S>>,
}

impl<S: Scalar> WeightVector<S> {
    pub fn new(arch: &Architecture, matrices: Vec<Mat<S>>) -> Result<Self> {
        check_shapes(arch, &matrices)?;
        Ok(WeightVector { matrices })
    }

    pub fn zeros(arch: &Architecture) -> Self {
        WeightVector {
            matrices: (1..=arch.layers())
                .map(|l| {
                    let (r, c) = arch.layer_shape(l);
                    Mat::zeros(r, c)
                })
                .collect(),
        }
    }

    /// Identity-like weights: `W_l[i][i] = 1`.
    pub fn identity(arch: &Architecture) -> Self {
        let mut w = Self::zeros(arch);
        for m in &mut w.matrices {
            for i in 0..m.rows().min(m.cols()) {
                m[(i, i)] = S::one();
            }
        }
        w
    }

    /// Entries of `W₁` row-major, then `W₂`, and so on.
    pub fn from_flat(arch: &Architecture, flat: &[S]) -> Result<Self> {
        if flat.len() != arch.param_count() {
            return Err(PnnError::InvalidInput(format!(
                "expected {} weights, got {}",
                arch.param_count(),
                flat.len()
            )));
        }
        let mut pos = 0;
        let matrices = (1..=arch.layers())
            .map(|l| {
                let (r, c) = arch.layer_shape(l);
                let m = Mat::from_vec(r, c, flat[pos..pos + r * c].to_vec());
                pos += r * c;
                m
            })
            .collect();
        Ok(WeightVector { matrices })
    }

    pub fn to_flat(&self) -> Vec<S> {
        self.matrices.iter().flat_map(|m| m.data().iter().cloned()).collect()
    }

    pub fn matrices(&self) -> &[Mat<S>] {
        &self.matrices
    }

    /// `W_l`, 1-based.
    pub fn layer(&self, l: usize) -> &Mat<S> {
        &self.matrices[l - 1]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut Mat<S> {
        &mut self.matrices[l - 1]
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> WeightVector<T> {
        WeightVector { matrices: self.matrices.iter().map(|m| m.map(f)).collect() }
    }

    pub fn random<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self
    where
        S: RandomScalar,
    {
        let flat: Vec<S> = (0..arch.param_count()).map(|_| S::random_weight(rng)).collect();
        Self::from_flat(arch, &flat).expect("length matches")
    }
}

fn check_shapes<S: Scalar>(arch: &Architecture, matrices: &[Mat<S>]) -> Result<()> {
    if matrices.len() != arch.layers() {
        return Err(PnnError::InvalidInput(format!(
            "architecture {arch} has {} layers, got {} matrices",
            arch.layers(),
            matrices.len()
        )));
    }
    for (l, m) in matrices.iter().enumerate() {
        let want = arch.layer_shape(l + 1);
        if m.shape() != want {
            return Err(PnnError::InvalidInput(format!(
                "W{} has shape {:?}, expected {:?}",
                l + 1,
                m.shape(),
                want
            )));
        }
    }
    Ok(())
}

/// Initialize weights i.i.d. uniform on `[-1, 1]`.
pub fn init_uniform<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> WeightVector<f64> {
    WeightVector::random(arch, rng)
}

/// Evaluate the network at `x`.
pub fn forward<S: Scalar>(arch: &Architecture, w: &WeightVector<S>, x: &[S]) -> Result<Vec<S>> {
    check_shapes(arch, &w.matrices)?;
    if x.len() != arch.input_dim() {
        return Err(PnnError::InvalidInput(format!(
            "input has length {}, expected {}",
            x.len(),
            arch.input_dim()
        )));
    }
    let mut a = x.to_vec();
    for (l, m) in w.matrices.iter().enumerate() {
        a = m.matvec(&a);
        if l + 1 < arch.layers() {
            a = a.iter().map(|z| z.pow(arch.r)).collect();
        }
    }
    Ok(a)
}

/// The `d_L` output polynomials realized by a network.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector<S> {
    polys: Vec<HomogeneousPoly<S>>,
}

impl<S: Scalar> CoefficientVector<S> {
    pub fn new(polys: Vec<HomogeneousPoly<S>>) -> Result<Self> {
        let first = polys
            .first()
            .ok_or_else(|| PnnError::InvalidInput("coefficient vector needs at least one polynomial".into()))?;
        let (n, d) = (first.n_vars(), first.degree());
        if polys.iter().any(|p| p.n_vars() != n || p.degree() != d) {
            return Err(PnnError::InvalidInput("polynomials differ in degree or variable count".into()));
        }
        Ok(CoefficientVector { polys })
    }

    pub fn polys(&self) -> &[HomogeneousPoly<S>] {
        &self.polys
    }

    pub fn n_vars(&self) -> usize {
        self.polys[0].n_vars()
    }

    pub fn degree(&self) -> usize {
        self.polys[0].degree()
    }

    pub fn outputs(&self) -> usize {
        self.polys.len()
    }

    /// Output blocks concatenated, graded-lex within each block.
    pub fn to_flat(&self) -> Vec<S> {
        self.polys.iter().flat_map(|p| p.coeffs().iter().cloned()).collect()
    }

    pub fn from_flat(n_vars: usize, degree: usize, outputs: usize, flat: &[S]) -> Result<Self> {
        let per = monomial_count(n_vars, degree);
        if flat.len() != per * outputs {
            return Err(PnnError::InvalidInput(format!(
                "expected {} coefficients, got {}",
                per * outputs,
                flat.len()
            )));
        }
        let polys = flat
            .chunks(per)
            .map(|c| HomogeneousPoly::from_dense(n_vars, degree, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(polys)
    }

    pub fn eval(&self, x: &[S]) -> Vec<S> {
        self.polys.iter().map(|p| p.eval(x)).collect()
    }

    /// Row `j` holds the coefficients of output `j`.
    pub fn as_matrix(&self) -> Mat<S> {
        Mat::from_rows(&self.polys.iter().map(|p| p.coeffs().to_vec()).collect::<Vec<_>>())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> CoefficientVector<T> {
        CoefficientVector { polys: self.polys.iter().map(|p| p.map(f)).collect() }
    }

    pub fn basis(&self) -> Vec<MultiIndex> {
        enumerate_multiindices(self.n_vars(), self.degree())
    }
}

/// Expand the network symbolically, layer by layer.
pub fn coefficients<S: Scalar>(arch: &Architecture, w: &WeightVector<S>) -> Result<CoefficientVector<S>> {
    coefficients_capped(arch, w, DEFAULT_AMBIENT_CAP)
}

pub fn coefficients_capped<S: Scalar>(
    arch: &Architecture,
    w: &WeightVector<S>,
    cap: usize,
) -> Result<CoefficientVector<S>> {
    check_shapes(arch, &w.matrices)?;
    if arch.ambient_dim() > cap {
        return Err(PnnError::Computation(format!(
            "ambient dimension {} of {arch} exceeds the expansion cap {cap}",
            arch.ambient_dim()
        )));
    }
    let n = arch.input_dim();
    let w1 = w.layer(1);
    let mut z: Vec<HomogeneousPoly<S>> = (0..w1.rows()).map(|i| HomogeneousPoly::linear(w1.row(i))).collect();
    for l in 2..=arch.layers() {
        let a: Vec<HomogeneousPoly<S>> = z.iter().map(|p| p.pow(arch.r)).collect();
        let m = w.layer(l);
        let degree = a[0].degree();
        z = (0..m.rows())
            .map(|i| {
                m.row(i)
                    .iter()
                    .zip(&a)
                    .filter(|(c, _)| !c.is_zero())
                    .fold(HomogeneousPoly::zero(n, degree), |acc, (c, p)| acc.add(&p.scale(c)))
            })
            .collect();
    }
    CoefficientVector::new(z)
}

/// An element of the rescaling-and-permutation group acting on weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryElement<S> {
    /// `D_i` for hidden layers `i = 1..L−1`.
    pub diagonals: Vec<Vec<S>>,
    /// `P_i` as index maps: `P[i][perm[i]] = 1`.
    pub permutations: Vec<Vec<usize>>,
}

impl<S: Scalar> SymmetryElement<S> {
    pub fn identity(arch: &Architecture) -> Self {
        let hidden = &arch.widths[1..arch.widths.len() - 1];
        SymmetryElement {
            diagonals: hidden.iter().map(|&d| vec![S::one(); d]).collect(),
            permutations: hidden.iter().map(|&d| (0..d).collect()).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self
    where
        S: RandomScalar,
    {
        let hidden = &arch.widths[1..arch.widths.len() - 1];
        let diagonals = hidden
            .iter()
            .map(|&d| {
                (0..d)
                    .map(|_| loop {
                        let v = S::random_weight(rng);
                        if !v.is_zero() {
                            break v;
                        }
                    })
                    .collect()
            })
            .collect();
        let permutations = hidden
            .iter()
            .map(|&d| {
                let mut p: Vec<usize> = (0..d).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        SymmetryElement { diagonals, permutations }
    }

    fn validate(&self, arch: &Architecture) -> Result<()> {
        let hidden = &arch.widths[1..arch.widths.len() - 1];
        if self.diagonals.len() != hidden.len() || self.permutations.len() != hidden.len() {
            return Err(PnnError::InvalidInput("symmetry element has the wrong number of layers".into()));
        }
        for (i, &d) in hidden.iter().enumerate() {
            if self.diagonals[i].len() != d || self.permutations[i].len() != d {
                return Err(PnnError::InvalidInput(format!("hidden layer {} has width {d}", i + 1)));
            }
            if self.diagonals[i].iter().any(Scalar::is_zero) {
                return Err(PnnError::InvalidInput("singular diagonal in symmetry element".into()));
            }
            let mut seen = vec![false; d];
            for &p in &self.permutations[i] {
                if p >= d || seen[p] {
                    return Err(PnnError::InvalidInput("invalid permutation in symmetry element".into()));
                }
                seen[p] = true;
            }
        }
        Ok(())
    }
}

/// `W₁ ← P₁D₁W₁`, `W_i ← P_iD_iW_iD_{i−1}^{−r}P_{i−1}ᵀ`, `W_L ← W_L D_{L−1}^{−r}P_{L−1}ᵀ`.
pub fn apply_symmetry<S: Scalar>(
    arch: &Architecture,
    w: &WeightVector<S>,
    g: &SymmetryElement<S>,
) -> Result<WeightVector<S>> {
    check_shapes(arch, &w.matrices)?;
    g.validate(arch)?;
    let big_l = arch.layers();
    // Layer k (0..=L) scaling and permutation; k = 0 and k = L are trivial.
    let scale = |k: usize, i: usize| -> S {
        if k == 0 || k == big_l {
            S::one()
        } else {
            g.diagonals[k - 1][i].clone()
        }
    };
    let perm = |k: usize, i: usize| -> usize {
        if k == 0 || k == big_l {
            i
        } else {
            g.permutations[k - 1][i]
        }
    };
    let inv_pow = |k: usize, j: usize| -> S {
        scale(k, j).inv().expect("diagonal validated nonzero").pow(arch.r)
    };
    let matrices = (1..=big_l)
        .map(|l| {
            let m = w.layer(l);
            Mat::from_fn(m.rows(), m.cols(), |i, j| {
                let pi = perm(l, i);
                let pj = perm(l - 1, j);
                scale(l, pi) * m[(pi, pj)].clone() * inv_pow(l - 1, pj)
            })
        })
        .collect();
    Ok(WeightVector { matrices })
}

/// Parse weight matrices: for each layer a `rows cols` line followed by the
/// rows, entries separated by whitespace or commas.
pub fn parse_weights(arch: &Architecture, text: &str) -> Result<WeightVector<Rational>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut matrices = Vec::new();
    while let Some((lineno, header)) = lines.next() {
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| PnnError::Parse { line: lineno, msg: format!("expected `rows cols`, got `{header}`") })?;
        let [rows, cols] = dims[..] else {
            return Err(PnnError::Parse { line: lineno, msg: format!("expected `rows cols`, got `{header}`") });
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, row) = lines
                .next()
                .ok_or(PnnError::Parse { line: lineno, msg: "matrix ended early".into() })?;
            let entries: Vec<Rational> = row
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| parse_rational(t).ok_or(PnnError::Parse { line: ln, msg: format!("bad entry `{t}`") }))
                .collect::<Result<_>>()?;
            if entries.len() != cols {
                return Err(PnnError::Parse { line: ln, msg: format!("expected {cols} entries") });
            }
            data.extend(entries);
        }
        matrices.push(Mat::from_vec(rows, cols, data));
    }
    WeightVector::new(arch, matrices)
}

pub fn format_weights(w: &WeightVector<Rational>) -> String {
    let mut s = String::new();
    for m in w.matrices() {
        s.push_str(&format!("{} {}\n", m.rows(), m.cols()));
        for r in 0..m.rows() {
            let row: Vec<String> = m.row(r).iter().map(format_rational).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
    }
    s
}
