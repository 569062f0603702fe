//! Backpropagation, the Jacobian of the parameter map and neurovariety
//! dimensions.
//!
//! The Jacobian is recovered without symbolic expansion: backpropagation
//! gives `∂p^{(j)}(x)/∂w` at a sample `x`, which is the evaluation at `x` of
//! the polynomial `Σ_I (∂c_I^{(j)}/∂w) x^I`. Stacking `N` generic samples
//! gives a square Vandermonde system whose solution is the Jacobian block of
//! output `j`.
//!
//! For high output degrees the number of monomials explodes, so the rank can
//! also be read off the evaluation matrix directly (see [`Method::Evaluate`]).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PnnError, Result};
use crate::linalg::Mat;
use crate::network::{Architecture, WeightVector};
use crate::rng::{derive_seed, seeded};
use crate::scalar::{Backend, Fp, RandomScalar, Rational, Scalar};
use crate::symtensor::enumerate_multiindices;

/// Largest monomial count per output for which `Method::Auto` interpolates.
pub const INTERPOLATION_LIMIT: usize = 120;
/// Singular values below this fraction of the largest count as zero.
pub const FLOAT_RANK_TOL: f64 = 1e-8;
const MAX_SAMPLE_RETRIES: usize = 8;

/// Forward and backward quantities for one input and one scalar output.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace<S> {
    /// `z^l` for `l = 1..=L`.
    pub z: Vec<Vec<S>>,
    /// `a^l` for `l = 0..=L`; `a^0 = x` and `a^L = z^L`.
    pub a: Vec<Vec<S>>,
    /// `δ^l` for `l = 1..=L`.
    pub delta: Vec<Vec<S>>,
}

fn forward_pass<S: Scalar>(arch: &Architecture, w: &WeightVector<S>, x: &[S]) -> (Vec<Vec<S>>, Vec<Vec<S>>) {
    let big_l = arch.layers();
    let r = arch.activation_degree();
    let mut z = Vec::with_capacity(big_l);
    let mut a = Vec::with_capacity(big_l + 1);
    a.push(x.to_vec());
    for l in 1..=big_l {
        let zl = w.layer(l).matvec(&a[l - 1]);
        let al = if l < big_l { zl.iter().map(|v| v.pow(r)).collect() } else { zl.clone() };
        z.push(zl);
        a.push(al);
    }
    (z, a)
}

fn backward_pass<S: Scalar>(
    arch: &Architecture,
    w: &WeightVector<S>,
    z: &[Vec<S>],
    top: Vec<S>,
) -> Vec<Vec<S>> {
    let big_l = arch.layers();
    let r = arch.activation_degree();
    let rs = S::from_i64(r as i64);
    let mut delta = vec![Vec::new(); big_l];
    delta[big_l - 1] = top;
    for l in (1..big_l).rev() {
        let next = &delta[l];
        let wn = w.layer(l + 1);
        let d: Vec<S> = (0..wn.cols())
            .map(|k| {
                let back = (0..wn.rows()).fold(S::zero(), |acc, j| acc + wn[(j, k)].clone() * next[j].clone());
                back * rs.clone() * z[l - 1][k].pow(r - 1)
            })
            .collect();
        delta[l - 1] = d;
    }
    delta
}

fn gradient_from<S: Scalar>(a: &[Vec<S>], delta: &[Vec<S>]) -> Vec<S> {
    let mut g = Vec::new();
    for (l, d) in delta.iter().enumerate() {
        for dj in d {
            for ak in &a[l] {
                g.push(dj.clone() * ak.clone());
            }
        }
    }
    g
}

fn check_input<S: Scalar>(arch: &Architecture, w: &WeightVector<S>, x: &[S]) -> Result<()> {
    WeightVector::new(arch, w.matrices().to_vec())?;
    if x.len() != arch.input_dim() {
        return Err(PnnError::InvalidInput(format!(
            "input has length {}, expected {}",
            x.len(),
            arch.input_dim()
        )));
    }
    Ok(())
}

pub fn trace<S: Scalar>(arch: &Architecture, w: &WeightVector<S>, x: &[S], output: usize) -> Result<LayerTrace<S>> {
    check_input(arch, w, x)?;
    if output >= arch.output_dim() {
        return Err(PnnError::InvalidInput(format!("output index {output} out of range")));
    }
    let (z, a) = forward_pass(arch, w, x);
    let mut top = vec![S::zero(); arch.output_dim()];
    top[output] = S::one();
    let delta = backward_pass(arch, w, &z, top);
    Ok(LayerTrace { z, a, delta })
}

/// Gradient of output `output` at `x` with respect to all weights, in the
/// flat weight order (`W₁` row-major, then `W₂`, ...).
pub fn backprop<S: Scalar>(arch: &Architecture, w: &WeightVector<S>, x: &[S], output: usize) -> Result<Vec<S>> {
    let t = trace(arch, w, x, output)?;
    Ok(gradient_from(&t.a, &t.delta))
}

/// Gradient of `⟨upstream, p_w(x)⟩` with respect to the weights; also returns `p_w(x)`.
pub fn backprop_vjp<S: Scalar>(arch: &Architecture, w: &WeightVector<S>, x: &[S], upstream: &[S]) -> (Vec<S>, Vec<S>) {
    let (z, a) = forward_pass(arch, w, x);
    let delta = backward_pass(arch, w, &z, upstream.to_vec());
    (gradient_from(&a, &delta), a[arch.layers()].clone())
}

/// Squared error `‖p_w(x) − y‖²` and its gradient with respect to the weights.
pub fn backprop_squared_error<S: Scalar>(arch: &Architecture, w: &WeightVector<S>, x: &[S], y: &[S]) -> (S, Vec<S>) {
    let (z, a) = forward_pass(arch, w, x);
    let out = &a[arch.layers()];
    let two = S::from_i64(2);
    let resid: Vec<S> = out.iter().zip(y).map(|(o, t)| o.clone() - t.clone()).collect();
    let err = resid.iter().fold(S::zero(), |acc, v| acc + v.clone() * v.clone());
    let upstream = resid.into_iter().map(|v| two.clone() * v).collect();
    let delta = backward_pass(arch, w, &z, upstream);
    (err, gradient_from(&a, &delta))
}

/// Gradients of every output at `x`, one row per output.
pub fn backprop_all<S: Scalar>(arch: &Architecture, w: &WeightVector<S>, x: &[S]) -> Vec<Vec<S>> {
    let (z, a) = forward_pass(arch, w, x);
    (0..arch.output_dim())
        .map(|j| {
            let mut top = vec![S::zero(); arch.output_dim()];
            top[j] = S::one();
            gradient_from(&a, &backward_pass(arch, w, &z, top))
        })
        .collect()
}

/// How the rank of the Jacobian is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Interpolate when the monomial count is at most [`INTERPOLATION_LIMIT`].
    Auto,
    /// Solve the Vandermonde system and take the rank of the Jacobian.
    Interpolate,
    /// Rank of the stacked gradients at `param_count + 2` generic samples.
    Evaluate,
}

impl Method {
    pub fn resolve(self, arch: &Architecture) -> Method {
        match self {
            Method::Auto if arch.monomials_per_output() <= INTERPOLATION_LIMIT => Method::Interpolate,
            Method::Auto => Method::Evaluate,
            m => m,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::Interpolate => "interpolate",
            Method::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = PnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Method::Auto),
            "interpolate" => Ok(Method::Interpolate),
            "evaluate" => Ok(Method::Evaluate),
            other => Err(PnnError::InvalidInput(format!(
                "unknown method {other:?} (expected auto, interpolate or evaluate)"
            ))),
        }
    }
}

/// Rank of a matrix: exact elimination, or SVD with the spectral gap for floats.
pub fn matrix_rank<S: Scalar>(m: &Mat<S>) -> (usize, Option<f64>) {
    match S::BACKEND {
        Backend::Float => {
            let r = m.to_f64().svd_rank(FLOAT_RANK_TOL);
            (r.rank, Some(r.gap))
        }
        _ => (m.rank(), None),
    }
}

#[derive(Clone, Debug)]
pub struct JacobianReport<S> {
    pub arch: Architecture,
    pub sample_seed: u64,
    /// `ambient_dim × param_count`, rows blocked by output, graded-lex within a block.
    pub matrix: Mat<S>,
    pub rank: usize,
    pub backend: Backend,
    pub spectral_gap: Option<f64>,
    /// Sample sets discarded because the Vandermonde matrix was singular.
    pub redraws: usize,
}

fn draw_samples<S: RandomScalar, R: Rng + ?Sized>(rng: &mut R, count: usize, dim: usize, attempt: usize) -> Vec<Vec<S>> {
    (0..count).map(|_| (0..dim).map(|_| S::random_sample(rng, attempt)).collect()).collect()
}

/// Jacobian of the parameter map at `w`, recovered from backpropagation at
/// generic samples drawn from `seed`.
pub fn jacobian<S: RandomScalar>(arch: &Architecture, w: &WeightVector<S>, seed: u64) -> Result<JacobianReport<S>> {
    WeightVector::new(arch, w.matrices().to_vec())?;
    let n = arch.monomials_per_output();
    let p = arch.param_count();
    let outputs = arch.output_dim();
    let basis = enumerate_multiindices(arch.input_dim(), arch.output_degree() as usize);
    let mut rng = seeded(seed);
    for attempt in 0..MAX_SAMPLE_RETRIES {
        let samples = draw_samples::<S, _>(&mut rng, n, arch.input_dim(), attempt);
        let vander = Mat::from_fn(n, n, |s, m| basis[m].eval(&samples[s]));
        // Right-hand side: column block j holds gradients of output j.
        let mut rhs = Mat::zeros(n, p * outputs);
        for (s, x) in samples.iter().enumerate() {
            for (j, g) in backprop_all(arch, w, x).into_iter().enumerate() {
                for (k, v) in g.into_iter().enumerate() {
                    rhs[(s, j * p + k)] = v;
                }
            }
        }
        let tol = match S::BACKEND {
            Backend::Float => 1e-13 * vander.to_f64().max_abs(),
            _ => 0.0,
        };
        let Some(sol) = vander.solve(&rhs, tol) else { continue };
        let matrix = Mat::from_fn(n * outputs, p, |row, k| {
            let (j, m) = (row / n, row % n);
            sol[(m, j * p + k)].clone()
        });
        let (rank, spectral_gap) = matrix_rank(&matrix);
        return Ok(JacobianReport {
            arch: arch.clone(),
            sample_seed: seed,
            matrix,
            rank,
            backend: S::BACKEND,
            spectral_gap,
            redraws: attempt,
        });
    }
    Err(PnnError::Computation(format!(
        "sample system stayed singular after {MAX_SAMPLE_RETRIES} draws for {arch}"
    )))
}

/// Rank of the stacked per-sample gradients. Evaluation at enough generic
/// points is injective on the Jacobian's column space, so this equals the
/// Jacobian rank with high probability and never exceeds it.
pub fn evaluation_rank<S: RandomScalar>(arch: &Architecture, w: &WeightVector<S>, seed: u64) -> (usize, Option<f64>) {
    let p = arch.param_count();
    let count = p + 2;
    let mut rng = seeded(seed);
    let samples = draw_samples::<S, _>(&mut rng, count, arch.input_dim(), 0);
    let mut rows = Vec::with_capacity(count * arch.output_dim());
    for x in &samples {
        rows.extend(backprop_all(arch, w, x));
    }
    let m = Mat::from_rows(&rows);
    matrix_rank(&m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimOptions {
    pub trials: usize,
    pub seed: u64,
    pub backend: Backend,
    pub method: Method,
}

impl Default for DimOptions {
    fn default() -> Self {
        DimOptions { trials: 5, seed: 0, backend: Backend::FiniteField, method: Method::Auto }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub arch: Architecture,
    pub dim: usize,
    pub edim: usize,
    pub ambient: usize,
    /// `edim − dim`; negative only if a float rank overshoots.
    pub defect: i64,
    pub filling: bool,
    pub trials: usize,
    /// Trials actually evaluated; stops early once `dim = edim`.
    pub trials_run: usize,
    pub backend: Backend,
    pub method: Method,
    pub seed: u64,
    /// Smallest spectral gap over the trials that attained `dim` (floats only).
    pub spectral_gap: Option<f64>,
}

impl DimensionReport {
    /// Exact backends only ever undercount, so `dim = edim` pins the dimension.
    pub fn certified(&self) -> bool {
        self.backend != Backend::Float && self.dim == self.edim
    }
}

fn trial_rank<S: RandomScalar>(arch: &Architecture, method: Method, seed: u64, trial: usize) -> Result<(usize, Option<f64>)> {
    let mut rng = seeded(derive_seed(seed, 1, trial as u64));
    let w = WeightVector::<S>::random(arch, &mut rng);
    let sample_seed = derive_seed(seed, 2, trial as u64);
    match method {
        Method::Evaluate => Ok(evaluation_rank(arch, &w, sample_seed)),
        _ => {
            let j = jacobian(arch, &w, sample_seed)?;
            Ok((j.rank, j.spectral_gap))
        }
    }
}

fn dim_generic<S: RandomScalar>(arch: &Architecture, opts: &DimOptions) -> Result<DimensionReport> {
    if opts.trials == 0 {
        return Err(PnnError::InvalidInput("at least one trial is required".into()));
    }
    let method = opts.method.resolve(arch);
    let edim = arch.expected_dim();
    let first = trial_rank::<S>(arch, method, opts.seed, 0)?;
    let mut results = vec![first];
    if first.0 < edim && opts.trials > 1 {
        let rest = (1..opts.trials)
            .into_par_iter()
            .map(|t| trial_rank::<S>(arch, method, opts.seed, t))
            .collect::<Result<Vec<_>>>()?;
        results.extend(rest);
    }
    let dim = results.iter().map(|r| r.0).max().unwrap_or(0);
    let spectral_gap = results
        .iter()
        .filter(|r| r.0 == dim)
        .filter_map(|r| r.1)
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.min(g))));
    let ambient = arch.ambient_dim();
    Ok(DimensionReport {
        arch: arch.clone(),
        dim,
        edim,
        ambient,
        defect: edim as i64 - dim as i64,
        filling: dim == ambient,
        trials: opts.trials,
        trials_run: results.len(),
        backend: S::BACKEND,
        method,
        seed: opts.seed,
        spectral_gap,
    })
}

/// Dimension of the neurovariety as the largest Jacobian rank over random weights.
pub fn neurovariety_dim(arch: &Architecture, opts: &DimOptions) -> Result<DimensionReport> {
    match opts.backend {
        Backend::Float => dim_generic::<f64>(arch, opts),
        Backend::FiniteField => dim_generic::<Fp>(arch, opts),
        Backend::Rational => dim_generic::<Rational>(arch, opts),
    }
}

/// The bound `dim V_{(d₀..dᵢ)} + dim V_{(dᵢ..d_L)} − dᵢ` for `1 ≤ i ≤ L−1`.
pub fn recursive_bound(arch: &Architecture, split: usize, opts: &DimOptions) -> Result<usize> {
    if split == 0 || split >= arch.layers() {
        return Err(PnnError::InvalidInput(format!(
            "split index must lie in 1..={}, got {split}",
            arch.layers() - 1
        )));
    }
    let r = arch.activation_degree();
    let head = Architecture::new(arch.widths()[..=split].to_vec(), r)?;
    let tail = Architecture::new(arch.widths()[split..].to_vec(), r)?;
    let dh = neurovariety_dim(&head, opts)?.dim;
    let dt = neurovariety_dim(&tail, opts)?.dim;
    Ok(dh + dt - arch.widths()[split])
}

/// Smallest recursive bound over all split positions, with the split attaining it.
pub fn best_recursive_bound(arch: &Architecture, opts: &DimOptions) -> Result<Option<(usize, usize)>> {
    let mut best: Option<(usize, usize)> = None;
    for i in 1..arch.layers() {
        let b = recursive_bound(arch, i, opts)?;
        if best.is_none_or(|(v, _)| b < v) {
            best = Some((b, i));
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub max_width: usize,
    pub min_layers: usize,
    pub max_layers: usize,
    pub min_r: u32,
    pub max_r: u32,
    /// Keep only `d₀ ≥ d₁ ≥ … ≥ d_L`.
    pub non_increasing: bool,
    /// Keep only `d_L > 1`.
    pub multi_output: bool,
    pub dim: DimOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            max_width: 3,
            min_layers: 3,
            max_layers: 4,
            min_r: 1,
            max_r: 5,
            non_increasing: true,
            multi_output: true,
            dim: DimOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub arch: String,
    pub r: u32,
    pub dim: usize,
    pub edim: usize,
    pub ambient: usize,
    pub defect: i64,
    pub filling: bool,
}

impl From<&DimensionReport> for SweepRow {
    fn from(d: &DimensionReport) -> Self {
        let w: Vec<String> = d.arch.widths().iter().map(usize::to_string).collect();
        SweepRow {
            arch: w.join("-"),
            r: d.arch.activation_degree(),
            dim: d.dim,
            edim: d.edim,
            ambient: d.ambient,
            defect: d.defect,
            filling: d.filling,
        }
    }
}

/// Architectures enumerated by a sweep, in report order.
pub fn sweep_architectures(opts: &SweepOptions) -> Vec<Architecture> {
    let mut out = Vec::new();
    if opts.max_width == 0 || opts.min_r == 0 {
        return out;
    }
    for layers in opts.min_layers.max(1)..=opts.max_layers {
        let mut widths = vec![1usize; layers + 1];
        loop {
            let keep = (!opts.non_increasing || widths.windows(2).all(|p| p[0] >= p[1]))
                && (!opts.multi_output || *widths.last().unwrap() > 1);
            if keep {
                for r in opts.min_r..=opts.max_r {
                    if let Ok(a) = Architecture::new(widths.clone(), r) {
                        out.push(a);
                    }
                }
            }
            if !next_tuple(&mut widths, opts.max_width) {
                break;
            }
        }
    }
    out
}

/// Odometer step over `1..=max` in every position, last position fastest.
fn next_tuple(t: &mut [usize], max: usize) -> bool {
    for k in (0..t.len()).rev() {
        t[k] += 1;
        if t[k] <= max {
            return true;
        }
        t[k] = 1;
    }
    false
}

/// Dimension versus expected dimension over a range of deep architectures.
pub fn conjecture_sweep(opts: &SweepOptions) -> Result<Vec<DimensionReport>> {
    sweep_architectures(opts)
        .par_iter()
        .map(|a| neurovariety_dim(a, &opts.dim))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(s: &str) -> Architecture {
        s.parse().unwrap()
    }

    fn q(n: i64) -> Rational {
        Rational::from_i64(n)
    }

    #[test]
    fn shallow_example_gradient() {
        let a = arch("2-1-1:2");
        let (w111, w112, w211) = (q(3), q(-2), q(5));
        let w = WeightVector::from_flat(&a, &[w111.clone(), w112.clone(), w211.clone()]).unwrap();
        let x = [q(7), q(4)];
        let lin = w111 * x[0].clone() + w112 * x[1].clone();
        let g = backprop(&a, &w, &x, 0).unwrap();
        assert_eq!(g[2], lin.clone() * lin.clone());
        assert_eq!(g[0], q(2) * w211.clone() * lin.clone() * x[0].clone());
        assert_eq!(g[1], q(2) * w211 * lin * x[1].clone());
    }

    #[test]
    fn zero_weights_zero_gradient() {
        let a = arch("2-3-2:2");
        let w = WeightVector::<Rational>::zeros(&a);
        let g = backprop(&a, &w, &[q(1), q(2)], 1).unwrap();
        assert!(g.iter().all(Scalar::is_zero));
        let j = jacobian(&a, &w, 1).unwrap();
        assert_eq!(j.rank, 0);
    }

    #[test]
    fn linear_network_rank() {
        // d₁ < min(d₀, d₂): rank d₁(d₀ + d₂ − d₁).
        let a = arch("4-2-3:1");
        let mut rng = seeded(1);
        let w = WeightVector::<Rational>::random(&a, &mut rng);
        assert_eq!(jacobian(&a, &w, 2).unwrap().rank, 2 * (4 + 3 - 2));
    }

    #[test]
    fn table_rows_and_defects() {
        let opts = DimOptions::default();
        let d = neurovariety_dim(&arch("2-2-3:2"), &opts).unwrap();
        assert_eq!((d.dim, d.defect, d.filling), (8, 0, false));
        let d = neurovariety_dim(&arch("3-2-1:2"), &opts).unwrap();
        assert_eq!((d.dim, d.edim, d.defect), (5, 6, 1));
        for r in 2..=4 {
            assert_eq!(neurovariety_dim(&arch(&format!("2-1-2-1:{r}")), &opts).unwrap().dim, 2);
        }
    }

    #[test]
    fn backends_agree_on_small_cases() {
        for s in ["2-2-2:2", "3-2-2:2", "2-2-1-2:2"] {
            let a = arch(s);
            let dims: Vec<usize> = [Backend::Float, Backend::FiniteField, Backend::Rational]
                .into_iter()
                .map(|b| neurovariety_dim(&a, &DimOptions { backend: b, ..Default::default() }).unwrap().dim)
                .collect();
            assert!(dims.windows(2).all(|w| w[0] == w[1]), "{s}: {dims:?}");
        }
    }

    #[test]
    fn evaluation_route_matches_interpolation() {
        for s in ["2-2-3:2", "3-2-1:2", "2-1-2-1:3", "3-3-2:3"] {
            let a = arch(s);
            let i = neurovariety_dim(&a, &DimOptions { method: Method::Interpolate, ..Default::default() }).unwrap();
            let e = neurovariety_dim(&a, &DimOptions { method: Method::Evaluate, ..Default::default() }).unwrap();
            assert_eq!(i.dim, e.dim, "{s}");
        }
    }

    #[test]
    fn recursive_bound_literal_split() {
        let a = arch("2-2-1-2:2");
        let opts = DimOptions::default();
        assert_eq!(recursive_bound(&a, 2, &opts).unwrap(), 3 + 2 - 1);
        assert_eq!(recursive_bound(&a, 1, &opts).unwrap(), 4 + 3 - 2);
        assert!(recursive_bound(&a, 0, &opts).is_err());
        assert_eq!(neurovariety_dim(&a, &opts).unwrap().dim, 4);
    }

    #[test]
    fn sweep_enumeration() {
        let opts = SweepOptions { max_r: 1, ..Default::default() };
        let archs = sweep_architectures(&opts);
        // Non-increasing tuples over {2,3}: 5 of length 4 and 6 of length 5.
        assert_eq!(archs.len(), 11);
        let empty = SweepOptions { min_layers: 3, max_layers: 2, ..Default::default() };
        assert!(sweep_architectures(&empty).is_empty());
        let off = SweepOptions { max_width: 2, max_layers: 3, min_r: 2, max_r: 2, non_increasing: false, ..Default::default() };
        assert!(sweep_architectures(&off).iter().any(|a| a.widths() == [2, 2, 1, 2]));
    }
}
