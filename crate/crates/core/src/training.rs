//! Gradient-descent training of the `(2, 2, 3)` quadratic network on
//! synthetic data, and a census of the distinct functions it learns.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::backprop_squared_error;
use crate::error::{PnnError, Result};
use crate::linalg::Mat;
use crate::network::{Architecture, WeightVector};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;

const TARGET_STREAM: u64 = 10;
const INPUT_STREAM: u64 = 11;
const INIT_STREAM: u64 = 12;
const BATCH_STREAM: u64 = 13;
const PERTURB_STREAM: u64 = 14;

/// The trained architecture `(2, 2, 3)` with `r = 2`.
pub fn experiment_architecture() -> Architecture {
    Architecture::new(vec![2, 2, 3], 2).expect("valid architecture")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_datasets: usize,
    pub points_per_dataset: usize,
    pub input_range: (f64, f64),
    pub lr0: f64,
    pub lr_halving_period: usize,
    pub max_epochs: usize,
    pub grad_threshold: f64,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
    pub init_std: f64,
    /// Mini-batch size; `0` means full batch.
    pub batch_size: usize,
    pub cluster_eps: f64,
    pub frequency_floor: usize,
    /// Singular values below this fraction of the largest count as zero.
    pub rank_tol: f64,
    /// Singular values below this absolute level count as zero.
    pub zero_tol: f64,
    pub perturbation_eps: f64,
    pub num_perturbations: usize,
    pub polish_lr: f64,
    pub polish_iters: usize,
    pub polish_grad_tol: f64,
    /// Leave runs that hit `max_epochs` above the gradient threshold out of the census.
    pub converged_only: bool,
    /// All datasets share one ground-truth coefficient matrix.
    pub shared_target: bool,
    /// All datasets share one set of input points.
    pub shared_inputs: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl ExperimentConfig {
    pub fn full() -> Self {
        ExperimentConfig {
            num_datasets: 5000,
            points_per_dataset: 50,
            input_range: (-1.0, 1.0),
            lr0: 0.1,
            lr_halving_period: 1000,
            max_epochs: 15000,
            grad_threshold: 1e-4,
            clip_norm: 1.0,
            init_std: 0.5,
            batch_size: 0,
            cluster_eps: 0.1,
            frequency_floor: 10,
            rank_tol: 1e-3,
            zero_tol: 1e-6,
            perturbation_eps: 1e-4,
            num_perturbations: 100,
            polish_lr: 0.05,
            polish_iters: 200_000,
            polish_grad_tol: 1e-12,
            converged_only: true,
            shared_target: true,
            shared_inputs: true,
            seed: 0,
        }
    }

    pub fn desk() -> Self {
        ExperimentConfig { num_datasets: 500, max_epochs: 4000, ..Self::full() }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::full()),
            "desk" => Ok(Self::desk()),
            other => Err(PnnError::InvalidInput(format!("unknown profile {other:?} (expected desk or full)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr0", self.lr0),
            ("grad_threshold", self.grad_threshold),
            ("cluster_eps", self.cluster_eps),
            ("rank_tol", self.rank_tol),
            ("zero_tol", self.zero_tol),
            ("perturbation_eps", self.perturbation_eps),
            ("init_std", self.init_std),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PnnError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.clip_norm >= 0.0) {
            return Err(PnnError::InvalidInput("clip_norm must be nonnegative".into()));
        }
        if self.num_datasets == 0 || self.points_per_dataset == 0 || self.lr_halving_period == 0 {
            return Err(PnnError::InvalidInput(
                "num_datasets, points_per_dataset and lr_halving_period must be positive".into(),
            ));
        }
        let (lo, hi) = self.input_range;
        if !(lo < hi) {
            return Err(PnnError::InvalidInput(format!("empty input range [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * 0.5f64.powi((epoch / self.lr_halving_period) as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub index: usize,
    /// `3 × 3`, row `j` holds `(c_{j,1}, c_{j,2}, c_{j,3})` for output `j`.
    pub coefficients: Mat<f64>,
    pub inputs: Vec<[f64; 2]>,
    pub outputs: Vec<[f64; 3]>,
}

/// `(x₁², x₁x₂, x₂²)`.
fn quadratic_monomials(x: [f64; 2]) -> [f64; 3] {
    [x[0] * x[0], x[0] * x[1], x[1] * x[1]]
}

/// `ŷ_j = Σ_i c_{j,i} m_i(x)`.
pub fn evaluate_quadratic(c: &Mat<f64>, x: [f64; 2]) -> [f64; 3] {
    let m = quadratic_monomials(x);
    let mut y = [0.0; 3];
    for (j, yj) in y.iter_mut().enumerate() {
        *yj = (0..3).map(|i| c[(j, i)] * m[i]).sum();
    }
    y
}

pub fn generate_dataset(index: usize, config: &ExperimentConfig) -> Dataset {
    let t = if config.shared_target { 0 } else { index as u64 };
    let mut rng = seeded(derive_seed(config.seed, TARGET_STREAM, t));
    let coefficients = Mat::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    let i = if config.shared_inputs { 0 } else { index as u64 };
    let mut rng = seeded(derive_seed(config.seed, INPUT_STREAM, i));
    let (lo, hi) = config.input_range;
    let dist = Uniform::new_inclusive(lo, hi).expect("validated range");
    let inputs: Vec<[f64; 2]> =
        (0..config.points_per_dataset).map(|_| [dist.sample(&mut rng), dist.sample(&mut rng)]).collect();
    let outputs = inputs.iter().map(|&x| evaluate_quadratic(&coefficients, x)).collect();
    Dataset { index, coefficients, inputs, outputs }
}

impl Dataset {
    /// Mean squared error of the quadratic map with coefficient matrix `c`
    /// (rows are outputs).
    pub fn function_loss(&self, c: &Mat<f64>) -> f64 {
        let total: f64 = self
            .inputs
            .iter()
            .zip(&self.outputs)
            .map(|(&x, y)| {
                let p = evaluate_quadratic(c, x);
                (0..3).map(|j| (p[j] - y[j]).powi(2)).sum::<f64>()
            })
            .sum();
        total / self.inputs.len() as f64
    }

    /// Loss and gradient of `(1/N) Σ ‖p_w(x) − y‖²` over the points in `idx`.
    pub fn loss_and_grad(&self, arch: &Architecture, w: &WeightVector<f64>, idx: &[usize]) -> (f64, Vec<f64>) {
        let mut loss = 0.0;
        let mut grad = vec![0.0; arch.param_count()];
        for &i in idx {
            let (e, g) = backprop_squared_error(arch, w, &self.inputs[i], &self.outputs[i]);
            loss += e;
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v;
            }
        }
        let inv = 1.0 / idx.len() as f64;
        grad.iter_mut().for_each(|v| *v *= inv);
        (loss * inv, grad)
    }

    pub fn full_loss_and_grad(&self, arch: &Architecture, w: &WeightVector<f64>) -> (f64, Vec<f64>) {
        let idx: Vec<usize> = (0..self.inputs.len()).collect();
        self.loss_and_grad(arch, w, &idx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedRun {
    pub index: usize,
    pub init_seed: u64,
    /// Flat weights, `W₁` (2×2) then `W₂` (3×2), row-major.
    pub weights: Vec<f64>,
    pub loss: f64,
    pub epochs: usize,
    pub converged: bool,
    /// Epoch at which the loss stopped being finite.
    pub failed_at: Option<usize>,
    pub grad_max: f64,
    /// Extracted coefficient matrix, rows are outputs.
    pub coefficients: Vec<f64>,
}

impl TrainedRun {
    pub fn coefficient_matrix(&self) -> Mat<f64> {
        Mat::from_vec(3, 3, self.coefficients.clone())
    }

    pub fn weight_vector(&self) -> WeightVector<f64> {
        WeightVector::from_flat(&experiment_architecture(), &self.weights).expect("stored weights have the right shape")
    }

    pub fn failed(&self) -> bool {
        self.failed_at.is_some()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn init_weights(config: &ExperimentConfig, seed: u64) -> WeightVector<f64> {
    let arch = experiment_architecture();
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, config.init_std).expect("validated std");
    let flat: Vec<f64> = (0..arch.param_count()).map(|_| normal.sample(&mut rng)).collect();
    WeightVector::from_flat(&arch, &flat).expect("shape")
}

/// Full-batch (or mini-batch) gradient descent from the weights drawn with `init_seed`.
pub fn train_sgd(dataset: &Dataset, config: &ExperimentConfig, init_seed: u64) -> TrainedRun {
    train_from(dataset, config, init_weights(config, init_seed), init_seed)
}

pub fn train_from(dataset: &Dataset, config: &ExperimentConfig, w0: WeightVector<f64>, init_seed: u64) -> TrainedRun {
    let arch = experiment_architecture();
    let n = dataset.inputs.len();
    let mut flat = w0.to_flat();
    let mut w = w0;
    let mut order: Vec<usize> = (0..n).collect();
    let batch = if config.batch_size == 0 || config.batch_size >= n { n } else { config.batch_size };
    let mut batch_rng = seeded(derive_seed(init_seed, BATCH_STREAM, 0));
    let mut epochs = config.max_epochs;
    let mut converged = false;
    let mut failed_at = None;
    let (mut loss, mut grad) = dataset.full_loss_and_grad(&arch, &w);
    for epoch in 0..config.max_epochs {
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            failed_at = Some(epoch);
            epochs = epoch;
            break;
        }
        if max_abs(&grad) < config.grad_threshold {
            converged = true;
            epochs = epoch;
            break;
        }
        let lr = config.learning_rate(epoch);
        if batch == n {
            step(&mut flat, &grad, lr, config.clip_norm);
        } else {
            order.shuffle(&mut batch_rng);
            for chunk in order.chunks(batch) {
                let (_, g) = dataset.loss_and_grad(&arch, &w, chunk);
                step(&mut flat, &g, lr, config.clip_norm);
                w = WeightVector::from_flat(&arch, &flat).expect("shape");
            }
        }
        w = WeightVector::from_flat(&arch, &flat).expect("shape");
        (loss, grad) = dataset.full_loss_and_grad(&arch, &w);
    }
    if failed_at.is_none() && !converged && (!loss.is_finite() || grad.iter().any(|g| !g.is_finite())) {
        failed_at = Some(config.max_epochs);
    }
    if !converged && failed_at.is_none() && max_abs(&grad) < config.grad_threshold {
        converged = true;
    }
    let coefficients = extract_coefficients(w.layer(1), w.layer(2)).into_data();
    TrainedRun { index: dataset.index, init_seed, weights: flat, loss, epochs, converged, failed_at, grad_max: max_abs(&grad), coefficients }
}

fn step(flat: &mut [f64], grad: &[f64], lr: f64, clip: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let scale = if clip > 0.0 && norm > clip { clip / norm } else { 1.0 };
    for (w, g) in flat.iter_mut().zip(grad) {
        *w -= lr * scale * g;
    }
}

/// Coefficient matrix of `x ↦ W₂ (W₁ x)^{∘2}`, row `j` holding the
/// coefficients of `x₁², x₁x₂, x₂²` in output `j`:
/// `a₁ⱼ = v_{j1}w₁₁² + v_{j2}w₂₁²`, `a₂ⱼ = 2(v_{j1}w₁₁w₁₂ + v_{j2}w₂₁w₂₂)`,
/// `a₃ⱼ = v_{j1}w₁₂² + v_{j2}w₂₂²`.
pub fn extract_coefficients<S: Scalar>(w1: &Mat<S>, w2: &Mat<S>) -> Mat<S> {
    assert_eq!(w1.shape(), (2, 2), "W1 must be 2 x 2");
    assert_eq!(w2.shape(), (3, 2), "W2 must be 3 x 2");
    let two = S::from_i64(2);
    Mat::from_fn(3, 3, |j, i| {
        let (v1, v2) = (w2[(j, 0)].clone(), w2[(j, 1)].clone());
        let (w11, w12, w21, w22) = (w1[(0, 0)].clone(), w1[(0, 1)].clone(), w1[(1, 0)].clone(), w1[(1, 1)].clone());
        match i {
            0 => v1 * w11.clone() * w11 + v2 * w21.clone() * w21,
            1 => two.clone() * (v1 * w11 * w12 + v2 * w21 * w22),
            _ => v1 * w12.clone() * w12 + v2 * w22.clone() * w22,
        }
    })
}

/// Runs every dataset of the experiment in parallel, in index order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrainedRun>> {
    config.validate()?;
    Ok((0..config.num_datasets)
        .into_par_iter()
        .map(|i| {
            let ds = generate_dataset(i, config);
            train_sgd(&ds, config, derive_seed(config.seed, INIT_STREAM, i as u64))
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMinVerdict {
    pub is_local_min: bool,
    /// Gradient descent from the representative left its cluster.
    pub escaped: bool,
    pub loss: f64,
    pub min_perturbed_loss: f64,
    pub perturbations: usize,
}

/// Compares the loss of `a` with the losses of `a + δ`, `δ_{ij} ∈ [−ε, ε]`,
/// each retracted to the nearest matrix of rank at most 2.
pub fn local_min_check(a: &Mat<f64>, dataset: &Dataset, eps: f64, count: usize, seed: u64) -> Result<LocalMinVerdict> {
    if !(eps > 0.0) || count == 0 {
        return Err(PnnError::InvalidInput("perturbation size and count must be positive".into()));
    }
    if a.shape() != (3, 3) {
        return Err(PnnError::InvalidInput(format!("expected a 3 x 3 coefficient matrix, got {:?}", a.shape())));
    }
    let loss = dataset.function_loss(a);
    let mut rng = seeded(derive_seed(seed, PERTURB_STREAM, 0));
    let dist = Uniform::new_inclusive(-eps, eps).expect("eps > 0");
    let mut min_perturbed = f64::INFINITY;
    for _ in 0..count {
        let p = a.add(&Mat::from_fn(3, 3, |_, _| dist.sample(&mut rng)));
        min_perturbed = min_perturbed.min(dataset.function_loss(&retract_rank(&p, 2)));
    }
    let slack = 64.0 * f64::EPSILON * loss.max(f64::MIN_POSITIVE);
    Ok(LocalMinVerdict {
        is_local_min: loss <= min_perturbed + slack,
        escaped: false,
        loss,
        min_perturbed_loss: min_perturbed,
        perturbations: count,
    })
}

/// Best approximation of rank at most `k` in Frobenius norm.
pub fn retract_rank(m: &Mat<f64>, k: usize) -> Mat<f64> {
    let svd = m.to_nalgebra().svd(true, true);
    let mut s = svd.singular_values.clone();
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    for &i in idx.iter().skip(k) {
        s[i] = 0.0;
    }
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v requested");
    Mat::from_nalgebra(&(u * nalgebra::DMatrix::from_diagonal(&s) * vt))
}

/// Numerical rank of a coefficient matrix under a relative and an absolute threshold.
pub fn coefficient_rank(a: &Mat<f64>, rank_tol: f64, zero_tol: f64) -> (usize, Vec<f64>) {
    let sv = a.singular_values();
    let cut = (rank_tol * sv.first().copied().unwrap_or(0.0)).max(zero_tol);
    (sv.iter().filter(|&&s| s > cut).count(), sv)
}

#[derive(Clone, Debug)]
pub struct Polished {
    pub weights: WeightVector<f64>,
    pub iterations: usize,
    /// The coefficients left the `cluster_eps` max-norm ball around the start.
    pub escaped: bool,
}

/// Plain gradient descent on the weights until the largest gradient entry
/// drops below `polish_grad_tol`, or the learned function moves by
/// `cluster_eps` in some coefficient.
pub fn polish(dataset: &Dataset, w: &WeightVector<f64>, config: &ExperimentConfig) -> Polished {
    let arch = experiment_architecture();
    let start = extract_coefficients(w.layer(1), w.layer(2));
    let mut flat = w.to_flat();
    let mut cur = w.clone();
    for it in 0..config.polish_iters {
        let (loss, g) = dataset.full_loss_and_grad(&arch, &cur);
        if !loss.is_finite() || max_abs(&g) < config.polish_grad_tol {
            return Polished { weights: cur, iterations: it, escaped: false };
        }
        step(&mut flat, &g, config.polish_lr, 0.0);
        cur = WeightVector::from_flat(&arch, &flat).expect("shape");
        if it % 100 == 99 && extract_coefficients(cur.layer(1), cur.layer(2)).sub(&start).max_abs() >= config.cluster_eps {
            return Polished { weights: cur, iterations: it + 1, escaped: true };
        }
    }
    Polished { weights: cur, iterations: config.polish_iters, escaped: false }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionCluster {
    /// Coefficients of the leader, rows are outputs.
    pub representative: Vec<f64>,
    pub leader: usize,
    /// Member with the smallest final gradient.
    pub anchor: usize,
    pub frequency: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub mean_loss: f64,
    pub local_min: Option<LocalMinVerdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionCensus {
    /// Clusters with at least `frequency_floor` members, most frequent first.
    pub clusters: Vec<FunctionCluster>,
    pub tolerance: f64,
    pub frequency_floor: usize,
    pub failed_runs: usize,
    /// Runs left out because they did not converge.
    pub unconverged_runs: usize,
    pub residual_clusters: usize,
    pub residual_runs: usize,
}

impl FunctionCensus {
    pub fn rank_two(&self) -> impl Iterator<Item = &FunctionCluster> {
        self.clusters.iter().filter(|c| c.rank == 2)
    }
}

/// Greedy leader clustering in run order: a run joins the first cluster whose
/// leader is within `eps` in every coefficient.
pub fn cluster_functions(
    runs: &[TrainedRun],
    eps: f64,
    frequency_floor: usize,
    rank_tol: f64,
    zero_tol: f64,
    converged_only: bool,
) -> FunctionCensus {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let (mut failed, mut unconverged) = (0, 0);
    for (i, run) in runs.iter().enumerate() {
        if run.failed() {
            failed += 1;
            continue;
        }
        if converged_only && !run.converged {
            unconverged += 1;
            continue;
        }
        let hit = groups.iter_mut().find(|g| {
            runs[g[0]].coefficients.iter().zip(&run.coefficients).all(|(a, b)| (a - b).abs() < eps)
        });
        match hit {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let mut clusters = Vec::new();
    let (mut residual_clusters, mut residual_runs) = (0, 0);
    for g in groups {
        if g.len() < frequency_floor {
            residual_clusters += 1;
            residual_runs += g.len();
            continue;
        }
        let anchor = *g
            .iter()
            .min_by(|&&a, &&b| runs[a].grad_max.total_cmp(&runs[b].grad_max).then(a.cmp(&b)))
            .expect("nonempty");
        let (rank, singular_values) = coefficient_rank(&runs[anchor].coefficient_matrix(), rank_tol, zero_tol);
        let mean_loss = g.iter().map(|&i| runs[i].loss).sum::<f64>() / g.len() as f64;
        clusters.push(FunctionCluster {
            representative: runs[g[0]].coefficients.clone(),
            leader: g[0],
            anchor,
            frequency: g.len(),
            rank,
            singular_values,
            mean_loss,
            local_min: None,
        });
    }
    FunctionCensus {
        clusters,
        tolerance: eps,
        frequency_floor,
        failed_runs: failed,
        unconverged_runs: unconverged,
        residual_clusters,
        residual_runs,
    }
}

/// Clusters the runs and checks every cluster anchor for local minimality
/// after polishing its weights.
pub fn census(runs: &[TrainedRun], config: &ExperimentConfig) -> Result<FunctionCensus> {
    config.validate()?;
    let mut census = cluster_functions(
        runs,
        config.cluster_eps,
        config.frequency_floor,
        config.rank_tol,
        config.zero_tol,
        config.converged_only,
    );
    let verdicts: Vec<Result<LocalMinVerdict>> = census
        .clusters
        .par_iter()
        .map(|c| {
            let run = &runs[c.anchor];
            let ds = generate_dataset(run.index, config);
            let p = polish(&ds, &run.weight_vector(), config);
            let a = extract_coefficients(p.weights.layer(1), p.weights.layer(2));
            let seed = derive_seed(config.seed, PERTURB_STREAM, run.index as u64);
            let mut v = local_min_check(&a, &ds, config.perturbation_eps, config.num_perturbations, seed)?;
            if p.escaped {
                v.escaped = true;
                v.is_local_min = false;
            }
            Ok(v)
        })
        .collect();
    for (c, v) in census.clusters.iter_mut().zip(verdicts) {
        c.local_min = Some(v?);
    }
    Ok(census)
}

const WEIGHT_COLUMNS: [&str; 10] = ["w1_11", "w1_12", "w1_21", "w1_22", "w2_11", "w2_12", "w2_21", "w2_22", "w2_31", "w2_32"];

/// Column names `a{i}{j}`: coefficient of monomial `i` in output `j`.
fn coefficient_columns() -> Vec<String> {
    let mut cols = Vec::new();
    for i in 1..=3 {
        for j in 1..=3 {
            cols.push(format!("a{i}{j}"));
        }
    }
    cols
}

fn a_entry(coeffs: &[f64], i: usize, j: usize) -> f64 {
    coeffs[j * 3 + i]
}

pub fn write_runs_csv<W: Write>(runs: &[TrainedRun], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["index", "init_seed", "loss", "epochs", "converged", "failed_at", "grad_max"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(WEIGHT_COLUMNS.iter().map(|s| s.to_string()));
    header.extend(coefficient_columns());
    w.write_record(&header).map_err(csv_err)?;
    for r in runs {
        let mut rec = vec![
            r.index.to_string(),
            r.init_seed.to_string(),
            r.loss.to_string(),
            r.epochs.to_string(),
            r.converged.to_string(),
            r.failed_at.map(|e| e.to_string()).unwrap_or_default(),
            r.grad_max.to_string(),
        ];
        rec.extend(r.weights.iter().map(|v| v.to_string()));
        for i in 0..3 {
            for j in 0..3 {
                rec.push(a_entry(&r.coefficients, i, j).to_string());
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs_csv<R: Read>(input: R) -> Result<Vec<TrainedRun>> {
    let mut rdr = csv::Reader::from_reader(input);
    let arch = experiment_architecture();
    let mut runs = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |msg: String| PnnError::Parse { line: line + 2, msg };
        if rec.len() != 7 + WEIGHT_COLUMNS.len() + 9 {
            return Err(bad(format!("expected {} fields, got {}", 26, rec.len())));
        }
        let num = |k: usize| rec[k].parse::<f64>().map_err(|e| bad(format!("field {k}: {e}")));
        let int = |k: usize| rec[k].parse::<u64>().map_err(|e| bad(format!("field {k}: {e}")));
        let weights = (7..17).map(num).collect::<Result<Vec<f64>>>()?;
        let w = WeightVector::from_flat(&arch, &weights)?;
        runs.push(TrainedRun {
            index: int(0)? as usize,
            init_seed: int(1)?,
            loss: num(2)?,
            epochs: int(3)? as usize,
            converged: rec[4].parse::<bool>().map_err(|e| bad(format!("field 4: {e}")))?,
            failed_at: if rec[5].is_empty() { None } else { Some(int(5)? as usize) },
            grad_max: num(6)?,
            weights,
            coefficients: extract_coefficients(w.layer(1), w.layer(2)).into_data(),
        });
    }
    Ok(runs)
}

pub fn write_census_csv<W: Write>(census: &FunctionCensus, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["cluster", "frequency", "rank", "local_min", "escaped", "leader", "anchor", "mean_loss", "sigma1", "sigma2", "sigma3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    header.extend(coefficient_columns());
    w.write_record(&header).map_err(csv_err)?;
    for (k, c) in census.clusters.iter().enumerate() {
        let mut rec = vec![
            k.to_string(),
            c.frequency.to_string(),
            c.rank.to_string(),
            c.local_min.as_ref().map(|v| v.is_local_min.to_string()).unwrap_or_default(),
            c.local_min.as_ref().map(|v| v.escaped.to_string()).unwrap_or_default(),
            c.leader.to_string(),
            c.anchor.to_string(),
            c.mean_loss.to_string(),
        ];
        for s in 0..3 {
            rec.push(c.singular_values.get(s).copied().unwrap_or(0.0).to_string());
        }
        for i in 0..3 {
            for j in 0..3 {
                rec.push(a_entry(&c.representative, i, j).to_string());
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> PnnError {
    PnnError::Computation(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::coefficients;
    use crate::scalar::Rational;
    use num_bigint::BigInt;

    fn small(epochs: usize) -> ExperimentConfig {
        ExperimentConfig { num_datasets: 4, max_epochs: epochs, ..ExperimentConfig::desk() }
    }

    #[test]
    fn dataset_is_deterministic_and_consistent() {
        let cfg = ExperimentConfig { shared_target: false, shared_inputs: false, ..small(10) };
        let a = generate_dataset(3, &cfg);
        assert_eq!(a, generate_dataset(3, &cfg));
        assert_ne!(a, generate_dataset(4, &cfg));
        for (x, y) in a.inputs.iter().zip(&a.outputs) {
            assert!(x.iter().all(|v| (-1.0..=1.0).contains(v)));
            assert_eq!(evaluate_quadratic(&a.coefficients, *x), *y);
        }
    }

    #[test]
    fn shared_datasets_coincide() {
        let cfg = small(10);
        let a = generate_dataset(0, &cfg);
        let b = generate_dataset(7, &cfg);
        assert_eq!(a.coefficients, b.coefficients);
        assert_eq!(a.inputs, b.inputs);
    }

    #[test]
    fn extraction_matches_network_expansion_exactly() {
        let arch = experiment_architecture();
        let mut rng = seeded(5);
        for _ in 0..100 {
            let flat: Vec<Rational> = (0..10)
                .map(|_| Rational::new(BigInt::from(rng.random_range(-9..=9)), BigInt::from(rng.random_range(1..=5))))
                .collect();
            let w = WeightVector::from_flat(&arch, &flat).unwrap();
            let a = extract_coefficients(w.layer(1), w.layer(2));
            assert_eq!(a, coefficients(&arch, &w).unwrap().as_matrix());
        }
    }

    #[test]
    fn zero_second_layer_gives_zero_function() {
        let w1 = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(extract_coefficients(&w1, &Mat::zeros(3, 2)).is_zero());
    }

    #[test]
    fn training_gradient_matches_finite_differences() {
        let cfg = small(1);
        let ds = generate_dataset(0, &cfg);
        let arch = experiment_architecture();
        let w = init_weights(&cfg, 9);
        let (_, g) = ds.full_loss_and_grad(&arch, &w);
        let flat = w.to_flat();
        for i in 0..flat.len() {
            let h = 1e-6;
            let mut p = flat.clone();
            p[i] += h;
            let mut m = flat.clone();
            m[i] -= h;
            let lp = ds.full_loss_and_grad(&arch, &WeightVector::from_flat(&arch, &p).unwrap()).0;
            let lm = ds.full_loss_and_grad(&arch, &WeightVector::from_flat(&arch, &m).unwrap()).0;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()));
        }
    }

    #[test]
    fn realizable_target_is_learned() {
        let cfg = ExperimentConfig { max_epochs: 20000, ..small(0) };
        let mut ds = generate_dataset(0, &cfg);
        let teacher = WeightVector::from_flat(
            &experiment_architecture(),
            &[1.0, 0.3, -0.2, 0.9, 1.0, -0.5, 0.4, 0.8, -0.7, 0.6],
        )
        .unwrap();
        ds.coefficients = extract_coefficients(teacher.layer(1), teacher.layer(2));
        ds.outputs = ds.inputs.iter().map(|&x| evaluate_quadratic(&ds.coefficients, x)).collect();
        let learned = (0..8).filter(|&s| train_sgd(&ds, &cfg, s).loss < 1e-6).count();
        assert!(learned >= 4, "only {learned} of 8 starts reached the target");
    }

    #[test]
    fn loss_decreases_with_small_steps() {
        let cfg = ExperimentConfig { lr0: 1e-3, clip_norm: 0.0, ..small(1) };
        let arch = experiment_architecture();
        for seed in 0..20 {
            let ds = generate_dataset(0, &ExperimentConfig { seed, ..cfg.clone() });
            let mut w = init_weights(&cfg, seed + 100);
            let (mut prev, _) = ds.full_loss_and_grad(&arch, &w);
            for _ in 0..50 {
                let run = train_from(&ds, &cfg, w.clone(), 0);
                w = run.weight_vector();
                assert!(run.loss <= prev, "{} > {prev}", run.loss);
                prev = run.loss;
            }
        }
    }

    #[test]
    fn identical_runs_form_one_cluster() {
        let cfg = small(50);
        let ds = generate_dataset(0, &cfg);
        let run = train_sgd(&ds, &cfg, 1);
        let census = cluster_functions(&[run.clone(), run.clone()], 0.1, 1, 1e-3, 1e-6, false);
        assert_eq!(census.clusters.len(), 1);
        assert_eq!(census.clusters[0].frequency, 2);
        let (mut done, mut stalled) = (run.clone(), run);
        done.converged = true;
        stalled.converged = false;
        let census = cluster_functions(&[done, stalled], 0.1, 1, 1e-3, 1e-6, true);
        assert_eq!((census.clusters[0].frequency, census.unconverged_runs), (1, 1));
    }

    #[test]
    fn inflated_loss_is_not_a_local_min() {
        let cfg = small(0);
        let ds = generate_dataset(0, &cfg);
        let a = retract_rank(&ds.coefficients, 2).add(&Mat::from_fn(3, 3, |i, j| if i == j { 0.5 } else { 0.0 }));
        let v = local_min_check(&retract_rank(&a, 2), &ds, 1e-2, 200, 3).unwrap();
        assert!(!v.is_local_min);
        assert!(v.min_perturbed_loss < v.loss);
    }

    #[test]
    fn retraction_has_requested_rank() {
        let mut rng = seeded(2);
        let m = Mat::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let r = retract_rank(&m, 2);
        assert_eq!(r.svd_rank(1e-10).rank, 2);
        assert!(r.determinant().abs() < 1e-12);
    }

    #[test]
    fn runs_csv_round_trip() {
        let cfg = small(20);
        let runs = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_runs_csv(&runs, &mut buf).unwrap();
        let back = read_runs_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), runs.len());
        for (a, b) in runs.iter().zip(&back) {
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.coefficients, b.coefficients);
            assert_eq!(a.epochs, b.epochs);
        }
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::desk().validate().is_ok());
        assert!(ExperimentConfig { lr0: 0.0, ..ExperimentConfig::desk() }.validate().is_err());
        assert!(ExperimentConfig { input_range: (1.0, -1.0), ..ExperimentConfig::desk() }.validate().is_err());
        assert!(ExperimentConfig::profile("lab").is_err());
    }
}
