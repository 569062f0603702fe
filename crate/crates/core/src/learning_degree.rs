//! Learning degree of the `(2, 2, k)` quadratic network.
//!
//! The data enter the squared loss only through the moment matrix `E`, so
//! training is a weighted distance problem on the neurovariety, which here is
//! the variety of `k × 3` matrices of rank at most two. Its generic
//! Euclidean distance degree is computed from the Chern–Mather class of the
//! determinantal variety and checked against `8k² − 12k + 3`; a multistart
//! census counts the critical points that local optimization actually finds.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PnnError, Result};
use crate::linalg::Mat;
use crate::optim::{minimize, LbfgsOptions};
use crate::rng::{derive_seed, seeded};
use crate::symtensor::{binomial_big, enumerate_multiindices, MultiIndex};

/// A polynomial in `H` modulo `H^m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedHPoly {
    coeffs: Vec<BigInt>,
}

impl TruncatedHPoly {
    pub fn zero(m: usize) -> Self {
        TruncatedHPoly { coeffs: vec![BigInt::zero(); m] }
    }

    /// `c · H^e`, or zero when `e` is negative or at least `m`.
    pub fn monomial(m: usize, e: i64, c: BigInt) -> Self {
        let mut p = Self::zero(m);
        if e >= 0 && (e as usize) < m {
            p.coeffs[e as usize] = c;
        }
        p
    }

    pub fn truncation(&self) -> usize {
        self.coeffs.len()
    }

    /// `β_l`, the coefficient of `H^l`.
    pub fn coeff(&self, l: i64) -> BigInt {
        if l < 0 {
            return BigInt::zero();
        }
        self.coeffs.get(l as usize).cloned().unwrap_or_default()
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.truncation(), other.truncation());
        TruncatedHPoly { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        TruncatedHPoly { coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let m = self.truncation();
        assert_eq!(m, other.truncation());
        let mut out = Self::zero(m);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(m - i) {
                out.coeffs[i + j] += a * b;
            }
        }
        out
    }

    /// Lowest power with a nonzero coefficient.
    pub fn min_degree(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }
}

fn binom_z(n: i64, k: i64) -> BigInt {
    if n < 0 || k < 0 || k > n {
        BigInt::zero()
    } else {
        BigInt::from(binomial_big(n as u64, k as u64))
    }
}

/// `8k² − 12k + 3`.
pub fn eddeg_closed_form(k: u64) -> Result<u64> {
    if k < 2 {
        return Err(PnnError::InvalidInput(format!("k must be at least 2, got {k}")));
    }
    Ok(8 * k * k - 12 * k + 3)
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(PnnError::InvalidInput(format!("k must be at least 2, got {k}")));
    }
    Ok(())
}

/// The three nonzero rows of the `(2k+1) × (2k+1)` matrix `A(k,3,2)`.
fn a_matrix(k: i64) -> Vec<(usize, usize, BigInt)> {
    vec![
        (0, 0, BigInt::from(3)),
        (0, 1, BigInt::from(3 * k)),
        (0, 2, BigInt::from(k * (k - 1) / 2)),
        (1, 1, BigInt::from(-3 * k)),
        (1, 2, BigInt::from(-k * k)),
        (2, 2, BigInt::from(k * (k + 1) / 2)),
    ]
}

/// Chern–Mather class of the `k × 3` matrices of rank at most 2 in
/// `ℤ[H]/⟨H^{3k}⟩`, as `trace(A·𝓗·B)`.
pub fn chern_mather_22k(k: usize) -> Result<TruncatedHPoly> {
    check_k(k)?;
    let m = 3 * k;
    let n = 2 * k + 1;
    let ki = k as i64;
    let mut a = vec![vec![BigInt::zero(); n]; n];
    for (i, j, v) in a_matrix(ki) {
        a[i][j] = v;
    }
    // B_{i,j} = binom(2k − j, i − j)
    let b: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| binom_z(2 * ki - j as i64, i as i64 - j as i64)).collect())
        .collect();
    // 𝓗_{i,j} = H^{k + j − i}
    let h = |i: usize, j: usize| TruncatedHPoly::monomial(m, ki + j as i64 - i as i64, BigInt::one());
    // (A·𝓗)_{i,l} = Σ_j A_{i,j} 𝓗_{j,l}, then trace against B.
    let mut trace = TruncatedHPoly::zero(m);
    for (i, a_row) in a.iter().enumerate() {
        for (j, a_ij) in a_row.iter().enumerate() {
            if a_ij.is_zero() {
                continue;
            }
            for (l, b_row) in b.iter().enumerate() {
                let b_li = &b_row[i];
                if b_li.is_zero() {
                    continue;
                }
                trace = trace.add(&h(j, l).scale(&(a_ij * b_li)));
            }
        }
    }
    Ok(trace)
}

/// The same class from the closed diagonal sum
/// `Σ_{j=−2}^{2k−1} [3C(2k,j) + 3k(C(2k,j+1) − C(2k−1,j)) + ½k(k−1)C(2k,j+2)
/// + ½k(k+1)C(2k−2,j) − k²C(2k−1,j+1)] H^{k+j}`.
pub fn chern_mather_22k_diagonal(k: usize) -> Result<TruncatedHPoly> {
    check_k(k)?;
    let m = 3 * k;
    let ki = k as i64;
    let mut out = TruncatedHPoly::zero(m);
    for j in -2..2 * ki {
        let c = BigInt::from(3) * binom_z(2 * ki, j)
            + BigInt::from(3 * ki) * (binom_z(2 * ki, j + 1) - binom_z(2 * ki - 1, j))
            + BigInt::from(ki * (ki - 1) / 2) * binom_z(2 * ki, j + 2)
            + BigInt::from(ki * (ki + 1) / 2) * binom_z(2 * ki - 2, j)
            - BigInt::from(ki * ki) * binom_z(2 * ki - 1, j + 1);
        out = out.add(&TruncatedHPoly::monomial(m, ki + j, c));
    }
    Ok(out)
}

/// Generic ED degree of the rank-≤2 variety of `k × 3` matrices from its
/// Chern–Mather class through the polar-degree double sum.
///
/// With `M = 2k + 2` and `γ_i` the coefficient of `H^{k−2+i}` (the class of
/// codimension `i` inside the variety, whose own codimension is `k − 2`),
/// the degree is `Σ_{l<M} Σ_{i≤l} (−1)^i C(M−i, M−l) γ_i`.
pub fn eddeg_polar_sum(k: usize) -> Result<BigInt> {
    let cm = chern_mather_22k(k)?;
    Ok(polar_sum(&cm, k))
}

fn polar_sum(cm: &TruncatedHPoly, k: usize) -> BigInt {
    let big_m = 2 * k as i64 + 2;
    let gamma = |i: i64| cm.coeff(k as i64 - 2 + i);
    let mut total = BigInt::zero();
    for l in 0..big_m {
        for i in 0..=l {
            let term = binom_z(big_m - i, big_m - l) * gamma(i);
            if i % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
    }
    total
}

/// The rearranged single sum `Σ_i (−1)^i (2^{M−i} − 1) γ_i`.
pub fn eddeg_single_sum(k: usize) -> Result<BigInt> {
    let cm = chern_mather_22k(k)?;
    let big_m = 2 * k + 2;
    let mut total = BigInt::zero();
    for i in 0..big_m {
        let weight = (BigInt::one() << (big_m - i)) - 1;
        let term = weight * cm.coeff(k as i64 - 2 + i as i64);
        if i % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total)
}

/// Moment matrix `E_{α,β} = (1/N) Σ_j x̂_j^{α+β}` over monomials of one degree.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentForm {
    pub block: Mat<f64>,
    pub samples_used: usize,
    pub basis: Vec<MultiIndex>,
}

pub fn moment_form(samples: &[Vec<f64>], degree: usize) -> Result<MomentForm> {
    let first = samples.first().ok_or_else(|| PnnError::InvalidInput("no samples".into()))?;
    let n = first.len();
    if n == 0 || samples.iter().any(|s| s.len() != n) {
        return Err(PnnError::InvalidInput("samples must share a positive dimension".into()));
    }
    let basis = enumerate_multiindices(n, degree);
    let size = basis.len();
    let mut block = Mat::zeros(size, size);
    for x in samples {
        let v: Vec<f64> = basis.iter().map(|m| m.eval(x)).collect();
        for a in 0..size {
            for b in 0..size {
                block[(a, b)] += v[a] * v[b];
            }
        }
    }
    let inv = 1.0 / samples.len() as f64;
    let block = block.scale(&inv);
    Ok(MomentForm { block, samples_used: samples.len(), basis })
}

impl MomentForm {
    /// `Σ_i (ρ_i − φ_i)ᵀ E (ρ_i − φ_i)` over the rows (outputs) of `rho` and `phi`.
    pub fn loss(&self, rho: &Mat<f64>, phi: &Mat<f64>) -> f64 {
        weighted_distance(&self.block, rho, phi)
    }
}

/// `Σ_i (a_i − b_i)ᵀ E (a_i − b_i)` over matrix rows.
pub fn weighted_distance(e: &Mat<f64>, a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let d = a.sub(b);
    (0..d.rows())
        .map(|i| {
            let row = d.row(i);
            let ed = e.matvec(row);
            row.iter().zip(&ed).map(|(x, y)| x * y).sum::<f64>()
        })
        .sum()
}

/// `M Mᵀ + n·I/10` for a standard normal `M`; symmetric positive definite.
pub fn random_spd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<f64> {
    let m = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut e = m.matmul(&m.transpose());
    for i in 0..n {
        e[(i, i)] += 0.1 * n as f64;
    }
    e
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusOptions {
    pub starts: usize,
    pub seed: u64,
    pub cluster_tol: f64,
    pub rank_tol: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for CensusOptions {
    fn default() -> Self {
        CensusOptions { starts: 500, seed: 0, cluster_tol: 1e-5, rank_tol: 1e-6, grad_tol: 1e-9, max_iter: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// `k × 3` coefficient matrix, row-major.
    pub coefficients: Vec<f64>,
    pub loss: f64,
    pub multiplicity: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalCensus {
    pub k: usize,
    pub starts: usize,
    /// Distinct critical points with coefficient matrix of rank exactly 2.
    pub distinct_minima: Vec<CriticalPoint>,
    /// Converged points on the singular locus (rank ≤ 1).
    pub singular: Vec<CriticalPoint>,
    /// Starts whose optimizer stopped without meeting the gradient tolerance.
    pub non_convergent: usize,
    pub clustering_tolerance: f64,
}

/// Coefficient matrix `W₂ · V(W₁)` of the `(2,2,k)` quadratic network and the
/// gradient of `Σ_i (c_i − t_i)ᵀ E (c_i − t_i)` with respect to the weights.
/// The weight vector is `W₁` (2×2) row-major followed by `W₂` (k×2).
fn loss_and_grad(k: usize, e: &Mat<f64>, target: &Mat<f64>, w: &[f64]) -> (f64, Vec<f64>) {
    let w1 = &w[..4];
    let w2 = Mat::from_vec(k, 2, w[4..].to_vec());
    let v = veronese(w1);
    let c = w2.matmul(&v);
    let r = c.sub(target);
    let re = r.matmul(e);
    let loss = (0..k).map(|i| r.row(i).iter().zip(re.row(i)).map(|(a, b)| a * b).sum::<f64>()).sum();
    let g_c = re.scale(&2.0);
    let g_w2 = g_c.matmul(&v.transpose());
    let g_v = w2.transpose().matmul(&g_c);
    let mut g = Vec::with_capacity(4 + 2 * k);
    for i in 0..2 {
        let (a, b) = (w1[2 * i], w1[2 * i + 1]);
        let gv = g_v.row(i);
        g.push(gv[0] * 2.0 * a + gv[1] * 2.0 * b);
        g.push(gv[1] * 2.0 * a + gv[2] * 2.0 * b);
    }
    g.extend_from_slice(g_w2.data());
    (loss, g)
}

/// Rows `(a², 2ab, b²)` for the rows `(a, b)` of `W₁`.
fn veronese(w1: &[f64]) -> Mat<f64> {
    Mat::from_fn(2, 3, |i, j| {
        let (a, b) = (w1[2 * i], w1[2 * i + 1]);
        match j {
            0 => a * a,
            1 => 2.0 * a * b,
            _ => b * b,
        }
    })
}

/// Multistart local minimization of the `E`-weighted distance from `target`
/// to the `(2,2,k)` neuromanifold, clustered in coefficient space.
pub fn critical_census(k: usize, e: &Mat<f64>, target: &Mat<f64>, opts: &CensusOptions) -> Result<CriticalCensus> {
    if k < 1 || e.shape() != (3, 3) || target.shape() != (k, 3) {
        return Err(PnnError::InvalidInput(format!(
            "census needs a 3 x 3 block and a {k} x 3 target, got {:?} and {:?}",
            e.shape(),
            target.shape()
        )));
    }
    if opts.starts == 0 {
        return Err(PnnError::InvalidInput("at least one start is required".into()));
    }
    let lopts = LbfgsOptions { grad_tol: opts.grad_tol, max_iter: opts.max_iter, ..Default::default() };
    let results: Vec<(Mat<f64>, f64, bool)> = (0..opts.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = seeded(derive_seed(opts.seed, 3, s as u64));
            let x0: Vec<f64> = (0..4 + 2 * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let res = minimize(|w| loss_and_grad(k, e, target, w), x0, lopts);
            let w2 = Mat::from_vec(k, 2, res.x[4..].to_vec());
            let c = w2.matmul(&veronese(&res.x[..4]));
            (c, res.value, res.converged)
        })
        .collect();
    let mut regular: Vec<CriticalPoint> = Vec::new();
    let mut singular: Vec<CriticalPoint> = Vec::new();
    let mut non_convergent = 0;
    for (c, loss, converged) in results {
        if !converged {
            non_convergent += 1;
            continue;
        }
        let svd = c.svd_rank(opts.rank_tol);
        let bucket = if svd.rank == 2 { &mut regular } else { &mut singular };
        let scale = c.frobenius().max(1e-300);
        if let Some(p) = bucket.iter_mut().find(|p| {
            let other = Mat::from_vec(k, 3, p.coefficients.clone());
            c.sub(&other).frobenius() < opts.cluster_tol * scale.max(other.frobenius())
        }) {
            p.multiplicity += 1;
        } else {
            bucket.push(CriticalPoint {
                coefficients: c.data().to_vec(),
                loss,
                multiplicity: 1,
                rank: svd.rank,
                singular_values: svd.singular_values,
            });
        }
    }
    Ok(CriticalCensus {
        k,
        starts: opts.starts,
        distinct_minima: regular,
        singular,
        non_convergent,
        clustering_tolerance: opts.cluster_tol,
    })
}

/// A census for a standard normal target and a random positive definite block.
pub fn random_census(k: usize, opts: &CensusOptions) -> Result<CriticalCensus> {
    let mut rng = seeded(derive_seed(opts.seed, 4, 0));
    let e = random_spd(3, &mut rng);
    let target = Mat::from_fn(k, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    critical_census(k, &e, &target, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(eddeg_closed_form(2).unwrap(), 11);
        assert_eq!(eddeg_closed_form(3).unwrap(), 39);
        assert_eq!(eddeg_closed_form(10).unwrap(), 683);
        assert!(eddeg_closed_form(1).is_err());
    }

    #[test]
    fn chern_mather_small_k() {
        assert_eq!(chern_mather_22k(2).unwrap().coeffs(), &ints(&[1, 6, 18, 28, 24, 12])[..]);
        assert_eq!(chern_mather_22k(3).unwrap().coeffs(), &ints(&[0, 3, 18, 54, 102, 126, 102, 54, 18])[..]);
    }

    #[test]
    fn two_trace_routes_agree() {
        for k in 2..=30 {
            let a = chern_mather_22k(k).unwrap();
            assert_eq!(a, chern_mather_22k_diagonal(k).unwrap(), "k = {k}");
            assert_eq!(a.min_degree(), Some(k - 2));
            assert_eq!(a.coeff(k as i64 - 2), BigInt::from(k * (k - 1) / 2));
        }
    }

    #[test]
    fn polar_sum_matches_closed_form() {
        for k in 2..=20 {
            let expected = BigInt::from(eddeg_closed_form(k as u64).unwrap());
            assert_eq!(eddeg_polar_sum(k).unwrap(), expected);
            assert_eq!(eddeg_single_sum(k).unwrap(), expected);
        }
    }

    #[test]
    fn truncated_ring_product() {
        let a = TruncatedHPoly { coeffs: ints(&[1, 1, 0, 0]) };
        let cube = a.mul(&a).mul(&a);
        assert_eq!(cube.coeffs(), &ints(&[1, 3, 3, 1])[..]);
        assert_eq!(cube.mul(&a).coeffs(), &ints(&[1, 4, 6, 4])[..]);
    }

    #[test]
    fn moment_form_single_sample() {
        let m = moment_form(&[vec![1.0, 0.0]], 2).unwrap();
        assert_eq!(m.block[(0, 0)], 1.0);
        for a in 0..3 {
            for b in 0..3 {
                if (a, b) != (0, 0) {
                    assert_eq!(m.block[(a, b)], 0.0);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = 3;
        let mut rng = seeded(4);
        let e = random_spd(3, &mut rng);
        let t = Mat::from_fn(k, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w: Vec<f64> = (0..10).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (_, g) = loss_and_grad(k, &e, &t, &w);
        for i in 0..w.len() {
            let h = 1e-6;
            let mut wp = w.clone();
            wp[i] += h;
            let mut wm = w.clone();
            wm[i] -= h;
            let fd = (loss_and_grad(k, &e, &t, &wp).0 - loss_and_grad(k, &e, &t, &wm).0) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn census_on_variety_target_has_zero_minimum() {
        let k = 3;
        let mut rng = seeded(8);
        let w: Vec<f64> = (0..10).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let target = Mat::from_vec(k, 2, w[4..].to_vec()).matmul(&veronese(&w[..4]));
        let e = random_spd(3, &mut rng);
        let opts = CensusOptions { starts: 40, seed: 1, ..Default::default() };
        let census = critical_census(k, &e, &target, &opts).unwrap();
        let best = census
            .distinct_minima
            .iter()
            .min_by(|a, b| a.loss.partial_cmp(&b.loss).unwrap())
            .unwrap();
        assert!(best.loss < 1e-12);
        let c = Mat::from_vec(k, 3, best.coefficients.clone());
        assert!(c.sub(&target).frobenius() < 1e-5 * target.frobenius());
    }
}
