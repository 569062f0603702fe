//! Membership tests for the neuromanifolds and neurovarieties that admit an
//! explicit description.
//!
//! Every test takes raw polynomial coefficients. Exact backends ignore the
//! tolerance; in floating point, minors are compared after normalizing the
//! input so the tolerance is relative.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PnnError, Result};
use crate::linalg::{combinations, Mat};
use crate::network::{Architecture, CoefficientVector, WeightVector};
use crate::rng::seeded;
use crate::scalar::{Backend, RandomScalar, Scalar};
use crate::symtensor::{monomial_count, monomial_rank, poly_to_tensor, power_form, DenseTensor, HomogeneousPoly, RankOneVerdict};

const FIT_RETRIES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub in_variety: bool,
    pub in_manifold: Answer,
    /// Why a "no" was returned, or how a "yes" was established.
    pub certificate: Option<String>,
    pub tolerance: f64,
    /// Set when the point lies on the algebraic boundary within tolerance.
    pub boundary: bool,
}

impl MembershipVerdict {
    fn equal_sets(inside: bool, certificate: Option<String>, tolerance: f64) -> Self {
        MembershipVerdict {
            in_variety: inside,
            in_manifold: if inside { Answer::Yes } else { Answer::No },
            certificate,
            tolerance,
            boundary: false,
        }
    }
}

fn effective_tol<S: Scalar>(tol: f64) -> f64 {
    if S::BACKEND == Backend::Float {
        tol
    } else {
        0.0
    }
}

/// Rank with a certificate: exact rank and a nonsingular principal block for
/// exact symmetric input, or singular values in floating point.
fn symmetric_rank<S: Scalar>(m: &Mat<S>, tol: f64) -> (usize, String) {
    match S::BACKEND {
        Backend::Float => {
            let r = m.to_f64().svd_rank(tol);
            let sv: Vec<String> = r.singular_values.iter().map(|s| format!("{s:.6e}")).collect();
            (r.rank, format!("singular values [{}] at relative threshold {tol:e}", sv.join(", ")))
        }
        _ => {
            let mut t = m.transpose();
            let pivots = t.rref_in_place(0.0);
            let det = m.submatrix(&pivots, &pivots).determinant();
            (pivots.len(), format!("principal minor on indices {pivots:?} equals {det:?}"))
        }
    }
}

/// Symmetric matrix of a quadric: `c_{ii}` on the diagonal, `½c_{ij}` off it.
pub fn gram_matrix<S: Scalar>(p: &HomogeneousPoly<S>) -> Result<Mat<S>> {
    if p.degree() != 2 {
        return Err(PnnError::InvalidInput(format!("expected a quadric, got degree {}", p.degree())));
    }
    let n = p.n_vars();
    let half = S::from_i64(2).inv().expect("2 is invertible");
    Ok(Mat::from_fn(n, n, |i, j| {
        let mut e = vec![0u32; n];
        e[i] += 1;
        e[j] += 1;
        let c = p.coeffs()[monomial_rank(&e)].clone();
        if i == j {
            c
        } else {
            c * half.clone()
        }
    }))
}

/// `(d₀, d₁, 1)` with `r = 2`: quadrics whose Gram matrix has rank at most `d₁`.
pub fn member_shallow_single_output_r2<S: Scalar>(p: &HomogeneousPoly<S>, d1: usize, tol: f64) -> Result<MembershipVerdict> {
    let tol = effective_tol::<S>(tol);
    let g = gram_matrix(p)?;
    let (rank, detail) = symmetric_rank(&g, tol);
    let inside = rank <= d1;
    Ok(MembershipVerdict::equal_sets(
        inside,
        Some(format!("Gram matrix has rank {rank} (bound {d1}); {detail}")),
        tol,
    ))
}

/// `(d₀, 1, d₂)`: tuples `(λ₁ℓʳ, …, λ_{d₂}ℓʳ)`, i.e. the stacked tensor has rank at most one.
pub fn member_d0_1_d2<S: Scalar>(polys: &CoefficientVector<S>, tol: f64) -> MembershipVerdict {
    let tol = effective_tol::<S>(tol);
    let blocks: Vec<DenseTensor<S>> = polys.polys().iter().map(|p| poly_to_tensor(p).to_dense()).collect();
    let stacked = DenseTensor::stack(&blocks).expect("blocks share a shape");
    match stacked.is_rank_one(tol) {
        RankOneVerdict::Zero => MembershipVerdict::equal_sets(true, Some("zero tuple".into()), tol),
        RankOneVerdict::RankOne => {
            MembershipVerdict::equal_sets(true, Some("all 2x2 minors of all flattenings vanish".into()), tol)
        }
        RankOneVerdict::NotRankOne(w) => MembershipVerdict::equal_sets(false, Some(w.to_string()), tol),
    }
}

fn check_k_by_3<S: Scalar>(c: &Mat<S>) -> Result<()> {
    if c.cols() != 3 || c.rows() == 0 {
        return Err(PnnError::InvalidInput(format!(
            "expected a k x 3 matrix with columns (c11, c12, c22), got {:?}",
            c.shape()
        )));
    }
    Ok(())
}

fn require_order<S: Scalar>() -> Result<()> {
    if S::BACKEND == Backend::FiniteField {
        return Err(PnnError::InvalidInput("inequalities need an ordered field; use the float or rational backend".into()));
    }
    Ok(())
}

fn frobenius<S: Scalar>(c: &Mat<S>) -> f64 {
    c.to_f64().frobenius()
}

/// A nonvanishing 3×3 minor, if any. Float minors are compared against `tol · ‖C‖³`.
fn nonzero_3x3_minor<S: Scalar>(c: &Mat<S>, tol: f64) -> Option<(Vec<usize>, f64)> {
    let scale = frobenius(c).powi(3);
    for rows in combinations(c.rows(), 3) {
        let det = c.submatrix(&rows, &[0, 1, 2]).determinant();
        let small = match S::BACKEND {
            Backend::Float => det.to_f64().abs() <= tol * scale,
            _ => det.is_zero(),
        };
        if !small {
            return Some((rows, det.to_f64()));
        }
    }
    None
}

/// `(2, 2, k)` with `r = 2`: the `k × 3` coefficient matrix has rank at most 2.
pub fn variety_member_22k<S: Scalar>(c: &Mat<S>, tol: f64) -> Result<bool> {
    check_k_by_3(c)?;
    Ok(nonzero_3x3_minor(c, effective_tol::<S>(tol)).is_none())
}

/// Column-pair minors `(M₁₂, M₁₃, M₂₃)` of a `2 × 3` matrix.
pub fn column_minors<S: Scalar>(c: &Mat<S>) -> (S, S, S) {
    let m = |a: usize, b: usize| c[(0, a)].clone() * c[(1, b)].clone() - c[(0, b)].clone() * c[(1, a)].clone();
    (m(0, 1), m(0, 2), m(1, 2))
}

/// The discriminant `M₁₃² − M₁₂M₂₃`.
pub fn discriminant_222<S: Scalar>(c: &Mat<S>) -> S {
    let (m12, m13, m23) = column_minors(c);
    m13.clone() * m13 - m12 * m23
}

fn pair_check<S: Scalar>(c: &Mat<S>, tol: f64) -> (bool, bool, f64) {
    let disc = discriminant_222(c);
    let d = disc.to_f64();
    match S::BACKEND {
        Backend::Float => {
            let scale = frobenius(c).powi(4);
            let slack = tol * scale;
            (d >= -slack, d.abs() <= slack, d)
        }
        _ => {
            let zero = disc.is_zero();
            (disc.sign() != Some(std::cmp::Ordering::Less), zero, d)
        }
    }
}

/// `(2, 2, 2)` with `r = 2`: inside iff `M₁₃² ≥ M₁₂M₂₃`. The variety is the whole space.
pub fn manifold_member_222<S: Scalar>(c: &Mat<S>, tol: f64) -> Result<MembershipVerdict> {
    check_k_by_3(c)?;
    require_order::<S>()?;
    if c.rows() != 2 {
        return Err(PnnError::InvalidInput(format!("expected a 2 x 3 matrix, got {:?}", c.shape())));
    }
    let tol = effective_tol::<S>(tol);
    let (ok, boundary, d) = pair_check(c, tol);
    let (m12, m13, m23) = column_minors(c);
    let detail = format!(
        "M12 = {:?}, M13 = {:?}, M23 = {:?}, M13^2 - M12*M23 = {d:e}",
        m12, m13, m23
    );
    Ok(MembershipVerdict {
        in_variety: true,
        in_manifold: if ok { Answer::Yes } else { Answer::No },
        certificate: Some(detail),
        tolerance: tol,
        boundary,
    })
}

/// `(2, 2, k)` with `r = 2`: every pair of rows must satisfy the `(2,2,2)`
/// inequality. Passing the screen is only necessary, so the answer is then
/// "unknown" for `k > 2`.
pub fn manifold_member_22k_pairwise<S: Scalar>(c: &Mat<S>, tol: f64) -> Result<MembershipVerdict> {
    check_k_by_3(c)?;
    require_order::<S>()?;
    if c.rows() < 2 {
        return Err(PnnError::InvalidInput("pairwise screen needs at least two rows".into()));
    }
    if c.rows() == 2 {
        return manifold_member_222(c, tol);
    }
    let tol = effective_tol::<S>(tol);
    if let Some((rows, det)) = nonzero_3x3_minor(c, tol) {
        return Ok(MembershipVerdict {
            in_variety: false,
            in_manifold: Answer::No,
            certificate: Some(format!("3x3 minor on rows {rows:?} equals {det:e}")),
            tolerance: tol,
            boundary: false,
        });
    }
    let mut boundary = false;
    for pair in combinations(c.rows(), 2) {
        let sub = c.submatrix(&pair, &[0, 1, 2]);
        let (ok, on_boundary, d) = pair_check(&sub, tol);
        boundary |= on_boundary;
        if !ok {
            return Ok(MembershipVerdict {
                in_variety: true,
                in_manifold: Answer::No,
                certificate: Some(format!("rows {pair:?} give M13^2 - M12*M23 = {d:e} < 0")),
                tolerance: tol,
                boundary,
            });
        }
    }
    Ok(MembershipVerdict {
        in_variety: true,
        in_manifold: Answer::Unknown,
        certificate: Some("rank at most 2 and every row pair passes; the screen is not sufficient".into()),
        tolerance: tol,
        boundary,
    })
}

/// Weights realizing `target` on a shallow architecture whose hidden width is
/// at least the number of monomials of degree `r`.
pub fn exact_fit<S: RandomScalar>(target: &CoefficientVector<S>, arch: &Architecture, seed: u64) -> Result<WeightVector<S>> {
    if arch.layers() != 2 {
        return Err(PnnError::InvalidArchitecture(format!("exact_fit needs two layers, got {arch}")));
    }
    let (d0, d1, d2) = (arch.widths()[0], arch.widths()[1], arch.widths()[2]);
    let r = arch.activation_degree();
    let n = monomial_count(d0, r as usize);
    if d1 < n {
        return Err(PnnError::InvalidArchitecture(format!(
            "hidden width {d1} is below the {n} monomials of degree {r} in {d0} variables"
        )));
    }
    if target.n_vars() != d0 || target.degree() != r as usize || target.outputs() != d2 {
        return Err(PnnError::InvalidInput(format!("target does not match {arch}")));
    }
    let c = target.as_matrix();
    let mut rng = seeded(seed);
    for _ in 0..FIT_RETRIES {
        let w1 = Mat::from_fn(d1, d0, |_, _| S::random_weight(&mut rng));
        if let Some(w) = fit_with(arch, &w1, &c) {
            if S::BACKEND != Backend::Float || fit_residual(arch, &w, target) <= 1e-9 * c.to_f64().frobenius().max(1.0) {
                return Ok(w);
            }
        }
    }
    Err(PnnError::Computation(format!("Veronese matrix stayed singular after {FIT_RETRIES} draws")))
}

fn fit_with<S: Scalar>(arch: &Architecture, w1: &Mat<S>, c: &Mat<S>) -> Option<WeightVector<S>> {
    let r = arch.activation_degree();
    let d1 = w1.rows();
    let rows: Vec<Vec<S>> = (0..d1).map(|i| power_form(w1.row(i), r, &S::one()).into_coeffs()).collect();
    let v = Mat::from_rows(&rows);
    let n = v.cols();
    let tol = if S::BACKEND == Backend::Float { 1e-10 * v.to_f64().max_abs() } else { 0.0 };
    let mut vt = v.transpose();
    let pivots = vt.rref_in_place(tol);
    if pivots.len() < n {
        return None;
    }
    let block = v.submatrix(&pivots, &(0..n).collect::<Vec<_>>());
    // W2_I · V_I = C  ⇔  V_Iᵀ · W2_Iᵀ = Cᵀ
    let x = block.transpose().solve(&c.transpose(), tol)?;
    let mut w2 = Mat::zeros(c.rows(), d1);
    for (k, &row) in pivots.iter().enumerate() {
        for j in 0..c.rows() {
            w2[(j, row)] = x[(k, j)].clone();
        }
    }
    WeightVector::new(arch, vec![w1.clone(), w2]).ok()
}

fn fit_residual<S: Scalar>(arch: &Architecture, w: &WeightVector<S>, target: &CoefficientVector<S>) -> f64 {
    match crate::network::coefficients(arch, w) {
        Ok(got) => got
            .to_flat()
            .iter()
            .zip(target.to_flat())
            .map(|(a, b)| (a.clone() - b).to_f64().powi(2))
            .sum::<f64>()
            .sqrt(),
        Err(_) => f64::INFINITY,
    }
}

/// The family `[[a, s, −a], [b, t, −b]]` in raw coefficients, which lies
/// outside the `(2,2,2)` neuromanifold whenever `at ≠ bs`.
pub fn rank1_violation_matrix<S: Scalar>(a: S, b: S, s: S, t: S) -> Mat<S> {
    Mat::from_rows(&[vec![a.clone(), s, -a], vec![b.clone(), t, -b]])
}

/// The default instance `a = 1, b = 2`, both starred entries `1`, and its verdict.
pub fn known_rank1_violation_example<S: Scalar>() -> (Mat<S>, MembershipVerdict) {
    let m = rank1_violation_matrix(S::one(), S::from_i64(2), S::one(), S::one());
    let v = manifold_member_222(&m, 1e-9).expect("2 x 3 input");
    (m, v)
}

/// Dispatch to whichever test applies to `arch`.
pub fn member<S: RandomScalar>(arch: &Architecture, polys: &CoefficientVector<S>, tol: f64, seed: u64) -> Result<MembershipVerdict> {
    let widths = arch.widths();
    let r = arch.activation_degree();
    if polys.n_vars() != arch.input_dim() || polys.degree() != arch.output_degree() as usize || polys.outputs() != arch.output_dim() {
        return Err(PnnError::InvalidInput(format!(
            "input has {} polynomial(s) of degree {} in {} variable(s); {arch} needs {} of degree {} in {}",
            polys.outputs(),
            polys.degree(),
            polys.n_vars(),
            arch.output_dim(),
            arch.output_degree(),
            arch.input_dim()
        )));
    }
    if arch.layers() != 2 {
        return Err(PnnError::InvalidArchitecture(format!("no membership test is implemented for {arch}")));
    }
    let (d0, d1, d2) = (widths[0], widths[1], widths[2]);
    if d1 >= monomial_count(d0, r as usize) {
        let w = exact_fit(polys, arch, seed)?;
        return Ok(MembershipVerdict {
            in_variety: true,
            in_manifold: Answer::Yes,
            certificate: Some(format!("preimage weights W1 = {:?}, W2 = {:?}", w.layer(1).data(), w.layer(2).data())),
            tolerance: effective_tol::<S>(tol),
            boundary: false,
        });
    }
    if d1 == 1 {
        return Ok(member_d0_1_d2(polys, tol));
    }
    if r == 2 && d2 == 1 {
        return member_shallow_single_output_r2(&polys.polys()[0], d1, tol);
    }
    if r == 2 && d0 == 2 && d1 == 2 {
        return manifold_member_22k_pairwise(&polys.as_matrix(), tol);
    }
    Err(PnnError::InvalidArchitecture(format!("no membership test is implemented for {arch}")))
}

/// Random image point under the parameter map, used by soundness checks.
pub fn random_image<S: RandomScalar, R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<CoefficientVector<S>> {
    let w = WeightVector::<S>::random(arch, rng);
    crate::network::coefficients(arch, &w)
}
