#![allow(dead_code)]

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigUint;
use pnn_core::dimension::JacobianReport;
use pnn_core::linalg::Mat;
use pnn_core::network::{coefficients, Architecture, WeightVector};
use pnn_core::scalar::{Backend, Rational, Scalar};

/// Exact first-order dual number: `value + Σ tangent[k]·ε_k` with `ε_i ε_j = 0`.
/// An empty tangent stands for the zero vector.
#[derive(Clone, PartialEq)]
pub struct Dual {
    pub value: Rational,
    pub tangent: Vec<Rational>,
}

impl fmt::Debug for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {:?}ε", self.value, self.tangent)
    }
}

impl Dual {
    pub fn constant(value: Rational) -> Self {
        Dual { value, tangent: Vec::new() }
    }

    pub fn variable(value: Rational, index: usize, count: usize) -> Self {
        let mut tangent = vec![<Rational as Scalar>::zero(); count];
        tangent[index] = <Rational as Scalar>::one();
        Dual { value, tangent }
    }

    pub fn derivative(&self, k: usize) -> Rational {
        self.tangent.get(k).cloned().unwrap_or_else(<Rational as Scalar>::zero)
    }
}

fn combine(a: &[Rational], sa: &Rational, b: &[Rational], sb: &Rational) -> Vec<Rational> {
    let n = a.len().max(b.len());
    let zero = <Rational as Scalar>::zero();
    (0..n)
        .map(|k| {
            let x = a.get(k).unwrap_or(&zero);
            let y = b.get(k).unwrap_or(&zero);
            x * sa + y * sb
        })
        .collect()
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        let one = <Rational as Scalar>::one();
        Dual { value: self.value + rhs.value, tangent: combine(&self.tangent, &one, &rhs.tangent, &one) }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        self + (-rhs)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { value: -self.value, tangent: self.tangent.into_iter().map(|t| -t).collect() }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        let tangent = combine(&self.tangent, &rhs.value, &rhs.tangent, &self.value);
        Dual { value: self.value * rhs.value, tangent }
    }
}

impl Scalar for Dual {
    const BACKEND: Backend = Backend::Rational;

    fn zero() -> Self {
        Dual::constant(<Rational as Scalar>::zero())
    }
    fn one() -> Self {
        Dual::constant(<Rational as Scalar>::one())
    }
    fn from_i64(v: i64) -> Self {
        Dual::constant(Rational::from_i64(v))
    }
    fn from_biguint(v: &BigUint) -> Self {
        Dual::constant(Rational::from_biguint(v))
    }
    fn is_zero(&self) -> bool {
        Scalar::is_zero(&self.value) && self.tangent.iter().all(Scalar::is_zero)
    }
    fn inv(&self) -> Option<Self> {
        let v = self.value.inv()?;
        let s = -(v.clone() * v.clone());
        let zero = <Rational as Scalar>::zero();
        Some(Dual { value: v, tangent: combine(&self.tangent, &s, &[], &zero) })
    }
    fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

/// Jacobian of the parameter map by forward-mode differentiation of the
/// exact coefficient computation; same layout as [`JacobianReport::matrix`].
pub fn symbolic_jacobian(arch: &Architecture, w: &WeightVector<Rational>) -> Mat<Rational> {
    let flat = w.to_flat();
    let p = flat.len();
    let duals: Vec<Dual> = flat.into_iter().enumerate().map(|(k, v)| Dual::variable(v, k, p)).collect();
    let wd = WeightVector::from_flat(arch, &duals).expect("shape");
    let c = coefficients(arch, &wd).expect("coefficients").to_flat();
    Mat::from_fn(c.len(), p, |row, k| c[row].derivative(k))
}

pub fn same_matrix(report: &JacobianReport<Rational>, expected: &Mat<Rational>) -> bool {
    report.matrix.shape() == expected.shape() && report.matrix.data() == expected.data()
}

/// Architectures with widths in `1..=max_width`, `layers` weight matrices,
/// `r` in `1..=max_r` and ambient dimension at most `max_ambient`.
pub fn small_architectures(max_width: usize, layers: &[usize], max_r: u32, max_ambient: usize) -> Vec<Architecture> {
    let mut out = Vec::new();
    for &l in layers {
        let count = l + 1;
        let total = max_width.pow(count as u32);
        for code in 0..total {
            let mut widths = Vec::with_capacity(count);
            let mut c = code;
            for _ in 0..count {
                widths.push(c % max_width + 1);
                c /= max_width;
            }
            for r in 1..=max_r {
                let Ok(a) = Architecture::new(widths.clone(), r) else { continue };
                if a.ambient_dim() <= max_ambient {
                    out.push(a);
                }
            }
        }
    }
    out
}

/// Worst relative gap between the backpropagated gradient of every output and
/// central differences of [`forward`](pnn_core::network::forward), scaled by
/// `max(1, ‖g‖∞)`.
pub fn finite_difference_gap(arch: &Architecture, w: &WeightVector<f64>, x: &[f64]) -> f64 {
    use pnn_core::dimension::backprop_all;
    use pnn_core::network::forward;

    let flat = w.to_flat();
    let grads = backprop_all(arch, w, x);
    let mut worst: f64 = 0.0;
    for (k, &v) in flat.iter().enumerate() {
        let h = 1e-5 * v.abs().max(1.0);
        let mut plus = flat.clone();
        let mut minus = flat.clone();
        plus[k] = v + h;
        minus[k] = v - h;
        let fp = forward(arch, &WeightVector::from_flat(arch, &plus).unwrap(), x).unwrap();
        let fm = forward(arch, &WeightVector::from_flat(arch, &minus).unwrap(), x).unwrap();
        for (j, g) in grads.iter().enumerate() {
            let fd = (fp[j] - fm[j]) / (2.0 * h);
            let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            worst = worst.max((fd - g[k]).abs() / scale);
        }
    }
    worst
}
