//! Arithmetic backends.
//!
//! Every algorithm in this crate is written once against [`Scalar`] and then
//! instantiated three ways: `f64` for large sweeps, [`Rational`] for exact
//! certificates on small instances, and [`Fp`] (the prime field of order
//! 2³¹−1) for fast exact rank computations.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Exact rational numbers.
pub type Rational = BigRational;

/// Which arithmetic a computation was carried out in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    /// Double precision with singular-value thresholds.
    Float,
    /// The prime field of order 2³¹−1.
    FiniteField,
    /// Exact rationals.
    Rational,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Float => "float",
            Backend::FiniteField => "ff",
            Backend::Rational => "rat",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "float" | "f64" => Ok(Backend::Float),
            "ff" | "finite-field" => Ok(Backend::FiniteField),
            "rat" | "rational" | "exact" => Ok(Backend::Rational),
            other => Err(format!("unknown backend `{other}` (expected float, ff or rat)")),
        }
    }
}

/// A field element usable by every algorithm in the crate.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    const BACKEND: Backend;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_biguint(v: &BigUint) -> Self;
    fn is_zero(&self) -> bool;
    /// Multiplicative inverse, `None` for zero.
    fn inv(&self) -> Option<Self>;
    /// Lossy conversion used for reporting and tolerances.
    fn to_f64(&self) -> f64;

    /// Whether the value counts as zero at absolute tolerance `tol`.
    /// Exact backends ignore the tolerance.
    fn is_negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    /// Magnitude used for pivot selection; exact backends only need
    /// nonzero-ness so any positive value works.
    fn pivot_weight(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            1.0
        }
    }

    /// Sign in an ordered field; `None` when the field has no order.
    fn sign(&self) -> Option<std::cmp::Ordering> {
        None
    }

    fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    fn div(&self, rhs: &Self) -> Option<Self> {
        rhs.inv().map(|r| self.clone() * r)
    }
}

/// Random draws appropriate for each backend.
pub trait RandomScalar: Scalar {
    /// A weight entry for a "generic" parameter point.
    fn random_weight<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// A coordinate of a generic input sample. `attempt` widens the
    /// distribution on retries for the exact backends.
    fn random_sample<R: Rng + ?Sized>(rng: &mut R, attempt: usize) -> Self;
}

impl Scalar for f64 {
    const BACKEND: Backend = Backend::Float;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_biguint(v: &BigUint) -> Self {
        v.to_f64().unwrap_or(f64::INFINITY)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn inv(&self) -> Option<Self> {
        if *self == 0.0 {
            None
        } else {
            Some(1.0 / self)
        }
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_negligible(&self, tol: f64) -> bool {
        self.abs() <= tol
    }
    fn pivot_weight(&self) -> f64 {
        self.abs()
    }
    fn sign(&self) -> Option<std::cmp::Ordering> {
        self.partial_cmp(&0.0)
    }
    fn pow(&self, e: u32) -> Self {
        self.powi(e as i32)
    }
}

impl RandomScalar for f64 {
    fn random_weight<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random_range(-1.0..=1.0)
    }
    fn random_sample<R: Rng + ?Sized>(rng: &mut R, _attempt: usize) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for Rational {
    const BACKEND: Backend = Backend::Rational;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_biguint(v: &BigUint) -> Self {
        BigRational::from_integer(BigInt::from(v.clone()))
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn inv(&self) -> Option<Self> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(self.recip())
        }
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn sign(&self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(&Zero::zero()))
    }
    fn pivot_weight(&self) -> f64 {
        // Prefer small pivots to keep numerators short.
        if Zero::is_zero(self) {
            0.0
        } else {
            let bits = self.numer().bits() + self.denom().bits();
            1.0 / (1.0 + bits as f64)
        }
    }
}

impl RandomScalar for Rational {
    fn random_weight<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let num: i64 = rng.random_range(-9..=9);
        let den: i64 = rng.random_range(1..=4);
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn random_sample<R: Rng + ?Sized>(rng: &mut R, attempt: usize) -> Self {
        let bound = 3 + 4 * attempt as i64;
        Self::from_i64(rng.random_range(-bound..=bound))
    }
}

/// Element of the prime field of order `Fp::MODULUS` = 2³¹−1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fp(u64);

impl Fp {
    pub const MODULUS: u64 = (1 << 31) - 1;

    pub fn new(v: u64) -> Self {
        Fp(v % Self::MODULUS)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    fn reduce(v: u64) -> u64 {
        // v < 2^62; fold twice using 2^31 ≡ 1.
        let v = (v & Self::MODULUS) + (v >> 31);
        let v = (v & Self::MODULUS) + (v >> 31);
        if v >= Self::MODULUS {
            v - Self::MODULUS
        } else {
            v
        }
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, rhs: Fp) -> Fp {
        let s = self.0 + rhs.0;
        Fp(if s >= Self::MODULUS { s - Self::MODULUS } else { s })
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, rhs: Fp) -> Fp {
        Fp(if self.0 >= rhs.0 {
            self.0 - rhs.0
        } else {
            self.0 + Self::MODULUS - rhs.0
        })
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, rhs: Fp) -> Fp {
        Fp(Self::reduce(self.0 * rhs.0))
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        if self.0 == 0 {
            self
        } else {
            Fp(Self::MODULUS - self.0)
        }
    }
}

impl Scalar for Fp {
    const BACKEND: Backend = Backend::FiniteField;

    fn zero() -> Self {
        Fp(0)
    }
    fn one() -> Self {
        Fp(1)
    }
    fn from_i64(v: i64) -> Self {
        let m = Self::MODULUS as i64;
        Fp(v.rem_euclid(m) as u64)
    }
    fn from_biguint(v: &BigUint) -> Self {
        let r = v % BigUint::from(Self::MODULUS);
        Fp(r.to_u64().expect("residue fits in u64"))
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
    fn inv(&self) -> Option<Self> {
        if self.0 == 0 {
            None
        } else {
            // Fermat: a^(p-2).
            let mut e = Self::MODULUS - 2;
            let mut base = *self;
            let mut acc = Fp(1);
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc * base;
                }
                base = base * base;
                e >>= 1;
            }
            Some(acc)
        }
    }
    fn to_f64(&self) -> f64 {
        self.0 as f64
    }
}

impl RandomScalar for Fp {
    fn random_weight<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Fp(rng.random_range(0..Self::MODULUS))
    }
    fn random_sample<R: Rng + ?Sized>(rng: &mut R, _attempt: usize) -> Self {
        Fp(rng.random_range(0..Self::MODULUS))
    }
}

/// Parse a decimal (`-0.25`, `3`, `1e-3`) or fraction (`3/4`) literal exactly.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let negative = mantissa.starts_with('-');
    let body = mantissa.trim_start_matches(['-', '+']);
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    if negative {
        num = -num;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// Render a rational as `n` or `n/d`.
pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Absolute value of a rational as f64, used for scale estimates.
pub fn rational_abs_f64(q: &Rational) -> f64 {
    ToPrimitive::to_f64(&q.abs()).unwrap_or(f64::INFINITY)
}
