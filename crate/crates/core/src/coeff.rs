//! Scalars: exact Gaussian rationals, with an opt-in binary-float mode.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// A complex number with rational real and imaginary parts.
pub type Gaussian = Complex<BigRational>;

/// Number of binary digits used when bracketing irrational square roots.
const SQRT_BITS: u64 = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum Coeff {
    Exact(Gaussian),
    Float(Complex<f64>),
}

impl Coeff {
    pub fn zero() -> Self {
        Coeff::Exact(Gaussian::zero())
    }

    pub fn one() -> Self {
        Coeff::Exact(Gaussian::one())
    }

    pub fn from_i64(v: i64) -> Self {
        Coeff::Exact(Gaussian::new(rat(v), Rational::zero()))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Coeff::Exact(Gaussian::new(ratio(num, den), Rational::zero()))
    }

    pub fn from_rational(re: Rational) -> Self {
        Coeff::Exact(Gaussian::new(re, Rational::zero()))
    }

    pub fn from_gaussian(g: Gaussian) -> Self {
        Coeff::Exact(g)
    }

    pub fn from_f64(re: f64, im: f64) -> Self {
        Coeff::Float(Complex::new(re, im))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Coeff::Exact(_))
    }

    /// Literal zero; float values are zero only when both parts are `0.0`.
    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Exact(g) => g.re.is_zero() && g.im.is_zero(),
            Coeff::Float(c) => c.re == 0.0 && c.im == 0.0,
        }
    }

    /// Equality-to-zero test of the active mode. Exact values ignore `tol`.
    pub fn is_negligible(&self, tol: f64) -> bool {
        match self {
            Coeff::Exact(_) => self.is_zero(),
            Coeff::Float(c) => c.norm() <= tol,
        }
    }

    /// Exact value; floats convert without rounding (every finite `f64` is dyadic).
    pub fn to_exact(&self) -> Gaussian {
        match self {
            Coeff::Exact(g) => g.clone(),
            Coeff::Float(c) => Gaussian::new(f64_to_rational(c.re), f64_to_rational(c.im)),
        }
    }

    pub fn to_float(&self) -> Complex<f64> {
        match self {
            Coeff::Exact(g) => Complex::new(rational_to_f64(&g.re), rational_to_f64(&g.im)),
            Coeff::Float(c) => *c,
        }
    }

    pub fn as_float(&self) -> Coeff {
        Coeff::Float(self.to_float())
    }

    pub fn conj(&self) -> Coeff {
        match self {
            Coeff::Exact(g) => Coeff::Exact(g.conj()),
            Coeff::Float(c) => Coeff::Float(c.conj()),
        }
    }

    pub fn add(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(a + b),
            _ => Coeff::Float(self.to_float() + other.to_float()),
        }
    }

    pub fn sub(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(a - b),
            _ => Coeff::Float(self.to_float() - other.to_float()),
        }
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(gaussian_mul(a, b)),
            _ => Coeff::Float(self.to_float() * other.to_float()),
        }
    }

    pub fn neg(&self) -> Coeff {
        match self {
            Coeff::Exact(a) => Coeff::Exact(-a),
            Coeff::Float(c) => Coeff::Float(-c),
        }
    }

    /// Multiplicative inverse, `None` for zero.
    pub fn inv(&self) -> Option<Coeff> {
        if self.is_zero() {
            return None;
        }
        Some(match self {
            Coeff::Exact(a) => {
                let n = &a.re * &a.re + &a.im * &a.im;
                Coeff::Exact(Gaussian::new(&a.re / &n, -(&a.im / &n)))
            }
            Coeff::Float(c) => Coeff::Float(c.inv()),
        })
    }

    pub fn div(&self, other: &Coeff) -> Option<Coeff> {
        other.inv().map(|i| self.mul(&i))
    }

    pub fn pow(&self, e: u32) -> Coeff {
        let mut acc = Coeff::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        if !self.is_exact() {
            acc = acc.as_float();
        }
        acc
    }

    /// Rational upper bound for the modulus.
    pub fn abs_upper(&self) -> Rational {
        let g = self.to_exact();
        sqrt_upper(&(&g.re * &g.re + &g.im * &g.im))
    }

    /// Rational lower bound for the modulus.
    pub fn abs_lower(&self) -> Rational {
        let g = self.to_exact();
        sqrt_lower(&(&g.re * &g.re + &g.im * &g.im))
    }

    pub fn norm_sqr_exact(&self) -> Rational {
        let g = self.to_exact();
        &g.re * &g.re + &g.im * &g.im
    }
}

impl Default for Coeff {
    fn default() -> Self {
        Coeff::zero()
    }
}

impl From<i64> for Coeff {
    fn from(v: i64) -> Self {
        Coeff::from_i64(v)
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Exact(g) if g.im.is_zero() => write!(f, "{}", g.re),
            Coeff::Exact(g) => write!(f, "({} + {}i)", g.re, g.im),
            Coeff::Float(c) if c.im == 0.0 => write!(f, "{}", c.re),
            Coeff::Float(c) => write!(f, "({} + {}i)", c.re, c.im),
        }
    }
}

fn gaussian_mul(a: &Gaussian, b: &Gaussian) -> Gaussian {
    // Most data is real; skip the cross terms when possible.
    match (a.im.is_zero(), b.im.is_zero()) {
        (true, true) => Gaussian::new(&a.re * &b.re, Rational::zero()),
        (true, false) => Gaussian::new(&a.re * &b.re, &a.re * &b.im),
        (false, true) => Gaussian::new(&a.re * &b.re, &a.im * &b.re),
        (false, false) => a * b,
    }
}

pub fn rat(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn f64_to_rational(v: f64) -> Rational {
    Rational::from_float(v).unwrap_or_else(Rational::zero)
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"p/q"`, `"p"` or a decimal literal such as `"0.125"` / `"1e-3"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| schema(s))?;
        let q = BigInt::from_str(q.trim()).map_err(|_| schema(s))?;
        if q.is_zero() {
            return Err(schema(s));
        }
        return Ok(Rational::new(p, q));
    }
    if let Ok(i) = BigInt::from_str(s) {
        return Ok(Rational::from_integer(i));
    }
    parse_decimal(s).ok_or_else(|| schema(s))
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(p) => (&s[..p], s[p + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let mut value = Rational::from_integer(BigInt::from_str(&digits).ok()?);
    let shift = exp - frac.len() as i32;
    let ten = rat(10);
    if shift >= 0 {
        value *= num_traits::pow(ten, shift as usize);
    } else {
        value /= num_traits::pow(ten, (-shift) as usize);
    }
    Some(if neg { -value } else { value })
}

fn schema(s: &str) -> Error {
    Error::Schema(format!("not a rational number: {s:?}"))
}

/// Smallest representable upper bound of `sqrt(x)` at `SQRT_BITS` precision; exact on perfect squares.
pub fn sqrt_upper(x: &Rational) -> Rational {
    sqrt_bracket(x).1
}

pub fn sqrt_lower(x: &Rational) -> Rational {
    sqrt_bracket(x).0
}

fn sqrt_bracket(x: &Rational) -> (Rational, Rational) {
    if !x.is_positive() {
        return (Rational::zero(), Rational::zero());
    }
    let p = x.numer();
    let q = x.denom();
    // sqrt(p/q) = sqrt(p*q)/q
    let pq = p * q;
    let s = pq.sqrt();
    if &s * &s == pq {
        let r = Rational::new(s, q.clone());
        return (r.clone(), r);
    }
    let scale = BigInt::one() << SQRT_BITS;
    let scaled = pq * &scale * &scale;
    let fl = scaled.sqrt();
    let den = q * &scale;
    (
        Rational::new(fl.clone(), den.clone()),
        Rational::new(fl + BigInt::one(), den),
    )
}

/// Serialized form `{re: "p/q", im: "p/q"}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CoeffDoc {
    pub re: String,
    #[serde(default = "zero_string")]
    pub im: String,
}

fn zero_string() -> String {
    "0".to_string()
}

impl CoeffDoc {
    pub fn to_coeff(&self) -> Result<Coeff> {
        Ok(Coeff::Exact(Gaussian::new(
            parse_rational(&self.re)?,
            parse_rational(&self.im)?,
        )))
    }

    pub fn to_gaussian(&self) -> Result<Gaussian> {
        Ok(Gaussian::new(parse_rational(&self.re)?, parse_rational(&self.im)?))
    }
}

impl From<&Coeff> for CoeffDoc {
    fn from(c: &Coeff) -> Self {
        match c {
            Coeff::Exact(g) => CoeffDoc::from(g),
            Coeff::Float(f) => CoeffDoc {
                re: format!("{}", f.re),
                im: format!("{}", f.im),
            },
        }
    }
}

impl From<&Gaussian> for CoeffDoc {
    fn from(g: &Gaussian) -> Self {
        CoeffDoc {
            re: g.re.to_string(),
            im: g.im.to_string(),
        }
    }
}

/// serde adapter for rationals as `"p/q"` strings.
pub mod rational_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&q.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

pub mod rational_vec_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|q| q.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Optional rational; `null` (or a missing field) stands for "unbounded".
pub mod opt_rational_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match q {
            Some(q) => s.serialize_some(&q.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// serde adapter for points given as lists of coefficient documents.
pub mod gaussian_vec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Gaussian], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(CoeffDoc::from))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Gaussian>, D::Error> {
        let v = Vec::<CoeffDoc>::deserialize(d)?;
        v.iter()
            .map(|c| c.to_gaussian().map_err(serde::de::Error::custom))
            .collect()
    }
}
