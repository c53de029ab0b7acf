//! Truncated multivariate power series with sparse storage.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::coeff::{Coeff, CoeffDoc, Gaussian, Rational};
use crate::error::{Error, Result};

/// Exponent vector. Ordered graded-lexicographically: by total degree, then
/// with earlier variables ranking first (`1, x, y, x^2, xy, y^2, ...`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial(exps)
    }

    pub fn one(num_vars: usize) -> Self {
        Monomial(vec![0; num_vars])
    }

    pub fn var(num_vars: usize, i: usize) -> Self {
        let mut e = vec![0; num_vars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exps(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn times(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Total degree restricted to the variables in `vars`.
    pub fn degree_in(&self, vars: std::ops::Range<usize>) -> u32 {
        self.0[vars].iter().sum()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A power series in `num_vars` variables truncated above total degree `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    num_vars: usize,
    order: u32,
    terms: BTreeMap<Monomial, Coeff>,
}

impl Jet {
    pub fn zero(num_vars: usize, order: u32) -> Self {
        Jet {
            num_vars,
            order,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, order: u32, c: Coeff) -> Self {
        let mut j = Jet::zero(num_vars, order);
        if !c.is_zero() {
            j.terms.insert(Monomial::one(num_vars), c);
        }
        j
    }

    pub fn one(num_vars: usize, order: u32) -> Self {
        Jet::constant(num_vars, order, Coeff::one())
    }

    /// The coordinate function `x_i`; zero when `order == 0`.
    pub fn var(num_vars: usize, order: u32, i: usize) -> Self {
        assert!(i < num_vars, "variable {i} out of range for {num_vars} variables");
        let mut j = Jet::zero(num_vars, order);
        if order >= 1 {
            j.terms.insert(Monomial::var(num_vars, i), Coeff::one());
        }
        j
    }

    pub fn monomial(num_vars: usize, order: u32, exps: &[u32], c: Coeff) -> Result<Self> {
        Jet::from_terms(num_vars, order, [(exps.to_vec(), c)])
    }

    /// Builds a jet from `(exponents, coeff)` pairs. Duplicate exponents are summed,
    /// terms above `order` dropped and zero coefficients pruned.
    pub fn from_terms<I>(num_vars: usize, order: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Coeff)>,
    {
        let mut j = Jet::zero(num_vars, order);
        for (exps, c) in terms {
            if exps.len() != num_vars {
                return Err(Error::Shape(format!(
                    "exponent vector of length {} in a jet of {num_vars} variables",
                    exps.len()
                )));
            }
            let m = Monomial(exps);
            if m.degree() > order {
                continue;
            }
            j.accumulate(m, c);
        }
        j.prune();
        Ok(j)
    }

    fn accumulate(&mut self, m: Monomial, c: Coeff) {
        match self.terms.get_mut(&m) {
            Some(v) => *v = v.add(&c),
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| !c.is_zero());
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Number of stored (nonzero) terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Zero up to the tolerance of the coefficient mode.
    pub fn is_negligible(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.is_negligible(tol))
    }

    pub fn is_exact(&self) -> bool {
        self.terms.values().all(Coeff::is_exact)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: &[u32]) -> Coeff {
        self.terms
            .get(&Monomial(exps.to_vec()))
            .cloned()
            .unwrap_or_else(Coeff::zero)
    }

    pub fn constant_term(&self) -> Coeff {
        self.coeff(&vec![0; self.num_vars])
    }

    /// Highest total degree present, `None` for the zero jet.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(Monomial::degree)
    }

    /// Lowest total degree present.
    pub fn valuation(&self) -> Option<u32> {
        self.terms.keys().next().map(Monomial::degree)
    }

    fn check_shape(&self, other: &Jet) -> Result<()> {
        if self.num_vars != other.num_vars || self.order != other.order {
            return Err(Error::Shape(format!(
                "jet in {} vars at order {} vs jet in {} vars at order {}",
                self.num_vars, self.order, other.num_vars, other.order
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(m.clone(), c.clone());
        }
        out.prune();
        Ok(out)
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(m.clone(), c.neg());
        }
        out.prune();
        Ok(out)
    }

    /// Product truncated to `order`.
    pub fn try_mul(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        let mut out = Jet::zero(self.num_vars, self.order);
        for (ma, ca) in &self.terms {
            let da = ma.degree();
            // Terms iterate in increasing degree, so the inner loop can stop early.
            for (mb, cb) in &other.terms {
                if da + mb.degree() > self.order {
                    break;
                }
                out.accumulate(ma.times(mb), ca.mul(cb));
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, c: &Coeff) -> Jet {
        let mut out = Jet::zero(self.num_vars, self.order);
        for (m, v) in &self.terms {
            out.terms.insert(m.clone(), v.mul(c));
        }
        out.prune();
        out
    }

    /// `self^e`, truncated.
    pub fn pow(&self, e: u32) -> Jet {
        let mut acc = Jet::one(self.num_vars, self.order);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Formal partial derivative in variable `var`; the result carries order `K - 1`.
    pub fn partial(&self, var: usize) -> Result<Jet> {
        if var >= self.num_vars {
            return Err(Error::Shape(format!(
                "partial derivative in variable {var} of a jet in {} variables",
                self.num_vars
            )));
        }
        let mut out = Jet::zero(self.num_vars, self.order.saturating_sub(1));
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[var] -= 1;
            out.terms.insert(Monomial(exps), c.mul(&Coeff::from_i64(e as i64)));
        }
        out.prune();
        Ok(out)
    }

    /// Same terms, relabelled with truncation order `order` (dropping terms above it).
    pub fn with_order(&self, order: u32) -> Jet {
        let mut out = Jet::zero(self.num_vars, order);
        for (m, c) in &self.terms {
            if m.degree() <= order {
                out.terms.insert(m.clone(), c.clone());
            }
        }
        out
    }

    pub fn retain_terms(&self, mut keep: impl FnMut(&Monomial) -> bool) -> Jet {
        let mut out = self.clone();
        out.terms.retain(|m, _| keep(m));
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&Coeff) -> Coeff) -> Jet {
        let mut out = Jet::zero(self.num_vars, self.order);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), f(c));
        }
        out.prune();
        out
    }

    pub fn to_float(&self) -> Jet {
        self.map_coeffs(Coeff::as_float)
    }

    pub fn to_exact(&self) -> Jet {
        self.map_coeffs(|c| Coeff::Exact(c.to_exact()))
    }

    /// Substitutes `x_v -> -x_v`.
    pub fn reflect(&self, var: usize) -> Jet {
        let mut out = self.clone();
        for (m, c) in out.terms.iter_mut() {
            if m.0[var] % 2 == 1 {
                *c = c.neg();
            }
        }
        out
    }

    /// Sets the listed variables to zero, keeping the variable count.
    pub fn set_zero(&self, vars: &[usize]) -> Jet {
        self.retain_terms(|m| vars.iter().all(|&v| m.0[v] == 0))
    }

    /// Re-indexes into `new_vars` variables; variable `i` becomes `map[i]`.
    pub fn reindex(&self, new_vars: usize, map: &[usize]) -> Result<Jet> {
        if map.len() != self.num_vars || map.iter().any(|&v| v >= new_vars) {
            return Err(Error::Shape("variable map does not fit".into()));
        }
        let mut out = Jet::zero(new_vars, self.order);
        for (m, c) in &self.terms {
            let mut exps = vec![0; new_vars];
            for (i, &e) in m.0.iter().enumerate() {
                exps[map[i]] += e;
            }
            out.accumulate(Monomial(exps), c.clone());
        }
        out.prune();
        Ok(out)
    }

    /// Keeps the first `k` variables after discarding every term that involves the others.
    pub fn restrict_to_leading(&self, k: usize) -> Jet {
        let mut out = Jet::zero(k, self.order);
        for (m, c) in &self.terms {
            if m.0[k..].iter().all(|&e| e == 0) {
                out.terms.insert(Monomial(m.0[..k].to_vec()), c.clone());
            }
        }
        out
    }

    /// Appends `extra` variables that do not occur.
    pub fn extend_vars(&self, extra: usize) -> Jet {
        let map: Vec<usize> = (0..self.num_vars).collect();
        self.reindex(self.num_vars + extra, &map)
            .expect("identity map always fits")
    }

    /// Evaluates the polynomial representative at a point.
    pub fn eval(&self, point: &[Coeff]) -> Result<Coeff> {
        if point.len() != self.num_vars {
            return Err(Error::Dimension {
                expected: self.num_vars,
                found: point.len(),
            });
        }
        if self.is_exact() && point.iter().all(Coeff::is_exact) {
            let p: Vec<Gaussian> = point.iter().map(Coeff::to_exact).collect();
            return Ok(Coeff::Exact(self.eval_exact(&p)));
        }
        let powers = PowerTable::new(point, self.order);
        let mut acc = Coeff::Float(num_complex::Complex::new(0.0, 0.0));
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = t.mul(&powers.get(i, e));
                }
            }
            acc = acc.add(&t);
        }
        Ok(acc.as_float())
    }

    /// Exact evaluation at a Gaussian-rational point (panics on dimension mismatch).
    pub fn eval_exact(&self, point: &[Gaussian]) -> Gaussian {
        assert_eq!(point.len(), self.num_vars, "evaluation point dimension");
        self.eval_with(&PointPowers::new(point, self.order))
    }

    /// Exact evaluation reusing precomputed powers of the point.
    pub fn eval_with(&self, pp: &PointPowers) -> Gaussian {
        assert_eq!(pp.pows.len(), self.num_vars, "evaluation point dimension");
        assert!(pp.order >= self.order, "point powers computed to a lower order");
        if self.terms.is_empty() {
            return Gaussian::zero();
        }
        // Clear coefficient denominators, then homogenize with powers of the point denominator.
        let exact: Vec<(&Monomial, Gaussian)> = self.terms.iter().map(|(m, c)| (m, c.to_exact())).collect();
        let mut l = BigInt::one();
        for (_, c) in &exact {
            l = l.lcm(c.re.denom()).lcm(c.im.denom());
        }
        let k = self.order as usize;
        let (mut sr, mut si) = (BigInt::zero(), BigInt::zero());
        for (m, c) in &exact {
            let ar = c.re.numer() * (&l / c.re.denom());
            let ai = c.im.numer() * (&l / c.im.denom());
            let (mut xr, mut xi) = (BigInt::one(), BigInt::zero());
            let mut deg = 0usize;
            for (v, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    let (pr, pi) = &pp.pows[v][e as usize];
                    let nr = &xr * pr - &xi * pi;
                    let ni = &xr * pi + &xi * pr;
                    xr = nr;
                    xi = ni;
                    deg += e as usize;
                }
            }
            let scale = &pp.den_pows[k - deg];
            sr += (&ar * &xr - &ai * &xi) * scale;
            si += (&ar * &xi + &ai * &xr) * scale;
        }
        let total = l * &pp.den_pows[k];
        Gaussian::new(Rational::new(sr, total.clone()), Rational::new(si, total))
    }

    /// Taylor shift: the polynomial `u -> self(center + u)`, same order.
    pub fn shift(&self, center: &[Gaussian]) -> Result<Jet> {
        if center.len() != self.num_vars {
            return Err(Error::Dimension {
                expected: self.num_vars,
                found: center.len(),
            });
        }
        if center.iter().all(|c| c.is_zero()) {
            return Ok(self.clone());
        }
        // (c + u)^e expanded per variable, cached by (variable, exponent).
        let n = self.num_vars;
        let mut cache: BTreeMap<(usize, u32), Jet> = BTreeMap::new();
        let mut out = Jet::zero(n, self.order);
        for (m, c) in &self.terms {
            let mut t = Jet::constant(n, self.order, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let factor = cache
                    .entry((i, e))
                    .or_insert_with(|| {
                        let lin = Jet::var(n, self.order, i)
                            .try_add(&Jet::constant(n, self.order, Coeff::Exact(center[i].clone())))
                            .expect("same shape");
                        lin.pow(e)
                    })
                    .clone();
                t = &t * &factor;
            }
            for (mm, cc) in t.terms {
                out.accumulate(mm, cc);
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn to_doc(&self) -> JetDoc {
        JetDoc(
            self.terms
                .iter()
                .map(|(m, c)| TermDoc {
                    exponents: m.0.clone(),
                    coeff: CoeffDoc::from(c),
                })
                .collect(),
        )
    }

    /// Parses a serialized jet; terms above `order` are a schema error rather than dropped.
    pub fn from_doc(doc: &JetDoc, num_vars: usize, order: u32) -> Result<Jet> {
        if let Some(t) = doc.0.iter().find(|t| t.exponents.iter().sum::<u32>() > order) {
            return Err(Error::Schema(format!(
                "term with exponents {:?} exceeds truncation order {order}",
                t.exponents
            )));
        }
        let terms = doc
            .0
            .iter()
            .map(|t| Ok((t.exponents.clone(), t.coeff.to_coeff()?)))
            .collect::<Result<Vec<_>>>()?;
        Jet::from_terms(num_vars, order, terms)
    }
}

/// Powers `x_v^e` of a Gaussian-rational point, scaled to integers over a common denominator.
pub struct PointPowers {
    order: u32,
    pows: Vec<Vec<(BigInt, BigInt)>>,
    den_pows: Vec<BigInt>,
}

impl PointPowers {
    pub fn new(point: &[Gaussian], order: u32) -> Self {
        let mut den = BigInt::one();
        for x in point {
            den = den.lcm(x.re.denom()).lcm(x.im.denom());
        }
        let pows = point
            .iter()
            .map(|x| {
                let xr = x.re.numer() * (&den / x.re.denom());
                let xi = x.im.numer() * (&den / x.im.denom());
                let mut v = Vec::with_capacity(order as usize + 1);
                let (mut ar, mut ai) = (BigInt::one(), BigInt::zero());
                v.push((ar.clone(), ai.clone()));
                for _ in 0..order {
                    let nr = &ar * &xr - &ai * &xi;
                    let ni = &ar * &xi + &ai * &xr;
                    ar = nr;
                    ai = ni;
                    v.push((ar.clone(), ai.clone()));
                }
                v
            })
            .collect();
        let mut den_pows = Vec::with_capacity(order as usize + 1);
        let mut acc = BigInt::one();
        den_pows.push(acc.clone());
        for _ in 0..order {
            acc *= &den;
            den_pows.push(acc.clone());
        }
        PointPowers { order, pows, den_pows }
    }
}

struct PowerTable {
    powers: Vec<Vec<Coeff>>,
}

impl PowerTable {
    fn new(point: &[Coeff], order: u32) -> Self {
        let powers = point
            .iter()
            .map(|x| {
                let mut v = vec![Coeff::one()];
                for k in 0..order as usize {
                    let next = v[k].mul(x);
                    v.push(next);
                }
                v
            })
            .collect();
        PowerTable { powers }
    }

    fn get(&self, var: usize, e: u32) -> Coeff {
        self.powers[var][e as usize].clone()
    }
}

impl fmt::Display for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0 + O({})", self.order + 1);
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (i, &e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{i}")?,
                    _ => write!(f, "*x{i}^{e}")?,
                }
            }
        }
        write!(f, " + O({})", self.order + 1)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.try_add(rhs).expect("jet shapes must match")
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.try_sub(rhs).expect("jet shapes must match")
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.try_mul(rhs).expect("jet shapes must match")
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map_coeffs(Coeff::neg)
    }
}

/// A jet as a list of `{exponents, coeff}` terms in graded-lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct JetDoc(pub Vec<TermDoc>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub exponents: Vec<u32>,
    pub coeff: CoeffDoc,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: usize, k: u32, i: usize) -> Jet {
        Jet::var(n, k, i)
    }

    #[test]
    fn difference_of_squares() {
        let one = Jet::one(1, 3);
        let a = &one + &x(1, 3, 0);
        let b = &one - &x(1, 3, 0);
        let expected = &one - &x(1, 3, 0).pow(2);
        assert_eq!(&a * &b, expected);
    }

    #[test]
    fn truncates_above_order() {
        let p = x(2, 2, 0).pow(3);
        assert!(p.is_zero());
        let q = &x(2, 3, 0) * &x(2, 3, 1);
        assert_eq!(q.coeff(&[1, 1]), Coeff::one());
        assert!(Jet::monomial(2, 2, &[2, 1], Coeff::one()).unwrap().is_zero());
    }

    #[test]
    fn shape_errors() {
        let a = Jet::one(2, 3);
        assert!(matches!(a.try_add(&Jet::one(2, 4)), Err(Error::Shape(_))));
        assert!(matches!(a.try_mul(&Jet::one(3, 3)), Err(Error::Shape(_))));
        assert!(Jet::from_terms(2, 3, [(vec![1], Coeff::one())]).is_err());
        assert!(a.partial(2).is_err());
    }

    #[test]
    fn zero_coefficients_are_pruned() {
        let j = Jet::from_terms(1, 3, [(vec![1], Coeff::one()), (vec![1], Coeff::from_i64(-1))]).unwrap();
        assert!(j.is_zero());
        assert_eq!(j.len(), 0);
    }

    #[test]
    fn partials() {
        // d/dx (x^2 y) = 2xy
        let f = Jet::monomial(2, 4, &[2, 1], Coeff::one()).unwrap();
        let d = f.partial(0).unwrap();
        assert_eq!(d, Jet::monomial(2, 3, &[1, 1], Coeff::from_i64(2)).unwrap());
        assert!(Jet::constant(2, 4, Coeff::from_i64(7)).partial(0).unwrap().is_zero());
    }

    #[test]
    fn graded_lex_order() {
        let j = Jet::from_terms(
            2,
            2,
            [
                (vec![0, 2], Coeff::one()),
                (vec![1, 0], Coeff::one()),
                (vec![0, 0], Coeff::one()),
                (vec![2, 0], Coeff::one()),
                (vec![0, 1], Coeff::one()),
                (vec![1, 1], Coeff::one()),
            ],
        )
        .unwrap();
        let order: Vec<Vec<u32>> = j.terms().map(|(m, _)| m.exps().to_vec()).collect();
        assert_eq!(
            order,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
    }

    #[test]
    fn shift_and_eval_agree() {
        // f = 1 + 2x + x^2 y
        let f = Jet::from_terms(
            2,
            3,
            [
                (vec![0, 0], Coeff::one()),
                (vec![1, 0], Coeff::from_i64(2)),
                (vec![2, 1], Coeff::one()),
            ],
        )
        .unwrap();
        let c = vec![
            Gaussian::new(crate::coeff::rat(1), crate::coeff::rat(0)),
            Gaussian::new(crate::coeff::rat(0), crate::coeff::rat(1)),
        ];
        let g = f.shift(&c).unwrap();
        let u = vec![
            Gaussian::new(crate::coeff::ratio(1, 3), crate::coeff::rat(0)),
            Gaussian::new(crate::coeff::rat(-2), crate::coeff::ratio(1, 2)),
        ];
        let p: Vec<Gaussian> = c.iter().zip(&u).map(|(a, b)| a + b).collect();
        assert_eq!(g.eval_exact(&u), f.eval_exact(&p));
    }

    #[test]
    fn reflect_twice_is_identity() {
        let f = Jet::from_terms(2, 3, [(vec![0, 1], Coeff::one()), (vec![1, 2], Coeff::from_i64(3))]).unwrap();
        assert_eq!(f.reflect(1).coeff(&[0, 1]), Coeff::from_i64(-1));
        assert_eq!(f.reflect(1).reflect(1), f);
    }

    #[test]
    fn doc_round_trip() {
        let f = Jet::from_terms(
            2,
            3,
            [(vec![0, 1], Coeff::from_ratio(-1, 3)), (vec![1, 2], Coeff::from_i64(3))],
        )
        .unwrap();
        let doc = f.to_doc();
        let text = serde_json::to_string(&doc).unwrap();
        let back: JetDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(Jet::from_doc(&back, 2, 3).unwrap(), f);
    }
}
