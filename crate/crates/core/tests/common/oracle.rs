//! Reference arithmetic on truncated power series stored as plain exponent maps.
//! Nothing here calls into the library's own multiplication or composition.

use std::collections::BTreeMap;

use germglue::coeff::{Coeff, Gaussian};
use germglue::jet::Jet;
use num_traits::{One, Zero};

pub type Series = BTreeMap<Vec<u32>, Gaussian>;

pub fn from_jet(j: &Jet) -> Series {
    j.terms().map(|(m, c)| (m.exps().to_vec(), c.to_exact())).collect()
}

pub fn to_jet(s: &Series, num_vars: usize, order: u32) -> Jet {
    Jet::from_terms(
        num_vars,
        order,
        s.iter().map(|(e, c)| (e.clone(), Coeff::from_gaussian(c.clone()))),
    )
    .unwrap()
}

fn degree(e: &[u32]) -> u32 {
    e.iter().sum()
}

pub fn one(num_vars: usize) -> Series {
    let mut s = Series::new();
    s.insert(vec![0; num_vars], Gaussian::one());
    s
}

pub fn add(a: &Series, b: &Series) -> Series {
    let mut out = a.clone();
    for (e, c) in b {
        let v = out.entry(e.clone()).or_insert_with(Gaussian::zero);
        *v = &*v + c;
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Schoolbook convolution, dropping every product monomial above `order`.
pub fn mul(a: &Series, b: &Series, order: u32) -> Series {
    let mut out = Series::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            if degree(&e) > order {
                continue;
            }
            let v = out.entry(e).or_insert_with(Gaussian::zero);
            *v = &*v + ca * cb;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// `f(g_1, ..., g_n)` by expanding every monomial of `f` into products of powers of the `g_i`.
pub fn substitute(f: &Series, g: &[Series], num_vars: usize, order: u32) -> Series {
    let powers: Vec<Vec<Series>> = g
        .iter()
        .map(|gi| {
            let mut p = vec![one(num_vars)];
            for k in 1..=order as usize {
                p.push(mul(&p[k - 1], gi, order));
            }
            p
        })
        .collect();
    let mut out = Series::new();
    for (e, c) in f {
        let mut term = one(num_vars);
        for (i, &k) in e.iter().enumerate() {
            term = mul(&term, &powers[i][k as usize], order);
        }
        let scaled: Series = term.into_iter().map(|(m, v)| (m, &v * c)).collect();
        out = add(&out, &scaled);
    }
    out
}

pub fn eval(f: &Series, p: &[Gaussian]) -> Gaussian {
    let mut acc = Gaussian::zero();
    for (e, c) in f {
        let mut v = c.clone();
        for (x, &k) in p.iter().zip(e) {
            for _ in 0..k {
                v = &v * x;
            }
        }
        acc = &acc + v;
    }
    acc
}
