//! Map germs as tuples of jets, and their dictionary with algebra homomorphisms.
//!
//! A map `g: C^p -> C^q` is stored by its `q` component jets in `p` variables.
//! Composition is only well defined on truncations when every component of the
//! inner map has zero constant term; that is the standing precondition here.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coeff::Coeff;
use crate::error::{Error, Result};
use crate::jet::{Jet, JetDoc, Monomial};
use crate::matrix::{scalar_inverse, ScalarMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct PolyMap {
    source_vars: usize,
    order: u32,
    components: Vec<Jet>,
}

impl PolyMap {
    pub fn new(source_vars: usize, components: Vec<Jet>) -> Result<Self> {
        let order = components.first().map_or(0, Jet::order);
        for (a, c) in components.iter().enumerate() {
            if c.num_vars() != source_vars {
                return Err(Error::Shape(format!(
                    "component {a} has {} variables, expected {source_vars}",
                    c.num_vars()
                )));
            }
            if c.order() != order {
                return Err(Error::Shape(format!(
                    "component {a} has order {}, expected {order}",
                    c.order()
                )));
            }
        }
        Ok(PolyMap {
            source_vars,
            order,
            components,
        })
    }

    pub fn identity(n: usize, order: u32) -> Self {
        PolyMap {
            source_vars: n,
            order,
            components: (0..n).map(|i| Jet::var(n, order, i)).collect(),
        }
    }

    pub fn zero(source_vars: usize, target_vars: usize, order: u32) -> Self {
        PolyMap {
            source_vars,
            order,
            components: vec![Jet::zero(source_vars, order); target_vars],
        }
    }

    /// Linear map with matrix `m` (`q x p`).
    pub fn linear(m: &ScalarMatrix, order: u32) -> Result<Self> {
        let p = m.first().map_or(0, Vec::len);
        let comps = m
            .iter()
            .map(|row| {
                Jet::from_terms(
                    p,
                    order,
                    row.iter()
                        .enumerate()
                        .map(|(j, c)| (Monomial::var(p, j).exps().to_vec(), c.clone())),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        PolyMap::new(p, comps)
    }

    pub fn source_vars(&self) -> usize {
        self.source_vars
    }

    pub fn target_vars(&self) -> usize {
        self.components.len()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn components(&self) -> &[Jet] {
        &self.components
    }

    pub fn component(&self, a: usize) -> &Jet {
        &self.components[a]
    }

    /// Degree-one coefficients as a `q x p` matrix.
    pub fn linear_part(&self) -> ScalarMatrix {
        self.components
            .iter()
            .map(|c| {
                (0..self.source_vars)
                    .map(|j| c.coeff(Monomial::var(self.source_vars, j).exps()))
                    .collect()
            })
            .collect()
    }

    pub fn has_zero_constant_terms(&self) -> bool {
        self.components.iter().all(|c| c.constant_term().is_zero())
    }

    pub fn with_order(&self, order: u32) -> PolyMap {
        PolyMap {
            source_vars: self.source_vars,
            order,
            components: self.components.iter().map(|c| c.with_order(order)).collect(),
        }
    }

    pub fn map_components(&self, f: impl Fn(&Jet) -> Jet) -> PolyMap {
        let components: Vec<Jet> = self.components.iter().map(f).collect();
        let order = components.first().map_or(self.order, Jet::order);
        PolyMap {
            source_vars: self.source_vars,
            order,
            components,
        }
    }

    pub fn to_float(&self) -> PolyMap {
        self.map_components(Jet::to_float)
    }

    pub fn to_exact(&self) -> PolyMap {
        self.map_components(Jet::to_exact)
    }

    /// `f ∘ self`: first apply `self`, then `f`.
    pub fn then(&self, f: &PolyMap) -> Result<PolyMap> {
        map_compose(self, f)
    }

    pub fn try_sub(&self, other: &PolyMap) -> Result<PolyMap> {
        if self.target_vars() != other.target_vars() {
            return Err(Error::Shape("maps with different targets".into()));
        }
        let comps = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.try_sub(b))
            .collect::<Result<Vec<_>>>()?;
        PolyMap::new(self.source_vars, comps)
    }

    pub fn is_negligible(&self, tol: f64) -> bool {
        self.components.iter().all(|c| c.is_negligible(tol))
    }

    /// Exact evaluation of the polynomial representative.
    pub fn eval_exact(&self, point: &[crate::coeff::Gaussian]) -> Vec<crate::coeff::Gaussian> {
        let pp = crate::jet::PointPowers::new(point, self.order);
        self.components.iter().map(|c| c.eval_with(&pp)).collect()
    }

    /// Extends `C^p -> C^q` to `C^{p+e} -> C^{q+e}`, acting as the identity on the new variables.
    pub fn extend_identity(&self, extra: usize) -> PolyMap {
        let p = self.source_vars + extra;
        let mut comps: Vec<Jet> = self.components.iter().map(|c| c.extend_vars(extra)).collect();
        comps.extend((self.source_vars..p).map(|i| Jet::var(p, self.order, i)));
        PolyMap {
            source_vars: p,
            order: self.order,
            components: comps,
        }
    }

    /// Jacobian matrix of jets (`q x p`), entries at order `K - 1`.
    pub fn jacobian(&self) -> Vec<Vec<Jet>> {
        self.components
            .iter()
            .map(|c| {
                (0..self.source_vars)
                    .map(|j| c.partial(j).expect("index in range"))
                    .collect()
            })
            .collect()
    }

    pub fn to_doc(&self) -> PolyMapDoc {
        PolyMapDoc(self.components.iter().map(Jet::to_doc).collect())
    }

    pub fn from_doc(doc: &PolyMapDoc, source_vars: usize, order: u32) -> Result<PolyMap> {
        let comps = doc
            .0
            .iter()
            .map(|j| Jet::from_doc(j, source_vars, order))
            .collect::<Result<Vec<_>>>()?;
        PolyMap::new(source_vars, comps)
    }
}

/// A PolyMap as its list of component jets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct PolyMapDoc(pub Vec<JetDoc>);

fn check_composable(f_vars: usize, f_order: u32, g: &PolyMap) -> Result<()> {
    if f_vars != g.target_vars() {
        return Err(Error::Shape(format!(
            "outer jet has {f_vars} variables, inner map has {} components",
            g.target_vars()
        )));
    }
    if f_order != g.order {
        return Err(Error::Shape(format!(
            "outer order {f_order} differs from inner order {}",
            g.order
        )));
    }
    if let Some(a) = g.components.iter().position(|c| !c.constant_term().is_zero()) {
        return Err(Error::CompositionDomain(format!(
            "component {a} of the inner map has a nonzero constant term"
        )));
    }
    Ok(())
}

/// `f ∘ g` truncated to the common order.
pub fn compose(f: &Jet, g: &PolyMap) -> Result<Jet> {
    check_composable(f.num_vars(), f.order(), g)?;
    let mut memo = MonomialImages::new(g);
    let mut acc = Jet::zero(g.source_vars, g.order);
    for (m, c) in f.terms() {
        let img = memo.image(m);
        acc = &acc + &img.scale(c);
    }
    Ok(acc)
}

/// `f ∘ g` componentwise: apply `g`, then `f`.
pub fn map_compose(g: &PolyMap, f: &PolyMap) -> Result<PolyMap> {
    check_composable(f.source_vars, f.order, g)?;
    let mut memo = MonomialImages::new(g);
    let comps = f
        .components
        .iter()
        .map(|fc| {
            let mut acc = Jet::zero(g.source_vars, g.order);
            for (m, c) in fc.terms() {
                let img = memo.image(m);
                acc = &acc + &img.scale(c);
            }
            acc
        })
        .collect();
    PolyMap::new(g.source_vars, comps)
}

/// Images `g^α` of monomials, built by multiplying one inner component at a time.
struct MonomialImages<'a> {
    g: &'a PolyMap,
    cache: HashMap<Monomial, Jet>,
}

impl<'a> MonomialImages<'a> {
    fn new(g: &'a PolyMap) -> Self {
        let mut cache = HashMap::new();
        cache.insert(Monomial::one(g.target_vars()), Jet::one(g.source_vars, g.order));
        MonomialImages { g, cache }
    }

    fn image(&mut self, m: &Monomial) -> Jet {
        if let Some(j) = self.cache.get(m) {
            return j.clone();
        }
        let k = m
            .exps()
            .iter()
            .rposition(|&e| e > 0)
            .expect("the unit monomial is cached");
        let mut lower = m.exps().to_vec();
        lower[k] -= 1;
        let prev = self.image(&Monomial::new(lower));
        let img = &prev * &self.g.components[k];
        self.cache.insert(m.clone(), img.clone());
        img
    }
}

/// Formal inverse of a map with invertible linear part, correct up to its order.
pub fn map_inverse(f: &PolyMap, tol: f64) -> Result<PolyMap> {
    let n = f.source_vars;
    if f.target_vars() != n {
        return Err(Error::Shape(format!(
            "cannot invert a map from {n} to {} variables",
            f.target_vars()
        )));
    }
    if !f.has_zero_constant_terms() {
        return Err(Error::CompositionDomain(
            "map to invert must fix the origin (zero constant terms)".into(),
        ));
    }
    let lin = f.linear_part();
    let lin_inv = scalar_inverse(&lin, tol).ok_or(Error::NotInvertible)?;
    let lin_inv_map = PolyMap::linear(&lin_inv, f.order)?;
    let lin_map = PolyMap::linear(&lin, f.order)?;
    // f = L + N;  g = L^{-1} ∘ (id - N ∘ g), one extra correct degree per pass.
    let nonlinear = f.try_sub(&lin_map)?;
    let id = PolyMap::identity(n, f.order);
    let mut g = lin_inv_map.clone();
    for _ in 1..f.order {
        let ng = map_compose(&g, &nonlinear)?;
        g = map_compose(&id.try_sub(&ng)?, &lin_inv_map)?;
    }
    Ok(g)
}

/// A C-algebra endomorphism of the local model, recorded by the images of the
/// coordinate generators `t_1..t_m, z_1..z_n` (base first).
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraHom {
    base_vars: usize,
    images: Vec<Jet>,
}

impl AlgebraHom {
    pub fn new(base_vars: usize, images: Vec<Jet>) -> Result<Self> {
        let n = images.len();
        if base_vars > n {
            return Err(Error::Shape(format!("{base_vars} base variables among {n} generators")));
        }
        if images.iter().any(|j| j.num_vars() != n) {
            return Err(Error::Shape("generator images must live in the same ring".into()));
        }
        check_fiber_ideal(base_vars, &images)?;
        Ok(AlgebraHom { base_vars, images })
    }

    pub fn base_vars(&self) -> usize {
        self.base_vars
    }

    pub fn images(&self) -> &[Jet] {
        &self.images
    }

    /// Pull-back of a function: `f ↦ f(images)`.
    pub fn apply(&self, f: &Jet) -> Result<Jet> {
        compose(f, &hom_to_map(self)?)
    }
}

fn check_fiber_ideal(base_vars: usize, images: &[Jet]) -> Result<()> {
    let fiber: Vec<usize> = (base_vars..images.len()).collect();
    for (a, img) in images.iter().enumerate().skip(base_vars) {
        if !img.set_zero(&fiber).is_zero() {
            return Err(Error::InvalidHom(format!(
                "image of fiber generator {} does not vanish on the zero section",
                a - base_vars
            )));
        }
    }
    Ok(())
}

pub fn hom_to_map(h: &AlgebraHom) -> Result<PolyMap> {
    PolyMap::new(h.images.len(), h.images.clone())
}

pub fn map_to_hom(f: &PolyMap, base_vars: usize) -> Result<AlgebraHom> {
    if f.source_vars != f.target_vars() {
        return Err(Error::InvalidHom("map must be an endomorphism".into()));
    }
    AlgebraHom::new(base_vars, f.components.clone())
}

/// Coefficient-level comparison of two maps; first differing `(component, exponents, difference)`.
pub fn first_difference(a: &PolyMap, b: &PolyMap, tol: f64) -> Option<(usize, Vec<u32>, Coeff)> {
    for (k, (x, y)) in a.components.iter().zip(&b.components).enumerate() {
        let d = x - y;
        let hit = d
            .terms()
            .find(|(_, c)| !c.is_negligible(tol))
            .map(|(m, c)| (k, m.exps().to_vec(), c.clone()));
        if hit.is_some() {
            return hit;
        }
    }
    None
}
