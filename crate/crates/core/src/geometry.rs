//! Polydiscs, tubes over polydiscs, and sound (one-sided) certificates about them.
//!
//! All decisions are made in exact rational arithmetic. Distances between
//! complex centers are compared through their squares; where a margin needs an
//! actual square root, a rational lower bound is reported.

use std::cmp::Ordering;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coeff::{
    f64_to_rational, gaussian_vec, rat, ratio, rational_str, rational_to_f64, rational_vec_str, sqrt_lower, sqrt_upper,
    Gaussian, Rational,
};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::polymap::PolyMap;

/// Product of open discs `{ |x_k - center_k| < radii_k }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polydisc {
    #[serde(with = "gaussian_vec")]
    pub center: Vec<Gaussian>,
    #[serde(with = "rational_vec_str")]
    pub radii: Vec<Rational>,
}

/// `base × { |z_a| < fiber_radius }` in the coordinates of one chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeDomain {
    pub chart: String,
    pub base: Polydisc,
    #[serde(with = "rational_str")]
    pub fiber_radius: Rational,
}

/// Result of a containment test. `margin` is a rational lower bound on the
/// distance from the inner region to the complement of the outer one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    pub contained: bool,
    pub rel_compact: bool,
    #[serde(with = "rational_str")]
    pub margin: Rational,
}

/// Certified superset of the image of a tube under a map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageBound {
    #[serde(with = "gaussian_vec")]
    pub base_center: Vec<Gaussian>,
    #[serde(with = "rational_vec_str")]
    pub base_radii: Vec<Rational>,
    #[serde(with = "rational_str")]
    pub fiber_radius: Rational,
}

/// A point of `C^d` in serialized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointDoc(#[serde(with = "gaussian_vec")] pub Vec<Gaussian>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverTriple {
    pub u: Polydisc,
    pub v: Polydisc,
    pub w: Polydisc,
}

/// Concentric shrink fractions for `U ⋐ V ⋐ W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverFractions {
    #[serde(with = "rational_str")]
    pub u: Rational,
    #[serde(with = "rational_str")]
    pub v: Rational,
}

impl Default for CoverFractions {
    fn default() -> Self {
        CoverFractions {
            u: ratio(3, 5),
            v: ratio(4, 5),
        }
    }
}

impl CoverFractions {
    /// Fraction between `u` and `v`, used for the base of certified overlap tubes.
    pub fn mid(&self) -> Rational {
        (&self.u + &self.v) / rat(2)
    }
}

/// `|a - b|^2`, exact.
pub fn dist_sqr(a: &Gaussian, b: &Gaussian) -> Rational {
    let d = a - b;
    &d.re * &d.re + &d.im * &d.im
}

/// Closed-disc containment data for one coordinate: `(contained, strictly, margin lower bound)`.
fn disc_in_disc(c_in: &Gaussian, r_in: &Rational, c_out: &Gaussian, r_out: &Rational) -> (bool, bool, Rational) {
    let gap = r_out - r_in;
    let d2 = dist_sqr(c_in, c_out);
    let contained = !gap.is_negative() && d2 <= &gap * &gap;
    let strict = gap.is_positive() && d2 < &gap * &gap;
    (contained, strict, &gap - sqrt_upper(&d2))
}

impl Polydisc {
    pub fn new(center: Vec<Gaussian>, radii: Vec<Rational>) -> Result<Self> {
        if center.len() != radii.len() {
            return Err(Error::Dimension {
                expected: center.len(),
                found: radii.len(),
            });
        }
        if radii.iter().any(|r| !r.is_positive()) {
            return Err(Error::Schema("polydisc radii must be positive".into()));
        }
        Ok(Polydisc { center, radii })
    }

    /// Polydisc with real centers, convenient in tests and fixtures.
    pub fn real(center: &[Rational], radii: &[Rational]) -> Result<Self> {
        Polydisc::new(
            center
                .iter()
                .map(|c| Gaussian::new(c.clone(), Rational::zero()))
                .collect(),
            radii.to_vec(),
        )
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn validate(&self) -> Result<()> {
        Polydisc::new(self.center.clone(), self.radii.clone()).map(|_| ())
    }

    pub fn scaled(&self, frac: &Rational) -> Polydisc {
        Polydisc {
            center: self.center.clone(),
            radii: self.radii.iter().map(|r| r * frac).collect(),
        }
    }

    pub fn min_radius(&self) -> Rational {
        self.radii.iter().min().cloned().unwrap_or_else(Rational::zero)
    }

    fn check_dim(&self, other: &Polydisc) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// Open-set membership, decided exactly.
    pub fn contains_point(&self, p: &[Gaussian]) -> bool {
        p.len() == self.dim()
            && self
                .center
                .iter()
                .zip(&self.radii)
                .zip(p)
                .all(|((c, r), x)| dist_sqr(x, c) < r * r)
    }

    pub fn contains_point_closed(&self, p: &[Gaussian]) -> bool {
        p.len() == self.dim()
            && self
                .center
                .iter()
                .zip(&self.radii)
                .zip(p)
                .all(|((c, r), x)| dist_sqr(x, c) <= r * r)
    }

    /// Open polydiscs meet iff every coordinate pair of discs meets.
    pub fn intersects(&self, other: &Polydisc) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|k| {
                let s = &self.radii[k] + &other.radii[k];
                dist_sqr(&self.center[k], &other.center[k]) < &s * &s
            })
    }

    /// A polydisc containing `self ∩ other`: per coordinate, the smaller disc.
    pub fn intersection_hull(&self, other: &Polydisc) -> Polydisc {
        let mut out = self.clone();
        for k in 0..self.dim() {
            if other.radii[k] < self.radii[k] {
                out.center[k] = other.center[k].clone();
                out.radii[k] = other.radii[k].clone();
            }
        }
        out
    }

    pub fn translate(&self, offset: &[Gaussian]) -> Polydisc {
        Polydisc {
            center: self.center.iter().zip(offset).map(|(c, o)| c + o).collect(),
            radii: self.radii.clone(),
        }
    }

    /// Product with a fiber polydisc of radius `fiber_radius` around 0 in `fiber_dim` variables.
    pub fn times_fiber(&self, fiber_dim: usize, fiber_radius: &Rational) -> Polydisc {
        let mut center = self.center.clone();
        let mut radii = self.radii.clone();
        center.extend(std::iter::repeat_n(Gaussian::zero(), fiber_dim));
        radii.extend(std::iter::repeat_n(fiber_radius.clone(), fiber_dim));
        Polydisc { center, radii }
    }
}

/// Certified `inner ⊂ outer` (closed inner disc in closed outer disc per coordinate).
pub fn contains(inner: &Polydisc, outer: &Polydisc) -> Result<Containment> {
    inner.check_dim(outer)?;
    let mut contained = true;
    let mut strict = true;
    let mut margin: Option<Rational> = None;
    for k in 0..inner.dim() {
        let (c, s, m) = disc_in_disc(&inner.center[k], &inner.radii[k], &outer.center[k], &outer.radii[k]);
        contained &= c;
        strict &= s;
        margin = Some(match margin {
            Some(prev) if prev <= m => prev,
            _ => m,
        });
    }
    let margin = margin.unwrap_or_else(Rational::zero);
    Ok(Containment {
        contained,
        rel_compact: strict && margin.is_positive(),
        margin,
    })
}

/// Relative compactness `inner ⋐ outer`; returns the strict positive margin when certified.
pub fn rel_compact(inner: &Polydisc, outer: &Polydisc) -> Result<Option<Rational>> {
    let c = contains(inner, outer)?;
    Ok(c.rel_compact.then_some(c.margin))
}

/// Tube containment: bases as polydiscs, fibers as centered discs.
pub fn tube_contains(inner: &TubeDomain, outer: &TubeDomain) -> Result<Containment> {
    if inner.chart != outer.chart {
        return Err(Error::Shape(format!(
            "tube in chart {} compared with tube in chart {}",
            inner.chart, outer.chart
        )));
    }
    let base = contains(&inner.base, &outer.base)?;
    let gap = &outer.fiber_radius - &inner.fiber_radius;
    let margin = if gap < base.margin {
        gap.clone()
    } else {
        base.margin.clone()
    };
    Ok(Containment {
        contained: base.contained && !gap.is_negative(),
        rel_compact: base.rel_compact && gap.is_positive(),
        margin,
    })
}

/// Certified `(a ∩ b) ⊂ outer`, using per coordinate whichever of `a_k`, `b_k`
/// sits inside `outer_k`. Returns the margin when certified.
pub fn pair_within(a: &Polydisc, b: &Polydisc, outer: &Polydisc) -> Result<Option<Rational>> {
    some_within(&[a, b], outer)
}

/// Certified `(p_1 ∩ ... ∩ p_r) ⊂ outer`: per coordinate, some factor disc lies strictly inside.
pub fn some_within(parts: &[&Polydisc], outer: &Polydisc) -> Result<Option<Rational>> {
    for p in parts {
        p.check_dim(outer)?;
    }
    let mut margin: Option<Rational> = None;
    for k in 0..outer.dim() {
        let best = parts
            .iter()
            .filter_map(|p| {
                let (_, strict, m) = disc_in_disc(&p.center[k], &p.radii[k], &outer.center[k], &outer.radii[k]);
                (strict && m.is_positive()).then_some(m)
            })
            .max();
        let Some(m) = best else { return Ok(None) };
        margin = Some(match margin {
            Some(prev) if prev <= m => prev,
            _ => m,
        });
    }
    Ok(margin)
}

/// Whether three polydiscs share a point.
#[derive(Clone, Debug, PartialEq)]
pub enum TripleOverlap {
    Empty,
    Witness(Vec<Gaussian>),
    /// No witness found and no pair certified disjoint; treat as possibly nonempty.
    Undecided,
}

impl TripleOverlap {
    pub fn possibly_nonempty(&self) -> bool {
        !matches!(self, TripleOverlap::Empty)
    }
}

pub fn triple_overlap(a: &Polydisc, b: &Polydisc, c: &Polydisc) -> TripleOverlap {
    if !a.intersects(b) || !b.intersects(c) || !a.intersects(c) {
        return TripleOverlap::Empty;
    }
    let mut point = Vec::with_capacity(a.dim());
    for k in 0..a.dim() {
        let discs = [
            (&a.center[k], &a.radii[k]),
            (&b.center[k], &b.radii[k]),
            (&c.center[k], &c.radii[k]),
        ];
        match disc_triple_witness(&discs) {
            Some(p) => point.push(p),
            None => return TripleOverlap::Undecided,
        }
    }
    TripleOverlap::Witness(point)
}

fn disc_triple_witness(discs: &[(&Gaussian, &Rational); 3]) -> Option<Gaussian> {
    let inside = |p: &Gaussian| discs.iter().all(|(c, r)| dist_sqr(p, c) < *r * *r);
    let mut candidates: Vec<Gaussian> = discs.iter().map(|(c, _)| (*c).clone()).collect();
    for i in 0..3 {
        for j in i + 1..3 {
            let (ci, ri) = discs[i];
            let (cj, rj) = discs[j];
            let t = ri / (ri + rj);
            candidates.push(ci + (cj - ci).scale(t));
        }
    }
    if let Some(p) = candidates.into_iter().find(|p| inside(p)) {
        return Some(p);
    }
    // Numerical minimisation of max_i |p - c_i| / r_i, then an exact check.
    let fc: Vec<(f64, f64, f64)> = discs
        .iter()
        .map(|(c, r)| (rational_to_f64(&c.re), rational_to_f64(&c.im), rational_to_f64(r)))
        .collect();
    let score = |x: f64, y: f64| {
        fc.iter()
            .map(|(cx, cy, r)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / r)
            .fold(f64::MIN, f64::max)
    };
    let (mut x, mut y) = (
        fc.iter().map(|c| c.0).sum::<f64>() / 3.0,
        fc.iter().map(|c| c.1).sum::<f64>() / 3.0,
    );
    let mut step = fc.iter().map(|c| c.2).fold(f64::MIN, f64::max);
    let mut best = score(x, y);
    for _ in 0..2000 {
        let mut improved = false;
        for (dx, dy) in [
            (1.0, 0.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (0.0, -1.0),
            (0.7, 0.7),
            (-0.7, 0.7),
            (0.7, -0.7),
            (-0.7, -0.7),
        ] {
            let s = score(x + dx * step, y + dy * step);
            if s < best {
                best = s;
                x += dx * step;
                y += dy * step;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-14 {
                break;
            }
        }
    }
    let p = Gaussian::new(f64_to_rational(x), f64_to_rational(y));
    inside(&p).then_some(p)
}

/// Sound upper bound for `sup_D |f|`: recenter at D's center and sum `|coeff| * radii^e`.
pub fn range_bound(f: &Jet, d: &Polydisc) -> Result<Rational> {
    if f.num_vars() != d.dim() {
        return Err(Error::Dimension {
            expected: d.dim(),
            found: f.num_vars(),
        });
    }
    let g = f.to_exact().shift(&d.center)?;
    Ok(majorant(&g, &d.radii, true))
}

/// Bound for `sup_D |f - f(center)|`.
pub fn deviation_bound(f: &Jet, d: &Polydisc) -> Result<Rational> {
    if f.num_vars() != d.dim() {
        return Err(Error::Dimension {
            expected: d.dim(),
            found: f.num_vars(),
        });
    }
    let g = f.to_exact().shift(&d.center)?;
    Ok(majorant(&g, &d.radii, false))
}

fn majorant(g: &Jet, radii: &[Rational], with_constant: bool) -> Rational {
    let mut sum = Rational::zero();
    for (m, c) in g.terms() {
        if !with_constant && m.degree() == 0 {
            continue;
        }
        let mut t = c.abs_upper();
        for (k, &e) in m.exps().iter().enumerate() {
            if e > 0 {
                t *= num_traits::pow(radii[k].clone(), e as usize);
            }
        }
        sum += t;
    }
    sum
}

impl TubeDomain {
    pub fn new(chart: impl Into<String>, base: Polydisc, fiber_radius: Rational) -> Result<Self> {
        if !fiber_radius.is_positive() {
            return Err(Error::Schema("tube fiber radius must be positive".into()));
        }
        Ok(TubeDomain {
            chart: chart.into(),
            base,
            fiber_radius,
        })
    }

    pub fn as_polydisc(&self, fiber_dim: usize) -> Polydisc {
        self.base.times_fiber(fiber_dim, &self.fiber_radius)
    }

    pub fn contains_point(&self, p: &[Gaussian]) -> bool {
        let m = self.base.dim();
        p.len() >= m
            && self.base.contains_point(&p[..m])
            && p[m..]
                .iter()
                .all(|z| dist_sqr(z, &Gaussian::zero()) < &self.fiber_radius * &self.fiber_radius)
    }
}

/// Componentwise range bounds for `f(D)`: base components as discs around `f(center)`,
/// fiber components as one disc around 0.
pub fn map_image_bound(f: &PolyMap, d: &TubeDomain, fiber_dim: usize) -> Result<ImageBound> {
    let m = d.base.dim();
    if f.source_vars() != m + fiber_dim || f.target_vars() != m + fiber_dim {
        return Err(Error::Dimension {
            expected: m + fiber_dim,
            found: f.source_vars(),
        });
    }
    let pd = d.as_polydisc(fiber_dim);
    let mut center_point = d.base.center.clone();
    center_point.extend(std::iter::repeat_n(Gaussian::zero(), fiber_dim));
    let mut base_center = Vec::with_capacity(m);
    let mut base_radii = Vec::with_capacity(m);
    for k in 0..m {
        let comp = f.component(k);
        base_center.push(comp.to_exact().eval_exact(&center_point));
        base_radii.push(deviation_bound(comp, &pd)?);
    }
    let mut fiber_radius = Rational::zero();
    for a in 0..fiber_dim {
        let b = range_bound(f.component(m + a), &pd)?;
        if b > fiber_radius {
            fiber_radius = b;
        }
    }
    Ok(ImageBound {
        base_center,
        base_radii,
        fiber_radius,
    })
}

impl ImageBound {
    /// The bound as a tube, when all radii are positive.
    pub fn as_tube(&self, chart: &str) -> Option<TubeDomain> {
        let base = Polydisc::new(self.base_center.clone(), self.base_radii.clone()).ok()?;
        TubeDomain::new(chart, base, self.fiber_radius.clone()).ok()
    }
}

/// Bounds on `|f_k(x) - x_k|` over `d` for the base components `k < base_dim`.
pub fn displacement_bounds(f: &PolyMap, base_dim: usize, d: &Polydisc) -> Result<Vec<Rational>> {
    (0..base_dim)
        .map(|k| {
            let shifted = f.component(k) - &Jet::var(f.source_vars(), f.order(), k);
            range_bound(&shifted, d)
        })
        .collect()
}

/// Builds `U ⋐ V ⋐ W` per chart and checks the shrunk `U`s still cover the sample points.
pub fn refine_cover(
    ws: &[Polydisc],
    samples: &[Vec<Gaussian>],
    fractions: &CoverFractions,
) -> Result<Vec<CoverTriple>> {
    if !(fractions.u.is_positive() && fractions.u < fractions.v && fractions.v < Rational::one()) {
        return Err(Error::Schema("cover fractions must satisfy 0 < u < v < 1".into()));
    }
    let triples: Vec<CoverTriple> = ws
        .iter()
        .map(|w| CoverTriple {
            u: w.scaled(&fractions.u),
            v: w.scaled(&fractions.v),
            w: w.clone(),
        })
        .collect();
    for (k, t) in triples.iter().enumerate() {
        if rel_compact(&t.u, &t.v)?.is_none() || rel_compact(&t.v, &t.w)?.is_none() {
            return Err(Error::CoverageLoss(format!("chart {k}: U ⋐ V ⋐ W not certified")));
        }
    }
    let uncovered: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, p)| !triples.iter().any(|t| t.u.contains_point(p)))
        .map(|(i, _)| i)
        .collect();
    if !uncovered.is_empty() {
        let first = &samples[uncovered[0]];
        return Err(Error::CoverageLoss(format!(
            "{} of {} base sample points lie outside every shrunk chart (first: index {} at {})",
            uncovered.len(),
            samples.len(),
            uncovered[0],
            format_point(first)
        )));
    }
    Ok(triples)
}

pub fn format_point(p: &[Gaussian]) -> String {
    let parts: Vec<String> = p
        .iter()
        .map(|g| {
            if g.im.is_zero() {
                g.re.to_string()
            } else {
                format!("{}+{}i", g.re, g.im)
            }
        })
        .collect();
    format!("({})", parts.join(", "))
}

/// Random exact point strictly inside a disc: dyadic offsets on a `2^-bits` grid of the radius.
pub fn sample_disc<R: Rng>(rng: &mut R, center: &Gaussian, radius: &Rational, bits: u32) -> Gaussian {
    let scale: i64 = 1 << bits;
    loop {
        let a: i64 = rng.gen_range(-scale + 1..scale);
        let b: i64 = rng.gen_range(-scale + 1..scale);
        if (a as i128) * (a as i128) + (b as i128) * (b as i128) >= (scale as i128) * (scale as i128) {
            continue;
        }
        let re = radius * ratio(a, scale);
        let im = radius * ratio(b, scale);
        return center + Gaussian::new(re, im);
    }
}

pub fn sample_polydisc<R: Rng>(rng: &mut R, d: &Polydisc, bits: u32) -> Vec<Gaussian> {
    d.center
        .iter()
        .zip(&d.radii)
        .map(|(c, r)| sample_disc(rng, c, r, bits))
        .collect()
}

/// Exact points on the circle `|x - c| = r` from the rational parametrisation of the unit circle.
pub fn circle_points(center: &Gaussian, radius: &Rational, count: usize) -> Vec<Gaussian> {
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        // s ranges over (-2, 2); together with its reflection this covers the circle densely.
        let s = ratio(4 * k as i64 - 2 * count as i64, count as i64 + 1);
        let den = Rational::one() + &s * &s;
        let x = (Rational::one() - &s * &s) / &den;
        let y = (rat(2) * &s) / &den;
        out.push(center + Gaussian::new(radius * &x, radius * &y));
        out.push(center + Gaussian::new(-(radius * &x), -(radius * &y)));
    }
    out
}

/// Modulus of a Gaussian rational compared with a rational bound.
pub fn modulus_cmp(z: &Gaussian, bound: &Rational) -> Ordering {
    if bound.is_negative() {
        return Ordering::Greater;
    }
    (&z.re * &z.re + &z.im * &z.im).cmp(&(bound * bound))
}

/// Rational lower bound on `|z|`.
pub fn modulus_lower(z: &Gaussian) -> Rational {
    sqrt_lower(&(&z.re * &z.re + &z.im * &z.im))
}
