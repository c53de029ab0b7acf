//! Overlap tubes, the radius search for the chart tubes `Q_i`, and triple-domain enforcement.
//!
//! Radius fractions of each chart polydisc `W_i` (defaults in brackets):
//! `U` [0.6] < witness base [0.65] < overlap-tube base [0.7] < `V` [0.8] < `W` [1].
//! Every inclusion below reduces to the base displacement `phi_base(t, z) - t`
//! staying under a fixed fraction of the chart radii, plus fiber-radius comparisons.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coeff::{opt_rational_str, rat, ratio, rational_str, rational_vec_str, Rational};
use crate::error::{Error, Result, Violation};
use crate::geometry::{
    displacement_bounds, range_bound, rel_compact, triple_overlap, tube_contains, CoverFractions, CoverTriple,
    Polydisc, TripleOverlap, TubeDomain,
};
use crate::polymap::PolyMap;

use super::input::{cocycle_residual, component_violations, GermAtlas};

/// Search limits and shrink fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasParams {
    pub fractions: CoverFractions,
    pub n_max: u64,
    #[serde(with = "rational_str")]
    pub radius_floor: Rational,
    /// Fiber radius of the witness `P` relative to the overlap tube.
    #[serde(with = "rational_str")]
    pub witness_fiber: Rational,
}

impl Default for AtlasParams {
    fn default() -> Self {
        AtlasParams {
            fractions: CoverFractions::default(),
            n_max: 1 << 16,
            radius_floor: Rational::new(1.into(), num_bigint::BigInt::from(1u64 << 20)),
            witness_fiber: ratio(9, 10),
        }
    }
}

impl AtlasParams {
    fn rho_u(&self) -> Rational {
        self.fractions.u.clone()
    }

    fn rho_t(&self) -> Rational {
        self.fractions.mid()
    }

    fn rho_p(&self) -> Rational {
        (self.rho_u() + self.rho_t()) / rat(2)
    }

    fn rho_v(&self) -> Rational {
        self.fractions.v.clone()
    }
}

/// A checked inclusion together with its margin (a lower bound on the distance to the boundary).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub holds: bool,
    #[serde(with = "rational_str")]
    pub margin: Rational,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Certificate {
    fn new(holds: bool, margin: Rational, detail: impl Into<String>) -> Self {
        Certificate {
            holds,
            margin,
            detail: detail.into(),
        }
    }
}

/// Certified inner tube of `O_ij` in chart `i`: base `lens_ij(ρ_T)`, fiber radius `fiber`
/// (`None` for the whole fiber).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapTube {
    pub i: String,
    pub j: String,
    #[serde(with = "rational_str")]
    pub base_fraction: Rational,
    /// Polydisc containing the base lens; all range bounds are taken over it.
    pub base_hull: Polydisc,
    #[serde(with = "opt_rational_str")]
    pub fiber_radius: Option<Rational>,
    /// Bounds on `|phi_base - t|` over the tube.
    #[serde(with = "rational_vec_str")]
    pub displacement: Vec<Rational>,
    /// Bound on the fiber components of `phi_ij` over the tube, when finite.
    #[serde(with = "opt_rational_str")]
    pub image_fiber_bound: Option<Rational>,
    pub halvings: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrunkChart {
    pub id: String,
    pub cover: CoverTriple,
    #[serde(with = "opt_rational_str")]
    pub z: Option<Rational>,
    pub n: u64,
    pub q: TubeDomain,
    /// (a) `Q_i ⋐ O_i`.
    pub a: Certificate,
    /// (b) `U_i × {0} ⊂ Q_i ⊂ U_i × Z_i`.
    pub b: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrunkPair {
    pub i: String,
    pub j: String,
    pub overlap: OverlapTube,
    /// The relatively compact witness `P ⋐ O_ij`.
    pub witness: TubeDomain,
    /// Smallest certified `n(i, j)`.
    pub n: u64,
    /// Tube containing `Q_ij = Q_i ∩ O_ij ∩ phi_ij^{-1}(Q_j)`.
    pub q: TubeDomain,
    /// (c) `Q_ij ⋐ O_ij`, witnessed by `Q_ij ⊂ P`.
    pub c: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleCertificate {
    pub i: String,
    pub j: String,
    pub k: String,
    /// `"witness"` or `"undecided"`; undecided triples are treated as nonempty.
    pub base_overlap: String,
    /// (d) `Q_ij ∩ Q_ik ⊂ phi_ij^{-1}(O_jk)`.
    pub d: Certificate,
    /// (e) `phi_jk ∘ phi_ij = phi_ik` up to the truncation order.
    pub e: Certificate,
    /// `Q_ij ∩ Q_ik ⊂ phi_ij^{-1}(Q_jk)`, derived from (d) and (e).
    pub strong: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrunkCover {
    pub order: u32,
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub params: AtlasParams,
    pub charts: Vec<ShrunkChart>,
    pub pairs: Vec<ShrunkPair>,
    pub triples: Vec<TripleCertificate>,
    pub triples_enforced: bool,
    pub halvings: u32,
}

impl ShrunkCover {
    pub fn chart(&self, id: &str) -> Option<&ShrunkChart> {
        self.charts.iter().find(|c| c.id == id)
    }

    pub fn pair(&self, i: &str, j: &str) -> Option<&ShrunkPair> {
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }

    pub fn radius(&self, id: &str) -> Option<&Rational> {
        self.chart(id).map(|c| &c.q.fiber_radius)
    }

    /// Radius fraction of the witness base lens.
    pub fn witness_fraction(&self) -> Rational {
        self.params.rho_p()
    }
}

/// The radius family `Q_i(n)`: fiber radius `1/n`.
pub fn tube_radius(n: u64) -> Rational {
    Rational::new(1.into(), n.into())
}

fn min_rat<'a>(it: impl IntoIterator<Item = &'a Rational>) -> Option<Rational> {
    it.into_iter().min().cloned()
}

fn lens_hull(a: &Polydisc, b: &Polydisc, frac: &Rational) -> Polydisc {
    a.scaled(frac).intersection_hull(&b.scaled(frac))
}

fn max_fiber_bound(phi: &PolyMap, m: usize, pd: &Polydisc) -> Result<Rational> {
    let mut best = Rational::zero();
    for a in m..phi.target_vars() {
        let b = range_bound(phi.component(a), pd)?;
        if b > best {
            best = b;
        }
    }
    Ok(best)
}

/// Certified inner tubes `T_ij ⊂ O_ij` for every ordered pair with `V_i ∩ V_j ≠ ∅`.
pub fn compute_overlaps(atlas: &GermAtlas, covers: &[CoverTriple], params: &AtlasParams) -> Result<Vec<OverlapTube>> {
    let m = atlas.base_dim;
    let n = atlas.fiber_dim;
    let rho_t = params.rho_t();
    let slack = params.rho_v() - &rho_t;
    let mut out = Vec::new();
    for ((i, j), t) in &atlas.transitions {
        let (i, j) = (*i, *j);
        if i == j || !covers[i].v.intersects(&covers[j].v) {
            continue;
        }
        let (wi, wj) = (&atlas.charts[i].w, &atlas.charts[j].w);
        let hull = lens_hull(wi, wj, &rho_t);
        let limits: Vec<Rational> = (0..m)
            .map(|k| &slack * std::cmp::min(&wi.radii[k], &wj.radii[k]))
            .collect();
        let zi = atlas.charts[i].z.as_ref();
        let zj = atlas.charts[j].z.as_ref();
        let identity_base = (0..m).all(|k| {
            (t.phi.component(k) - &crate::jet::Jet::var(atlas.dim(), atlas.order, k)).is_negligible(atlas.tol)
        });
        if identity_base && zi.is_none() && zj.is_none() && t.n.is_none() {
            out.push(OverlapTube {
                i: atlas.id(i).into(),
                j: atlas.id(j).into(),
                base_fraction: rho_t.clone(),
                base_hull: hull,
                fiber_radius: None,
                displacement: vec![Rational::zero(); m],
                image_fiber_bound: None,
                halvings: 0,
            });
            continue;
        }
        let start = min_rat(zi.into_iter().chain(t.n.as_ref().map(|nt| &nt.fiber_radius)))
            .map_or_else(Rational::one, |r| std::cmp::min(r, Rational::one()));
        let mut s = start;
        let mut halvings = 0;
        let found = loop {
            if s < params.radius_floor {
                break None;
            }
            let pd = hull.times_fiber(n, &s);
            let tube = TubeDomain::new(atlas.id(i), hull.clone(), s.clone())?;
            let fits_z = zi.is_none_or(|z| &s < z);
            let fits_n = match &t.n {
                Some(nt) => tube_contains(&tube, nt)?.rel_compact,
                None => true,
            };
            let disp = displacement_bounds(&t.phi, m, &pd)?;
            let fits_base = disp.iter().zip(&limits).all(|(d, l)| d < l);
            let image = if zj.is_some() {
                Some(max_fiber_bound(&t.phi, m, &pd)?)
            } else {
                None
            };
            let fits_image = match (zj, &image) {
                (Some(z), Some(b)) => b < z,
                _ => true,
            };
            if fits_z && fits_n && fits_base && fits_image {
                break Some((s.clone(), disp, image));
            }
            s /= rat(2);
            halvings += 1;
        };
        let Some((s, disp, image)) = found else {
            return Err(Error::ShrinkExhausted(format!(
                "no certified inner tube of O_({}, {}) above the radius floor {}",
                atlas.id(i),
                atlas.id(j),
                params.radius_floor
            )));
        };
        out.push(OverlapTube {
            i: atlas.id(i).into(),
            j: atlas.id(j).into(),
            base_fraction: rho_t.clone(),
            base_hull: hull,
            fiber_radius: Some(s),
            displacement: disp,
            image_fiber_bound: image,
            halvings,
        });
    }
    Ok(out)
}

/// Chart tube and certificates (a), (b) for a given `n`.
fn chart_tube(atlas: &GermAtlas, i: usize, cover: &CoverTriple, n: u64) -> Result<ShrunkChart> {
    let r = tube_radius(n);
    let q = TubeDomain::new(atlas.id(i), cover.u.clone(), r.clone())?;
    let z = atlas.charts[i].z.clone();
    let base_margin = rel_compact(&cover.u, &cover.v)?;
    let fiber_gap = z.as_ref().map(|z| z - &r);
    let a_holds = base_margin.is_some() && fiber_gap.as_ref().is_none_or(|g| g.is_positive());
    let mut a_margin = base_margin.unwrap_or_else(Rational::zero);
    if let Some(g) = &fiber_gap {
        a_margin = std::cmp::min(a_margin, g.clone());
    }
    let b_margin = fiber_gap
        .as_ref()
        .map_or(r.clone(), |g| std::cmp::min(r.clone(), g.clone()));
    Ok(ShrunkChart {
        id: atlas.id(i).into(),
        cover: cover.clone(),
        z,
        n,
        q,
        a: Certificate::new(a_holds, a_margin, "U ⋐ V in the base, fiber radius below Z"),
        b: Certificate::new(
            fiber_gap.is_none_or(|g| g.is_positive()),
            b_margin,
            "zero section inside Q, Q inside U × Z",
        ),
    })
}

fn pair_q(
    atlas: &GermAtlas,
    params: &AtlasParams,
    i: usize,
    j: usize,
    u_i: &Polydisc,
    r: &Rational,
) -> Result<TubeDomain> {
    let base = u_i.intersection_hull(&atlas.charts[j].w.scaled(&params.rho_p()));
    TubeDomain::new(atlas.id(i), base, r.clone())
}

/// Per-chart fiber radii `r_i = 1/n(i)` with certificates (a), (b), (c).
pub fn shrink_tubes(
    atlas: &GermAtlas,
    covers: &[CoverTriple],
    overlaps: &[OverlapTube],
    params: &AtlasParams,
) -> Result<ShrunkCover> {
    let m = atlas.base_dim;
    let nf = atlas.fiber_dim;
    let rho_u = params.rho_u();
    let rho_p = params.rho_p();
    let rho_t = params.rho_t();
    let nc = atlas.charts.len();

    // Own constraint: 1/n < Z_i.
    let mut n_chart = vec![1u64; nc];
    for (i, c) in atlas.charts.iter().enumerate() {
        if let Some(z) = &c.z {
            let mut n = 1u64;
            while tube_radius(n) >= *z {
                n *= 2;
                if n > params.n_max {
                    return Err(Error::ShrinkExhausted(format!(
                        "chart {}: no radius 1/n below Z with n <= {}",
                        c.id, params.n_max
                    )));
                }
            }
            n_chart[i] = n;
        }
    }

    let mut pair_data = Vec::with_capacity(overlaps.len());
    for ov in overlaps {
        let i = atlas
            .index(&ov.i)
            .ok_or_else(|| Error::Schema(format!("unknown chart {}", ov.i)))?;
        let j = atlas
            .index(&ov.j)
            .ok_or_else(|| Error::Schema(format!("unknown chart {}", ov.j)))?;
        let phi = atlas.phi(i, j).expect("overlap pairs carry a transition");
        let (wi, wj) = (&atlas.charts[i].w, &atlas.charts[j].w);
        let p_fiber = match &ov.fiber_radius {
            Some(s) => s * &params.witness_fiber,
            None => Rational::one(),
        };
        let witness = TubeDomain::new(atlas.id(i), lens_hull(wi, wj, &rho_p), p_fiber.clone())?;
        // P sits inside the overlap tube T_ij with these gaps.
        let mut margin = min_rat(
            (0..m)
                .map(|k| (&rho_t - &rho_p) * std::cmp::min(&wi.radii[k], &wj.radii[k]))
                .collect::<Vec<_>>()
                .iter(),
        )
        .unwrap_or_else(Rational::one);
        if let Some(s) = &ov.fiber_radius {
            margin = std::cmp::min(margin, s - &p_fiber);
        }
        let limits: Vec<Rational> = (0..m).map(|k| (&rho_p - &rho_u) * &wj.radii[k]).collect();
        let mut n = 1u64;
        let found = loop {
            if n > params.n_max {
                break false;
            }
            let r = tube_radius(n);
            if r <= p_fiber && atlas.charts[i].z.as_ref().is_none_or(|z| &r < z) {
                let pd = covers[i].u.times_fiber(nf, &r);
                let disp = displacement_bounds(phi, m, &pd)?;
                if disp.iter().zip(&limits).all(|(d, l)| d <= l) {
                    break true;
                }
            }
            n *= 2;
        };
        if !found {
            return Err(Error::ShrinkExhausted(format!(
                "pair ({}, {}): inclusion (c) not certified for any n <= {}",
                ov.i, ov.j, params.n_max
            )));
        }
        n_chart[i] = n_chart[i].max(n);
        pair_data.push((i, j, ov.clone(), witness, n, margin));
    }

    let charts = (0..nc)
        .map(|i| chart_tube(atlas, i, &covers[i], n_chart[i]))
        .collect::<Result<Vec<_>>>()?;
    let pairs = pair_data
        .into_iter()
        .map(|(i, j, overlap, witness, n, margin)| {
            let q = pair_q(atlas, params, i, j, &covers[i].u, &charts[i].q.fiber_radius)?;
            Ok(ShrunkPair {
                i: atlas.id(i).into(),
                j: atlas.id(j).into(),
                overlap,
                witness,
                n,
                q,
                c: Certificate::new(margin.is_positive(), margin, "Q_ij ⊂ P ⋐ O_ij"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShrunkCover {
        order: atlas.order,
        base_dim: m,
        fiber_dim: nf,
        params: params.clone(),
        charts,
        pairs,
        triples: Vec::new(),
        triples_enforced: false,
        halvings: 0,
    })
}

/// Ordered triples `(i, j, k)` with `j ∉ {i, k}` that need conditions (d), (e);
/// `k = i` stands for the pair round trip.
fn relevant_triples(atlas: &GermAtlas, cover: &ShrunkCover) -> Vec<(usize, usize, usize, TripleOverlap)> {
    let nc = atlas.charts.len();
    let has_pair = |a: usize, b: usize| cover.pair(atlas.id(a), atlas.id(b)).is_some();
    let mut out = Vec::new();
    for i in 0..nc {
        for j in 0..nc {
            if i == j || !has_pair(i, j) {
                continue;
            }
            for k in 0..nc {
                if k == j {
                    continue;
                }
                if k == i {
                    let w = cover.charts[i].cover.v.clone();
                    out.push((i, j, k, TripleOverlap::Witness(w.center.clone())));
                    continue;
                }
                if !(has_pair(i, k) && has_pair(j, k)) {
                    continue;
                }
                let v = |x: usize| &cover.charts[x].cover.v;
                let ov = triple_overlap(v(i), v(j), v(k));
                if ov.possibly_nonempty() {
                    out.push((i, j, k, ov));
                }
            }
        }
    }
    out
}

/// Shrinks chart radii by halving until (d) holds on every relevant triple, and certifies (e).
pub fn enforce_triple_domains(atlas: &GermAtlas, mut cover: ShrunkCover) -> Result<ShrunkCover> {
    let m = atlas.base_dim;
    let nf = atlas.fiber_dim;
    let dim = atlas.dim();
    let params = cover.params.clone();
    let (rho_u, rho_t) = (params.rho_u(), params.rho_t());
    let triples = relevant_triples(atlas, &cover);

    // (e) first: it does not depend on radii.
    let mut violations = Vec::new();
    let mut e_ok = Vec::with_capacity(triples.len());
    for (i, j, k, _) in &triples {
        let (i, j, k) = (*i, *j, *k);
        let target = if k == i {
            PolyMap::identity(dim, atlas.order)
        } else {
            atlas.phi(i, k).expect("pair present").clone()
        };
        let res = cocycle_residual(
            atlas.phi(i, j).expect("pair present"),
            atlas.phi(j, k).expect("pair present"),
            &target,
        )?;
        let before = violations.len();
        component_violations(
            &mut violations,
            "triple (e)",
            &[atlas.id(i), atlas.id(j), atlas.id(k)],
            &res,
            atlas.tol,
            "phi_jk ∘ phi_ij - phi_ik is not zero",
        );
        e_ok.push(violations.len() == before);
    }
    if !violations.is_empty() {
        let first = &violations[0];
        return Err(Error::validation(
            format!(
                "condition (e) fails on triple ({}) at order {}",
                first.charts.join(", "),
                atlas.order
            ),
            violations,
        ));
    }

    let mut halvings = 0u32;
    let results = loop {
        let mut failing: Option<usize> = None;
        let mut results = Vec::with_capacity(triples.len());
        for (i, j, k, ov) in &triples {
            let (i, j, k) = (*i, *j, *k);
            let qi = cover.charts[i].q.as_polydisc(nf);
            let d_ij = displacement_bounds(atlas.phi(i, j).expect("pair present"), m, &qi)?;
            let d_ik = if k == i {
                vec![Rational::zero(); m]
            } else {
                displacement_bounds(atlas.phi(i, k).expect("pair present"), m, &qi)?
            };
            let wk = &atlas.charts[k].w;
            let margin = (0..m)
                .map(|l| (&rho_t - &rho_u) * &wk.radii[l] - &d_ik[l] - &d_ij[l])
                .min()
                .unwrap_or_else(Rational::one);
            let holds = !margin.is_negative();
            if !holds && failing.is_none() {
                failing = Some(i);
            }
            results.push((i, j, k, ov.clone(), holds, margin));
        }
        let Some(i) = failing else { break results };
        let next = cover.charts[i].n * 2;
        if tube_radius(next) < params.radius_floor {
            let (_, j, k, ..) = results.iter().find(|r| !r.4).expect("a failing triple");
            return Err(Error::ShrinkExhausted(format!(
                "condition (d) on triple ({}, {}, {}) not certified above the radius floor {}",
                atlas.id(i),
                atlas.id(*j),
                atlas.id(*k),
                params.radius_floor
            )));
        }
        let covers_i = cover.charts[i].cover.clone();
        cover.charts[i] = chart_tube(atlas, i, &covers_i, next)?;
        halvings += 1;
    };

    // Refresh the pair tubes for the final radii.
    for p in cover.pairs.iter_mut() {
        let i = atlas.index(&p.i).expect("known chart");
        let j = atlas.index(&p.j).expect("known chart");
        p.q = pair_q(
            atlas,
            &params,
            i,
            j,
            &cover.charts[i].cover.u,
            &cover.charts[i].q.fiber_radius,
        )?;
    }

    cover.triples = results
        .into_iter()
        .zip(e_ok)
        .map(|((i, j, k, ov, holds, margin), e)| {
            let tag = match ov {
                TripleOverlap::Witness(_) => "witness",
                _ => "undecided",
            };
            let e_cert = Certificate::new(
                e,
                Rational::zero(),
                format!("residual zero up to order {}", atlas.order),
            );
            TripleCertificate {
                i: atlas.id(i).into(),
                j: atlas.id(j).into(),
                k: atlas.id(k).into(),
                base_overlap: tag.into(),
                d: Certificate::new(
                    holds,
                    margin.clone(),
                    "base displacement within the overlap tube of (j, k)",
                ),
                strong: Certificate::new(holds && e, margin, "derived from (d) and (e)"),
                e: e_cert,
            }
        })
        .collect();
    cover.triples_enforced = true;
    cover.halvings += halvings;
    Ok(cover)
}

/// `Violation`s for certificates that fail; used when reporting a cover.
pub fn failed_certificates(cover: &ShrunkCover) -> Vec<Violation> {
    let mut out = Vec::new();
    for c in &cover.charts {
        for (name, cert) in [("(a)", &c.a), ("(b)", &c.b)] {
            if !cert.holds {
                out.push(Violation::new(name, &[c.id.as_str()]).detail(cert.detail.clone()));
            }
        }
    }
    for p in &cover.pairs {
        if !p.c.holds {
            out.push(Violation::new("(c)", &[p.i.as_str(), p.j.as_str()]).detail(p.c.detail.clone()));
        }
    }
    for t in &cover.triples {
        for (name, cert) in [("(d)", &t.d), ("(e)", &t.e)] {
            if !cert.holds {
                out.push(Violation::new(name, &[t.i.as_str(), t.j.as_str(), t.k.as_str()]).detail(cert.detail.clone()));
            }
        }
    }
    out
}
