use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coeff::{ratio, rational_str, Rational};
use crate::error::{Error, Result, Violation};
use crate::geometry::{
    displacement_bounds, pair_within, range_bound, refine_cover, triple_overlap, tube_contains, Polydisc,
    TripleOverlap, TubeDomain,
};
use crate::jet::Jet;
use crate::polymap::{PolyMap, PolyMapDoc};

use super::input::{cocycle_residual, component_violations, validate_germ_data, GermAtlas, ValidationReport};
use super::shrink::{compute_overlaps, enforce_triple_domains, shrink_tubes, AtlasParams, ShrunkCover};

/// Closedness of the gluing relation, witnessed by the margins of (c).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedRelation {
    pub closed: bool,
    #[serde(with = "rational_str")]
    pub margin: Rational,
    pub pairs: usize,
}

pub fn check_closed_relation(cover: &ShrunkCover) -> Result<ClosedRelation> {
    let mut margin: Option<Rational> = None;
    for p in &cover.pairs {
        if !p.c.holds || !p.c.margin.is_positive() {
            return Err(Error::CertificateIncomplete(format!(
                "pair ({}, {}) has no positive margin for Q_ij ⋐ O_ij",
                p.i, p.j
            )));
        }
        margin = Some(match margin {
            Some(m) if m <= p.c.margin => m,
            _ => p.c.margin.clone(),
        });
    }
    Ok(ClosedRelation {
        closed: true,
        margin: margin.unwrap_or_else(Rational::zero),
        pairs: cover.pairs.len(),
    })
}

/// Simplices of a cover by polydiscs: nonempty pairs and witnessed triples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nerve {
    pub vertices: Vec<String>,
    pub edges: Vec<[String; 2]>,
    pub triangles: Vec<[String; 3]>,
    /// Triples neither certified empty nor witnessed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undecided: Vec<[String; 3]>,
}

impl Nerve {
    pub fn of(cover: &[(String, Polydisc)]) -> Nerve {
        let n = cover.len();
        let mut nerve = Nerve {
            vertices: cover.iter().map(|(id, _)| id.clone()).collect(),
            edges: Vec::new(),
            triangles: Vec::new(),
            undecided: Vec::new(),
        };
        for a in 0..n {
            for b in a + 1..n {
                if cover[a].1.intersects(&cover[b].1) {
                    nerve.edges.push([cover[a].0.clone(), cover[b].0.clone()]);
                }
                for c in b + 1..n {
                    let ids = [cover[a].0.clone(), cover[b].0.clone(), cover[c].0.clone()];
                    match triple_overlap(&cover[a].1, &cover[b].1, &cover[c].1) {
                        TripleOverlap::Witness(_) => nerve.triangles.push(ids),
                        TripleOverlap::Undecided => nerve.undecided.push(ids),
                        TripleOverlap::Empty => {}
                    }
                }
            }
        }
        nerve
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedChart {
    pub id: String,
    pub q: TubeDomain,
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedTransition {
    pub i: String,
    pub j: String,
    pub domain: TubeDomain,
    pub phi: PolyMapDoc,
}

/// Chart-wise embedding `t -> (t, 0)` of the base cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroSectionChart {
    pub chart: String,
    pub base: Polydisc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasCertificates {
    pub cocycle_order: u32,
    pub hausdorff: bool,
    #[serde(with = "rational_str")]
    pub hausdorff_margin: Rational,
    pub reflexive: bool,
    pub symmetric: bool,
    pub transitive: bool,
    pub equivalence_relation: bool,
    pub triples_checked: usize,
    pub halvings: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedAtlas {
    pub order: u32,
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub charts: Vec<GluedChart>,
    pub transitions: Vec<GluedTransition>,
    pub zero_section: Vec<ZeroSectionChart>,
    pub nerve: Nerve,
    pub certificates: AtlasCertificates,
}

impl GluedAtlas {
    pub fn dim(&self) -> usize {
        self.base_dim + self.fiber_dim
    }

    pub fn chart(&self, id: &str) -> Option<&GluedChart> {
        self.charts.iter().find(|c| c.id == id)
    }

    pub fn transition(&self, i: &str, j: &str) -> Option<&GluedTransition> {
        self.transitions.iter().find(|t| t.i == i && t.j == j)
    }

    /// The transition map from chart `i` to chart `j`; the identity when `i == j`.
    pub fn phi(&self, i: &str, j: &str) -> Result<Option<PolyMap>> {
        if i == j {
            return Ok(Some(PolyMap::identity(self.dim(), self.order)));
        }
        self.transition(i, j)
            .map(|t| PolyMap::from_doc(&t.phi, self.dim(), self.order))
            .transpose()
    }

    /// Restriction to the zero section, as a cover of the base.
    pub fn zero_section_cover(&self) -> Vec<(String, Polydisc)> {
        self.zero_section
            .iter()
            .map(|z| (z.chart.clone(), z.base.clone()))
            .collect()
    }

    pub fn zero_section_nerve(&self) -> Nerve {
        Nerve::of(&self.zero_section_cover())
    }
}

/// Assembles the glued atlas from a fully certified cover.
pub fn build_glued_atlas(atlas: &GermAtlas, cover: &ShrunkCover, closed: &ClosedRelation) -> Result<GluedAtlas> {
    if !cover.triples_enforced {
        return Err(Error::CertificateIncomplete("triple domains were not enforced".into()));
    }
    if !closed.closed {
        return Err(Error::CertificateIncomplete(
            "closed-relation certificate missing".into(),
        ));
    }
    if let Some(c) = cover.charts.iter().find(|c| !c.a.holds || !c.b.holds) {
        return Err(Error::CertificateIncomplete(format!("chart {} lacks (a) or (b)", c.id)));
    }
    if let Some(t) = cover.triples.iter().find(|t| !t.d.holds || !t.e.holds) {
        return Err(Error::CertificateIncomplete(format!(
            "triple ({}, {}, {}) lacks (d) or (e)",
            t.i, t.j, t.k
        )));
    }
    let dim = atlas.dim();
    let k = atlas.order;

    let reflexive = (0..atlas.charts.len()).all(|i| {
        atlas.phi(i, i).is_some_and(|p| {
            p.try_sub(&PolyMap::identity(dim, k))
                .is_ok_and(|r| r.is_negligible(atlas.tol))
        })
    });
    let mut symmetric = true;
    for p in &cover.pairs {
        let i = atlas.index(&p.i).expect("known chart");
        let j = atlas.index(&p.j).expect("known chart");
        let (Some(a), Some(b)) = (atlas.phi(i, j), atlas.phi(j, i)) else {
            symmetric = false;
            continue;
        };
        let res = cocycle_residual(a, b, &PolyMap::identity(dim, k))?;
        symmetric &= res.is_negligible(atlas.tol);
    }
    let transitive = cover.triples.iter().all(|t| t.strong.holds);

    let transitions = cover
        .pairs
        .iter()
        .map(|p| {
            let i = atlas.index(&p.i).expect("known chart");
            let j = atlas.index(&p.j).expect("known chart");
            GluedTransition {
                i: p.i.clone(),
                j: p.j.clone(),
                domain: p.q.clone(),
                phi: atlas.phi(i, j).expect("pair present").to_doc(),
            }
        })
        .collect();
    let zero_section: Vec<ZeroSectionChart> = cover
        .charts
        .iter()
        .map(|c| ZeroSectionChart {
            chart: c.id.clone(),
            base: c.q.base.clone(),
        })
        .collect();
    let nerve = Nerve::of(
        &zero_section
            .iter()
            .map(|z| (z.chart.clone(), z.base.clone()))
            .collect::<Vec<_>>(),
    );
    Ok(GluedAtlas {
        order: k,
        base_dim: atlas.base_dim,
        fiber_dim: atlas.fiber_dim,
        charts: cover
            .charts
            .iter()
            .map(|c| GluedChart {
                id: c.id.clone(),
                q: c.q.clone(),
                n: c.n,
            })
            .collect(),
        transitions,
        zero_section,
        nerve,
        certificates: AtlasCertificates {
            cocycle_order: k,
            hausdorff: closed.closed,
            hausdorff_margin: closed.margin.clone(),
            reflexive,
            symmetric,
            transitive,
            equivalence_relation: reflexive && symmetric && transitive,
            triples_checked: cover.triples.len(),
            halvings: cover.halvings,
        },
    })
}

/// Every intermediate product of the gluing pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlueOutcome {
    pub validation: ValidationReport,
    pub cover: ShrunkCover,
    pub closed: ClosedRelation,
    pub atlas: GluedAtlas,
}

/// Validate, refine the cover, shrink, enforce triples, certify closedness and glue.
pub fn glue(atlas: &GermAtlas, params: &AtlasParams) -> Result<GlueOutcome> {
    let validation = validate_germ_data(atlas)?;
    let ws: Vec<Polydisc> = atlas.charts.iter().map(|c| c.w.clone()).collect();
    let covers = refine_cover(&ws, &atlas.samples, &params.fractions)?;
    let overlaps = compute_overlaps(atlas, &covers, params)?;
    let cover = shrink_tubes(atlas, &covers, &overlaps, params)?;
    let cover = enforce_triple_domains(atlas, cover)?;
    let closed = check_closed_relation(&cover)?;
    let glued = build_glued_atlas(atlas, &cover, &closed)?;
    Ok(GlueOutcome {
        validation,
        cover,
        closed,
        atlas: glued,
    })
}

/// One chart-wise map `psi_i` from chart `i` of the first atlas to chart `i` of the second,
/// defined on `domain` (default: the chart tube of the first atlas).
#[derive(Clone, Debug, PartialEq)]
pub struct ChartMap {
    pub chart: String,
    pub psi: PolyMap,
    pub domain: Option<TubeDomain>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedMapChart {
    pub chart: String,
    #[serde(with = "rational_str")]
    pub epsilon: Rational,
    /// `R_i(ε_i)`.
    pub domain: TubeDomain,
    pub psi: PolyMapDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedMap {
    pub order: u32,
    pub charts: Vec<GluedMapChart>,
    pub agreeing_pairs: Vec<[String; 2]>,
    pub uniqueness: String,
}

/// Fraction of each base `U_i` used for the shrunk cover `R_i`.
const MAP_BASE_FRACTION: (i64, i64) = (9, 10);

/// Glues chart-wise maps `psi_i` into one map between the glued atlases, after checking
/// `psi_j ∘ phi1_ij = phi2_ij ∘ psi_i` up to the truncation order on every overlap.
pub fn glue_chartwise_maps(a1: &GluedAtlas, a2: &GluedAtlas, maps: &[ChartMap], floor: &Rational) -> Result<GluedMap> {
    if a1.dim() != a2.dim() || a1.base_dim != a2.base_dim {
        return Err(Error::Dimension {
            expected: a1.dim(),
            found: a2.dim(),
        });
    }
    let m = a1.base_dim;
    let dim = a1.dim();
    let k = a1.order.min(a2.order);
    let find = |id: &str| {
        maps.iter()
            .find(|c| c.chart == id)
            .ok_or_else(|| Error::Schema(format!("no chart map for chart {id}")))
    };
    for c in &a1.charts {
        if a2.chart(&c.id).is_none() {
            return Err(Error::Schema(format!("chart {} missing from the target atlas", c.id)));
        }
        let psi = &find(&c.id)?.psi;
        if psi.source_vars() != dim || psi.target_vars() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: psi.source_vars(),
            });
        }
    }

    let mut zero_violations = Vec::new();
    let fiber: Vec<usize> = (m..dim).collect();
    for c in &a1.charts {
        let psi = find(&c.id)?.psi.with_order(k);
        let restricted = psi.map_components(|j| j.set_zero(&fiber));
        let expected = PolyMap::new(
            dim,
            (0..dim)
                .map(|a| if a < m { Jet::var(dim, k, a) } else { Jet::zero(dim, k) })
                .collect(),
        )?;
        component_violations(
            &mut zero_violations,
            "zero-section",
            &[c.id.as_str()],
            &restricted.try_sub(&expected)?,
            0.0,
            "psi(t, 0) must equal (t, 0)",
        );
    }
    if !zero_violations.is_empty() {
        return Err(Error::validation(
            "chart maps are not the identity on the zero section",
            zero_violations,
        ));
    }

    let mut violations = Vec::new();
    let mut agreeing = Vec::new();
    for t in &a1.transitions {
        let phi1 = PolyMap::from_doc(&t.phi, dim, a1.order)?.with_order(k);
        let Some(phi2) = a2.phi(&t.i, &t.j)? else {
            violations.push(
                Violation::new("agreement", &[t.i.as_str(), t.j.as_str()])
                    .detail("the target atlas has no transition for this pair"),
            );
            continue;
        };
        let phi2 = phi2.with_order(k);
        let psi_i = find(&t.i)?.psi.with_order(k);
        let psi_j = find(&t.j)?.psi.with_order(k);
        let lhs = phi1.then(&psi_j)?;
        let rhs = psi_i.then(&phi2)?;
        let before = violations.len();
        component_violations(
            &mut violations,
            "agreement",
            &[t.i.as_str(), t.j.as_str()],
            &lhs.try_sub(&rhs)?,
            0.0,
            "psi_j ∘ phi1_ij differs from phi2_ij ∘ psi_i",
        );
        if violations.len() == before {
            agreeing.push([t.i.clone(), t.j.clone()]);
        }
    }
    if !violations.is_empty() {
        let first = &violations[0];
        return Err(Error::Agreement {
            summary: format!("chart maps disagree on overlap ({})", first.charts.join(", ")),
            violations,
        });
    }

    let frac = ratio(MAP_BASE_FRACTION.0, MAP_BASE_FRACTION.1);
    let r_base = |id: &str| a1.chart(id).expect("checked").q.base.scaled(&frac);
    let mut charts = Vec::with_capacity(a1.charts.len());
    for c in &a1.charts {
        let cm = find(&c.id)?;
        let t_i = cm.domain.clone().unwrap_or_else(|| c.q.clone());
        let target = &a2.chart(&c.id).expect("checked").q;
        let base = r_base(&c.id);
        let mut eps = std::cmp::min(t_i.fiber_radius.clone(), c.q.fiber_radius.clone());
        let found = loop {
            if eps < *floor {
                break false;
            }
            let r = TubeDomain::new(c.id.clone(), base.clone(), eps.clone())?;
            let pd = r.as_polydisc(a1.fiber_dim);
            let inside_t = tube_contains(&r, &t_i)?.contained;
            // R_ij(ε) must sit in the tube of Q_ij, where the agreement is certified.
            let mut inside_pairs = true;
            for p in a1.transitions.iter().filter(|p| p.i == c.id) {
                let other = r_base(&p.j);
                inside_pairs &= pair_within(&base, &other, &p.domain.base)?.is_some() || !base.intersects(&other);
                inside_pairs &= eps <= p.domain.fiber_radius;
            }
            // psi_i(R_i(ε)) lands in the chart tube of the target atlas.
            let psi = cm.psi.with_order(k);
            let disp = displacement_bounds(&psi, m, &pd)?;
            let lands_base = (0..m).all(|l| {
                let gap = &target.base.radii[l]
                    - &base.radii[l]
                    - crate::coeff::sqrt_upper(&crate::geometry::dist_sqr(&base.center[l], &target.base.center[l]));
                disp[l] <= gap
            });
            let mut lands_fiber = true;
            for a in m..dim {
                lands_fiber &= range_bound(psi.component(a), &pd)? <= target.fiber_radius;
            }
            if inside_t && inside_pairs && lands_base && lands_fiber {
                break true;
            }
            eps /= crate::coeff::rat(2);
        };
        if !found {
            return Err(Error::ShrinkExhausted(format!(
                "chart {}: no tube radius above {} for the chart map",
                c.id, floor
            )));
        }
        charts.push(GluedMapChart {
            chart: c.id.clone(),
            epsilon: eps.clone(),
            domain: TubeDomain::new(c.id.clone(), base, eps)?,
            psi: cm.psi.to_doc(),
        });
    }
    Ok(GluedMap {
        order: k,
        charts,
        agreeing_pairs: agreeing,
        uniqueness: format!(
            "the glued map is determined by its chart maps up to order {k}; agreement of germs beyond that order is not checked"
        ),
    })
}
