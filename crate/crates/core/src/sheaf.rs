//! Gluing sheaf data given by transition matrices over jets.
//!
//! Transition matrices live in the coordinates of their source chart. The cocycle is
//! checked with the pull-back that makes it coordinate independent,
//! `(g_jk ∘ phi_ij) · g_ij = g_ik`, which is the plain product when the charts'
//! transition maps are identities.

use std::collections::BTreeMap;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::atlas::GluedAtlas;
use crate::coeff::{opt_rational_str, rat, rational_str, Rational};
use crate::error::{Error, Result, Violation};
use crate::geometry::{deviation_bound, modulus_lower, some_within, triple_overlap, Polydisc, TubeDomain};
use crate::matrix::{JetMatrix, MatrixDoc};
use crate::polymap::PolyMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SheafMode {
    /// Locally free: invertible square transition matrices.
    #[default]
    Free,
    /// Presented modules `O^k -> O^l`; only the presentation compatibility is checked.
    Presentation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheafChartDoc {
    pub id: String,
    pub rank: usize,
    /// Number of relations `k_i` (presentation mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<usize>,
    /// Relation matrix `xi_i` (`rank × relations`), presentation mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<MatrixDoc>,
    /// Domain of the chart-wise module; defaults to the chart tube of the atlas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<TubeDomain>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheafPairDoc {
    pub i: String,
    pub j: String,
    /// `A_ij`.
    pub domain: TubeDomain,
    /// `g_ij`, of shape `rank_j × rank_i`.
    pub g: MatrixDoc,
    /// `chi_ij` (`relations_j × relations_i`), presentation mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<MatrixDoc>,
    /// Declared transition of the module on the base (entries in the base variables only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<MatrixDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheafTripleDoc {
    pub i: String,
    pub j: String,
    pub k: String,
    /// `B_ijk`.
    pub domain: TubeDomain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheafInput {
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub order: u32,
    #[serde(default)]
    pub mode: SheafMode,
    pub charts: Vec<SheafChartDoc>,
    #[serde(default)]
    pub pairs: Vec<SheafPairDoc>,
    #[serde(default)]
    pub triples: Vec<SheafTripleDoc>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SheafChart {
    pub id: String,
    pub rank: usize,
    pub relations: Option<usize>,
    pub xi: Option<JetMatrix>,
    pub domain: Option<TubeDomain>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SheafPair {
    pub domain: TubeDomain,
    pub g: JetMatrix,
    pub chi: Option<JetMatrix>,
    pub base: Option<JetMatrix>,
}

/// Parsed sheaf data, keyed by chart ids.
#[derive(Clone, Debug, PartialEq)]
pub struct SheafData {
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub order: u32,
    pub mode: SheafMode,
    pub charts: Vec<SheafChart>,
    pub pairs: BTreeMap<(String, String), SheafPair>,
    /// `B_ijk`, stored under the sorted id triple.
    pub triples: BTreeMap<[String; 3], TubeDomain>,
    pub tol: f64,
}

fn sorted3(i: &str, j: &str, k: &str) -> [String; 3] {
    let mut v = [i.to_string(), j.to_string(), k.to_string()];
    v.sort();
    v
}

impl SheafData {
    pub fn from_input(input: &SheafInput, order: Option<u32>, float_tol: Option<f64>) -> Result<Self> {
        let dim = input.base_dim + input.fiber_dim;
        let k = order.unwrap_or(input.order);
        let parse = |doc: &MatrixDoc| -> Result<JetMatrix> {
            let mut m = JetMatrix::from_doc(doc, dim, input.order)?.with_order(k);
            if float_tol.is_some() {
                m = m.to_float();
            }
            Ok(m)
        };
        let mut charts = Vec::new();
        for c in &input.charts {
            if charts.iter().any(|x: &SheafChart| x.id == c.id) {
                return Err(Error::Schema(format!("duplicate chart id {}", c.id)));
            }
            let xi = c.xi.as_ref().map(parse).transpose()?;
            if let Some(x) = &xi {
                if x.rows() != c.rank || Some(x.cols()) != c.relations {
                    return Err(Error::Shape(format!("xi for chart {} must be rank × relations", c.id)));
                }
            }
            if input.mode == SheafMode::Presentation && xi.is_none() {
                return Err(Error::Schema(format!("chart {} needs xi in presentation mode", c.id)));
            }
            charts.push(SheafChart {
                id: c.id.clone(),
                rank: c.rank,
                relations: c.relations,
                xi,
                domain: c.domain.clone(),
            });
        }
        let rank = |id: &str| {
            charts
                .iter()
                .find(|c| c.id == id)
                .map(|c| (c.rank, c.relations))
                .ok_or_else(|| Error::Schema(format!("unknown chart {id}")))
        };
        let mut pairs = BTreeMap::new();
        for p in &input.pairs {
            let (ri, ki) = rank(&p.i)?;
            let (rj, kj) = rank(&p.j)?;
            let g = parse(&p.g)?;
            if g.rows() != rj || g.cols() != ri {
                return Err(Error::Shape(format!(
                    "g_({}, {}) is {}×{}, expected {rj}×{ri}",
                    p.i,
                    p.j,
                    g.rows(),
                    g.cols()
                )));
            }
            let chi = p.chi.as_ref().map(parse).transpose()?;
            if let Some(c) = &chi {
                if Some(c.rows()) != kj || Some(c.cols()) != ki {
                    return Err(Error::Shape(format!("chi_({}, {}) has the wrong shape", p.i, p.j)));
                }
            }
            if input.mode == SheafMode::Presentation && chi.is_none() {
                return Err(Error::Schema(format!(
                    "pair ({}, {}) needs chi in presentation mode",
                    p.i, p.j
                )));
            }
            let base = p
                .base
                .as_ref()
                .map(|b| JetMatrix::from_doc(b, input.base_dim, input.order).map(|m| m.with_order(k)))
                .transpose()?;
            if p.domain.base.dim() != input.base_dim {
                return Err(Error::Dimension {
                    expected: input.base_dim,
                    found: p.domain.base.dim(),
                });
            }
            let key = (p.i.clone(), p.j.clone());
            if pairs
                .insert(
                    key,
                    SheafPair {
                        domain: p.domain.clone(),
                        g,
                        chi,
                        base,
                    },
                )
                .is_some()
            {
                return Err(Error::Schema(format!("duplicate pair ({}, {})", p.i, p.j)));
            }
        }
        let mut triples = BTreeMap::new();
        for t in &input.triples {
            for id in [&t.i, &t.j, &t.k] {
                rank(id)?;
            }
            let key = sorted3(&t.i, &t.j, &t.k);
            if let Some(prev) = triples.insert(key, t.domain.clone()) {
                if prev.base != t.domain.base || prev.fiber_radius != t.domain.fiber_radius {
                    return Err(Error::validation(
                        "B_ijk must be symmetric in its indices",
                        vec![Violation::new("symmetry", &[t.i.as_str(), t.j.as_str(), t.k.as_str()])
                            .detail("two different domains given for the same triple")],
                    ));
                }
            }
        }
        Ok(SheafData {
            base_dim: input.base_dim,
            fiber_dim: input.fiber_dim,
            order: k,
            mode: input.mode,
            charts,
            pairs,
            triples,
            tol: float_tol.unwrap_or(0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.base_dim + self.fiber_dim
    }

    pub fn chart(&self, id: &str) -> Option<&SheafChart> {
        self.charts.iter().find(|c| c.id == id)
    }

    pub fn g(&self, i: &str, j: &str) -> Option<&JetMatrix> {
        self.pairs.get(&(i.to_string(), j.to_string())).map(|p| &p.g)
    }
}

/// Transition maps of the underlying atlas; identities when no atlas is given.
fn chart_map(atlas: Option<&GluedAtlas>, dim: usize, order: u32, i: &str, j: &str) -> Result<PolyMap> {
    match atlas {
        None => Ok(PolyMap::identity(dim, order)),
        Some(a) => Ok(a
            .phi(i, j)?
            .map(|p| p.with_order(order))
            .unwrap_or_else(|| PolyMap::identity(dim, order))),
    }
}

fn matrix_violations(out: &mut Vec<Violation>, check: &str, charts: &[&str], res: &JetMatrix, tol: f64, detail: &str) {
    let mut seen = std::collections::BTreeSet::new();
    for r in res.residuals(tol, |_| true) {
        if seen.insert((r.row, r.col)) {
            out.push(
                Violation::new(check, charts)
                    .entry(format!("({}, {})", r.row, r.col))
                    .at(&r.exponents, &r.value)
                    .detail(detail),
            );
        }
    }
}

/// Rational lower bound on `|det g|` over a polydisc: value at the center minus the deviation bound.
pub fn det_lower_bound(g: &JetMatrix, d: &Polydisc) -> Result<Rational> {
    let det = g.det()?.to_exact();
    let center_value = det.eval_exact(&d.center);
    Ok(modulus_lower(&center_value) - deviation_bound(&det, d)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterminantCertificate {
    pub i: String,
    pub j: String,
    #[serde(with = "rational_str")]
    pub lower_bound: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheafReport {
    pub order: u32,
    pub mode: SheafMode,
    pub pairs_checked: usize,
    pub triples_checked: usize,
    pub determinants: Vec<DeterminantCertificate>,
}

/// Checks domain symmetry, inverse pairs, the cocycle on each `B_ijk`, invertibility
/// (free mode) or the presentation identity `psi_ij xi_i = (xi_j ∘ phi_ij) chi_ij`.
pub fn validate_sheaf_cocycle(data: &SheafData, atlas: Option<&GluedAtlas>) -> Result<SheafReport> {
    let dim = data.dim();
    let k = data.order;
    let tol = data.tol;
    let mut violations = Vec::new();
    let mut determinants = Vec::new();

    for ((i, j), p) in &data.pairs {
        let ids = [i.as_str(), j.as_str()];
        if let Some(q) = data.pairs.get(&(j.clone(), i.clone())) {
            if q.domain.base != p.domain.base || q.domain.fiber_radius != p.domain.fiber_radius {
                violations.push(Violation::new("symmetry", &ids).detail("A_ij and A_ji differ"));
            }
        }
        if let Some(b) = data.triples.iter().find(|(key, _)| key.contains(i) && key.contains(j)) {
            let inside = crate::geometry::contains(&b.1.base, &p.domain.base)?.contained
                && b.1.fiber_radius <= p.domain.fiber_radius;
            if !inside {
                violations.push(
                    Violation::new("triple-domain", &[b.0[0].as_str(), b.0[1].as_str(), b.0[2].as_str()])
                        .detail(format!("B is not inside A_({i}, {j})")),
                );
            }
        }
    }

    match data.mode {
        SheafMode::Free => {
            for c in &data.charts {
                if let Some(g) = data.g(&c.id, &c.id) {
                    let res = g.try_sub(&JetMatrix::identity(c.rank, dim, k))?;
                    matrix_violations(
                        &mut violations,
                        "identity",
                        &[&c.id],
                        &res,
                        tol,
                        "g_ii must be the identity",
                    );
                }
            }
            for ((i, j), p) in &data.pairs {
                if i == j {
                    continue;
                }
                if !p.g.is_square() {
                    violations.push(Violation::new("invertible", &[i, j]).detail("g_ij is not square"));
                    continue;
                }
                let pd = p.domain.as_polydisc(data.fiber_dim);
                let lower = det_lower_bound(&p.g, &pd)?;
                if !lower.is_positive() {
                    violations.push(Violation::new("invertible", &[i, j]).detail(format!(
                        "|det g_ij| not bounded away from 0 on A_ij (lower bound {lower})"
                    )));
                }
                determinants.push(DeterminantCertificate {
                    i: i.clone(),
                    j: j.clone(),
                    lower_bound: lower,
                });
                if let Some(back) = data.g(j, i) {
                    let phi = chart_map(atlas, dim, k, i, j)?;
                    let res = back
                        .compose(&phi)?
                        .try_mul(&p.g)?
                        .try_sub(&JetMatrix::identity(p.g.cols(), dim, k))?;
                    matrix_violations(
                        &mut violations,
                        "inverse-pair",
                        &[i, j],
                        &res,
                        tol,
                        "(g_ji ∘ phi_ij) g_ij must be 1",
                    );
                }
                if let Some(b) = &p.base {
                    let restricted = p.g.map(|e| e.set_zero(&(data.base_dim..dim).collect::<Vec<_>>()));
                    let declared = b.map(|e| e.extend_vars(data.fiber_dim));
                    let res = restricted.try_sub(&declared)?;
                    matrix_violations(
                        &mut violations,
                        "base-data",
                        &[i, j],
                        &res,
                        tol,
                        "g_ij(t, 0) differs from the base transition",
                    );
                }
            }
        }
        SheafMode::Presentation => {
            for ((i, j), p) in &data.pairs {
                let (xi_i, xi_j) = (
                    data.chart(i).and_then(|c| c.xi.as_ref()).expect("checked at parse"),
                    data.chart(j).and_then(|c| c.xi.as_ref()).expect("checked at parse"),
                );
                let phi = chart_map(atlas, dim, k, i, j)?;
                let chi = p.chi.as_ref().expect("checked at parse");
                let res = p.g.try_mul(xi_i)?.try_sub(&xi_j.compose(&phi)?.try_mul(chi)?)?;
                matrix_violations(
                    &mut violations,
                    "presentation",
                    &[i, j],
                    &res,
                    tol,
                    "psi_ij xi_i must equal xi_j chi_ij",
                );
            }
        }
    }

    let mut triples_checked = 0;
    if data.mode == SheafMode::Free {
        for key in data.triples.keys() {
            for (i, j, l) in permutations(key) {
                let (Some(gij), Some(gjk), Some(gik)) = (data.g(i, j), data.g(j, l), data.g(i, l)) else {
                    violations.push(
                        Violation::new("cocycle", &[i, j, l]).detail("missing transition matrix on a declared triple"),
                    );
                    continue;
                };
                triples_checked += 1;
                let phi = chart_map(atlas, dim, k, i, j)?;
                let res = gjk.compose(&phi)?.try_mul(gij)?.try_sub(gik)?;
                matrix_violations(
                    &mut violations,
                    "cocycle",
                    &[i, j, l],
                    &res,
                    tol,
                    "(g_jk ∘ phi_ij) g_ij must equal g_ik",
                );
            }
        }
    }

    if !violations.is_empty() {
        return Err(Error::validation(
            format!("{} sheaf identities fail at order {k}", violations.len()),
            violations,
        ));
    }
    Ok(SheafReport {
        order: k,
        mode: data.mode,
        pairs_checked: data.pairs.len(),
        triples_checked,
        determinants,
    })
}

fn permutations(key: &[String; 3]) -> Vec<(&str, &str, &str)> {
    let [a, b, c] = key;
    let (a, b, c) = (a.as_str(), b.as_str(), c.as_str());
    vec![(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedSheafChart {
    pub id: String,
    pub rank: usize,
    #[serde(with = "rational_str")]
    pub epsilon: Rational,
    /// `U_i(ε_i)`.
    pub tube: TubeDomain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedSheafPair {
    pub i: String,
    pub j: String,
    /// Polydisc tube containing `U_ij(ε_i)`.
    pub domain: TubeDomain,
    pub g: MatrixDoc,
    /// `g_ij(t, 0)` in the base variables.
    pub zero_section: MatrixDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedSheaf {
    pub order: u32,
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub mode: SheafMode,
    pub charts: Vec<GluedSheafChart>,
    pub pairs: Vec<GluedSheafPair>,
    pub cocycle_order: u32,
    pub report: SheafReport,
}

impl GluedSheaf {
    pub fn chart(&self, id: &str) -> Option<&GluedSheafChart> {
        self.charts.iter().find(|c| c.id == id)
    }

    pub fn pair(&self, i: &str, j: &str) -> Option<&GluedSheafPair> {
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }

    pub fn g(&self, i: &str, j: &str) -> Result<Option<JetMatrix>> {
        self.pair(i, j)
            .map(|p| JetMatrix::from_doc(&p.g, self.base_dim + self.fiber_dim, self.order))
            .transpose()
    }
}

/// Validates the data, then picks per-chart tube radii `ε_i` so that `U_i(ε_i)` lies in the chart
/// domain, `U_ij(ε_i) ⊂ A_ij` and `U_ijk(ε_i) ⊂ B_ijk`, and restricts the transitions to them.
pub fn glue_sheaf(data: &SheafData, atlas: &GluedAtlas, floor: &Rational) -> Result<GluedSheaf> {
    let report = validate_sheaf_cocycle(data, Some(atlas))?;
    let nf = data.fiber_dim;
    let m = data.base_dim;
    let dim = data.dim();
    let base_of = |id: &str| -> Result<&Polydisc> {
        atlas
            .chart(id)
            .map(|c| &c.q.base)
            .ok_or_else(|| Error::Schema(format!("chart {id} is not in the atlas")))
    };
    let mut charts = Vec::new();
    for c in &data.charts {
        let q = &atlas
            .chart(&c.id)
            .ok_or_else(|| Error::Schema(format!("chart {} is not in the atlas", c.id)))?
            .q;
        let u = &q.base;
        let mut eps = q.fiber_radius.clone();
        loop {
            if eps < *floor {
                return Err(Error::ShrinkExhausted(format!(
                    "chart {}: no sheaf tube radius above {floor}",
                    c.id
                )));
            }
            let mut ok = match &c.domain {
                Some(d) => crate::geometry::contains(u, &d.base)?.contained && eps <= d.fiber_radius,
                None => eps <= q.fiber_radius,
            };
            for other in &data.charts {
                if !ok || other.id == c.id {
                    continue;
                }
                let uj = base_of(&other.id)?;
                if !u.intersects(uj) {
                    continue;
                }
                let Some(p) = data.pairs.get(&(c.id.clone(), other.id.clone())) else {
                    return Err(Error::Schema(format!(
                        "charts {} and {} overlap but g_ij is missing",
                        c.id, other.id
                    )));
                };
                ok &= some_within(&[u, uj], &p.domain.base)?.is_some() && eps <= p.domain.fiber_radius;
                for third in &data.charts {
                    if third.id == c.id || third.id == other.id || !ok {
                        continue;
                    }
                    let uk = base_of(&third.id)?;
                    if !triple_overlap(u, uj, uk).possibly_nonempty() {
                        continue;
                    }
                    let Some(b) = data.triples.get(&sorted3(&c.id, &other.id, &third.id)) else {
                        return Err(Error::Schema(format!(
                            "triple ({}, {}, {}) overlaps but B_ijk is missing",
                            c.id, other.id, third.id
                        )));
                    };
                    ok &= some_within(&[u, uj, uk], &b.base)?.is_some() && eps <= b.fiber_radius;
                }
            }
            if ok {
                break;
            }
            eps /= rat(2);
        }
        charts.push(GluedSheafChart {
            id: c.id.clone(),
            rank: c.rank,
            epsilon: eps.clone(),
            tube: TubeDomain::new(c.id.clone(), u.clone(), eps)?,
        });
    }
    let fiber_vars: Vec<usize> = (m..dim).collect();
    let mut pairs = Vec::new();
    for ((i, j), p) in &data.pairs {
        let (Some(ci), Some(_)) = (charts.iter().find(|c| &c.id == i), charts.iter().find(|c| &c.id == j)) else {
            continue;
        };
        let (ui, uj) = (base_of(i)?, base_of(j)?);
        if i != j && !ui.intersects(uj) {
            continue;
        }
        let zero = p.g.map(|e| e.set_zero(&fiber_vars));
        let zero_base = JetMatrix::from_rows(
            (0..zero.rows())
                .map(|r| {
                    (0..zero.cols())
                        .map(|c| zero.get(r, c).restrict_to_leading(m))
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>(),
        )?;
        pairs.push(GluedSheafPair {
            i: i.clone(),
            j: j.clone(),
            domain: TubeDomain::new(i.clone(), ui.intersection_hull(uj), ci.epsilon.clone())?,
            g: p.g.to_doc(),
            zero_section: zero_base.to_doc(),
        });
    }
    Ok(GluedSheaf {
        order: data.order,
        base_dim: m,
        fiber_dim: nf,
        mode: data.mode,
        charts,
        pairs,
        cocycle_order: data.order,
        report,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedMorphismChart {
    pub id: String,
    #[serde(with = "rational_str")]
    pub epsilon: Rational,
    pub domain: TubeDomain,
    pub phi: MatrixDoc,
    /// Lower bound on `|det Phi_i|` over the domain, for square chart matrices.
    #[serde(with = "opt_rational_str")]
    pub det_lower_bound: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedMorphism {
    pub order: u32,
    pub dim: usize,
    pub charts: Vec<GluedMorphismChart>,
    pub isomorphism: bool,
}

impl GluedMorphism {
    pub fn matrix(&self, id: &str) -> Result<Option<JetMatrix>> {
        self.charts
            .iter()
            .find(|c| c.id == id)
            .map(|c| JetMatrix::from_doc(&c.phi, self.dim, self.order))
            .transpose()
    }

    /// `other ∘ self`, chart by chart, on the smaller of the two tubes.
    pub fn then(&self, other: &GluedMorphism) -> Result<GluedMorphism> {
        let mut charts = Vec::new();
        for c in &self.charts {
            let o = other
                .charts
                .iter()
                .find(|x| x.id == c.id)
                .ok_or_else(|| Error::Schema(format!("chart {} missing from the second morphism", c.id)))?;
            let a = JetMatrix::from_doc(&c.phi, self.dim, self.order)?;
            let b = JetMatrix::from_doc(&o.phi, other.dim, other.order)?;
            let prod = b.try_mul(&a)?;
            let (eps, domain) = if o.epsilon < c.epsilon {
                (o.epsilon.clone(), o.domain.clone())
            } else {
                (c.epsilon.clone(), c.domain.clone())
            };
            charts.push(GluedMorphismChart {
                id: c.id.clone(),
                epsilon: eps,
                domain,
                phi: prod.to_doc(),
                det_lower_bound: None,
            });
        }
        Ok(GluedMorphism {
            order: self.order.min(other.order),
            dim: self.dim,
            charts,
            isomorphism: self.isomorphism && other.isomorphism,
        })
    }
}

/// Glues chart matrices `Phi_i: B1_i -> B2_i` after checking
/// `g2_ij Phi_i = (Phi_j ∘ phi_ij) g1_ij` on every overlap.
pub fn glue_sheaf_morphism(
    s1: &GluedSheaf,
    s2: &GluedSheaf,
    maps: &[(String, JetMatrix)],
    atlas: Option<&GluedAtlas>,
    floor: &Rational,
) -> Result<GluedMorphism> {
    let dim = s1.base_dim + s1.fiber_dim;
    let k = s1.order.min(s2.order);
    let find = |id: &str| {
        maps.iter()
            .find(|(c, _)| c == id)
            .map(|(_, m)| m.with_order(k))
            .ok_or_else(|| Error::Schema(format!("no chart matrix for chart {id}")))
    };
    let mut violations = Vec::new();
    for p in &s1.pairs {
        if p.i == p.j {
            continue;
        }
        let g1 = JetMatrix::from_doc(&p.g, dim, s1.order)?.with_order(k);
        let Some(g2) = s2.g(&p.i, &p.j)? else {
            violations.push(Violation::new("agreement", &[&p.i, &p.j]).detail("target sheaf has no transition here"));
            continue;
        };
        let g2 = g2.with_order(k);
        let phi = chart_map(atlas, dim, k, &p.i, &p.j)?;
        let lhs = g2.try_mul(&find(&p.i)?)?;
        let rhs = find(&p.j)?.compose(&phi)?.try_mul(&g1)?;
        matrix_violations(
            &mut violations,
            "agreement",
            &[&p.i, &p.j],
            &lhs.try_sub(&rhs)?,
            0.0,
            "g2_ij Phi_i differs from (Phi_j ∘ phi_ij) g1_ij",
        );
    }
    if !violations.is_empty() {
        let first = violations[0].charts.join(", ");
        return Err(Error::Agreement {
            summary: format!("chart matrices disagree on overlap ({first})"),
            violations,
        });
    }

    let mut charts = Vec::new();
    let mut iso = true;
    for c in &s1.charts {
        let c2 = s2
            .chart(&c.id)
            .ok_or_else(|| Error::Schema(format!("chart {} missing from the target sheaf", c.id)))?;
        let phi = find(&c.id)?;
        let mut eps = std::cmp::min(c.epsilon.clone(), c2.epsilon.clone());
        // R_ij(ε) must lie in both pair domains, where the agreement was checked.
        loop {
            if eps < *floor {
                return Err(Error::ShrinkExhausted(format!(
                    "chart {}: no morphism tube radius above {floor}",
                    c.id
                )));
            }
            let ok = s1
                .pairs
                .iter()
                .chain(&s2.pairs)
                .filter(|p| p.i == c.id)
                .all(|p| eps <= p.domain.fiber_radius);
            if ok {
                break;
            }
            eps /= rat(2);
        }
        let domain = TubeDomain::new(c.id.clone(), c.tube.base.clone(), eps.clone())?;
        let det_lower = if phi.is_square() {
            Some(det_lower_bound(&phi, &domain.as_polydisc(s1.fiber_dim))?)
        } else {
            None
        };
        iso &= det_lower.as_ref().is_some_and(|d| d.is_positive()) && c.rank == c2.rank;
        charts.push(GluedMorphismChart {
            id: c.id.clone(),
            epsilon: eps,
            domain,
            phi: phi.to_doc(),
            det_lower_bound: det_lower,
        });
    }
    Ok(GluedMorphism {
        order: k,
        dim,
        charts,
        isomorphism: iso,
    })
}
