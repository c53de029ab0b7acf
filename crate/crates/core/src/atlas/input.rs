use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::coeff::{opt_rational_str, Gaussian, Rational};
use crate::error::{Error, Result, Violation};
use crate::geometry::{triple_overlap, PointDoc, Polydisc, TubeDomain};
use crate::jet::Jet;
use crate::polymap::{map_inverse, PolyMap, PolyMapDoc};

/// One chart: a base polydisc `W` and an optional fiber radius for `Z` (absent = all of `C^n`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartDoc {
    pub id: String,
    #[serde(rename = "W")]
    pub w: Polydisc,
    #[serde(
        rename = "Z",
        default,
        with = "opt_rational_str",
        skip_serializing_if = "Option::is_none"
    )]
    pub z: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub i: String,
    pub j: String,
    pub phi: PolyMapDoc,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<TubeDomain>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GermAtlasInput {
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub order: u32,
    pub charts: Vec<ChartDoc>,
    #[serde(default)]
    pub transitions: Vec<TransitionDoc>,
    #[serde(default)]
    pub samples: Vec<PointDoc>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub id: String,
    pub w: Polydisc,
    pub z: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub phi: PolyMap,
    pub n: Option<TubeDomain>,
    /// Filled in as the formal inverse of the opposite direction.
    pub inferred: bool,
}

/// Parsed germ data with every overlapping pair present in both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct GermAtlas {
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub order: u32,
    pub charts: Vec<Chart>,
    pub transitions: BTreeMap<(usize, usize), Transition>,
    pub samples: Vec<Vec<Gaussian>>,
    /// Equality tolerance for float coefficients; ignored by exact ones.
    pub tol: f64,
}

/// Outcome of a successful validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub order: u32,
    pub charts: usize,
    pub transitions: usize,
    pub inferred_inverses: Vec<[String; 2]>,
    pub zero_section_checks: usize,
    pub inverse_pair_checks: usize,
    pub cocycle_checks: usize,
}

impl GermAtlas {
    /// Schema-level parsing; `order` overrides the declared truncation order and `float_tol`
    /// switches coefficients to floating point.
    pub fn from_input(input: &GermAtlasInput, order: Option<u32>, float_tol: Option<f64>) -> Result<Self> {
        let m = input.base_dim;
        let n = input.fiber_dim;
        let dim = m + n;
        let k = order.unwrap_or(input.order);
        if input.charts.is_empty() {
            return Err(Error::Schema("atlas has no charts".into()));
        }
        let mut index = HashMap::new();
        let mut charts = Vec::with_capacity(input.charts.len());
        for (pos, c) in input.charts.iter().enumerate() {
            c.w.validate()?;
            if c.w.dim() != m {
                return Err(Error::Dimension {
                    expected: m,
                    found: c.w.dim(),
                });
            }
            if let Some(z) = &c.z {
                if !num_traits::Signed::is_positive(z) {
                    return Err(Error::Schema(format!("chart {}: fiber radius must be positive", c.id)));
                }
            }
            if index.insert(c.id.clone(), pos).is_some() {
                return Err(Error::Schema(format!("duplicate chart id {}", c.id)));
            }
            charts.push(Chart {
                id: c.id.clone(),
                w: c.w.clone(),
                z: c.z.clone(),
            });
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::Schema(format!("transition refers to unknown chart {id}")))
        };
        let mut transitions = BTreeMap::new();
        for t in &input.transitions {
            let (i, j) = (lookup(&t.i)?, lookup(&t.j)?);
            if t.phi.0.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: t.phi.0.len(),
                });
            }
            let mut phi = PolyMap::from_doc(&t.phi, dim, input.order)?.with_order(k);
            if float_tol.is_some() {
                phi = phi.to_float();
            }
            if let Some(nt) = &t.n {
                if nt.chart != t.i || nt.base.dim() != m {
                    return Err(Error::Schema(format!(
                        "N for ({}, {}) must be a tube in chart {} over {m} base variables",
                        t.i, t.j, t.i
                    )));
                }
                nt.base.validate()?;
            }
            if transitions
                .insert(
                    (i, j),
                    Transition {
                        phi,
                        n: t.n.clone(),
                        inferred: false,
                    },
                )
                .is_some()
            {
                return Err(Error::Schema(format!("duplicate transition ({}, {})", t.i, t.j)));
            }
        }
        let tol = float_tol.unwrap_or(0.0);
        for i in 0..charts.len() {
            transitions.entry((i, i)).or_insert_with(|| Transition {
                phi: PolyMap::identity(dim, k),
                n: None,
                inferred: false,
            });
            for j in 0..charts.len() {
                if i == j || !charts[i].w.intersects(&charts[j].w) || transitions.contains_key(&(i, j)) {
                    continue;
                }
                let Some(back) = transitions.get(&(j, i)) else {
                    return Err(Error::Schema(format!(
                        "charts {} and {} overlap but no transition is given in either direction",
                        charts[i].id, charts[j].id
                    )));
                };
                let phi = map_inverse(&back.phi, tol)?;
                transitions.insert(
                    (i, j),
                    Transition {
                        phi,
                        n: None,
                        inferred: true,
                    },
                );
            }
        }
        let samples = input
            .samples
            .iter()
            .map(|p| {
                if p.0.len() != m {
                    Err(Error::Dimension {
                        expected: m,
                        found: p.0.len(),
                    })
                } else {
                    Ok(p.0.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GermAtlas {
            base_dim: m,
            fiber_dim: n,
            order: k,
            charts,
            transitions,
            samples,
            tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.base_dim + self.fiber_dim
    }

    pub fn index(&self, id: &str) -> Option<usize> {
        self.charts.iter().position(|c| c.id == id)
    }

    pub fn id(&self, i: usize) -> &str {
        &self.charts[i].id
    }

    pub fn phi(&self, i: usize, j: usize) -> Option<&PolyMap> {
        self.transitions.get(&(i, j)).map(|t| &t.phi)
    }

    pub fn to_input(&self) -> GermAtlasInput {
        GermAtlasInput {
            base_dim: self.base_dim,
            fiber_dim: self.fiber_dim,
            order: self.order,
            charts: self
                .charts
                .iter()
                .map(|c| ChartDoc {
                    id: c.id.clone(),
                    w: c.w.clone(),
                    z: c.z.clone(),
                })
                .collect(),
            transitions: self
                .transitions
                .iter()
                .filter(|((i, j), t)| i != j && !t.inferred)
                .map(|((i, j), t)| TransitionDoc {
                    i: self.charts[*i].id.clone(),
                    j: self.charts[*j].id.clone(),
                    phi: t.phi.to_doc(),
                    n: t.n.clone(),
                })
                .collect(),
            samples: self.samples.iter().map(|p| PointDoc(p.clone())).collect(),
        }
    }

    fn fiber_vars(&self) -> Vec<usize> {
        (self.base_dim..self.dim()).collect()
    }
}

/// Pushes one violation per component of `residual` that is not negligible,
/// locating it at the lowest-order offending monomial.
pub(crate) fn component_violations(
    out: &mut Vec<Violation>,
    check: &str,
    charts: &[&str],
    residual: &PolyMap,
    tol: f64,
    detail: &str,
) {
    for (a, c) in residual.components().iter().enumerate() {
        if let Some((mono, v)) = c.terms().find(|(_, v)| !v.is_negligible(tol)) {
            out.push(
                Violation::new(check, charts)
                    .entry(format!("component {a}"))
                    .at(mono.exps(), v)
                    .detail(detail),
            );
        }
    }
}

/// `phi_jk ∘ phi_ij - target`.
pub(crate) fn cocycle_residual(phi_ij: &PolyMap, phi_jk: &PolyMap, target: &PolyMap) -> Result<PolyMap> {
    phi_ij.then(phi_jk)?.try_sub(target)
}

/// Checks the three germ identities: identity on the zero section, inverse pairs and the cocycle.
pub fn validate_germ_data(atlas: &GermAtlas) -> Result<ValidationReport> {
    let m = atlas.base_dim;
    let dim = atlas.dim();
    let k = atlas.order;
    let tol = atlas.tol;
    let fiber = atlas.fiber_vars();
    let mut violations = Vec::new();
    let mut composable = BTreeMap::new();

    let mut zero_checks = 0;
    for (&(i, j), t) in &atlas.transitions {
        zero_checks += 1;
        let ids = [atlas.id(i), atlas.id(j)];
        if i == j {
            let res = t.phi.try_sub(&PolyMap::identity(dim, k))?;
            component_violations(
                &mut violations,
                "identity",
                &ids,
                &res,
                tol,
                "phi_ii must be the identity",
            );
        }
        let restricted = t.phi.map_components(|c| c.set_zero(&fiber));
        let expected = PolyMap::new(
            dim,
            (0..dim)
                .map(|a| if a < m { Jet::var(dim, k, a) } else { Jet::zero(dim, k) })
                .collect(),
        )?;
        let res = restricted.try_sub(&expected)?;
        component_violations(
            &mut violations,
            "zero-section",
            &ids,
            &res,
            tol,
            "phi(t, 0) must equal (t, 0)",
        );
        composable.insert((i, j), t.phi.has_zero_constant_terms());
    }

    let mut inverse_checks = 0;
    for (&(i, j), t) in &atlas.transitions {
        if i >= j {
            continue;
        }
        let Some(back) = atlas.transitions.get(&(j, i)) else {
            continue;
        };
        if !(composable[&(i, j)] && composable[&(j, i)]) {
            continue;
        }
        inverse_checks += 1;
        let id = PolyMap::identity(dim, k);
        for (a, b, name) in [(i, j, "phi_ji ∘ phi_ij"), (j, i, "phi_ij ∘ phi_ji")] {
            let (first, second) = if a == i {
                (&t.phi, &back.phi)
            } else {
                (&back.phi, &t.phi)
            };
            let res = cocycle_residual(first, second, &id)?;
            component_violations(
                &mut violations,
                "inverse-pair",
                &[atlas.id(a), atlas.id(b)],
                &res,
                tol,
                &format!("{name} must be the identity"),
            );
        }
    }

    let mut cocycle_checks = 0;
    let nc = atlas.charts.len();
    for i in 0..nc {
        for j in 0..nc {
            for l in 0..nc {
                if i == j || j == l || i == l {
                    continue;
                }
                let (Some(a), Some(b), Some(c)) = (atlas.phi(i, j), atlas.phi(j, l), atlas.phi(i, l)) else {
                    continue;
                };
                let w = |x: usize| &atlas.charts[x].w;
                if !triple_overlap(w(i), w(j), w(l)).possibly_nonempty() {
                    continue;
                }
                if !(composable[&(i, j)] && composable[&(j, l)]) {
                    continue;
                }
                cocycle_checks += 1;
                let res = cocycle_residual(a, b, c)?;
                component_violations(
                    &mut violations,
                    "cocycle",
                    &[atlas.id(i), atlas.id(j), atlas.id(l)],
                    &res,
                    tol,
                    "phi_jk ∘ phi_ij must equal phi_ik",
                );
            }
        }
    }

    for (&(i, j), ok) in &composable {
        if !ok {
            violations.push(
                Violation::new("composition-domain", &[atlas.id(i), atlas.id(j)])
                    .detail("a component has a nonzero constant term"),
            );
        }
    }

    if !violations.is_empty() {
        return Err(Error::validation(
            format!("{} violated identities at order {k}", violations.len()),
            violations,
        ));
    }
    Ok(ValidationReport {
        order: k,
        charts: nc,
        transitions: atlas.transitions.len(),
        inferred_inverses: atlas
            .transitions
            .iter()
            .filter(|(_, t)| t.inferred)
            .map(|((i, j), _)| [atlas.id(*i).to_string(), atlas.id(*j).to_string()])
            .collect(),
        zero_section_checks: zero_checks,
        inverse_pair_checks: inverse_checks,
        cocycle_checks,
    })
}
