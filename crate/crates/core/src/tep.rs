//! TEP-structure data in local frames: flatness, pairing, (IC), (GC), miniversality,
//! and globalization of chart-wise data over a glued atlas.
//!
//! Frame conventions used throughout (the variables are `t_1..t_m, z`, with `z` last):
//!
//! * `∇_{∂_a} = ∂_a + A_a / z` and `∇_{∂_z} = ∂_z + B / z²`.
//! * The pairing of frame coefficient vectors is `(s1, s2) = s1(t, -z)ᵀ P(t, z) s2(t, z)`.
//!
//! After clearing poles, flatness of `∇` and flatness of the pairing become the polynomial
//! identities listed in [`FLATNESS_CONVENTION`] and [`PAIRING_CONVENTION`].

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::atlas::{glue, AtlasParams, GermAtlas, GluedAtlas};
use crate::coeff::{Coeff, CoeffDoc, Gaussian, Rational};
use crate::error::{Error, Result};
use crate::geometry::{PointDoc, Polydisc};
use crate::jet::{Jet, JetDoc, Monomial};
use crate::matrix::{scalar_det, scalar_mat_vec, EchelonBasis, JetMatrix, MatrixDoc, ScalarMatrix};
use crate::polymap::PolyMap;
use crate::sheaf::{glue_sheaf, GluedSheaf, SheafData};

pub const FLATNESS_CONVENTION: &str = "nabla_a = d_a + A_a/z, nabla_z = d_z + B/z^2; \
     (a,b): z(d_a A_b - d_b A_a) + [A_a, A_b] = 0; \
     (a,z): z d_a B - z^2 d_z A_a + z A_a + [A_a, B] = 0";

pub const PAIRING_CONVENTION: &str = "(s1, s2) = s1(t,-z)^T P(t,z) s2(t,z); \
     symmetry: P(t,z) = P(t,-z)^T; \
     (a): z d_a P = -A_a(t,-z)^T P + P A_a; \
     (z): z^2 d_z P = -B(t,-z)^T P + P B";

pub const INTERTWINING_CONVENTION: &str = "s_j = g_ij s_i with g_ij independent of z; \
     (a): z d_a g + sum_b (A^j_b o phi) J_ba g - g A^i_a = 0; \
     (z): (B^j o phi) g - g B^i = 0; \
     pairing: P^i - g^T (P^j o phi) g = 0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TepOrders {
    pub t: u32,
    pub z: u32,
}

/// Serialized TEP data on one chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TepDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    pub m: usize,
    pub rank: usize,
    #[serde(rename = "A")]
    pub a: Vec<MatrixDoc>,
    #[serde(rename = "B")]
    pub b: MatrixDoc,
    #[serde(rename = "P")]
    pub p: MatrixDoc,
    pub zeta: Vec<JetDoc>,
    pub orders: TepOrders,
    /// Base domain of the chart; points handed to the pointwise checks must lie in it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Polydisc>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TepData {
    pub chart: Option<String>,
    pub m: usize,
    pub rank: usize,
    pub a: Vec<JetMatrix>,
    pub b: JetMatrix,
    pub p: JetMatrix,
    pub zeta: Vec<Jet>,
    pub orders: TepOrders,
    pub domain: Option<Polydisc>,
    pub tol: f64,
}

impl TepData {
    pub fn from_doc(doc: &TepDoc, orders: Option<TepOrders>, float_tol: Option<f64>) -> Result<Self> {
        let nv = doc.m + 1;
        let declared = doc.orders.t + doc.orders.z;
        let ord = orders.unwrap_or(doc.orders);
        let clip = |j: Jet| -> Jet {
            let j = j
                .with_order(ord.t + ord.z)
                .retain_terms(|mo| mo.degree_in(0..doc.m) <= ord.t && mo.exps()[doc.m] <= ord.z);
            if float_tol.is_some() {
                j.to_float()
            } else {
                j
            }
        };
        let mat = |d: &MatrixDoc, what: &str| -> Result<JetMatrix> {
            let m = JetMatrix::from_doc(d, nv, declared)?.map(|e| clip(e.clone()));
            if m.rows() != doc.rank || m.cols() != doc.rank {
                return Err(Error::Shape(format!("{what} must be {0}×{0}", doc.rank)));
            }
            Ok(m)
        };
        if doc.a.len() != doc.m {
            return Err(Error::Dimension {
                expected: doc.m,
                found: doc.a.len(),
            });
        }
        if doc.zeta.len() != doc.rank {
            return Err(Error::Dimension {
                expected: doc.rank,
                found: doc.zeta.len(),
            });
        }
        if let Some(d) = &doc.domain {
            d.validate()?;
            if d.dim() != doc.m {
                return Err(Error::Dimension {
                    expected: doc.m,
                    found: d.dim(),
                });
            }
        }
        Ok(TepData {
            chart: doc.chart.clone(),
            m: doc.m,
            rank: doc.rank,
            a: doc
                .a
                .iter()
                .enumerate()
                .map(|(i, d)| mat(d, &format!("A_{}", i + 1)))
                .collect::<Result<_>>()?,
            b: mat(&doc.b, "B")?,
            p: mat(&doc.p, "P")?,
            zeta: doc
                .zeta
                .iter()
                .map(|d| Jet::from_doc(d, nv, declared).map(clip))
                .collect::<Result<_>>()?,
            orders: ord,
            domain: doc.domain.clone(),
            tol: float_tol.unwrap_or(0.0),
        })
    }

    pub fn to_doc(&self) -> TepDoc {
        TepDoc {
            chart: self.chart.clone(),
            m: self.m,
            rank: self.rank,
            a: self.a.iter().map(JetMatrix::to_doc).collect(),
            b: self.b.to_doc(),
            p: self.p.to_doc(),
            zeta: self.zeta.iter().map(Jet::to_doc).collect(),
            orders: self.orders,
            domain: self.domain.clone(),
        }
    }

    fn num_vars(&self) -> usize {
        self.m + 1
    }

    fn order(&self) -> u32 {
        self.orders.t + self.orders.z
    }

    fn z(&self) -> Jet {
        Jet::var(self.num_vars(), self.order(), self.m)
    }

    /// Coefficients that are fully determined by the truncated data after one `t`-derivative.
    fn derivative_region(&self) -> impl Fn(&Monomial) -> bool {
        let (m, kt, kz) = (self.m, self.orders.t.max(1) - 1, self.orders.z);
        move |mo: &Monomial| mo.degree_in(0..m) <= kt && mo.exps()[m] <= kz
    }

    fn box_region(&self) -> impl Fn(&Monomial) -> bool {
        let (m, kt, kz) = (self.m, self.orders.t, self.orders.z);
        move |mo: &Monomial| mo.degree_in(0..m) <= kt && mo.exps()[m] <= kz
    }

    /// The default evaluation point: the center of the domain, or the origin.
    pub fn base_point(&self) -> Vec<Gaussian> {
        match &self.domain {
            Some(d) => d.center.clone(),
            None => vec![Gaussian::zero(); self.m],
        }
    }

    fn check_point(&self, y: &[Gaussian]) -> Result<()> {
        if y.len() != self.m {
            return Err(Error::Dimension {
                expected: self.m,
                found: y.len(),
            });
        }
        if let Some(d) = &self.domain {
            if !d.contains_point(y) {
                return Err(Error::Domain(format!(
                    "{} is outside the base domain of chart {}",
                    crate::geometry::format_point(y),
                    self.chart.as_deref().unwrap_or("(unnamed)")
                )));
            }
        }
        Ok(())
    }

    fn at_zero(&self, y: &[Gaussian]) -> Vec<Coeff> {
        let mut p: Vec<Coeff> = y.iter().cloned().map(Coeff::from_gaussian).collect();
        p.push(Coeff::zero());
        if self.tol > 0.0 {
            p.iter().map(Coeff::as_float).collect()
        } else {
            p
        }
    }
}

/// One nonzero coefficient of a residual matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub check: String,
    pub row: usize,
    pub col: usize,
    pub exponents: Vec<u32>,
    pub value: CoeffDoc,
}

fn collect(out: &mut Vec<ResidualEntry>, check: &str, res: &JetMatrix, tol: f64, region: impl Fn(&Monomial) -> bool) {
    out.extend(res.residuals(tol, region).into_iter().map(|r| ResidualEntry {
        check: check.to_string(),
        row: r.row,
        col: r.col,
        exponents: r.exponents,
        value: CoeffDoc::from(&r.value),
    }));
}

/// Partial derivative kept at the order of its argument; callers only read coefficients
/// inside a region where the lost top degree does not matter.
fn deriv(m: &JetMatrix, var: usize) -> Result<JetMatrix> {
    Ok(m.partial(var)?.with_order(m.order()))
}

fn commutator(a: &JetMatrix, b: &JetMatrix) -> Result<JetMatrix> {
    a.try_mul(b)?.try_sub(&b.try_mul(a)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub convention: String,
    pub flat: bool,
    pub residuals: Vec<ResidualEntry>,
}

pub fn validate_tep_flatness(d: &TepData) -> Result<FlatnessReport> {
    let z = d.z();
    let zm = d.m;
    let region = d.derivative_region();
    let mut residuals = Vec::new();
    for a in 0..d.m {
        for b in a + 1..d.m {
            let curl = deriv(&d.a[b], a)?.try_sub(&deriv(&d.a[a], b)?)?.scale_jet(&z);
            let res = curl.try_add(&commutator(&d.a[a], &d.a[b])?)?;
            collect(
                &mut residuals,
                &format!("flat({},{})", a + 1, b + 1),
                &res,
                d.tol,
                &region,
            );
        }
        let z2 = &z * &z;
        let res = deriv(&d.b, a)?
            .scale_jet(&z)
            .try_sub(&deriv(&d.a[a], zm)?.scale_jet(&z2))?
            .try_add(&d.a[a].scale_jet(&z))?
            .try_add(&commutator(&d.a[a], &d.b)?)?;
        collect(&mut residuals, &format!("flat({},z)", a + 1), &res, d.tol, &region);
    }
    Ok(FlatnessReport {
        convention: FLATNESS_CONVENTION.to_string(),
        flat: residuals.is_empty(),
        residuals,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub convention: String,
    pub symmetric: bool,
    pub compatible: bool,
    pub nondegenerate: bool,
    /// `det P(y, 0)` at the base point of the data.
    pub det_p0: CoeffDoc,
    pub residuals: Vec<ResidualEntry>,
}

impl PairingReport {
    pub fn holds(&self) -> bool {
        self.symmetric && self.compatible && self.nondegenerate
    }
}

fn reflect_z(m: &JetMatrix, zvar: usize) -> JetMatrix {
    m.map(|e| e.reflect(zvar))
}

pub fn validate_tep_pairing(d: &TepData) -> Result<PairingReport> {
    let z = d.z();
    let zm = d.m;
    let p = &d.p;
    let mut residuals = Vec::new();

    let sym = p.try_sub(&reflect_z(p, zm).transpose())?;
    collect(&mut residuals, "symmetry", &sym, d.tol, d.box_region());
    let symmetric = residuals.is_empty();

    let twisted = |x: &JetMatrix| -> Result<JetMatrix> {
        let lhs = reflect_z(x, zm).transpose().try_mul(p)?;
        p.try_mul(x)?.try_sub(&lhs)
    };
    for a in 0..d.m {
        let res = deriv(p, a)?.scale_jet(&z).try_sub(&twisted(&d.a[a])?)?;
        collect(
            &mut residuals,
            &format!("pairing({})", a + 1),
            &res,
            d.tol,
            d.derivative_region(),
        );
    }
    let z2 = &z * &z;
    let res = deriv(p, zm)?.scale_jet(&z2).try_sub(&twisted(&d.b)?)?;
    collect(&mut residuals, "pairing(z)", &res, d.tol, d.box_region());
    let compatible = residuals.iter().all(|r| r.check == "symmetry");

    let det = scalar_det(&p.eval(&d.at_zero(&d.base_point()))?, d.tol);
    Ok(PairingReport {
        convention: PAIRING_CONVENTION.to_string(),
        symmetric,
        compatible,
        nondegenerate: !det.is_negligible(d.tol),
        det_p0: CoeffDoc::from(&det),
        residuals,
    })
}

fn a_at(d: &TepData, y: &[Gaussian]) -> Result<Vec<ScalarMatrix>> {
    let pt = d.at_zero(y);
    d.a.iter().map(|a| a.eval(&pt)).collect()
}

fn zeta_at(d: &TepData, y: &[Gaussian]) -> Result<Vec<Coeff>> {
    let pt = d.at_zero(y);
    d.zeta.iter().map(|e| e.eval(&pt)).collect()
}

/// Injectivity of `v ↦ z∇_v ζ |_(y,0)`, whose columns are `A_a(y,0) ζ(y,0)`.
pub fn check_ic(d: &TepData, y: &[Gaussian]) -> Result<bool> {
    d.check_point(y)?;
    let zeta = zeta_at(d, y)?;
    let cols: Vec<Vec<Coeff>> = a_at(d, y)?.iter().map(|a| scalar_mat_vec(a, &zeta)).collect();
    Ok(crate::matrix::scalar_rank(&cols, d.tol) == d.m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcReport {
    pub holds: bool,
    /// Dimension of the span of all words of length `≤ depth`, for `depth = 0, 1, ...`.
    pub dims: Vec<usize>,
}

/// Span growth of `(z²∇_z)^l z∇_{v_1} ⋯ z∇_{v_k} ζ` at `(y, 0)`.
///
/// Each operator's value at `z = 0` only depends on its argument's value there, so
/// words whose value is already in the span are not extended further.
pub fn check_gc(d: &TepData, y: &[Gaussian]) -> Result<GcReport> {
    d.check_point(y)?;
    let pt = d.at_zero(y);
    let z = d.z();
    let z2 = &z * &z;
    let apply = |op: usize, s: &[Jet]| -> Result<Vec<Jet>> {
        let (mat, var, factor) = if op < d.m { (&d.a[op], op, &z) } else { (&d.b, d.m, &z2) };
        let lin = mat.apply(s)?;
        s.iter()
            .zip(lin)
            .map(|(e, l)| Ok(&(factor * &e.partial(var)?.with_order(e.order())) + &l))
            .collect()
    };
    let value = |s: &[Jet]| -> Result<Vec<Coeff>> { s.iter().map(|e| e.eval(&pt)).collect() };
    let mut basis = EchelonBasis::new(d.tol);
    let mut frontier = Vec::new();
    if basis.insert(&value(&d.zeta)?) {
        frontier.push(d.zeta.clone());
    }
    let mut dims = vec![basis.dim()];
    for _ in 0..d.rank {
        if frontier.is_empty() || basis.dim() == d.rank {
            break;
        }
        let mut next = Vec::new();
        for s in &frontier {
            for op in 0..=d.m {
                let t = apply(op, s)?;
                if basis.insert(&value(&t)?) {
                    next.push(t);
                }
            }
        }
        dims.push(basis.dim());
        frontier = next;
    }
    Ok(GcReport {
        holds: basis.dim() == d.rank,
        dims,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiniversalReport {
    pub holds: bool,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// A fiber element `x` with `[A_1 x | ⋯ | A_m x]` invertible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<CoeffDoc>>,
}

/// Largest rank for which the determinant is expanded symbolically.
pub const SYMBOLIC_MINIVERSAL_RANK: usize = 4;
const RANDOM_TRIALS: usize = 8;

fn column_matrix(a: &[ScalarMatrix], x: &[Coeff]) -> ScalarMatrix {
    let cols: Vec<Vec<Coeff>> = a.iter().map(|m| scalar_mat_vec(m, x)).collect();
    (0..x.len())
        .map(|r| cols.iter().map(|c| c[r].clone()).collect())
        .collect()
}

pub fn check_miniversal(d: &TepData, y: &[Gaussian], seed: u64) -> Result<MiniversalReport> {
    d.check_point(y)?;
    let n = d.rank;
    if d.m != n {
        return Ok(MiniversalReport {
            holds: false,
            method: "dimension".into(),
            seed: None,
            reason: Some(format!("base dimension {} differs from rank {n}", d.m)),
            witness: None,
        });
    }
    let a = a_at(d, y)?;
    let witness = |x: Vec<Coeff>| Some(x.iter().map(CoeffDoc::from).collect());
    if n <= SYMBOLIC_MINIVERSAL_RANK {
        let ord = n as u32;
        let rows = (0..n)
            .map(|r| {
                (0..n)
                    .map(|col| {
                        let terms = (0..n).map(|c| {
                            let mut e = vec![0u32; n];
                            e[c] = 1;
                            (e, a[col][r][c].clone())
                        });
                        Jet::from_terms(n, ord, terms)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let det = JetMatrix::from_rows(rows)?.det()?;
        let holds = !det.is_negligible(d.tol);
        // A polynomial of degree n that is not identically zero is nonzero somewhere on {0..n}^n.
        let found = holds.then(|| {
            (0..(n as u64 + 1).pow(n as u32)).find_map(|mut code| {
                let x: Vec<Coeff> = (0..n)
                    .map(|_| {
                        let v = code % (n as u64 + 1);
                        code /= n as u64 + 1;
                        Coeff::from_i64(v as i64)
                    })
                    .collect();
                (!scalar_det(&column_matrix(&a, &x), d.tol).is_negligible(d.tol)).then_some(x)
            })
        });
        return Ok(MiniversalReport {
            holds,
            method: "symbolic".into(),
            seed: None,
            reason: (!holds).then(|| "determinant vanishes identically".to_string()),
            witness: found.flatten().and_then(witness),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_TRIALS {
        let x: Vec<Coeff> = (0..n)
            .map(|_| Coeff::from_i64(rng.gen_range(-(1 << 16)..=(1 << 16))))
            .collect();
        if !scalar_det(&column_matrix(&a, &x), d.tol).is_negligible(d.tol) {
            return Ok(MiniversalReport {
                holds: true,
                method: "randomized".into(),
                seed: Some(seed),
                reason: None,
                witness: witness(x),
            });
        }
    }
    Ok(MiniversalReport {
        holds: false,
        method: "randomized".into(),
        seed: Some(seed),
        reason: Some(format!("determinant vanished at {RANDOM_TRIALS} random points")),
        witness: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TepReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    pub point: PointDoc,
    pub flatness: FlatnessReport,
    pub pairing: PairingReport,
    pub ic: bool,
    pub gc: GcReport,
    pub miniversal: MiniversalReport,
}

impl TepReport {
    /// The structure axioms hold (flatness and the pairing conditions).
    pub fn axioms_hold(&self) -> bool {
        self.flatness.flat && self.pairing.holds()
    }
}

/// All checks for one chart at `y` (default: the base point of the data).
pub fn tep_check(d: &TepData, y: Option<&[Gaussian]>, seed: u64) -> Result<TepReport> {
    let y = y.map(<[Gaussian]>::to_vec).unwrap_or_else(|| d.base_point());
    Ok(TepReport {
        chart: d.chart.clone(),
        point: PointDoc(y.clone()),
        flatness: validate_tep_flatness(d)?,
        pairing: validate_tep_pairing(d)?,
        ic: check_ic(d, &y)?,
        gc: check_gc(d, &y)?,
        miniversal: check_miniversal(d, &y, seed)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    pub chart: String,
    pub point: PointDoc,
    pub ic: bool,
    pub gc: GcReport,
    pub miniversal: MiniversalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalTepCertificate {
    pub intertwining_convention: String,
    pub atlas: GluedAtlas,
    pub sheaf: GluedSheaf,
    pub charts: Vec<TepReport>,
    pub points: Vec<PointCheck>,
    pub intertwining: Vec<IntertwiningResidual>,
    /// Chart data restricted to the zero section (fiber variables set to 0, base directions only).
    pub zero_section: Vec<TepDoc>,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntertwiningResidual {
    pub i: String,
    pub j: String,
    #[serde(flatten)]
    pub entry: ResidualEntry,
}

/// Restricts chart data to the zero section: the fiber variables are set to 0 and the
/// fiber directions of the connection are dropped.
pub fn restrict_to_zero_section(d: &TepData, base_dim: usize) -> Result<TepData> {
    if base_dim > d.m {
        return Err(Error::Dimension {
            expected: d.m,
            found: base_dim,
        });
    }
    let fiber: Vec<usize> = (base_dim..d.m).collect();
    let restrict = |j: &Jet| -> Jet {
        let kept = j.set_zero(&fiber);
        let mut map: Vec<usize> = (0..base_dim).collect();
        map.extend(std::iter::repeat_n(0, d.m - base_dim));
        map.push(base_dim);
        kept.reindex(base_dim + 1, &map).expect("variable map fits")
    };
    Ok(TepData {
        chart: d.chart.clone(),
        m: base_dim,
        rank: d.rank,
        a: d.a[..base_dim].iter().map(|a| a.map(restrict)).collect(),
        b: d.b.map(restrict),
        p: d.p.map(restrict),
        zeta: d.zeta.iter().map(restrict).collect(),
        orders: d.orders,
        domain: d
            .domain
            .as_ref()
            .map(|p| Polydisc::new(p.center[..base_dim].to_vec(), p.radii[..base_dim].to_vec()))
            .transpose()?,
        tol: d.tol,
    })
}

fn intertwining(
    di: &TepData,
    dj: &TepData,
    g: &JetMatrix,
    phi: &PolyMap,
    i: &str,
    j: &str,
    out: &mut Vec<IntertwiningResidual>,
) -> Result<()> {
    let nv = di.num_vars();
    let k = di.order();
    let g = g.map(|e| e.extend_vars(1).with_order(k));
    let phi = phi.with_order(k).extend_identity(1);
    let jac: Vec<Vec<Jet>> = phi
        .jacobian()
        .into_iter()
        .map(|row| row.into_iter().map(|e| e.with_order(k)).collect())
        .collect();
    let z = di.z();
    let aj: Vec<JetMatrix> = dj.a.iter().map(|a| a.compose(&phi)).collect::<Result<_>>()?;
    let mut found = Vec::new();
    for (a, ai) in di.a.iter().enumerate() {
        let mut res = deriv(&g, a)?.scale_jet(&z).try_sub(&g.try_mul(ai)?)?;
        for (b, ajb) in aj.iter().enumerate() {
            res = res.try_add(&ajb.scale_jet(&jac[b][a]).try_mul(&g)?)?;
        }
        collect(
            &mut found,
            &format!("connection({})", a + 1),
            &res,
            di.tol,
            di.derivative_region(),
        );
    }
    let res = dj.b.compose(&phi)?.try_mul(&g)?.try_sub(&g.try_mul(&di.b)?)?;
    collect(&mut found, "connection(z)", &res, di.tol, di.box_region());
    let res =
        di.p.try_sub(&g.transpose().try_mul(&dj.p.compose(&phi)?)?.try_mul(&g)?)?;
    collect(&mut found, "pairing", &res, di.tol, di.box_region());
    debug_assert!(nv == phi.source_vars());
    out.extend(found.into_iter().map(|entry| IntertwiningResidual {
        i: i.to_string(),
        j: j.to_string(),
        entry,
    }));
    Ok(())
}

/// Options for [`glue_tep`].
#[derive(Clone, Debug)]
pub struct GlueTepOptions {
    pub params: AtlasParams,
    pub sheaf_floor: Rational,
    /// Extra base points per chart for the pointwise checks (full chart coordinates, fiber included).
    pub points: Vec<(String, Vec<Gaussian>)>,
    pub seed: u64,
}

/// Glues the base atlas and the bundle, then checks every chart, the intertwining
/// relations on each overlap and the pointwise conditions at the chart centers on the
/// zero section plus any supplied points.
pub fn glue_tep(
    charts: &[TepData],
    atlas: &GermAtlas,
    sheaf: &SheafData,
    opts: &GlueTepOptions,
) -> Result<GlobalTepCertificate> {
    let dim = atlas.dim();
    let by_id = |id: &str| -> Result<&TepData> {
        charts
            .iter()
            .find(|c| c.chart.as_deref() == Some(id))
            .ok_or_else(|| Error::Schema(format!("no TEP data for chart {id}")))
    };
    for c in &atlas.charts {
        let d = by_id(&c.id)?;
        if d.m != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: d.m,
            });
        }
        let rank = sheaf.chart(&c.id).map(|s| s.rank);
        if rank != Some(d.rank) {
            return Err(Error::Shape(format!("chart {}: TEP rank and sheaf rank differ", c.id)));
        }
    }
    let outcome = glue(atlas, &opts.params)?;
    let glued_sheaf = glue_sheaf(sheaf, &outcome.atlas, &opts.sheaf_floor)?;

    let mut reports = Vec::new();
    let mut points = Vec::new();
    for c in &atlas.charts {
        let d = by_id(&c.id)?;
        let mut center: Vec<Gaussian> = c.w.center.clone();
        center.extend(std::iter::repeat_n(Gaussian::zero(), atlas.fiber_dim));
        reports.push(tep_check(d, Some(&center), opts.seed)?);
        for (id, y) in opts.points.iter().filter(|(id, _)| id == &c.id) {
            points.push(PointCheck {
                chart: id.clone(),
                point: PointDoc(y.clone()),
                ic: check_ic(d, y)?,
                gc: check_gc(d, y)?,
                miniversal: check_miniversal(d, y, opts.seed)?,
            });
        }
    }

    let mut residuals = Vec::new();
    for p in &glued_sheaf.pairs {
        if p.i == p.j {
            continue;
        }
        let g = glued_sheaf.g(&p.i, &p.j)?.expect("pair listed in the glued sheaf");
        let phi = outcome
            .atlas
            .phi(&p.i, &p.j)?
            .unwrap_or_else(|| PolyMap::identity(dim, atlas.order));
        intertwining(by_id(&p.i)?, by_id(&p.j)?, &g, &phi, &p.i, &p.j, &mut residuals)?;
    }

    let zero_section = atlas
        .charts
        .iter()
        .map(|c| Ok(restrict_to_zero_section(by_id(&c.id)?, atlas.base_dim)?.to_doc()))
        .collect::<Result<Vec<_>>>()?;
    let valid = residuals.is_empty() && reports.iter().all(TepReport::axioms_hold);
    Ok(GlobalTepCertificate {
        intertwining_convention: INTERTWINING_CONVENTION.to_string(),
        atlas: outcome.atlas,
        sheaf: glued_sheaf,
        charts: reports,
        points,
        intertwining: residuals,
        zero_section,
        valid,
    })
}
