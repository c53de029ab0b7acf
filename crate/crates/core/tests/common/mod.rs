//! Fixture builders shared by the integration tests. Transition maps are written
//! out by hand here rather than produced by the library's own inversion.
#![allow(dead_code)]

pub mod oracle;

use germglue::atlas::{ChartDoc, GermAtlas, GermAtlasInput, TransitionDoc};
use germglue::coeff::{rat, ratio, Coeff, Gaussian, Rational};
use germglue::geometry::{PointDoc, Polydisc, TubeDomain};
use germglue::jet::Jet;
use germglue::matrix::{JetMatrix, MatrixDoc};
use germglue::polymap::PolyMap;
use germglue::sheaf::{SheafChartDoc, SheafInput, SheafMode, SheafPairDoc, SheafTripleDoc};
use germglue::tep::{TepDoc, TepOrders};

pub fn q(n: i64, d: i64) -> Rational {
    ratio(n, d)
}

pub fn g(re: Rational, im: Rational) -> Gaussian {
    Gaussian::new(re, im)
}

pub fn real(re: Rational) -> Gaussian {
    Gaussian::new(re, rat(0))
}

pub fn disc(c: Gaussian, r: Rational) -> Polydisc {
    Polydisc::new(vec![c], vec![r]).unwrap()
}

pub fn c(n: i64, d: i64) -> Coeff {
    Coeff::from_ratio(n, d)
}

/// Jet in `(t, z)` from `(i, j, coeff)` triples meaning `coeff * t^i z^j`.
pub fn tz(order: u32, terms: &[(u32, u32, Coeff)]) -> Jet {
    Jet::from_terms(2, order, terms.iter().map(|(i, j, c)| (vec![*i, *j], c.clone()))).unwrap()
}

pub fn map2(base: Jet, fiber: Jet) -> PolyMap {
    PolyMap::new(2, vec![base, fiber]).unwrap()
}

/// Base points along the real segment `[a, b]`.
pub fn segment(a: Rational, b: Rational, steps: i64) -> Vec<PointDoc> {
    (0..=steps)
        .map(|k| PointDoc(vec![real(&a + (&b - &a) * ratio(k, steps))]))
        .collect()
}

pub fn chart(id: &str, center: Gaussian, r: Rational) -> ChartDoc {
    ChartDoc {
        id: id.into(),
        w: disc(center, r),
        z: None,
    }
}

pub fn transition(i: &str, j: &str, phi: &PolyMap) -> TransitionDoc {
    TransitionDoc {
        i: i.into(),
        j: j.into(),
        phi: phi.to_doc(),
        n: None,
    }
}

/// `phi_12(t, z) = (t, z + t z^2)` on unit discs centred at 0 and 1; `phi_21` left to inversion.
pub fn shear_pair(order: u32) -> GermAtlasInput {
    let phi = map2(
        tz(order, &[(1, 0, c(1, 1))]),
        tz(order, &[(0, 1, c(1, 1)), (1, 2, c(1, 1))]),
    );
    GermAtlasInput {
        base_dim: 1,
        fiber_dim: 1,
        order,
        charts: vec![chart("1", real(rat(0)), rat(1)), chart("2", real(rat(1)), rat(1))],
        transitions: vec![transition("1", "2", &phi)],
        samples: segment(rat(0), rat(1), 20),
    }
}

/// The shear pair with both fibers bounded by `Z = 1`, which forces a nontrivial radius search.
pub fn bounded_shear_pair(order: u32) -> GermAtlasInput {
    let mut input = shear_pair(order);
    for c in &mut input.charts {
        c.z = Some(rat(1));
    }
    input
}

/// Series inverse of `z + t z^2` in `z`, i.e. `w - t w^2 + 2 t^2 w^3 - 5 t^3 w^4 + ...`
/// (signed Catalan numbers), truncated by total degree.
pub fn shear_inverse(order: u32) -> PolyMap {
    let catalan = [1i64, 1, 2, 5, 14, 42, 132, 429];
    let mut terms = Vec::new();
    for (k, &cat) in catalan.iter().enumerate() {
        let k = k as u32;
        let sign = if k.is_multiple_of(2) { 1 } else { -1 };
        terms.push((k, k + 1, c(sign * cat, 1)));
    }
    map2(tz(order, &[(1, 0, c(1, 1))]), tz(order, &terms))
}

/// Three charts with identity transitions.
pub fn identity_triple(order: u32) -> GermAtlasInput {
    let id = PolyMap::identity(2, order);
    GermAtlasInput {
        base_dim: 1,
        fiber_dim: 1,
        order,
        charts: vec![
            chart("a", real(rat(0)), rat(1)),
            chart("b", real(rat(1)), rat(1)),
            chart("c", g(q(1, 2), q(1, 2)), rat(1)),
        ],
        transitions: vec![
            transition("a", "b", &id),
            transition("b", "a", &id),
            transition("a", "c", &id),
            transition("c", "a", &id),
            transition("b", "c", &id),
            transition("c", "b", &id),
        ],
        samples: segment(rat(0), rat(1), 10),
    }
}

/// Chart map `h(t, z) = (t + a z^2 + c z^3, lambda z)` and its exact polynomial inverse.
pub struct Straightening {
    pub a: Rational,
    pub c: Rational,
    pub lambda: Rational,
}

impl Straightening {
    pub fn forward(&self, order: u32) -> PolyMap {
        let co = |r: &Rational| Coeff::from_rational(r.clone());
        map2(
            tz(order, &[(1, 0, c(1, 1)), (0, 2, co(&self.a)), (0, 3, co(&self.c))]),
            tz(order, &[(0, 1, co(&self.lambda))]),
        )
    }

    /// `(s, w) -> (s - a (w/lambda)^2 - c (w/lambda)^3, w/lambda)`.
    pub fn backward(&self, order: u32) -> PolyMap {
        let l = &self.lambda;
        let co = |r: Rational| Coeff::from_rational(r);
        map2(
            tz(
                order,
                &[
                    (1, 0, c(1, 1)),
                    (0, 2, co(-(&self.a) / (l * l))),
                    (0, 3, co(-(&self.c) / (l * l * l))),
                ],
            ),
            tz(order, &[(0, 1, co(rat(1) / l))]),
        )
    }
}

pub fn straightenings() -> Vec<Straightening> {
    vec![
        Straightening {
            a: q(1, 3),
            c: q(0, 1),
            lambda: rat(1),
        },
        Straightening {
            a: q(-1, 2),
            c: q(1, 4),
            lambda: rat(2),
        },
        Straightening {
            a: q(1, 5),
            c: q(-1, 3),
            lambda: q(1, 2),
        },
    ]
}

/// Three charts whose transitions `h_j ∘ h_i^{-1}` satisfy the cocycle identity exactly.
pub fn cocycle_triple(order: u32) -> GermAtlasInput {
    let hs = straightenings();
    let ids = ["1", "2", "3"];
    let mut transitions = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                let phi = hs[i].backward(order).then(&hs[j].forward(order)).unwrap();
                transitions.push(transition(ids[i], ids[j], &phi));
            }
        }
    }
    GermAtlasInput {
        base_dim: 1,
        fiber_dim: 1,
        order,
        charts: vec![
            chart("1", real(rat(0)), rat(1)),
            chart("2", real(q(1, 2)), rat(1)),
            chart("3", g(q(1, 4), q(1, 2)), rat(1)),
        ],
        transitions,
        samples: segment(rat(0), q(1, 2), 10),
    }
}

/// The cocycle triple with `z^2` added to the fiber component of `phi_13`.
pub fn perturbed_triple(order: u32) -> GermAtlasInput {
    let mut input = cocycle_triple(order);
    let t = input.transitions.iter_mut().find(|t| t.i == "1" && t.j == "3").unwrap();
    let phi = PolyMap::from_doc(&t.phi, 2, order).unwrap();
    let fiber = phi.component(1) + &tz(order, &[(0, 2, c(1, 1))]);
    t.phi = map2(phi.component(0).clone(), fiber).to_doc();
    input
}

pub fn parse(input: &GermAtlasInput) -> GermAtlas {
    GermAtlas::from_input(input, None, None).unwrap()
}

pub fn tube(chart: &str, base: Polydisc, fiber: Rational) -> TubeDomain {
    TubeDomain::new(chart, base, fiber).unwrap()
}

/// Two or one charts with identity transitions, on unit discs centred at `0` and `1`.
pub fn identity_charts(order: u32, count: usize) -> GermAtlasInput {
    let id = PolyMap::identity(2, order);
    let mut charts = vec![chart("1", real(rat(0)), rat(1))];
    let mut transitions = Vec::new();
    if count > 1 {
        charts.push(chart("2", real(rat(1)), rat(1)));
        transitions = vec![transition("1", "2", &id), transition("2", "1", &id)];
    }
    GermAtlasInput {
        base_dim: 1,
        fiber_dim: 1,
        order,
        charts,
        transitions,
        samples: segment(rat(0), rat(count as i64 - 1), 10),
    }
}

pub fn matrix(rows: Vec<Vec<Jet>>) -> MatrixDoc {
    JetMatrix::from_rows(rows).unwrap().to_doc()
}

/// Constant matrix over jets in `(t, z)`.
pub fn constant2(order: u32, entries: &[&[i64]]) -> Vec<Vec<Jet>> {
    entries
        .iter()
        .map(|row| row.iter().map(|&v| tz(order, &[(0, 0, c(v, 1))])).collect())
        .collect()
}

/// `[[1, s t z], [0, 1]]`.
pub fn unipotent(order: u32, s: Rational) -> Vec<Vec<Jet>> {
    vec![
        vec![
            tz(order, &[(0, 0, c(1, 1))]),
            tz(order, &[(1, 1, Coeff::from_rational(s))]),
        ],
        vec![tz(order, &[]), tz(order, &[(0, 0, c(1, 1))])],
    ]
}

pub fn base_identity(order: u32) -> MatrixDoc {
    let one = Jet::one(1, order);
    let zero = Jet::zero(1, order);
    matrix(vec![vec![one.clone(), zero.clone()], vec![zero, one]])
}

pub fn sheaf_domain(chart: &str, radius: i64) -> TubeDomain {
    tube(chart, disc(g(q(1, 2), q(1, 4)), rat(radius)), rat(1))
}

/// Rank-2 sheaf with `g_ij = [[1, (s_j - s_i) t z], [0, 1]]` for the given chart weights `s_i`;
/// this family satisfies the cocycle identity exactly.
pub fn unipotent_sheaf(order: u32, weights: &[(&str, Rational)]) -> SheafInput {
    let mut pairs = Vec::new();
    for (i, si) in weights {
        for (j, sj) in weights {
            pairs.push(SheafPairDoc {
                i: i.to_string(),
                j: j.to_string(),
                domain: sheaf_domain(i, 3),
                g: matrix(unipotent(order, sj - si)),
                chi: None,
                base: Some(base_identity(order)),
            });
        }
    }
    let mut triples = Vec::new();
    if weights.len() == 3 {
        triples.push(SheafTripleDoc {
            i: weights[0].0.into(),
            j: weights[1].0.into(),
            k: weights[2].0.into(),
            domain: sheaf_domain(weights[0].0, 2),
        });
    }
    SheafInput {
        base_dim: 1,
        fiber_dim: 1,
        order,
        mode: SheafMode::Free,
        charts: weights
            .iter()
            .map(|(id, _)| SheafChartDoc {
                id: id.to_string(),
                rank: 2,
                relations: None,
                xi: None,
                domain: None,
            })
            .collect(),
        pairs,
        triples,
    }
}

/// Jet in `(t, w, z)` from `(i, j, k, coeff)` meaning `coeff * t^i w^j z^k`.
pub fn twz(order: u32, terms: &[(u32, u32, u32, Coeff)]) -> Jet {
    Jet::from_terms(3, order, terms.iter().map(|(i, j, k, c)| (vec![*i, *j, *k], c.clone()))).unwrap()
}

pub fn swap2(order: u32) -> Vec<Vec<Jet>> {
    constant2(order, &[&[0, 1], &[1, 0]])
}

/// One base direction, rank 2: `A = [[0,1],[1,0]]`, `B = -t A + cz z Id`, `P = A`, `zeta = e_1`.
pub fn swap_tep(orders: TepOrders, cz: i64) -> TepDoc {
    let k = orders.t + orders.z;
    let b = vec![
        vec![tz(k, &[(0, 1, c(cz, 1))]), tz(k, &[(1, 0, c(-1, 1))])],
        vec![tz(k, &[(1, 0, c(-1, 1))]), tz(k, &[(0, 1, c(cz, 1))])],
    ];
    TepDoc {
        chart: None,
        m: 1,
        rank: 2,
        a: vec![matrix(swap2(k))],
        b: matrix(b),
        p: matrix(swap2(k)),
        zeta: vec![tz(k, &[(0, 0, c(1, 1))]).to_doc(), tz(k, &[]).to_doc()],
        orders,
        domain: None,
    }
}

/// Two directions `(t, w)`, rank 2: `A_1 = Id`, `A_2 = [[0,1],[1,0]]`, `B = -t A_1 - w A_2`,
/// `P = A_2`, `zeta = e_1`. Flat, pairing-compatible and miniversal.
pub fn frobenius_tep(chart: &str, orders: TepOrders) -> TepDoc {
    let k = orders.t + orders.z;
    let cst = |v: i64| twz(k, &[(0, 0, 0, c(v, 1))]);
    let id = vec![vec![cst(1), cst(0)], vec![cst(0), cst(1)]];
    let sw = vec![vec![cst(0), cst(1)], vec![cst(1), cst(0)]];
    let b = vec![
        vec![twz(k, &[(1, 0, 0, c(-1, 1))]), twz(k, &[(0, 1, 0, c(-1, 1))])],
        vec![twz(k, &[(0, 1, 0, c(-1, 1))]), twz(k, &[(1, 0, 0, c(-1, 1))])],
    ];
    TepDoc {
        chart: Some(chart.into()),
        m: 2,
        rank: 2,
        a: vec![matrix(id), matrix(sw.clone())],
        b: matrix(b),
        p: matrix(sw),
        zeta: vec![cst(1).to_doc(), cst(0).to_doc()],
        orders,
        domain: None,
    }
}
