mod common;

use common::oracle;
use common::{c, q};
use germglue::coeff::{Coeff, Gaussian};
use germglue::error::Error;
use germglue::jet::{Jet, JetDoc};
use germglue::polymap::{compose, first_difference, hom_to_map, map_compose, map_inverse, map_to_hom, PolyMap};
use proptest::prelude::*;

fn coeff_strategy() -> impl Strategy<Value = Coeff> {
    (-6i64..=6, 1i64..=4, -3i64..=3).prop_map(|(n, d, im)| Coeff::from_gaussian(Gaussian::new(q(n, d), q(im, d))))
}

fn jet_strategy(num_vars: usize, order: u32, max_terms: usize) -> impl Strategy<Value = Jet> {
    prop::collection::vec(
        (prop::collection::vec(0..=order, num_vars), coeff_strategy()),
        0..=max_terms,
    )
    .prop_map(move |terms| Jet::from_terms(num_vars, order, terms).unwrap())
}

/// Jets without constant term, suitable as the inner components of a composition.
fn centered_jet(num_vars: usize, order: u32, max_terms: usize) -> impl Strategy<Value = Jet> {
    jet_strategy(num_vars, order, max_terms).prop_map(|j| j.retain_terms(|m| m.degree() > 0))
}

/// Maps `x + N(x)` with `N` of order at least two, hence formally invertible.
fn near_identity(num_vars: usize, order: u32) -> impl Strategy<Value = PolyMap> {
    prop::collection::vec(jet_strategy(num_vars, order, 4), num_vars).prop_map(move |ns| {
        let comps = ns
            .iter()
            .enumerate()
            .map(|(i, n)| &Jet::var(num_vars, order, i) + &n.retain_terms(|m| m.degree() >= 2))
            .collect();
        PolyMap::new(num_vars, comps).unwrap()
    })
}

fn point_strategy(num_vars: usize) -> impl Strategy<Value = Vec<Gaussian>> {
    prop::collection::vec(
        (-4i64..=4, -4i64..=4).prop_map(|(a, b)| Gaussian::new(q(a, 5), q(b, 7))),
        num_vars,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_matches_schoolbook(a in jet_strategy(3, 4, 8), b in jet_strategy(3, 4, 8)) {
        let expected = oracle::mul(&oracle::from_jet(&a), &oracle::from_jet(&b), 4);
        prop_assert_eq!(oracle::from_jet(&(&a * &b)), expected);
    }

    #[test]
    fn ring_laws(a in jet_strategy(2, 5, 6), b in jet_strategy(2, 5, 6), d in jet_strategy(2, 5, 6)) {
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &d, &a * &(&b * &d));
        prop_assert_eq!(&a * &(&b + &d), &(&a * &b) + &(&a * &d));
        prop_assert!((&a - &a).is_zero());
    }

    #[test]
    fn leibniz_rule_below_top_degree(a in jet_strategy(2, 5, 6), b in jet_strategy(2, 5, 6), var in 0usize..2) {
        let lhs = (&a * &b).partial(var).unwrap();
        let k = lhs.order();
        let rhs = &(&a.partial(var).unwrap() * &b.with_order(k)) + &(&a.with_order(k) * &b.partial(var).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn composition_matches_substitution(
        f in jet_strategy(2, 4, 6),
        g0 in centered_jet(3, 4, 5),
        g1 in centered_jet(3, 4, 5),
    ) {
        let g = PolyMap::new(3, vec![g0.clone(), g1.clone()]).unwrap();
        let expected = oracle::substitute(&oracle::from_jet(&f), &[oracle::from_jet(&g0), oracle::from_jet(&g1)], 3, 4);
        prop_assert_eq!(oracle::from_jet(&compose(&f, &g).unwrap()), expected);
    }

    #[test]
    fn evaluation_is_multiplicative_below_the_order(
        a in jet_strategy(2, 3, 5),
        b in jet_strategy(2, 3, 5),
        p in point_strategy(2),
    ) {
        let a6 = a.with_order(6);
        let b6 = b.with_order(6);
        prop_assert_eq!((&a6 * &b6).eval_exact(&p), a.eval_exact(&p) * b.eval_exact(&p));
        prop_assert_eq!(a.eval_exact(&p), oracle::eval(&oracle::from_jet(&a), &p));
    }

    #[test]
    fn inverse_is_two_sided(f in near_identity(2, 5)) {
        let g = map_inverse(&f, 0.0).unwrap();
        let id = PolyMap::identity(2, 5);
        prop_assert_eq!(f.then(&g).unwrap(), id.clone());
        prop_assert_eq!(g.then(&f).unwrap(), id);
    }

    #[test]
    fn composition_is_associative(f in near_identity(2, 4), g in near_identity(2, 4), h in near_identity(2, 4)) {
        let left = f.then(&g).unwrap().then(&h).unwrap();
        let right = f.then(&g.then(&h).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn shift_recenters_exactly(a in jet_strategy(2, 4, 6), p in point_strategy(2), x in point_strategy(2)) {
        // a(p + x) as a jet in x, truncation-free because `a` has degree at most its order.
        let shifted = a.shift(&p).unwrap();
        let px: Vec<Gaussian> = p.iter().zip(&x).map(|(u, v)| u + v).collect();
        prop_assert_eq!(shifted.eval_exact(&x), a.eval_exact(&px));
    }

    #[test]
    fn documents_round_trip(a in jet_strategy(3, 4, 8)) {
        let text = serde_json::to_string(&a.to_doc()).unwrap();
        let doc: JetDoc = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(Jet::from_doc(&doc, 3, 4).unwrap(), a);
    }

    #[test]
    fn float_mode_tracks_exact_mode(a in jet_strategy(2, 4, 6), b in jet_strategy(2, 4, 6)) {
        let exact = &a * &b;
        let float = &a.to_float() * &b.to_float();
        prop_assert!((&float - &exact.to_float()).is_negligible(1e-9));
    }
}

#[test]
fn single_variable_inverse_has_catalan_coefficients() {
    let f = PolyMap::new(
        1,
        vec![Jet::from_terms(1, 8, [(vec![1], c(1, 1)), (vec![2], c(1, 1))]).unwrap()],
    )
    .unwrap();
    let g = map_inverse(&f, 0.0).unwrap();
    let got: Vec<Coeff> = (1..=8).map(|k| g.component(0).coeff(&[k])).collect();
    let want: Vec<Coeff> = [1, -1, 2, -5, 14, -42, 132, -429]
        .iter()
        .map(|&v| Coeff::from_i64(v))
        .collect();
    assert_eq!(got, want);
}

#[test]
fn truncation_drops_high_degree_products() {
    let x = Jet::var(1, 3, 0);
    assert!((&(&x * &x) * &(&x * &x)).is_zero());
    assert_eq!(x.pow(3).coeff(&[3]), Coeff::one());
    assert_eq!(x.partial(0).unwrap().order(), 2);
}

#[test]
fn mismatched_jets_report_shape_errors() {
    let a = Jet::var(2, 3, 0);
    let b = Jet::var(3, 3, 0);
    assert!(matches!(a.try_mul(&b), Err(Error::Shape(_))));
    assert!(matches!(Jet::monomial(2, 3, &[1], Coeff::one()), Err(Error::Shape(_))));
}

#[test]
fn composition_requires_origin_fixing_inner_map() {
    let f = Jet::var(1, 3, 0);
    let g = PolyMap::new(1, vec![&Jet::var(1, 3, 0) + &Jet::one(1, 3)]).unwrap();
    assert!(matches!(compose(&f, &g), Err(Error::CompositionDomain(_))));
}

#[test]
fn singular_linear_part_is_not_invertible() {
    let f = PolyMap::new(2, vec![Jet::var(2, 3, 0), Jet::var(2, 3, 0).pow(2)]).unwrap();
    assert!(matches!(map_inverse(&f, 0.0), Err(Error::NotInvertible)));
}

#[test]
fn map_compose_applies_the_inner_map_first() {
    let shift = PolyMap::new(
        2,
        vec![&Jet::var(2, 4, 0) + &Jet::var(2, 4, 1).pow(2), Jet::var(2, 4, 1)],
    )
    .unwrap();
    let square = PolyMap::new(
        2,
        vec![Jet::var(2, 4, 0), &Jet::var(2, 4, 1) + &Jet::var(2, 4, 0).pow(2)],
    )
    .unwrap();
    let ab = map_compose(&shift, &square).unwrap();
    assert_eq!(ab, shift.then(&square).unwrap());
    // second component: y + (x + y^2)^2 = y + x^2 + 2 x y^2 + y^4
    let expected = Jet::from_terms(
        2,
        4,
        [
            (vec![0, 1], c(1, 1)),
            (vec![2, 0], c(1, 1)),
            (vec![1, 2], c(2, 1)),
            (vec![0, 4], c(1, 1)),
        ],
    )
    .unwrap();
    assert_eq!(ab.component(1), &expected);
}

#[test]
fn first_difference_locates_the_lowest_disagreement() {
    let a = PolyMap::identity(2, 3);
    let b = PolyMap::new(
        2,
        vec![
            Jet::var(2, 3, 0),
            &Jet::var(2, 3, 1) + &Jet::var(2, 3, 0).pow(2).scale(&c(3, 1)),
        ],
    )
    .unwrap();
    let (comp, exps, v) = first_difference(&a, &b, 0.0).unwrap();
    assert_eq!((comp, exps), (1, vec![2, 0]));
    assert_eq!(v, c(-3, 1));
    assert!(first_difference(&a, &a, 0.0).is_none());
}

#[test]
fn homomorphisms_and_maps_correspond() {
    let x = Jet::var(2, 4, 0);
    let y = Jet::var(2, 4, 1);
    let moves_section = PolyMap::new(2, vec![x.clone(), &y + &x.pow(2)]).unwrap();
    assert!(matches!(map_to_hom(&moves_section, 1), Err(Error::InvalidHom(_))));
    let f = PolyMap::new(2, vec![&x + &y.pow(2), &y + &(&x * &y)]).unwrap();
    let h = map_to_hom(&f, 1).unwrap();
    assert_eq!(hom_to_map(&h).unwrap(), f);
    let poly = &Jet::var(2, 4, 1) * &Jet::var(2, 4, 1);
    assert_eq!(h.apply(&poly).unwrap(), compose(&poly, &f).unwrap());
}
