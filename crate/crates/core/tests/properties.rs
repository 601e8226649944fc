use nalgebra::{Matrix4, Vector4 as NVector4};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use proptest::prelude::*;

use wrinkled_poisson::expr::{Expr, Monomial, Var};
use wrinkled_poisson::leaves::{flow, leaf_tangent_frame, solve_anchor};
use wrinkled_poisson::models::{model, ModelName};
use wrinkled_poisson::poisson::{
    flaschka_ratiu, gradient, hamiltonian_field, jacobiator, rank_at, CasimirPair,
};
use wrinkled_poisson::Point4;

fn monomial(max_degree: u32, with_s: bool) -> impl Strategy<Value = Monomial> {
    let s_max: u32 = if with_s { 1 } else { 0 };
    (
        0..=max_degree,
        0..=max_degree,
        0..=max_degree,
        0..=max_degree,
        0..=s_max,
    )
        .prop_filter("degree bound", move |(a, b, c, d, _)| {
            a + b + c + d <= max_degree
        })
        .prop_map(|(a, b, c, d, e)| Monomial([a, b, c, d, e]))
}

fn coefficient(bound: i64) -> impl Strategy<Value = BigRational> {
    (-bound..=bound, 1..=6i64).prop_map(|(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
}

fn poly(max_degree: u32, max_terms: usize, with_s: bool) -> impl Strategy<Value = Expr> {
    prop::collection::vec(
        (monomial(max_degree, with_s), coefficient(1000)),
        0..=max_terms,
    )
    .prop_map(Expr::from_terms)
}

fn small_poly(max_degree: u32, max_terms: usize) -> impl Strategy<Value = Expr> {
    prop::collection::vec((monomial(max_degree, false), coefficient(3)), 1..=max_terms)
        .prop_map(Expr::from_terms)
}

fn point(bound: f64) -> impl Strategy<Value = Point4> {
    prop::array::uniform4(-bound..bound).prop_map(|c| Point4::from_coords(c, 0.0))
}

fn var() -> impl Strategy<Value = Var> {
    (0..4usize).prop_map(|i| Var::from_index(i).unwrap())
}

/// `1 + Σ c m²` with positive rational `c`: non-vanishing everywhere.
fn positive_conformal() -> impl Strategy<Value = Expr> {
    prop::collection::vec((monomial(1, false), 1..=4i64), 0..=3).prop_map(|terms| {
        let mut k = Expr::one();
        for (m, c) in terms {
            let sq = Expr::term(m, BigRational::from_integer(1.into())).pow(2);
            k = k + sq.scale(&BigRational::from_integer(c.into()));
        }
        k
    })
}

/// Sum of absolute values of the terms at `p`: a scale for float error.
fn magnitude(e: &Expr, p: &Point4) -> f64 {
    e.terms()
        .map(|(m, c)| Expr::term(*m, c.abs()).evaluate(p).abs())
        .sum()
}

fn numeric_det_component(d1: &[f64; 4], d2: &[f64; 4], i: usize, j: usize) -> f64 {
    let mut m = Matrix4::zeros();
    m[(i, 0)] = 1.0;
    m[(j, 1)] = 1.0;
    for r in 0..4 {
        m[(r, 2)] = d1[r];
        m[(r, 3)] = d2[r];
    }
    m.determinant()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_then_parse_is_identity(e in poly(5, 8, true)) {
        let back: Expr = e.to_string().parse().unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(e.normalize(), e);
    }

    #[test]
    fn leibniz_rule(a in poly(3, 5, true), b in poly(3, 5, true), v in var()) {
        let lhs = (&a * &b).differentiate(v);
        let rhs = &a.differentiate(v) * &b + &a * &b.differentiate(v);
        prop_assert!(lhs.equals(&rhs));
    }

    #[test]
    fn evaluation_is_multiplicative(a in poly(3, 5, true), b in poly(3, 5, true), p in point(2.0), s in -2.0..2.0f64) {
        let p = p.with_s(s);
        let prod = (&a * &b).evaluate(&p);
        let want = a.evaluate(&p) * b.evaluate(&p);
        let scale = (magnitude(&a, &p) * magnitude(&b, &p)).max(f64::MIN_POSITIVE);
        prop_assert!((prod - want).abs() <= 1e-12 * scale, "{prod} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn construction_is_antisymmetric_and_annihilates(c1 in poly(4, 4, false), c2 in poly(4, 4, false)) {
        let cas = CasimirPair::new(c1, c2);
        let b = flaschka_ratiu(&cas, None).unwrap();
        for i in 0..4 {
            prop_assert!(b.component(i, i).is_zero());
            for j in 0..4 {
                prop_assert!((b.component(i, j) + b.component(j, i)).is_zero());
            }
        }
        prop_assert!(hamiltonian_field(&b, &cas.c1).is_zero());
        prop_assert!(hamiltonian_field(&b, &cas.c2).is_zero());
    }

    #[test]
    fn symbolic_components_match_numeric_determinant(
        c1 in poly(4, 4, false), c2 in poly(4, 4, false), p in point(2.0)
    ) {
        let cas = CasimirPair::new(c1, c2);
        let b = flaschka_ratiu(&cas, None).unwrap();
        let d1 = gradient(&cas.c1).evaluate(&p).0;
        let d2 = gradient(&cas.c2).evaluate(&p).0;
        let scale = d1.iter().map(|a| a.abs()).sum::<f64>() * d2.iter().map(|a| a.abs()).sum::<f64>();
        for i in 0..4 {
            for j in 0..4 {
                let want = numeric_det_component(&d1, &d2, i, j);
                let got = b.component(i, j).evaluate(&p);
                prop_assert!((want - got).abs() <= 1e-10 * scale.max(1.0), "({i},{j}) {want} vs {got}");
            }
        }
    }

    #[test]
    fn rank_is_never_four_and_ignores_k(
        c1 in poly(3, 4, false), c2 in poly(3, 4, false), p in point(2.0)
    ) {
        let cas = CasimirPair::new(c1, c2);
        let plain = flaschka_ratiu(&cas, None).unwrap();
        let scaled = flaschka_ratiu(&cas, Some("1 + x^2 + y^2 + z^2 + t^2".parse().unwrap())).unwrap();
        let r = rank_at(&plain, &p);
        prop_assert!(r != 4);
        prop_assert_eq!(r, rank_at(&scaled, &p));
    }

    #[test]
    fn hamiltonian_field_matches_bracket_pairing(
        c1 in poly(3, 3, false), c2 in poly(3, 3, false), h in poly(3, 4, false), p in point(2.0)
    ) {
        let b = flaschka_ratiu(&CasimirPair::new(c1, c2), None).unwrap();
        let x = hamiltonian_field(&b, &h).evaluate(&p);
        let m = b.evaluate(&p);
        let dh = NVector4::from(gradient(&h).evaluate(&p).0);
        let bracket = m * dh;
        let scale = m.abs().max() * dh.abs().sum();
        for i in 0..4 {
            prop_assert!((x.0[i] - bracket[i]).abs() <= 1e-10 * scale.max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conformal_rescaling_stays_poisson(
        c1 in small_poly(2, 3), c2 in small_poly(3, 3), k in positive_conformal()
    ) {
        let b = flaschka_ratiu(&CasimirPair::new(c1, c2), Some(k)).unwrap();
        prop_assert!(jacobiator(&b).iter().all(Expr::is_zero));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn anchor_ambiguity_does_not_change_the_form(
        idx in 0..7usize, p in point(2.0), a in -5.0..5.0f64, c in -5.0..5.0f64
    ) {
        let name = ModelName::ALL[idx];
        let m = model(name, name.uses_s().then_some(0.5)).unwrap();
        let b = m.bivector();
        let q = p.with_s(0.5);
        prop_assume!(rank_at(&b, &q) == 2);
        let f = leaf_tangent_frame(&b, &q).unwrap();
        let alpha = solve_anchor(&b, &q, &f.u).unwrap();
        let d1 = gradient(&m.casimirs.c1).evaluate(&q).0;
        let d2 = gradient(&m.casimirs.c2).evaluate(&q).0;
        let moved = wrinkled_poisson::poisson::Covector4(std::array::from_fn(|i| alpha.0[i] + a * d1[i] + c * d2[i]));
        let base = alpha.pair(&f.v);
        prop_assert!((moved.pair(&f.v) - base).abs() < 1e-9 * base.abs().max(1.0));
    }
}

fn cubic_hamiltonian() -> impl Strategy<Value = Expr> {
    prop::collection::vec((monomial(3, false), -1000..=1000i64), 1..=6).prop_map(|terms| {
        Expr::from_terms(
            terms
                .into_iter()
                .map(|(m, c)| (m, BigRational::new(BigInt::from(c), BigInt::from(1000)))),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_stays_on_its_leaf(
        idx in 0..7usize, h in cubic_hamiltonian(), dir in prop::array::uniform4(-1.0..1.0f64), r in 0.05..1.0f64
    ) {
        let name = ModelName::ALL[idx];
        let m = model(name, name.uses_s().then_some(0.0)).unwrap();
        let norm = dir.iter().map(|a| a * a).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let p0 = Point4::from_coords(dir.map(|a| a * r / norm), 0.0);
        let b = m.bivector();
        prop_assume!(rank_at(&b, &p0) == 2);
        // Cubic fields can escape to infinity before t = 1; only bounded orbits are checked.
        let tr = flow(&b, &h, &p0, 1e-3, 1000);
        prop_assume!(tr.is_ok());
        let tr = tr.unwrap();
        prop_assume!(tr.points.iter().all(|q| q.coords().iter().all(|c| c.abs() <= 2.0)));
        prop_assert!(tr.drift.c1 < 1e-6, "C1 drift {}", tr.drift.c1);
        prop_assert!(tr.drift.c2 < 1e-6, "C2 drift {}", tr.drift.c2);
        prop_assert!(tr.drift.h < 1e-6, "h drift {}", tr.drift.h);
    }
}
