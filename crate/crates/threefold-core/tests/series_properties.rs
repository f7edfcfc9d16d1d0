//! Ring and substitution laws on windowed series, checked on randomly
//! generated small-support inputs kept well inside the window so the
//! identities hold exactly.

use proptest::prelude::*;
use threefold_core::geometry::{build_transition, ThreefoldSpec};
use threefold_core::series::{ratio, Chart, Exponent, MultiSeries, TruncationPolicy, Var};

const POLICY: TruncationPolicy = TruncationPolicy { u_deg_max: 8, z_min: -24, z_max: 24 };

fn small_series(chart: Chart) -> impl Strategy<Value = MultiSeries> {
    let term = (
        -2i32..=2,
        0u32..=1,
        0u32..=1,
        (-3i64..=3).prop_filter("nonzero", |c| *c != 0),
        1i64..=2,
    );
    proptest::collection::vec(term, 0..4).prop_map(move |terms| {
        MultiSeries::from_terms(
            chart,
            POLICY,
            terms
                .into_iter()
                .map(|(z, u1, u2, p, q)| (Exponent::new(z, u1, u2), ratio(p, q))),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn addition_is_associative_and_commutative(
        a in small_series(Chart::U),
        b in small_series(Chart::U),
        c in small_series(Chart::U),
    ) {
        let left = a.add(&b).unwrap().add(&c).unwrap();
        let right = a.add(&b.add(&c).unwrap()).unwrap();
        prop_assert_eq!(&left, &right);
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
    }

    #[test]
    fn multiplication_distributes(
        a in small_series(Chart::U),
        b in small_series(Chart::U),
        c in small_series(Chart::U),
    ) {
        let left = a.mul(&b.add(&c).unwrap()).unwrap();
        let right = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn leibniz_rule(
        a in small_series(Chart::U),
        b in small_series(Chart::U),
    ) {
        for var in Var::ALL {
            let left = a.mul(&b).unwrap().partial(var);
            let right = a.partial(var).mul(&b).unwrap()
                .add(&a.mul(&b.partial(var)).unwrap()).unwrap();
            prop_assert_eq!(left, right, "variable {:?}", var);
        }
    }

    #[test]
    fn holomorphic_split_is_a_partition(a in small_series(Chart::U)) {
        let (hol, principal) = a.holomorphic_split();
        prop_assert!(hol.is_holomorphic());
        prop_assert!(principal.terms().all(|(e, _)| e.z < 0));
        prop_assert_eq!(hol.add(&principal).unwrap(), a);
    }

    #[test]
    fn substitution_is_a_ring_homomorphism(
        a in small_series(Chart::U),
        b in small_series(Chart::U),
    ) {
        // inverse rules of the y = 1 deformation of W_2
        let spec = ThreefoldSpec::w2_y(1, POLICY);
        let t = build_transition(&spec, POLICY);
        let rules = t.inverse().unwrap();
        let sum = a.add(&b).unwrap().substitute(rules).unwrap();
        let sum2 = a.substitute(rules).unwrap().add(&b.substitute(rules).unwrap()).unwrap();
        prop_assert_eq!(sum, sum2);
        let prod = a.mul(&b).unwrap().substitute(rules).unwrap();
        let prod2 = a.substitute(rules).unwrap().mul(&b.substitute(rules).unwrap()).unwrap();
        prop_assert_eq!(prod, prod2);
    }

    #[test]
    fn transition_round_trip_is_the_identity(
        a in small_series(Chart::U),
    ) {
        for spec in [ThreefoldSpec::w(2), ThreefoldSpec::w(3), ThreefoldSpec::w2_y(2, POLICY)] {
            let t = build_transition(&spec, POLICY);
            let there = a.substitute(t.inverse().unwrap()).unwrap();
            let back = there.substitute(&t.v_to_u).unwrap();
            // round trips stay exact while nothing hits the window boundary
            if !back.boundary_touched() && !there.boundary_touched() {
                prop_assert_eq!(&back, &a);
            }
        }
    }
}
