use proptest::prelude::*;
use solgap_core::heisenberg::{corollary3_bound, heisenberg_mul, FiniteHeisenbergElement};

fn element(n: usize) -> impl Strategy<Value = FiniteHeisenbergElement> {
    (prop::collection::vec(-20i64..20, n), prop::collection::vec(-20i64..20, n), -20i64..20)
        .prop_map(|(x, y, t)| FiniteHeisenbergElement::new(7, &x, &y, t))
}

proptest! {
    #[test]
    fn product_is_associative(a in element(2), b in element(2), c in element(2)) {
        let left = heisenberg_mul(&heisenberg_mul(&a, &b).unwrap(), &c).unwrap();
        let right = heisenberg_mul(&a, &heisenberg_mul(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn commutator_is_central(a in element(1), b in element(1)) {
        let ab = heisenberg_mul(&a, &b).unwrap();
        let ba = heisenberg_mul(&b, &a).unwrap();
        prop_assert_eq!(&ab.x, &ba.x);
        prop_assert_eq!(&ab.y, &ba.y);
    }

    #[test]
    fn combined_bound_is_monotone(l in 0.0f64..=1.0, dl in 0.0f64..=1.0, k in 0.0f64..=1.0, dk in 0.0f64..=1.0, n in 1usize..5) {
        let base = corollary3_bound(l, k, n).unwrap();
        let more_l = corollary3_bound((l + dl).min(1.0), k, n).unwrap();
        let more_k = corollary3_bound(l, (k + dk).min(1.0), n).unwrap();
        prop_assert!(base.combined <= more_l.combined);
        prop_assert!(base.combined <= more_k.combined);
        prop_assert!(base.combined <= corollary3_bound(l, k, n + 1).unwrap().combined);
        prop_assert!(base.combined >= k);
    }
}
