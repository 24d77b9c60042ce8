use proptest::prelude::*;
use solgap_core::dual::{dual_act, group_norm_lower, markov_lower_bound, pairing_phase, Character, MarkovParams, MeasureMode};
use solgap_core::linalg::MatQ;
use solgap_core::matgroup::GroupSpec;
use solgap_core::sadic::{int, rat, Place, PrimeSet, Rational};

fn s23() -> PrimeSet {
    PrimeSet::new([2, 3]).unwrap()
}

fn pool() -> Vec<MatQ> {
    vec![
        MatQ::from_i64(&[&[1, 1], &[0, 1]]),
        MatQ::from_i64(&[&[0, -1], &[1, 0]]),
        MatQ::diagonal(&[int(2), rat(1, 3)]),
        MatQ::from_rows(vec![vec![int(1), int(0)], vec![rat(1, 6), int(1)]]),
    ]
}

fn product(word: &[usize]) -> MatQ {
    let p = pool();
    word.iter().fold(MatQ::identity(2), |acc, &i| &acc * &p[i])
}

fn s_rational() -> impl Strategy<Value = Rational> {
    (-50i64..50, 0u32..4, 0u32..3).prop_map(|(n, a, b)| rat(n, 2i64.pow(a) * 3i64.pow(b)))
}

fn character() -> impl Strategy<Value = Character> {
    (s_rational(), s_rational())
        .prop_filter("nonzero", |(a, b)| *a != int(0) || *b != int(0))
        .prop_map(|(a, b)| Character::new(vec![a, b], s23()).unwrap())
}

fn sanov() -> GroupSpec {
    GroupSpec::uniform(PrimeSet::empty(), 2, vec![MatQ::from_i64(&[&[1, 2], &[0, 1]]), MatQ::from_i64(&[&[1, 0], &[2, 1]])]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dual_action_is_a_right_action(g in prop::collection::vec(0usize..4, 0..5),
                                     h in prop::collection::vec(0usize..4, 0..5),
                                     chi in character()) {
        let (g, h) = (product(&g), product(&h));
        let lhs = dual_act(&(&g * &h), &chi).unwrap();
        let rhs = dual_act(&h, &dual_act(&g, &chi).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn pairing_is_invariant(g in prop::collection::vec(0usize..4, 0..6),
                            x in (s_rational(), s_rational()),
                            chi in character()) {
        let g = product(&g);
        let x = vec![x.0, x.1];
        let gx = g.mul_vec(&x);
        let gchi = dual_act(&g, &chi).unwrap();
        for place in [Place::Infinite, Place::Prime(2), Place::Prime(3), Place::Prime(5)] {
            prop_assert_eq!(pairing_phase(&gx, &chi, place), pairing_phase(&x, &gchi, place));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn markov_bounds_are_monotone(a in 1i64..4, b in -3i64..4, radius in 2usize..7, given in any::<bool>()) {
        let chi = Character::new(vec![int(a), int(b)], PrimeSet::empty()).unwrap();
        let mode = if given { MeasureMode::AsGiven } else { MeasureMode::Symmetrized };
        let p = MarkovParams { radius, mode, ..Default::default() };
        let e = markov_lower_bound(&sanov(), &chi, &p).unwrap();
        let values: Vec<f64> = e.lower_bounds.iter().map(|b| b.value).collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let longer = markov_lower_bound(&sanov(), &chi, &MarkovParams { radius: radius + 1, ..p }).unwrap();
        prop_assert!(longer.last().unwrap() >= e.last().unwrap());
        let fewer = markov_lower_bound(&sanov(), &chi, &MarkovParams { iters: 3, ..p }).unwrap();
        prop_assert!(fewer.last().unwrap() <= e.last().unwrap());
    }
}

#[test]
fn return_probabilities_are_supermultiplicative() {
    let specs = [
        sanov(),
        GroupSpec::uniform(PrimeSet::empty(), 2, vec![MatQ::from_i64(&[&[1, 1], &[0, 1]])]).unwrap(),
        GroupSpec::uniform(PrimeSet::empty(), 2, vec![MatQ::from_i64(&[&[0, -1], &[1, 0]]), MatQ::from_i64(&[&[1, 1], &[0, 1]])]).unwrap(),
    ];
    for spec in &specs {
        let p = group_norm_lower(spec, 16, 1_000_000).exact;
        for j in 1..=p.len() {
            for k in 1..=p.len() - j {
                if j + k <= p.len() {
                    assert!(p[j + k - 1] >= &p[j - 1] * &p[k - 1], "j={j} k={k}");
                }
            }
        }
    }
}

#[test]
fn fixed_characters_give_exactly_one() {
    let spec = GroupSpec::uniform(
        PrimeSet::new([2]).unwrap(),
        3,
        vec![MatQ::from_i64(&[&[1, 0, 0], &[1, 1, 0], &[0, 0, 1]]), MatQ::from_i64(&[&[1, 0, 0], &[0, 1, 0], &[1, 0, 1]])],
    )
    .unwrap();
    let chi = Character::new(vec![int(5), int(0), int(0)], PrimeSet::new([2]).unwrap()).unwrap();
    for mode in [MeasureMode::Symmetrized, MeasureMode::AsGiven] {
        let e = markov_lower_bound(&spec, &chi, &MarkovParams { radius: 4, mode, ..Default::default() }).unwrap();
        assert!(e.lower_bounds.iter().all(|b| b.value == 1.0));
    }
}
