mod common;

use common::{hv_inclusion_exclusion, hv_monte_carlo, random_front};
use mobo::pareto::{
    dominates, hypervolume_2d, hypervolume_improvement, non_dominated_filter, reference_point, Objectives,
    ParetoArchive, Staircase,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REF: Objectives = [1.0, 1.0];

#[test]
fn sweep_equals_inclusion_exclusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let m = rng.gen_range(1..=30);
        let front = random_front(m, &mut rng);
        let a = hypervolume_2d(&front, &REF);
        let b = hv_inclusion_exclusion(&front, &REF);
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300), "{a} vs {b}");
    }
}

#[test]
fn sweep_agrees_with_hit_or_miss() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..5 {
        let front = random_front(rng.gen_range(1..=30), &mut rng);
        let (mc, se) = hv_monte_carlo(&front, &REF, 200_000, &mut rng);
        let hv = hypervolume_2d(&front, &REF);
        assert!((hv - mc).abs() <= 3.0 * se + 1e-12, "{hv} vs {mc} +- {se}");
    }
}

#[test]
fn degenerate_fronts() {
    assert_eq!(hypervolume_2d(&[], &REF), 0.0);
    assert_eq!(hypervolume_2d(&[[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]], &REF), 0.0);
    assert_eq!(hypervolume_2d(&[[0.0, 0.0]], &REF), 1.0);
    assert_eq!(hypervolume_2d(&[[0.5, 0.5], [0.5, 0.5]], &REF), 0.25);
}

#[test]
fn reference_point_rule() {
    let r = reference_point(&[[0.0, 10.0], [4.0, 2.0]], 0.1).unwrap();
    assert!((r[0] - 4.4).abs() < 1e-12 && (r[1] - 10.8).abs() < 1e-12);
    assert_eq!(reference_point(&[], 0.1), None);
    // a single point has zero range
    let r = reference_point(&[[2.0, -3.0]], 0.1).unwrap();
    assert!((r[0] - 2.2).abs() < 1e-12 && (r[1] + 2.7).abs() < 1e-12);
}

#[test]
fn archive_rejects_infeasible_and_dominated() {
    let mut a = ParetoArchive::new(REF);
    assert!(a.insert(&[0.1], [0.5, 0.5], -1.0));
    assert!(!a.insert(&[0.2], [0.1, 0.1], 0.5));
    assert!(!a.insert(&[0.3], [0.6, 0.6], 0.0));
    assert!(a.insert(&[0.4], [0.2, 0.2], 0.0));
    assert_eq!(a.len(), 1);
    assert_eq!(a.entries()[0].point, vec![0.4]);
}

fn objective_pair() -> impl Strategy<Value = Objectives> {
    (0.0f64..1.2, 0.0f64..1.2).prop_map(|(a, b)| [a, b])
}

proptest! {
    #[test]
    fn improvement_gradient_matches_forward_differences(
        seed in 0u64..1000, c0 in -0.1f64..1.1, c1 in -0.1f64..1.1
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let front = random_front(rng.gen_range(1..=12), &mut rng);
        let s = Staircase::new(&front, &REF);
        let c = [c0, c1];
        let g = s.improvement_gradient(&c);
        let h = 1e-7;
        let base = s.improvement(&c);
        let d0 = (s.improvement(&[c0 + h, c1]) - base) / h;
        let d1 = (s.improvement(&[c0, c1 + h]) - base) / h;
        prop_assert!((g[0] - d0).abs() < 1e-5, "{} vs {d0}", g[0]);
        prop_assert!((g[1] - d1).abs() < 1e-5, "{} vs {d1}", g[1]);
    }

    #[test]
    fn filter_keeps_exactly_the_undominated(points in prop::collection::vec(objective_pair(), 0..40)) {
        let kept = non_dominated_filter(&points);
        for (i, p) in points.iter().enumerate() {
            let dominated = points.iter().any(|q| dominates(q, p));
            prop_assert_eq!(kept.contains(&i), !dominated);
        }
    }

    #[test]
    fn adding_a_point_never_lowers_hypervolume(
        points in prop::collection::vec(objective_pair(), 0..30),
        extra in objective_pair(),
    ) {
        let before = hypervolume_2d(&points, &REF);
        let mut with = points.clone();
        with.push(extra);
        prop_assert!(hypervolume_2d(&with, &REF) >= before);
    }

    #[test]
    fn staircase_improvement_is_the_hypervolume_difference(
        points in prop::collection::vec(objective_pair(), 0..30),
        c in objective_pair(),
    ) {
        let s = Staircase::new(&points, &REF);
        let direct = hypervolume_improvement(&points, &REF, &c);
        prop_assert!((s.improvement(&c) - direct).abs() <= 1e-12);
        prop_assert!((s.hypervolume() - hypervolume_2d(&points, &REF)).abs() <= 1e-12);
    }

    #[test]
    fn archive_hypervolume_is_monotone(
        entries in prop::collection::vec((objective_pair(), -1.0f64..1.0), 1..40),
    ) {
        let mut a = ParetoArchive::new(REF);
        let mut last = 0.0;
        for (o, g) in entries {
            a.insert(&[], o, g);
            let hv = a.hypervolume();
            prop_assert!(hv >= last);
            last = hv;
            let objs = a.objectives();
            for p in &objs {
                prop_assert!(!objs.iter().any(|q| dominates(q, p)));
            }
        }
    }

    #[test]
    fn hypervolume_is_permutation_invariant(
        mut points in prop::collection::vec(objective_pair(), 0..20),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let a = hypervolume_2d(&points, &REF);
        points.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a, hypervolume_2d(&points, &REF));
    }
}
