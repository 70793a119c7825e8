use proptest::prelude::*;
use ragtune_core::pareto::{
    dominates, hypervolume_exact, hypervolume_improvement, hypervolume_mc, pareto_set, ObjectiveVector, ParetoFront,
    ReferencePoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// O(n²) oracle: indices of points no other point dominates, first copy of
/// each duplicate only.
fn brute_force_front(points: &[Vec<f64>]) -> Vec<usize> {
    let dom = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y);
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dom(q, &points[i])) && !points[..i].iter().any(|q| q == &points[i]))
        .collect()
}

/// Inclusion–exclusion over all subsets: the union of boxes [r, p].
fn inclusion_exclusion(points: &[Vec<f64>], r: &[f64]) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let mut corner: Vec<f64> = vec![f64::INFINITY; r.len()];
        for (i, p) in points.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for (c, &x) in corner.iter_mut().zip(p) {
                    *c = c.min(x);
                }
            }
        }
        let vol: f64 = corner.iter().zip(r).map(|(c, lo)| (c - lo).max(0.0)).product();
        if mask.count_ones() % 2 == 1 {
            total += vol;
        } else {
            total -= vol;
        }
    }
    total
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, k: usize, grid: Option<f64>) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..k)
                .map(|_| {
                    let v: f64 = rng.random::<f64>();
                    grid.map_or(v, |g| (v * g).round() / g)
                })
                .collect()
        })
        .collect()
}

fn front_of(points: &[Vec<f64>], r: &[f64]) -> ParetoFront<usize> {
    let history: Vec<_> = points.iter().cloned().enumerate().map(|(i, p)| (i, ObjectiveVector(p))).collect();
    pareto_set(&history, ReferencePoint(r.to_vec())).unwrap()
}

#[test]
fn pareto_set_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..60 {
        let n = rng.random_range(1..=300);
        let k = rng.random_range(1..=4);
        // coarse grids force ties and exact duplicates
        let grid = if trial % 2 == 0 { Some(4.0) } else { None };
        let pts = random_points(&mut rng, n, k, grid);
        let front = front_of(&pts, &vec![0.0; k]);
        let got: Vec<usize> = front.members().iter().map(|(i, _)| *i).collect();
        assert_eq!(got, brute_force_front(&pts), "trial {trial}");
    }
}

#[test]
fn exact_hypervolume_matches_inclusion_exclusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let k = rng.random_range(1..=4);
        let n = rng.random_range(0..=9);
        let r: Vec<f64> = (0..k).map(|_| rng.random_range(-0.3..0.3)).collect();
        let pts = random_points(&mut rng, n, k, None);
        let hv = hypervolume_exact(&front_of(&pts, &r)).unwrap();
        let oracle = inclusion_exclusion(&pts, &r);
        assert!((hv - oracle).abs() <= 1e-12 * oracle.max(1.0), "{hv} vs {oracle}");
    }
}

#[test]
fn exact_hypervolume_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let k = rng.random_range(2..=4);
        let n = rng.random_range(1..=20);
        let pts = random_points(&mut rng, n, k, None);
        let front = front_of(&pts, &vec![0.0; k]);
        let hv = hypervolume_exact(&front).unwrap();
        let (est, se) = hypervolume_mc(&front, 200_000, &mut rng).unwrap();
        assert!((est - hv).abs() <= 3.0 * se, "{est} ± {se} vs {hv}");
    }
}

#[test]
fn single_point_mc_converges() {
    let front = front_of(&[vec![-100.0, -10.0, 90.0, 60.0]], &[-2000.0, -20.0, 50.0, 50.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (est, se) = hypervolume_mc(&front, 1_000_000, &mut rng).unwrap();
    // the sampling box is exactly the dominated box
    assert_eq!(est, 7_600_000.0);
    assert_eq!(se, 0.0);
    let front = front_of(&[vec![1.0, 3.0], vec![3.0, 1.0]], &[0.0, 0.0]);
    let (est, se) = hypervolume_mc(&front, 1_000_000, &mut rng).unwrap();
    assert!((est - 5.0).abs() <= 3.0 * se && se > 0.0);
}

#[test]
fn improvement_matches_hypervolume_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let pts = random_points(&mut rng, 3, 4, None);
        let r = vec![0.1; 4];
        let front = front_of(&pts, &r);
        let cand: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let mut with = pts.clone();
        with.push(cand.clone());
        let expected = hypervolume_exact(&front_of(&with, &r)).unwrap() - hypervolume_exact(&front).unwrap();
        let got = hypervolume_improvement(&ObjectiveVector(cand), &front).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!(got >= 0.0);
    }
}

fn vec_strategy(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, k)
}

fn history_strategy() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (1usize..=4).prop_flat_map(|k| (Just(k), prop::collection::vec(vec_strategy(k), 0..25)))
}

proptest! {
    #[test]
    fn dominance_is_a_strict_partial_order(a in vec_strategy(3), b in vec_strategy(3), c in vec_strategy(3)) {
        let (a, b, c) = (ObjectiveVector(a), ObjectiveVector(b), ObjectiveVector(c));
        prop_assert!(!dominates(&a, &a).unwrap());
        prop_assert!(!(dominates(&a, &b).unwrap() && dominates(&b, &a).unwrap()));
        if dominates(&a, &b).unwrap() && dominates(&b, &c).unwrap() {
            prop_assert!(dominates(&a, &c).unwrap());
        }
    }

    #[test]
    fn front_members_are_mutually_non_dominated((k, pts) in history_strategy()) {
        let front = front_of(&pts, &vec![-5.0; k]);
        for (_, a) in front.members() {
            for p in &pts {
                prop_assert!(!dominates(&ObjectiveVector(p.clone()), a).unwrap());
            }
        }
        // every excluded point is dominated by or equal to a member
        for (i, p) in pts.iter().enumerate() {
            if front.members().iter().all(|(j, _)| *j != i) {
                let p = ObjectiveVector(p.clone());
                prop_assert!(front.members().iter().any(|(_, m)| *m == p || dominates(m, &p).unwrap()));
            }
        }
    }

    #[test]
    fn hypervolume_is_monotone((k, pts) in history_strategy(), extra in vec_strategy(4)) {
        let r = vec![-5.0; k];
        let base = hypervolume_exact(&front_of(&pts, &r)).unwrap();
        let mut more = pts.clone();
        more.push(extra[..k].to_vec());
        let grown = hypervolume_exact(&front_of(&more, &r)).unwrap();
        prop_assert!(grown >= base - 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn dominated_point_leaves_hypervolume_unchanged((k, pts) in history_strategy(), shrink in 0.0f64..1.0) {
        prop_assume!(!pts.is_empty());
        let r = vec![-5.0; k];
        let base = hypervolume_exact(&front_of(&pts, &r)).unwrap();
        let mut more = pts.clone();
        more.push(pts[0].iter().map(|x| x - shrink).collect());
        prop_assert_eq!(hypervolume_exact(&front_of(&more, &r)).unwrap(), base);
    }

    #[test]
    fn hypervolume_is_translation_invariant((k, pts) in history_strategy(), shift in vec_strategy(4)) {
        let r = vec![-5.0; k];
        let base = hypervolume_exact(&front_of(&pts, &r)).unwrap();
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().zip(&shift).map(|(x, s)| x + s).collect()).collect();
        let r_moved: Vec<f64> = r.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let translated = hypervolume_exact(&front_of(&moved, &r_moved)).unwrap();
        prop_assert!((translated - base).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn points_not_above_reference_contribute_nothing((k, pts) in history_strategy(), axis in 0usize..4) {
        let r = vec![0.0; k];
        let axis = axis % k;
        let base = hypervolume_exact(&front_of(&pts, &r)).unwrap();
        let mut more = pts.clone();
        let mut degenerate = vec![100.0; k];
        degenerate[axis] = 0.0;
        more.push(degenerate);
        prop_assert_eq!(hypervolume_exact(&front_of(&more, &r)).unwrap(), base);
    }
}
