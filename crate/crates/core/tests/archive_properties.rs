use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uqd_core::archive::{crowding_distances, project_front};
use uqd_core::{
    delta_compare, weighted_fitness, AdditionRule, DeltaDecision, DeltaPreference, EliteArchive,
    EvaluationSample, Genotype, GridSpec, Outcome, ParetoArchive, ParetoCell, SolutionRecord,
};

fn rec(id: u64, f: f64, r: f64, at: [f64; 2]) -> SolutionRecord {
    SolutionRecord::restored(
        id,
        Genotype::new(vec![f, at[0], at[1]]),
        vec![EvaluationSample::new(f, at.to_vec())],
        1,
        f,
        at.to_vec(),
        r,
    )
}

fn pref(df: f64, dr: f64) -> DeltaPreference {
    DeltaPreference::new(df, dr, 1e-6).unwrap()
}

/// Region oracle written directly from the three replacement regions.
fn delta_oracle(c: (f64, f64), e: (f64, f64), df: f64, dr: f64) -> bool {
    let region_gain = c.0 - e.0 >= df;
    let region_dominant = c.0 - e.0 >= 0.0 && c.1 - e.1 >= 0.0;
    let region_tradeoff = c.0 - e.0 >= -df && c.1 - e.1 >= dr;
    region_gain || region_dominant || region_tradeoff
}

#[test]
fn delta_compare_matches_region_oracle_on_1e5_tuples() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut disagreements = 0;
    for i in 0..100_000 {
        // Quantized values put many tuples exactly on region boundaries.
        let q = |rng: &mut ChaCha8Rng, lo: i32, hi: i32| rng.random_range(lo..=hi) as f64 * 0.25;
        let (c, e, df, dr) = if i % 2 == 0 {
            ((q(&mut rng, -8, 8), q(&mut rng, -8, 0)), (q(&mut rng, -8, 8), q(&mut rng, -8, 0)), q(&mut rng, 0, 4), q(&mut rng, 0, 4))
        } else {
            (
                (rng.random_range(-2.0..2.0), rng.random_range(-2.0..0.0)),
                (rng.random_range(-2.0..2.0), rng.random_range(-2.0..0.0)),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            )
        };
        let got = delta_compare(c, e, &pref(df, dr)) == DeltaDecision::ReplaceElite;
        if got != delta_oracle(c, e, df, dr) {
            disagreements += 1;
        }
    }
    assert_eq!(disagreements, 0);
}

/// Brute-force front: keep a point when nothing dominates it and no earlier
/// point equals it.
fn brute_force_front(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let p = points[i];
            !points.iter().enumerate().any(|(j, &q)| {
                let dominates = q.0 >= p.0 && q.1 >= p.1 && q != p;
                let earlier_duplicate = q == p && j < i;
                dominates || earlier_duplicate
            })
        })
        .collect()
}

fn front_ids(cell: &ParetoCell) -> Vec<u64> {
    let mut ids: Vec<u64> = cell.front().iter().map(SolutionRecord::id).collect();
    ids.sort_unstable();
    ids
}

#[test]
fn pareto_front_matches_brute_force_on_1e3_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.random_range(1..=30);
        let coarse = rng.random_bool(0.5);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                if coarse {
                    (rng.random_range(0..6) as f64, -(rng.random_range(0..6) as f64))
                } else {
                    (rng.random_range(0.0..1.0), rng.random_range(-1.0..0.0))
                }
            })
            .collect();
        let mut cell = ParetoCell::new(64);
        for (i, &(f, r)) in points.iter().enumerate() {
            cell.add(rec(i as u64, f, r, [0.5, 0.5])).unwrap();
        }
        let expected: Vec<u64> = brute_force_front(&points).into_iter().map(|i| i as u64).collect();
        assert_eq!(front_ids(&cell), expected, "points {points:?}");
    }
}

fn arb_points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0u8..8, 0u8..8).prop_map(|(f, r)| (f as f64, -(r as f64))), 1..max)
}

proptest! {
    #[test]
    fn pareto_front_is_mutually_non_dominated_and_bounded(points in arb_points(40), cap in 1usize..8) {
        let mut cell = ParetoCell::new(cap);
        for (i, &(f, r)) in points.iter().enumerate() {
            cell.add(rec(i as u64, f, r, [0.5, 0.5])).unwrap();
            prop_assert!(cell.len() <= cap);
            let front = cell.front();
            for a in front {
                for b in front {
                    if a.id() != b.id() {
                        let weak = a.est_fitness() >= b.est_fitness() && a.est_reproducibility() >= b.est_reproducibility();
                        prop_assert!(!weak, "{:?} weakly dominates {:?}", a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn unbounded_front_is_order_insensitive(points in arb_points(25), seed in any::<u64>()) {
        // Distinct points so the set of surviving values is well defined.
        let mut pts = points;
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup();
        let mut shuffled: Vec<usize> = (0..pts.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let mut a = ParetoCell::new(64);
        let mut b = ParetoCell::new(64);
        for (i, &(f, r)) in pts.iter().enumerate() {
            a.add(rec(i as u64, f, r, [0.5, 0.5])).unwrap();
        }
        for &i in &shuffled {
            b.add(rec(i as u64, pts[i].0, pts[i].1, [0.5, 0.5])).unwrap();
        }
        prop_assert_eq!(front_ids(&a), front_ids(&b));
    }

    #[test]
    fn projection_is_argmax_and_never_weighted_dominated(
        points in arb_points(12),
        df in 0.0f64..4.0,
        dr in 0.0f64..4.0,
    ) {
        let mut cell = ParetoCell::new(16);
        for (i, &(f, r)) in points.iter().enumerate() {
            cell.add(rec(i as u64, f, r, [0.5, 0.5])).unwrap();
        }
        let p = pref(df, dr);
        let best = project_front(cell.front(), &p).unwrap();
        let wb = weighted_fitness(best.est_fitness(), best.est_reproducibility(), &p);
        for m in cell.front() {
            prop_assert!(weighted_fitness(m.est_fitness(), m.est_reproducibility(), &p) <= wb);
        }
    }

    #[test]
    fn weighted_fitness_is_monotone(f in -10.0f64..10.0, r in -10.0f64..0.0, d in 0.0f64..5.0, df in 0.0f64..3.0, dr in 0.0f64..3.0) {
        let p = pref(df, dr);
        prop_assert!(weighted_fitness(f + d, r, &p) >= weighted_fitness(f, r, &p));
        prop_assert!(weighted_fitness(f, r + d, &p) >= weighted_fitness(f, r, &p));
    }

    #[test]
    fn crowding_distances_are_non_negative_with_infinite_extremes(points in arb_points(12)) {
        let d = crowding_distances(&points);
        prop_assert_eq!(d.len(), points.len());
        prop_assert!(d.iter().all(|&x| x >= 0.0));
        prop_assert!(d.iter().filter(|x| x.is_infinite()).count() >= points.len().min(2));
    }

    #[test]
    fn delta_with_zero_preference_is_fitness_first(f in -5.0f64..5.0, r in -5.0f64..0.0, fe in -5.0f64..5.0, re in -5.0f64..0.0) {
        let d = delta_compare((f, r), (fe, re), &pref(0.0, 0.0));
        prop_assert_eq!(d == DeltaDecision::ReplaceElite, f >= fe);
    }

    #[test]
    fn infinite_thresholds_reduce_delta_to_ls(f in -5.0f64..5.0, r in -5.0f64..0.0, fe in -5.0f64..5.0, re in -5.0f64..0.0) {
        let p = DeltaPreference::new(f64::INFINITY, f64::INFINITY, 1e-6).unwrap();
        let d = delta_compare((f, r), (fe, re), &p);
        prop_assert_eq!(d == DeltaDecision::ReplaceElite, f >= fe && r >= re);
    }
}

#[test]
fn depth_one_cascade_matches_single_slot_delta_over_1e4_streams() {
    let grid = GridSpec::unit(2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for stream in 0..10_000u64 {
        let p = pref(rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
        let rule = AdditionRule::Delta(p);
        let mut single = EliteArchive::new(grid.clone(), 1).unwrap();
        let mut cascade = EliteArchive::new(grid.clone(), 1).unwrap();
        for k in 0..8u64 {
            let at = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let f = (rng.random_range(0..8) as f64) * 0.125;
            let r = -(rng.random_range(0..8) as f64) * 0.0625;
            let id = stream * 8 + k;
            let a = single.add_single(rec(id, f, r, at), &rule).unwrap();
            let b = cascade.add_delta_depth(rec(id, f, r, at), &p).unwrap();
            assert_eq!(a.accepted(), b.accepted());
            assert_eq!(a.removed(), b.removed());
        }
        assert_eq!(single, cascade);
    }
}

#[test]
fn scored_depth_keeps_cells_sorted_and_bounded() {
    let grid = GridSpec::unit(2, 1);
    let rule = AdditionRule::Weighted(pref(0.1, 0.1));
    let mut a = EliteArchive::new(grid, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for id in 0..500 {
        let f = rng.random_range(0.0..1.0);
        let r = rng.random_range(-1.0..0.0);
        let out = a.add(rec(id, f, r, [0.5, 0.5]), &rule).unwrap();
        assert!(out.removed().len() <= 1);
        let scores: Vec<f64> = a.cell(0).iter().map(|x| rule.score(x).unwrap()).collect();
        assert!(scores.len() <= 3);
        assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");
    }
}

#[test]
fn pareto_archive_routes_by_cell() {
    let mut a = ParetoArchive::new(GridSpec::unit(2, 2), 6).unwrap();
    assert_eq!(a.add(rec(0, 1.0, -1.0, [0.1, 0.1])).unwrap(), Outcome::Added);
    assert_eq!(a.add(rec(1, 2.0, -2.0, [0.9, 0.9])).unwrap(), Outcome::Added);
    assert_eq!(a.add(rec(2, 2.0, -2.0, [0.9, 0.9])).unwrap(), Outcome::Rejected);
    assert_eq!(a.filled_cells(), 2);
    assert_eq!(a.occupancy(), 2);
}
