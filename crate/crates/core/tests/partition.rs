mod common;

use opt_density::geometry::{count_regions, count_regions_cumulative, MAX_CODE_LEN};
use opt_density::{Region, SampleSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn level_counts_match_enumeration() {
    for p in 1..=4usize {
        let mut cumulative = 0u128;
        for k in 0..=6u32 {
            let found = common::regions_at_level(p, k);
            assert_eq!(found.len() as u128, count_regions(k, p as u32).unwrap(), "k={k} p={p}");
            assert!(found.iter().all(|r| r.level() == k));
            cumulative += found.len() as u128;
            assert_eq!(cumulative, count_regions_cumulative(k, p as u32).unwrap());
        }
    }
    assert_eq!(count_regions(0, 5).unwrap(), 1);
    assert_eq!(count_regions(1, 2).unwrap(), 4);
    assert_eq!(count_regions(2, 2).unwrap(), 12);
}

#[test]
fn level_sums_of_counts_are_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..100 {
        let p = 1 + case % 3;
        let n = rng.random_range(1..=100);
        let rows = common::uniform_rows(n, p, case as u64);
        let data = SampleSet::unit_cube(&rows).unwrap();
        let members = data.all_members();
        for k in 0..=4u32 {
            let total: usize = common::regions_at_level(p, k)
                .iter()
                .map(|r| (0..n).filter(|&i| r.contains(data.row(i))).count())
                .sum();
            assert!(total <= n * p.pow(k), "case {case}: k={k} sum {total} > {n}·{p}^{k}");
            if k == 1 {
                // Each sample lands in exactly one half of every split.
                assert_eq!(total, n * p);
            }
        }
        let root = Region::root(p);
        let counts = data.count_children(&root, &members).unwrap();
        assert!(counts.counts.counts.iter().all(|c| c[0] + c[1] == n));
        assert_eq!(counts.counts.total(), n);
    }
}

fn arb_region() -> impl Strategy<Value = Region> {
    (1usize..=4)
        .prop_flat_map(|p| proptest::collection::vec((0usize..p, any::<bool>()), 0..30).prop_map(move |s| (p, s)))
        .prop_map(|(p, splits)| {
            splits
                .into_iter()
                .fold(Region::root(p), |r, (dim, upper)| r.child(dim, upper))
        })
}

proptest! {
    #[test]
    fn codes_round_trip(region in arb_region()) {
        let parsed = Region::parse(&region.code()).unwrap();
        prop_assert_eq!(&parsed, &region);
        let total: u32 = (0..region.dims()).map(|d| region.code_len(d)).sum();
        prop_assert_eq!(total, region.level());
        let expected: f64 = (0..region.dims()).map(|d| 0.5f64.powi(region.code_len(d) as i32)).product();
        prop_assert_eq!(region.volume(), expected);
    }

    #[test]
    fn children_tile_the_parent(region in arb_region(), dim_seed in 0usize..4) {
        let dim = dim_seed % region.dims();
        let lo = region.child(dim, false);
        let hi = region.child(dim, true);
        prop_assert_eq!(lo.volume() + hi.volume(), region.volume());
        prop_assert!(lo.is_disjoint(&hi));
        prop_assert!(lo.is_within(&region) && hi.is_within(&region));
        let (a, m) = lo.interval(dim);
        let (m2, b) = hi.interval(dim);
        prop_assert_eq!(m, m2);
        prop_assert_eq!((a, b), region.interval(dim));
        for d in (0..region.dims()).filter(|&d| d != dim) {
            prop_assert_eq!(lo.interval(d), region.interval(d));
        }
        prop_assert_eq!(lo.parent_along(dim).unwrap(), region.clone());
    }

    #[test]
    fn child_counts_sum_to_parent(seed in 0u64..1000, n in 1usize..60, p in 1usize..4) {
        let rows = common::uniform_rows(n, p, seed);
        let data = SampleSet::unit_cube(&rows).unwrap();
        let root = Region::root(p);
        let members = data.all_members();
        for dim in 0..p {
            let (lo, hi) = data.partition(&root, dim, &members);
            prop_assert_eq!(lo.len() + hi.len(), n);
            let child = root.child(dim, false);
            let (l2, h2) = data.partition(&child, (dim + 1) % p, &lo);
            prop_assert_eq!(l2.len() + h2.len(), lo.len());
        }
    }
}

#[test]
fn depth_cap_fits_code_storage() {
    let mut r = Region::root(1);
    for _ in 0..MAX_CODE_LEN {
        r = r.child(0, true);
    }
    assert_eq!(r.code_len(0), MAX_CODE_LEN);
    assert!(r.volume() > 0.0);
}
