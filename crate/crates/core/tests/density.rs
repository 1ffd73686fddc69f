mod common;

use opt_density::dataset::Transform;
use opt_density::eval::experiment::simulate;
use opt_density::eval::{hellinger, Density, ReferenceDensity, ReferenceId, UniformBox};
use opt_density::prior::sample_prior;
use opt_density::{llopt_fit, HmapTree, OptPrior, SampleSet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Kolmogorov–Smirnov distance of a sample from `U[0, 1]`.
fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / m).max((i + 1) as f64 / m - x))
        .fold(0.0, f64::max)
}

#[test]
fn uniform_tree_samples_pass_ks() {
    let tree = HmapTree::uniform(3, Transform::identity(3)).unwrap();
    let m = 20_000;
    let draws = tree.sample(7, m);
    // 1% critical value of the one-sample statistic.
    let critical = 1.628 / (m as f64).sqrt();
    for d in 0..3 {
        let d_stat = ks_uniform(draws.iter().map(|x| x[d]).collect());
        assert!(d_stat < critical, "dimension {d}: D = {d_stat}");
    }
}

#[test]
fn sample_frequencies_match_leaf_masses() {
    for seed in [3u64, 11, 29] {
        let tree = sample_prior(&OptPrior::default(), 2, seed, 6).unwrap();
        let leaves: Vec<_> = tree.leaves().collect();
        if leaves.len() < 2 {
            continue;
        }
        let m = 50_000;
        let mut counts = vec![0usize; leaves.len()];
        for x in tree.sample(seed + 100, m) {
            let i = leaves.iter().position(|l| l.region.contains(&x)).unwrap();
            counts[i] += 1;
        }
        let mut chi2 = 0.0;
        let mut df = 0usize;
        for (leaf, &c) in leaves.iter().zip(&counts) {
            let expected = leaf.mass * m as f64;
            if leaf.mass == 0.0 {
                assert_eq!(c, 0);
                continue;
            }
            chi2 += (c as f64 - expected).powi(2) / expected;
            df += 1;
        }
        let limit = ChiSquared::new((df - 1) as f64).unwrap().inverse_cdf(0.999);
        assert!(chi2 < limit, "seed {seed}: chi2 {chi2} over {limit} with {} leaves", df);
    }
}

#[test]
fn samples_follow_the_bounding_box() {
    let rows = common::uniform_rows(200, 2, 4)
        .into_iter()
        .map(|r| vec![10.0 + 4.0 * r[0], -1.0 + 0.5 * r[1]])
        .collect::<Vec<_>>();
    let data = SampleSet::ingest(&rows).unwrap();
    let tree = llopt_fit(&data, &OptPrior::default(), 2).unwrap();
    for x in tree.sample(1, 1000) {
        assert!(tree.eval(&x) > 0.0);
        assert!((10.0..=14.0).contains(&x[0]) && (-1.0..=-0.5).contains(&x[1]), "{x:?}");
    }
}

#[test]
fn references_are_normalized() {
    // Defensive mixture of the cube and the reference's own sampler. With
    // q = (1 + f) / 2 the weights f / q are bounded by 2, and the estimate
    // equals one exactly when the pdf and the sampler agree.
    let m = 200_000;
    for id in ReferenceId::ALL {
        let f = ReferenceDensity::new(id);
        let p = f.dims();
        let own = f.sample(5, m / 2);
        let cube = UniformBox::new(vec![0.0; p], vec![1.0; p]).unwrap().sample(6, m / 2);
        let total: f64 = own
            .iter()
            .chain(&cube)
            .map(|x| {
                let v = f.density(x);
                v / (0.5 + 0.5 * v)
            })
            .sum();
        let mass = total / m as f64;
        assert!((mass - 1.0).abs() < 0.005, "{id}: mass {mass}");
    }
}

#[test]
fn hellinger_is_symmetric() {
    let truth = ReferenceDensity::new(ReferenceId::Ex1);
    let data = simulate(&truth, 500, 3).unwrap();
    let fit = llopt_fit(&data, &OptPrior::default(), 2).unwrap();
    let a = hellinger(&truth, &fit, 100_000, 1).unwrap();
    let b = hellinger(&fit, &truth, 100_000, 2).unwrap();
    let se = a.std_error.hypot(b.std_error);
    assert!((a.distance - b.distance).abs() <= 2.0 * se + 1e-12, "{a:?} vs {b:?}");
}

#[test]
fn error_shrinks_with_more_data() {
    let truth = ReferenceDensity::new(ReferenceId::Ex1);
    let prior = OptPrior::default();
    let errors: Vec<f64> = [1_000usize, 10_000, 100_000]
        .iter()
        .map(|&n| {
            let data = simulate(&truth, n, n as u64).unwrap();
            let fit = llopt_fit(&data, &prior, 2).unwrap();
            hellinger(&truth, &fit, 50_000, 9).unwrap().distance
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn simulate_is_reproducible() {
    let truth = ReferenceDensity::new(ReferenceId::Ex5);
    let a = simulate(&truth, 300, 77).unwrap();
    let b = simulate(&truth, 300, 77).unwrap();
    let c = simulate(&truth, 300, 78).unwrap();
    assert!((0..300).all(|i| a.row(i) == b.row(i)));
    assert!((0..300).any(|i| a.row(i) != c.row(i)));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(truth.draw(&mut rng).iter().all(|v| (0.0..=1.0).contains(v)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn json_round_trip(seed in 0u64..10_000, p in 1usize..=3) {
        let tree = sample_prior(&OptPrior::default(), p, seed, 5).unwrap();
        let back = HmapTree::from_json_str(&tree.to_json_string()).unwrap();
        prop_assert_eq!(&back, &tree);
        prop_assert!((tree.total_mass().unwrap() - 1.0).abs() < 1e-9);
    }
}
