mod common;

use std::collections::HashMap;

use nalgebra::DMatrix;
use opt_density::fee::{
    assemble_qp, balance_partition, fee_fit, fee_fit_with, lumped_guess, solve_qp, triangulate, FeeDensity,
    FeeOptions, GradedPartition, Qp, QpOptions,
};
use opt_density::pcdensity::{grow, Growth};
use opt_density::prior::{sample_prior, OptPrior};
use opt_density::{HmapTree, Region, Transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tree splitting exactly the listed regions, with the given mass splits.
fn tree_with(p: usize, splits: &[(&str, usize, [f64; 2])]) -> HmapTree {
    let table: HashMap<Region, (usize, [f64; 2])> = splits
        .iter()
        .map(|(code, d, t)| (Region::parse(code).unwrap(), (*d, *t)))
        .collect();
    grow(p, Transform::identity(p), (), |r, ()| {
        Ok(match table.get(r) {
            Some(&(dim, theta)) => Growth::Split {
                dim,
                theta,
                lower: (),
                upper: (),
            },
            None => Growth::Leaf,
        })
    })
    .unwrap()
}

fn leaf_triangle_counts(g: &GradedPartition, tri: &opt_density::fee::Triangulation) -> HashMap<String, usize> {
    (0..g.leaf_count())
        .map(|l| (g.leaf_region(l).code(), tri.leaf_simplices(l).len()))
        .collect()
}

#[test]
fn single_leaf_meshes() {
    let sq = HmapTree::uniform(2, Transform::identity(2)).unwrap();
    let g = balance_partition(&sq).unwrap();
    let tri = triangulate(&g).unwrap();
    assert_eq!(tri.simplex_count(), 4);
    assert_eq!(tri.vertex_count(), 5);

    let seg = HmapTree::uniform(1, Transform::identity(1)).unwrap();
    let g = balance_partition(&seg).unwrap();
    let tri = triangulate(&g).unwrap();
    assert_eq!(tri.simplex_count(), 2);
    assert_eq!(g.leaf_count(), 1);
}

#[test]
fn three_leaf_partition_counts() {
    // Left half whole; right half split across y.
    let t = tree_with(2, &[("ε|ε", 0, [0.5, 0.5]), ("1|ε", 1, [0.3, 0.7])]);
    let g = balance_partition(&t).unwrap();
    assert_eq!(g.leaf_count(), 3);
    let tri = triangulate(&g).unwrap();
    let counts = leaf_triangle_counts(&g, &tri);
    // The left leaf's right edge is cut at the hanging node: 5 triangles.
    assert_eq!(counts["0|ε"], 5);
    assert_eq!(counts["1|0"], 4);
    assert_eq!(counts["1|1"], 4);
    assert_eq!(tri.simplex_count(), 13);
}

#[test]
fn grading_splits_the_coarse_side_once() {
    // Right half refined twice along x near the middle: a 2-level jump
    // across x = 1/2 against the whole left half.
    let t = tree_with(
        2,
        &[("ε|ε", 0, [0.5, 0.5]), ("1|ε", 0, [0.5, 0.5]), ("10|ε", 0, [0.5, 0.5])],
    );
    let before: Vec<String> = t.leaves().map(|n| n.region.code()).collect();
    assert_eq!(before.len(), 4);
    let g = balance_partition(&t).unwrap();
    assert!(g.is_graded());
    let after: Vec<String> = g.leaf_regions().map(|r| r.code()).collect();
    assert_eq!(after.len(), 5, "{after:?}");
    assert!(after.contains(&"00|ε".to_string()) && after.contains(&"01|ε".to_string()));

    // Function unchanged, exactly.
    let graded = g.to_tree().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let u = [rng.random::<f64>(), rng.random::<f64>()];
        assert_eq!(t.eval_unit(&u), graded.eval_unit(&u));
    }
    assert!((graded.total_mass().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn single_leaf_is_already_graded() {
    let t = HmapTree::uniform(3, Transform::identity(3)).unwrap();
    let g = balance_partition(&t).unwrap();
    assert_eq!(g.leaf_count(), 1);
}

#[test]
fn random_trees_mesh_conformingly() {
    let prior = OptPrior {
        rho: 0.35,
        ..OptPrior::default()
    };
    for (p, cap) in [(1usize, 10u32), (2, 8), (3, 6)] {
        for seed in 0..6 {
            let t = sample_prior(&prior, p, seed, cap).unwrap();
            let g = balance_partition(&t).unwrap();
            assert!(g.is_graded());
            // `triangulate` audits facet matching and leaf volumes itself.
            let tri = triangulate(&g).unwrap();
            let total: f64 = tri.volumes().iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "p={p} seed={seed}: {total}");
        }
    }
}

#[test]
fn equality_row_one_dimension() {
    let t = HmapTree::uniform(1, Transform::identity(1)).unwrap();
    let g = balance_partition(&t).unwrap();
    let tri = triangulate(&g).unwrap();
    let qp = assemble_qp(&tri, &g, 1e-3).unwrap();
    let mut a: Vec<(f64, f64)> = (0..3).map(|i| (tri.vertex(i)[0], qp.a[i])).collect();
    a.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let a: Vec<f64> = a.into_iter().map(|v| v.1).collect();
    assert_eq!(a, vec![0.25, 0.5, 0.25]);
    assert!(assemble_qp(&tri, &g, -1.0).is_err());
}

fn min_eigenvalue(p: &[Vec<f64>]) -> f64 {
    let n = p.len();
    let m = DMatrix::from_fn(n, n, |i, j| p[i][j]);
    m.symmetric_eigenvalues().min()
}

#[test]
fn quadratic_form_is_symmetric_psd() {
    let t = tree_with(2, &[("ε|ε", 0, [0.2, 0.8]), ("1|ε", 1, [0.3, 0.7]), ("1|1", 0, [0.9, 0.1])]);
    let g = balance_partition(&t).unwrap();
    let tri = triangulate(&g).unwrap();
    let qp = assemble_qp(&tri, &g, 1e-2).unwrap();
    let p = qp.dense_matrix();
    for (i, row) in p.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert!((v - p[j][i]).abs() < 1e-12 * (1.0 + v.abs()));
        }
    }
    assert!(min_eigenvalue(&p) >= -1e-10);
}

#[test]
fn zero_lambda_exact_match_has_zero_fidelity() {
    let t = HmapTree::uniform(2, Transform::identity(2)).unwrap();
    let g = balance_partition(&t).unwrap();
    let tri = triangulate(&g).unwrap();
    let qp = assemble_qp(&tri, &g, 0.0).unwrap();
    let ones = vec![1.0; tri.vertex_count()];
    assert!(qp.objective(&ones).abs() < 1e-12);
}

#[test]
fn qp_matches_active_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let n = 2 + case % 5;
        let (p, r, a) = common::random_qp(&mut rng, n);
        let dense: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| p[(i, j)]).collect()).collect();
        let qp = Qp::from_dense(&dense, r.iter().copied().collect(), a.iter().copied().collect(), 0.0).unwrap();
        let sol = solve_qp(&qp, &QpOptions::default()).unwrap();
        let oracle = common::active_set_optimum(&p, &r, &a);
        assert!(
            (sol.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
            "case {case}: solver {} oracle {oracle}",
            sol.objective
        );
        assert!(sol.c.iter().all(|&v| v >= 0.0));
        let mass: f64 = sol.c.iter().zip(a.iter()).map(|(c, a)| c * a).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }
}

#[test]
fn solver_is_deterministic() {
    let t = tree_with(2, &[("ε|ε", 1, [0.2, 0.8]), ("ε|1", 0, [0.6, 0.4])]);
    let a = fee_fit(&t, 1e-3).unwrap();
    let b = fee_fit(&t, 1e-3).unwrap();
    assert_eq!(a.coeffs(), b.coeffs());
}

#[test]
fn huge_lambda_flattens() {
    let t = tree_with(2, &[("ε|ε", 0, [0.8, 0.2])]);
    let f = fee_fit(&t, 1e9).unwrap();
    assert!(f.coeffs().iter().all(|c| (c - 1.0).abs() < 1e-4), "{:?}", f.coeffs());
}

#[test]
fn uniform_tree_gives_unit_density() {
    for p in 1..=3 {
        let t = HmapTree::uniform(p, Transform::identity(p)).unwrap();
        let f = fee_fit(&t, 1e-3).unwrap();
        assert!(f.coeffs().iter().all(|c| (c - 1.0).abs() < 1e-6));
        assert!((f.total_mass() - 1.0).abs() < 1e-9);
        let x = vec![0.37; p];
        assert!((f.eval(&x) - 1.0).abs() < 1e-6);
    }
}

fn fitted_example() -> FeeDensity {
    let t = tree_with(
        2,
        &[
            ("ε|ε", 0, [0.7, 0.3]),
            ("0|ε", 1, [0.25, 0.75]),
            ("0|1", 0, [0.1, 0.9]),
            ("1|ε", 1, [0.5, 0.5]),
        ],
    );
    fee_fit(&t, 1e-3).unwrap()
}

#[test]
fn mass_and_nonnegativity() {
    let f = fitted_example();
    assert!(f.coeffs().iter().all(|&c| c >= 0.0));
    assert!((f.total_mass() - 1.0).abs() < 1e-6);
    assert!(f.residual <= 1e-8);
}

#[test]
fn evaluation_interpolates() {
    let f = fitted_example();
    let mesh = f.mesh();
    for v in 0..mesh.vertex_count() {
        let x = mesh.vertex(v);
        let s = f.locate(x).unwrap();
        let local = mesh.simplex(s);
        if local.contains(&(v as u32)) {
            assert!((f.eval_in_simplex(s, x) - f.coeffs()[v]).abs() < 1e-9);
        }
        assert!((f.eval_unit(x) - f.coeffs()[v]).abs() < 1e-9 * (1.0 + f.coeffs()[v]));
    }
    for s in 0..mesh.simplex_count() {
        let verts = mesh.simplex_vertices(s);
        let centroid: Vec<f64> = (0..2).map(|d| verts.iter().map(|v| v[d]).sum::<f64>() / 3.0).collect();
        let mean: f64 = mesh.simplex(s).iter().map(|&v| f.coeffs()[v as usize]).sum::<f64>() / 3.0;
        assert!((f.eval_in_simplex(s, &centroid) - mean).abs() < 1e-12 * (1.0 + mean));
    }
    assert_eq!(f.eval(&[1.5, 0.5]), 0.0);
}

#[test]
fn continuous_across_shared_facets() {
    let f = fitted_example();
    let mesh = f.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // Relative to the size of the density; near-zero vertex values carry
    // solver-tolerance noise that a pointwise relative test would magnify.
    let scale = f.coeffs().iter().copied().fold(0.0, f64::max);
    let mut checked = 0;
    while checked < 10_000 {
        let s = rng.random_range(0..mesh.simplex_count());
        let Some(nb) = mesh.neighbours(s).first().map(|&n| n as usize) else { continue };
        let shared: Vec<u32> = mesh.simplex(s).iter().copied().filter(|v| mesh.simplex(nb).contains(v)).collect();
        let t: f64 = rng.random();
        let (a, b) = (mesh.vertex(shared[0] as usize), mesh.vertex(shared[1] as usize));
        let x: Vec<f64> = (0..2).map(|d| a[d] + t * (b[d] - a[d])).collect();
        let (u, v) = (f.eval_in_simplex(s, &x), f.eval_in_simplex(nb, &x));
        assert!((u - v).abs() <= 1e-9 * scale, "{u} vs {v}");
        checked += 1;
    }
}

#[test]
fn smoothness_decreases_with_lambda() {
    let t = fitted_example().partition().to_tree().unwrap();
    let mut last = f64::INFINITY;
    for lambda in [1e-5, 1e-4, 1e-3, 1e-2, 1e-1] {
        let q = fee_fit(&t, lambda).unwrap().smoothness_penalty().unwrap();
        assert!(q <= last * (1.0 + 1e-6), "λ={lambda}: {q} > {last}");
        last = q;
    }
}

#[test]
fn optimum_beats_lumped_guess() {
    let f = fitted_example();
    let tree = f.partition().to_tree().unwrap();
    let g = balance_partition(&tree).unwrap();
    let tri = triangulate(&g).unwrap();
    let qp = assemble_qp(&tri, &g, f.lambda()).unwrap();
    let guess = lumped_guess(&tri, &g);
    assert!(qp.objective(f.coeffs()) <= qp.objective(&guess) + 1e-12);
}

#[test]
fn sampling_matches_simplex_masses() {
    let f = fitted_example();
    let masses = f.simplex_masses();
    let m = 100_000;
    let draws = f.sample(9, m);
    let mut counts = vec![0usize; masses.len()];
    for x in &draws {
        counts[f.locate(x).unwrap()] += 1;
    }
    for (s, (&c, &w)) in counts.iter().zip(&masses).enumerate() {
        let sd = (m as f64 * w * (1.0 - w)).sqrt();
        assert!((c as f64 - m as f64 * w).abs() <= 3.0 * sd + 3.0, "simplex {s}: {c} vs {}", m as f64 * w);
    }
    assert_eq!(f.sample(1, 20), f.sample(1, 20));
}

#[test]
fn json_round_trip() {
    let f = fitted_example();
    let v = f.to_json().unwrap();
    assert_eq!(v["format_version"], 1);
    let back = FeeDensity::from_json(&v).unwrap();
    assert_eq!(back.coeffs(), f.coeffs());
    for u in [[0.1, 0.2], [0.75, 0.9], [0.5, 0.5]] {
        assert_eq!(back.eval_unit(&u), f.eval_unit(&u));
    }
}

#[test]
fn json_round_trip_after_grading() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for seed in 0..6 {
        let tree = sample_prior(&OptPrior::default(), 2, seed, 7).unwrap();
        let f = fee_fit(&tree, 1e-3).unwrap();
        let back = FeeDensity::from_json(&f.to_json().unwrap()).unwrap();
        for _ in 0..2000 {
            let u = [rng.random::<f64>(), rng.random::<f64>()];
            assert_eq!(back.eval_unit(&u), f.eval_unit(&u), "seed {seed} at {u:?}");
        }
    }
}

#[test]
fn tolerance_options_apply() {
    let t = HmapTree::uniform(1, Transform::identity(1)).unwrap();
    let opts = FeeOptions {
        lambda: 1e-3,
        tol: 1e-10,
        max_iter: 100,
    };
    let f = fee_fit_with(&t, &opts).unwrap();
    assert!(f.residual <= 1e-10);
}
