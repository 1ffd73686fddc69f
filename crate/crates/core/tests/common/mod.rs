//! Oracles and data generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use opt_density::{Region, SampleSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive active-set solution of min ½cᵀPc + rᵀc, aᵀc = 1, c ≥ 0.
pub fn active_set_optimum(p: &DMatrix<f64>, r: &DVector<f64>, a: &DVector<f64>) -> f64 {
    let n = r.len();
    let objective = |c: &DVector<f64>| 0.5 * c.dot(&(p * c)) + r.dot(c);
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let k = free.len();
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for (ii, &i) in free.iter().enumerate() {
            for (jj, &j) in free.iter().enumerate() {
                kkt[(ii, jj)] = p[(i, j)];
            }
            kkt[(ii, k)] = a[i];
            kkt[(k, ii)] = a[i];
            rhs[ii] = -r[i];
        }
        rhs[k] = 1.0;
        let svd = kkt.clone().svd(true, true);
        let Ok(sol) = svd.solve(&rhs, 1e-12) else { continue };
        if (&kkt * &sol - &rhs).amax() > 1e-8 {
            continue;
        }
        let mut c = DVector::zeros(n);
        for (ii, &i) in free.iter().enumerate() {
            c[i] = sol[ii];
        }
        if c.iter().all(|&v| v >= -1e-10) {
            best = best.min(objective(&c));
        }
    }
    best
}


/// Random PSD problem with `n` variables: `(P, r, a)` with `P = BᵀB` of
/// random rank and a positive equality row.
pub fn random_qp<R: Rng>(rng: &mut R, n: usize) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let rank = 1 + rng.random_range(0..n);
    let b = DMatrix::from_fn(rank, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let p = b.transpose() * &b;
    let r = DVector::from_fn(n, |_, _| rng.random::<f64>() * 4.0 - 2.0);
    let a = DVector::from_fn(n, |_, _| 0.1 + rng.random::<f64>());
    (p, r, a)
}

/// Distinct regions at tree level `k`, found breadth first and deduplicated
/// by code.
pub fn regions_at_level(p: usize, k: u32) -> Vec<Region> {
    let mut level: BTreeMap<String, Region> = BTreeMap::new();
    let root = Region::root(p);
    level.insert(root.code(), root);
    for _ in 0..k {
        let mut next = BTreeMap::new();
        for region in level.values() {
            for dim in 0..p {
                for upper in [false, true] {
                    let child = region.child(dim, upper);
                    next.insert(child.code(), child);
                }
            }
        }
        level = next;
    }
    level.into_values().collect()
}

/// `n` uniform points in the unit cube.
pub fn uniform_rows(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect()
}

/// A mixture of a few tight clusters and uniform noise, on the unit cube.
pub fn clustered(n: usize, p: usize, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 1 + rng.random_range(0..3);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..p).map(|_| rng.random_range(0.1..0.9)).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < 0.3 {
                (0..p).map(|_| rng.random::<f64>()).collect()
            } else {
                let c = &centers[rng.random_range(0..k)];
                c.iter().map(|&m| (m + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0)).collect()
            }
        })
        .collect();
    SampleSet::unit_cube(&rows).unwrap()
}
