//! Continuous piecewise-linear smoothing of a piecewise-constant density.
//!
//! The leaf partition is graded, triangulated conformingly, and the vertex
//! values of a linear finite element density are chosen by a quadratic
//! program trading fidelity to the leaf densities against flatness of the
//! graph, under nonnegativity and unit mass.

pub mod balance;
pub mod mesh;
pub mod qp;
pub mod simplex;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Transform;
use crate::error::{OptError, Result};
use crate::geometry::Region;
use crate::pcdensity::HmapTree;

pub use balance::{balance_partition, GradedPartition};
pub use mesh::{triangulate, Triangulation};
pub use qp::{assemble_qp, solve_qp, Qp, QpOptions, QpSolution};
pub use simplex::{simplex_integral, simplex_volume, top_face_sq, TopFaceSq};

pub const FEE_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_LAMBDA: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeeOptions {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FeeOptions {
    fn default() -> Self {
        FeeOptions {
            lambda: DEFAULT_LAMBDA,
            tol: QpOptions::default().tol,
            max_iter: QpOptions::default().max_iter,
        }
    }
}

/// Linear finite element density `f = Σ c_i φ_i` over a conforming mesh.
#[derive(Clone, Debug)]
pub struct FeeDensity {
    partition: GradedPartition,
    mesh: Triangulation,
    coeffs: Vec<f64>,
    lambda: f64,
    /// KKT residual reported by the solver.
    pub residual: f64,
    pub iterations: usize,
}

pub fn fee_fit(tree: &HmapTree, lambda: f64) -> Result<FeeDensity> {
    fee_fit_with(
        tree,
        &FeeOptions {
            lambda,
            ..FeeOptions::default()
        },
    )
}

pub fn fee_fit_with(tree: &HmapTree, opts: &FeeOptions) -> Result<FeeDensity> {
    let partition = balance_partition(tree)?;
    let mesh = triangulate(&partition)?;
    let qp = assemble_qp(&mesh, &partition, opts.lambda)?;
    let sol = solve_qp(
        &qp,
        &QpOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
        },
    )?;
    Ok(FeeDensity {
        partition,
        mesh,
        coeffs: sol.c,
        lambda: opts.lambda,
        residual: sol.residual,
        iterations: sol.iterations,
    })
}

#[derive(Serialize, Deserialize)]
struct FeeJson {
    format_version: u32,
    p: usize,
    transform: Transform,
    lambda: f64,
    vertices: Vec<Vec<f64>>,
    simplices: Vec<Vec<u32>>,
    coeffs: Vec<f64>,
    /// Leaf (in partition order) holding each simplex.
    simplex_leaf: Vec<u32>,
    /// The graded piecewise-constant density the mesh was built on.
    partition: serde_json::Value,
}

impl FeeDensity {
    pub fn dims(&self) -> usize {
        self.mesh.dims()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn transform(&self) -> &Transform {
        self.partition.transform()
    }

    pub fn mesh(&self) -> &Triangulation {
        &self.mesh
    }

    pub fn partition(&self) -> &GradedPartition {
        &self.partition
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn local_coeffs(&self, s: usize) -> Vec<f64> {
        self.mesh.simplex(s).iter().map(|&v| self.coeffs[v as usize]).collect()
    }

    /// Value on the unit cube computed inside simplex `s` (extended
    /// linearly if `u` lies outside it).
    pub fn eval_in_simplex(&self, s: usize, u: &[f64]) -> f64 {
        let verts = self.mesh.simplex_vertices(s);
        let b = simplex::barycentric(&verts, u).unwrap_or_else(|| vec![0.0; verts.len()]);
        b.iter().zip(self.local_coeffs(s)).map(|(w, c)| w * c).sum()
    }

    /// Simplex containing a unit-cube point.
    pub fn locate(&self, u: &[f64]) -> Option<usize> {
        let leaf = self.partition.locate(u)?;
        let mut best: Option<(f64, usize)> = None;
        for &s in self.mesh.leaf_simplices(leaf) {
            let verts = self.mesh.simplex_vertices(s as usize);
            if let Some(b) = simplex::barycentric(&verts, u) {
                let worst = b.iter().copied().fold(f64::INFINITY, f64::min);
                if best.is_none_or(|(w, _)| worst > w) {
                    best = Some((worst, s as usize));
                }
            }
        }
        best.map(|(_, s)| s)
    }

    pub fn eval_unit(&self, u: &[f64]) -> f64 {
        match self.locate(u) {
            Some(s) => self.eval_in_simplex(s, u).max(0.0),
            None => 0.0,
        }
    }

    /// Density in data coordinates; zero outside the bounding box.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if x.len() != self.dims() || x.iter().any(|v| !v.is_finite()) {
            return 0.0;
        }
        let t = self.transform();
        self.eval_unit(&t.to_unit(x)) * t.jacobian()
    }

    /// `∫_Δ f` for every simplex.
    pub fn simplex_masses(&self) -> Vec<f64> {
        (0..self.mesh.simplex_count())
            .map(|s| simplex_integral(self.mesh.volume(s), &self.local_coeffs(s)))
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.simplex_masses().iter().sum()
    }

    /// `Σ_Δ (μ*(Δ)/μ(Δ))²`, the flatness penalty without its weight.
    pub fn smoothness_penalty(&self) -> Result<f64> {
        (0..self.mesh.simplex_count())
            .map(|s| {
                let t = top_face_sq(&self.mesh.simplex_vertices(s))?;
                let mu = self.mesh.volume(s);
                Ok(t.value(&self.local_coeffs(s)) / (mu * mu))
            })
            .sum()
    }

    /// `m` draws in data coordinates: a simplex by mass, then a uniform
    /// point in it accepted with probability `f / max c`.
    pub fn sample(&self, seed: u64, m: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let masses = self.simplex_masses();
        let mut cdf = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for w in &masses {
            acc += w;
            cdf.push(acc);
        }
        let p = self.dims();
        let mut out = Vec::with_capacity(m);
        while out.len() < m {
            let t = rng.random::<f64>() * acc;
            let s = cdf.partition_point(|&c| c <= t).min(masses.len() - 1);
            let c = self.local_coeffs(s);
            let cmax = c.iter().copied().fold(0.0, f64::max);
            let verts = self.mesh.simplex_vertices(s);
            loop {
                // Uniform barycentric weights from normalized exponentials.
                let e: Vec<f64> = (0..=p).map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
                let total: f64 = e.iter().sum();
                let w: Vec<f64> = e.iter().map(|v| v / total).collect();
                let f: f64 = w.iter().zip(&c).map(|(a, b)| a * b).sum();
                if rng.random::<f64>() * cmax <= f {
                    let u: Vec<f64> = (0..p)
                        .map(|d| w.iter().zip(&verts).map(|(a, v)| a * v[d]).sum::<f64>().clamp(0.0, 1.0))
                        .collect();
                    out.push(self.transform().to_raw(&u));
                    break;
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        // Leaves are numbered in the order the reloaded partition will use.
        let tree = self.partition.to_tree()?;
        let order: HashMap<&Region, u32> = tree
            .leaves()
            .enumerate()
            .map(|(i, l)| (&l.region, i as u32))
            .collect();
        let simplex_leaf = (0..self.mesh.simplex_count())
            .map(|s| order[self.partition.leaf_region(self.mesh.leaf_of(s))])
            .collect();
        let json = FeeJson {
            format_version: FEE_FORMAT_VERSION,
            p: self.dims(),
            transform: self.transform().clone(),
            lambda: self.lambda,
            vertices: (0..self.mesh.vertex_count()).map(|i| self.mesh.vertex(i).to_vec()).collect(),
            simplices: (0..self.mesh.simplex_count()).map(|s| self.mesh.simplex(s).to_vec()).collect(),
            coeffs: self.coeffs.clone(),
            simplex_leaf,
            partition: tree.to_json(),
        };
        Ok(serde_json::to_value(json)?)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<FeeDensity> {
        let raw: FeeJson = serde_json::from_value(value.clone())?;
        if raw.format_version != FEE_FORMAT_VERSION {
            return Err(OptError::Format(format!(
                "unsupported FEE format version {}",
                raw.format_version
            )));
        }
        let tree = HmapTree::from_json(&raw.partition)?;
        if tree.dims() != raw.p || tree.transform() != &raw.transform {
            return Err(OptError::Format("partition does not match the FEE header".into()));
        }
        let partition = GradedPartition::from_leaves_of(&tree);
        let p = raw.p;
        if raw.vertices.iter().any(|v| v.len() != p) || raw.simplices.iter().any(|s| s.len() != p + 1) {
            return Err(OptError::Format("vertex or simplex has the wrong length".into()));
        }
        if raw.coeffs.len() != raw.vertices.len() || raw.coeffs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(OptError::Format("coefficients must be one non-negative value per vertex".into()));
        }
        let mut mesh = Triangulation::from_parts(
            p,
            raw.vertices.concat(),
            raw.simplices.concat(),
            raw.simplex_leaf,
            partition.leaf_count(),
        )?;
        mesh.audit(&partition)?;
        Ok(FeeDensity {
            partition,
            mesh,
            coeffs: raw.coeffs,
            lambda: raw.lambda,
            residual: 0.0,
            iterations: 0,
        })
    }
}

/// Feasible starting guess: each vertex takes the mean density of the leaves
/// around it, rescaled to unit mass.
pub fn lumped_guess(mesh: &Triangulation, partition: &GradedPartition) -> Vec<f64> {
    let n = mesh.vertex_count();
    let mut sum = vec![0.0; n];
    let mut count = vec![0.0; n];
    for s in 0..mesh.simplex_count() {
        let rho = partition.leaf_density(mesh.leaf_of(s));
        for &v in mesh.simplex(s) {
            sum[v as usize] += rho;
            count[v as usize] += 1.0;
        }
    }
    let mut c: Vec<f64> = sum.iter().zip(&count).map(|(s, k)| s / k).collect();
    let mass: f64 = (0..mesh.simplex_count())
        .map(|s| {
            let local: Vec<f64> = mesh.simplex(s).iter().map(|&v| c[v as usize]).collect();
            simplex_integral(mesh.volume(s), &local)
        })
        .sum();
    for v in &mut c {
        *v /= mass;
    }
    c
}
