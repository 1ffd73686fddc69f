//! The smoothing quadratic program and its interior-point solver.
//!
//! ```text
//! minimize ½ cᵀ P c + rᵀ c + constant   subject to  aᵀ c = 1,  c ≥ 0
//! ```

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use super::balance::GradedPartition;
use super::mesh::Triangulation;
use super::simplex::gradient_operator;
use crate::error::{OptError, Result};

/// Convex quadratic objective over the probability simplex `{c ≥ 0, aᵀc = 1}`.
#[derive(Clone, Debug)]
pub struct Qp {
    n: usize,
    /// Full symmetric matrix with explicit (possibly zero) diagonal.
    p: SparseColMat<usize, f64>,
    diag_pos: Vec<usize>,
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    pub constant: f64,
}

impl Qp {
    /// Builds the problem from `(row, col, value)` entries of `P`; repeated
    /// entries are summed. Entries must describe a symmetric matrix.
    pub fn new(n: usize, entries: &[(usize, usize, f64)], r: Vec<f64>, a: Vec<f64>, constant: f64) -> Result<Qp> {
        if r.len() != n || a.len() != n || n == 0 {
            return Err(OptError::Config(format!(
                "QP dimension mismatch: n = {n}, |r| = {}, |a| = {}",
                r.len(),
                a.len()
            )));
        }
        let mut trip: Vec<Triplet<usize, usize, f64>> = entries
            .iter()
            .map(|&(i, j, v)| Triplet::new(i, j, v))
            .collect();
        trip.extend((0..n).map(|i| Triplet::new(i, i, 0.0)));
        let p = SparseColMat::try_new_from_triplets(n, n, &trip)
            .map_err(|e| OptError::Config(format!("invalid QP matrix: {e:?}")))?;
        let diag_pos = (0..n)
            .map(|j| {
                let start = p.col_ptr()[j];
                let rows = &p.row_idx()[start..p.col_ptr()[j + 1]];
                start + rows.binary_search(&j).expect("diagonal entry present")
            })
            .collect();
        Ok(Qp {
            n,
            p,
            diag_pos,
            r,
            a,
            constant,
        })
    }

    pub fn from_dense(p: &[Vec<f64>], r: Vec<f64>, a: Vec<f64>, constant: f64) -> Result<Qp> {
        let n = p.len();
        let entries: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| p[i][j] != 0.0)
            .map(|(i, j)| (i, j, p[i][j]))
            .collect();
        Qp::new(n, &entries, r, a, constant)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `P c`.
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        let (cp, ri, v) = (self.p.col_ptr(), self.p.row_idx(), self.p.val());
        for j in 0..self.n {
            let cj = c[j];
            if cj == 0.0 {
                continue;
            }
            for k in cp[j]..cp[j + 1] {
                out[ri[k]] += v[k] * cj;
            }
        }
        out
    }

    /// `|P| |c|`, entrywise absolute values.
    fn apply_abs(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        let (cp, ri, v) = (self.p.col_ptr(), self.p.row_idx(), self.p.val());
        for j in 0..self.n {
            let cj = c[j].abs();
            for k in cp[j]..cp[j + 1] {
                out[ri[k]] += v[k].abs() * cj;
            }
        }
        out
    }

    pub fn objective(&self, c: &[f64]) -> f64 {
        let pc = self.apply(c);
        let quad: f64 = c.iter().zip(&pc).map(|(x, y)| x * y).sum();
        let lin: f64 = c.iter().zip(&self.r).map(|(x, y)| x * y).sum();
        0.5 * quad + lin + self.constant
    }

    /// Dense copy of `P`, for small problems and tests.
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        let (cp, ri, v) = (self.p.col_ptr(), self.p.row_idx(), self.p.val());
        for j in 0..self.n {
            for k in cp[j]..cp[j + 1] {
                m[ri[k]][j] += v[k];
            }
        }
        m
    }

    /// Scaled KKT residual of a primal-dual point.
    fn residual(&self, x: &[f64], y: f64, z: &[f64]) -> (f64, Vec<f64>, f64) {
        let px = self.apply(x);
        let rd: Vec<f64> = (0..self.n)
            .map(|i| px[i] + self.r[i] - self.a[i] * y - z[i])
            .collect();
        let rp = dot(&self.a, x) - 1.0;
        // Magnitude of the terms summed into `P x`, which bounds its rounding
        // error even when the sum itself cancels.
        let abs_px = inf_norm(&self.apply_abs(x));
        let scale = 1.0 + inf_norm(&self.r).max(abs_px).max(inf_norm(z));
        let mu = dot(x, z) / self.n as f64;
        let res = (inf_norm(&rd) / scale).max(rp.abs()).max(mu / scale);
        (res, rd, rp)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpOptions {
    /// Bound on the scaled KKT residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub c: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Largest step in `(0, 1]` keeping `v + t·dv` strictly positive, damped.
fn step_to_boundary(v: &[f64], dv: &[f64]) -> f64 {
    let mut t: f64 = 1.0;
    for (x, d) in v.iter().zip(dv) {
        if *d < 0.0 {
            t = t.min(-x / d);
        }
    }
    t
}

struct Factor {
    symbolic: SymbolicLlt<usize>,
    k: SparseColMat<usize, f64>,
}

impl Factor {
    fn new(qp: &Qp) -> Result<Factor> {
        let symbolic = SymbolicLlt::try_new(qp.p.symbolic(), Side::Lower)
            .map_err(|e| OptError::Internal(format!("symbolic factorization failed: {e:?}")))?;
        Ok(Factor {
            symbolic,
            k: qp.p.clone(),
        })
    }

    fn factor(&mut self, qp: &Qp, diag: &[f64]) -> Result<Llt<usize, f64>> {
        let vals = self.k.val_mut();
        vals.copy_from_slice(qp.p.val());
        for (j, &pos) in qp.diag_pos.iter().enumerate() {
            vals[pos] += diag[j];
        }
        Llt::try_new_with_symbolic(self.symbolic.clone(), self.k.as_ref(), Side::Lower)
            .map_err(|e| OptError::Internal(format!("Cholesky factorization failed: {e:?}")))
    }
}

fn solve(llt: &Llt<usize, f64>, b: &[f64]) -> Vec<f64> {
    let col = Col::<f64>::from_fn(b.len(), |i| b[i]);
    let x = llt.solve(&col);
    (0..b.len()).map(|i| x[i]).collect()
}

/// Mehrotra predictor-corrector interior-point method. Each iteration
/// factors `P + X⁻¹Z` once and eliminates the single equality row.
pub fn solve_qp(qp: &Qp, opts: &QpOptions) -> Result<QpSolution> {
    let n = qp.n;
    let asum: f64 = qp.a.iter().sum();
    if qp.a.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(OptError::Config("equality row must be strictly positive".into()));
    }
    let mut x = vec![1.0 / asum; n];
    let mut y = 0.0;
    let mut z = vec![1.0; n];
    let mut factor = Factor::new(qp)?;
    let mut best = (f64::INFINITY, x.clone());

    for iter in 0..opts.max_iter {
        let (res, rd, rp) = qp.residual(&x, y, &z);
        if res < best.0 {
            best = (res, x.clone());
        }
        if res <= opts.tol {
            return Ok(finish(qp, x, res, iter));
        }
        let mu = dot(&x, &z) / n as f64;
        let diag: Vec<f64> = (0..n).map(|i| z[i] / x[i]).collect();
        let llt = factor.factor(qp, &diag)?;
        let w = solve(&llt, &qp.a);
        let aw = dot(&qp.a, &w);

        let direction = |rc: &[f64]| {
            let b: Vec<f64> = (0..n).map(|i| -rd[i] + rc[i] / x[i]).collect();
            let u = solve(&llt, &b);
            let dy = (-rp - dot(&qp.a, &u)) / aw;
            let dx: Vec<f64> = (0..n).map(|i| u[i] + w[i] * dy).collect();
            let dz: Vec<f64> = (0..n).map(|i| (rc[i] - z[i] * dx[i]) / x[i]).collect();
            (dx, dy, dz)
        };

        let rc_aff: Vec<f64> = (0..n).map(|i| -x[i] * z[i]).collect();
        let (dx_a, _, dz_a) = direction(&rc_aff);
        let t_a = step_to_boundary(&x, &dx_a).min(step_to_boundary(&z, &dz_a));
        let mu_aff = (0..n)
            .map(|i| (x[i] + t_a * dx_a[i]) * (z[i] + t_a * dz_a[i]))
            .sum::<f64>()
            / n as f64;
        let sigma = (mu_aff / mu).powi(3).min(1.0);

        let rc: Vec<f64> = (0..n)
            .map(|i| sigma * mu - x[i] * z[i] - dx_a[i] * dz_a[i])
            .collect();
        let (dx, dy, dz) = direction(&rc);
        let t = (0.995 * step_to_boundary(&x, &dx).min(step_to_boundary(&z, &dz))).min(1.0);
        for i in 0..n {
            x[i] += t * dx[i];
            z[i] += t * dz[i];
        }
        y += t * dy;
        if x.iter().chain(&z).any(|v| !v.is_finite()) {
            break;
        }
    }
    let (res, _, _) = qp.residual(&x, y, &z);
    if res < best.0 {
        best = (res, x);
    }
    Err(OptError::NoConvergence {
        iterations: opts.max_iter,
        residual: best.0,
        best: best.1,
    })
}

fn finish(qp: &Qp, mut x: Vec<f64>, residual: f64, iterations: usize) -> QpSolution {
    for v in &mut x {
        *v = v.max(0.0);
    }
    let mass = dot(&qp.a, &x);
    for v in &mut x {
        *v /= mass;
    }
    QpSolution {
        objective: qp.objective(&x),
        c: x,
        residual,
        iterations,
    }
}

/// Fidelity to the leaf densities plus `lambda` times the flatness penalty:
///
/// ```text
/// Σ_Δ μ(Δ)⁻² (∫_Δ f − ρ_leaf μ(Δ))²  +  λ Σ_Δ (μ*(Δ) / μ(Δ))²
/// ```
///
/// where `μ*` is the volume of the graph of `f` over `Δ`.
pub fn assemble_qp(tri: &Triangulation, partition: &GradedPartition, lambda: f64) -> Result<Qp> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(OptError::Config(format!("smoothness weight must be non-negative, got {lambda}")));
    }
    let p = tri.dims();
    let k = p + 1;
    let n = tri.vertex_count();
    let ns = tri.simplex_count();
    let mut entries = Vec::with_capacity(ns * k * k * if lambda > 0.0 { 2 } else { 1 });
    let mut r = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut constant = 0.0;
    let s = 1.0 / k as f64;
    for j in 0..ns {
        let verts = tri.simplex(j);
        let rho = partition.leaf_density(tri.leaf_of(j));
        let mu = tri.volume(j);
        for &u in verts {
            a[u as usize] += mu * s;
            r[u as usize] -= 2.0 * rho * s;
            for &v in verts {
                entries.push((u as usize, v as usize, 2.0 * s * s));
            }
        }
        constant += rho * rho;
        if lambda > 0.0 {
            let g = gradient_operator(&tri.simplex_vertices(j))?;
            let h = g.transpose() * g;
            for (a_i, &u) in verts.iter().enumerate() {
                for (b_i, &v) in verts.iter().enumerate() {
                    entries.push((u as usize, v as usize, 2.0 * lambda * h[(a_i, b_i)]));
                }
            }
            constant += lambda;
        }
    }
    Qp::new(n, &entries, r, a, constant)
}
