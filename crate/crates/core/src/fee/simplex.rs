//! Volume, integral and top-face quantities of a single p-simplex.

use nalgebra::DMatrix;

use crate::error::{OptError, Result};

/// Relative volume below which a simplex counts as degenerate.
const DEGENERATE_RTOL: f64 = 1e-14;

fn factorial(p: usize) -> f64 {
    (1..=p).map(|k| k as f64).product()
}

/// `|det([v_i, 1])| / p!` for `p + 1` vertices in `R^p`.
pub fn simplex_volume(vertices: &[&[f64]]) -> Result<f64> {
    let p = check_shape(vertices)?;
    let m = DMatrix::from_fn(p + 1, p + 1, |i, j| if j < p { vertices[i][j] } else { 1.0 });
    let vol = m.determinant().abs() / factorial(p);
    let scale = edge_scale(vertices).powi(p as i32) / factorial(p);
    if !(vol > DEGENERATE_RTOL * scale) {
        return Err(OptError::Degenerate { volume: vol });
    }
    Ok(vol)
}

fn check_shape(vertices: &[&[f64]]) -> Result<usize> {
    let p = vertices.len().saturating_sub(1);
    if p == 0 || vertices.iter().any(|v| v.len() != p) {
        return Err(OptError::Config(format!(
            "a simplex in R^p needs p + 1 points of length p, got {} points",
            vertices.len()
        )));
    }
    Ok(p)
}

fn edge_scale(vertices: &[&[f64]]) -> f64 {
    let v0 = vertices[0];
    vertices[1..]
        .iter()
        .map(|v| v.iter().zip(v0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// `∫_Δ f` for the linear function with vertex values `c`.
pub fn simplex_integral(volume: f64, c: &[f64]) -> f64 {
    volume / c.len() as f64 * c.iter().sum::<f64>()
}

/// Gradient operator of the linear interpolant: `∇f = G c` with `G` of
/// shape `p × (p + 1)`.
pub fn gradient_operator(vertices: &[&[f64]]) -> Result<DMatrix<f64>> {
    let p = check_shape(vertices)?;
    let a = DMatrix::from_fn(p, p, |i, j| vertices[i + 1][j] - vertices[0][j]);
    let inv = a.clone().try_inverse().ok_or(OptError::Degenerate {
        volume: a.determinant().abs() / factorial(p),
    })?;
    let e = DMatrix::from_fn(p, p + 1, |i, j| {
        if j == 0 {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    Ok(inv * e)
}

/// `μ*(Δ)² = μ(Δ)² (1 + |∇f|²)` as `constant + cᵀ H c`.
#[derive(Clone, Debug)]
pub struct TopFaceSq {
    pub constant: f64,
    /// `(p + 1) × (p + 1)`, symmetric positive semidefinite.
    pub quadratic: DMatrix<f64>,
}

impl TopFaceSq {
    pub fn value(&self, c: &[f64]) -> f64 {
        let n = c.len();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += c[i] * self.quadratic[(i, j)] * c[j];
            }
        }
        self.constant + q
    }
}

/// Squared volume of the top face `{(x, f(x)) : x ∈ Δ}` of the graph of
/// the linear interpolant.
pub fn top_face_sq(vertices: &[&[f64]]) -> Result<TopFaceSq> {
    let mu = simplex_volume(vertices)?;
    let g = gradient_operator(vertices)?;
    Ok(TopFaceSq {
        constant: mu * mu,
        quadratic: g.transpose() * g * (mu * mu),
    })
}

/// Barycentric coordinates of `x` in the simplex; `None` if degenerate.
pub fn barycentric(vertices: &[&[f64]], x: &[f64]) -> Option<Vec<f64>> {
    let p = x.len();
    let a = DMatrix::from_fn(p, p, |i, j| vertices[j + 1][i] - vertices[0][i]);
    let rhs = nalgebra::DVector::from_fn(p, |i, _| x[i] - vertices[0][i]);
    let sol = a.lu().solve(&rhs)?;
    let mut out = Vec::with_capacity(p + 1);
    out.push(1.0 - sol.iter().sum::<f64>());
    out.extend(sol.iter());
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `μ*` from the Gram determinant of the lifted edge vectors.
    fn top_face_gram(vertices: &[&[f64]], c: &[f64]) -> f64 {
        let p = vertices.len() - 1;
        let edges: Vec<Vec<f64>> = (1..=p)
            .map(|i| {
                let mut e: Vec<f64> = vertices[i].iter().zip(vertices[0]).map(|(a, b)| a - b).collect();
                e.push(c[i] - c[0]);
                e
            })
            .collect();
        let gram = DMatrix::from_fn(p, p, |i, j| edges[i].iter().zip(&edges[j]).map(|(a, b)| a * b).sum::<f64>());
        gram.determinant().sqrt() / factorial(p)
    }

    #[test]
    fn volumes() {
        let v: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]];
        assert!((simplex_volume(&v).unwrap() - 0.5).abs() < 1e-15);
        let unit3: [&[f64]; 4] = [&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]];
        assert!((simplex_volume(&unit3).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        let line: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]];
        assert!(matches!(simplex_volume(&line), Err(OptError::Degenerate { .. })));
        let bad: [&[f64]; 2] = [&[0.0, 0.0], &[1.0, 1.0]];
        assert!(simplex_volume(&bad).is_err());
    }

    #[test]
    fn integrals() {
        assert!((simplex_integral(0.5, &[1.0, 1.0, 1.0]) - 0.5).abs() < 1e-15);
        assert!((simplex_integral(0.5, &[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(simplex_integral(0.5, &[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn top_face_examples() {
        let seg: [&[f64]; 2] = [&[0.0], &[1.0]];
        let t = top_face_sq(&seg).unwrap();
        assert!((t.value(&[0.0, 1.0]) - 2.0).abs() < 1e-14);
        let tri: [&[f64]; 3] = [&[0.0, 0.0], &[0.5, 0.0], &[0.1, 0.3]];
        let t = top_face_sq(&tri).unwrap();
        let mu = simplex_volume(&tri).unwrap();
        assert!((t.value(&[2.0, 2.0, 2.0]) - mu * mu).abs() < 1e-15);
        let c = [0.3, 1.7, 0.9];
        let s = 3.0;
        let cs: Vec<f64> = c.iter().map(|v| v * s).collect();
        let base = t.value(&c) - mu * mu;
        assert!(((t.value(&cs) - mu * mu) - s * s * base).abs() < 1e-12);
        assert!((t.value(&c).sqrt() - top_face_gram(&tri, &c)).abs() < 1e-12);
    }

    #[test]
    fn barycentric_coordinates() {
        let tri: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]];
        let b = barycentric(&tri, &[0.25, 0.5]).unwrap();
        assert!((b[0] - 0.25).abs() < 1e-15 && (b[1] - 0.25).abs() < 1e-15 && (b[2] - 0.5).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn top_face_matches_gram_route(
            pts in proptest::collection::vec(-1.0f64..1.0, 12),
            c in proptest::collection::vec(0.0f64..5.0, 4),
        ) {
            let v: Vec<&[f64]> = pts.chunks(3).collect();
            if let Ok(t) = top_face_sq(&v) {
                let mu = simplex_volume(&v).unwrap();
                proptest::prop_assume!(mu > 1e-3);
                let direct = top_face_gram(&v, &c);
                let got = t.value(&c).sqrt();
                proptest::prop_assert!((got - direct).abs() <= 1e-8 * direct.max(1.0));
            }
        }
    }
}
