//! Hellinger distance by importance sampling.
//!
//! `H² = 1 − ∫√(fg) = 1 − E_q[√(f g) / q]`. The default proposal is the
//! equal mixture of `f` and `g`, drawn as two stratified halves, which keeps
//! every weight below 1 wherever `f g > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{OptError, Result};

use super::Density;

pub const DEFAULT_HELLINGER_SAMPLES: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HellingerEstimate {
    pub distance: f64,
    /// Delta-method standard error of `distance`.
    pub std_error: f64,
    /// Unclamped estimate of `H²`.
    pub squared: f64,
    pub squared_std_error: f64,
    pub samples: usize,
}

impl HellingerEstimate {
    fn from_squared(squared: f64, se2: f64, samples: usize) -> HellingerEstimate {
        let distance = squared.clamp(0.0, 1.0).sqrt();
        let std_error = if distance > 0.0 {
            se2 / (2.0 * distance)
        } else {
            se2.sqrt()
        };
        HellingerEstimate {
            distance,
            std_error,
            squared,
            squared_std_error: se2,
            samples,
        }
    }
}

#[derive(Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    /// Variance of the mean.
    fn var_of_mean(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            self.m2 / (self.n - 1.0) / self.n
        }
    }
}

fn check_dims(f: &dyn Density, g: &dyn Density) -> Result<()> {
    if f.dims() != g.dims() {
        return Err(OptError::Config(format!(
            "cannot compare densities of dimension {} and {}",
            f.dims(),
            g.dims()
        )));
    }
    Ok(())
}

/// Mixture-proposal estimate from `m` draws (`m/2` from each density).
pub fn hellinger(f: &dyn Density, g: &dyn Density, m: usize, seed: u64) -> Result<HellingerEstimate> {
    check_dims(f, g)?;
    if m < 2 {
        return Err(OptError::Config("need at least two importance samples".into()));
    }
    let half = m / 2;
    let mut strata = [Moments::default(), Moments::default()];
    let draws = [f.sample(seed, half), g.sample(seed ^ 0x9e37_79b9_7f4a_7c15, m - half)];
    for (stratum, xs) in strata.iter_mut().zip(&draws) {
        for x in xs {
            let (a, b) = (f.density(x), g.density(x));
            let q = 0.5 * (a + b);
            stratum.push(if q > 0.0 { (a * b).sqrt() / q } else { 0.0 });
        }
    }
    let bc = 0.5 * (strata[0].mean + strata[1].mean);
    let se = 0.5 * (strata[0].var_of_mean() + strata[1].var_of_mean()).sqrt();
    Ok(HellingerEstimate::from_squared(1.0 - bc, se, m))
}

/// Estimate with an arbitrary proposal `q`, which must be positive wherever
/// `f g > 0`.
pub fn hellinger_with_proposal(
    f: &dyn Density,
    g: &dyn Density,
    q: &dyn Density,
    m: usize,
    seed: u64,
) -> Result<HellingerEstimate> {
    check_dims(f, g)?;
    check_dims(f, q)?;
    if m < 2 {
        return Err(OptError::Config("need at least two importance samples".into()));
    }
    let mut acc = Moments::default();
    for x in q.sample(seed, m) {
        let fg = f.density(&x) * g.density(&x);
        let qx = q.density(&x);
        if fg > 0.0 && !(qx > 0.0) {
            return Err(OptError::Domain(format!(
                "proposal density is zero at {x:?} where both densities are positive"
            )));
        }
        acc.push(if fg > 0.0 { fg.sqrt() / qx } else { 0.0 });
    }
    Ok(HellingerEstimate::from_squared(1.0 - acc.mean, acc.var_of_mean().sqrt(), m))
}
