//! OPT prior hyperparameters, Dirichlet normalizers and prior draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dataset::Transform;
use crate::error::{OptError, Result};
use crate::geometry::{Region, MAX_CODE_LEN};
use crate::pcdensity::{grow, Growth, HmapTree};

pub const DEFAULT_RHO: f64 = 0.5;
pub const DEFAULT_ALPHA: [f64; 2] = [0.5, 0.5];
/// Maximum partition-tree level explored by inference.
pub const DEFAULT_MAX_LEVEL: u32 = 40;
pub const DEFAULT_MIN_COUNT: usize = 5;
pub const DEFAULT_MIN_VOLUME: f64 = 9.313225746154785e-10; // 2^-30

/// Hyperparameters shared by every region: stopping probability `rho`,
/// uniform split-direction weights `1/p`, and Dirichlet parameters `alpha`
/// for the two halves of a midpoint split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptPrior {
    pub rho: f64,
    pub alpha: [f64; 2],
    /// Regions at this tree level are closed with the uniform likelihood.
    pub depth_cap: u32,
    /// Early-closure threshold on the sample count (NI mode).
    pub min_count: usize,
    /// Early-closure threshold on region volume (NI mode).
    pub min_volume: f64,
}

impl Default for OptPrior {
    fn default() -> Self {
        OptPrior {
            rho: DEFAULT_RHO,
            alpha: DEFAULT_ALPHA,
            depth_cap: DEFAULT_MAX_LEVEL,
            min_count: DEFAULT_MIN_COUNT,
            min_volume: DEFAULT_MIN_VOLUME,
        }
    }
}

impl OptPrior {
    pub fn with_depth_cap(mut self, cap: u32) -> Self {
        self.depth_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(OptError::Config(format!(
                "stopping probability must lie strictly inside (0, 1), got {}",
                self.rho
            )));
        }
        if self.alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(OptError::Config(format!(
                "Dirichlet parameters must be positive, got {:?}",
                self.alpha
            )));
        }
        if self.depth_cap > MAX_CODE_LEN {
            return Err(OptError::Config(format!(
                "depth cap {} exceeds {MAX_CODE_LEN}",
                self.depth_cap
            )));
        }
        if !(self.min_volume > 0.0 && self.min_volume.is_finite()) {
            return Err(OptError::Config(format!(
                "minimum volume must be positive, got {}",
                self.min_volume
            )));
        }
        Ok(())
    }

    /// Prior weight of each split direction.
    pub fn selection_weight(&self, p: usize) -> f64 {
        1.0 / p as f64
    }

    /// With symmetric `alpha`, a region holding at most one sample has
    /// `Φ(A) = μ(A)^-n` exactly, whatever happens below it.
    pub fn small_region_closed_form(&self) -> bool {
        self.alpha[0] == self.alpha[1]
    }

    /// Posterior-mean mass split given child counts.
    pub fn posterior_mean_split(&self, counts: [usize; 2]) -> [f64; 2] {
        let a = self.alpha[0] + counts[0] as f64;
        let b = self.alpha[1] + counts[1] as f64;
        let lo = a / (a + b);
        [lo, 1.0 - lo]
    }
}

/// `log D(t) = Σ log Γ(t_i) − log Γ(Σ t_i)`.
pub fn log_d(t: &[f64]) -> Result<f64> {
    if t.is_empty() {
        return Err(OptError::Domain("D(t) needs at least one entry".into()));
    }
    if let Some(bad) = t.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(OptError::Domain(format!("D(t) requires positive entries, got {bad}")));
    }
    let sum: f64 = t.iter().sum();
    Ok(t.iter().map(|&v| ln_gamma(v)).sum::<f64>() - ln_gamma(sum))
}

/// Log-likelihood of `n` points uniform on `region`: `−n log μ(A)`.
#[inline]
pub fn log_uniform_likelihood(region: &Region, n: usize) -> f64 {
    -(n as f64) * region.log_volume()
}

/// Tabulated `log D(n + α) − log D(α)` for integer counts up to a bound.
#[derive(Clone, Debug)]
pub struct LogDirichletRatio {
    alpha: [f64; 2],
    lg_a: Vec<f64>,
    lg_b: Vec<f64>,
    lg_ab: Vec<f64>,
    base: f64,
}

impl LogDirichletRatio {
    pub fn new(alpha: [f64; 2], max_count: usize) -> LogDirichletRatio {
        let lg_a: Vec<f64> = (0..=max_count).map(|k| ln_gamma(k as f64 + alpha[0])).collect();
        let lg_b: Vec<f64> = (0..=max_count).map(|k| ln_gamma(k as f64 + alpha[1])).collect();
        let lg_ab: Vec<f64> = (0..=max_count)
            .map(|k| ln_gamma(k as f64 + alpha[0] + alpha[1]))
            .collect();
        let base = lg_a[0] + lg_b[0] - lg_ab[0];
        LogDirichletRatio {
            alpha,
            lg_a,
            lg_b,
            lg_ab,
            base,
        }
    }

    pub fn alpha(&self) -> [f64; 2] {
        self.alpha
    }

    /// Largest total count the table covers.
    pub fn max_count(&self) -> usize {
        self.lg_a.len() - 1
    }

    #[inline]
    pub fn get(&self, lower: usize, upper: usize) -> f64 {
        self.lg_a[lower] + self.lg_b[upper] - self.lg_ab[lower + upper] - self.base
    }
}

/// Draws a random piecewise-constant density from the prior, truncated at
/// tree level `depth_cap`.
pub fn sample_prior(prior: &OptPrior, p: usize, seed: u64, depth_cap: u32) -> Result<HmapTree> {
    prior.validate()?;
    if depth_cap > MAX_CODE_LEN {
        return Err(OptError::Config(format!("depth cap {depth_cap} exceeds {MAX_CODE_LEN}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = Beta::new(prior.alpha[0], prior.alpha[1])
        .map_err(|e| OptError::Config(format!("invalid Dirichlet parameters: {e}")))?;
    grow(p, Transform::identity(p), (), |region, ()| {
        if region.level() >= depth_cap || rng.random::<f64>() < prior.rho {
            return Ok(Growth::Leaf);
        }
        let dim = rng.random_range(0..p);
        let theta: f64 = beta.sample(&mut rng);
        Ok(Growth::Split {
            dim,
            theta: [theta, 1.0 - theta],
            lower: (),
            upper: (),
        })
    })
}
