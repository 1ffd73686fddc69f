//! Reference densities, Hellinger distances, replicate experiments and
//! timing benchmarks.

pub mod experiment;
pub mod hellinger;
pub mod reference;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{OptError, Result};
use crate::fee::FeeDensity;
use crate::pcdensity::HmapTree;

pub use experiment::{
    bench_scaling, run_experiment, BenchCell, BenchConfig, BenchTable, CellStatus, ExperimentConfig,
    ExperimentReport, FittedDensity, Method, Metric, ReplicateResult, Summary,
};
pub use hellinger::{hellinger, hellinger_with_proposal, HellingerEstimate, DEFAULT_HELLINGER_SAMPLES};
pub use reference::{reference, ReferenceDensity, ReferenceId};

/// A density in data coordinates that can also draw from itself.
pub trait Density: Sync {
    fn dims(&self) -> usize;
    fn density(&self, x: &[f64]) -> f64;
    /// `m` independent draws, reproducible from `seed`.
    fn sample(&self, seed: u64, m: usize) -> Vec<Vec<f64>>;
}

impl Density for HmapTree {
    fn dims(&self) -> usize {
        HmapTree::dims(self)
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    fn sample(&self, seed: u64, m: usize) -> Vec<Vec<f64>> {
        HmapTree::sample(self, seed, m)
    }
}

impl Density for FeeDensity {
    fn dims(&self) -> usize {
        FeeDensity::dims(self)
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    fn sample(&self, seed: u64, m: usize) -> Vec<Vec<f64>> {
        FeeDensity::sample(self, seed, m)
    }
}

/// Uniform density on an axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    height: f64,
}

impl UniformBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<UniformBox> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(OptError::Config("box corners must have the same positive length".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(OptError::Config("box must have finite lower < upper in every dimension".into()));
        }
        let volume: f64 = lower.iter().zip(&upper).map(|(a, b)| b - a).product();
        Ok(UniformBox {
            lower,
            upper,
            height: 1.0 / volume,
        })
    }
}

impl Density for UniformBox {
    fn dims(&self) -> usize {
        self.lower.len()
    }

    fn density(&self, x: &[f64]) -> f64 {
        let inside = x.len() == self.lower.len()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| a <= v && v <= b);
        if inside {
            self.height
        } else {
            0.0
        }
    }

    fn sample(&self, seed: u64, m: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| self.lower.iter().zip(&self.upper).map(|(a, b)| rng.random_range(*a..*b)).collect())
            .collect()
    }
}
