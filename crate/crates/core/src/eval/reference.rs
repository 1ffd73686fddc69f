//! Five benchmark densities with exact evaluators and samplers.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaSampler, Distribution, Gamma as GammaSampler, Normal as NormalSampler};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Gamma, Normal};

use crate::error::{OptError, Result};

use super::Density;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceId {
    /// Uniform strip plus a uniform × Beta(100, 120) strip on `[0,1]^2`.
    Ex1,
    /// `N(0.6, 0.1²) × N(0.4, 0.1²) × U × U` on `[0,1]^4`.
    Ex2,
    /// `Gamma(2, scale 0.1)` truncated to `(0, 1)`.
    Ex3,
    /// `U × (0.8 Beta(2, 10) + 0.2 Beta(7, 2))` on `[0,1]^2`.
    Ex4,
    /// Five-dimensional vector with two linearly mixed coordinates.
    Ex5,
}

impl ReferenceId {
    pub const ALL: [ReferenceId; 5] = [
        ReferenceId::Ex1,
        ReferenceId::Ex2,
        ReferenceId::Ex3,
        ReferenceId::Ex4,
        ReferenceId::Ex5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReferenceId::Ex1 => "ex1",
            ReferenceId::Ex2 => "ex2",
            ReferenceId::Ex3 => "ex3",
            ReferenceId::Ex4 => "ex4",
            ReferenceId::Ex5 => "ex5",
        }
    }

    pub fn dims(self) -> usize {
        match self {
            ReferenceId::Ex1 | ReferenceId::Ex4 => 2,
            ReferenceId::Ex2 => 4,
            ReferenceId::Ex3 => 1,
            ReferenceId::Ex5 => 5,
        }
    }
}

impl fmt::Display for ReferenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReferenceId {
    type Err = OptError;

    fn from_str(s: &str) -> Result<ReferenceId> {
        ReferenceId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| OptError::UnknownReference(s.to_string()))
    }
}

/// Gamma with `shape` and `scale` restricted to `(0, 1)`.
#[derive(Clone, Debug)]
struct TruncatedGamma {
    pdf: Gamma,
    sampler: GammaSampler<f64>,
    mass: f64,
}

impl TruncatedGamma {
    fn new(shape: f64, scale: f64) -> TruncatedGamma {
        let pdf = Gamma::new(shape, 1.0 / scale).expect("valid gamma parameters");
        let mass = pdf.cdf(1.0);
        TruncatedGamma {
            pdf,
            sampler: GammaSampler::new(shape, scale).expect("valid gamma parameters"),
            mass,
        }
    }

    fn density(&self, x: f64) -> f64 {
        if x > 0.0 && x < 1.0 {
            self.pdf.pdf(x) / self.mass
        } else {
            0.0
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.sampler.sample(rng);
            if x < 1.0 {
                return x;
            }
        }
    }
}

fn beta_pdf(b: &Beta, x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        b.pdf(x)
    } else {
        0.0
    }
}

fn in_unit_cube(x: &[f64]) -> bool {
    x.iter().all(|v| (0.0..=1.0).contains(v))
}

#[derive(Clone, Debug)]
enum Parts {
    Ex1 {
        beta: Beta,
        beta_draw: BetaSampler<f64>,
    },
    Ex2 {
        x: Normal,
        y: Normal,
        x_draw: NormalSampler<f64>,
        y_draw: NormalSampler<f64>,
    },
    Ex3 {
        g: TruncatedGamma,
    },
    Ex4 {
        low: Beta,
        high: Beta,
        low_draw: BetaSampler<f64>,
        high_draw: BetaSampler<f64>,
    },
    Ex5 {
        x1: Beta,
        x2: Beta,
        x1_draw: BetaSampler<f64>,
        x2_draw: BetaSampler<f64>,
        x4: TruncatedGamma,
        x5: TruncatedGamma,
    },
}

/// A reference density on `[0,1]^p` with its exact sampler.
#[derive(Clone, Debug)]
pub struct ReferenceDensity {
    id: ReferenceId,
    parts: Parts,
}

const EX1_STRIP_WEIGHT: f64 = 0.35;
const EX1_STRIP_AREA: f64 = 0.012;
const EX1_BETA_WEIGHT: f64 = 0.65;
const EX1_BETA_WIDTH: f64 = 0.15;
const EX4_LOW_WEIGHT: f64 = 0.8;
/// `(3/2)(5/4)`: inverse Jacobian of the two mixed coordinates of ex5.
const EX5_JACOBIAN: f64 = 1.875;

fn beta(a: f64, b: f64) -> (Beta, BetaSampler<f64>) {
    (
        Beta::new(a, b).expect("valid beta parameters"),
        BetaSampler::new(a, b).expect("valid beta parameters"),
    )
}

pub fn reference(id: &str) -> Result<ReferenceDensity> {
    Ok(ReferenceDensity::new(id.parse()?))
}

impl ReferenceDensity {
    pub fn new(id: ReferenceId) -> ReferenceDensity {
        let parts = match id {
            ReferenceId::Ex1 => {
                let (beta, beta_draw) = beta(100.0, 120.0);
                Parts::Ex1 { beta, beta_draw }
            }
            ReferenceId::Ex2 => Parts::Ex2 {
                x: Normal::new(0.6, 0.1).expect("valid normal"),
                y: Normal::new(0.4, 0.1).expect("valid normal"),
                x_draw: NormalSampler::new(0.6, 0.1).expect("valid normal"),
                y_draw: NormalSampler::new(0.4, 0.1).expect("valid normal"),
            },
            ReferenceId::Ex3 => Parts::Ex3 {
                g: TruncatedGamma::new(2.0, 0.1),
            },
            ReferenceId::Ex4 => {
                let (low, low_draw) = beta(2.0, 10.0);
                let (high, high_draw) = beta(7.0, 2.0);
                Parts::Ex4 {
                    low,
                    high,
                    low_draw,
                    high_draw,
                }
            }
            ReferenceId::Ex5 => {
                let (x1, x1_draw) = beta(2.0, 8.0);
                let (x2, x2_draw) = beta(8.0, 2.0);
                Parts::Ex5 {
                    x1,
                    x2,
                    x1_draw,
                    x2_draw,
                    x4: TruncatedGamma::new(2.0, 1.0),
                    x5: TruncatedGamma::new(1.0, 2.0),
                }
            }
        };
        ReferenceDensity { id, parts }
    }

    pub fn id(&self) -> ReferenceId {
        self.id
    }

    pub fn support(&self) -> &'static str {
        match self.id {
            ReferenceId::Ex1 => "[0.78,0.80]x[0.2,0.8] union [0.25,0.4]x[0,1]",
            ReferenceId::Ex2 => "[0,1]^4 (normal tails outside the cube ignored)",
            ReferenceId::Ex3 => "(0,1)",
            ReferenceId::Ex4 => "[0,1]^2",
            ReferenceId::Ex5 => "[0,1]^5, y2 in [y1/3, y1/3 + 2/3], y5 in [y3/5, y3/5 + 4/5]",
        }
    }

    /// Exact density; zero off the support and for points of the wrong length.
    pub fn pdf(&self, x: &[f64]) -> f64 {
        if x.len() != self.id.dims() || !in_unit_cube(x) {
            return 0.0;
        }
        match &self.parts {
            Parts::Ex1 { beta, .. } => {
                let mut f = 0.0;
                if (0.78..=0.80).contains(&x[0]) && (0.2..=0.8).contains(&x[1]) {
                    f += EX1_STRIP_WEIGHT / EX1_STRIP_AREA;
                }
                if (0.25..=0.4).contains(&x[0]) {
                    f += EX1_BETA_WEIGHT / EX1_BETA_WIDTH * beta_pdf(beta, x[1]);
                }
                f
            }
            Parts::Ex2 { x: nx, y: ny, .. } => nx.pdf(x[0]) * ny.pdf(x[1]),
            Parts::Ex3 { g } => g.density(x[0]),
            Parts::Ex4 { low, high, .. } => {
                EX4_LOW_WEIGHT * beta_pdf(low, x[1]) + (1.0 - EX4_LOW_WEIGHT) * beta_pdf(high, x[1])
            }
            Parts::Ex5 { x1, x2, x4, x5, .. } => {
                let v2 = (x[1] - x[0] / 3.0) * 1.5;
                let v5 = (x[4] - x[2] / 5.0) * 1.25;
                beta_pdf(x1, x[0]) * beta_pdf(x2, v2) * x4.density(x[3]) * x5.density(v5) * EX5_JACOBIAN
            }
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match &self.parts {
            Parts::Ex1 { beta_draw, .. } => {
                if rng.random::<f64>() < EX1_STRIP_WEIGHT {
                    vec![rng.random_range(0.78..0.80), rng.random_range(0.2..0.8)]
                } else {
                    vec![rng.random_range(0.25..0.4), beta_draw.sample(rng)]
                }
            }
            Parts::Ex2 { x_draw, y_draw, .. } => loop {
                let x = x_draw.sample(rng);
                let y = y_draw.sample(rng);
                if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
                    return vec![x, y, rng.random(), rng.random()];
                }
            },
            Parts::Ex3 { g } => vec![g.draw(rng)],
            Parts::Ex4 {
                low_draw, high_draw, ..
            } => {
                let y = if rng.random::<f64>() < EX4_LOW_WEIGHT {
                    low_draw.sample(rng)
                } else {
                    high_draw.sample(rng)
                };
                vec![rng.random(), y]
            }
            Parts::Ex5 {
                x1_draw,
                x2_draw,
                x4,
                x5,
                ..
            } => {
                let v1 = x1_draw.sample(rng);
                let v2 = x2_draw.sample(rng);
                let v3: f64 = rng.random();
                let v4 = x4.draw(rng);
                let v5 = x5.draw(rng);
                vec![v1, v1 / 3.0 + 2.0 * v2 / 3.0, v3, v4, v3 / 5.0 + 4.0 * v5 / 5.0]
            }
        }
    }
}

impl Density for ReferenceDensity {
    fn dims(&self) -> usize {
        self.id.dims()
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.pdf(x)
    }

    fn sample(&self, seed: u64, m: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| self.draw(&mut rng)).collect()
    }
}
