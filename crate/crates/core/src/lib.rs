//! Density estimation with the optional Pólya tree prior.
//!
//! Samples are rescaled into the unit cube ([`dataset`]), where the marginal
//! likelihood `Φ` of every dyadic region is computed by recursion ([`phi`]).
//! [`llopt`] turns those values into a hierarchical MAP partition, either
//! exactly or with a bounded lookahead, giving a piecewise-constant density
//! ([`pcdensity`]). [`fee`] smooths that density into a continuous
//! piecewise-linear one on a conforming simplicial mesh, and [`eval`] holds
//! the reference densities and the Hellinger-distance harness.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod eval;
pub mod fee;
pub mod geometry;
pub mod llopt;
pub mod pcdensity;
pub mod phi;
pub mod plot;
pub mod prior;

pub use dataset::{SampleSet, Transform};
pub use error::{OptError, Result};
pub use eval::{hellinger, reference, Density, ReferenceDensity, ReferenceId};
pub use geometry::{PartitionScheme, Region};
pub use llopt::{adaptive_h_fit, exact_hmap_fit, hmap_decide, llopt_fit, Decision, StopRule};
pub use pcdensity::HmapTree;
pub use phi::{compute_phi, Mode, PhiEngine, PhiRecord};
pub use prior::OptPrior;
