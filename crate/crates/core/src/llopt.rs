//! hMAP trees from the exact recursion and from limited lookahead.
//!
//! The exact fit memoizes `Φ` over the whole partition tree and reads the
//! hMAP decisions off the cached values. The limited-lookahead fit evaluates
//! `Φ` only `h` levels below each frontier region, closing deeper regions
//! with the uniform likelihood, commits one decision, and moves on to the
//! children with a fresh memo.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{OptError, Result};
use crate::geometry::Region;
use crate::pcdensity::{grow, Growth, HmapTree};
use crate::phi::{Budget, Mode, PhiEngine, PhiRecord};
use crate::prior::{LogDirichletRatio, OptPrior};

/// hMAP decision for one region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Stop,
    Split(usize),
}

/// Stop iff `ρ(A|x) ≥ 1/2`, else split along the most probable direction,
/// ties going to the lowest index.
pub fn hmap_decide(record: &PhiRecord) -> Decision {
    if record.closure.is_some() || record.rho_post >= 0.5 || record.lambda_post.is_empty() {
        return Decision::Stop;
    }
    let mut best = 0;
    for (j, &l) in record.lambda_post.iter().enumerate() {
        if l > record.lambda_post[best] {
            best = j;
        }
    }
    Decision::Split(best)
}

/// `Φ` record of `region` with every region `h` levels below it closed
/// with the uniform likelihood.
pub fn lookahead_phi(
    samples: &SampleSet,
    prior: &OptPrior,
    region: &Region,
    members: &[u32],
    h: u32,
) -> Result<PhiRecord> {
    let mut engine = PhiEngine::new(samples, prior, Mode::Cached)?.with_lookahead(region.level(), h);
    engine.record(region, members)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// `Cached` for plain OPT, `DepthFirst` for the unmemoized recursion,
    /// `Ni` for early closure of small regions.
    pub mode: Mode,
    pub budget: Budget,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            mode: Mode::Cached,
            budget: Budget::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub expansions: u64,
    /// One more than the deepest expanded level.
    pub max_depth: u32,
    /// Largest memo size reached by a single engine.
    pub cache_entries: usize,
    /// `log Φ(Ω)`; under lookahead, the value with closure `h` levels down.
    pub root_log_phi: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Fit {
    pub tree: HmapTree,
    pub stats: FitStats,
}

/// Turns a record into a growth step, partitioning the members.
fn commit(
    samples: &SampleSet,
    prior: &OptPrior,
    region: &Region,
    members: Vec<u32>,
    record: &PhiRecord,
) -> Growth<Vec<u32>> {
    match hmap_decide(record) {
        Decision::Stop => Growth::Leaf,
        Decision::Split(dim) => {
            let (lower, upper) = samples.partition(region, dim, &members);
            let a = record.alpha_post[dim];
            let theta = prior.posterior_mean_split([lower.len(), upper.len()]);
            debug_assert!((theta[0] - a[0] / (a[0] + a[1])).abs() < 1e-12);
            Growth::Split {
                dim,
                theta,
                lower,
                upper,
            }
        }
    }
}

pub fn exact_hmap_fit(samples: &SampleSet, prior: &OptPrior) -> Result<HmapTree> {
    Ok(exact_hmap_fit_with(samples, prior, &FitOptions::default())?.tree)
}

/// Full recursion from the root, then hMAP decisions top-down.
pub fn exact_hmap_fit_with(samples: &SampleSet, prior: &OptPrior, opts: &FitOptions) -> Result<Fit> {
    let started = Instant::now();
    let mut engine = PhiEngine::new(samples, prior, opts.mode)?.with_budget(opts.budget);
    let root_log_phi = engine.log_phi_root()?;
    let tree = grow(
        samples.dims(),
        samples.transform().clone(),
        samples.all_members(),
        |region, members| {
            let record = engine.record(region, &members)?;
            Ok(commit(samples, prior, region, members, &record))
        },
    )?;
    let stats = engine.stats();
    Ok(Fit {
        tree,
        stats: FitStats {
            expansions: stats.expansions,
            max_depth: stats.max_depth,
            cache_entries: engine.cache().len(),
            root_log_phi,
            seconds: started.elapsed().as_secs_f64(),
        },
    })
}

pub fn llopt_fit(samples: &SampleSet, prior: &OptPrior, h: u32) -> Result<HmapTree> {
    Ok(llopt_fit_with(samples, prior, h, &FitOptions::default())?.tree)
}

/// Limited-lookahead fit committing one level per frontier region.
pub fn llopt_fit_with(samples: &SampleSet, prior: &OptPrior, h: u32, opts: &FitOptions) -> Result<Fit> {
    if h == 0 {
        return Err(OptError::Config("lookahead depth h must be at least 1".into()));
    }
    if opts.mode == Mode::DepthFirst {
        return Err(OptError::Config(
            "limited lookahead always memoizes within a frontier; use cached or ni mode".into(),
        ));
    }
    let started = Instant::now();
    prior.validate()?;
    let table = Arc::new(LogDirichletRatio::new(prior.alpha, samples.len()));
    let mut stats = FitStats::default();
    let tree = grow(
        samples.dims(),
        samples.transform().clone(),
        samples.all_members(),
        |region, members| {
            let mut budget = opts.budget;
            if let Some(secs) = budget.max_seconds {
                let left = secs - started.elapsed().as_secs_f64();
                if left <= 0.0 {
                    return Err(OptError::Resource(format!("time budget of {secs} s exhausted")));
                }
                budget.max_seconds = Some(left);
            }
            let mut engine = PhiEngine::with_table(samples, prior, opts.mode, table.clone())?
                .with_lookahead(region.level(), h)
                .with_budget(budget);
            let record = engine.record(region, &members)?;
            if region.level() == 0 {
                stats.root_log_phi = record.log_phi;
            }
            let s = engine.stats();
            stats.expansions += s.expansions;
            stats.max_depth = stats.max_depth.max(s.max_depth);
            stats.cache_entries = stats.cache_entries.max(engine.cache().len());
            Ok(commit(samples, prior, region, members, &record))
        },
    )?;
    stats.seconds = started.elapsed().as_secs_f64();
    Ok(Fit { tree, stats })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum StopRule {
    /// Stop once two successive lookahead depths give the same partition.
    #[default]
    IdenticalTwice,
    /// Stop once successive fits are within `tau` in Hellinger distance.
    Hellinger { tau: f64 },
    /// Keep increasing `h` until the resource budget or `max_h` is reached.
    Budget,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOptions {
    pub rule: StopRule,
    pub max_h: u32,
    pub fit: FitOptions,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            rule: StopRule::IdenticalTwice,
            max_h: 8,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveFit {
    pub tree: HmapTree,
    /// Lookahead depth of the returned tree.
    pub h: u32,
    /// Lookahead depth at which the sweep ended.
    pub stopped_at: u32,
    /// The stop rule fired (as opposed to hitting `max_h` or the budget).
    pub converged: bool,
    pub budget_exhausted: bool,
    pub seconds: f64,
}

/// Runs `h = 1, 2, …` until the stop rule fires. When it fires at `h`, the
/// tree for `h − 1` is returned.
pub fn adaptive_h_fit(samples: &SampleSet, prior: &OptPrior, opts: &AdaptiveOptions) -> Result<AdaptiveFit> {
    if opts.max_h == 0 {
        return Err(OptError::Config("max_h must be at least 1".into()));
    }
    if let StopRule::Hellinger { tau } = opts.rule {
        if !(tau >= 0.0) {
            return Err(OptError::Config(format!("tau must be non-negative, got {tau}")));
        }
    }
    let started = Instant::now();
    let mut prev: Option<HmapTree> = None;
    let mut h = 1;
    loop {
        let mut fit_opts = opts.fit.clone();
        if let Some(secs) = fit_opts.budget.max_seconds {
            fit_opts.budget.max_seconds = Some((secs - started.elapsed().as_secs_f64()).max(0.0));
        }
        let tree = match llopt_fit_with(samples, prior, h, &fit_opts) {
            Ok(fit) => fit.tree,
            Err(OptError::Resource(msg)) => {
                let Some(best) = prev else {
                    return Err(OptError::Resource(msg));
                };
                return Ok(AdaptiveFit {
                    tree: best,
                    h: h - 1,
                    stopped_at: h,
                    converged: false,
                    budget_exhausted: true,
                    seconds: started.elapsed().as_secs_f64(),
                });
            }
            Err(e) => return Err(e),
        };
        if let Some(p) = &prev {
            let fired = match opts.rule {
                StopRule::IdenticalTwice => tree.same_partition(p),
                StopRule::Hellinger { tau } => tree.hellinger(p)? <= tau,
                StopRule::Budget => false,
            };
            if fired {
                return Ok(AdaptiveFit {
                    tree: prev.unwrap(),
                    h: h - 1,
                    stopped_at: h,
                    converged: true,
                    budget_exhausted: false,
                    seconds: started.elapsed().as_secs_f64(),
                });
            }
        }
        if h >= opts.max_h {
            return Ok(AdaptiveFit {
                tree,
                h,
                stopped_at: h,
                converged: false,
                budget_exhausted: false,
                seconds: started.elapsed().as_secs_f64(),
            });
        }
        prev = Some(tree);
        h += 1;
    }
}
