//! Marginal likelihood recursion for the optional Pólya tree.
//!
//! For a region `A` holding `n` samples,
//!
//! ```text
//! Φ(A) = ρ μ(A)^-n + (1-ρ) Σ_j λ_j D(n_j + α)/D(α) Φ(A_j,lower) Φ(A_j,upper)
//! ```
//!
//! evaluated in log space. Regions are closed with the uniform likelihood
//! `μ(A)^-n` when they are empty, hold one sample under a symmetric `α`,
//! reach the depth cap, fall under the NI thresholds, or sit at the lookahead
//! horizon.

use std::sync::Arc;
use std::time::Instant;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{OptError, Result};
use crate::geometry::Region;
use crate::prior::{log_uniform_likelihood, LogDirichletRatio, OptPrior};

/// Relative tolerance for cache idempotence checks.
const CACHE_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Memoized by region code.
    Cached,
    /// Plain recursion, no memo.
    DepthFirst,
    /// Memoized, with early uniform closure of small-count or small-volume regions.
    Ni,
}

impl std::str::FromStr for Mode {
    type Err = OptError;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "cached" | "opt" | "exact" => Ok(Mode::Cached),
            "depth-first" | "df" | "df-opt" => Ok(Mode::DepthFirst),
            "ni" | "ni-opt" => Ok(Mode::Ni),
            _ => Err(OptError::Config(format!("unknown inference mode {s:?}"))),
        }
    }
}

/// Why a region was closed with the uniform likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Closure {
    Empty,
    SingleSample,
    DepthCap,
    MinCount,
    MinVolume,
    Lookahead,
}

/// Log marginal likelihood of a region plus its posterior parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiRecord {
    pub log_phi: f64,
    /// Posterior stopping probability; `1` for closed regions.
    pub rho_post: f64,
    /// Posterior split-direction weights, summing to one.
    pub lambda_post: Vec<f64>,
    /// Posterior Dirichlet parameters per split direction.
    pub alpha_post: Vec<[f64; 2]>,
    pub n: usize,
    pub closure: Option<Closure>,
}

/// Memo of `log Φ` keyed by region.
#[derive(Debug, Default)]
pub struct PhiCache {
    map: FxHashMap<Region, f64>,
    pub hits: u64,
    pub misses: u64,
}

impl PhiCache {
    pub fn new() -> PhiCache {
        PhiCache::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&mut self, region: &Region) -> Option<f64> {
        let v = self.map.get(region).copied();
        if v.is_some() {
            self.hits += 1;
        } else {
            self.misses += 1;
        }
        v
    }

    pub fn peek(&self, region: &Region) -> Option<f64> {
        self.map.get(region).copied()
    }

    /// Inserts a value; re-inserting a key must carry the same value.
    pub fn insert(&mut self, region: Region, log_phi: f64) -> Result<()> {
        if let Some(&stored) = self.map.get(&region) {
            let scale = stored.abs().max(log_phi.abs()).max(1.0);
            if (stored - log_phi).abs() > CACHE_RTOL * scale {
                return Err(OptError::CacheConflict {
                    code: region.code(),
                    stored,
                    new: log_phi,
                });
            }
            return Ok(());
        }
        self.map.insert(region, log_phi);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Region, &f64)> {
        self.map.iter()
    }
}

/// Resource limits for one fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_cache_entries: Option<usize>,
    pub max_seconds: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineStats {
    /// Regions whose children were evaluated.
    pub expansions: u64,
    /// Deepest level of an expanded region, plus one.
    pub max_depth: u32,
}

#[inline]
fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct Expansion {
    log_stop: f64,
    split_terms: Vec<f64>,
    counts: Vec<[usize; 2]>,
}

/// Evaluates `Φ` over one dataset under one prior.
pub struct PhiEngine<'a> {
    samples: &'a SampleSet,
    prior: &'a OptPrior,
    mode: Mode,
    /// Closure horizon as an absolute tree level.
    horizon: Option<u32>,
    small_closed_form: bool,
    cache: PhiCache,
    ratios: Arc<LogDirichletRatio>,
    log_stop_weight: f64,
    log_split_weight: f64,
    budget: Budget,
    started: Instant,
    stats: EngineStats,
}

impl<'a> PhiEngine<'a> {
    pub fn new(samples: &'a SampleSet, prior: &'a OptPrior, mode: Mode) -> Result<PhiEngine<'a>> {
        prior.validate()?;
        let table = Arc::new(LogDirichletRatio::new(prior.alpha, samples.len()));
        Self::with_table(samples, prior, mode, table)
    }

    /// Like [`PhiEngine::new`] but reusing a Dirichlet ratio table built for
    /// the same `alpha` and at least `samples.len()` counts.
    pub fn with_table(
        samples: &'a SampleSet,
        prior: &'a OptPrior,
        mode: Mode,
        table: Arc<LogDirichletRatio>,
    ) -> Result<PhiEngine<'a>> {
        prior.validate()?;
        if table.alpha() != prior.alpha || table.max_count() < samples.len() {
            return Err(OptError::Config(
                "Dirichlet ratio table does not match the prior or the sample size".into(),
            ));
        }
        let p = samples.dims();
        Ok(PhiEngine {
            samples,
            prior,
            mode,
            horizon: None,
            small_closed_form: prior.small_region_closed_form(),
            cache: PhiCache::new(),
            ratios: table,
            log_stop_weight: prior.rho.ln(),
            log_split_weight: (1.0 - prior.rho).ln() + prior.selection_weight(p).ln(),
            budget: Budget::default(),
            started: Instant::now(),
            stats: EngineStats::default(),
        })
    }

    /// Closes every region at `level + depth` with the uniform likelihood.
    pub fn with_lookahead(mut self, level: u32, depth: u32) -> Self {
        self.horizon = Some(level.saturating_add(depth));
        self
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    /// Disables the exact closure of single-sample regions, forcing the
    /// recursion down to the depth cap.
    pub fn without_small_region_closure(mut self) -> Self {
        self.small_closed_form = false;
        self
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn cache(&self) -> &PhiCache {
        &self.cache
    }

    pub fn samples(&self) -> &SampleSet {
        self.samples
    }

    pub fn prior(&self) -> &OptPrior {
        self.prior
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn closure(&self, region: &Region, n: usize) -> Option<Closure> {
        if n == 0 {
            return Some(Closure::Empty);
        }
        if n == 1 && self.small_closed_form {
            return Some(Closure::SingleSample);
        }
        let level = region.level();
        if level >= self.prior.depth_cap {
            return Some(Closure::DepthCap);
        }
        if let Some(h) = self.horizon {
            if level >= h {
                return Some(Closure::Lookahead);
            }
        }
        if self.mode == Mode::Ni {
            if n < self.prior.min_count {
                return Some(Closure::MinCount);
            }
            if region.volume() < self.prior.min_volume {
                return Some(Closure::MinVolume);
            }
        }
        None
    }

    fn check_budget(&self) -> Result<()> {
        if let Some(max) = self.budget.max_cache_entries {
            if self.cache.len() > max {
                return Err(OptError::Resource(format!(
                    "cache grew beyond {max} regions; raise the budget or use llopt"
                )));
            }
        }
        if let Some(secs) = self.budget.max_seconds {
            if self.stats.expansions.is_multiple_of(1024) && self.started.elapsed().as_secs_f64() > secs {
                return Err(OptError::Resource(format!(
                    "time budget of {secs} s exhausted after {} expansions",
                    self.stats.expansions
                )));
            }
        }
        Ok(())
    }

    fn memoized(&self) -> bool {
        self.mode != Mode::DepthFirst
    }

    /// `log Φ(region)` given the indices of the samples inside it.
    pub fn log_phi(&mut self, region: &Region, members: &[u32]) -> Result<f64> {
        let n = members.len();
        if self.closure(region, n).is_some() {
            return Ok(log_uniform_likelihood(region, n));
        }
        if self.memoized() {
            if let Some(v) = self.cache.get(region) {
                return Ok(v);
            }
        }
        let e = self.expand(region, members)?;
        let mut terms = Vec::with_capacity(e.split_terms.len() + 1);
        terms.push(e.log_stop);
        terms.extend_from_slice(&e.split_terms);
        let value = log_sum_exp(&terms);
        if self.memoized() {
            self.cache.insert(region.clone(), value)?;
        }
        Ok(value)
    }

    fn expand(&mut self, region: &Region, members: &[u32]) -> Result<Expansion> {
        self.stats.expansions += 1;
        self.stats.max_depth = self.stats.max_depth.max(region.level() + 1);
        self.check_budget()?;
        let n = members.len();
        let p = region.dims();
        let log_stop = self.log_stop_weight + log_uniform_likelihood(region, n);
        let mut split_terms = Vec::with_capacity(p);
        let mut counts = Vec::with_capacity(p);
        for dim in 0..p {
            let (lower, upper) = self.samples.partition(region, dim, members);
            let (nl, nu) = (lower.len(), upper.len());
            let lower_phi = self.log_phi(&region.child(dim, false), &lower)?;
            drop(lower);
            let upper_phi = self.log_phi(&region.child(dim, true), &upper)?;
            split_terms.push(self.log_split_weight + self.ratios.get(nl, nu) + lower_phi + upper_phi);
            counts.push([nl, nu]);
        }
        Ok(Expansion {
            log_stop,
            split_terms,
            counts,
        })
    }

    /// Full posterior record for `region`.
    pub fn record(&mut self, region: &Region, members: &[u32]) -> Result<PhiRecord> {
        let n = members.len();
        let p = region.dims();
        let alpha = self.prior.alpha;
        if let Some(closure) = self.closure(region, n) {
            let counts: Vec<[usize; 2]> = (0..p)
                .map(|dim| {
                    let nl = self.samples.count_lower(region, dim, members);
                    [nl, n - nl]
                })
                .collect();
            return Ok(PhiRecord {
                log_phi: log_uniform_likelihood(region, n),
                rho_post: 1.0,
                lambda_post: vec![self.prior.selection_weight(p); p],
                alpha_post: counts
                    .iter()
                    .map(|c| [alpha[0] + c[0] as f64, alpha[1] + c[1] as f64])
                    .collect(),
                n,
                closure: Some(closure),
            });
        }
        let e = self.expand(region, members)?;
        let mut terms = Vec::with_capacity(p + 1);
        terms.push(e.log_stop);
        terms.extend_from_slice(&e.split_terms);
        let log_phi = log_sum_exp(&terms);
        if self.memoized() {
            self.cache.insert(region.clone(), log_phi)?;
        }
        let log_split_total = log_sum_exp(&e.split_terms);
        let lambda_post = e
            .split_terms
            .iter()
            .map(|t| (t - log_split_total).exp())
            .collect();
        Ok(PhiRecord {
            log_phi,
            rho_post: (e.log_stop - log_phi).exp().min(1.0),
            lambda_post,
            alpha_post: e
                .counts
                .iter()
                .map(|c| [alpha[0] + c[0] as f64, alpha[1] + c[1] as f64])
                .collect(),
            n,
            closure: None,
        })
    }

    /// `log Φ(Ω)` for the whole dataset.
    pub fn log_phi_root(&mut self) -> Result<f64> {
        let members = self.samples.all_members();
        self.log_phi(&Region::root(self.samples.dims()), &members)
    }

    /// Posterior records for every memoized region, recomputed from the
    /// cached children. Regions are visited from the root.
    pub fn dump(&mut self) -> Result<Vec<(Region, PhiRecord)>> {
        let p = self.samples.dims();
        let root = Region::root(p);
        let mut out = Vec::new();
        let mut seen = rustc_hash::FxHashSet::default();
        let mut stack = vec![(root, self.samples.all_members())];
        while let Some((region, members)) = stack.pop() {
            if !seen.insert(region.clone()) {
                continue;
            }
            let rec = self.record(&region, &members)?;
            let open = rec.closure.is_none();
            out.push((region.clone(), rec));
            if open {
                for dim in (0..p).rev() {
                    let (lower, upper) = self.samples.partition(&region, dim, &members);
                    stack.push((region.child(dim, true), upper));
                    stack.push((region.child(dim, false), lower));
                }
            }
        }
        Ok(out)
    }
}

/// One-shot `compute_phi`: the root record under the given mode.
pub fn compute_phi(
    samples: &SampleSet,
    prior: &OptPrior,
    mode: Mode,
    region: &Region,
    members: &[u32],
) -> Result<PhiRecord> {
    let mut engine = PhiEngine::new(samples, prior, mode)?;
    engine.record(region, members)
}

/// JSON form of a posterior dump: region code to record fields.
pub fn dump_json(records: &[(Region, PhiRecord)]) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (region, rec) in records {
        map.insert(
            region.code(),
            serde_json::json!({
                "logphi": rec.log_phi,
                "rho_post": rec.rho_post,
                "lambda_post": rec.lambda_post,
                "alpha_post": rec.alpha_post,
                "n": rec.n,
            }),
        );
    }
    serde_json::Value::Object(map)
}
