//! Replicate experiments and timing grids over the reference densities.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{OptError, Result};
use crate::fee::{fee_fit, FeeDensity, DEFAULT_LAMBDA};
use crate::llopt::{exact_hmap_fit_with, llopt_fit_with, FitOptions};
use crate::pcdensity::HmapTree;
use crate::phi::{Budget, Mode};
use crate::prior::OptPrior;

use super::hellinger::{hellinger, DEFAULT_HELLINGER_SAMPLES};
use super::reference::{ReferenceDensity, ReferenceId};
use super::Density;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// An estimator under test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum Method {
    /// Memoized exact recursion.
    Opt,
    /// Unmemoized exact recursion.
    DfOpt,
    /// Limited lookahead of depth `h`.
    Llopt { h: u32 },
    /// Exact recursion with early closure of small regions.
    NiOpt,
    /// Smoothing of the exact tree, or of the lookahead tree when `h` is set.
    Fee { lambda: f64, h: Option<u32> },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Opt => f.write_str("opt"),
            Method::DfOpt => f.write_str("df-opt"),
            Method::Llopt { h } => write!(f, "llopt(h={h})"),
            Method::NiOpt => f.write_str("ni-opt"),
            Method::Fee { lambda, h: None } => write!(f, "fee(lambda={lambda})"),
            Method::Fee { lambda, h: Some(h) } => write!(f, "fee(lambda={lambda},h={h})"),
        }
    }
}

fn bad_method(s: &str) -> OptError {
    OptError::Config(format!(
        "unknown method {s:?}; expected opt, df-opt, ni-opt, llopt(h=H) or fee(lambda=L[,h=H])"
    ))
}

impl FromStr for Method {
    type Err = OptError;

    /// Accepts `llopt:2`, `llopt(2)`, `llopt(h=2)`, `fee`, `fee:1e-3`,
    /// `fee(lambda=1e-3,h=2)` and the plain names.
    fn from_str(s: &str) -> Result<Method> {
        let t = s.trim();
        let (name, rest) = match t.find([':', '(']) {
            Some(i) => (&t[..i], t[i + 1..].trim_end_matches(')')),
            None => (t, ""),
        };
        let mut lambda = None;
        let mut h = None;
        for (pos, arg) in rest.split([',', ':']).map(str::trim).filter(|a| !a.is_empty()).enumerate() {
            let (key, value) = match arg.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None if name == "fee" && pos == 0 => ("lambda", arg),
                None => ("h", arg),
            };
            match key {
                "h" => h = Some(value.parse::<u32>().map_err(|_| bad_method(s))?),
                "lambda" => lambda = Some(value.parse::<f64>().map_err(|_| bad_method(s))?),
                _ => return Err(bad_method(s)),
            }
        }
        let method = match (name.to_ascii_lowercase().as_str(), lambda, h) {
            ("opt" | "exact", None, None) => Method::Opt,
            ("df-opt" | "df", None, None) => Method::DfOpt,
            ("ni-opt" | "ni", None, None) => Method::NiOpt,
            ("llopt", None, Some(h)) => Method::Llopt { h },
            ("fee", lambda, h) => Method::Fee {
                lambda: lambda.unwrap_or(DEFAULT_LAMBDA),
                h,
            },
            _ => return Err(bad_method(s)),
        };
        Ok(method)
    }
}

/// Output of [`fit_method`].
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum FittedDensity {
    Pc(HmapTree),
    Fee(FeeDensity),
}

impl FittedDensity {
    pub fn leaf_count(&self) -> usize {
        match self {
            FittedDensity::Pc(t) => t.leaf_count(),
            FittedDensity::Fee(f) => f.partition().leaf_count(),
        }
    }

    pub fn total_mass(&self) -> Result<f64> {
        match self {
            FittedDensity::Pc(t) => t.total_mass(),
            FittedDensity::Fee(f) => Ok(f.total_mass()),
        }
    }

    pub fn as_density(&self) -> &dyn Density {
        match self {
            FittedDensity::Pc(t) => t,
            FittedDensity::Fee(f) => f,
        }
    }
}

fn tree_for(method: Method, samples: &SampleSet, prior: &OptPrior, budget: Budget) -> Result<HmapTree> {
    let opts = |mode| FitOptions { mode, budget };
    let fit = match method {
        Method::Opt | Method::Fee { h: None, .. } => exact_hmap_fit_with(samples, prior, &opts(Mode::Cached))?,
        Method::DfOpt => exact_hmap_fit_with(samples, prior, &opts(Mode::DepthFirst))?,
        Method::NiOpt => exact_hmap_fit_with(samples, prior, &opts(Mode::Ni))?,
        Method::Llopt { h } | Method::Fee { h: Some(h), .. } => {
            llopt_fit_with(samples, prior, h, &opts(Mode::Cached))?
        }
    };
    Ok(fit.tree)
}

pub fn fit_method(method: Method, samples: &SampleSet, prior: &OptPrior, budget: Budget) -> Result<FittedDensity> {
    let tree = tree_for(method, samples, prior, budget)?;
    match method {
        Method::Fee { lambda, .. } => Ok(FittedDensity::Fee(fee_fit(&tree, lambda)?)),
        _ => Ok(FittedDensity::Pc(tree)),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Data seed of replicate `r` under base seed `seed`.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    splitmix64(seed ^ splitmix64(r as u64))
}

/// Draws `n` samples from a reference density as a unit-cube sample set.
pub fn simulate(reference: &ReferenceDensity, n: usize, seed: u64) -> Result<SampleSet> {
    SampleSet::unit_cube(&reference.sample(seed, n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub reference: ReferenceId,
    pub method: Method,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub prior: OptPrior,
    pub hellinger_samples: usize,
    /// Applied to every fit separately.
    pub budget: Budget,
    /// Worker threads for replicates; 1 runs them in order.
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn new(reference: ReferenceId, method: Method, n: usize) -> ExperimentConfig {
        ExperimentConfig {
            reference,
            method,
            n,
            replicates: 5,
            seed: 1,
            prior: OptPrior::default(),
            hellinger_samples: DEFAULT_HELLINGER_SAMPLES,
            budget: Budget::default(),
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    pub hellinger: Option<f64>,
    pub std_error: Option<f64>,
    /// Fitting time, excluding simulation and evaluation.
    pub seconds: Option<f64>,
    pub leaves: Option<usize>,
    /// Total mass of the fitted density, as audited by the fit itself.
    pub mass: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub sd: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            mean,
            sd,
            count: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub reference: ReferenceId,
    pub method: Method,
    pub n: usize,
    pub seed: u64,
    pub replicates: Vec<ReplicateResult>,
    pub hellinger: Option<Summary>,
    pub seconds: Option<Summary>,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.replicates.iter().filter(|r| r.error.is_some()).count()
    }
}

fn run_replicate(cfg: &ExperimentConfig, truth: &ReferenceDensity, r: usize) -> ReplicateResult {
    let seed = replicate_seed(cfg.seed, r);
    let mut out = ReplicateResult {
        replicate: r,
        seed,
        hellinger: None,
        std_error: None,
        seconds: None,
        leaves: None,
        mass: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        let samples = simulate(truth, cfg.n, seed)?;
        let started = Instant::now();
        let fitted = fit_method(cfg.method, &samples, &cfg.prior, cfg.budget)?;
        out.seconds = Some(started.elapsed().as_secs_f64());
        out.leaves = Some(fitted.leaf_count());
        out.mass = Some(fitted.total_mass()?);
        let h = hellinger(fitted.as_density(), truth, cfg.hellinger_samples, splitmix64(seed))?;
        out.hellinger = Some(h.distance);
        out.std_error = Some(h.std_error);
        Ok(())
    })();
    if let Err(e) = result {
        out.error = Some(e.to_string());
    }
    out
}

/// Simulates, fits and scores `replicates` datasets. Failing replicates are
/// recorded in the report and left out of the summaries.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.replicates == 0 || cfg.n == 0 {
        return Err(OptError::Config("need at least one replicate of at least one sample".into()));
    }
    if cfg.hellinger_samples < 2 {
        return Err(OptError::Config("need at least two importance samples".into()));
    }
    cfg.prior.validate()?;
    let truth = ReferenceDensity::new(cfg.reference);
    let replicates: Vec<ReplicateResult> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| OptError::Resource(format!("cannot start worker threads: {e}")))?;
        pool.install(|| {
            (0..cfg.replicates)
                .into_par_iter()
                .map(|r| run_replicate(cfg, &truth, r))
                .collect()
        })
    } else {
        (0..cfg.replicates).map(|r| run_replicate(cfg, &truth, r)).collect()
    };
    let hs: Vec<f64> = replicates.iter().filter_map(|r| r.hellinger).collect();
    let ts: Vec<f64> = replicates.iter().filter_map(|r| r.seconds).collect();
    Ok(ExperimentReport {
        reference: cfg.reference,
        method: cfg.method,
        n: cfg.n,
        seed: cfg.seed,
        hellinger: Summary::of(&hs),
        seconds: Summary::of(&ts),
        replicates,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One CSV row per report. Timing columns are left out when
/// `include_timing` is false so that reruns compare byte for byte.
pub fn reports_to_csv(reports: &[ExperimentReport], include_timing: bool) -> String {
    let mut out = String::from("format_version,example,method,n,seed,replicates,failures,hellinger_mean,hellinger_sd");
    if include_timing {
        out.push_str(",seconds_mean,seconds_sd");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(
            out,
            "{REPORT_FORMAT_VERSION},{},\"{}\",{},{},{},{},{},{}",
            r.reference,
            r.method,
            r.n,
            r.seed,
            r.replicates.len(),
            r.failures(),
            fmt_opt(r.hellinger.map(|s| s.mean)),
            fmt_opt(r.hellinger.map(|s| s.sd)),
        );
        if include_timing {
            let _ = write!(
                out,
                ",{},{}",
                fmt_opt(r.seconds.map(|s| s.mean)),
                fmt_opt(r.seconds.map(|s| s.sd))
            );
        }
        out.push('\n');
    }
    out
}

/// Per-replicate CSV rows.
pub fn replicates_to_csv(reports: &[ExperimentReport], include_timing: bool) -> String {
    let mut out = String::from("format_version,example,method,n,replicate,seed,hellinger,std_error,leaves");
    if include_timing {
        out.push_str(",seconds");
    }
    out.push_str(",error\n");
    for r in reports {
        for rep in &r.replicates {
            let _ = write!(
                out,
                "{REPORT_FORMAT_VERSION},{},\"{}\",{},{},{},{},{},{}",
                r.reference,
                r.method,
                r.n,
                rep.replicate,
                rep.seed,
                fmt_opt(rep.hellinger),
                fmt_opt(rep.std_error),
                rep.leaves.map(|l| l.to_string()).unwrap_or_default(),
            );
            if include_timing {
                let _ = write!(out, ",{}", fmt_opt(rep.seconds));
            }
            let err = rep.error.as_deref().unwrap_or("").replace('"', "'");
            let _ = writeln!(out, ",\"{err}\"");
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Seconds,
    Hellinger,
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:>w$}", w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Aligned table with one row per sample size and one column per method;
/// each cell shows the mean with the standard deviation in parentheses, or
/// `*` when no replicate finished.
pub fn render_table(reports: &[ExperimentReport], metric: Metric) -> String {
    let mut methods: Vec<Method> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
        if !ns.contains(&r.n) {
            ns.push(r.n);
        }
    }
    ns.sort_unstable();
    let title = match metric {
        Metric::Seconds => "Running times (in seconds)",
        Metric::Hellinger => "Estimation errors (in Hellinger distance)",
    };
    let mut rows = vec![std::iter::once("n".to_string()).chain(methods.iter().map(|m| m.to_string())).collect()];
    for &n in &ns {
        let mut means = vec![n.to_string()];
        let mut sds = vec![String::new()];
        for m in &methods {
            let summary = reports
                .iter()
                .find(|r| r.n == n && r.method == *m)
                .and_then(|r| match metric {
                    Metric::Seconds => r.seconds,
                    Metric::Hellinger => r.hellinger,
                });
            match summary {
                Some(s) => {
                    means.push(format!("{:.3}", s.mean));
                    sds.push(format!("({:.3})", s.sd));
                }
                None => {
                    means.push("*".into());
                    sds.push(String::new());
                }
            }
        }
        rows.push(means);
        rows.push(sds);
    }
    let replicates = reports.iter().map(|r| r.replicates.len()).max().unwrap_or(0);
    format!(
        "{title}. Average of {replicates} replicates, standard deviation in parentheses; * = no replicate finished.\n{}",
        align(&rows)
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub reference: ReferenceId,
    pub methods: Vec<Method>,
    pub ns: Vec<usize>,
    pub seed: u64,
    pub prior: OptPrior,
    /// Timed fits per cell.
    pub repeats: usize,
    /// Limit for a single fit.
    pub cell_seconds: Option<f64>,
    /// Limit for the whole grid; later cells are skipped once it runs out.
    pub total_seconds: Option<f64>,
}

impl BenchConfig {
    pub fn new(reference: ReferenceId, methods: Vec<Method>, ns: Vec<usize>) -> BenchConfig {
        BenchConfig {
            reference,
            methods,
            ns,
            seed: 1,
            prior: OptPrior::default(),
            repeats: 1,
            cell_seconds: None,
            total_seconds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "detail")]
pub enum CellStatus {
    Done,
    OverBudget,
    /// Not attempted: the grid budget ran out or a smaller `n` was over budget.
    Skipped,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub method: Method,
    pub n: usize,
    /// Mean over the repeats.
    pub seconds: Option<f64>,
    pub status: CellStatus,
}

/// Ratio of lookahead fit times at consecutive depths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HGrowth {
    pub n: usize,
    pub h: u32,
    /// `time(h + 1) / time(h)`.
    pub ratio: f64,
    /// Whether the ratio lies in `[1.2, 2p]`.
    pub within_expected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub format_version: u32,
    pub reference: ReferenceId,
    pub cells: Vec<BenchCell>,
    /// Least-squares slope of log time against log n, per method.
    pub slopes: Vec<(Method, Option<f64>)>,
    pub h_growth: Vec<HGrowth>,
}

fn loglog_slope(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, t)| *t > 0.0)
        .map(|&(n, t)| ((n as f64).ln(), t.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Times every method at every sample size, in order of increasing `n`.
/// Fits are sequential; a method that runs over budget is skipped for the
/// larger sizes.
pub fn bench_scaling(cfg: &BenchConfig) -> Result<BenchTable> {
    if cfg.methods.is_empty() || cfg.ns.is_empty() || cfg.repeats == 0 {
        return Err(OptError::Config("bench needs methods, sample sizes and at least one repeat".into()));
    }
    cfg.prior.validate()?;
    let truth = ReferenceDensity::new(cfg.reference);
    let mut ns = cfg.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    let datasets: Vec<SampleSet> = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| simulate(&truth, n, replicate_seed(cfg.seed, i)))
        .collect::<Result<_>>()?;
    let started = Instant::now();
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        let mut over = false;
        for (data, &n) in datasets.iter().zip(&ns) {
            let left = cfg.total_seconds.map(|t| t - started.elapsed().as_secs_f64());
            if over || left.is_some_and(|l| l <= 0.0) {
                cells.push(BenchCell {
                    method,
                    n,
                    seconds: None,
                    status: CellStatus::Skipped,
                });
                continue;
            }
            let limit = match (cfg.cell_seconds, left) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            let budget = Budget {
                max_seconds: limit,
                ..Budget::default()
            };
            let mut total = 0.0;
            let mut status = CellStatus::Done;
            for _ in 0..cfg.repeats {
                let t0 = Instant::now();
                match fit_method(method, data, &cfg.prior, budget) {
                    Ok(_) => total += t0.elapsed().as_secs_f64(),
                    Err(OptError::Resource(_)) => {
                        status = CellStatus::OverBudget;
                        break;
                    }
                    Err(e) => {
                        status = CellStatus::Failed(e.to_string());
                        break;
                    }
                }
            }
            over = status == CellStatus::OverBudget;
            cells.push(BenchCell {
                method,
                n,
                seconds: (status == CellStatus::Done).then(|| total / cfg.repeats as f64),
                status,
            });
        }
    }
    let slopes = cfg
        .methods
        .iter()
        .map(|&m| {
            let pts: Vec<(usize, f64)> = cells
                .iter()
                .filter(|c| c.method == m)
                .filter_map(|c| c.seconds.map(|t| (c.n, t)))
                .collect();
            (m, loglog_slope(&pts))
        })
        .collect();
    let p = cfg.reference.dims() as f64;
    let mut h_growth = Vec::new();
    for &n in &ns {
        let time = |h: u32| {
            cells
                .iter()
                .find(|c| c.n == n && c.method == Method::Llopt { h })
                .and_then(|c| c.seconds)
        };
        for m in &cfg.methods {
            if let Method::Llopt { h } = *m {
                if let (Some(a), Some(b)) = (time(h), time(h + 1)) {
                    let ratio = b / a;
                    h_growth.push(HGrowth {
                        n,
                        h,
                        ratio,
                        within_expected: (1.2..=2.0 * p).contains(&ratio),
                    });
                }
            }
        }
    }
    Ok(BenchTable {
        format_version: REPORT_FORMAT_VERSION,
        reference: cfg.reference,
        cells,
        slopes,
        h_growth,
    })
}

impl BenchTable {
    /// Aligned timing table, `*` marking cells that did not finish.
    pub fn render(&self) -> String {
        let mut methods: Vec<Method> = Vec::new();
        let mut ns: Vec<usize> = Vec::new();
        for c in &self.cells {
            if !methods.contains(&c.method) {
                methods.push(c.method);
            }
            if !ns.contains(&c.n) {
                ns.push(c.n);
            }
        }
        let mut rows = vec![std::iter::once("n".to_string()).chain(methods.iter().map(|m| m.to_string())).collect()];
        for &n in &ns {
            let mut row = vec![n.to_string()];
            for m in &methods {
                let cell = self.cells.iter().find(|c| c.n == n && c.method == *m);
                row.push(match cell.and_then(|c| c.seconds) {
                    Some(t) => format!("{t:.3}"),
                    None => "*".into(),
                });
            }
            rows.push(row);
        }
        let mut out = format!(
            "Running times (in seconds) on {}; * = over budget or skipped.\n{}",
            self.reference,
            align(&rows)
        );
        for (m, s) in &self.slopes {
            match s {
                Some(s) => {
                    let _ = writeln!(out, "log-log slope {m}: {s:.2}");
                }
                None => {
                    let _ = writeln!(out, "log-log slope {m}: *");
                }
            }
        }
        for g in &self.h_growth {
            let flag = if g.within_expected { "" } else { " (outside [1.2, 2p])" };
            let _ = writeln!(out, "llopt n={} time(h={})/time(h={}): {:.2}{flag}", g.n, g.h + 1, g.h, g.ratio);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("format_version,example,method,n,seconds,status\n");
        for c in &self.cells {
            let status = match &c.status {
                CellStatus::Done => "done".to_string(),
                CellStatus::OverBudget => "over-budget".to_string(),
                CellStatus::Skipped => "skipped".to_string(),
                CellStatus::Failed(e) => format!("failed: {}", e.replace('"', "'")),
            };
            let _ = writeln!(
                out,
                "{},{},\"{}\",{},{},\"{status}\"",
                self.format_version,
                self.reference,
                c.method,
                c.n,
                fmt_opt(c.seconds)
            );
        }
        out
    }
}
