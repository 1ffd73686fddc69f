//! Run settings: command-line flags over a `key = value` config file over
//! built-in defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use opt_density::eval::experiment::Method;
use opt_density::eval::DEFAULT_HELLINGER_SAMPLES;
use opt_density::fee::DEFAULT_LAMBDA;
use opt_density::llopt::{AdaptiveOptions, FitOptions, StopRule};
use opt_density::phi::{Budget, Mode};
use opt_density::{OptPrior, ReferenceId};

use crate::CliError;

/// Lower and upper corners of the sample box.
pub type Bounds = (Vec<f64>, Vec<f64>);

/// Flags shared by every command. Each may also be set in the config file
/// under the same name, with `-` or `_` as separator.
#[derive(Args, Clone, Debug, Default)]
pub struct Settings {
    /// Config file of `key = value` lines; flags given here take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(short, long, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// exact, df, ni or llopt, or a full method such as llopt:2 or fee:1e-4.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Lookahead depth for llopt.
    #[arg(long, global = true)]
    pub h: Option<u32>,
    /// Increase h until the stop rule fires.
    #[arg(long, global = true)]
    pub adaptive: bool,
    /// identical, hellinger or budget.
    #[arg(long, global = true)]
    pub stop_rule: Option<String>,
    /// Hellinger threshold of the hellinger stop rule.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Largest h tried by the adaptive search.
    #[arg(long, global = true)]
    pub max_h: Option<u32>,
    /// Prior stopping probability.
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Dirichlet parameter, one value or `lower,upper`.
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// Tree level at which regions are closed.
    #[arg(long, global = true)]
    pub depth_cap: Option<u32>,
    /// NI mode: close regions with fewer samples.
    #[arg(long, global = true)]
    pub min_count: Option<usize>,
    /// NI mode: close regions of smaller volume.
    #[arg(long, global = true)]
    pub min_volume: Option<f64>,
    /// Smoothness weight of the finite element smoother.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Random seed for simulation, sampling and Monte Carlo estimates
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Require a seed and leave timings out of every output file.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Independent data sets per accuracy cell
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Sample count: data size for simulate and sample, grid sizes for bench.
    #[arg(short, long, global = true)]
    pub n: Option<String>,
    /// Importance samples for Hellinger distances.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Wall-clock limit per fit, in seconds.
    #[arg(long, global = true)]
    pub budget: Option<f64>,
    /// Limit on memoized regions per fit.
    #[arg(long, global = true)]
    pub budget_cache: Option<usize>,
    /// Wall-clock limit for a whole bench grid, in seconds.
    #[arg(long, global = true)]
    pub total_budget: Option<f64>,
    /// Worker threads for replicates
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// CSV field separator.
    #[arg(long, global = true)]
    pub delimiter: Option<char>,
    /// Lower corner of the bounding box, comma separated.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lower: Option<String>,
    /// Upper corner of the bounding box, comma separated.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub upper: Option<String>,
    /// Reference density ex1 … ex5.
    #[arg(long, global = true)]
    pub reference: Option<String>,
    /// Bench methods, separated by spaces or semicolons.
    #[arg(long, global = true)]
    pub methods: Option<String>,
    /// Timed fits per bench cell.
    #[arg(long, global = true)]
    pub repeats: Option<usize>,
    /// bench: timing or accuracy.
    #[arg(long, global = true)]
    pub kind: Option<String>,
    /// text or csv for tables.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Side of the plot in pixels.
    #[arg(long, global = true)]
    pub size: Option<f64>,
    /// Draw outlines only.
    #[arg(long, global = true)]
    pub no_fill: bool,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid value {value:?} for {key}"))),
    }
}

impl Settings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim().to_string();
        match key {
            "output" => self.output = Some(PathBuf::from(v)),
            "method" => self.method = Some(v),
            "h" => self.h = Some(parse(key, &v)?),
            "adaptive" => self.adaptive = parse_bool(key, &v)?,
            "stop-rule" => self.stop_rule = Some(v),
            "tau" => self.tau = Some(parse(key, &v)?),
            "max-h" => self.max_h = Some(parse(key, &v)?),
            "rho" => self.rho = Some(parse(key, &v)?),
            "alpha" => self.alpha = Some(v),
            "depth-cap" => self.depth_cap = Some(parse(key, &v)?),
            "min-count" => self.min_count = Some(parse(key, &v)?),
            "min-volume" => self.min_volume = Some(parse(key, &v)?),
            "lambda" => self.lambda = Some(parse(key, &v)?),
            "seed" => self.seed = Some(parse(key, &v)?),
            "deterministic" => self.deterministic = parse_bool(key, &v)?,
            "replicates" => self.replicates = Some(parse(key, &v)?),
            "n" => self.n = Some(v),
            "samples" => self.samples = Some(parse(key, &v)?),
            "budget" => self.budget = Some(parse(key, &v)?),
            "budget-cache" => self.budget_cache = Some(parse(key, &v)?),
            "total-budget" => self.total_budget = Some(parse(key, &v)?),
            "jobs" => self.jobs = Some(parse(key, &v)?),
            "delimiter" => self.delimiter = Some(parse(key, &v)?),
            "lower" => self.lower = Some(v),
            "upper" => self.upper = Some(v),
            "reference" => self.reference = Some(v),
            "methods" => self.methods = Some(v),
            "repeats" => self.repeats = Some(parse(key, &v)?),
            "kind" => self.kind = Some(v),
            "format" => self.format = Some(v),
            "size" => self.size = Some(parse(key, &v)?),
            "no-fill" => self.no_fill = parse_bool(key, &v)?,
            _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        let mut out = Settings::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1))
            })?;
            out.set(&key.trim().replace('_', "-"), value)
                .map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(out)
    }

    /// Fills every unset field from `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            config: self.config.or(base.config),
            output: self.output.or(base.output),
            method: self.method.or(base.method),
            h: self.h.or(base.h),
            adaptive: self.adaptive || base.adaptive,
            stop_rule: self.stop_rule.or(base.stop_rule),
            tau: self.tau.or(base.tau),
            max_h: self.max_h.or(base.max_h),
            rho: self.rho.or(base.rho),
            alpha: self.alpha.or(base.alpha),
            depth_cap: self.depth_cap.or(base.depth_cap),
            min_count: self.min_count.or(base.min_count),
            min_volume: self.min_volume.or(base.min_volume),
            lambda: self.lambda.or(base.lambda),
            seed: self.seed.or(base.seed),
            deterministic: self.deterministic || base.deterministic,
            replicates: self.replicates.or(base.replicates),
            n: self.n.or(base.n),
            samples: self.samples.or(base.samples),
            budget: self.budget.or(base.budget),
            budget_cache: self.budget_cache.or(base.budget_cache),
            total_budget: self.total_budget.or(base.total_budget),
            jobs: self.jobs.or(base.jobs),
            delimiter: self.delimiter.or(base.delimiter),
            lower: self.lower.or(base.lower),
            upper: self.upper.or(base.upper),
            reference: self.reference.or(base.reference),
            methods: self.methods.or(base.methods),
            repeats: self.repeats.or(base.repeats),
            kind: self.kind.or(base.kind),
            format: self.format.or(base.format),
            size: self.size.or(base.size),
            no_fill: self.no_fill || base.no_fill,
        }
    }

    /// Flags merged with the config file, if one was named.
    pub fn resolve(self) -> Result<Settings, CliError> {
        match self.config.clone() {
            Some(path) => Ok(self.over(Settings::from_file(&path)?)),
            None => Ok(self),
        }
    }

    pub fn prior(&self) -> Result<OptPrior, CliError> {
        let mut prior = OptPrior::default();
        if let Some(rho) = self.rho {
            prior.rho = rho;
        }
        if let Some(alpha) = &self.alpha {
            let parts: Vec<f64> = list(alpha).iter().map(|a| parse("alpha", a)).collect::<Result<_, _>>()?;
            prior.alpha = match parts.as_slice() {
                [a] => [*a, *a],
                [a, b] => [*a, *b],
                _ => return Err(CliError::Usage("alpha takes one or two values".into())),
            };
        }
        if let Some(cap) = self.depth_cap {
            prior.depth_cap = cap;
        }
        if let Some(m) = self.min_count {
            prior.min_count = m;
        }
        if let Some(v) = self.min_volume {
            prior.min_volume = v;
        }
        prior.validate()?;
        Ok(prior)
    }

    pub fn budget(&self) -> Result<Budget, CliError> {
        if let Some(s) = self.budget {
            if !(s >= 0.0) {
                return Err(CliError::Usage(format!("budget must be non-negative, got {s}")));
            }
        }
        Ok(Budget {
            max_cache_entries: self.budget_cache,
            max_seconds: self.budget,
        })
    }

    /// The estimator named by `--method` and `--h`.
    pub fn method(&self) -> Result<Method, CliError> {
        let name = self.method.as_deref().unwrap_or("exact");
        let method: Method = match (name, self.h) {
            ("llopt", Some(h)) => Method::Llopt { h },
            ("llopt", None) => return Err(CliError::Usage("--method llopt needs --h or --adaptive".into())),
            (other, h) => {
                let m: Method = other.parse()?;
                match (m, h) {
                    (Method::Fee { lambda, h: None }, Some(h)) => Method::Fee { lambda, h: Some(h) },
                    (m, Some(_)) if !matches!(m, Method::Llopt { .. } | Method::Fee { .. }) => {
                        return Err(CliError::Usage(format!("--h does not apply to method {m}")))
                    }
                    (m, _) => m,
                }
            }
        };
        Ok(match method {
            Method::Fee { h, .. } if self.lambda.is_some() => Method::Fee {
                lambda: self.lambda.unwrap(),
                h,
            },
            m => m,
        })
    }

    pub fn fit_options(&self, mode: Mode) -> Result<FitOptions, CliError> {
        Ok(FitOptions {
            mode,
            budget: self.budget()?,
        })
    }

    pub fn adaptive_options(&self) -> Result<AdaptiveOptions, CliError> {
        let rule = match self.stop_rule.as_deref().unwrap_or("identical") {
            "identical" | "identical-twice" => StopRule::IdenticalTwice,
            "hellinger" => StopRule::Hellinger {
                tau: self
                    .tau
                    .ok_or_else(|| CliError::Usage("--stop-rule hellinger needs --tau".into()))?,
            },
            "budget" => StopRule::Budget,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown stop rule {other:?}; expected identical, hellinger or budget"
                )))
            }
        };
        let defaults = AdaptiveOptions::default();
        Ok(AdaptiveOptions {
            rule,
            max_h: self.max_h.unwrap_or(defaults.max_h),
            fit: self.fit_options(Mode::Cached)?,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(DEFAULT_LAMBDA)
    }

    /// The seed, required to be explicit in deterministic mode.
    pub fn seed(&self) -> Result<u64, CliError> {
        match (self.seed, self.deterministic) {
            (Some(s), _) => Ok(s),
            (None, true) => Err(CliError::Usage("--deterministic requires --seed".into())),
            (None, false) => Ok(1),
        }
    }

    pub fn reference(&self) -> Result<ReferenceId, CliError> {
        let name = self
            .reference
            .as_deref()
            .ok_or_else(|| CliError::Usage("--reference ex1 … ex5 is required".into()))?;
        Ok(name.parse()?)
    }

    pub fn hellinger_samples(&self) -> usize {
        self.samples.unwrap_or(DEFAULT_HELLINGER_SAMPLES)
    }

    pub fn jobs(&self) -> usize {
        self.jobs.unwrap_or(1).max(1)
    }

    pub fn delimiter(&self) -> Result<u8, CliError> {
        let c = self.delimiter.unwrap_or(',');
        u8::try_from(c)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| CliError::Usage(format!("delimiter must be an ASCII character, got {c:?}")))
    }

    pub fn sizes(&self, default: &[usize]) -> Result<Vec<usize>, CliError> {
        match &self.n {
            None => Ok(default.to_vec()),
            Some(s) => list(s).iter().map(|v| parse_count("n", v)).collect(),
        }
    }

    pub fn size_one(&self, default: usize) -> Result<usize, CliError> {
        match self.sizes(&[default])?.as_slice() {
            [n] => Ok(*n),
            _ => Err(CliError::Usage("-n takes a single value here".into())),
        }
    }

    pub fn bounds(&self) -> Result<Option<Bounds>, CliError> {
        let corner = |key: &str, s: &str| -> Result<Vec<f64>, CliError> {
            list(s).iter().map(|v| parse(key, v)).collect()
        };
        match (&self.lower, &self.upper) {
            (None, None) => Ok(None),
            (Some(l), Some(u)) => Ok(Some((corner("lower", l)?, corner("upper", u)?))),
            _ => Err(CliError::Usage("--lower and --upper go together".into())),
        }
    }

    pub fn methods(&self, default: &str) -> Result<Vec<Method>, CliError> {
        split_methods(self.methods.as_deref().unwrap_or(default))
            .iter()
            .map(|m| Ok(m.parse::<Method>()?))
            .collect()
    }

    pub fn csv_format(&self) -> Result<bool, CliError> {
        match self.format.as_deref().unwrap_or("text") {
            "text" => Ok(false),
            "csv" => Ok(true),
            other => Err(CliError::Usage(format!("unknown format {other:?}; expected text or csv"))),
        }
    }

    /// `key = value` lines describing the run, for the log header.
    pub fn describe(&self, command: &str) -> String {
        let mut out = format!("# optd {command}\n");
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "#   {k} = {v}");
        };
        let show = |v: Option<String>| v.unwrap_or_else(|| "default".into());
        let prior = self.prior().unwrap_or_default();
        let method = match (&self.method, self.adaptive) {
            (_, true) => "llopt (adaptive h)".to_string(),
            _ => self.method().map(|m| m.to_string()).unwrap_or_else(|_| show(self.method.clone())),
        };
        line("method", method);
        line("h", show(self.h.map(|h| h.to_string())));
        line("adaptive", self.adaptive.to_string());
        line("stop-rule", self.stop_rule.clone().unwrap_or_else(|| "identical".into()));
        line("tau", show(self.tau.map(|t| t.to_string())));
        line("rho", prior.rho.to_string());
        line("alpha", format!("{},{}", prior.alpha[0], prior.alpha[1]));
        line("q", "1".into());
        line("depth-cap", prior.depth_cap.to_string());
        line("min-count", prior.min_count.to_string());
        line("min-volume", format!("{:e}", prior.min_volume));
        line("lambda", self.lambda().to_string());
        line("seed", show(self.seed.map(|s| s.to_string())));
        line("deterministic", self.deterministic.to_string());
        line("budget", show(self.budget.map(|b| format!("{b} s"))));
        line("budget-cache", show(self.budget_cache.map(|b| b.to_string())));
        line("jobs", self.jobs().to_string());
        if let Some(c) = &self.config {
            line("config", c.display().to_string());
        }
        out
    }
}

fn parse_count(key: &str, value: &str) -> Result<usize, CliError> {
    let v = value.trim();
    // Accept 1e4 style sizes.
    if let Ok(n) = v.parse::<usize>() {
        return Ok(n);
    }
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 => Ok(x as usize),
        _ => Err(CliError::Usage(format!("invalid value {value:?} for {key}"))),
    }
}

fn list(s: &str) -> Vec<String> {
    s.split([',', ' ', ';']).map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

/// Splits on spaces, semicolons, and commas outside parentheses.
fn split_methods(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0usize;
    for ch in s.chars() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(ch);
            }
            ',' if depth == 0 => out.push(std::mem::take(&mut cur)),
            ' ' | ';' => out.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    out.push(cur);
    out.into_iter().map(|m| m.trim().to_string()).filter(|m| !m.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nrho = 0.3\nseed=9\nmin_count = 4 # trailing\n").unwrap();
        let flags = Settings {
            config: Some(path),
            seed: Some(2),
            ..Settings::default()
        };
        let s = flags.resolve().unwrap();
        assert_eq!(s.seed, Some(2));
        let prior = s.prior().unwrap();
        assert_eq!(prior.rho, 0.3);
        assert_eq!(prior.min_count, 4);
        assert_eq!(prior.alpha, OptPrior::default().alpha);
    }

    #[test]
    fn bad_config_lines_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        for text in ["nonsense\n", "colour = red\n", "h = two\n"] {
            let path = dir.path().join("bad.conf");
            std::fs::write(&path, text).unwrap();
            let err = Settings::from_file(&path).unwrap_err();
            assert!(matches!(err, CliError::Usage(_)), "{text}: {err:?}");
        }
    }

    #[test]
    fn method_resolution() {
        let with = |method: &str, h: Option<u32>| Settings {
            method: Some(method.into()),
            h,
            ..Settings::default()
        };
        assert_eq!(Settings::default().method().unwrap(), Method::Opt);
        assert_eq!(with("llopt", Some(3)).method().unwrap(), Method::Llopt { h: 3 });
        assert_eq!(with("llopt:2", None).method().unwrap(), Method::Llopt { h: 2 });
        assert!(with("llopt", None).method().is_err());
        assert!(with("ni", Some(2)).method().is_err());
        assert_eq!(
            split_methods("opt llopt:1;fee(lambda=1e-4,h=2),df"),
            ["opt", "llopt:1", "fee(lambda=1e-4,h=2)", "df"]
        );
    }

    #[test]
    fn seeds_and_sizes() {
        let det = Settings {
            deterministic: true,
            ..Settings::default()
        };
        assert!(det.seed().is_err());
        let s = Settings {
            n: Some("1e3, 5000".into()),
            ..Settings::default()
        };
        assert_eq!(s.sizes(&[]).unwrap(), vec![1000, 5000]);
        assert!(s.size_one(1).is_err());
    }
}
