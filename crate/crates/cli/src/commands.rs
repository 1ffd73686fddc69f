use std::path::Path;
use std::time::Instant;

use opt_density::eval::experiment::{
    render_table, reports_to_csv, run_experiment, BenchConfig, ExperimentConfig, Method, Metric,
    REPORT_FORMAT_VERSION,
};
use opt_density::eval::{bench_scaling, hellinger, Density, ReferenceDensity};
use opt_density::fee::{assemble_qp, fee_fit_with, FeeOptions};
use opt_density::llopt::{exact_hmap_fit_with, llopt_fit_with};
use opt_density::plot::{fee_svg, tree_svg, PlotOptions};
use opt_density::{adaptive_h_fit, Mode, SampleSet};

use crate::config::Settings;
use crate::io::{emit, read_rows, rows_to_csv, Model};
use crate::CliError;

fn load_samples(s: &Settings, input: &Path) -> Result<SampleSet, CliError> {
    let rows = read_rows(input, s.delimiter()?)?;
    let data = match s.bounds()? {
        Some((lower, upper)) => SampleSet::ingest_with_bounds(&rows, &lower, &upper)?,
        None => SampleSet::ingest(&rows)?,
    };
    Ok(data)
}

pub fn fit(s: &Settings, input: &Path) -> Result<(), CliError> {
    let data = load_samples(s, input)?;
    let prior = s.prior()?;
    let started = Instant::now();
    let tree = if s.adaptive {
        if !matches!(s.method.as_deref(), None | Some("llopt")) {
            return Err(CliError::Usage("--adaptive applies to llopt only".into()));
        }
        let fit = adaptive_h_fit(&data, &prior, &s.adaptive_options()?)?;
        eprintln!(
            "adaptive search: h = {} (stopped at h = {}, converged: {}, budget exhausted: {})",
            fit.h, fit.stopped_at, fit.converged, fit.budget_exhausted
        );
        fit.tree
    } else {
        let fit = match s.method()? {
            Method::Opt => exact_hmap_fit_with(&data, &prior, &s.fit_options(Mode::Cached)?)?,
            Method::DfOpt => exact_hmap_fit_with(&data, &prior, &s.fit_options(Mode::DepthFirst)?)?,
            Method::NiOpt => exact_hmap_fit_with(&data, &prior, &s.fit_options(Mode::Ni)?)?,
            Method::Llopt { h } => llopt_fit_with(&data, &prior, h, &s.fit_options(Mode::Cached)?)?,
            Method::Fee { .. } => {
                return Err(CliError::Usage("fit produces trees; smooth one with `optd smooth`".into()))
            }
        };
        eprintln!("log phi(root): {}", fit.stats.root_log_phi);
        fit.tree
    };
    eprintln!(
        "samples: {}, dimensions: {}, leaves: {}, depth: {}, seconds: {:.3}",
        data.len(),
        data.dims(),
        tree.leaf_count(),
        tree.depth(),
        started.elapsed().as_secs_f64()
    );
    emit(s.output.as_deref(), &format!("{}\n", tree.to_json_string()))
}

pub fn smooth(s: &Settings, tree_path: &Path) -> Result<(), CliError> {
    let Model::Tree(tree) = Model::load(tree_path)? else {
        return Err(CliError::Data(format!("{} holds a smoothed density, not a tree", tree_path.display())));
    };
    let lambda = s.lambda();
    let fee = fee_fit_with(
        &tree,
        &FeeOptions {
            lambda,
            ..FeeOptions::default()
        },
    )?;
    let objective = assemble_qp(fee.mesh(), fee.partition(), lambda)?.objective(fee.coeffs());
    eprintln!(
        "lambda: {lambda}, vertices: {}, simplices: {}, mass: {:.12}, objective: {objective:.6e}, smoothness: {:.6e}, solver iterations: {}",
        fee.mesh().vertex_count(),
        fee.mesh().simplex_count(),
        fee.total_mass(),
        fee.smoothness_penalty()?,
        fee.iterations
    );
    let json = serde_json::to_string_pretty(&fee.to_json()?).map_err(opt_density::OptError::from)?;
    emit(s.output.as_deref(), &format!("{json}\n"))
}

pub fn eval(s: &Settings, model_path: &Path, against: Option<&Path>, points: Option<&Path>) -> Result<(), CliError> {
    let model = Model::load(model_path)?;
    let f = model.as_density();
    if let Some(points) = points {
        let rows = read_rows(points, s.delimiter()?)?;
        if let Some(bad) = rows.iter().position(|r| r.len() != f.dims()) {
            return Err(CliError::Data(format!(
                "point {bad} has {} coordinates, the model has {}",
                rows[bad].len(),
                f.dims()
            )));
        }
        let values: Vec<f64> = rows.iter().map(|x| f.density(x)).collect();
        return emit(s.output.as_deref(), &rows_to_csv(&rows, f.dims(), Some(("density", &values))));
    }
    let other;
    let reference;
    let (g, target): (&dyn Density, String) = match against {
        Some(path) => {
            other = Model::load(path)?;
            (other.as_density(), path.display().to_string())
        }
        None => {
            let id = s.reference()?;
            reference = ReferenceDensity::new(id);
            (&reference, id.to_string())
        }
    };
    if f.dims() != g.dims() {
        return Err(CliError::Usage(format!(
            "model has {} dimensions, {target} has {}",
            f.dims(),
            g.dims()
        )));
    }
    let m = s.hellinger_samples();
    let h = hellinger(f, g, m, s.seed()?)?;
    eprintln!("hellinger distance: {:.6} (standard error {:.6})", h.distance, h.std_error);
    let csv = format!(
        "format_version,model,kind,target,distance,std_error,samples\n{REPORT_FORMAT_VERSION},\"{}\",{},\"{target}\",{},{},{m}\n",
        model_path.display(),
        model.kind(),
        h.distance,
        h.std_error,
    );
    emit(s.output.as_deref(), &csv)
}

pub fn sample(s: &Settings, model_path: &Path) -> Result<(), CliError> {
    let model = Model::load(model_path)?;
    let f = model.as_density();
    let rows = f.sample(s.seed()?, s.size_one(1000)?);
    emit(s.output.as_deref(), &rows_to_csv(&rows, f.dims(), None))
}

pub fn simulate(s: &Settings) -> Result<(), CliError> {
    let truth = ReferenceDensity::new(s.reference()?);
    let rows = truth.sample(s.seed()?, s.size_one(1000)?);
    emit(s.output.as_deref(), &rows_to_csv(&rows, truth.dims(), None))
}

pub fn bench(s: &Settings) -> Result<(), CliError> {
    let reference = s.reference()?;
    let csv = s.csv_format()?;
    let header = format!("# format_version={REPORT_FORMAT_VERSION}\n");
    match s.kind.as_deref().unwrap_or("timing") {
        "timing" => {
            if s.deterministic {
                return Err(CliError::Usage("timing tables cannot be deterministic; use --kind accuracy".into()));
            }
            let mut cfg = BenchConfig::new(reference, s.methods("opt llopt:1 llopt:2 llopt:3")?, s.sizes(&[1000, 10_000])?);
            cfg.seed = s.seed()?;
            cfg.prior = s.prior()?;
            cfg.repeats = s.repeats.unwrap_or(1);
            cfg.cell_seconds = s.budget;
            cfg.total_seconds = s.total_budget;
            let table = bench_scaling(&cfg)?;
            let text = if csv { table.to_csv() } else { header + &table.render() };
            emit(s.output.as_deref(), &text)
        }
        "accuracy" => {
            let seed = s.seed()?;
            let prior = s.prior()?;
            let budget = s.budget()?;
            let mut reports = Vec::new();
            for method in s.methods("opt llopt:1 llopt:2")? {
                for n in s.sizes(&[1000])? {
                    let mut cfg = ExperimentConfig::new(reference, method, n);
                    cfg.replicates = s.replicates.unwrap_or(5);
                    cfg.seed = seed;
                    cfg.prior = prior.clone();
                    cfg.hellinger_samples = s.hellinger_samples();
                    cfg.budget = budget;
                    cfg.jobs = s.jobs();
                    let report = run_experiment(&cfg)?;
                    for r in report.replicates.iter().filter(|r| r.error.is_some()) {
                        eprintln!("{method} n={n} replicate {}: {}", r.replicate, r.error.as_deref().unwrap_or(""));
                    }
                    reports.push(report);
                }
            }
            let text = if csv {
                reports_to_csv(&reports, !s.deterministic)
            } else {
                let mut t = header + &render_table(&reports, Metric::Hellinger);
                if !s.deterministic {
                    t.push('\n');
                    t.push_str(&render_table(&reports, Metric::Seconds));
                }
                t
            };
            emit(s.output.as_deref(), &text)
        }
        other => Err(CliError::Usage(format!("unknown bench kind {other:?}; expected timing or accuracy"))),
    }
}

pub fn plot(s: &Settings, model_path: &Path) -> Result<(), CliError> {
    let opts = PlotOptions {
        size: s.size.unwrap_or(PlotOptions::default().size),
        fill: !s.no_fill,
    };
    if !(opts.size > 0.0 && opts.size.is_finite()) {
        return Err(CliError::Usage(format!("plot size must be positive, got {}", opts.size)));
    }
    let svg = match Model::load(model_path)? {
        Model::Tree(t) => tree_svg(&t, &opts)?,
        Model::Fee(f) => fee_svg(&f, &opts)?,
    };
    emit(s.output.as_deref(), &svg)
}
