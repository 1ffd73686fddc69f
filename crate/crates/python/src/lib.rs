//! Python bindings: fitting, smoothing, sampling and scoring of densities.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use opt_density::eval::{hellinger as hellinger_estimate, Density, ReferenceDensity, ReferenceId};
use opt_density::fee::{fee_fit, FeeDensity};
use opt_density::llopt::{exact_hmap_fit_with, llopt_fit_with, AdaptiveOptions, FitOptions, StopRule};
use opt_density::phi::{Budget, Mode};
use opt_density::plot::{fee_svg, tree_svg, PlotOptions};
use opt_density::{adaptive_h_fit, HmapTree, OptError, OptPrior, SampleSet};

create_exception!(optdensity, OptDensityError, PyException);
create_exception!(optdensity, ResourceError, OptDensityError);

fn to_py(e: OptError) -> PyErr {
    match e {
        OptError::Resource(_) => ResourceError::new_err(e.to_string()),
        OptError::Config(_) | OptError::UnknownReference(_) | OptError::UnsupportedDimension(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => OptDensityError::new_err(e.to_string()),
    }
}

fn samples(rows: &[Vec<f64>], lower: Option<Vec<f64>>, upper: Option<Vec<f64>>) -> PyResult<SampleSet> {
    match (lower, upper) {
        (Some(l), Some(u)) => SampleSet::ingest_with_bounds(rows, &l, &u).map_err(to_py),
        (None, None) => SampleSet::ingest(rows).map_err(to_py),
        _ => Err(PyValueError::new_err("lower and upper must be given together")),
    }
}

fn prior(rho: Option<f64>, alpha: Option<f64>, depth_cap: Option<u32>) -> PyResult<OptPrior> {
    let mut p = OptPrior::default();
    if let Some(r) = rho {
        p.rho = r;
    }
    if let Some(a) = alpha {
        p.alpha = [a, a];
    }
    if let Some(d) = depth_cap {
        p.depth_cap = d;
    }
    p.validate().map_err(to_py)?;
    Ok(p)
}

/// Piecewise-constant density over a dyadic partition of a box.
#[pyclass(name = "PcDensity", module = "optdensity", frozen)]
pub struct PyPcDensity {
    tree: HmapTree,
}

#[pymethods]
impl PyPcDensity {
    #[getter]
    fn dims(&self) -> usize {
        self.tree.dims()
    }

    #[getter]
    fn leaf_count(&self) -> usize {
        self.tree.leaf_count()
    }

    #[getter]
    fn depth(&self) -> u32 {
        self.tree.depth()
    }

    fn density(&self, x: Vec<f64>) -> PyResult<f64> {
        check_len(x.len(), self.tree.dims())?;
        Ok(self.tree.eval(&x))
    }

    fn densities(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        points
            .iter()
            .map(|x| check_len(x.len(), self.tree.dims()).map(|_| self.tree.eval(x)))
            .collect()
    }

    #[pyo3(signature = (n, seed = 1))]
    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.tree.sample(seed, n)
    }

    fn total_mass(&self) -> PyResult<f64> {
        self.tree.total_mass().map_err(to_py)
    }

    /// `(region code, mass, density)` for every leaf.
    fn leaves(&self) -> Vec<(String, f64, f64)> {
        self.tree
            .leaves()
            .map(|l| (l.region.code(), l.mass, l.density()))
            .collect()
    }

    fn same_partition(&self, other: &PyPcDensity) -> bool {
        self.tree.same_partition(&other.tree)
    }

    fn to_json(&self) -> String {
        self.tree.to_json_string()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyPcDensity {
            tree: HmapTree::from_json_str(text).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (size = 400.0, fill = true))]
    fn svg(&self, size: f64, fill: bool) -> PyResult<String> {
        tree_svg(&self.tree, &PlotOptions { size, fill }).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("PcDensity(dims={}, leaves={})", self.tree.dims(), self.tree.leaf_count())
    }
}

/// Continuous piecewise-linear density over a triangulated partition.
#[pyclass(name = "FeeDensity", module = "optdensity", frozen)]
pub struct PyFeeDensity {
    fee: FeeDensity,
}

#[pymethods]
impl PyFeeDensity {
    #[getter]
    fn dims(&self) -> usize {
        self.fee.dims()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.fee.lambda()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.fee.mesh().vertex_count()
    }

    #[getter]
    fn simplex_count(&self) -> usize {
        self.fee.mesh().simplex_count()
    }

    fn density(&self, x: Vec<f64>) -> PyResult<f64> {
        check_len(x.len(), self.fee.dims())?;
        Ok(self.fee.eval(&x))
    }

    fn densities(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        points
            .iter()
            .map(|x| check_len(x.len(), self.fee.dims()).map(|_| self.fee.eval(x)))
            .collect()
    }

    #[pyo3(signature = (n, seed = 1))]
    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.fee.sample(seed, n)
    }

    fn total_mass(&self) -> f64 {
        self.fee.total_mass()
    }

    fn smoothness_penalty(&self) -> PyResult<f64> {
        self.fee.smoothness_penalty().map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        let v = self.fee.to_json().map_err(to_py)?;
        serde_json_string(&v)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| OptDensityError::new_err(e.to_string()))?;
        Ok(PyFeeDensity {
            fee: FeeDensity::from_json(&v).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (size = 400.0, fill = true))]
    fn svg(&self, size: f64, fill: bool) -> PyResult<String> {
        fee_svg(&self.fee, &PlotOptions { size, fill }).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "FeeDensity(dims={}, lambda={}, simplices={})",
            self.fee.dims(),
            self.fee.lambda(),
            self.fee.mesh().simplex_count()
        )
    }
}

fn serde_json_string(v: &serde_json::Value) -> PyResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| OptDensityError::new_err(e.to_string()))
}

fn check_len(got: usize, want: usize) -> PyResult<()> {
    if got == want {
        Ok(())
    } else {
        Err(PyValueError::new_err(format!("point has {got} coordinates, density has {want}")))
    }
}

/// Fits a piecewise-constant density with `method` one of `exact`, `df`,
/// `ni` or `llopt` (which needs `h`).
#[pyfunction]
#[pyo3(signature = (rows, method = "exact", h = None, lower = None, upper = None, rho = None, alpha = None, depth_cap = None, budget_seconds = None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    method: &str,
    h: Option<u32>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    rho: Option<f64>,
    alpha: Option<f64>,
    depth_cap: Option<u32>,
    budget_seconds: Option<f64>,
) -> PyResult<PyPcDensity> {
    let data = samples(&rows, lower, upper)?;
    let prior = prior(rho, alpha, depth_cap)?;
    let opts = |mode| FitOptions {
        mode,
        budget: Budget {
            max_cache_entries: None,
            max_seconds: budget_seconds,
        },
    };
    let result = py.detach(|| match (method, h) {
        ("exact" | "opt", None) => exact_hmap_fit_with(&data, &prior, &opts(Mode::Cached)),
        ("df" | "df-opt", None) => exact_hmap_fit_with(&data, &prior, &opts(Mode::DepthFirst)),
        ("ni" | "ni-opt", None) => exact_hmap_fit_with(&data, &prior, &opts(Mode::Ni)),
        ("llopt", Some(h)) => llopt_fit_with(&data, &prior, h, &opts(Mode::Cached)),
        _ => Err(OptError::Config(format!(
            "method {method:?} with h = {h:?}; expected exact, df or ni without h, or llopt with h"
        ))),
    });
    Ok(PyPcDensity {
        tree: result.map_err(to_py)?.tree,
    })
}

/// Lookahead fit with `h` increased until the stop rule fires; returns the
/// density and the `h` it was fitted with.
#[pyfunction]
#[pyo3(signature = (rows, stop_rule = "identical", tau = None, max_h = 8, lower = None, upper = None))]
fn adaptive_fit(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    stop_rule: &str,
    tau: Option<f64>,
    max_h: u32,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
) -> PyResult<(PyPcDensity, u32)> {
    let data = samples(&rows, lower, upper)?;
    let rule = match (stop_rule, tau) {
        ("identical", _) => StopRule::IdenticalTwice,
        ("hellinger", Some(tau)) => StopRule::Hellinger { tau },
        ("budget", _) => StopRule::Budget,
        _ => return Err(PyValueError::new_err("stop_rule is identical, hellinger (with tau) or budget")),
    };
    let opts = AdaptiveOptions {
        rule,
        max_h,
        ..AdaptiveOptions::default()
    };
    let prior = OptPrior::default();
    let fit = py.detach(|| adaptive_h_fit(&data, &prior, &opts)).map_err(to_py)?;
    Ok((PyPcDensity { tree: fit.tree }, fit.h))
}

/// Finite element smoothing of a fitted tree.
#[pyfunction]
#[pyo3(signature = (tree, lam = opt_density::fee::DEFAULT_LAMBDA))]
fn smooth(py: Python<'_>, tree: &PyPcDensity, lam: f64) -> PyResult<PyFeeDensity> {
    let fee = py.detach(|| fee_fit(&tree.tree, lam)).map_err(to_py)?;
    Ok(PyFeeDensity { fee })
}

fn reference_id(name: &str) -> PyResult<ReferenceId> {
    name.parse().map_err(to_py)
}

/// `n` draws from a reference density (`ex1` … `ex5`).
#[pyfunction]
#[pyo3(signature = (name, n, seed = 1))]
fn simulate(name: &str, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    Ok(ReferenceDensity::new(reference_id(name)?).sample(seed, n))
}

/// Value of a reference density at `x`.
#[pyfunction]
fn reference_density(name: &str, x: Vec<f64>) -> PyResult<f64> {
    let f = ReferenceDensity::new(reference_id(name)?);
    check_len(x.len(), f.dims())?;
    Ok(f.pdf(&x))
}

fn as_density<'a>(obj: &'a Bound<'_, PyAny>, holder: &'a mut Option<ReferenceDensity>) -> PyResult<&'a dyn Density> {
    if let Ok(t) = obj.cast::<PyPcDensity>() {
        return Ok(&t.get().tree);
    }
    if let Ok(f) = obj.cast::<PyFeeDensity>() {
        return Ok(&f.get().fee);
    }
    if let Ok(name) = obj.extract::<String>() {
        return Ok(holder.insert(ReferenceDensity::new(reference_id(&name)?)));
    }
    Err(PyValueError::new_err("expected a PcDensity, a FeeDensity or a reference name"))
}

/// Monte Carlo Hellinger distance and its standard error.
#[pyfunction]
#[pyo3(signature = (f, g, samples = 200_000, seed = 1))]
fn hellinger(f: &Bound<'_, PyAny>, g: &Bound<'_, PyAny>, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
    let (mut hf, mut hg) = (None, None);
    let (f, g) = (as_density(f, &mut hf)?, as_density(g, &mut hg)?);
    let h = hellinger_estimate(f, g, samples, seed).map_err(to_py)?;
    Ok((h.distance, h.std_error))
}

#[pymodule]
fn optdensity(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPcDensity>()?;
    m.add_class::<PyFeeDensity>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_fit, m)?)?;
    m.add_function(wrap_pyfunction!(smooth, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(reference_density, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger, m)?)?;
    m.add("OptDensityError", m.py().get_type::<OptDensityError>())?;
    m.add("ResourceError", m.py().get_type::<ResourceError>())?;
    Ok(())
}
