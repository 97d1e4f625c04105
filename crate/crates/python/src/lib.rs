//! Python bindings for the `nonprob` crate.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nonprob::bigdata::{draw_big_dataset, selection_probabilities, SelectionModel};
use nonprob::design::{bethel_chromy_allocate, build_design_frame, stratify, AllocationOptions, ConstraintSpec, DesignKind};
use nonprob::linalg::Design;
use nonprob::population::{load_population, save_population, solve_fleishman, synthesize_population, MomentSpec};
use nonprob::rng::stream;
use nonprob::simulation::{rb_rrmse, run_config, ScenarioConfig};
use nonprob::weighting::{chi_square_calibrate, fit_logistic_weighted, CalibrationProblem, LogisticOptions};
use nonprob::{Error, PopulationConfig, PopulationFrame};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_config() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn selection_model(missingness: &str) -> PyResult<SelectionModel> {
    match missingness.to_ascii_uppercase().as_str() {
        "SAR" => Ok(SelectionModel::sar()),
        "SNAR" => Ok(SelectionModel::snar()),
        other => Err(PyValueError::new_err(format!("unknown missingness {other:?}; expected SAR or SNAR"))),
    }
}

/// A business population frame.
#[pyclass(name = "Population", frozen)]
struct PyPopulation {
    frame: PopulationFrame,
}

#[pymethods]
impl PyPopulation {
    /// Synthesizes a population from the bundled generator config.
    #[staticmethod]
    #[pyo3(signature = (n=90_000, seed=None))]
    fn synthesize(py: Python<'_>, n: usize, seed: Option<u64>) -> PyResult<Self> {
        let mut cfg = PopulationConfig::bundled();
        cfg.n = n;
        let seed = seed.unwrap_or(cfg.seed);
        let frame = py.detach(|| synthesize_population(&cfg, seed)).map_err(py_err)?;
        Ok(Self { frame })
    }

    /// Reads a population CSV.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            frame: load_population(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_population(&self.frame, &path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.frame.n()
    }

    fn __repr__(&self) -> String {
        format!("Population(n={})", self.frame.n())
    }

    /// True totals of (earnings, reported employment, overtime).
    fn totals(&self) -> (f64, f64, f64) {
        let t = self.frame.totals();
        (t[0], t[1], t[2])
    }

    fn frame_employment_total(&self) -> f64 {
        self.frame.frame_employment_total()
    }

    /// Column-oriented copy of the frame as a dict of lists.
    fn columns<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let u = self.frame.units();
        let d = PyDict::new(py);
        d.set_item("unit_id", u.iter().map(|r| r.unit_id).collect::<Vec<_>>())?;
        d.set_item("state", u.iter().map(|r| r.state).collect::<Vec<_>>())?;
        d.set_item("industry", u.iter().map(|r| r.industry).collect::<Vec<_>>())?;
        d.set_item("size_group", u.iter().map(|r| r.size_group).collect::<Vec<_>>())?;
        d.set_item("frame_employment", u.iter().map(|r| r.frame_employment).collect::<Vec<_>>())?;
        d.set_item("reported_employment", u.iter().map(|r| r.reported_employment).collect::<Vec<_>>())?;
        d.set_item("earnings", u.iter().map(|r| r.earnings).collect::<Vec<_>>())?;
        d.set_item("overtime", u.iter().map(|r| r.overtime).collect::<Vec<_>>())?;
        d.set_item("earnings_star", u.iter().map(|r| r.earnings_star).collect::<Vec<_>>())?;
        Ok(d)
    }

    /// Selection probabilities into the big dataset under `"SAR"` or `"SNAR"`.
    #[pyo3(signature = (missingness="SAR"))]
    fn selection_probabilities(&self, missingness: &str) -> PyResult<Vec<f64>> {
        selection_probabilities(&self.frame, &selection_model(missingness)?).map_err(py_err)
    }

    /// Draws the big dataset and returns its members as 0-based frame
    /// indices.
    #[pyo3(signature = (missingness="SAR", seed=0))]
    fn draw_big_data(&self, missingness: &str, seed: u64) -> PyResult<Vec<usize>> {
        let pi = self.selection_probabilities(missingness)?;
        let big = draw_big_dataset(&pi, false, &mut stream(seed, &[])).map_err(py_err)?;
        Ok(big.members().to_vec())
    }

    /// Optimal allocation for a design. `big_members` (0-based indices) is
    /// required for `"dual_screening"`. Returns a dict with `total_n`,
    /// `n_h` and `iterations`.
    #[pyo3(signature = (design="single", national=0.015, industry=0.05, state=0.05, big_members=None, min_n=6))]
    fn allocate<'py>(
        &self,
        py: Python<'py>,
        design: &str,
        national: f64,
        industry: f64,
        state: f64,
        big_members: Option<Vec<usize>>,
        min_n: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let kind = DesignKind::ALL
            .into_iter()
            .find(|d| d.name() == design)
            .ok_or_else(|| PyValueError::new_err(format!("unknown design {design:?}")))?;
        let big = match (kind, big_members) {
            (DesignKind::DualScreening, None) => {
                return Err(PyValueError::new_err("dual_screening needs big_members"));
            }
            (_, Some(m)) => {
                let mut delta = vec![false; self.frame.n()];
                for i in m {
                    *delta.get_mut(i).ok_or_else(|| PyValueError::new_err(format!("member index {i} out of range")))? = true;
                }
                Some(nonprob::bigdata::BigDataset::from_delta(delta, Vec::new(), false))
            }
            (_, None) => None,
        };
        let constraints = ConstraintSpec::standard(national, industry, state);
        let opts = AllocationOptions {
            min_n,
            ..AllocationOptions::default()
        };
        let alloc = py
            .detach(|| {
                let df = build_design_frame(&self.frame, big.as_ref(), kind);
                bethel_chromy_allocate(&stratify(&self.frame, &df.sampling), &constraints, &opts)
            })
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("total_n", alloc.total_n)?;
        d.set_item("n_h", alloc.n_h)?;
        d.set_item("iterations", alloc.iterations)?;
        Ok(d)
    }
}

/// Chi-square distance calibration. `x` is a list of rows; returns the
/// calibrated weights.
#[pyfunction]
#[pyo3(signature = (d, x, totals, q=None))]
fn calibrate(d: Vec<f64>, x: Vec<Vec<f64>>, totals: Vec<f64>, q: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    if x.iter().any(|r| r.len() != totals.len()) {
        return Err(PyValueError::new_err("every row of x needs one entry per benchmark total"));
    }
    let design = Design::from_rows(&x);
    let cal = chi_square_calibrate(&CalibrationProblem {
        d: &d,
        x: &design,
        totals: &totals,
        q: q.as_deref(),
    })
    .map_err(py_err)?;
    Ok(cal.weights)
}

/// Weighted maximum likelihood logistic regression; returns coefficients.
#[pyfunction]
#[pyo3(signature = (y, x, w=None))]
fn fit_logistic(y: Vec<bool>, x: Vec<Vec<f64>>, w: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let p = x.first().map_or(0, Vec::len);
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("x must be a non-empty list of equal-length rows"));
    }
    let w = w.unwrap_or_else(|| vec![1.0; y.len()]);
    fit_logistic_weighted(&y, &Design::from_rows(&x), &w, &LogisticOptions::default()).map_err(py_err)
}

/// Fleishman coefficients `(a, b, c, d)` for a target mean, variance,
/// skewness and excess kurtosis.
#[pyfunction]
fn fleishman(mean: f64, variance: f64, skewness: f64, kurtosis: f64) -> PyResult<(f64, f64, f64, f64)> {
    let c = solve_fleishman(&MomentSpec {
        mean,
        variance,
        skewness,
        kurtosis,
    })
    .map_err(py_err)?;
    Ok((c.a, c.b, c.c, c.d))
}

/// Monte Carlo relative bias and relative RMSE of `estimates` against `truth`.
#[pyfunction]
fn relative_bias_rmse(estimates: Vec<f64>, truth: f64) -> PyResult<(f64, f64)> {
    rb_rrmse(&estimates, truth).map_err(py_err)
}

/// Runs a scenario config (JSON text) and returns one dict per results row.
/// When `population` is given it replaces the config's population source.
#[pyfunction]
#[pyo3(signature = (config, population=None, threads=None))]
fn simulate<'py>(
    py: Python<'py>,
    config: &str,
    population: Option<&PyPopulation>,
    threads: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ScenarioConfig::from_json(config).map_err(py_err)?;
    let owned;
    let frame = match population {
        Some(p) => &p.frame,
        None => {
            owned = py.detach(|| cfg.load_frame(None)).map_err(py_err)?;
            &owned
        }
    };
    let results = py.detach(|| run_config(frame, &cfg, threads)).map_err(py_err)?;
    results
        .iter()
        .flat_map(|r| &r.rows)
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("scenario", &row.scenario)?;
            d.set_item("design", &row.design)?;
            d.set_item("estimator", &row.estimator)?;
            d.set_item("variable", &row.variable)?;
            d.set_item("rb", row.rb)?;
            d.set_item("rrmse", row.rrmse)?;
            d.set_item("n_replicates", row.n_replicates)?;
            d.set_item("n_failures", row.n_failures)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn nonprob_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPopulation>()?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(fleishman, m)?)?;
    m.add_function(wrap_pyfunction!(relative_bias_rmse, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
