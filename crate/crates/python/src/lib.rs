//! Python bindings for `sraf`.
//!
//! Signals travel as lists of floats; multi-band data as lists of lists.
//! Parameter and config errors raise `ValueError`, everything else
//! `RuntimeError`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sraf_core::config::parse_config;
use sraf_core::filterbank::{self, SubbandFrame};
use sraf_core::harness::{self, RunOptions, SweepConfig};
use sraf_core::{adaptive, metrics, signals, Error};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Parameter(_) | Error::Config(_) | Error::Input { .. } | Error::Unsupported(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn rule(kind: &str, param: f64) -> PyResult<adaptive::ScaleRule> {
    Ok(match kind {
        "nsaf" => adaptive::ScaleRule::Nsaf,
        "mcc" => adaptive::ScaleRule::Mcc { beta: param },
        "lc" => adaptive::ScaleRule::Lc { gamma: param },
        "sign" => adaptive::ScaleRule::Sign,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown rule `{other}` (expected nsaf, mcc, lc or sign)"
            )))
        }
    })
}

/// Lowpass prototype of a cosine-modulated filter bank.
#[pyclass(name = "PrototypeFilter", frozen)]
struct PyPrototype(filterbank::PrototypeFilter);

#[pymethods]
impl PyPrototype {
    #[new]
    fn new(coefficients: Vec<f64>, subbands: usize) -> PyResult<Self> {
        filterbank::PrototypeFilter::new(coefficients, subbands)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.0.coefficients().to_vec()
    }

    #[getter]
    fn subbands(&self) -> usize {
        self.0.subbands()
    }

    fn stopband_attenuation_db(&self) -> f64 {
        self.0.stopband_attenuation_db()
    }

    fn modulate(&self) -> PyAnalysisBank {
        PyAnalysisBank(filterbank::modulate(&self.0))
    }

    fn __len__(&self) -> usize {
        self.0.taps()
    }
}

#[pyclass(name = "AnalysisBank", frozen)]
struct PyAnalysisBank(filterbank::AnalysisBank);

#[pymethods]
impl PyAnalysisBank {
    #[new]
    fn new(filters: Vec<Vec<f64>>) -> PyResult<Self> {
        filterbank::AnalysisBank::from_filters(filters)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn filters(&self) -> Vec<Vec<f64>> {
        self.0.filters().to_vec()
    }

    #[getter]
    fn subbands(&self) -> usize {
        self.0.subbands()
    }

    fn power_complementarity_ripple_db(&self) -> f64 {
        self.0.power_complementarity_ripple_db()
    }

    /// Filters `x` through every band (no decimation).
    fn analyze(&self, py: Python<'_>, x: Vec<f64>) -> Vec<Vec<f64>> {
        py.detach(|| filterbank::analyze(&self.0, &x))
    }
}

/// One adaptive filter: `rule` is "nsaf", "mcc", "lc" or "sign".
#[pyclass(name = "AdaptiveFilter")]
struct PyAdaptive(adaptive::AdaptiveState);

#[pymethods]
impl PyAdaptive {
    #[new]
    #[pyo3(signature = (m, mu, rule_kind = "nsaf", param = 0.0, eps = None))]
    fn new(m: usize, mu: f64, rule_kind: &str, param: f64, eps: Option<f64>) -> PyResult<Self> {
        let r = rule(rule_kind, param)?;
        let state = match eps {
            Some(e) => adaptive::AdaptiveState::new(m, mu, e, r),
            None => adaptive::AdaptiveState::with_default_eps(m, mu, r),
        };
        state.map(Self).map_err(to_py)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    #[setter]
    fn set_weights(&mut self, w: Vec<f64>) -> PyResult<()> {
        self.0.set_weights(&w).map_err(to_py)
    }

    #[getter]
    fn step_size(&self) -> f64 {
        self.0.step_size()
    }

    #[getter]
    fn regularization(&self) -> f64 {
        self.0.regularization()
    }

    /// One block update from per-band regressors and desired samples;
    /// returns the a-priori subband errors.
    fn update(&mut self, regressors: Vec<Vec<f64>>, desired: Vec<f64>) -> PyResult<Vec<f64>> {
        let frame = SubbandFrame::new(0, regressors, desired).map_err(to_py)?;
        self.0.update(&frame).map_err(to_py)
    }

    /// Runs the filter over every block of non-decimated subband streams.
    /// Returns the per-block NMSD (dB) against `w_o`, or `[]` without it.
    #[pyo3(signature = (u_subbands, d_subbands, w_o = None))]
    fn adapt(
        &mut self,
        py: Python<'_>,
        u_subbands: Vec<Vec<f64>>,
        d_subbands: Vec<Vec<f64>>,
        w_o: Option<Vec<f64>>,
    ) -> PyResult<Vec<f64>> {
        let state = &mut self.0;
        py.detach(|| {
            let m = state.filter_len();
            let mut cursor = filterbank::FrameCursor::new(&u_subbands, &d_subbands, m)?;
            let mut curve = Vec::with_capacity(cursor.blocks());
            while let Some(frame) = cursor.advance() {
                state.update(frame)?;
                if let Some(w) = &w_o {
                    curve.push(metrics::nmsd(w, state.weights())?);
                }
            }
            Ok(curve)
        })
        .map_err(to_py)
    }
}

#[pyfunction]
#[pyo3(signature = (subbands = 4, taps = 32, attenuation_db = 60.0))]
fn design_prototype(subbands: usize, taps: usize, attenuation_db: f64) -> PyResult<PyPrototype> {
    filterbank::design_prototype(subbands, taps, attenuation_db)
        .map(PyPrototype)
        .map_err(to_py)
}

/// `(regressors, desired)` of block `k` from non-decimated subband streams.
#[pyfunction]
fn frame(
    u_subbands: Vec<Vec<f64>>,
    d_subbands: Vec<Vec<f64>>,
    k: usize,
    m: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let f = filterbank::frame(&u_subbands, &d_subbands, k, m).map_err(to_py)?;
    Ok((f.regressors().to_vec(), f.desired().to_vec()))
}

#[pyfunction]
fn gen_ar1(n: usize, pole: f64, seed: u64) -> PyResult<Vec<f64>> {
    signals::gen_ar1(n, pole, seed).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (m, seed, decay = 100.0))]
fn gen_system(m: usize, seed: u64, decay: f64) -> PyResult<Vec<f64>> {
    signals::gen_system(m, decay, seed)
        .map(|s| s.taps().to_vec())
        .map_err(to_py)
}

#[pyfunction]
fn gen_measurement_noise(clean: Vec<f64>, snr_db: f64, seed: u64) -> PyResult<Vec<f64>> {
    signals::gen_measurement_noise(&clean, snr_db, seed).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (n, pr, clean_power, seed, amp_factor = 100.0))]
fn gen_bg_impulses(
    n: usize,
    pr: f64,
    clean_power: f64,
    seed: u64,
    amp_factor: f64,
) -> PyResult<Vec<f64>> {
    let spec = signals::NoiseSpec {
        pr,
        amp_factor,
        ..Default::default()
    };
    signals::gen_bg_impulses(n, &spec, clean_power, seed).map_err(to_py)
}

/// `d = w_o * u + v + θ`, with `w_o` negated from `flip_at` on.
#[pyfunction]
#[pyo3(signature = (u, w_o, v, theta, flip_at = None))]
fn desired(
    u: Vec<f64>,
    w_o: Vec<f64>,
    v: Vec<f64>,
    theta: Vec<f64>,
    flip_at: Option<usize>,
) -> PyResult<Vec<f64>> {
    let system = signals::SystemModel::new(w_o, flip_at).map_err(to_py)?;
    signals::desired(&u, &system, &v, &theta).map_err(to_py)
}

#[pyfunction]
fn nmsd(w_o: Vec<f64>, w: Vec<f64>) -> PyResult<f64> {
    metrics::nmsd(&w_o, &w).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (values_db, window = 500))]
fn steady_state(values_db: Vec<f64>, window: usize) -> PyResult<f64> {
    metrics::steady_state(&values_db, window).map_err(to_py)
}

fn options(threads: Option<usize>) -> RunOptions {
    threads.map_or_else(RunOptions::from_env, |t| RunOptions { threads: t.max(1) })
}

/// Runs the experiment described by TOML config text and returns
/// `{label: [nmsd_db per block]}`.
#[pyfunction]
#[pyo3(signature = (config_text, threads = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config_text: &str,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let (config, _) = parse_config(config_text).map_err(to_py)?;
    let result = py
        .detach(|| harness::run_experiment(&config, options(threads)))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    for t in result.traces {
        out.set_item(t.label, t.values_db)?;
    }
    Ok(out)
}

/// Runs a sweep config and returns `[(algorithm, param, pr, steady_db, diverged)]`.
#[pyfunction]
#[pyo3(signature = (config_text, threads = None))]
fn run_sweep(
    py: Python<'_>,
    config_text: &str,
    threads: Option<usize>,
) -> PyResult<Vec<(String, f64, f64, f64, bool)>> {
    let (base, grid) = parse_config(config_text).map_err(to_py)?;
    let grid = grid.ok_or_else(|| PyValueError::new_err("a sweep config needs a [sweep] table"))?;
    let sweep = SweepConfig { base, grid };
    let result = py
        .detach(|| harness::run_sweep(&sweep, options(threads)))
        .map_err(to_py)?;
    Ok(result
        .rows
        .into_iter()
        .map(|r| (r.algorithm, r.param, r.pr, r.steady_state_db, r.diverged))
        .collect())
}

#[pymodule]
fn sraf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPrototype>()?;
    m.add_class::<PyAnalysisBank>()?;
    m.add_class::<PyAdaptive>()?;
    m.add_function(wrap_pyfunction!(design_prototype, m)?)?;
    m.add_function(wrap_pyfunction!(frame, m)?)?;
    m.add_function(wrap_pyfunction!(gen_ar1, m)?)?;
    m.add_function(wrap_pyfunction!(gen_system, m)?)?;
    m.add_function(wrap_pyfunction!(gen_measurement_noise, m)?)?;
    m.add_function(wrap_pyfunction!(gen_bg_impulses, m)?)?;
    m.add_function(wrap_pyfunction!(desired, m)?)?;
    m.add_function(wrap_pyfunction!(nmsd, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
