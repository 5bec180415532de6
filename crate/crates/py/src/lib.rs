//! Python bindings for `judgmix`.
//!
//! Judgment samples cross the boundary as `(s, k)` tuples: `s` correct
//! verdicts out of `k` judges.

use judgmix::conformal::{self, BoundMode, StoppingConfig};
use judgmix::dist::{self, BinomialParams, EnsembleSize};
use judgmix::em::{self, EmConfig, JudgmentSample, UpdateRule};
use judgmix::eval::{self, JudgmentRecord};
use judgmix::sim::{self, GeneratorSpec};
use judgmix::transfer::{self, Gate, SizeWeight, TransferConfig};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(err: judgmix::Error) -> PyErr {
    match err {
        judgmix::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for judgmix::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn samples(pairs: &[(u32, u32)]) -> PyResult<Vec<JudgmentSample>> {
    pairs.iter().map(|&(s, k)| JudgmentSample::new(s, k)).collect::<judgmix::Result<_>>().py()
}

fn size(k: u32) -> PyResult<EnsembleSize> {
    EnsembleSize::new(k).py()
}

/// Two-component Beta-Binomial mixture parameters.
#[pyclass(name = "MixtureParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyMixtureParams {
    inner: dist::MixtureParams,
}

#[pymethods]
impl PyMixtureParams {
    #[new]
    fn new(w: f64, alpha1: f64, beta1: f64, alpha2: f64, beta2: f64) -> PyResult<Self> {
        Ok(Self { inner: dist::MixtureParams::new(w, alpha1, beta1, alpha2, beta2).py()? })
    }

    #[getter]
    fn w(&self) -> f64 {
        self.inner.w
    }
    #[getter]
    fn alpha1(&self) -> f64 {
        self.inner.alpha1
    }
    #[getter]
    fn beta1(&self) -> f64 {
        self.inner.beta1
    }
    #[getter]
    fn alpha2(&self) -> f64 {
        self.inner.alpha2
    }
    #[getter]
    fn beta2(&self) -> f64 {
        self.inner.beta2
    }

    fn pmf(&self, s: u32, k: u32) -> PyResult<f64> {
        dist::mixture_pmf(s, size(k)?, &self.inner).py()
    }

    fn pmf_vec(&self, k: u32) -> PyResult<Vec<f64>> {
        dist::mixture_pmf_vec(size(k)?, &self.inner).py()
    }

    /// Majority-vote error rate for an odd ensemble of `k` judges.
    fn error_rate(&self, k: u32) -> PyResult<f64> {
        dist::mixture_error_rate(size(k)?, &self.inner).py()
    }

    fn mean_accuracy(&self) -> f64 {
        self.inner.mean_accuracy()
    }

    fn swapped(&self) -> Self {
        Self { inner: self.inner.swapped() }
    }

    fn as_tuple(&self) -> (f64, f64, f64, f64, f64) {
        let p = &self.inner;
        (p.w, p.alpha1, p.beta1, p.alpha2, p.beta2)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "MixtureParams(w={}, alpha1={}, beta1={}, alpha2={}, beta2={})",
            p.w, p.alpha1, p.beta1, p.alpha2, p.beta2
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

#[pyfunction]
fn betabinomial_pmf(s: u32, k: u32, alpha: f64, beta: f64) -> PyResult<f64> {
    dist::betabinomial_pmf(s, size(k)?, alpha, beta).py()
}

#[pyfunction]
fn binomial_pmf(s: u32, k: u32, p: f64) -> PyResult<f64> {
    dist::binomial_pmf(s, size(k)?, BinomialParams::new(p).py()?).py()
}

#[pyfunction]
fn binomial_error_rate(k: u32, p: f64) -> PyResult<f64> {
    dist::binomial_error_rate(size(k)?, BinomialParams::new(p).py()?).py()
}

/// Fit by EM. Returns `(params, iterations, converged)`.
#[pyfunction]
#[pyo3(signature = (samples, max_iter = 500, tol = 1e-6, update = "normalized"))]
fn fit_mixture(
    py: Python<'_>,
    samples: Vec<(u32, u32)>,
    max_iter: usize,
    tol: f64,
    update: &str,
) -> PyResult<(PyMixtureParams, usize, bool)> {
    let update = match update {
        "normalized" => UpdateRule::Normalized,
        "pseudo_count" => UpdateRule::PseudoCount,
        other => return Err(PyValueError::new_err(format!("unknown update rule {other:?}"))),
    };
    let data = self::samples(&samples)?;
    let config = EmConfig { max_iter, tol, update, ..EmConfig::default() };
    let (params, trace) = py.detach(|| em::fit_mixture(&data, &config)).py()?;
    Ok((PyMixtureParams { inner: params }, trace.iterations(), trace.converged))
}

/// Pooled single-judge accuracy.
#[pyfunction]
fn fit_binomial(samples: Vec<(u32, u32)>) -> PyResult<f64> {
    Ok(em::fit_binomial(&self::samples(&samples)?).py()?.p_hat())
}

#[pyfunction]
fn conformal_quantile(scores: Vec<f64>, epsilon: f64) -> PyResult<f64> {
    conformal::conformal_quantile(&scores, epsilon).py()
}

#[pyfunction]
#[pyo3(signature = (xi, tau, exact = false))]
fn theoretical_min_samples(xi: f64, tau: f64, exact: bool) -> PyResult<u64> {
    if !(xi > 0.0 && tau > 0.0 && xi.is_finite() && tau.is_finite()) {
        return Err(PyValueError::new_err("xi and tau must be positive and finite"));
    }
    Ok(conformal::theoretical_min_samples(xi, tau, if exact { BoundMode::Exact } else { BoundMode::Approximate }))
}

#[pyfunction]
fn error_rate_bounds(p: f64, xi: f64, tau: f64, r: u64) -> (f64, f64) {
    conformal::error_rate_bounds(p, xi, tau, r)
}

/// Consume `stream` in order until the stopping rule fires.
/// Returns `(samples_used, criterion_met, quantile_history)`.
#[pyfunction]
#[pyo3(signature = (stream, xi = 0.03, tau = 25.0, epsilon = 0.1, min_samples = None))]
fn adaptive_sample(
    stream: Vec<(u32, u32)>,
    xi: f64,
    tau: f64,
    epsilon: f64,
    min_samples: Option<usize>,
) -> PyResult<(usize, bool, Vec<f64>)> {
    let mut config = StoppingConfig::new(epsilon, xi, tau);
    if let Some(m) = min_samples {
        config.min_samples = m;
    }
    let out = conformal::adaptive_sample(samples(&stream)?, &config).py()?;
    Ok((out.samples().len(), out.criterion_met, out.state.quantile_history))
}

#[pyfunction]
fn cosine_similarity(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    transfer::cosine_similarity(&u, &v).py()
}

/// Transfer weight λ for a source of `r` samples at the given similarity.
#[pyfunction]
#[pyo3(signature = (r, similarity, steepness = 10.0, threshold = 0.7, linear_size = false, gate = true))]
fn transfer_weight(
    r: usize,
    similarity: f64,
    steepness: f64,
    threshold: f64,
    linear_size: bool,
    gate: bool,
) -> PyResult<f64> {
    let config = TransferConfig {
        steepness,
        threshold,
        size_weight: if linear_size { SizeWeight::Linear } else { SizeWeight::Log },
        gate: if gate { Gate::Sigmoid } else { Gate::None },
        ..TransferConfig::default()
    };
    config.validate().py()?;
    Ok(config.weight_at(r, similarity))
}

/// Weighted average of the target and source parameters; `weights[0]` is the target's.
#[pyfunction]
fn blend(target: PyMixtureParams, sources: Vec<PyMixtureParams>, weights: Vec<f64>) -> PyResult<PyMixtureParams> {
    let sources: Vec<_> = sources.iter().map(|p| p.inner).collect();
    Ok(PyMixtureParams { inner: transfer::blend_parameters(&target.inner, &sources, &weights).py()? })
}

/// Draw `n` records and return their `(s, k)` counts.
#[pyfunction]
fn simulate(params: PyMixtureParams, k: u32, n: usize, seed: u64) -> PyResult<Vec<(u32, u32)>> {
    let spec = GeneratorSpec { params: params.inner, k: size(k)?, n, seed };
    let records = sim::sample_judgments(&spec).py()?;
    Ok(records.iter().map(|r| (r.correct(), r.pool())).collect())
}

/// Mean sub-ensemble failure probability of records given as `(s, pool)`.
#[pyfunction]
fn actual_error_rate(records: Vec<(u32, u32)>, k: u32) -> PyResult<f64> {
    let recs = records
        .iter()
        .enumerate()
        .map(|(i, &(s, pool))| JudgmentRecord::from_count(i.to_string(), s, pool))
        .collect::<judgmix::Result<Vec<_>>>()
        .py()?;
    eval::actual_error_rate(&recs, size(k)?).py()
}

#[pymodule]
#[pyo3(name = "judgmix")]
fn judgmix_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMixtureParams>()?;
    m.add_function(wrap_pyfunction!(betabinomial_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_error_rate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(fit_binomial, m)?)?;
    m.add_function(wrap_pyfunction!(conformal_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_min_samples, m)?)?;
    m.add_function(wrap_pyfunction!(error_rate_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_sample, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(transfer_weight, m)?)?;
    m.add_function(wrap_pyfunction!(blend, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(actual_error_rate, m)?)?;
    Ok(())
}
