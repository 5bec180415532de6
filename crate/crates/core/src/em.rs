//! Expectation maximization for the two-component mixture.
//!
//! Each labeled sample contributes its success fraction `p_i = S_i/k`. The
//! E-step assigns responsibilities from the two Beta densities at `p_i`; the
//! M-step accumulates responsibility-weighted correct and incorrect judgment
//! counts per component.
//!
//! Samples are tallied by `(s, k)` before iterating: responsibilities depend on
//! nothing else, and the handful of distinct pairs keeps each step cheap even
//! for thousands of samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::{beta_ln_pdf, mixture_pmf, BinomialParams, EnsembleSize, MixtureParams};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// `s` correct judgments out of a pool of `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JudgmentSample {
    s: u32,
    k: EnsembleSize,
}

impl JudgmentSample {
    pub fn new(s: u32, k: u32) -> Result<Self> {
        let k = EnsembleSize::new(k)?;
        if s > k.get() {
            return Err(Error::domain(format!("count s={s} exceeds pool size k={k}")));
        }
        Ok(Self { s, k })
    }

    pub fn correct(&self) -> u32 {
        self.s
    }

    pub fn incorrect(&self) -> u32 {
        self.k.get() - self.s
    }

    pub fn pool(&self) -> EnsembleSize {
        self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Method-of-moments Beta fits on either side of the median success fraction.
    MedianSplit,
    /// `w = 0.5`, `(2, 1)` and `(1, 2)`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// `α_j' = Σγ_j·S / Σγ_j`, `β_j' = Σγ_j·(k−S) / Σγ_j`.
    Normalized,
    /// `α_j' = Σγ_j·S`, `β_j' = Σγ_j·(k−S)`; concentration grows with the sample count.
    PseudoCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute parameter change.
    pub tol: f64,
    /// Clamp for success fractions; `None` picks `1/(2·k_max)` of the batch.
    pub boundary_smoothing: Option<f64>,
    pub param_floor: f64,
    pub init: InitStrategy,
    pub update: UpdateRule,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-6,
            boundary_smoothing: None,
            param_floor: 1e-3,
            init: InitStrategy::MedianSplit,
            update: UpdateRule::Normalized,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::domain("tol must be positive"));
        }
        if !(self.param_floor > 0.0) {
            return Err(Error::domain("param_floor must be positive"));
        }
        if let Some(d) = self.boundary_smoothing {
            if !(d > 0.0 && d < 0.5) {
                return Err(Error::domain("boundary_smoothing must lie in (0, 0.5)"));
            }
        }
        Ok(())
    }

    fn smoothing_for(&self, samples: &[JudgmentSample]) -> f64 {
        self.boundary_smoothing.unwrap_or_else(|| {
            let k_max = samples.iter().map(|s| s.k.get()).max().unwrap_or(1);
            (0.5 / k_max as f64).min(0.25)
        })
    }
}

/// Per-iteration parameters and log-likelihoods of one fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmTrace {
    pub params: Vec<MixtureParams>,
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

impl EmTrace {
    pub fn iterations(&self) -> usize {
        self.params.len()
    }
}

pub fn success_fraction(sample: JudgmentSample, smoothing: f64) -> f64 {
    let p = sample.s as f64 / sample.k.get() as f64;
    p.clamp(smoothing, 1.0 - smoothing)
}

/// Posterior probability `γ₁` that a sample with success fraction `p` came from
/// the first component.
pub fn responsibility(p: f64, params: &MixtureParams) -> Result<f64> {
    if params.w == 1.0 {
        return Ok(1.0);
    }
    if params.w == 0.0 {
        return Ok(0.0);
    }
    let first = params.w.ln() + beta_ln_pdf(p, params.alpha1, params.beta1)?;
    let second = (-params.w).ln_1p() + beta_ln_pdf(p, params.alpha2, params.beta2)?;
    if !(first.is_finite() || second.is_finite()) {
        return Err(Error::DegenerateDensities { p });
    }
    // logistic of the log-odds; stays finite when one side underflows
    Ok(1.0 / (1.0 + (second - first).exp()))
}

fn tally(samples: &[JudgmentSample]) -> Vec<(JudgmentSample, f64)> {
    let mut counts: BTreeMap<JudgmentSample, usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(*s).or_default() += 1;
    }
    counts.into_iter().map(|(s, n)| (s, n as f64)).collect()
}

fn step_tallied(
    tallied: &[(JudgmentSample, f64)],
    total: f64,
    params: &MixtureParams,
    smoothing: f64,
    config: &EmConfig,
) -> Result<MixtureParams> {
    let mut weight = [CompensatedSum::new(), CompensatedSum::new()];
    let mut correct = [CompensatedSum::new(), CompensatedSum::new()];
    let mut incorrect = [CompensatedSum::new(), CompensatedSum::new()];
    for (sample, mult) in tallied {
        let g1 = responsibility(success_fraction(*sample, smoothing), params)?;
        for (j, g) in [g1, 1.0 - g1].into_iter().enumerate() {
            weight[j].add(mult * g);
            correct[j].add(mult * g * sample.correct() as f64);
            incorrect[j].add(mult * g * sample.incorrect() as f64);
        }
    }
    let floor = config.param_floor;
    let shapes = |j: usize| -> (f64, f64) {
        let (a, b) = (correct[j].value(), incorrect[j].value());
        let (a, b) = match config.update {
            UpdateRule::PseudoCount => (a, b),
            UpdateRule::Normalized => {
                let n = weight[j].value();
                if n > 0.0 {
                    (a / n, b / n)
                } else {
                    (0.0, 0.0)
                }
            }
        };
        (a.max(floor), b.max(floor))
    };
    let (alpha1, beta1) = shapes(0);
    let (alpha2, beta2) = shapes(1);
    let w = (weight[0].value() / total).clamp(0.0, 1.0);
    Ok(MixtureParams { w, alpha1, beta1, alpha2, beta2 })
}

/// One E+M step.
pub fn em_step(samples: &[JudgmentSample], params: &MixtureParams, config: &EmConfig) -> Result<MixtureParams> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, have: 0 });
    }
    config.validate()?;
    params.validate()?;
    let smoothing = config.smoothing_for(samples);
    step_tallied(&tally(samples), samples.len() as f64, params, smoothing, config)
}

fn moment_match(values: &[f64], floor: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let concentration = if values.len() >= 2 && var > 1e-12 && var < mean * (1.0 - mean) {
        mean * (1.0 - mean) / var - 1.0
    } else {
        2.0
    };
    ((mean * concentration).max(floor), ((1.0 - mean) * concentration).max(floor))
}

/// Starting point of the EM iterations.
pub fn initial_params(samples: &[JudgmentSample], config: &EmConfig) -> Result<MixtureParams> {
    let fixed = MixtureParams { w: 0.5, alpha1: 2.0, beta1: 1.0, alpha2: 1.0, beta2: 2.0 };
    if config.init == InitStrategy::Fixed || samples.is_empty() {
        return Ok(fixed);
    }
    let smoothing = config.smoothing_for(samples);
    let mut fractions: Vec<f64> = samples.iter().map(|s| success_fraction(*s, smoothing)).collect();
    fractions.sort_by(f64::total_cmp);
    let n = fractions.len();
    let median = if n % 2 == 1 { fractions[n / 2] } else { 0.5 * (fractions[n / 2 - 1] + fractions[n / 2]) };
    let mut upper: Vec<f64> = fractions.iter().copied().filter(|&p| p > median).collect();
    if upper.is_empty() {
        upper = fractions.iter().copied().filter(|&p| p >= median).collect();
    }
    let lower: Vec<f64> = fractions.iter().copied().filter(|&p| p < upper[0]).collect();

    let (alpha1, beta1) = moment_match(&upper, config.param_floor);
    let (alpha2, beta2) =
        if lower.is_empty() { (fixed.alpha2, fixed.beta2) } else { moment_match(&lower, config.param_floor) };
    MixtureParams::new(upper.len() as f64 / n as f64, alpha1, beta1, alpha2, beta2)
}

/// Fit from the configured initialization.
pub fn fit_mixture(samples: &[JudgmentSample], config: &EmConfig) -> Result<(MixtureParams, EmTrace)> {
    let init = initial_params(samples, config)?;
    fit_mixture_from(samples, init, config)
}

/// Iterate [`em_step`] from `init` until the largest parameter change drops
/// below `tol` or `max_iter` steps have run. Non-convergence is reported in
/// the trace, not as an error.
pub fn fit_mixture_from(
    samples: &[JudgmentSample],
    init: MixtureParams,
    config: &EmConfig,
) -> Result<(MixtureParams, EmTrace)> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, have: samples.len() });
    }
    config.validate()?;
    init.validate()?;
    let smoothing = config.smoothing_for(samples);
    let tallied = tally(samples);
    let total = samples.len() as f64;

    let mut trace = EmTrace::default();
    let mut params = init;
    for _ in 0..config.max_iter {
        let next = step_tallied(&tallied, total, &params, smoothing, config)?;
        let change = params.as_array().iter().zip(next.as_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        trace.log_likelihood.push(log_likelihood_tallied(&tallied, &next)?);
        trace.params.push(next);
        params = next;
        if change < config.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((params, trace))
}

fn log_likelihood_tallied(tallied: &[(JudgmentSample, f64)], params: &MixtureParams) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for (sample, mult) in tallied {
        acc.add(mult * mixture_pmf(sample.s, sample.k, params)?.ln());
    }
    Ok(acc.value())
}

/// `Σ ln P(S_i)` under the mixture.
pub fn log_likelihood(samples: &[JudgmentSample], params: &MixtureParams) -> Result<f64> {
    log_likelihood_tallied(&tally(samples), params)
}

/// Binomial baseline: pooled single-judge accuracy `ΣS / Σk`.
pub fn fit_binomial(samples: &[JudgmentSample]) -> Result<BinomialParams> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, have: 0 });
    }
    let correct: u64 = samples.iter().map(|s| s.s as u64).sum();
    let total: u64 = samples.iter().map(|s| s.k.get() as u64).sum();
    BinomialParams::new(correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn js(s: u32, k: u32) -> JudgmentSample {
        JudgmentSample::new(s, k).unwrap()
    }

    fn beta_pdf_direct(x: f64, a: f64, b: f64) -> f64 {
        // Γ via exp(lgamma) is fine for these small shapes
        let norm = libm::tgamma(a + b) / (libm::tgamma(a) * libm::tgamma(b));
        norm * x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0)
    }

    #[test]
    fn success_fraction_clamps() {
        assert_eq!(success_fraction(js(5, 10), 0.02), 0.5);
        assert_eq!(success_fraction(js(0, 11), 0.02), 0.02);
        assert_eq!(success_fraction(js(11, 11), 0.02), 0.98);
    }

    #[test]
    fn responsibility_cases() {
        let same = MixtureParams::new(0.3, 2.0, 5.0, 2.0, 5.0).unwrap();
        for p in [0.05, 0.4, 0.93] {
            assert_abs_diff_eq!(responsibility(p, &same).unwrap(), 0.3, epsilon = 1e-14);
        }
        let full = MixtureParams::new(1.0, 2.0, 5.0, 7.0, 1.0).unwrap();
        assert_eq!(responsibility(0.5, &full).unwrap(), 1.0);

        let p = MixtureParams::new(0.5, 8.0, 2.0, 2.0, 8.0).unwrap();
        let d1 = beta_pdf_direct(0.9, 8.0, 2.0);
        let d2 = beta_pdf_direct(0.9, 2.0, 8.0);
        let oracle = 0.5 * d1 / (0.5 * d1 + 0.5 * d2);
        let g = responsibility(0.9, &p).unwrap();
        assert_abs_diff_eq!(g, oracle, epsilon = 1e-12);
        assert!(g > 0.99);
    }

    #[test]
    fn responsibility_survives_extreme_shapes() {
        let p = MixtureParams::new(0.6, 3e4, 7e3, 5e3, 1.5e4).unwrap();
        let g = responsibility(0.02, &p).unwrap();
        assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn em_step_hand_values() {
        let cfg = EmConfig { update: UpdateRule::PseudoCount, ..EmConfig::default() };
        let all_first = MixtureParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let next = em_step(&[js(3, 5)], &all_first, &cfg).unwrap();
        assert_eq!(next.w, 1.0);
        assert_abs_diff_eq!(next.alpha1, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(next.beta1, 2.0, epsilon = 1e-15);
        assert_eq!(next.alpha2, cfg.param_floor);
        assert_eq!(next.beta2, cfg.param_floor);

        let norm = em_step(&[js(3, 5)], &all_first, &EmConfig::default()).unwrap();
        assert_eq!(norm.as_array(), next.as_array());

        let many = em_step(&[js(3, 5), js(1, 5), js(5, 5)], &all_first, &cfg).unwrap();
        assert_eq!(many.w, 1.0);
    }

    #[test]
    fn em_step_symmetric_samples_give_half_weight() {
        let init = MixtureParams::new(0.5, 2.0, 1.0, 1.0, 2.0).unwrap();
        let samples = [js(1, 5), js(4, 5), js(0, 5), js(5, 5), js(2, 5), js(3, 5)];
        for update in [UpdateRule::Normalized, UpdateRule::PseudoCount] {
            let cfg = EmConfig { update, ..EmConfig::default() };
            let next = em_step(&samples, &init, &cfg).unwrap();
            assert_abs_diff_eq!(next.w, 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(next.alpha1, next.beta2, epsilon = 1e-12);
        }
    }

    #[test]
    fn fit_degenerate_all_correct() {
        let samples = vec![js(11, 11); 20];
        let cfg = EmConfig::default();
        let (params, _) = fit_mixture(&samples, &cfg).unwrap();
        let delta = 0.5 / 11.0;
        assert!(params.mean_accuracy() >= 1.0 - 2.0 * delta, "{params:?}");
    }

    #[test]
    fn fit_two_samples_is_live() {
        let (params, trace) = fit_mixture(&[js(2, 11), js(9, 11)], &EmConfig::default()).unwrap();
        params.validate().unwrap();
        assert!(trace.iterations() >= 1);
        assert!(fit_mixture(&[js(2, 11)], &EmConfig::default()).is_err());
    }

    #[test]
    fn trace_respects_max_iter() {
        let cfg = EmConfig { max_iter: 3, tol: 1e-300, ..EmConfig::default() };
        let samples = [js(1, 11), js(10, 11), js(6, 11), js(0, 11)];
        let (_, trace) = fit_mixture(&samples, &cfg).unwrap();
        assert_eq!(trace.iterations(), 3);
        assert!(!trace.converged);
    }

    #[test]
    fn log_likelihood_examples() {
        let u = MixtureParams::single(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(log_likelihood(&[js(2, 3)], &u).unwrap(), 0.25f64.ln(), epsilon = 1e-14);
        let p = MixtureParams::new(0.7, 8.0, 2.0, 1.5, 6.0).unwrap();
        let one = log_likelihood(&[js(4, 11)], &p).unwrap();
        let two = log_likelihood(&[js(4, 11), js(4, 11)], &p).unwrap();
        assert_eq!(two, 2.0 * one);
        assert!(one <= 0.0);
    }

    #[test]
    fn binomial_baseline_pools_counts() {
        let b = fit_binomial(&[js(3, 4), js(1, 4)]).unwrap();
        assert_eq!(b.p_hat(), 0.5);
    }

    #[test]
    fn median_split_puts_easy_items_first() {
        let samples = [js(10, 11), js(9, 11), js(1, 11), js(2, 11), js(11, 11)];
        let init = initial_params(&samples, &EmConfig::default()).unwrap();
        assert!(init.alpha1 / (init.alpha1 + init.beta1) > init.alpha2 / (init.alpha2 + init.beta2));
        assert_abs_diff_eq!(init.w, 0.4, epsilon = 1e-15);
    }
}
