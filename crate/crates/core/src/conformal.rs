//! Adaptive sampling with conformal-quantile stopping.
//!
//! After each new labeled sample the nonconformity scores `|S_i − S̄|` are
//! recomputed around the running mean `S̄`, and the `(1−ε)` conformal quantile
//! is compared with the previous one. Sampling halts once the change stays
//! within `ξ`.

use serde::{Deserialize, Serialize};

use crate::em::JudgmentSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    /// Miscoverage level; the quantile targets `1 − epsilon` coverage.
    pub epsilon: f64,
    /// Largest tolerated change between successive quantiles.
    pub xi: f64,
    /// Scale of the sample-count bound.
    pub tau: f64,
    pub min_samples: usize,
    pub consecutive_hits: usize,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        Self::new(0.1, 0.03, 25.0)
    }
}

impl StoppingConfig {
    /// Floor set from the approximate sample-count bound for `(xi, tau)`.
    pub fn new(epsilon: f64, xi: f64, tau: f64) -> Self {
        let floor = if xi > 0.0 && tau > 0.0 && xi.is_finite() {
            theoretical_min_samples(xi, tau, BoundMode::Approximate) as usize
        } else {
            2
        };
        Self { epsilon, xi, tau, min_samples: floor.max(2), consecutive_hits: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::domain(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if !(self.xi > 0.0) {
            return Err(Error::domain("xi must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::domain("tau must be positive"));
        }
        if self.min_samples < 2 {
            return Err(Error::domain("min_samples must be at least 2"));
        }
        if self.consecutive_hits == 0 {
            return Err(Error::domain("consecutive_hits must be at least 1"));
        }
        Ok(())
    }
}

/// Sampling state after `r` iterations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConformalState {
    pub observed: Vec<JudgmentSample>,
    pub running_mean: f64,
    /// Stopping statistic after each iteration: the conformal quantile, or the
    /// Beta variance for the variance baseline.
    pub quantile_history: Vec<f64>,
    pub mean_history: Vec<f64>,
}

impl ConformalState {
    pub fn sample_count(&self) -> usize {
        self.observed.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub state: ConformalState,
    /// False when the stream ran dry before the stopping rule fired.
    pub criterion_met: bool,
}

impl AdaptiveOutcome {
    pub fn samples(&self) -> &[JudgmentSample] {
        &self.state.observed
    }
}

pub fn nonconformity_scores(samples: &[JudgmentSample], center: f64) -> Vec<f64> {
    samples.iter().map(|s| (s.correct() as f64 - center).abs()).collect()
}

/// The `⌈(1−ε)(r+1)⌉`-th smallest score (1-based), clamped to the largest.
pub fn conformal_quantile(scores: &[f64], epsilon: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, have: 0 });
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len();
    let rank = ((1.0 - epsilon) * (r as f64 + 1.0)).ceil();
    let rank = (rank.max(1.0) as usize).min(r);
    Ok(sorted[rank - 1])
}

fn stopping_rule(history: &[f64], r: usize, config: &StoppingConfig) -> bool {
    if r < config.min_samples || history.len() < config.consecutive_hits + 1 {
        return false;
    }
    history.windows(2).rev().take(config.consecutive_hits).all(|w| (w[1] - w[0]).abs() <= config.xi)
}

/// True once at least `min_samples` are in and the last `consecutive_hits`
/// quantile changes were all within `xi`.
pub fn should_stop(state: &ConformalState, config: &StoppingConfig) -> bool {
    stopping_rule(&state.quantile_history, state.sample_count(), config)
}

fn drive<I, F>(stream: I, config: &StoppingConfig, statistic: F) -> Result<AdaptiveOutcome>
where
    I: IntoIterator<Item = JudgmentSample>,
    F: Fn(&[JudgmentSample], f64) -> Result<f64>,
{
    config.validate()?;
    let mut state = ConformalState::default();
    let mut total = 0u64;
    for sample in stream {
        state.observed.push(sample);
        total += sample.correct() as u64;
        state.running_mean = total as f64 / state.observed.len() as f64;
        let value = statistic(&state.observed, state.running_mean)?;
        state.quantile_history.push(value);
        state.mean_history.push(state.running_mean);
        if should_stop(&state, config) {
            return Ok(AdaptiveOutcome { state, criterion_met: true });
        }
    }
    Ok(AdaptiveOutcome { state, criterion_met: false })
}

/// Draw from `stream` until the conformal quantile stabilizes or the stream
/// is exhausted.
pub fn adaptive_sample<I>(stream: I, config: &StoppingConfig) -> Result<AdaptiveOutcome>
where
    I: IntoIterator<Item = JudgmentSample>,
{
    let eps = config.epsilon;
    drive(stream, config, |observed, center| conformal_quantile(&nonconformity_scores(observed, center), eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// Smallest `r ≥ 2` satisfying `τ(1/√(r−1) − 1/√r) ≤ ξ`.
    Exact,
    /// `⌈(τ/(2ξ))^{2/3}⌉` from the first-order expansion of the same inequality.
    Approximate,
}

/// `τ(1/√(r−1) − 1/√r)`, rearranged to avoid cancellation for large `r`.
pub fn quantile_drift_bound(r: u64, tau: f64) -> f64 {
    let (a, b) = ((r - 1) as f64, r as f64);
    let (sa, sb) = (a.sqrt(), b.sqrt());
    tau / (sa * sb * (sa + sb))
}

pub fn theoretical_min_samples(xi: f64, tau: f64, mode: BoundMode) -> u64 {
    match mode {
        BoundMode::Approximate => ((tau / (2.0 * xi)).powf(2.0 / 3.0).ceil() as u64).max(2),
        BoundMode::Exact => {
            let mut r = 2u64;
            while quantile_drift_bound(r, tau) > xi {
                r += 1;
            }
            r
        }
    }
}

/// Interval `((1−m)·p, (1+m)·p)` with `m = min(ξ, τ/√r)`, upper end capped at 1.
pub fn error_rate_bounds(p_bb: f64, xi: f64, tau: f64, r: u64) -> (f64, f64) {
    let m = xi.min(tau / (r.max(1) as f64).sqrt());
    ((1.0 - m) * p_bb, ((1.0 + m) * p_bb).min(1.0))
}

/// Variance of `Beta(α_r, β_r)` from the pooled judgment counts of `samples`.
pub fn variance_stopping_quantity(samples: &[JudgmentSample]) -> f64 {
    let alpha: u64 = samples.iter().map(|s| s.correct() as u64).sum();
    let beta: u64 = samples.iter().map(|s| s.incorrect() as u64).sum();
    beta_variance(alpha as f64, beta as f64)
}

fn beta_variance(alpha: f64, beta: f64) -> f64 {
    let n = alpha + beta;
    if n == 0.0 {
        return 0.0;
    }
    alpha * beta / (n * n * (n + 1.0))
}

/// Baseline with the same threshold and floors as [`adaptive_sample`], but
/// watching the pooled Beta variance instead of the conformal quantile.
pub fn variance_adaptive_sample<I>(stream: I, config: &StoppingConfig) -> Result<AdaptiveOutcome>
where
    I: IntoIterator<Item = JudgmentSample>,
{
    drive(stream, config, |observed, _| Ok(variance_stopping_quantity(observed)))
}
