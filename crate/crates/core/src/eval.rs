//! Evaluation protocol: actual versus estimated majority-vote error rates
//! across ensemble sizes, and repeated sample → fit → margin experiments.
//!
//! The actual `k`-judge error rate of a dataset whose records hold verdicts
//! from a pool of `k_max` judges is the expectation over all size-`k` judge
//! subsets, i.e. a hypergeometric average over the correct judges drawn.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{adaptive_sample, StoppingConfig};
use crate::dist::{binomial_error_rate, mixture_error_rate, EnsembleSize, MixtureParams};
use crate::em::{fit_binomial, fit_mixture, EmConfig, JudgmentSample};
use crate::error::{Error, Result};
use crate::numeric::{choose_exact, compensated_sum, mean_std};
use crate::sim::substream;
use crate::transfer::{transfer_estimate, EmbeddingSet, SourceInput, TransferConfig};

/// One dataset item: per-judge correctness bits, or just the count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    id: String,
    s: u32,
    pool: u32,
    bits: Option<Vec<bool>>,
}

impl JudgmentRecord {
    pub const MAX_POOL: u32 = 64;

    pub fn from_bits(id: String, bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() || bits.len() > Self::MAX_POOL as usize {
            return Err(Error::domain(format!(
                "record {id}: need 1..={} verdicts, got {}",
                Self::MAX_POOL,
                bits.len()
            )));
        }
        let s = bits.iter().filter(|&&b| b).count() as u32;
        Ok(Self { id, s, pool: bits.len() as u32, bits: Some(bits) })
    }

    pub fn from_count(id: String, s: u32, k: u32) -> Result<Self> {
        if k == 0 || k > Self::MAX_POOL {
            return Err(Error::domain(format!("record {id}: pool size {k} outside 1..={}", Self::MAX_POOL)));
        }
        if s > k {
            return Err(Error::domain(format!("record {id}: s={s} exceeds k={k}")));
        }
        Ok(Self { id, s, pool: k, bits: None })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn correct(&self) -> u32 {
        self.s
    }

    pub fn pool(&self) -> u32 {
        self.pool
    }

    pub fn bits(&self) -> Option<&[bool]> {
        self.bits.as_deref()
    }

    pub fn sample(&self) -> JudgmentSample {
        JudgmentSample::new(self.s, self.pool).expect("record invariants hold")
    }
}

/// Distribution of correct judges among `k` drawn without replacement from a
/// pool of `pool` judges of which `s` are correct; index `j = 0..=k`.
pub fn hypergeometric_pmf(s: u32, pool: u32, k: u32) -> Result<Vec<f64>> {
    if s > pool || k > pool || pool > JudgmentRecord::MAX_POOL {
        return Err(Error::domain(format!("invalid hypergeometric (s={s}, pool={pool}, k={k})")));
    }
    let total = choose_exact(pool, k) as f64;
    Ok((0..=k)
        .map(|j| {
            if j > s || k - j > pool - s {
                0.0
            } else {
                (choose_exact(s, j) * choose_exact(pool - s, k - j)) as f64 / total
            }
        })
        .collect())
}

/// Probability that a random `k`-subset of the record's judges votes wrongly.
pub fn subset_failure_probability(record: &JudgmentRecord, k: EnsembleSize) -> Result<f64> {
    if !k.is_odd() {
        return Err(Error::EvenEnsemble(k.get()));
    }
    let pmf = hypergeometric_pmf(record.s, record.pool, k.get())?;
    Ok(compensated_sum(pmf[..k.majority() as usize].iter().copied()))
}

/// Mean sub-ensemble failure probability over `records`.
pub fn actual_error_rate(records: &[JudgmentRecord], k: EnsembleSize) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, have: 0 });
    }
    if !k.is_odd() {
        return Err(Error::EvenEnsemble(k.get()));
    }
    if let Some(r) = records.iter().find(|r| r.pool < k.get()) {
        return Err(Error::domain(format!("k={k} exceeds pool size {} of record {}", r.pool, r.id)));
    }
    let probs = records.iter().map(|r| subset_failure_probability(r, k)).collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(probs) / records.len() as f64)
}

/// What the estimate is compared against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Records(&'a [JudgmentRecord]),
    Params(MixtureParams),
}

impl Reference<'_> {
    pub fn error_rate(&self, k: EnsembleSize) -> Result<f64> {
        match self {
            Reference::Records(records) => actual_error_rate(records, k),
            Reference::Params(params) => mixture_error_rate(k, params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub k: u32,
    pub estimated: f64,
    pub actual: f64,
    pub margin: f64,
}

/// Per-`k` rates and absolute margins, as fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub rows: Vec<MarginRow>,
    pub mean_margin: f64,
}

pub fn parse_k_list(k_list: &[u32]) -> Result<Vec<EnsembleSize>> {
    if k_list.is_empty() {
        return Err(Error::domain("k list is empty"));
    }
    k_list.iter().map(|&k| EnsembleSize::odd(k)).collect()
}

/// Margins for an arbitrary estimator of the `k`-judge error rate.
pub fn error_margin_with<F>(estimate: F, reference: &Reference<'_>, k_list: &[u32]) -> Result<MarginReport>
where
    F: Fn(EnsembleSize) -> Result<f64>,
{
    let ks = parse_k_list(k_list)?;
    let rows = ks
        .into_iter()
        .map(|k| {
            let estimated = estimate(k)?;
            let actual = reference.error_rate(k)?;
            Ok(MarginRow { k: k.get(), estimated, actual, margin: (estimated - actual).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_margin = compensated_sum(rows.iter().map(|r| r.margin)) / rows.len() as f64;
    Ok(MarginReport { rows, mean_margin })
}

pub fn error_margin(estimated: &MixtureParams, reference: &Reference<'_>, k_list: &[u32]) -> Result<MarginReport> {
    error_margin_with(|k| mixture_error_rate(k, estimated), reference, k_list)
}

/// The ensemble sizes used throughout evaluation.
pub const DEFAULT_K_LIST: [u32; 6] = [1, 3, 5, 7, 9, 11];

#[derive(Debug, Clone)]
pub enum Protocol {
    AdaptiveStopping(StoppingConfig),
    FixedR(usize),
    Transfer { r: usize, target_embeddings: EmbeddingSet, sources: Vec<SourceInput>, config: TransferConfig },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Mixture,
    /// Pooled single-judge accuracy under the Binomial assumption.
    Binomial,
}

#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    pub protocol: Protocol,
    pub model: Model,
    /// Pool the repetitions draw labeled samples from.
    pub dataset: &'a [JudgmentRecord],
    pub reference: Reference<'a>,
    pub k_list: Vec<u32>,
    pub em: EmConfig,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: usize,
    pub samples_used: usize,
    pub criterion_met: bool,
    pub params: Option<MixtureParams>,
    pub report: Option<MarginReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunResult>,
    /// Over successful runs.
    pub margin_mean: f64,
    pub margin_std: f64,
    pub mean_samples: f64,
    pub failures: usize,
}

impl ExperimentReport {
    /// Aggregate per-run results; margin statistics cover successful runs only.
    pub fn from_runs(runs: Vec<RunResult>) -> Self {
        let margins: Vec<f64> = runs.iter().filter_map(|r| r.report.as_ref().map(|m| m.mean_margin)).collect();
        let (margin_mean, margin_std) = mean_std(&margins);
        let mean_samples = if runs.is_empty() {
            0.0
        } else {
            runs.iter().map(|r| r.samples_used as f64).sum::<f64>() / runs.len() as f64
        };
        let failures = runs.iter().filter(|r| r.error.is_some()).count();
        Self { runs, margin_mean, margin_std, mean_samples, failures }
    }

    pub fn margins(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.report.as_ref().map(|m| m.mean_margin)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# judgmix margin report v1; rates and margins in percent\n");
        out.push_str("run_id,k,estimated_rate,actual_rate,margin,samples_used\n");
        for run in &self.runs {
            match &run.report {
                Some(report) => {
                    for row in &report.rows {
                        let _ = writeln!(
                            out,
                            "{},{},{:.6},{:.6},{:.6},{}",
                            run.run_id,
                            row.k,
                            100.0 * row.estimated,
                            100.0 * row.actual,
                            100.0 * row.margin,
                            run.samples_used
                        );
                    }
                    let _ = writeln!(out, "{},,,,{:.6},{}", run.run_id, 100.0 * report.mean_margin, run.samples_used);
                }
                None => {
                    let _ = writeln!(out, "{},,,,failed,{}", run.run_id, run.samples_used);
                }
            }
        }
        out
    }
}

/// Order in which repetition `run_id` draws from a dataset of `len` records.
pub fn shuffled_order(len: usize, seed: u64, run_id: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut substream(seed, run_id as u64));
    order
}

fn run_once(exp: &Experiment<'_>, run_id: usize) -> RunResult {
    let order = shuffled_order(exp.dataset.len(), exp.seed, run_id);
    let stream = order.iter().map(|&i| exp.dataset[i].sample());

    let mut result =
        RunResult { run_id, samples_used: 0, criterion_met: true, params: None, report: None, error: None };
    let outcome = (|| -> Result<()> {
        let estimate = |samples: &[JudgmentSample], result: &mut RunResult| -> Result<MarginReport> {
            match exp.model {
                Model::Mixture => {
                    let (params, _) = fit_mixture(samples, &exp.em)?;
                    result.params = Some(params);
                    error_margin(&params, &exp.reference, &exp.k_list)
                }
                Model::Binomial => {
                    let p = fit_binomial(samples)?;
                    error_margin_with(|k| binomial_error_rate(k, p), &exp.reference, &exp.k_list)
                }
            }
        };
        let report = match &exp.protocol {
            Protocol::AdaptiveStopping(config) => {
                let out = adaptive_sample(stream, config)?;
                result.samples_used = out.samples().len();
                result.criterion_met = out.criterion_met;
                estimate(out.samples(), &mut result)?
            }
            Protocol::FixedR(r) => {
                let samples: Vec<JudgmentSample> = stream.take(*r).collect();
                result.samples_used = samples.len();
                estimate(&samples, &mut result)?
            }
            Protocol::Transfer { r, target_embeddings, sources, config } => {
                let samples: Vec<JudgmentSample> = stream.take(*r).collect();
                result.samples_used = samples.len();
                let out = transfer_estimate(&samples, target_embeddings, sources, &exp.em, config)?;
                result.params = Some(out.params);
                error_margin(&out.params, &exp.reference, &exp.k_list)?
            }
        };
        result.report = Some(report);
        Ok(())
    })();
    if let Err(e) = outcome {
        result.error = Some(e.to_string());
    }
    result
}

/// Run `repetitions` independent sample → fit → margin pipelines. Each
/// repetition reshuffles the dataset from its own derived seed, so the report
/// does not depend on how repetitions are scheduled across threads.
pub fn run_experiment(exp: &Experiment<'_>) -> Result<ExperimentReport> {
    if exp.repetitions == 0 {
        return Err(Error::domain("repetitions must be at least 1"));
    }
    if exp.dataset.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, have: 0 });
    }
    parse_k_list(&exp.k_list)?;
    let runs: Vec<RunResult> = (0..exp.repetitions).into_par_iter().map(|i| run_once(exp, i)).collect();
    Ok(ExperimentReport::from_runs(runs))
}
