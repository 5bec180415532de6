//! Prior transfer from source datasets.
//!
//! Each dataset is summarized by the mean of its text embeddings. A source's
//! weight grows with its sample count and with the similarity between its
//! mean embedding and the target's; a sigmoid gate suppresses sources whose
//! similarity falls below a threshold. The target's own fit enters the blend
//! with self-similarity 1.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dist::MixtureParams;
use crate::em::{fit_mixture, EmConfig, JudgmentSample};
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Embeddings of one dataset, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

impl EmbeddingSet {
    pub fn new(entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = match entries.first() {
            Some((_, v)) if !v.is_empty() => v.len(),
            Some(_) => return Err(Error::domain("embedding vectors must have dimension >= 1")),
            None => return Err(Error::domain("embedding set is empty")),
        };
        let mut seen = HashSet::new();
        let mut ids = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len());
        for (id, v) in entries {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::domain(format!("embedding {id} has non-finite entries")));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::domain(format!("duplicate embedding id {id}")));
            }
            ids.push(id);
            vectors.push(v);
        }
        Ok(Self { ids, vectors, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().map(String::as_str).zip(self.vectors.iter().map(Vec::as_slice))
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.ids.iter().position(|x| x == id).map(|i| self.vectors[i].as_slice())
    }
}

/// Componentwise arithmetic mean.
pub fn mean_embedding(set: &EmbeddingSet) -> Vec<f64> {
    let n = set.len() as f64;
    (0..set.dim).map(|d| compensated_sum(set.vectors.iter().map(|v| v[d])) / n).collect()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    compensated_sum(u.iter().zip(v).map(|(a, b)| a * b))
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    let (nu, nv) = (dot(u, u).sqrt(), dot(v, v).sqrt());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn inverse_euclidean_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    let dist = compensated_sum(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b))).sqrt();
    if dist == 0.0 {
        return Err(Error::ZeroDistance);
    }
    Ok(1.0 / dist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeWeight {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Cosine,
    InverseEuclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Sigmoid,
    /// No gate: the weight is `sizeterm · max(sim, 0)`.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    /// Sigmoid slope.
    pub steepness: f64,
    /// Similarity at which the sigmoid gate passes half the size term.
    pub threshold: f64,
    pub size_weight: SizeWeight,
    pub similarity: Similarity,
    pub gate: Gate,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            steepness: 10.0,
            threshold: 0.7,
            size_weight: SizeWeight::Log,
            similarity: Similarity::Cosine,
            gate: Gate::Sigmoid,
        }
    }
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.steepness > 0.0) {
            return Err(Error::domain("steepness must be positive"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::domain("threshold must be finite"));
        }
        Ok(())
    }

    pub fn size_term(&self, r: usize) -> f64 {
        match self.size_weight {
            SizeWeight::Log => (r as f64).ln(),
            SizeWeight::Linear => r as f64,
        }
    }

    pub fn similarity(&self, target_mean: &[f64], source_mean: &[f64]) -> Result<f64> {
        match self.similarity {
            Similarity::Cosine => cosine_similarity(target_mean, source_mean),
            Similarity::InverseEuclidean => inverse_euclidean_similarity(target_mean, source_mean),
        }
    }

    /// Weight for a dataset of `r` samples at similarity `sim`.
    pub fn weight_at(&self, r: usize, sim: f64) -> f64 {
        let gate = match self.gate {
            Gate::Sigmoid => sigmoid(self.steepness * (sim - self.threshold)),
            Gate::None => sim.max(0.0),
        };
        self.size_term(r) * gate
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A dataset's fitted parameters, sample count and mean embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDataset {
    pub params: MixtureParams,
    pub r: usize,
    pub mean_embedding: Vec<f64>,
}

impl SourceDataset {
    pub fn new(params: MixtureParams, r: usize, mean_embedding: Vec<f64>) -> Result<Self> {
        params.validate()?;
        if r == 0 {
            return Err(Error::domain("source sample count must be at least 1"));
        }
        if mean_embedding.is_empty() {
            return Err(Error::domain("mean embedding is empty"));
        }
        Ok(Self { params, r, mean_embedding })
    }
}

pub fn transfer_weight(source: &SourceDataset, target_mean: &[f64], config: &TransferConfig) -> Result<f64> {
    config.validate()?;
    let sim = config.similarity(target_mean, &source.mean_embedding)?;
    Ok(config.weight_at(source.r, sim))
}

/// Weight of the target's own fit: the source formula at self-similarity 1.
pub fn self_weight(r: usize, config: &TransferConfig) -> f64 {
    config.weight_at(r, 1.0)
}

/// λ-weighted average of every mixture parameter; `weights[0]` belongs to
/// `target`, `weights[i]` to `sources[i-1]`.
pub fn blend_parameters(target: &MixtureParams, sources: &[MixtureParams], weights: &[f64]) -> Result<MixtureParams> {
    if weights.len() != sources.len() + 1 {
        return Err(Error::domain(format!("expected {} weights, got {}", sources.len() + 1, weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::domain("transfer weights must be finite and non-negative"));
    }
    let total = compensated_sum(weights.iter().copied());
    if total <= 0.0 {
        return Err(Error::ZeroWeights);
    }
    let entries: Vec<[f64; 5]> = std::iter::once(target).chain(sources).map(MixtureParams::as_array).collect();
    let mut out = [0.0; 5];
    for (c, slot) in out.iter_mut().enumerate() {
        let v = compensated_sum(entries.iter().zip(weights).map(|(e, w)| w * e[c])) / total;
        // a convex combination cannot leave the inputs' range; clamp rounding
        let lo = entries.iter().map(|e| e[c]).fold(f64::INFINITY, f64::min);
        let hi = entries.iter().map(|e| e[c]).fold(f64::NEG_INFINITY, f64::max);
        *slot = v.clamp(lo, hi);
    }
    MixtureParams::from_array(out)
}

/// Source data for [`transfer_estimate`].
#[derive(Debug, Clone)]
pub enum SourceData {
    /// Raw labeled samples, fitted with the EM configuration.
    Samples(Vec<JudgmentSample>),
    /// Parameters fitted elsewhere on `r` samples.
    Fitted { params: MixtureParams, r: usize },
}

#[derive(Debug, Clone)]
pub struct SourceInput {
    pub label: String,
    pub data: SourceData,
    pub embeddings: EmbeddingSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub label: String,
    pub r: usize,
    pub similarity: f64,
    pub lambda: f64,
    pub params: MixtureParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub params: MixtureParams,
    pub target_fit: MixtureParams,
    /// Row 0 is the target itself.
    pub weights: Vec<WeightRow>,
}

/// Fit the target, fit or load every source, weight them and blend.
pub fn transfer_estimate(
    target_samples: &[JudgmentSample],
    target_embeddings: &EmbeddingSet,
    sources: &[SourceInput],
    em_config: &EmConfig,
    config: &TransferConfig,
) -> Result<TransferOutcome> {
    config.validate()?;
    let (target_fit, _) = fit_mixture(target_samples, em_config)?;
    let target_mean = mean_embedding(target_embeddings);
    let r0 = target_samples.len();
    let mut rows = vec![WeightRow {
        label: "target".into(),
        r: r0,
        similarity: 1.0,
        lambda: self_weight(r0, config),
        params: target_fit,
    }];
    for source in sources {
        if source.embeddings.dim() != target_embeddings.dim() {
            return Err(Error::DimensionMismatch { expected: target_embeddings.dim(), got: source.embeddings.dim() });
        }
        let (params, r) = match &source.data {
            SourceData::Samples(samples) => (fit_mixture(samples, em_config)?.0, samples.len()),
            SourceData::Fitted { params, r } => (*params, *r),
        };
        let dataset = SourceDataset::new(params, r, mean_embedding(&source.embeddings))?;
        let similarity = config.similarity(&target_mean, &dataset.mean_embedding)?;
        rows.push(WeightRow {
            label: source.label.clone(),
            r,
            similarity,
            lambda: config.weight_at(r, similarity),
            params,
        });
    }
    let weights: Vec<f64> = rows.iter().map(|row| row.lambda).collect();
    let source_params: Vec<MixtureParams> = rows[1..].iter().map(|row| row.params).collect();
    let params = blend_parameters(&target_fit, &source_params, &weights)?;
    Ok(TransferOutcome { params, target_fit, weights: rows })
}
