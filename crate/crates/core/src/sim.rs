//! Seeded synthetic data following the mixture's generative reading: pick a
//! component, draw an item accuracy `p ~ Beta(α_j, β_j)`, then draw `k`
//! independent judge verdicts with success probability `p`.
//!
//! Every record (and every embedding vector) gets its own RNG seeded from
//! `(master seed, index)`, so any subset or parallel partition of the output
//! reproduces the sequential bytes exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dist::{EnsembleSize, MixtureParams};
use crate::em::JudgmentSample;
use crate::error::{Error, Result};
use crate::eval::JudgmentRecord;
use crate::transfer::EmbeddingSet;

/// Recorded in output metadata; bump the suffix when the draw order changes.
pub const RNG_ALGORITHM: &str = "chacha8-splitmix64-substream/v1";

/// SplitMix64 finalizer over `(master, index)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub params: MixtureParams,
    pub k: EnsembleSize,
    pub n: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n == 0 {
            return Err(Error::domain("record count n must be at least 1"));
        }
        if self.k.get() > JudgmentRecord::MAX_POOL {
            return Err(Error::domain(format!(
                "at most {} judges per record, got {}",
                JudgmentRecord::MAX_POOL,
                self.k
            )));
        }
        Ok(())
    }
}

struct Sampler {
    w: f64,
    first: Beta<f64>,
    second: Beta<f64>,
}

impl Sampler {
    fn new(params: &MixtureParams) -> Result<Self> {
        let beta = |a, b| Beta::new(a, b).map_err(|e| Error::domain(format!("Beta({a}, {b}): {e}")));
        Ok(Self { w: params.w, first: beta(params.alpha1, params.beta1)?, second: beta(params.alpha2, params.beta2)? })
    }

    fn bits(&self, rng: &mut ChaCha8Rng, k: u32) -> Vec<bool> {
        let p = if rng.random::<f64>() < self.w { self.first.sample(rng) } else { self.second.sample(rng) };
        (0..k).map(|_| rng.random::<f64>() < p).collect()
    }
}

fn record_id(i: usize) -> String {
    format!("r{i:07}")
}

pub fn sample_judgments(spec: &GeneratorSpec) -> Result<Vec<JudgmentRecord>> {
    spec.validate()?;
    let sampler = Sampler::new(&spec.params)?;
    (0..spec.n)
        .map(|i| {
            let mut rng = substream(spec.seed, i as u64);
            JudgmentRecord::from_bits(record_id(i), sampler.bits(&mut rng, spec.k.get()))
        })
        .collect()
}

/// Endless per-index-seeded stream of samples, identical to the counts of
/// [`sample_judgments`] with the same parameters and seed.
pub struct GeneratorStream {
    sampler: Sampler,
    k: EnsembleSize,
    seed: u64,
    next: u64,
}

impl GeneratorStream {
    pub fn new(params: &MixtureParams, k: EnsembleSize, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Self { sampler: Sampler::new(params)?, k, seed, next: 0 })
    }
}

impl Iterator for GeneratorStream {
    type Item = JudgmentSample;

    fn next(&mut self) -> Option<JudgmentSample> {
        let mut rng = substream(self.seed, self.next);
        self.next += 1;
        let s = self.sampler.bits(&mut rng, self.k.get()).iter().filter(|&&b| b).count() as u32;
        Some(JudgmentSample::new(s, self.k.get()).expect("count bounded by pool"))
    }
}

/// Frequencies of `s ∈ {0..k}`. Records with a larger pool are truncated to
/// their first `k` verdicts, which requires per-judge bits.
pub fn empirical_pmf(records: &[JudgmentRecord], k: EnsembleSize) -> Result<Vec<f64>> {
    let k = k.get();
    let mut counts = vec![0u64; k as usize + 1];
    for rec in records {
        let s = if rec.pool() == k {
            rec.correct()
        } else if rec.pool() > k {
            let bits = rec
                .bits()
                .ok_or_else(|| Error::domain(format!("record {} has no per-judge bits to truncate", rec.id())))?;
            bits[..k as usize].iter().filter(|&&b| b).count() as u32
        } else {
            return Err(Error::domain(format!("record {} pool {} < k={k}", rec.id(), rec.pool())));
        };
        counts[s as usize] += 1;
    }
    let n = records.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCluster {
    pub center: Vec<f64>,
    /// Standard deviation of the isotropic Gaussian perturbation.
    pub spread: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingClusterSpec {
    pub clusters: Vec<EmbeddingCluster>,
}

impl EmbeddingClusterSpec {
    pub fn single(center: Vec<f64>, spread: f64, count: usize) -> Self {
        Self { clusters: vec![EmbeddingCluster { center, spread, count }] }
    }
}

pub fn sample_embeddings(spec: &EmbeddingClusterSpec, seed: u64) -> Result<EmbeddingSet> {
    let dim = spec.clusters.first().map(|c| c.center.len()).unwrap_or(0);
    let mut entries = Vec::new();
    let mut index = 0u64;
    for (ci, cluster) in spec.clusters.iter().enumerate() {
        if cluster.center.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: cluster.center.len() });
        }
        let noise =
            Normal::new(0.0, cluster.spread).map_err(|e| Error::domain(format!("spread {}: {e}", cluster.spread)))?;
        for j in 0..cluster.count {
            let mut rng = substream(seed, index);
            index += 1;
            let v = cluster.center.iter().map(|c| c + noise.sample(&mut rng)).collect();
            entries.push((format!("c{ci}-{j:06}"), v));
        }
    }
    EmbeddingSet::new(entries)
}
