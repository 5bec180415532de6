use judgmix::dist::{EnsembleSize, MixtureParams};
use judgmix::eval::JudgmentRecord;
use judgmix::io::{save_embeddings, save_records};
use judgmix::sim::{
    derive_seed, sample_embeddings, sample_judgments, EmbeddingClusterSpec, GeneratorSpec, RNG_ALGORITHM,
};
use serde_json::json;

use crate::args::{RecordFormat, SimulateArgs};
use crate::output::{check_output, generator_tag, usage, Reporter};
use crate::Status;

/// Sub-stream index reserved for embeddings so they never share draws with records.
const EMBEDDING_STREAM: u64 = u64::MAX;

pub fn run(a: &SimulateArgs, out: &Reporter) -> anyhow::Result<Status> {
    check_output(&a.out)?;
    if let Some(p) = &a.emb_out {
        check_output(p)?;
    }
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let spec = GeneratorSpec {
        params: MixtureParams::new(a.w, a.a1, a.b1, a.a2, a.b2)?,
        k: EnsembleSize::new(a.k)?,
        n: a.n,
        seed: a.seed,
    };
    spec.validate()?;
    let center = match &a.emb_center {
        Some(c) => c.clone(),
        None => {
            let mut c = vec![0.0; a.emb_dim.max(1)];
            c[0] = 1.0;
            c
        }
    };

    let mut records = sample_judgments(&spec)?;
    if a.format == RecordFormat::Counts {
        records = records
            .into_iter()
            .map(|r| JudgmentRecord::from_count(r.id().to_string(), r.correct(), r.pool()))
            .collect::<judgmix::Result<_>>()?;
    }
    let meta = json!({
        "generator": generator_tag(),
        "rng": RNG_ALGORITHM,
        "seed": a.seed,
        "spec": {
            "w": a.w, "alpha1": a.a1, "beta1": a.b1, "alpha2": a.a2, "beta2": a.b2,
            "k": a.k, "n": a.n,
        },
        "embeddings": a.emb_out.as_ref().map(|_| json!({
            "center": center, "spread": a.emb_spread,
        })),
    });
    save_records(&a.out, Some(&meta), &records)?;

    if let Some(path) = &a.emb_out {
        let set = sample_embeddings(
            &EmbeddingClusterSpec::single(center, a.emb_spread, a.n),
            derive_seed(a.seed, EMBEDDING_STREAM),
        )?;
        save_embeddings(path, &set)?;
    }
    let mean_s = records.iter().map(|r| r.correct() as f64).sum::<f64>() / records.len() as f64;
    out.say(format!("wrote {} records (k={}, mean correct {mean_s:.3}) to {}", records.len(), a.k, a.out.display()));
    Ok(Status::Done)
}
