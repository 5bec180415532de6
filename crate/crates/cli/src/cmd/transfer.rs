use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use judgmix::em::JudgmentSample;
use judgmix::io::{read_embeddings, read_params, read_records, ParamsFile};
use judgmix::transfer::{transfer_estimate, SourceData, SourceInput};
use serde_json::json;

use super::fit::{em_flags, uniform_pool};
use crate::args::TransferArgs;
use crate::output::{check_input, check_output, generator_tag, usage, write_json, write_text, Flags, Reporter};
use crate::Status;

fn label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn load_source(data: &Path, emb: &Path) -> anyhow::Result<SourceInput> {
    let is_params = data.extension().is_some_and(|e| e == "json");
    let source = if is_params {
        let file = read_params(data)?;
        let r =
            file.r.ok_or_else(|| usage(format!("source params {} must carry a sample count \"r\"", data.display())))?;
        SourceData::Fitted { params: file.params()?, r }
    } else {
        SourceData::Samples(read_records(data)?.records.iter().map(|r| r.sample()).collect())
    };
    Ok(SourceInput { label: label(data), data: source, embeddings: read_embeddings(emb)? })
}

pub fn run(a: &TransferArgs, out: &Reporter) -> anyhow::Result<Status> {
    for p in [&a.target, &a.target_emb].into_iter().chain(&a.source).chain(&a.source_emb) {
        check_input(p)?;
    }
    check_output(&a.out)?;
    check_output(&a.weights)?;
    if a.source.len() != a.source_emb.len() {
        return Err(usage(format!("{} --source files but {} --source-emb files", a.source.len(), a.source_emb.len())));
    }
    let cfg = a.config();
    cfg.validate()?;
    let em = a.em.config();
    em.validate()?;

    let target = super::subsample(read_records(&a.target)?.records, a.r, a.seed, out);
    let samples: Vec<JudgmentSample> = target.iter().map(|r| r.sample()).collect();
    let target_emb = read_embeddings(&a.target_emb)?;
    let sources = a
        .source
        .iter()
        .zip(&a.source_emb)
        .map(|(d, e)| load_source(d, e).with_context(|| format!("loading source {}", d.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let result = transfer_estimate(&samples, &target_emb, &sources, &em, &cfg)?;

    let flags = em_flags(
        Flags::default()
            .set("steepness", cfg.steepness)
            .set("threshold", cfg.threshold)
            .set("size_weight", json!(cfg.size_weight))
            .set("similarity", json!(cfg.similarity))
            .set("gate", json!(cfg.gate))
            .set("r", json!(a.r))
            .set("seed", a.seed),
        &a.em,
    );
    let mut table = flags.comment();
    table.push_str("label,r,similarity,lambda,w,alpha1,beta1,alpha2,beta2\n");
    for row in &result.weights {
        let p = &row.params;
        let _ = writeln!(
            table,
            "{},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            row.label, row.r, row.similarity, row.lambda, p.w, p.alpha1, p.beta1, p.alpha2, p.beta2
        );
    }
    write_text(&a.weights, &table)?;

    let mut file = ParamsFile::new(&result.params, Some(samples.len()), uniform_pool(&samples));
    file.extra.insert("target_fit".into(), json!(result.target_fit));
    file.extra.insert("weights".into(), json!(result.weights));
    file.extra.insert("generator".into(), json!(generator_tag()));
    file.extra.insert("flags".into(), flags.value());
    write_json(&a.out, &file)?;

    for row in &result.weights {
        out.say(format!("{:<20} r={:<6} sim={:+.4} lambda={:.4}", row.label, row.r, row.similarity, row.lambda));
    }
    Ok(Status::Done)
}
