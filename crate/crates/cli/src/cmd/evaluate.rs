use std::path::Path;

use judgmix::eval::{
    error_margin, parse_k_list, run_experiment, Experiment, ExperimentReport, Model, Protocol, Reference, RunResult,
};
use judgmix::io::{read_params, read_records, ParamsFile};
use judgmix::{JudgmentRecord, MixtureParams};
use serde_json::{json, Value};

use super::fit::em_flags;
use crate::args::{EvaluateArgs, ModelArg, ProtocolArg};
use crate::output::{check_input, check_output, flag_name, usage, write_text, Flags, Reporter};
use crate::Status;

/// Estimates stored in one params file: the top level, or every `runs` entry.
fn estimates(path: &Path) -> anyhow::Result<Vec<(MixtureParams, usize)>> {
    let file = read_params(path)?;
    match file.extra.get("runs") {
        Some(Value::Array(runs)) => runs
            .iter()
            .map(|run| {
                let entry: ParamsFile = serde_json::from_value(run.clone()).map_err(judgmix::Error::from)?;
                Ok((entry.params()?, entry.r.unwrap_or(0)))
            })
            .collect(),
        _ => Ok(vec![(file.params()?, file.r.unwrap_or(0))]),
    }
}

enum RefData {
    Records(Vec<JudgmentRecord>),
    Params(MixtureParams),
}

impl RefData {
    fn as_reference(&self) -> Reference<'_> {
        match self {
            RefData::Records(r) => Reference::Records(r),
            RefData::Params(p) => Reference::Params(*p),
        }
    }
}

pub fn run(a: &EvaluateArgs, out: &Reporter) -> anyhow::Result<Status> {
    for p in a.params.iter().chain(&a.dataset).chain(&a.reference_records).chain(&a.reference_params) {
        check_input(p)?;
    }
    check_output(&a.out)?;
    parse_k_list(&a.k_list)?;
    if a.params.is_empty() && a.dataset.is_none() {
        return Err(usage("give --params files to score, or --dataset to run the sampling pipeline"));
    }

    let reference = match (&a.reference_records, &a.reference_params, &a.dataset) {
        (Some(p), _, _) => RefData::Records(read_records(p)?.records),
        (None, Some(p), _) => RefData::Params(read_params(p)?.params()?),
        (None, None, Some(p)) => RefData::Records(read_records(p)?.records),
        (None, None, None) => return Err(usage("--params needs --reference-records or --reference-params")),
    };

    let mut flags = Flags::default().set("k_list", a.k_list.iter().map(u32::to_string).collect::<Vec<_>>().join(","));
    let report = if let Some(path) = &a.dataset {
        let cfg = a.stopping.config();
        let protocol = match a.protocol {
            ProtocolArg::Adaptive => Protocol::AdaptiveStopping(cfg),
            ProtocolArg::FixedR => Protocol::FixedR(a.r.ok_or_else(|| usage("--protocol fixed-r needs --r"))?),
        };
        flags = em_flags(
            flags
                .set("protocol", flag_name(&a.protocol))
                .set("model", flag_name(&a.model))
                .set("reps", a.reps)
                .set("seed", a.seed)
                .set("r", json!(a.r))
                .set("xi", cfg.xi)
                .set("tau", cfg.tau)
                .set("epsilon", cfg.epsilon)
                .set("min_samples", cfg.min_samples)
                .set("consecutive_hits", cfg.consecutive_hits),
            &a.em,
        );
        let dataset = read_records(path)?.records;
        run_experiment(&Experiment {
            protocol,
            model: match a.model {
                ModelArg::Mixture => Model::Mixture,
                ModelArg::Binomial => Model::Binomial,
            },
            dataset: &dataset,
            reference: reference.as_reference(),
            k_list: a.k_list.clone(),
            em: a.em.config(),
            repetitions: a.reps,
            seed: a.seed,
        })?
    } else {
        let mut runs = Vec::new();
        for path in &a.params {
            for (params, r) in estimates(path)? {
                let report = error_margin(&params, &reference.as_reference(), &a.k_list)?;
                runs.push(RunResult {
                    run_id: runs.len(),
                    samples_used: r,
                    criterion_met: true,
                    params: Some(params),
                    report: Some(report),
                    error: None,
                });
            }
        }
        ExperimentReport::from_runs(runs)
    };

    write_text(&a.out, &csv_with_flags(&report, &flags))?;

    for run in report.runs.iter().filter(|r| r.error.is_some()) {
        out.warn(format!("run {} failed: {}", run.run_id, run.error.as_deref().unwrap_or("")));
    }
    out.say(format!(
        "{} run(s): margin {:.2} ± {:.2} %, mean samples {:.2}, {} failed",
        report.runs.len(),
        100.0 * report.margin_mean,
        100.0 * report.margin_std,
        report.mean_samples,
        report.failures
    ));
    Ok(if report.runs.iter().any(|r| !r.criterion_met) { Status::CriterionUnmet } else { Status::Done })
}

/// The library CSV with the flags as a second comment line and the aggregate
/// as a trailing one.
fn csv_with_flags(report: &ExperimentReport, flags: &Flags) -> String {
    let csv = report.to_csv();
    let (schema, body) = csv.split_once('\n').unwrap_or((&csv, ""));
    format!(
        "{schema}\n{}{body}# aggregate: margin_mean={:.6}; margin_std={:.6}; mean_samples={:.6}; failures={}\n",
        flags.comment(),
        100.0 * report.margin_mean,
        100.0 * report.margin_std,
        report.mean_samples,
        report.failures
    )
}
