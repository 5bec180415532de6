use std::fmt::Write as _;

use judgmix::conformal::{adaptive_sample, variance_adaptive_sample, AdaptiveOutcome};
use judgmix::em::{fit_mixture, EmTrace};
use judgmix::eval::{shuffled_order, JudgmentRecord};
use judgmix::io::{read_records, ParamsFile};
use judgmix::MixtureParams;
use rayon::prelude::*;
use serde_json::json;

use super::fit::{em_flags, uniform_pool};
use crate::args::{SampleArgs, StopRule};
use crate::output::{
    check_input, check_output, flag_name, generator_tag, usage, write_json, write_text, Flags, Reporter,
};
use crate::Status;

struct Rep {
    order: Vec<usize>,
    outcome: AdaptiveOutcome,
    params: MixtureParams,
    trace: EmTrace,
}

fn one_rep(records: &[JudgmentRecord], a: &SampleArgs, rep: usize) -> anyhow::Result<Rep> {
    let order = shuffled_order(records.len(), a.seed, rep);
    let stream = order.iter().map(|&i| records[i].sample());
    let cfg = a.stopping.config();
    let outcome = match a.rule {
        StopRule::Conformal => adaptive_sample(stream, &cfg)?,
        StopRule::Variance => variance_adaptive_sample(stream, &cfg)?,
    };
    let (params, trace) = fit_mixture(outcome.samples(), &a.em.config())?;
    Ok(Rep { order, outcome, params, trace })
}

pub fn run(a: &SampleArgs, out: &Reporter) -> anyhow::Result<Status> {
    check_input(&a.input)?;
    for p in [&a.ids, &a.params, &a.trace] {
        check_output(p)?;
    }
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let cfg = a.stopping.config();
    cfg.validate()?;
    a.em.config().validate()?;

    let records = read_records(&a.input)?.records;
    let reps: Vec<Rep> =
        (0..a.reps).into_par_iter().map(|rep| one_rep(&records, a, rep)).collect::<anyhow::Result<_>>()?;

    let flags = em_flags(
        Flags::default()
            .set("xi", cfg.xi)
            .set("tau", cfg.tau)
            .set("epsilon", cfg.epsilon)
            .set("min_samples", cfg.min_samples)
            .set("consecutive_hits", cfg.consecutive_hits)
            .set("rule", flag_name(&a.rule))
            .set("reps", a.reps)
            .set("seed", a.seed),
        &a.em,
    );

    let mut ids = flags.comment();
    ids.push_str("rep,order,id\n");
    let mut trace = flags.comment();
    trace.push_str("rep,r,running_mean,statistic,delta\n");
    for (rep, r) in reps.iter().enumerate() {
        for (pos, &i) in r.order[..r.outcome.samples().len()].iter().enumerate() {
            let _ = writeln!(ids, "{rep},{pos},{}", records[i].id());
        }
        let state = &r.outcome.state;
        for (j, (q, m)) in state.quantile_history.iter().zip(&state.mean_history).enumerate() {
            let delta =
                if j == 0 { String::new() } else { format!("{:.9}", (q - state.quantile_history[j - 1]).abs()) };
            let _ = writeln!(trace, "{rep},{},{m:.9},{q:.9},{delta}", j + 1);
        }
    }
    write_text(&a.ids, &ids)?;
    write_text(&a.trace, &trace)?;

    let runs: Vec<_> = reps
        .iter()
        .enumerate()
        .map(|(rep, r)| {
            json!({
                "rep": rep,
                "r": r.outcome.samples().len(),
                "criterion_met": r.outcome.criterion_met,
                "iterations": r.trace.iterations(),
                "converged": r.trace.converged,
                "w": r.params.w,
                "alpha1": r.params.alpha1,
                "beta1": r.params.beta1,
                "alpha2": r.params.alpha2,
                "beta2": r.params.beta2,
            })
        })
        .collect();
    let counts: Vec<f64> = reps.iter().map(|r| r.outcome.samples().len() as f64).collect();
    let mean_samples = counts.iter().sum::<f64>() / counts.len() as f64;
    let first = &reps[0];
    let mut file =
        ParamsFile::new(&first.params, Some(first.outcome.samples().len()), uniform_pool(first.outcome.samples()));
    file.extra.insert("iterations".into(), json!(first.trace.iterations()));
    file.extra.insert("converged".into(), json!(first.trace.converged));
    file.extra.insert("mean_samples".into(), json!(mean_samples));
    file.extra.insert("runs".into(), json!(runs));
    file.extra.insert("generator".into(), json!(generator_tag()));
    file.extra.insert("flags".into(), flags.value());
    write_json(&a.params, &file)?;

    let unmet = reps.iter().filter(|r| !r.outcome.criterion_met).count();
    let not_converged = reps.iter().filter(|r| !r.trace.converged).count();
    out.say(format!(
        "{} repetition(s): mean stop count {mean_samples:.2} (min {}, max {}), floor {}, {unmet} ran dry",
        a.reps,
        counts.iter().cloned().fold(f64::INFINITY, f64::min),
        counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        cfg.min_samples
    ));
    Ok(if unmet > 0 {
        Status::CriterionUnmet
    } else if not_converged > 0 {
        Status::NotConverged
    } else {
        Status::Done
    })
}
