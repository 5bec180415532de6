use judgmix::em::{fit_mixture, JudgmentSample};
use judgmix::io::{read_records, ParamsFile};
use serde_json::json;

use crate::args::{EmArgs, FitArgs};
use crate::output::{check_input, check_output, generator_tag, write_json, Flags, Reporter};
use crate::Status;

pub fn em_flags(flags: Flags, em: &EmArgs) -> Flags {
    let cfg = em.config();
    flags
        .set("max_iter", cfg.max_iter)
        .set("tol", cfg.tol)
        .set("update", json!(cfg.update))
        .set("boundary_smoothing", json!(cfg.boundary_smoothing))
        .set("param_floor", cfg.param_floor)
}

pub fn run(a: &FitArgs, out: &Reporter) -> anyhow::Result<Status> {
    check_input(&a.input)?;
    check_output(&a.out)?;
    let em = a.em.config();
    em.validate()?;

    let records = super::subsample(read_records(&a.input)?.records, a.r, a.seed, out);
    let samples: Vec<JudgmentSample> = records.iter().map(|r| r.sample()).collect();
    let (params, trace) = fit_mixture(&samples, &em)?;

    let mut file = ParamsFile::new(&params, Some(samples.len()), uniform_pool(&samples));
    let flags = em_flags(Flags::default().set("r", json!(a.r)).set("seed", a.seed), &a.em);
    file.extra.insert("iterations".into(), json!(trace.iterations()));
    file.extra.insert("converged".into(), json!(trace.converged));
    file.extra.insert("log_likelihood".into(), json!(trace.log_likelihood.last()));
    file.extra.insert("generator".into(), json!(generator_tag()));
    file.extra.insert("flags".into(), flags.value());
    write_json(&a.out, &file)?;

    out.say(format!(
        "fitted {} samples in {} iterations{}: w={:.4} Beta({:.3}, {:.3}) Beta({:.3}, {:.3})",
        samples.len(),
        trace.iterations(),
        if trace.converged { "" } else { " (not converged)" },
        params.w,
        params.alpha1,
        params.beta1,
        params.alpha2,
        params.beta2
    ));
    Ok(if trace.converged { Status::Done } else { Status::NotConverged })
}

/// The shared pool size, if every sample has the same one.
pub fn uniform_pool(samples: &[JudgmentSample]) -> Option<u32> {
    let k = samples.first()?.pool().get();
    samples.iter().all(|s| s.pool().get() == k).then_some(k)
}
