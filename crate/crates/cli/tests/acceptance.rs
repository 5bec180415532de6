//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. All thresholds are the constants below.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use judgmix::conformal::{
    adaptive_sample, conformal_quantile, error_rate_bounds, nonconformity_scores, quantile_drift_bound,
    theoretical_min_samples, variance_adaptive_sample, BoundMode, StoppingConfig,
};
use judgmix::dist::{
    betabinomial_pmf, binomial_error_rate, binomial_pmf, mixture_error_rate, mixture_mean, mixture_pmf, BinomialParams,
    EnsembleSize, MixtureParams,
};
use judgmix::em::{fit_binomial, fit_mixture, EmConfig, JudgmentSample};
use judgmix::eval::{
    actual_error_rate, error_margin, error_margin_with, hypergeometric_pmf, Reference, DEFAULT_K_LIST,
};
use judgmix::sim::{
    derive_seed, sample_embeddings, sample_judgments, substream, EmbeddingClusterSpec, GeneratorSpec, GeneratorStream,
};
use judgmix::transfer::{transfer_estimate, SourceData, SourceInput, TransferConfig};
use rand::Rng;

// Criterion 1
const BOUND_XI: f64 = 0.03;
const BOUND_TAU: f64 = 25.0;
const BOUND_APPROX: u64 = 56;
const BOUND_EXACT: u64 = 57;
const BOUND_BUDGET: Duration = Duration::from_millis(1);
// Criterion 2
const PMF_DRAWS: usize = 200;
const PMF_MAX_K: u32 = 200;
const PMF_SUM_TOL: f64 = 1e-10;
const UNIFORM_TOL: f64 = 1e-12;
const BINOMIAL_LIMIT_C: f64 = 1e7;
const BINOMIAL_LIMIT_MAX_K: u32 = 15;
const BINOMIAL_LIMIT_TOL: f64 = 1e-4;
const PMF_BUDGET: Duration = Duration::from_secs(1);
// Criterion 3
const SEEDS: u64 = 30;
const EM_SAMPLES: usize = 5000;
const EM_MARGIN_MAX: f64 = 0.02;
const EM_BUDGET: Duration = Duration::from_secs(60);
// Criteria 4 and 5
const STOP_EPSILON: f64 = 0.1;
const STOP_RANGE: (f64, f64) = (40.0, 75.0);
const STOP_BUDGET: Duration = Duration::from_secs(60);
const CONTAINMENT_MIN: f64 = 0.80;
const CONTAINMENT_K: u32 = 11;
// Criterion 6
const COVERAGE_TRIALS: usize = 1000;
const COVERAGE_CALIBRATION: usize = 50;
const COVERAGE_MIN: f64 = 0.88;
const COVERAGE_BUDGET: Duration = Duration::from_secs(30);
// Criterion 7
const TARGET_SAMPLES: usize = 10;
const SOURCE_SAMPLES: usize = 2000;
const NO_HARM_MAX: f64 = 0.01;
const TRANSFER_BUDGET: Duration = Duration::from_secs(60);
// Criterion 8
const HYPER_RECORDS: usize = 1000;
const HYPER_SUM_TOL: f64 = 1e-10;
const HYPER_BUDGET: Duration = Duration::from_secs(5);

const K: u32 = 11;

fn generator() -> MixtureParams {
    MixtureParams::new(0.7, 8.0, 2.0, 1.5, 6.0).unwrap()
}

fn k11() -> EnsembleSize {
    EnsembleSize::new(K).unwrap()
}

struct Report {
    failed: usize,
}

impl Report {
    fn record(&mut self, id: u32, name: &str, checks: &[(bool, String)]) {
        let ok = checks.iter().all(|(p, _)| *p);
        if !ok {
            self.failed += 1;
        }
        let detail: Vec<String> =
            checks.iter().map(|(p, d)| if *p { d.clone() } else { format!("[FAILED] {d}") }).collect();
        println!("{} criterion {id} ({name}): {}", if ok { "PASS" } else { "FAIL" }, detail.join("; "));
    }
}

fn budget(elapsed: Duration, limit: Duration) -> (bool, String) {
    (elapsed < limit, format!("runtime {elapsed:.2?} < {limit:?}"))
}

fn criterion_1(report: &mut Report) {
    let start = Instant::now();
    let approx = theoretical_min_samples(BOUND_XI, BOUND_TAU, BoundMode::Approximate);
    let exact = theoretical_min_samples(BOUND_XI, BOUND_TAU, BoundMode::Exact);
    let holds_at = quantile_drift_bound(exact, BOUND_TAU) <= BOUND_XI;
    let fails_before = quantile_drift_bound(exact - 1, BOUND_TAU) > BOUND_XI;
    let elapsed = start.elapsed();
    report.record(
        1,
        "sample-count bound",
        &[
            (approx == BOUND_APPROX, format!("approximate {approx} == {BOUND_APPROX}")),
            (exact == BOUND_EXACT, format!("exact {exact} == {BOUND_EXACT}")),
            (
                holds_at && fails_before,
                format!("inequality holds at {exact}: {holds_at}, fails at {}: {fails_before}", exact - 1),
            ),
            budget(elapsed, BOUND_BUDGET),
        ],
    );
}

fn criterion_2(report: &mut Report) {
    let start = Instant::now();
    let mut rng = substream(2, 0);
    let mut worst_sum = 0.0f64;
    for _ in 0..PMF_DRAWS {
        let k = rng.random_range(1..=PMF_MAX_K);
        let mut shape = || 10f64.powf(rng.random_range(-1.0..2.5));
        let (a1, b1, a2, b2) = (shape(), shape(), shape(), shape());
        let params = MixtureParams::new(rng.random::<f64>(), a1, b1, a2, b2).unwrap();
        let size = EnsembleSize::new(k).unwrap();
        let total: f64 = (0..=k).map(|s| mixture_pmf(s, size, &params).unwrap()).sum();
        worst_sum = worst_sum.max((total - 1.0).abs());
    }
    let mut worst_uniform = 0.0f64;
    for k in 1..=PMF_MAX_K {
        let size = EnsembleSize::new(k).unwrap();
        for s in 0..=k {
            let p = betabinomial_pmf(s, size, 1.0, 1.0).unwrap();
            worst_uniform = worst_uniform.max((p - 1.0 / (k as f64 + 1.0)).abs());
        }
    }
    let mut worst_limit = 0.0f64;
    for k in 1..=BINOMIAL_LIMIT_MAX_K {
        let size = EnsembleSize::new(k).unwrap();
        for p in [0.05, 0.3, 0.5, 0.77, 0.95] {
            let bin = BinomialParams::new(p).unwrap();
            for s in 0..=k {
                let bb = betabinomial_pmf(s, size, BINOMIAL_LIMIT_C * p, BINOMIAL_LIMIT_C * (1.0 - p)).unwrap();
                worst_limit = worst_limit.max((bb - binomial_pmf(s, size, bin).unwrap()).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    report.record(
        2,
        "pmf normalization",
        &[
            (worst_sum <= PMF_SUM_TOL, format!("worst |sum - 1| {worst_sum:.2e} <= {PMF_SUM_TOL:e}")),
            (worst_uniform <= UNIFORM_TOL, format!("BB(k,1,1) worst deviation {worst_uniform:.2e} <= {UNIFORM_TOL:e}")),
            (
                worst_limit <= BINOMIAL_LIMIT_TOL,
                format!("binomial limit worst {worst_limit:.2e} <= {BINOMIAL_LIMIT_TOL:e}"),
            ),
            budget(elapsed, PMF_BUDGET),
        ],
    );
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_3(report: &mut Report) {
    let start = Instant::now();
    let truth = Reference::Params(generator());
    let (mut ours, mut binomial) = (Vec::new(), Vec::new());
    let mut wins = 0;
    for seed in 0..SEEDS {
        let spec = GeneratorSpec { params: generator(), k: k11(), n: EM_SAMPLES, seed: 300 + seed };
        let samples: Vec<JudgmentSample> = sample_judgments(&spec).unwrap().iter().map(|r| r.sample()).collect();
        let (fitted, _) = fit_mixture(&samples, &EmConfig::default()).unwrap();
        let m = error_margin(&fitted, &truth, &DEFAULT_K_LIST).unwrap().mean_margin;
        let p = fit_binomial(&samples).unwrap();
        let b = error_margin_with(|k| binomial_error_rate(k, p), &truth, &DEFAULT_K_LIST).unwrap().mean_margin;
        wins += usize::from(m < b);
        ours.push(m);
        binomial.push(b);
    }
    let elapsed = start.elapsed();
    let (m, b) = (mean(&ours), mean(&binomial));
    report.record(
        3,
        "EM recovery",
        &[
            (m <= EM_MARGIN_MAX, format!("mean margin {m:.4} <= {EM_MARGIN_MAX}")),
            (m < b, format!("mixture {m:.4} < binomial {b:.4} (per seed {wins}/{SEEDS})")),
            budget(elapsed, EM_BUDGET),
        ],
    );
}

struct StopRun {
    conformal: usize,
    variance: usize,
    fitted_rate: f64,
}

fn adaptive_runs(config: &StoppingConfig) -> Vec<StopRun> {
    (0..SEEDS)
        .map(|seed| {
            let stream = || GeneratorStream::new(&generator(), k11(), 400 + seed).unwrap();
            let out = adaptive_sample(stream(), config).unwrap();
            let base = variance_adaptive_sample(stream(), config).unwrap();
            let (fitted, _) = fit_mixture(out.samples(), &EmConfig::default()).unwrap();
            StopRun {
                conformal: out.samples().len(),
                variance: base.samples().len(),
                fitted_rate: mixture_error_rate(EnsembleSize::new(CONTAINMENT_K).unwrap(), &fitted).unwrap(),
            }
        })
        .collect()
}

fn criteria_4_and_5(report: &mut Report) {
    let config = StoppingConfig::new(STOP_EPSILON, BOUND_XI, BOUND_TAU);
    let start = Instant::now();
    let runs = adaptive_runs(&config);
    let elapsed = start.elapsed();

    let counts: Vec<f64> = runs.iter().map(|r| r.conformal as f64).collect();
    let baseline: Vec<f64> = runs.iter().map(|r| r.variance as f64).collect();
    let (c, v) = (mean(&counts), mean(&baseline));
    let lowest = runs.iter().map(|r| r.conformal).min().unwrap();
    report.record(
        4,
        "adaptive stopping",
        &[
            (
                (STOP_RANGE.0..=STOP_RANGE.1).contains(&c),
                format!("mean stop count {c:.2} in [{}, {}]", STOP_RANGE.0, STOP_RANGE.1),
            ),
            (lowest >= config.min_samples, format!("smallest count {lowest} >= floor {}", config.min_samples)),
            (c < v, format!("conformal mean {c:.2} < variance-baseline mean {v:.2}")),
            budget(elapsed, STOP_BUDGET),
        ],
    );

    let truth = mixture_error_rate(EnsembleSize::new(CONTAINMENT_K).unwrap(), &generator()).unwrap();
    let inside = runs
        .iter()
        .filter(|r| {
            let (lo, hi) = error_rate_bounds(truth, config.xi, config.tau, r.conformal as u64);
            (lo..=hi).contains(&r.fitted_rate)
        })
        .count();
    let share = inside as f64 / runs.len() as f64;
    report.record(
        5,
        "error-rate bound containment",
        &[(share >= CONTAINMENT_MIN, format!("{inside}/{} runs inside ({share:.2} >= {CONTAINMENT_MIN})", runs.len()))],
    );
}

fn criterion_6(report: &mut Report) {
    let start = Instant::now();
    let params = generator();
    let center = mixture_mean(k11(), &params);
    let mut covered = 0;
    for trial in 0..COVERAGE_TRIALS {
        let draws: Vec<JudgmentSample> = GeneratorStream::new(&params, k11(), derive_seed(600, trial as u64))
            .unwrap()
            .take(COVERAGE_CALIBRATION + 1)
            .collect();
        let scores = nonconformity_scores(&draws, center);
        let (test, calibration) = scores.split_last().unwrap();
        let q = conformal_quantile(calibration, STOP_EPSILON).unwrap();
        covered += usize::from(*test <= q);
    }
    let elapsed = start.elapsed();
    let coverage = covered as f64 / COVERAGE_TRIALS as f64;
    report.record(
        6,
        "conformal coverage",
        &[
            (
                coverage >= COVERAGE_MIN,
                format!("coverage {coverage:.3} >= {COVERAGE_MIN} over {COVERAGE_TRIALS} trials"),
            ),
            budget(elapsed, COVERAGE_BUDGET),
        ],
    );
}

fn source(params: MixtureParams, center: Vec<f64>, seed: u64, label: &str) -> SourceInput {
    let spec = GeneratorSpec { params, k: k11(), n: SOURCE_SAMPLES, seed };
    SourceInput {
        label: label.into(),
        data: SourceData::Samples(sample_judgments(&spec).unwrap().iter().map(|r| r.sample()).collect()),
        embeddings: sample_embeddings(&EmbeddingClusterSpec::single(center, 0.05, SOURCE_SAMPLES), seed).unwrap(),
    }
}

fn criterion_7(report: &mut Report) {
    let start = Instant::now();
    let truth = Reference::Params(generator());
    let em = EmConfig::default();
    let config = TransferConfig::default();
    let other = MixtureParams::new(0.3, 3.0, 3.0, 5.0, 1.0).unwrap();
    let (mut alone, mut similar, mut dissimilar) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..SEEDS {
        let base = 700 + 10 * seed;
        let spec = GeneratorSpec { params: generator(), k: k11(), n: TARGET_SAMPLES, seed: base };
        let target: Vec<JudgmentSample> = sample_judgments(&spec).unwrap().iter().map(|r| r.sample()).collect();
        let target_emb =
            sample_embeddings(&EmbeddingClusterSpec::single(vec![1.0, 0.0, 0.0, 0.0], 0.05, TARGET_SAMPLES), base + 1)
                .unwrap();
        let near = source(generator(), vec![1.0, 0.02, 0.0, 0.0], base + 2, "near");
        let far = source(other, vec![0.0, 1.0, 0.0, 0.0], base + 3, "far");

        let margin = |sources: &[SourceInput]| {
            let out = transfer_estimate(&target, &target_emb, sources, &em, &config).unwrap();
            error_margin(&out.params, &truth, &DEFAULT_K_LIST).unwrap().mean_margin
        };
        alone.push(margin(&[]));
        similar.push(margin(&[near]));
        dissimilar.push(margin(&[far]));
    }
    let elapsed = start.elapsed();
    let (a, s, d) = (mean(&alone), mean(&similar), mean(&dissimilar));
    report.record(
        7,
        "transfer",
        &[
            (s < a, format!("similar source {s:.4} < target only {a:.4}")),
            (d - a <= NO_HARM_MAX, format!("dissimilar degradation {:+.4} <= {NO_HARM_MAX}", d - a)),
            budget(elapsed, TRANSFER_BUDGET),
        ],
    );
}

fn criterion_8(report: &mut Report) {
    let start = Instant::now();
    let spec = GeneratorSpec { params: generator(), k: k11(), n: HYPER_RECORDS, seed: 800 };
    let records = sample_judgments(&spec).unwrap();
    let rate = actual_error_rate(&records, k11()).unwrap();
    let direct = records.iter().filter(|r| r.bits().unwrap().iter().filter(|&&b| b).count() < 6).count() as f64
        / records.len() as f64;
    let mut worst = 0.0f64;
    for r in &records {
        for k in 1..=K {
            let total: f64 = hypergeometric_pmf(r.correct(), K, k).unwrap().iter().sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    report.record(
        8,
        "hypergeometric evaluator",
        &[
            (rate == direct, format!("k=k_max rate {rate} == direct count {direct}")),
            (worst <= HYPER_SUM_TOL, format!("worst |sum - 1| {worst:.2e} <= {HYPER_SUM_TOL:e}")),
            budget(elapsed, HYPER_BUDGET),
        ],
    );
}

fn judgmix(dir: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_judgmix"))
        .current_dir(dir)
        .arg("--quiet")
        .args(args)
        .status()
        .expect("run judgmix")
        .code()
        .unwrap_or(-1)
}

fn pipeline(dir: &Path) -> Vec<(String, i32)> {
    let gen = ["--w", "0.7", "--a1", "8", "--b1", "2", "--a2", "1.5", "--b2", "6", "--k", "11"];
    let steps: Vec<(&str, Vec<&str>)> = vec![
        ("simulate", [&gen[..], &["--n", "3000", "--seed", "5", "--out", "d.jsonl", "--emb-out", "d.emb"]].concat()),
        (
            "simulate",
            [
                &gen[..],
                &[
                    "--n",
                    "12",
                    "--seed",
                    "6",
                    "--out",
                    "t.jsonl",
                    "--emb-out",
                    "t.emb",
                    "--emb-center",
                    "1,0.01,0,0,0,0,0,0",
                ],
            ]
            .concat(),
        ),
        ("fit", vec!["--input", "d.jsonl", "--out", "fit.json", "--r", "800", "--seed", "3"]),
        (
            "sample",
            vec!["--input", "d.jsonl", "--reps", "4", "--ids", "ids.csv", "--params", "s.json", "--trace", "tr.csv"],
        ),
        (
            "transfer",
            vec![
                "--target",
                "t.jsonl",
                "--target-emb",
                "t.emb",
                "--source",
                "fit.json",
                "--source-emb",
                "d.emb",
                "--source",
                "d.jsonl",
                "--source-emb",
                "d.emb",
                "--out",
                "tf.json",
                "--weights",
                "w.csv",
            ],
        ),
        ("evaluate", vec!["--params", "s.json", "--reference-records", "d.jsonl", "--out", "e1.csv"]),
        ("evaluate", vec!["--dataset", "d.jsonl", "--reps", "4", "--out", "e2.csv"]),
    ];
    steps
        .into_iter()
        .map(|(cmd, args)| {
            let full: Vec<&str> = std::iter::once(cmd).chain(args).collect();
            (cmd.to_string(), judgmix(dir, &full))
        })
        .collect()
}

fn criterion_9(report: &mut Report) {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let codes = [pipeline(a.path()), pipeline(b.path())];
    let failed: Vec<String> =
        codes.iter().flatten().filter(|(_, c)| *c != 0).map(|(cmd, c)| format!("{cmd} exited {c}")).collect();
    let mut names: Vec<String> =
        std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    let differing: Vec<&String> =
        names.iter().filter(|n| std::fs::read(a.path().join(n)).ok() != std::fs::read(b.path().join(n)).ok()).collect();
    report.record(
        9,
        "determinism",
        &[
            (failed.is_empty(), format!("all subcommands exit 0 {failed:?}")),
            (differing.is_empty(), format!("{} output files byte-identical, differing {differing:?}", names.len())),
        ],
    );
}

fn main() {
    let mut report = Report { failed: 0 };
    criterion_1(&mut report);
    criterion_2(&mut report);
    criterion_3(&mut report);
    criteria_4_and_5(&mut report);
    criterion_6(&mut report);
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_9(&mut report);
    if report.failed > 0 {
        println!("acceptance: {} of 9 criteria failed", report.failed);
        std::process::exit(1);
    }
    println!("acceptance: all 9 criteria passed");
}
