//! Monte-Carlo and brute-force oracles, kept independent of the library's own
//! simulator: draws use a plain ChaCha RNG and `rand_distr` directly.

use judgmix::dist::{betabinomial_pmf, mixture_error_rate, mixture_pmf, EnsembleSize, MixtureParams};
use judgmix::eval::{actual_error_rate, JudgmentRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution};

const DRAWS: usize = 1_000_000;

/// Draw `S` for `DRAWS` items directly from the generative definition.
fn draw_counts(params: &MixtureParams, k: u32, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let first = Beta::new(params.alpha1, params.beta1).unwrap();
    let second = Beta::new(params.alpha2, params.beta2).unwrap();
    (0..DRAWS)
        .map(|_| {
            let p = if rng.random::<f64>() < params.w { first.sample(&mut rng) } else { second.sample(&mut rng) };
            (0..k).filter(|_| rng.random::<f64>() < p).count() as u32
        })
        .collect()
}

fn within_3_sigma(freq: f64, exact: f64) -> bool {
    let sigma = (exact * (1.0 - exact) / DRAWS as f64).sqrt();
    (freq - exact).abs() <= 3.0 * sigma
}

#[test]
fn betabinomial_pmf_matches_monte_carlo() {
    let params = MixtureParams::single(5.0, 5.0).unwrap();
    let counts = draw_counts(&params, 3, 101);
    let freq = counts.iter().filter(|&&s| s == 2).count() as f64 / DRAWS as f64;
    let exact = betabinomial_pmf(2, EnsembleSize::new(3).unwrap(), 5.0, 5.0).unwrap();
    assert!(within_3_sigma(freq, exact), "{freq} vs {exact}");
}

#[test]
fn mixture_pmf_and_error_rate_match_monte_carlo() {
    let params = MixtureParams::new(0.7, 8.0, 2.0, 1.5, 6.0).unwrap();
    let k = EnsembleSize::new(11).unwrap();
    let counts = draw_counts(&params, 11, 202);

    let top = counts.iter().filter(|&&s| s == 11).count() as f64 / DRAWS as f64;
    let exact_top = mixture_pmf(11, k, &params).unwrap();
    assert!(within_3_sigma(top, exact_top), "{top} vs {exact_top}");

    let fail = counts.iter().filter(|&&s| s < 6).count() as f64 / DRAWS as f64;
    let exact_fail = mixture_error_rate(k, &params).unwrap();
    assert!(within_3_sigma(fail, exact_fail), "{fail} vs {exact_fail}");
}

/// Enumerates every size-k subset of the pool explicitly.
fn brute_force_subset_failure(bits: &[bool], k: usize) -> f64 {
    let n = bits.len();
    let (mut fail, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        let correct = (0..n).filter(|&i| mask & (1 << i) != 0 && bits[i]).count();
        if correct < k.div_ceil(2) {
            fail += 1;
        }
    }
    fail as f64 / total as f64
}

#[test]
fn sub_ensemble_rates_match_subset_enumeration() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let records: Vec<JudgmentRecord> = (0..40)
        .map(|i| {
            let bits = (0..11).map(|_| rng.random::<f64>() < 0.6).collect();
            JudgmentRecord::from_bits(format!("{i}"), bits).unwrap()
        })
        .collect();
    for k in [1usize, 3, 5, 7, 9, 11] {
        let brute: f64 = records.iter().map(|r| brute_force_subset_failure(r.bits().unwrap(), k)).sum::<f64>()
            / records.len() as f64;
        let got = actual_error_rate(&records, EnsembleSize::new(k as u32).unwrap()).unwrap();
        assert!((got - brute).abs() < 1e-12, "k={k}: {got} vs {brute}");
    }
}
