//! Probability mass functions and majority-vote error rates.
//!
//! Everything is evaluated in log space through the log-gamma function so that
//! binomial coefficients and Beta functions never overflow, then exponentiated
//! once per mass value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Number of judges in an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct EnsembleSize(u32);

impl EnsembleSize {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("ensemble size must be at least 1"));
        }
        Ok(Self(k))
    }

    /// Ensemble size usable for majority voting (odd, so ties cannot occur).
    pub fn odd(k: u32) -> Result<Self> {
        let size = Self::new(k)?;
        size.require_odd()?;
        Ok(size)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn is_odd(self) -> bool {
        self.0 % 2 == 1
    }

    fn require_odd(self) -> Result<()> {
        if self.is_odd() {
            Ok(())
        } else {
            Err(Error::EvenEnsemble(self.0))
        }
    }

    /// `⌈k/2⌉`: the fewest correct judges for which the majority is right.
    pub fn majority(self) -> u32 {
        self.0.div_ceil(2)
    }
}

impl TryFrom<u32> for EnsembleSize {
    type Error = Error;
    fn try_from(k: u32) -> Result<Self> {
        Self::new(k)
    }
}

impl From<EnsembleSize> for u32 {
    fn from(k: EnsembleSize) -> u32 {
        k.0
    }
}

impl std::fmt::Display for EnsembleSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Single-judge accuracy `p̂` of the Binomial baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialParams(f64);

impl BinomialParams {
    pub fn new(p_hat: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_hat) {
            return Err(Error::domain(format!("accuracy {p_hat} outside [0, 1]")));
        }
        Ok(Self(p_hat))
    }

    pub fn p_hat(self) -> f64 {
        self.0
    }
}

/// Two-component Beta-Binomial mixture `w·BB(k,α₁,β₁) + (1−w)·BB(k,α₂,β₂)`.
///
/// By convention component 1 is seeded from the upper (easier) half of the
/// data, so fits from different datasets line up when blended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub w: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

impl MixtureParams {
    pub fn new(w: f64, alpha1: f64, beta1: f64, alpha2: f64, beta2: f64) -> Result<Self> {
        let params = Self { w, alpha1, beta1, alpha2, beta2 };
        params.validate()?;
        Ok(params)
    }

    /// A single Beta-Binomial component (`w = 1`).
    pub fn single(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(1.0, alpha, beta, alpha, beta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::domain(format!("mixture weight {} outside [0, 1]", self.w)));
        }
        for (name, v) in
            [("alpha1", self.alpha1), ("beta1", self.beta1), ("alpha2", self.alpha2), ("beta2", self.beta2)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name}={v} must be positive and finite")));
            }
        }
        Ok(())
    }

    /// Components swapped: `(α₂,β₂,α₁,β₁)` with weight `1−w`.
    pub fn swapped(&self) -> Self {
        Self { w: 1.0 - self.w, alpha1: self.alpha2, beta1: self.beta2, alpha2: self.alpha1, beta2: self.beta1 }
    }

    /// Expected single-judge accuracy `E[p]`.
    pub fn mean_accuracy(&self) -> f64 {
        self.w * self.alpha1 / (self.alpha1 + self.beta1) + (1.0 - self.w) * self.alpha2 / (self.alpha2 + self.beta2)
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.w, self.alpha1, self.beta1, self.alpha2, self.beta2]
    }

    pub fn from_array(a: [f64; 5]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln C(k, s)`.
pub(crate) fn ln_choose(k: u32, s: u32) -> f64 {
    let (k, s) = (k as f64, s as f64);
    ln_gamma(k + 1.0) - ln_gamma(s + 1.0) - ln_gamma(k - s + 1.0)
}

fn check_count(s: u32, k: EnsembleSize) -> Result<()> {
    if s > k.get() {
        return Err(Error::domain(format!("count s={s} exceeds ensemble size k={k}")));
    }
    Ok(())
}

fn check_shape(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::domain(format!("Beta shapes must be positive and finite, got ({alpha}, {beta})")));
    }
    Ok(())
}

/// `ln B(a, b)` through log-gamma.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    check_shape(a, b)?;
    Ok(ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}

/// Log density of `Beta(α, β)` at `x ∈ (0, 1)`.
pub fn beta_ln_pdf(x: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!("Beta density needs x in (0, 1), got {x}")));
    }
    Ok((alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - log_beta(alpha, beta)?)
}

pub fn binomial_pmf(s: u32, k: EnsembleSize, p: BinomialParams) -> Result<f64> {
    check_count(s, k)?;
    let p = p.p_hat();
    let kk = k.get();
    // 0·ln 0 would poison the log-space form at the endpoints
    if p == 0.0 {
        return Ok(if s == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if s == kk { 1.0 } else { 0.0 });
    }
    let ln = ln_choose(kk, s) + s as f64 * p.ln() + (kk - s) as f64 * (-p).ln_1p();
    Ok(ln.exp())
}

/// `P(S < ⌈k/2⌉)` under `Bin(k, p̂)`.
pub fn binomial_error_rate(k: EnsembleSize, p: BinomialParams) -> Result<f64> {
    k.require_odd()?;
    let terms = (0..k.majority()).map(|s| binomial_pmf(s, k, p)).collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(terms))
}

/// `C(k,s)·B(s+α, k−s+β)/B(α,β)`.
pub fn betabinomial_pmf(s: u32, k: EnsembleSize, alpha: f64, beta: f64) -> Result<f64> {
    check_count(s, k)?;
    let kk = k.get();
    let (sf, ff) = (s as f64, (kk - s) as f64);
    let ln = ln_choose(kk, s) + log_beta(sf + alpha, ff + beta)? - log_beta(alpha, beta)?;
    Ok(ln.exp())
}

pub fn mixture_pmf(s: u32, k: EnsembleSize, params: &MixtureParams) -> Result<f64> {
    params.validate()?;
    let first = betabinomial_pmf(s, k, params.alpha1, params.beta1)?;
    let second = betabinomial_pmf(s, k, params.alpha2, params.beta2)?;
    Ok(params.w * first + (1.0 - params.w) * second)
}

/// Full mass vector over `s = 0..=k`.
pub fn mixture_pmf_vec(k: EnsembleSize, params: &MixtureParams) -> Result<Vec<f64>> {
    (0..=k.get()).map(|s| mixture_pmf(s, k, params)).collect()
}

/// `P(S < ⌈k/2⌉)` under the mixture; the per-component sums of the two-sum
/// closed form collapse to summing the mixture mass below the majority.
pub fn mixture_error_rate(k: EnsembleSize, params: &MixtureParams) -> Result<f64> {
    k.require_odd()?;
    let terms = (0..k.majority()).map(|s| mixture_pmf(s, k, params)).collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(terms))
}

/// `E[S] = k·E[p]`.
pub fn mixture_mean(k: EnsembleSize, params: &MixtureParams) -> f64 {
    k.get() as f64 * params.mean_accuracy()
}
