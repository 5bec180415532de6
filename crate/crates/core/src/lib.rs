//! Judgment-accuracy distributions for ensembles of LLM judges.
//!
//! The number of correct verdicts `S` among `k` judges on a dataset item is
//! modelled as a two-component mixture of Beta-Binomial distributions. The
//! crate provides:
//!
//! - [`dist`]: PMFs and majority-vote error rates (Binomial, Beta-Binomial, mixture).
//! - [`em`]: responsibility-weighted EM fitting of the mixture from labeled samples.
//! - [`conformal`]: conformal-quantile adaptive stopping, sample-count and
//!   error-rate bounds, and a variance-based stopping baseline.
//! - [`transfer`]: embedding-similarity weighted blending of parameters fitted
//!   on source datasets.
//! - [`sim`]: seeded generators used as ground truth.
//! - [`eval`]: sub-ensemble error rates, error margins and repeated experiments.
//! - [`io`]: JSONL / JSON file formats shared by the CLI and bindings.

// `!(x > 0.0)` deliberately rejects NaN alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod dist;
pub mod em;
mod error;
pub mod eval;
pub mod io;
pub mod numeric;
pub mod sim;
pub mod transfer;

pub use conformal::{AdaptiveOutcome, ConformalState, StoppingConfig};
pub use dist::{BinomialParams, EnsembleSize, MixtureParams};
pub use em::{EmConfig, EmTrace, JudgmentSample};
pub use error::{Error, Result};
pub use eval::{JudgmentRecord, MarginReport};
pub use transfer::{EmbeddingSet, SourceDataset, TransferConfig};
