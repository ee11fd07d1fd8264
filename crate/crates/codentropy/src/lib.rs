//! Character-level language models for source code and entropy-based
//! buggy-line ranking.
//!
//! The pipeline: build a byte vocabulary from a training corpus, train a
//! stacked-LSTM language model (and a Witten-Bell n-gram baseline) on a
//! global and a local split, score every line of target files by average
//! per-character entropy under a weighted global+local mixture, and evaluate
//! how well those scores separate buggy from clean lines via ROC/AUC.
//!
//! ## Where to start
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example synthesize      # corpus generation + bug injection
//! cargo run --release --example gradient_check  # backprop vs finite differences
//! cargo run --release --example train_periodic  # truncated-BPTT training loop
//! cargo run --release --example ngram_baseline  # Witten-Bell interpolation
//! cargo run --release --example score_lines     # per-line entropy scoring
//! cargo run --release --example evaluate_roc    # ROC/AUC and its invariances
//! cargo run --release --example full_pipeline   # the whole experiment, small
//! ```
//!
//! The `codentropy` binary exposes the same pipeline as subcommands
//! (`synth`, `build-vocab`, `train`, `score`, `eval`); see the README.
//!
//! ## Module map
//!
//! - [`corpus`]: byte vocabulary, token streams with line spans, split
//!   manifests and test-line masking.
//! - [`nn`]: the dense LSTM kernel in f64 with hand-derived BPTT.
//! - [`optim`]: Adam, gradient clipping and the stateful mini-batch loop.
//! - [`ngram`]: the interpolated n-gram baseline.
//! - [`scoring`]: per-character metrics, per-line averaging, score mixing
//!   and the score CSV format.
//! - [`eval`]: tie-aware AUC, ROC curves and report rendering.
//! - [`synth`]: deterministic corpus generator and mutation-based injector.
//! - [`checkpoint`]: versioned binary model/vocabulary files.
//! - [`pipeline`]: glue that runs whole experiments.

pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub(crate) mod csvio;
pub mod error;
pub mod eval;
pub mod lm;
pub mod ngram;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod scoring;
pub mod synth;

pub use corpus::{CorpusSplit, LineLabel, TokenStream, Vocabulary};
pub use error::{Error, Result};
pub use eval::RocReport;
pub use lm::{LanguageModel, PredictiveDistribution, TokenId};
pub use ngram::NgramModel;
pub use nn::{LstmParams, LstmState, ModelConfig};
pub use optim::{AdamConfig, TrainingLog};
pub use scoring::{LineScore, Metric, ScoringConfig};
