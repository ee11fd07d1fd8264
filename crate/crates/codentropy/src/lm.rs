//! The scoring contract shared by every model family.
//!
//! A language model consumes a token stream and, after each consumed token,
//! exposes a probability distribution over the next token. Anything that can
//! do that (the LSTM, the n-gram baseline, fixed test models) plugs into the
//! scoring pipeline unchanged.

use crate::error::{Error, Result};

/// Dense token id. The byte-level vocabulary never exceeds 257 entries.
pub type TokenId = u16;

/// A probability distribution over the next token.
///
/// Entries are non-negative and sum to 1 within 1e-12. Model-produced
/// distributions are strictly positive; hand-built test distributions may
/// contain exact zeros (entropy treats 0·log 0 as 0).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    probs: Vec<f64>,
}

impl PredictiveDistribution {
    /// Wrap an explicit probability vector, validating it.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("probability vector".into()));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::Numeric {
                    context: "probability entry outside [0, 1]".into(),
                });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Numeric {
                context: format!("probabilities sum to {sum}, expected 1"),
            });
        }
        Ok(Self { probs })
    }

    /// Max-subtracted softmax. Exponentials are floored at the smallest
    /// positive normal so every entry stays strictly positive.
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits
            .iter()
            .map(|&l| (l - max).exp().max(f64::MIN_POSITIVE))
            .collect();
        let z: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= z;
        }
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of one token.
    pub fn prob(&self, token: TokenId) -> f64 {
        self.probs[token as usize]
    }
}

/// Streaming next-token predictor over a frozen model.
///
/// `scan` walks `ids` left to right; after consuming `ids[..=t]` it invokes
/// `visit(t, dist)` with the distribution over the *next* token. State carries
/// across the whole call and resets between calls, so one call per file gives
/// the intended top-to-bottom read of that file.
pub trait LanguageModel {
    fn vocab_size(&self) -> usize;

    fn scan(
        &self,
        ids: &[TokenId],
        visit: &mut dyn FnMut(usize, &PredictiveDistribution),
    ) -> Result<()>;
}
