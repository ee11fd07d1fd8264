//! Interpolated n-gram baseline over the same token streams as the LSTM.
//!
//! Witten-Bell smoothing: at each context length the maximum-likelihood
//! distribution is blended with the next-shorter context's distribution,
//! the self-weight being count / (count + distinct followers). The base
//! case blends unigrams with the uniform distribution over the vocabulary,
//! so every prediction is strictly positive.

use std::collections::HashMap;

use crate::corpus::TokenStream;
use crate::error::{Error, Result};
use crate::lm::{LanguageModel, PredictiveDistribution, TokenId};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FollowerCounts {
    pub total: u64,
    pub counts: HashMap<TokenId, u64>,
}

impl FollowerCounts {
    fn add(&mut self, token: TokenId) {
        self.total += 1;
        *self.counts.entry(token).or_insert(0) += 1;
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }
}

/// One serialized context: the context tokens and its sorted followers.
pub type ContextRecord = (Vec<TokenId>, Vec<(TokenId, u64)>);

/// Borrowed form of [`ContextRecord`] as yielded by `sorted_records`.
pub type ContextRecordRef<'a> = (&'a [TokenId], Vec<(TokenId, u64)>);

/// Count tables for every context length below `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    vocab_size: usize,
    /// `tables[k]` maps length-`k` contexts to their follower counts.
    tables: Vec<HashMap<Vec<TokenId>, FollowerCounts>>,
}

impl NgramModel {
    /// An empty model: every prediction is uniform.
    pub fn empty(order: usize, vocab_size: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("n-gram order must be >= 1".into()));
        }
        if vocab_size == 0 {
            return Err(Error::InvalidConfig("vocab_size must be >= 1".into()));
        }
        Ok(Self {
            order,
            vocab_size,
            tables: vec![HashMap::new(); order],
        })
    }

    /// Count every k-gram for k <= order across all streams. Contexts do not
    /// cross stream boundaries.
    pub fn fit(streams: &[&TokenStream], order: usize, vocab_size: usize) -> Result<Self> {
        let mut model = Self::empty(order, vocab_size)?;
        let mut any = false;
        for stream in streams {
            for &id in &stream.ids {
                if (id as usize) >= vocab_size {
                    return Err(Error::TokenOutOfRange {
                        id: id as usize,
                        vocab_size,
                    });
                }
            }
            let ids = &stream.ids;
            for t in 0..ids.len() {
                any = true;
                for k in 0..order.min(t + 1) {
                    let ctx = ids[t - k..t].to_vec();
                    model.tables[k].entry(ctx).or_default().add(ids[t]);
                }
            }
        }
        if !any {
            return Err(Error::EmptyInput("n-gram fit over empty streams".into()));
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn context_counts(&self, ctx: &[TokenId]) -> Option<&FollowerCounts> {
        self.tables.get(ctx.len()).and_then(|t| t.get(ctx))
    }

    /// Number of distinct contexts across all lengths.
    pub fn context_total(&self) -> usize {
        self.tables.iter().map(|t| t.len()).sum()
    }

    /// Witten-Bell interpolated distribution over the next token given the
    /// last `order - 1` tokens of `context` (shorter contexts back off).
    pub fn predict(&self, context: &[TokenId]) -> PredictiveDistribution {
        let v = self.vocab_size;
        let mut dist = vec![1.0 / v as f64; v];
        // Level 0: unigrams blended with uniform.
        if let Some(uni) = self.tables[0].get(&Vec::new()) {
            let lam = uni.total as f64 / (uni.total + uni.distinct() as u64) as f64;
            for p in &mut dist {
                *p *= 1.0 - lam;
            }
            for (&tok, &c) in &uni.counts {
                dist[tok as usize] += lam * c as f64 / uni.total as f64;
            }
        }
        // Longer contexts, shortest first; unseen levels keep the backoff.
        let usable = context.len().min(self.order - 1);
        let tail = &context[context.len() - usable..];
        for k in 1..=usable {
            let sub = &tail[usable - k..];
            if let Some(fc) = self.tables[k].get(sub) {
                let lam = fc.total as f64 / (fc.total + fc.distinct() as u64) as f64;
                for p in &mut dist {
                    *p *= 1.0 - lam;
                }
                for (&tok, &c) in &fc.counts {
                    dist[tok as usize] += lam * c as f64 / fc.total as f64;
                }
            }
        }
        PredictiveDistribution::from_probs(dist).expect("witten-bell blend is a distribution")
    }

    /// Verify the structural count invariant: for every context the follower
    /// counts sum to the context total.
    pub fn check_count_invariant(&self) -> bool {
        self.tables.iter().all(|t| {
            t.values()
                .all(|fc| fc.counts.values().sum::<u64>() == fc.total && fc.total >= 1)
        })
    }

    /// Contexts in deterministic order (length, then lexicographic) with
    /// their follower tables sorted by token; serialization order.
    pub fn sorted_records(&self) -> Vec<ContextRecordRef<'_>> {
        let mut out = Vec::new();
        for table in &self.tables {
            let mut ctxs: Vec<&Vec<TokenId>> = table.keys().collect();
            ctxs.sort();
            for ctx in ctxs {
                let fc = &table[ctx];
                let mut followers: Vec<(TokenId, u64)> =
                    fc.counts.iter().map(|(&t, &c)| (t, c)).collect();
                followers.sort();
                out.push((ctx.as_slice(), followers));
            }
        }
        out
    }

    /// Rebuild from serialized records, validating them.
    pub fn from_records(
        order: usize,
        vocab_size: usize,
        records: Vec<ContextRecord>,
    ) -> Result<Self> {
        let mut model = Self::empty(order, vocab_size)?;
        for (ctx, followers) in records {
            if ctx.len() >= order {
                return Err(Error::ShapeMismatch(format!(
                    "context of length {} in an order-{} model",
                    ctx.len(),
                    order
                )));
            }
            let mut fc = FollowerCounts::default();
            for (tok, c) in followers {
                if (tok as usize) >= vocab_size || c == 0 {
                    return Err(Error::ShapeMismatch("bad follower record".into()));
                }
                fc.counts.insert(tok, c);
                fc.total += c;
            }
            if fc.total == 0 {
                return Err(Error::ShapeMismatch("empty follower record".into()));
            }
            model.tables[ctx.len()].insert(ctx, fc);
        }
        Ok(model)
    }
}

impl LanguageModel for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn scan(
        &self,
        ids: &[TokenId],
        visit: &mut dyn FnMut(usize, &PredictiveDistribution),
    ) -> Result<()> {
        for (t, &id) in ids.iter().enumerate() {
            if (id as usize) >= self.vocab_size {
                return Err(Error::TokenOutOfRange {
                    id: id as usize,
                    vocab_size: self.vocab_size,
                });
            }
            let start = (t + 1).saturating_sub(self.order - 1).min(t + 1);
            let dist = self.predict(&ids[start..t + 1]);
            visit(t, &dist);
        }
        Ok(())
    }
}
