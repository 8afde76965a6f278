//! Per-token context-word profiles and their normalized entropy.
//!
//! A token's profile counts every in-vocabulary token that co-occurs with it
//! within a fixed window (both directions, sentence-bounded) over the whole
//! corpus. Subsampling is deliberately not applied here; profiles describe
//! the corpus, not the stochastic training stream.

use std::collections::HashMap;

use crate::corpus::Vocabulary;

/// Context-word count multiset for one token.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextProfile {
    pub counts: HashMap<usize, u64>,
    pub total: u64,
}

impl ContextProfile {
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// Collects context profiles for every vocabulary token.
///
/// For each occurrence of token `t` at position `i`, every in-vocab token at
/// distance 1..=window on either side (within the sentence) increments `t`'s
/// profile. Merging over sentences is associative and commutative, so shard
/// order never changes the result.
pub fn collect_context_profiles(
    sentences: &[Vec<usize>],
    vocab: &Vocabulary,
    window: usize,
) -> Vec<ContextProfile> {
    assert!(window >= 1);
    let mut profiles = vec![ContextProfile::default(); vocab.len()];
    for sentence in sentences {
        for (i, &t) in sentence.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(sentence.len().saturating_sub(1));
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let p = &mut profiles[t];
                *p.counts.entry(sentence[j]).or_insert(0) += 1;
                p.total += 1;
            }
        }
    }
    profiles
}

/// Normalized entropy of a context profile, in [0, 1].
///
/// H = −Σ P(w_i)·ln P(w_i) / ln |C_w| with occurrence-count probabilities.
/// A profile with at most one distinct context word gets 0 (the 0/0 limit of
/// a maximally non-noisy distribution); callers should exclude empty profiles
/// from correlations.
pub fn normalized_entropy(profile: &ContextProfile) -> f64 {
    let distinct = profile.distinct();
    if distinct <= 1 {
        return 0.0;
    }
    let total = profile.total as f64;
    // Sum in sorted-count order so the result is independent of map
    // iteration order; scaling every count then leaves H bit-identical.
    let mut counts: Vec<u64> = profile.counts.values().copied().collect();
    counts.sort_unstable();
    let mut h = 0.0;
    for c in counts {
        let p = c as f64 / total;
        h -= p * p.ln();
    }
    h / (distinct as f64).ln()
}
