//! End-to-end wiring: transform → train×k → stability + entropy → joined
//! records. Shared by the CLI and the sweep runner.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;

use crate::analysis::{JoinedRecord, LOW_FREQ_THRESHOLD};
use crate::corpus::Vocabulary;
use crate::error::Result;
use crate::noisiness::{collect_context_profiles, normalized_entropy};
use crate::sgns::{train, train_parallel, EmbeddingSpace, Hyperparams, TrainOutcome};
use crate::stability::{stability_report, NormalizedSpace, StabilityRecord};

/// Knobs shared by `report` and `sweep`.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Neighbor count n.
    pub n_neighbors: usize,
    /// Restrict neighbor candidates (and evaluated tokens) to the concept
    /// class when the vocabulary contains concepts.
    pub restrict_to_concepts: bool,
    /// Window for context profiles; defaults to the training window.
    pub entropy_window: Option<usize>,
    /// Collect profiles on the subsampled stream instead of the raw corpus.
    pub entropy_after_subsampling: bool,
    pub low_freq_threshold: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            n_neighbors: 10,
            restrict_to_concepts: true,
            entropy_window: None,
            entropy_after_subsampling: false,
            low_freq_threshold: LOW_FREQ_THRESHOLD,
        }
    }
}

/// Trains one space per seed. Deterministic runs are independent, so they
/// execute concurrently; each run itself is single-threaded.
pub fn train_seeded_spaces(
    encoded: &[Vec<usize>],
    vocab: &Vocabulary,
    hp: &Hyperparams,
    seeds: &[u64],
    parallel_updates: bool,
    jobs: usize,
) -> Result<Vec<TrainOutcome>> {
    if parallel_updates {
        seeds
            .iter()
            .map(|&s| train_parallel(encoded, vocab, hp, s, jobs))
            .collect()
    } else {
        seeds
            .par_iter()
            .map(|&s| train(encoded, vocab, hp, s))
            .collect()
    }
}

/// The evaluated-token mask: concepts when restricting and any exist,
/// otherwise every token.
pub fn evaluation_mask(vocab: &Vocabulary, restrict_to_concepts: bool) -> Option<Vec<bool>> {
    if restrict_to_concepts && vocab.concept_mask().iter().any(|&c| c) {
        Some(vocab.concept_mask().to_vec())
    } else {
        None
    }
}

/// Computes per-token stability across the given spaces.
pub fn compute_stability(
    spaces: &[&EmbeddingSpace],
    vocab: &Vocabulary,
    opts: &ReportOptions,
) -> Result<Vec<StabilityRecord>> {
    let normalized: Vec<NormalizedSpace> =
        spaces.par_iter().map(|s| NormalizedSpace::from_space(s)).collect();
    let refs: Vec<&NormalizedSpace> = normalized.iter().collect();
    let mask = evaluation_mask(vocab, opts.restrict_to_concepts);
    stability_report(
        &refs,
        |i| mask.as_ref().map_or(true, |m| m[i]),
        opts.n_neighbors,
        mask.as_deref(),
    )
}

/// Per-token normalized entropy; `None` marks empty ("no context") profiles.
pub fn compute_entropy(
    encoded: &[Vec<usize>],
    vocab: &Vocabulary,
    window: usize,
    subsample: Option<(f64, u64)>,
) -> Vec<(Option<f64>, usize)> {
    let stream: Vec<Vec<usize>> = match subsample {
        None => encoded.to_vec(),
        Some((s, seed)) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let total = vocab.retained_total() as f64;
            encoded
                .iter()
                .map(|sent| {
                    sent.iter()
                        .copied()
                        .filter(|&w| {
                            crate::sgns::subsample_keep(
                                vocab.freq(w) as f64 / total,
                                s,
                                &mut rng,
                            )
                        })
                        .collect()
                })
                .collect()
        }
    };
    let profiles = collect_context_profiles(&stream, vocab, window);
    profiles
        .iter()
        .map(|p| {
            if p.is_empty() {
                (None, 0)
            } else {
                (Some(normalized_entropy(p)), p.distinct())
            }
        })
        .collect()
}

/// Joins stability and entropy per evaluated token.
pub fn joined_records(
    stability: &[StabilityRecord],
    entropy: &[(Option<f64>, usize)],
    vocab: &Vocabulary,
    common_set: &HashSet<String>,
    low_freq_threshold: u64,
) -> Vec<JoinedRecord> {
    stability
        .iter()
        .map(|r| {
            JoinedRecord::new(
                r.token.clone(),
                vocab.freq(r.index),
                r.stability,
                entropy[r.index].0,
                low_freq_threshold,
                common_set,
            )
        })
        .collect()
}

/// Loads a set of comparable spaces from embedding files.
pub fn load_spaces(paths: &[impl AsRef<Path>]) -> Result<Vec<EmbeddingSpace>> {
    paths.iter().map(|p| EmbeddingSpace::load(p.as_ref())).collect()
}
