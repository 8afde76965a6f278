//! Skip-gram with negative sampling, trained deterministically per seed.
//!
//! The deterministic mode is a pure function of (corpus, hyperparameters,
//! seed): single-threaded, sequential pair order, one seeded generator for
//! initialization, subsampling, dynamic windows and negative draws. The
//! optional parallel mode trades that guarantee for throughput (hogwild-style
//! unsynchronized vector updates).

use std::cell::UnsafeCell;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Training hyperparameters. Field names follow the W:E:N:M:S convention of
/// the CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Embedding size.
    pub dim: usize,
    /// Max context distance W; per-position width is drawn from 1..=W unless
    /// `fixed_window` is set.
    pub window: usize,
    /// Epochs E.
    pub epochs: usize,
    /// Negative samples per positive pair, N.
    pub negatives: usize,
    /// Exponent M of the negative-sample distribution P(w) ∝ freq(w)^M.
    pub smoothing: f64,
    /// Subsampling threshold S.
    pub subsample: f64,
    /// Minimum token frequency.
    pub min_count: u64,
    pub initial_lr: f64,
    pub final_lr: f64,
    /// Use a fixed window of exactly W instead of the dynamic 1..=W draw.
    pub fixed_window: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim: 200,
            window: 7,
            epochs: 50,
            negatives: 5,
            smoothing: 0.75,
            subsample: 1e-3,
            min_count: 5,
            initial_lr: 0.025,
            final_lr: 1e-4,
            fixed_window: false,
        }
    }
}

impl Hyperparams {
    /// Checks hard invariants; returns warnings for legal-but-untested values.
    pub fn validate(&self) -> Result<Vec<String>> {
        let err = |msg: &str| Err(Error::InvalidHyperparams(msg.into()));
        if self.dim < 1 {
            return err("dim must be >= 1");
        }
        if self.window < 1 {
            return err("window (W) must be >= 1");
        }
        if self.epochs < 1 {
            return err("epochs (E) must be >= 1");
        }
        if self.negatives < 1 {
            return err("negatives (N) must be >= 1");
        }
        if !(self.subsample > 0.0) {
            return err("subsample (S) must be > 0");
        }
        if self.min_count < 1 {
            return err("min_count must be >= 1");
        }
        if !(self.initial_lr > self.final_lr && self.final_lr > 0.0) {
            return err("learning rates must satisfy initial_lr > final_lr > 0");
        }
        let mut warnings = Vec::new();
        if !(0.0..=1.0).contains(&self.smoothing) {
            warnings.push(format!(
                "smoothing (M) = {} is outside the tested range [0, 1]",
                self.smoothing
            ));
        }
        Ok(warnings)
    }

    /// Compact `W:E:N:M:S` label used by the sweep tables.
    pub fn wenms_label(&self) -> String {
        format!(
            "{}:{}:{}:{}:{}",
            self.window, self.epochs, self.negatives, self.smoothing, self.subsample
        )
    }
}

/// One trained space: input and context matrices plus the provenance needed
/// to decide comparability.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    pub dim: usize,
    pub tokens: Vec<String>,
    /// V×dim row-major input vectors; these are the embeddings used downstream.
    pub input: Vec<f64>,
    /// V×dim row-major output (context) vectors.
    pub output: Vec<f64>,
    pub vocab_fingerprint: String,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub deterministic: bool,
}

/// Sidecar metadata written next to each embedding file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceMeta {
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub vocab_fingerprint: String,
    pub deterministic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest_hash: Option<String>,
}

impl SpaceMeta {
    /// Reads the sidecar for an embedding file, if one exists.
    pub fn load_for(space_path: &Path) -> Option<SpaceMeta> {
        let text = std::fs::read_to_string(EmbeddingSpace::meta_path(space_path)).ok()?;
        serde_json::from_str(&text).ok()
    }
}

impl EmbeddingSpace {
    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn input_row(&self, idx: usize) -> &[f64] {
        &self.input[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn all_finite(&self) -> bool {
        self.input.iter().chain(self.output.iter()).all(|v| v.is_finite())
    }

    pub fn meta_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    /// Writes the text embedding file (`V dim` header, then one
    /// `token v_1 … v_dim` line per token) and its metadata sidecar.
    pub fn save(&self, path: &Path, manifest_hash: Option<&str>) -> Result<()> {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(out, "{} {}", self.vocab_size(), self.dim).unwrap();
        for (i, tok) in self.tokens.iter().enumerate() {
            out.push_str(tok);
            for v in self.input_row(i) {
                // `{}` on f64 is the shortest exact round-trip form.
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))?;

        let meta = SpaceMeta {
            seed: self.seed,
            hyperparams: self.hyperparams.clone(),
            vocab_fingerprint: self.vocab_fingerprint.clone(),
            deterministic: self.deterministic,
            manifest_hash: manifest_hash.map(|s| s.to_string()),
        };
        let meta_path = Self::meta_path(path);
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta).unwrap())
            .map_err(|e| Error::io(meta_path, e))
    }

    /// Loads an embedding file; the sidecar is optional (a missing one falls
    /// back to a fingerprint derived from the token list, so byte-copies of a
    /// file remain mutually comparable).
    pub fn load(path: &Path) -> Result<EmbeddingSpace> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::format(path, "empty file"))?;
        let mut hp = header.split_whitespace();
        let v: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, "bad header"))?;
        let dim: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, "bad header"))?;

        let mut tokens = Vec::with_capacity(v);
        let mut input = Vec::with_capacity(v * dim);
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let tok = parts
                .next()
                .ok_or_else(|| Error::format(path, format!("row {}: missing token", i + 1)))?;
            tokens.push(tok.to_string());
            let start = input.len();
            for p in parts {
                let x: f64 = p.parse().map_err(|_| {
                    Error::format(path, format!("row {}: bad float `{p}`", i + 1))
                })?;
                input.push(x);
            }
            if input.len() - start != dim {
                return Err(Error::format(
                    path,
                    format!("row {}: expected {dim} values, got {}", i + 1, input.len() - start),
                ));
            }
        }
        if tokens.len() != v {
            return Err(Error::format(
                path,
                format!("header says {v} rows, file has {}", tokens.len()),
            ));
        }

        let meta_path = Self::meta_path(path);
        let meta: Option<SpaceMeta> = std::fs::read_to_string(&meta_path)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok());
        let (fingerprint, seed, hyperparams, deterministic) = match meta {
            Some(m) => (m.vocab_fingerprint, m.seed, m.hyperparams, m.deterministic),
            None => (token_list_fingerprint(&tokens), 0, Hyperparams::default(), false),
        };
        Ok(EmbeddingSpace {
            dim,
            tokens,
            input,
            output: Vec::new(),
            vocab_fingerprint: fingerprint,
            seed,
            hyperparams,
            deterministic,
        })
    }
}

fn token_list_fingerprint(tokens: &[String]) -> String {
    use sha2::Digest;
    let mut h = sha2::Sha256::new();
    for t in tokens {
        h.update(t.as_bytes());
        h.update([0u8]);
    }
    crate::corpus::hex_string(&h.finalize())
}

/// Uniform [−0.5/dim, +0.5/dim] input vectors, zero output vectors.
pub fn init_embeddings(vocab: &Vocabulary, dim: usize, seed: u64) -> EmbeddingSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_embeddings_with(vocab, dim, seed, &mut rng)
}

fn init_embeddings_with(
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> EmbeddingSpace {
    assert!(dim >= 1);
    let v = vocab.len();
    let bound = 0.5 / dim as f64;
    let input: Vec<f64> = (0..v * dim).map(|_| rng.gen_range(-bound..bound)).collect();
    EmbeddingSpace {
        dim,
        tokens: (0..v).map(|i| vocab.token(i).to_string()).collect(),
        input,
        output: vec![0.0; v * dim],
        vocab_fingerprint: vocab.fingerprint(),
        seed,
        hyperparams: Hyperparams::default(),
        deterministic: true,
    }
}

/// Negative-sample distribution P(w) ∝ freq(w)^M, sampled by binary search
/// over the cumulative distribution.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    pub fn new(freqs: &[u64], smoothing: f64) -> NegativeTable {
        assert!(!freqs.is_empty(), "vocabulary must be non-empty");
        let weights: Vec<f64> = freqs.iter().map(|&f| (f as f64).powf(smoothing)).collect();
        let total: f64 = weights.iter().sum();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w / total;
            cumulative.push(acc);
        }
        // Guard against rounding keeping the last entry below 1.
        *cumulative.last_mut().unwrap() = 1.0;
        NegativeTable { cumulative }
    }

    pub fn probability(&self, idx: usize) -> f64 {
        let lo = if idx == 0 { 0.0 } else { self.cumulative[idx - 1] };
        self.cumulative[idx] - lo
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let x: f64 = rng.gen();
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1)
    }
}

/// Probability of keeping a token with corpus frequency fraction `f` under
/// subsampling threshold `s`: min(1, sqrt(s/f)).
pub fn keep_probability(f: f64, s: f64) -> f64 {
    debug_assert!(f > 0.0 && f <= 1.0);
    (s / f).sqrt().min(1.0)
}

pub fn subsample_keep<R: Rng>(f: f64, s: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() < keep_probability(f, s)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// log σ(x) without overflow for large |x|.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Gradients of the per-pair negative-sampling loss
/// −log σ(u_c·v_t) − Σ_n log σ(−u_n·v_t).
#[derive(Debug, Clone)]
pub struct PairGradients {
    pub d_target: Vec<f64>,
    pub d_context: Vec<f64>,
    pub d_negatives: Vec<Vec<f64>>,
}

/// Loss and exact gradients for one (target, context, negatives) pair.
pub fn pair_loss_and_gradients(
    target: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> (f64, PairGradients) {
    let dim = target.len();
    debug_assert_eq!(context.len(), dim);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let s_c = dot(target, context);
    let mut loss = -log_sigmoid(s_c);
    let g_c = sigmoid(s_c) - 1.0;

    let mut d_target: Vec<f64> = context.iter().map(|&u| g_c * u).collect();
    let d_context: Vec<f64> = target.iter().map(|&v| g_c * v).collect();
    let mut d_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        debug_assert_eq!(neg.len(), dim);
        let s_n = dot(target, neg);
        loss -= log_sigmoid(-s_n);
        let g_n = sigmoid(s_n);
        for (d, &u) in d_target.iter_mut().zip(neg.iter()) {
            *d += g_n * u;
        }
        d_negatives.push(target.iter().map(|&v| g_n * v).collect());
    }
    (loss, PairGradients { d_target, d_context, d_negatives })
}

/// One SGD step on the shared matrices. Returns the pair loss.
///
/// Safety: `input` and `output` must point to V×dim matrices that outlive the
/// call; in parallel mode concurrent calls may race on vector entries, which
/// is accepted (hogwild), but the row indices must be in bounds.
unsafe fn sgd_update(
    input: *mut f64,
    output: *mut f64,
    dim: usize,
    target: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
) -> f64 {
    let v_t = std::slice::from_raw_parts_mut(input.add(target * dim), dim);
    let mut accum = vec![0.0f64; dim];
    let mut loss;

    {
        let u_c = std::slice::from_raw_parts_mut(output.add(context * dim), dim);
        let s_c: f64 = v_t.iter().zip(u_c.iter()).map(|(a, b)| a * b).sum();
        loss = -log_sigmoid(s_c);
        let g_c = (sigmoid(s_c) - 1.0) * lr;
        for d in 0..dim {
            accum[d] += (sigmoid(s_c) - 1.0) * u_c[d];
            u_c[d] -= g_c * v_t[d];
        }
    }
    for &n in negatives {
        let u_n = std::slice::from_raw_parts_mut(output.add(n * dim), dim);
        let s_n: f64 = v_t.iter().zip(u_n.iter()).map(|(a, b)| a * b).sum();
        loss -= log_sigmoid(-s_n);
        let g_n = sigmoid(s_n);
        for d in 0..dim {
            accum[d] += g_n * u_n[d];
            u_n[d] -= lr * g_n * v_t[d];
        }
    }
    for d in 0..dim {
        v_t[d] -= lr * accum[d];
    }
    loss
}

/// Result of a training run: the space plus per-epoch average losses.
#[derive(Debug)]
pub struct TrainOutcome {
    pub space: EmbeddingSpace,
    pub epoch_losses: Vec<f64>,
    pub pair_count: u64,
}

/// Trains one seeded space over encoded sentences (vocabulary indices).
///
/// Deterministic mode processes pairs sequentially; re-running with the same
/// inputs reproduces the matrices bit for bit.
pub fn train(
    sentences: &[Vec<usize>],
    vocab: &Vocabulary,
    hp: &Hyperparams,
    seed: u64,
) -> Result<TrainOutcome> {
    hp.validate()?;
    let stream_tokens: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    if stream_tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    let retained_total = vocab.retained_total() as f64;
    let table = NegativeTable::new(vocab.freqs(), hp.smoothing);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut space = init_embeddings_with(vocab, hp.dim, seed, &mut rng);
    space.hyperparams = hp.clone();

    let total_positions = (hp.epochs as u64 * stream_tokens) as f64;
    let mut processed: u64 = 0;
    let mut epoch_losses = Vec::with_capacity(hp.epochs);
    let mut pair_count: u64 = 0;

    let input = space.input.as_mut_ptr();
    let output = space.output.as_mut_ptr();
    let mut kept = Vec::new();
    let mut negatives = Vec::with_capacity(hp.negatives);

    for epoch in 0..hp.epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_pairs: u64 = 0;
        for sentence in sentences {
            // Learning rate decays linearly over total token positions.
            let lr = {
                let frac = processed as f64 / total_positions;
                (hp.initial_lr - (hp.initial_lr - hp.final_lr) * frac).max(hp.final_lr)
            };
            kept.clear();
            for &w in sentence {
                let f = vocab.freq(w) as f64 / retained_total;
                if subsample_keep(f, hp.subsample, &mut rng) {
                    kept.push(w);
                }
            }
            for pos in 0..kept.len() {
                let b = if hp.fixed_window {
                    hp.window
                } else {
                    rng.gen_range(1..=hp.window)
                };
                let lo = pos.saturating_sub(b);
                let hi = (pos + b).min(kept.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let target = kept[pos];
                    let context = kept[ctx_pos];
                    negatives.clear();
                    for _ in 0..hp.negatives {
                        // Redraw a negative equal to the positive context.
                        for _try in 0..8 {
                            let n = table.sample(&mut rng);
                            if n != context {
                                negatives.push(n);
                                break;
                            }
                        }
                    }
                    epoch_loss += unsafe {
                        sgd_update(input, output, hp.dim, target, context, &negatives, lr)
                    };
                    epoch_pairs += 1;
                }
            }
            processed += sentence.len() as u64;
        }
        if epoch == 0 && epoch_pairs == 0 {
            return Err(Error::EmptyStream);
        }
        pair_count += epoch_pairs;
        epoch_losses.push(if epoch_pairs > 0 { epoch_loss / epoch_pairs as f64 } else { 0.0 });
    }

    debug_assert!(space.all_finite());
    Ok(TrainOutcome { space, epoch_losses, pair_count })
}

struct SharedMatrix(UnsafeCell<Vec<f64>>);
// Concurrent unsynchronized writes are confined to the matrix entries.
unsafe impl Sync for SharedMatrix {}

impl SharedMatrix {
    fn ptr(&self) -> *mut f64 {
        unsafe { (*self.0.get()).as_mut_ptr() }
    }
}

/// Hogwild-style parallel training: sentence chunks are processed on a rayon
/// pool with unsynchronized vector updates. Not deterministic; the returned
/// space carries `deterministic: false`.
pub fn train_parallel(
    sentences: &[Vec<usize>],
    vocab: &Vocabulary,
    hp: &Hyperparams,
    seed: u64,
    jobs: usize,
) -> Result<TrainOutcome> {
    hp.validate()?;
    let stream_tokens: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    if stream_tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    let retained_total = vocab.retained_total() as f64;
    let table = NegativeTable::new(vocab.freqs(), hp.smoothing);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut space = init_embeddings_with(vocab, hp.dim, seed, &mut rng);
    space.hyperparams = hp.clone();
    space.deterministic = false;

    let dim = hp.dim;
    let input = SharedMatrix(UnsafeCell::new(std::mem::take(&mut space.input)));
    let output = SharedMatrix(UnsafeCell::new(std::mem::take(&mut space.output)));
    let processed = std::sync::atomic::AtomicU64::new(0);
    let total_positions = (hp.epochs as u64 * stream_tokens) as f64;

    let jobs = jobs.max(1);
    let chunk = sentences.len().div_ceil(jobs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");

    let mut epoch_losses = Vec::with_capacity(hp.epochs);
    let mut pair_count = 0u64;
    let input_ref = &input;
    let output_ref = &output;
    for epoch in 0..hp.epochs {
        let results: Vec<(f64, u64)> = pool.install(|| {
            sentences
                .par_chunks(chunk.max(1))
                .enumerate()
                .map(|(ci, sents)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9)
                            ^ (ci as u64) << 32,
                    );
                    let input = input_ref.ptr();
                    let output = output_ref.ptr();
                    let mut loss = 0.0;
                    let mut pairs = 0u64;
                    let mut kept = Vec::new();
                    let mut negatives = Vec::with_capacity(hp.negatives);
                    for sentence in sents {
                        let done =
                            processed.load(std::sync::atomic::Ordering::Relaxed) as f64;
                        let lr = (hp.initial_lr
                            - (hp.initial_lr - hp.final_lr) * (done / total_positions))
                            .max(hp.final_lr);
                        kept.clear();
                        for &w in sentence {
                            let f = vocab.freq(w) as f64 / retained_total;
                            if subsample_keep(f, hp.subsample, &mut rng) {
                                kept.push(w);
                            }
                        }
                        for pos in 0..kept.len() {
                            let b = if hp.fixed_window {
                                hp.window
                            } else {
                                rng.gen_range(1..=hp.window)
                            };
                            let lo = pos.saturating_sub(b);
                            let hi = (pos + b).min(kept.len() - 1);
                            for ctx_pos in lo..=hi {
                                if ctx_pos == pos {
                                    continue;
                                }
                                negatives.clear();
                                for _ in 0..hp.negatives {
                                    for _try in 0..8 {
                                        let n = table.sample(&mut rng);
                                        if n != kept[ctx_pos] {
                                            negatives.push(n);
                                            break;
                                        }
                                    }
                                }
                                loss += unsafe {
                                    sgd_update(
                                        input,
                                        output,
                                        dim,
                                        kept[pos],
                                        kept[ctx_pos],
                                        &negatives,
                                        lr,
                                    )
                                };
                                pairs += 1;
                            }
                        }
                        processed.fetch_add(
                            sentence.len() as u64,
                            std::sync::atomic::Ordering::Relaxed,
                        );
                    }
                    (loss, pairs)
                })
                .collect()
        });
        let epoch_pairs: u64 = results.iter().map(|r| r.1).sum();
        let epoch_loss: f64 = results.iter().map(|r| r.0).sum();
        if epoch == 0 && epoch_pairs == 0 {
            return Err(Error::EmptyStream);
        }
        pair_count += epoch_pairs;
        epoch_losses.push(if epoch_pairs > 0 { epoch_loss / epoch_pairs as f64 } else { 0.0 });
    }

    space.input = input.0.into_inner();
    space.output = output.0.into_inner();
    debug_assert!(space.all_finite());
    Ok(TrainOutcome { space, epoch_losses, pair_count })
}
