//! `embstab` — command-line pipeline for embedding stability experiments:
//! transform → train×k → stability / entropy → correlate / report → sweep.
//!
//! Exit codes: 0 success, 1 internal error, 2 input error, 3 incomparable
//! inputs.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use embstab_core::analysis::{bin_heatmap, default_freq_edges, default_stability_edges};
use embstab_core::corpus::{self, Mode, Vocabulary};
use embstab_core::error::Error as CoreError;
use embstab_core::pipeline::{
    compute_entropy, compute_stability, joined_records, load_spaces, train_seeded_spaces,
    ReportOptions,
};
use embstab_core::report;
use embstab_core::sgns::{EmbeddingSpace, Hyperparams};
use embstab_core::stability::{nearest_neighbors, NormalizedSpace};
use embstab_core::sweep::{run_sweep, SweepConfig};
use embstab_core::{JoinedRecord, RunManifest};

/// Default output directory env var.
const OUT_DIR_ENV: &str = "EMBSTAB_OUT_DIR";

#[derive(Parser)]
#[command(name = "embstab", version, about = "Embedding stability toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transform tagged text into a training token stream.
    Transform(TransformArgs),
    /// Train one embedding space per seed.
    Train(TrainArgs),
    /// Cross-space neighbor-overlap stability.
    Stability(StabilityArgs),
    /// Context-word normalized entropy per token.
    Entropy(EntropyArgs),
    /// Correlation table over a joined report.
    Correlate(CorrelateArgs),
    /// Full report bundle: stability, entropy, joined, correlations, heatmap.
    Report(ReportArgs),
    /// Hyperparameter sweep from a TOML config.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct TransformArgs {
    /// Input text, one sentence per line, `[surface|CUI]` concept markup.
    #[arg(long)]
    input: PathBuf,
    /// cui2vec, nlm or words.
    #[arg(long)]
    mode: Mode,
    /// Output token stream (one transformed sentence per line). A sidecar
    /// `<output>.concepts` lists the concept ids seen.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Clone)]
struct HyperArgs {
    /// Embedding size.
    #[arg(long, default_value_t = 200)]
    dim: usize,
    /// Window size W.
    #[arg(short = 'W', long, default_value_t = 7)]
    window: usize,
    /// Epochs E.
    #[arg(short = 'E', long, default_value_t = 50)]
    epochs: usize,
    /// Negative samples N.
    #[arg(short = 'N', long, default_value_t = 5)]
    negatives: usize,
    /// Negative-distribution smoothing exponent M.
    #[arg(short = 'M', long, default_value_t = 0.75)]
    smoothing: f64,
    /// Subsampling rate S.
    #[arg(short = 'S', long, default_value_t = 1e-3)]
    subsample: f64,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    final_lr: f64,
    /// Use a fixed window of exactly W instead of the dynamic 1..=W draw.
    #[arg(long)]
    fixed_window: bool,
}

impl HyperArgs {
    fn to_hyperparams(&self) -> Hyperparams {
        Hyperparams {
            dim: self.dim,
            window: self.window,
            epochs: self.epochs,
            negatives: self.negatives,
            smoothing: self.smoothing,
            subsample: self.subsample,
            min_count: self.min_count,
            initial_lr: self.lr,
            final_lr: self.final_lr,
            fixed_window: self.fixed_window,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Token stream produced by `transform`.
    #[arg(long)]
    tokens: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Comma-separated seeds; one space is trained per seed.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    /// Concept-id list (one per line) marking concept tokens in the vocab;
    /// defaults to `<tokens>.concepts` when that file exists.
    #[arg(long)]
    concepts: Option<PathBuf>,
    /// Recorded in the manifest.
    #[arg(long, default_value = "words")]
    mode: Mode,
    /// Hogwild parallel updates (forfeits determinism).
    #[arg(long)]
    parallel: bool,
    /// Concurrent jobs for --parallel.
    #[arg(long, default_value_t = 4)]
    jobs: usize,
    /// Output directory; defaults to $EMBSTAB_OUT_DIR or `.`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    /// Embedding files (≥2), all trained on the same vocabulary.
    #[arg(long, num_args = 2.., required = true)]
    spaces: Vec<PathBuf>,
    /// Vocabulary file (for frequencies and the concept mask).
    #[arg(long)]
    vocab: PathBuf,
    /// Neighbor count n.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Evaluate every token instead of restricting to concepts.
    #[arg(long)]
    all_tokens: bool,
    /// Also dump per-space neighbor lists for audit.
    #[arg(long)]
    neighbors_dump: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EntropyArgs {
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Context window; fixed, both directions, sentence-bounded.
    #[arg(long, default_value_t = 7)]
    window: usize,
    /// Collect profiles on the subsampled stream instead of the raw corpus.
    #[arg(long)]
    entropy_after_subsampling: bool,
    /// Subsampling rate for --entropy-after-subsampling.
    #[arg(short = 'S', long, default_value_t = 1e-3)]
    subsample: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Joined CSV produced by `report`.
    #[arg(long)]
    joined: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, num_args = 2.., required = true)]
    spaces: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Entropy window; defaults to the training window of the first space.
    #[arg(long)]
    window: Option<usize>,
    /// Concept-id file defining the "commonly used" group.
    #[arg(long)]
    common_concepts: Option<PathBuf>,
    /// Low-frequency group threshold.
    #[arg(long, default_value_t = 100)]
    low_freq_threshold: u64,
    #[arg(long)]
    all_tokens: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    tokens: PathBuf,
    /// Sweep config (TOML): base hyperparameters, axes, seeds.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Transform(a) => cmd_transform(a),
        Command::Train(a) => cmd_train(a),
        Command::Stability(a) => cmd_stability(a),
        Command::Entropy(a) => cmd_entropy(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Report(a) => cmd_report(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CoreError) -> u8 {
    match e {
        CoreError::IncomparableSpaces { .. } => 3,
        CoreError::Parse { .. }
        | CoreError::EmptyCorpus
        | CoreError::Io { .. }
        | CoreError::Format { .. }
        | CoreError::InvalidConfig(_)
        | CoreError::InvalidHyperparams(_)
        | CoreError::UnknownToken(_) => 2,
        _ => 1,
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CoreError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| CoreError::io(path, e))
}

fn read_concept_set(path: &Path) -> Result<HashSet<String>, CoreError> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    Ok(text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect())
}

fn cmd_transform(args: TransformArgs) -> Result<(), CoreError> {
    let file = std::fs::File::open(&args.input).map_err(|e| CoreError::io(&args.input, e))?;
    let sentences = corpus::parse_tagged_text(std::io::BufReader::new(file))?;
    let mut out = String::new();
    let mut emitted = 0usize;
    for s in &sentences {
        if let Some(tokens) = corpus::transform(s, args.mode) {
            out.push_str(&tokens.join(" "));
            out.push('\n');
            emitted += 1;
        }
    }
    write_file(&args.output, &out)?;

    let concepts = corpus::concept_ids(&sentences);
    let mut sorted: Vec<&String> = concepts.iter().collect();
    sorted.sort();
    let concept_text =
        sorted.iter().map(|c| c.as_str()).collect::<Vec<_>>().join("\n");
    let concepts_path = sidecar_concepts_path(&args.output);
    write_file(&concepts_path, &concept_text)?;

    if emitted == 0 {
        eprintln!(
            "warning: no sentences emitted in {} mode (no concepts in input?)",
            args.mode.as_str()
        );
    }
    eprintln!("wrote {} sentences to {}", emitted, args.output.display());
    Ok(())
}

fn sidecar_concepts_path(tokens: &Path) -> PathBuf {
    let mut s = tokens.as_os_str().to_owned();
    s.push(".concepts");
    PathBuf::from(s)
}

fn load_corpus(
    tokens_path: &Path,
    min_count: u64,
    concepts: Option<&Path>,
) -> Result<(Vec<Vec<String>>, Vocabulary), CoreError> {
    let sentences = corpus::read_token_file(tokens_path)?;
    let concept_set = match concepts {
        Some(p) => read_concept_set(p)?,
        None => {
            let side = sidecar_concepts_path(tokens_path);
            if side.exists() {
                read_concept_set(&side)?
            } else {
                HashSet::new()
            }
        }
    };
    let (vocab, _stats) = Vocabulary::build(sentences.iter(), min_count, &concept_set)?;
    Ok((sentences, vocab))
}

fn cmd_train(args: TrainArgs) -> Result<(), CoreError> {
    let hp = args.hyper.to_hyperparams();
    for w in hp.validate()? {
        eprintln!("warning: {w}");
    }
    let dir = out_dir(args.out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| CoreError::io(&dir, e))?;

    let (sentences, vocab) =
        load_corpus(&args.tokens, hp.min_count, args.concepts.as_deref())?;
    let encoded: Vec<Vec<usize>> = sentences.iter().map(|s| vocab.encode(s)).collect();

    // The manifest is recorded before any artifact is written.
    let manifest =
        RunManifest::new(&args.tokens, args.mode, hp.clone(), args.seeds.clone(), &dir)?;
    manifest.save(&dir.join("manifest.json"))?;
    let hash = manifest.hash();

    vocab.save(&dir.join("vocab.tsv"))?;

    let outcomes =
        train_seeded_spaces(&encoded, &vocab, &hp, &args.seeds, args.parallel, args.jobs)?;
    for (seed, outcome) in args.seeds.iter().zip(outcomes) {
        let path = dir.join(format!("space_seed{seed}.txt"));
        outcome.space.save(&path, Some(&hash))?;
        eprintln!(
            "seed {seed}: {} pairs, final epoch loss {:.4} -> {}",
            outcome.pair_count,
            outcome.epoch_losses.last().copied().unwrap_or(0.0),
            path.display()
        );
    }
    Ok(())
}

fn cmd_stability(args: StabilityArgs) -> Result<(), CoreError> {
    let vocab = Vocabulary::load(&args.vocab)?;
    let spaces = load_spaces(&args.spaces)?;
    let refs: Vec<&EmbeddingSpace> = spaces.iter().collect();
    let opts = ReportOptions {
        n_neighbors: args.n,
        restrict_to_concepts: !args.all_tokens,
        ..ReportOptions::default()
    };
    let records = compute_stability(&refs, &vocab, &opts)?;
    write_file(&args.output, &report::stability_csv(&records, &vocab, None))?;

    if let Some(dump) = &args.neighbors_dump {
        let normalized: Vec<NormalizedSpace> =
            spaces.iter().map(NormalizedSpace::from_space).collect();
        let mask = embstab_core::pipeline::evaluation_mask(&vocab, !args.all_tokens);
        let mut out = String::from("space,token,rank,neighbor,cosine\n");
        for (si, ns) in normalized.iter().enumerate() {
            for r in &records {
                let nn = nearest_neighbors(ns, r.index, args.n, mask.as_deref())?;
                for (rank, &(ni, score)) in nn.neighbors.iter().enumerate() {
                    out.push_str(&format!(
                        "{si},{},{},{},{score:.6}\n",
                        r.token,
                        rank + 1,
                        vocab.token(ni)
                    ));
                }
            }
        }
        write_file(dump, &out)?;
    }
    Ok(())
}

fn cmd_entropy(args: EntropyArgs) -> Result<(), CoreError> {
    let vocab = Vocabulary::load(&args.vocab)?;
    let sentences = corpus::read_token_file(&args.tokens)?;
    let encoded: Vec<Vec<usize>> = sentences.iter().map(|s| vocab.encode(s)).collect();
    let subsample = args
        .entropy_after_subsampling
        .then_some((args.subsample, args.seed));
    let entropy = compute_entropy(&encoded, &vocab, args.window, subsample);
    write_file(&args.output, &report::entropy_csv(&entropy, &vocab, None))
}

fn parse_joined_csv(path: &Path) -> Result<Vec<JoinedRecord>, CoreError> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        if line.starts_with('#') || line.starts_with("token,") || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CoreError::format(path, format!("line {}: expected 6 fields", i + 1)));
        }
        let bad = |what: &str| CoreError::format(path, format!("line {}: bad {what}", i + 1));
        records.push(JoinedRecord {
            token: fields[0].to_string(),
            frequency: fields[1].parse().map_err(|_| bad("frequency"))?,
            stability: fields[2].parse().map_err(|_| bad("stability"))?,
            entropy: if fields[3] == "no_context" {
                None
            } else {
                Some(fields[3].parse().map_err(|_| bad("entropy"))?)
            },
            low_freq: fields[4].parse().map_err(|_| bad("low_freq flag"))?,
            common: fields[5].parse().map_err(|_| bad("common flag"))?,
        });
    }
    Ok(records)
}

fn cmd_correlate(args: CorrelateArgs) -> Result<(), CoreError> {
    let records = parse_joined_csv(&args.joined)?;
    write_file(&args.output, &report::correlation_csv(&records, None))
}

fn cmd_report(args: ReportArgs) -> Result<(), CoreError> {
    let dir = out_dir(args.out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| CoreError::io(&dir, e))?;

    let vocab = Vocabulary::load(&args.vocab)?;
    let sentences = corpus::read_token_file(&args.tokens)?;
    let encoded: Vec<Vec<usize>> = sentences.iter().map(|s| vocab.encode(s)).collect();
    let spaces = load_spaces(&args.spaces)?;
    let refs: Vec<&EmbeddingSpace> = spaces.iter().collect();

    let common_set = match &args.common_concepts {
        Some(p) => read_concept_set(p)?,
        None => HashSet::new(),
    };
    let opts = ReportOptions {
        n_neighbors: args.n,
        restrict_to_concepts: !args.all_tokens,
        low_freq_threshold: args.low_freq_threshold,
        ..ReportOptions::default()
    };
    let manifest_hash =
        embstab_core::sgns::SpaceMeta::load_for(&args.spaces[0]).and_then(|m| m.manifest_hash);

    let window = args.window.unwrap_or(spaces[0].hyperparams.window);
    let stab = compute_stability(&refs, &vocab, &opts)?;
    let entropy = compute_entropy(&encoded, &vocab, window, None);
    let records =
        joined_records(&stab, &entropy, &vocab, &common_set, args.low_freq_threshold);

    let hash = manifest_hash.as_deref();
    write_file(&dir.join("stability.csv"), &report::stability_csv(&stab, &vocab, hash))?;
    write_file(&dir.join("entropy.csv"), &report::entropy_csv(&entropy, &vocab, hash))?;
    write_file(&dir.join("joined.csv"), &report::joined_csv(&records, hash))?;
    write_file(&dir.join("correlations.csv"), &report::correlation_csv(&records, hash))?;
    let grid = bin_heatmap(
        &records,
        &default_freq_edges(vocab.min_count.max(1)),
        &default_stability_edges(),
    );
    write_file(&dir.join("heatmap_grid.csv"), &report::heatmap_grid_csv(&grid, hash))?;
    write_file(&dir.join("heatmap_long.csv"), &report::heatmap_long_csv(&grid, hash))?;
    eprintln!("report bundle written to {}", dir.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CoreError> {
    let dir = out_dir(args.out_dir);
    let text =
        std::fs::read_to_string(&args.config).map_err(|e| CoreError::io(&args.config, e))?;
    let cfg = SweepConfig::from_toml(&text)?;
    let sentences = corpus::read_token_file(&args.tokens)?;
    let side = sidecar_concepts_path(&args.tokens);
    let concept_set =
        if side.exists() { read_concept_set(&side)? } else { HashSet::new() };
    let (vocab, _) = Vocabulary::build(sentences.iter(), cfg.base.min_count, &concept_set)?;
    let encoded: Vec<Vec<usize>> = sentences.iter().map(|s| vocab.encode(s)).collect();

    let report = run_sweep(&args.tokens, &encoded, &vocab, &cfg, &dir)?;
    write_file(&dir.join("sweep_stability.csv"), &report.stability_csv())?;
    write_file(&dir.join("sweep_correlation.csv"), &report.correlation_csv())?;
    eprintln!("sweep report ({} rows) written to {}", report.rows.len(), dir.display());
    Ok(())
}
