//! End-to-end tests driving the `embstab` binary over the bundled tagged
//! corpus: transform → train → stability/entropy → report → sweep.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_embstab")
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/tagged.txt")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn embstab")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "embstab {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

#[test]
fn transform_modes_on_table_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(
        &input,
        "[calcium carbonate|calcium_carbonate] appears to be as effective as \
         [aluminum hydroxide|aluminum_hydroxide] in binding dietary \
         [phosphorus|phosphorus] in [hemodialysis|hemodialysis] patients.\n",
    )
    .unwrap();

    let out = dir.path().join("cui2vec.txt");
    run_ok(&["transform", "--input", &p(&input), "--mode", "cui2vec", "--output", &p(&out)]);
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "calcium_carbonate appears to be as effective as aluminum_hydroxide \
         in binding dietary phosphorus in hemodialysis patients.\n"
    );

    let out = dir.path().join("nlm.txt");
    run_ok(&["transform", "--input", &p(&input), "--mode", "nlm", "--output", &p(&out)]);
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "calcium_carbonate aluminum_hydroxide phosphorus hemodialysis\n"
    );
    // Concept sidecar lists the ids.
    let concepts = std::fs::read_to_string(dir.path().join("nlm.txt.concepts")).unwrap();
    assert!(concepts.contains("calcium_carbonate"));
}

#[test]
fn words_mode_is_identity_on_untagged_text() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "plain words only\nsecond line here\n").unwrap();
    let out = dir.path().join("words.txt");
    run_ok(&["transform", "--input", &p(&input), "--mode", "words", "--output", &p(&out)]);
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "plain words only\nsecond line here\n"
    );
}

#[test]
fn nlm_on_concept_free_file_warns_and_emits_empty() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "no concepts anywhere\n").unwrap();
    let out = dir.path().join("empty.txt");
    let result = run_ok(&["transform", "--input", &p(&input), "--mode", "nlm", "--output", &p(&out)]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
    assert!(String::from_utf8_lossy(&result.stderr).contains("warning"));
}

#[test]
fn parse_error_reports_line_number_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "fine line\nbad [unclosed concept\n").unwrap();
    let out = run(&[
        "transform",
        "--input",
        &p(&input),
        "--mode",
        "cui2vec",
        "--output",
        &p(&dir.path().join("o.txt")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn missing_corpus_exits_2() {
    let out = run(&["train", "--tokens", "/nonexistent/tokens.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_seed_trains_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let tokens = dir.path().join("tokens.txt");
    run_ok(&[
        "transform",
        "--input",
        &p(&fixture()),
        "--mode",
        "cui2vec",
        "--output",
        &p(&tokens),
    ]);
    run_ok(&[
        "train",
        "--tokens",
        &p(&tokens),
        "--dim",
        "8",
        "-W",
        "3",
        "-E",
        "2",
        "--min-count",
        "2",
        "--seeds",
        "1,1",
        "--out-dir",
        &p(dir.path()),
    ]);
    // `--seeds 1,1` writes the same path twice; train two dirs to compare.
    let d2 = dir.path().join("second");
    run_ok(&[
        "train",
        "--tokens",
        &p(&tokens),
        "--dim",
        "8",
        "-W",
        "3",
        "-E",
        "2",
        "--min-count",
        "2",
        "--seeds",
        "1",
        "--out-dir",
        &p(&d2),
    ]);
    let a = std::fs::read(dir.path().join("space_seed1.txt")).unwrap();
    let b = std::fs::read(d2.join("space_seed1.txt")).unwrap();
    assert_eq!(a, b);
    // Manifest exists and the sidecar references its hash.
    let manifest = std::fs::read_to_string(d2.join("manifest.json")).unwrap();
    assert!(manifest.contains("corpus_sha256"));
    let meta = std::fs::read_to_string(d2.join("space_seed1.txt.meta.json")).unwrap();
    assert!(meta.contains("manifest_hash"));
}

fn full_pipeline(dir: &Path) -> (PathBuf, Vec<PathBuf>, PathBuf) {
    let tokens = dir.join("tokens.txt");
    run_ok(&[
        "transform",
        "--input",
        &p(&fixture()),
        "--mode",
        "cui2vec",
        "--output",
        &p(&tokens),
    ]);
    run_ok(&[
        "train",
        "--tokens",
        &p(&tokens),
        "--dim",
        "12",
        "-W",
        "3",
        "-E",
        "3",
        "-S",
        "0.01",
        "--min-count",
        "2",
        "--seeds",
        "1,2,3",
        "--out-dir",
        &p(dir),
    ]);
    let spaces: Vec<PathBuf> =
        (1..=3).map(|s| dir.join(format!("space_seed{s}.txt"))).collect();
    (tokens, spaces, dir.join("vocab.tsv"))
}

#[test]
fn report_bundle_has_all_files_and_v_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (tokens, spaces, vocab) = full_pipeline(dir.path());
    let out = dir.path().join("report");
    let mut args = vec![
        "report".to_string(),
        "--tokens".into(),
        p(&tokens),
        "--vocab".into(),
        p(&vocab),
        "--all-tokens".into(),
        "--out-dir".into(),
        p(&out),
        "--spaces".into(),
    ];
    args.extend(spaces.iter().map(|s| p(s)));
    let argrefs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    run_ok(&argrefs);

    let vocab_len = std::fs::read_to_string(&vocab).unwrap().lines().count();
    for file in ["stability.csv", "entropy.csv", "joined.csv"] {
        let text = std::fs::read_to_string(out.join(file)).unwrap();
        let data_rows =
            text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("token,")).count();
        assert_eq!(data_rows, vocab_len, "{file}");
        assert!(text.starts_with("# manifest "), "{file} missing manifest reference");
    }
    for file in ["correlations.csv", "heatmap_grid.csv", "heatmap_long.csv"] {
        assert!(out.join(file).exists(), "{file} missing");
    }

    // Correlate over the joined CSV reproduces the correlation table rows.
    let corr_out = dir.path().join("corr2.csv");
    run_ok(&[
        "correlate",
        "--joined",
        &p(&out.join("joined.csv")),
        "--output",
        &p(&corr_out),
    ]);
    let text = std::fs::read_to_string(&corr_out).unwrap();
    assert!(text.contains("all,entropy_stability,"));
}

#[test]
fn stability_on_duplicated_space_is_all_ones_and_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (_tokens, spaces, vocab) = full_pipeline(dir.path());
    let dup = dir.path().join("dup.txt");
    std::fs::copy(&spaces[0], &dup).unwrap();
    std::fs::copy(
        spaces[0].with_extension("txt.meta.json"),
        dir.path().join("dup.txt.meta.json"),
    )
    .unwrap();
    let out = dir.path().join("stab.csv");
    run_ok(&[
        "stability",
        "--vocab",
        &p(&vocab),
        "--n",
        "5",
        "--all-tokens",
        "--output",
        &p(&out),
        "--spaces",
        &p(&spaces[0]),
        &p(&dup),
        &p(&dup),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.ends_with("1.000000"), "{line}");
    }

    // Incomparable vocabularies: retrain on a different corpus.
    let other_tokens = dir.path().join("other.txt");
    std::fs::write(&other_tokens, "alpha beta gamma delta\nbeta alpha delta gamma\n".repeat(20))
        .unwrap();
    let other_dir = dir.path().join("other");
    run_ok(&[
        "train",
        "--tokens",
        &p(&other_tokens),
        "--dim",
        "12",
        "-E",
        "2",
        "--min-count",
        "1",
        "--seeds",
        "1",
        "--out-dir",
        &p(&other_dir),
    ]);
    let mismatch = run(&[
        "stability",
        "--vocab",
        &p(&vocab),
        "--output",
        &p(&dir.path().join("x.csv")),
        "--spaces",
        &p(&spaces[0]),
        &p(&other_dir.join("space_seed1.txt")),
    ]);
    assert_eq!(mismatch.status.code(), Some(3));
}

#[test]
fn entropy_csv_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (tokens, _spaces, vocab) = full_pipeline(dir.path());
    let out = dir.path().join("entropy.csv");
    run_ok(&[
        "entropy",
        "--tokens",
        &p(&tokens),
        "--vocab",
        &p(&vocab),
        "--window",
        "3",
        "--output",
        &p(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("token,frequency,distinct_contexts,normalized_entropy\n"));
    assert!(text.lines().count() > 1);
}

#[test]
fn sweep_runs_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (tokens, _spaces, _vocab) = full_pipeline(dir.path());
    let config = dir.path().join("sweep.toml");
    std::fs::write(
        &config,
        r#"
        seeds = [1, 2]
        n_neighbors = 5
        [base]
        dim = 8
        window = 3
        epochs = 2
        negatives = 3
        smoothing = 0.75
        subsample = 0.01
        min_count = 2
        initial_lr = 0.025
        final_lr = 0.0001
        fixed_window = false
        [[axes]]
        axis = "W"
        values = [5]
        "#,
    )
    .unwrap();
    let out = dir.path().join("sweep");
    run_ok(&[
        "sweep",
        "--tokens",
        &p(&tokens),
        "--config",
        &p(&config),
        "--out-dir",
        &p(&out),
    ]);
    let first = std::fs::read_to_string(out.join("sweep_stability.csv")).unwrap();
    assert_eq!(first.lines().count(), 3); // header + default + W=5

    // Re-invocation resumes from the completed runs and reproduces the table.
    let space = out.join("runs/default/space_seed1.txt");
    let mtime = std::fs::metadata(&space).unwrap().modified().unwrap();
    run_ok(&[
        "sweep",
        "--tokens",
        &p(&tokens),
        "--config",
        &p(&config),
        "--out-dir",
        &p(&out),
    ]);
    let second = std::fs::read_to_string(out.join("sweep_stability.csv")).unwrap();
    assert_eq!(first, second);
    assert_eq!(std::fs::metadata(&space).unwrap().modified().unwrap(), mtime);
}

#[test]
fn sweep_rejects_empty_values() {
    let dir = tempfile::tempdir().unwrap();
    let tokens = dir.path().join("tokens.txt");
    std::fs::write(&tokens, "a b c\n").unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(&config, "[[axes]]\naxis = \"W\"\nvalues = []\n").unwrap();
    let out = run(&[
        "sweep",
        "--tokens",
        &p(&tokens),
        "--config",
        &p(&config),
        "--out-dir",
        &p(&dir.path().join("sweep")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
