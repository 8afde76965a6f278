//! Hyperparameter sweep runner: one axis varied per job against a default
//! profile, k seeded trainings per value, mean/stdev of stability and the
//! entropy–stability correlation per row.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{correlate_entropy_stability, Group};
use crate::corpus::{Mode, Vocabulary};
use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::pipeline::{
    compute_entropy, compute_stability, joined_records, train_seeded_spaces, ReportOptions,
};
use crate::sgns::{EmbeddingSpace, Hyperparams};

/// The five sweepable hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    W,
    E,
    N,
    M,
    S,
}

impl Axis {
    pub fn label(&self) -> &'static str {
        match self {
            Axis::W => "W",
            Axis::E => "E",
            Axis::N => "N",
            Axis::M => "M",
            Axis::S => "S",
        }
    }

    /// Base hyperparameters with this axis set to `value`.
    pub fn apply(&self, base: &Hyperparams, value: f64) -> Hyperparams {
        let mut hp = base.clone();
        match self {
            Axis::W => hp.window = value as usize,
            Axis::E => hp.epochs = value as usize,
            Axis::N => hp.negatives = value as usize,
            Axis::M => hp.smoothing = value,
            Axis::S => hp.subsample = value,
        }
        hp
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisJob {
    pub axis: Axis,
    pub values: Vec<f64>,
}

/// Sweep configuration, loaded from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default)]
    pub base: Hyperparams,
    pub axes: Vec<AxisJob>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_n")]
    pub n_neighbors: usize,
    #[serde(default)]
    pub restrict_to_concepts: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_n() -> usize {
    10
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidConfig("no axes given".into()));
        }
        for job in &self.axes {
            if job.values.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "axis {} has an empty values list",
                    job.axis.label()
                )));
            }
        }
        if self.seeds.len() < 2 {
            return Err(Error::InvalidConfig("need at least 2 seeds".into()));
        }
        self.base.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<SweepConfig> {
        let cfg: SweepConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Total report rows: 1 default row plus one per axis value.
    pub fn row_count(&self) -> usize {
        1 + self.axes.iter().map(|j| j.values.len()).sum::<usize>()
    }
}

/// One row of the sweep tables: stability mean/stdev and the
/// entropy–stability correlation for one hyperparameter setting.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub wenms: String,
    pub stability_mean: f64,
    pub stability_stdev: f64,
    pub rho: f64,
    pub p_value: f64,
    pub tokens: usize,
}

#[derive(Debug)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Trains the spaces for one run directory, or loads them if a previous
/// invocation already completed it (same manifest hash).
fn ensure_spaces(
    run_dir: &Path,
    tokens_path: &Path,
    encoded: &[Vec<usize>],
    vocab: &Vocabulary,
    hp: &Hyperparams,
    seeds: &[u64],
) -> Result<Vec<EmbeddingSpace>> {
    std::fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let manifest =
        RunManifest::new(tokens_path, Mode::Words, hp.clone(), seeds.to_vec(), run_dir)?;
    let manifest_path = run_dir.join("manifest.json");
    let space_paths: Vec<_> =
        seeds.iter().map(|s| run_dir.join(format!("space_seed{s}.txt"))).collect();

    if let Ok(existing) = RunManifest::load(&manifest_path) {
        if existing.hash() == manifest.hash() && space_paths.iter().all(|p| p.exists()) {
            return space_paths.iter().map(|p| EmbeddingSpace::load(p)).collect();
        }
    }

    manifest.save(&manifest_path)?;
    let hash = manifest.hash();
    let outcomes = train_seeded_spaces(encoded, vocab, hp, seeds, false, 1)?;
    let mut spaces = Vec::with_capacity(outcomes.len());
    for (outcome, path) in outcomes.into_iter().zip(&space_paths) {
        outcome.space.save(path, Some(&hash))?;
        spaces.push(outcome.space);
    }
    Ok(spaces)
}

fn evaluate_setting(
    axis: &str,
    value: &str,
    run_dir: &Path,
    tokens_path: &Path,
    encoded: &[Vec<usize>],
    vocab: &Vocabulary,
    hp: &Hyperparams,
    cfg: &SweepConfig,
) -> Result<SweepRow> {
    let spaces = ensure_spaces(run_dir, tokens_path, encoded, vocab, hp, &cfg.seeds)?;
    let refs: Vec<&EmbeddingSpace> = spaces.iter().collect();
    let opts = ReportOptions {
        n_neighbors: cfg.n_neighbors,
        restrict_to_concepts: cfg.restrict_to_concepts,
        ..ReportOptions::default()
    };
    let stab = compute_stability(&refs, vocab, &opts)?;
    let entropy = compute_entropy(encoded, vocab, hp.window, None);
    let records = joined_records(&stab, &entropy, vocab, &HashSet::new(), opts.low_freq_threshold);

    let values: Vec<f64> = records.iter().map(|r| r.stability).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stdev = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let corr = correlate_entropy_stability(&records, Group::All)?;
    Ok(SweepRow {
        axis: axis.to_string(),
        value: value.to_string(),
        wenms: hp.wenms_label(),
        stability_mean: mean,
        stability_stdev: stdev,
        rho: corr.rho,
        p_value: corr.p_value,
        tokens: records.len(),
    })
}

/// Runs the full sweep: one default row, then every (axis, value) job.
/// Idempotent over `out_dir`: completed runs are reused via their manifests.
pub fn run_sweep(
    tokens_path: &Path,
    encoded: &[Vec<usize>],
    vocab: &Vocabulary,
    cfg: &SweepConfig,
    out_dir: &Path,
) -> Result<SweepReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut rows = Vec::with_capacity(cfg.row_count());
    rows.push(evaluate_setting(
        "Default",
        &cfg.base.wenms_label(),
        &out_dir.join("runs").join("default"),
        tokens_path,
        encoded,
        vocab,
        &cfg.base,
        cfg,
    )?);
    for job in &cfg.axes {
        for &v in &job.values {
            let hp = job.axis.apply(&cfg.base, v);
            let run_dir = out_dir
                .join("runs")
                .join(format!("{}_{}", job.axis.label(), v));
            rows.push(evaluate_setting(
                job.axis.label(),
                &format!("{v}"),
                &run_dir,
                tokens_path,
                encoded,
                vocab,
                &hp,
                cfg,
            )?);
        }
    }
    Ok(SweepReport { rows })
}

impl SweepReport {
    /// Stability table (Avg/stdev per setting) as CSV.
    pub fn stability_csv(&self) -> String {
        let mut out = String::from("axis,value,wenms,stability_mean,stability_stdev,tokens\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{}\n",
                r.axis, r.value, r.wenms, r.stability_mean, r.stability_stdev, r.tokens
            ));
        }
        out
    }

    /// Correlation table (rho per setting) as CSV.
    pub fn correlation_csv(&self) -> String {
        let mut out = String::from("axis,value,wenms,rho,p_value\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.3e}\n",
                r.axis, r.value, r.wenms, r.rho, r.p_value
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_and_validates() {
        let cfg = SweepConfig::from_toml(
            r#"
            seeds = [1, 2, 3]
            [base]
            dim = 16
            window = 3
            epochs = 2
            negatives = 3
            smoothing = 0.75
            subsample = 0.001
            min_count = 1
            initial_lr = 0.025
            final_lr = 0.0001
            fixed_window = false
            [[axes]]
            axis = "W"
            values = [5, 10]
            [[axes]]
            axis = "M"
            values = [0.0, 1.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.row_count(), 5);
        assert_eq!(cfg.axes[0].axis, Axis::W);
    }

    #[test]
    fn empty_values_rejected() {
        let err = SweepConfig::from_toml(
            r#"
            [[axes]]
            axis = "W"
            values = []
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn axis_apply() {
        let base = Hyperparams::default();
        assert_eq!(Axis::W.apply(&base, 5.0).window, 5);
        assert_eq!(Axis::E.apply(&base, 30.0).epochs, 30);
        assert_eq!(Axis::N.apply(&base, 15.0).negatives, 15);
        assert_eq!(Axis::M.apply(&base, 0.0).smoothing, 0.0);
        assert_eq!(Axis::S.apply(&base, 0.01).subsample, 0.01);
    }
}
