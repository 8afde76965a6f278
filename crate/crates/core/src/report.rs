//! CSV report writers. Every file starts with a `# manifest <hash>` comment
//! linking it back to the run that produced it.

use crate::analysis::{
    correlate_entropy_stability, correlate_frequency_stability, Group, HeatmapGrid, JoinedRecord,
};
use crate::corpus::Vocabulary;
use crate::stability::StabilityRecord;

fn header(manifest_hash: Option<&str>) -> String {
    match manifest_hash {
        Some(h) => format!("# manifest {h}\n"),
        None => String::new(),
    }
}

pub fn stability_csv(
    records: &[StabilityRecord],
    vocab: &Vocabulary,
    manifest_hash: Option<&str>,
) -> String {
    let mut out = header(manifest_hash);
    out.push_str("token,frequency,stability\n");
    for r in records {
        out.push_str(&format!("{},{},{:.6}\n", r.token, vocab.freq(r.index), r.stability));
    }
    out
}

pub fn entropy_csv(
    entropy: &[(Option<f64>, usize)],
    vocab: &Vocabulary,
    manifest_hash: Option<&str>,
) -> String {
    let mut out = header(manifest_hash);
    out.push_str("token,frequency,distinct_contexts,normalized_entropy\n");
    for (idx, (h, distinct)) in entropy.iter().enumerate() {
        match h {
            Some(h) => out.push_str(&format!(
                "{},{},{},{:.6}\n",
                vocab.token(idx),
                vocab.freq(idx),
                distinct,
                h
            )),
            None => out.push_str(&format!(
                "{},{},0,no_context\n",
                vocab.token(idx),
                vocab.freq(idx)
            )),
        }
    }
    out
}

pub fn joined_csv(records: &[JoinedRecord], manifest_hash: Option<&str>) -> String {
    let mut out = header(manifest_hash);
    out.push_str("token,frequency,stability,entropy,low_freq,common\n");
    for r in records {
        let entropy = match r.entropy {
            Some(e) => format!("{e:.6}"),
            None => "no_context".to_string(),
        };
        out.push_str(&format!(
            "{},{},{:.6},{},{},{}\n",
            r.token, r.frequency, r.stability, entropy, r.low_freq, r.common
        ));
    }
    out
}

/// Correlation table mirroring the three-group layout: one row per
/// (group, measure). Degenerate groups surface the error in place of values.
pub fn correlation_csv(records: &[JoinedRecord], manifest_hash: Option<&str>) -> String {
    let mut out = header(manifest_hash);
    out.push_str("group,measure,rho,sample_size,p_value\n");
    for group in [Group::All, Group::LowFreq, Group::LowFreqCommon] {
        for (measure, result) in [
            ("entropy_stability", correlate_entropy_stability(records, group)),
            ("frequency_stability", correlate_frequency_stability(records, group)),
        ] {
            match result {
                Ok(c) => out.push_str(&format!(
                    "{},{},{:.6},{},{:.3e}\n",
                    group.label(),
                    measure,
                    c.rho,
                    c.sample_size,
                    c.p_value
                )),
                Err(e) => {
                    out.push_str(&format!("{},{},error: {e},,\n", group.label(), measure))
                }
            }
        }
    }
    out
}

fn edge_label(lo: f64, hi: f64) -> String {
    if hi.is_infinite() {
        format!("[{lo},inf)")
    } else {
        format!("[{lo},{hi})")
    }
}

/// Grid layout: one row per frequency bin, one column per stability bin.
pub fn heatmap_grid_csv(grid: &HeatmapGrid, manifest_hash: Option<&str>) -> String {
    let mut out = header(manifest_hash);
    out.push_str("freq_bin");
    for s in grid.stability_edges.windows(2) {
        out.push_str(&format!(",{}", edge_label(s[0], s[1])));
    }
    out.push('\n');
    let sb = grid.stability_bins();
    for (fi, f) in grid.freq_edges.windows(2).enumerate() {
        out.push_str(&edge_label(f[0], f[1]));
        for si in 0..sb {
            out.push_str(&format!(",{}", grid.cells[fi * sb + si]));
        }
        out.push('\n');
    }
    out
}

/// Long format for plotting tools: `freq_bin,stab_bin,count`.
pub fn heatmap_long_csv(grid: &HeatmapGrid, manifest_hash: Option<&str>) -> String {
    let mut out = header(manifest_hash);
    out.push_str("freq_bin,stab_bin,count\n");
    let sb = grid.stability_bins();
    for (fi, f) in grid.freq_edges.windows(2).enumerate() {
        for (si, s) in grid.stability_edges.windows(2).enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                edge_label(f[0], f[1]),
                edge_label(s[0], s[1]),
                grid.cells[fi * sb + si]
            ));
        }
    }
    out
}
