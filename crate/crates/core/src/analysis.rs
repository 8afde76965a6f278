//! Joins frequency, stability and entropy per token; Pearson correlation with
//! a t-test p-value; heatmap binning; group filters.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// One token joined across the three measurements.
#[derive(Debug, Clone)]
pub struct JoinedRecord {
    pub token: String,
    pub frequency: u64,
    pub stability: f64,
    /// None when the token had no context words at all.
    pub entropy: Option<f64>,
    pub low_freq: bool,
    pub common: bool,
}

/// Default frequency threshold for the low-frequency group.
pub const LOW_FREQ_THRESHOLD: u64 = 100;

impl JoinedRecord {
    pub fn new(
        token: String,
        frequency: u64,
        stability: f64,
        entropy: Option<f64>,
        low_freq_threshold: u64,
        common_set: &HashSet<String>,
    ) -> JoinedRecord {
        JoinedRecord {
            low_freq: frequency < low_freq_threshold,
            common: common_set.contains(&token),
            token,
            frequency,
            stability,
            entropy,
        }
    }
}

/// The three concept groups of the correlation table. Filters compose by
/// intersection: `LowFreqCommon` = low-freq ∧ common.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    All,
    LowFreq,
    LowFreqCommon,
}

impl Group {
    pub fn label(&self) -> &'static str {
        match self {
            Group::All => "all",
            Group::LowFreq => "low_freq",
            Group::LowFreqCommon => "low_freq_common",
        }
    }

    pub fn matches(&self, r: &JoinedRecord) -> bool {
        match self {
            Group::All => true,
            Group::LowFreq => r.low_freq,
            Group::LowFreqCommon => r.low_freq && r.common,
        }
    }
}

/// Pearson correlation with a two-sided t-test p-value.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationResult {
    pub rho: f64,
    pub sample_size: usize,
    pub p_value: f64,
}

/// Product-moment correlation; p-value from the t distribution with n−2
/// degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::ShortSeries(x.len().min(y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = n - 2.0;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t2 = rho * rho * df / (1.0 - rho * rho);
        // Two-sided: P(|T| > t) = I_{df/(df+t²)}(df/2, 1/2).
        incomplete_beta(df / 2.0, 0.5, df / (df + t2))
    };
    Ok(CorrelationResult { rho, sample_size: x.len(), p_value })
}

/// Pearson over (entropy, stability) for records in `group`. Tokens with no
/// context are excluded.
pub fn correlate_entropy_stability(
    records: &[JoinedRecord],
    group: Group,
) -> Result<CorrelationResult> {
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| group.matches(r))
        .filter_map(|r| r.entropy.map(|e| (e, r.stability)))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    pearson(&x, &y)
}

/// Pearson over (frequency, stability) for records in `group`.
pub fn correlate_frequency_stability(
    records: &[JoinedRecord],
    group: Group,
) -> Result<CorrelationResult> {
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| group.matches(r))
        .map(|r| (r.frequency as f64, r.stability))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    pearson(&x, &y)
}

/// Counts of records over a frequency × stability grid.
#[derive(Debug, Clone)]
pub struct HeatmapGrid {
    pub freq_edges: Vec<f64>,
    pub stability_edges: Vec<f64>,
    /// Row-major: `cells[f_bin * stab_bins + s_bin]`.
    pub cells: Vec<u64>,
}

/// Default frequency edges: min_count, then powers of 10 up to an open end.
pub fn default_freq_edges(min_count: u64) -> Vec<f64> {
    vec![min_count as f64, 10.0, 100.0, 1_000.0, 10_000.0, f64::INFINITY]
}

/// Default stability edges: 0.0 to 1.0 in 0.1 steps.
pub fn default_stability_edges() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn bin_of(value: f64, edges: &[f64]) -> usize {
    let bins = edges.len() - 1;
    if value < edges[0] {
        return 0; // clamped into the first bin
    }
    // Half-open [lo, hi) bins, last bin closed; overflow clamps into the last.
    let idx = edges[1..].partition_point(|&e| e <= value);
    idx.min(bins - 1)
}

/// Bins records into the grid. Every record lands in exactly one cell;
/// out-of-range frequencies clamp into the end bins.
pub fn bin_heatmap(
    records: &[JoinedRecord],
    freq_edges: &[f64],
    stability_edges: &[f64],
) -> HeatmapGrid {
    assert!(freq_edges.len() >= 2 && stability_edges.len() >= 2);
    assert!(freq_edges.windows(2).all(|w| w[0] < w[1]), "edges must be strictly increasing");
    assert!(stability_edges.windows(2).all(|w| w[0] < w[1]));
    let fb = freq_edges.len() - 1;
    let sb = stability_edges.len() - 1;
    let mut cells = vec![0u64; fb * sb];
    for r in records {
        let fi = bin_of(r.frequency as f64, freq_edges);
        let si = bin_of(r.stability, stability_edges);
        cells[fi * sb + si] += 1;
    }
    HeatmapGrid {
        freq_edges: freq_edges.to_vec(),
        stability_edges: stability_edges.to_vec(),
        cells,
    }
}

impl HeatmapGrid {
    pub fn freq_bins(&self) -> usize {
        self.freq_edges.len() - 1
    }

    pub fn stability_bins(&self) -> usize {
        self.stability_edges.len() - 1
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }
}

// --- Special functions for the t-test p-value ------------------------------
//
// Lanczos log-gamma and the continued-fraction regularized incomplete beta,
// after Numerical Recipes. Kept local so the core carries no stats crate.

pub fn ln_gamma(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    const C: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut sum = 1.000000000190015;
    for (i, c) in C.iter().enumerate() {
        sum += c / (z + i as f64 + 1.0);
    }
    let tmp = z + 5.5;
    (z + 0.5) * tmp.ln() - tmp + (2.5066282746310005 * sum / z).ln()
}

/// Regularized incomplete beta function I_x(a, b).
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-14;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
