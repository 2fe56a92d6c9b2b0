//! Histogram and peak statistics of homodyne samples, and the closed-form
//! error rate of the antipodal decision.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alice::Symbol;
use crate::bob::DetectionRecord;

pub const DEFAULT_BIN_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("invalid binning: {0}")]
    Binning(&'static str),
    #[error("no samples to summarize")]
    Empty,
    #[error("{records} detection records for {symbols} symbols")]
    LengthMismatch { records: usize, symbols: usize },
}

/// Uniform-width histogram with left-closed, right-open bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_total: u64,
    pub underflow: u64,
    /// Samples at or above the last edge, including NaN.
    pub overflow: u64,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn bin_centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }

    /// `bin_center,count` rows under a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center,count\n");
        for (c, n) in self.bin_centers().zip(&self.counts) {
            writeln!(out, "{c},{n}").unwrap();
        }
        out
    }
}

/// Bins `samples` into `[lo, lo + k·width)` for the smallest `k` covering
/// `range`.
pub fn histogram(samples: &[f64], bin_width: f64, range: (f64, f64)) -> Result<Histogram, AnalysisError> {
    let (lo, hi) = range;
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(AnalysisError::Binning("bin width must be finite and > 0"));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(AnalysisError::Binning("range must be finite with hi > lo"));
    }
    // Absorb rounding so e.g. 10 / 0.1 gives 100 bins, not 101.
    let n_bins = (((hi - lo) / bin_width) - 1e-9).ceil().max(1.0) as usize;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * bin_width).collect();
    let top = bin_edges[n_bins];

    let mut counts = vec![0u64; n_bins];
    let (mut underflow, mut overflow) = (0, 0);
    for &x in samples {
        if x < lo {
            underflow += 1;
        } else if x < top {
            let i = (((x - lo) / bin_width).floor() as usize).min(n_bins - 1);
            // floor() can land one bin off near an edge; settle against the edges.
            let i = if x < bin_edges[i] {
                i - 1
            } else if x >= bin_edges[i + 1] {
                i + 1
            } else {
                i
            };
            counts[i] += 1;
        } else {
            overflow += 1;
        }
    }
    Ok(Histogram {
        bin_edges,
        counts,
        n_total: samples.len() as u64,
        underflow,
        overflow,
    })
}

/// Range covering ±4σ around both outer peaks: `±(4√μ_eff + 4)`.
pub fn default_range(mu_eff: f64) -> (f64, f64) {
    let half = 4.0 * mu_eff.max(0.0).sqrt() + 4.0;
    (-half, half)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakGroup {
    CoincidenceBit0,
    CoincidenceBit1,
    AntiCoincidence,
}

impl PeakGroup {
    pub const ALL: [PeakGroup; 3] = [
        PeakGroup::CoincidenceBit0,
        PeakGroup::CoincidenceBit1,
        PeakGroup::AntiCoincidence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PeakGroup::CoincidenceBit0 => "coincidence_bit0",
            PeakGroup::CoincidenceBit1 => "coincidence_bit1",
            PeakGroup::AntiCoincidence => "anti_coincidence",
        }
    }

    fn of(symbol: Symbol, bob_basis: bool) -> Self {
        match (symbol.basis == bob_basis, symbol.bit) {
            (false, _) => PeakGroup::AntiCoincidence,
            (true, false) => PeakGroup::CoincidenceBit0,
            (true, true) => PeakGroup::CoincidenceBit1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: PeakGroup,
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance; 0 for fewer than two samples.
    pub var: f64,
    pub weight: f64,
}

/// Per-group statistics of the three histogram peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub n_total: usize,
    pub groups: [GroupStats; 3],
}

impl PeakSummary {
    pub fn get(&self, group: PeakGroup) -> &GroupStats {
        &self.groups[group as usize]
    }

    /// `group,count,mean,var,weight` rows under a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,count,mean,var,weight\n");
        for g in &self.groups {
            writeln!(out, "{},{},{},{},{}", g.group.name(), g.count, g.mean, g.var, g.weight).unwrap();
        }
        out
    }
}

/// Groups samples by ground truth: matched bases split by Alice's bit, and
/// mismatched bases.
pub fn peak_summary(records: &[DetectionRecord], alice_symbols: &[Symbol]) -> Result<PeakSummary, AnalysisError> {
    if records.len() != alice_symbols.len() {
        return Err(AnalysisError::LengthMismatch {
            records: records.len(),
            symbols: alice_symbols.len(),
        });
    }
    if records.is_empty() {
        return Err(AnalysisError::Empty);
    }
    // Welford accumulators: (count, mean, m2).
    let mut acc = [(0usize, 0.0f64, 0.0f64); 3];
    for (r, &s) in records.iter().zip(alice_symbols) {
        let (n, mean, m2) = &mut acc[PeakGroup::of(s, r.bob_basis) as usize];
        *n += 1;
        let delta = r.q - *mean;
        *mean += delta / *n as f64;
        *m2 += delta * (r.q - *mean);
    }
    let total = records.len();
    let groups = PeakGroup::ALL.map(|group| {
        let (count, mean, m2) = acc[group as usize];
        GroupStats {
            group,
            count,
            mean,
            var: if count > 1 { m2 / (count - 1) as f64 } else { 0.0 },
            weight: count as f64 / total as f64,
        }
    });
    Ok(PeakSummary { n_total: total, groups })
}

/// Error probability of the sign decision on a coherent pulse with detected
/// mean photon number `mu_eff` and noise variance `sigma_sq`:
/// `½·erfc(2√μ / √(2σ²))`.
pub fn theoretical_qber(mu_eff: f64, sigma_sq: f64) -> f64 {
    0.5 * libm::erfc(2.0 * mu_eff.max(0.0).sqrt() / (2.0 * sigma_sq).sqrt())
}
