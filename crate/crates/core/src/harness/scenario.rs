//! Scenario files: a flat JSON object naming every run parameter, turned into
//! a session, executed, and written out as plot-ready files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::analysis::{default_range, histogram, peak_summary, theoretical_qber, AnalysisError, Histogram, PeakSummary, DEFAULT_BIN_WIDTH};
use crate::alice::{AliceConfig, Architecture, EncodingTable};
use crate::bob::BobConfig;
use crate::channel::{ChannelConfig, ChannelMode};
use crate::error::{check, ConfigError};
use crate::optics::{dbm_to_photons_per_pulse, OpticalConstants, DEFAULT_LINEWIDTH_HZ, DEFAULT_REP_RATE_HZ};
use crate::protocol::{run_session, SessionConfig, SessionError, SessionReport};

pub const REPORT_FILE: &str = "report.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const PEAKS_FILE: &str = "peaks.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

const BUNDLED: &[(&str, &str)] = &[
    ("self-homodyne-47dbm", include_str!("../../scenarios/self-homodyne-47dbm.json")),
    ("delayed-11km", include_str!("../../scenarios/delayed-11km.json")),
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown scenario parameter \"{0}\"")]
    UnknownParam(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Full parameter set of one run. Missing fields take their defaults,
/// unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,

    pub mu_signal: f64,
    pub mu_reference: Option<f64>,
    /// When set, `mu_signal` is derived so this power reaches the receiver.
    pub received_power_dbm: Option<f64>,
    pub rep_rate_hz: f64,
    pub wavelength_m: f64,

    pub length_km: f64,
    pub loss_db_per_km: f64,
    pub excess_loss_db: f64,
    pub pol_overlap: f64,
    pub linewidth_hz: f64,
    pub mode: Architecture,
    /// Interferometer delay, used by the single-fiber layout only.
    pub delay_s: f64,

    pub eta_det: f64,
    pub electronic_noise: f64,
    pub mu_reference_at_detector: f64,
    pub threshold_q0: f64,

    pub n_pulses: usize,
    pub sample_fraction: f64,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let channel = ChannelConfig::default();
        let bob = BobConfig::default();
        Self {
            name: String::new(),
            mu_signal: 1.0,
            mu_reference: None,
            received_power_dbm: None,
            rep_rate_hz: DEFAULT_REP_RATE_HZ,
            wavelength_m: OpticalConstants::default().wavelength_m,
            length_km: channel.length_km,
            loss_db_per_km: channel.loss_db_per_km,
            excess_loss_db: channel.excess_loss_db,
            pol_overlap: channel.pol_overlap,
            linewidth_hz: DEFAULT_LINEWIDTH_HZ,
            mode: Architecture::TwoFiber,
            delay_s: 0.0,
            eta_det: bob.eta_det,
            electronic_noise: bob.electronic_noise,
            mu_reference_at_detector: bob.mu_reference_at_detector,
            threshold_q0: bob.threshold_q0,
            n_pulses: 100_000,
            sample_fraction: 0.1,
            seed: 0,
            out_dir: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.to_session()?;
        Ok(cfg)
    }

    /// Reads a scenario file. A bundled scenario name is accepted in place of
    /// a path when no such file exists.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        if !path.exists() {
            if let Some(cfg) = path.to_str().and_then(Self::bundled) {
                return Ok(cfg);
            }
        }
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_json(text).expect("bundled scenarios are valid"))
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    pub fn channel_config(&self) -> Result<ChannelConfig, ConfigError> {
        check(
            self.rep_rate_hz > 0.0 && self.rep_rate_hz.is_finite(),
            "rep_rate_hz",
            "must be finite and > 0",
        )?;
        let mode = match self.mode {
            Architecture::TwoFiber => ChannelMode::TwoFiber,
            Architecture::SingleFiberDelayed => ChannelMode::SingleFiberDelayed { delay_s: self.delay_s },
        };
        let cfg = ChannelConfig {
            length_km: self.length_km,
            loss_db_per_km: self.loss_db_per_km,
            excess_loss_db: self.excess_loss_db,
            pol_overlap: self.pol_overlap,
            linewidth_hz: self.linewidth_hz,
            mode,
            slot_period_s: 1.0 / self.rep_rate_hz,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Launched photons per signal pulse, after applying any received-power
    /// target.
    pub fn launched_mu(&self, channel: &ChannelConfig) -> Result<f64, ConfigError> {
        let Some(p_dbm) = self.received_power_dbm else {
            return Ok(self.mu_signal);
        };
        let constants = OpticalConstants {
            wavelength_m: self.wavelength_m,
            ..OpticalConstants::default()
        };
        let at_receiver = dbm_to_photons_per_pulse(p_dbm, &constants, self.rep_rate_hz)?;
        let gain = crate::channel::transmittance(channel) * channel.pol_overlap;
        check(gain > 0.0, "pol_overlap", "channel blocks all light; cannot derive mu_signal")?;
        Ok(at_receiver / gain)
    }

    pub fn to_session(&self) -> Result<SessionConfig, ConfigError> {
        let channel = self.channel_config()?;
        let session = SessionConfig {
            alice: AliceConfig {
                mu_signal: self.launched_mu(&channel)?,
                mu_reference: self.mu_reference,
                table: EncodingTable::standard(),
            },
            bob: BobConfig {
                eta_det: self.eta_det,
                electronic_noise: self.electronic_noise,
                mu_reference_at_detector: self.mu_reference_at_detector,
                threshold_q0: self.threshold_q0,
            },
            channel,
            n_pulses: self.n_pulses,
            sample_fraction: self.sample_fraction,
            seed: self.seed,
        };
        session.validate()?;
        Ok(session)
    }

    /// Returns a copy with one named field replaced by a JSON value.
    pub fn with_param(&self, param: &str, value: &Value) -> Result<Self, HarnessError> {
        let Value::Object(mut obj) = serde_json::to_value(self)? else {
            unreachable!("scenario serializes to an object")
        };
        if !obj.contains_key(param) {
            return Err(HarnessError::UnknownParam(param.to_string()));
        }
        obj.insert(param.to_string(), value.clone());
        let cfg: Self = serde_json::from_value(Value::Object(obj))?;
        cfg.to_session()?;
        Ok(cfg)
    }
}

/// Products of one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub report: SessionReport,
    pub histogram: Histogram,
    pub peaks: PeakSummary,
    pub files: Vec<PathBuf>,
}

/// Runs a scenario in memory.
pub fn evaluate_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput, HarnessError> {
    let session = cfg.to_session()?;
    let run = run_session(&session)?;
    let qs: Vec<f64> = run.physics.records.iter().map(|r| r.q).collect();
    let histogram = histogram(&qs, DEFAULT_BIN_WIDTH, default_range(session.mu_eff()))?;
    let peaks = peak_summary(&run.physics.records, &run.physics.symbols)?;
    Ok(ScenarioOutput {
        report: run.report,
        histogram,
        peaks,
        files: Vec::new(),
    })
}

/// Runs a scenario and writes `report.json`, `histogram.csv` and `peaks.csv`
/// into `out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Result<ScenarioOutput, HarnessError> {
    let mut out = evaluate_scenario(cfg)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let files = [
        (REPORT_FILE, out.report.to_json_bytes()),
        (HISTOGRAM_FILE, out.histogram.to_csv().into_bytes()),
        (PEAKS_FILE, out.peaks.to_csv().into_bytes()),
    ];
    for (name, bytes) in files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        out.files.push(path);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub value: String,
    pub seed: u64,
    pub mu_eff: f64,
    pub qber_estimate: f64,
    pub theoretical_qber: f64,
    pub n_key_bits: usize,
    /// Final key bits per transmitted pulse.
    pub key_rate: f64,
}

fn display_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses a comma-separated list; each item is read as JSON, falling back to
/// a bare string (so `two_fiber` works unquoted).
pub fn parse_values(list: &str) -> Vec<Value> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string())))
        .collect()
}

/// Runs one session per value of `param`. Point `i` uses seed
/// `base_seed + i`, so results do not depend on scheduling. `threads` caps
/// the worker pool.
pub fn sweep(
    base: &ScenarioConfig,
    param: &str,
    values: &[Value],
    threads: Option<usize>,
) -> Result<Vec<SweepPoint>, HarnessError> {
    if param == "seed" {
        return Err(HarnessError::Config(ConfigError::new(
            "seed",
            "point seeds are derived from the base seed and cannot be swept",
        )));
    }
    let configs = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut cfg = base.with_param(param, v)?;
            cfg.seed = base.seed.wrapping_add(i as u64);
            Ok((i, display_value(v), cfg))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let run_point = |(index, value, cfg): &(usize, String, ScenarioConfig)| -> Result<SweepPoint, HarnessError> {
        let session = cfg.to_session()?;
        let report = run_session(&session)?.report;
        Ok(SweepPoint {
            index: *index,
            value: value.clone(),
            seed: cfg.seed,
            mu_eff: report.mu_eff,
            qber_estimate: report.qber_estimate,
            theoretical_qber: theoretical_qber(report.mu_eff, session.bob.noise_variance()),
            n_key_bits: report.n_key_bits,
            key_rate: report.n_key_bits as f64 / report.n_pulses as f64,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .expect("thread pool");
    pool.install(|| configs.par_iter().map(run_point).collect())
}

pub fn sweep_csv(param: &str, points: &[SweepPoint]) -> String {
    let mut out = format!("point,{param},seed,mu_eff,qber_estimate,theoretical_qber,n_key_bits,key_rate\n");
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.index, p.value, p.seed, p.mu_eff, p.qber_estimate, p.theoretical_qber, p.n_key_bits, p.key_rate
        )
        .unwrap();
    }
    out
}

/// Runs a sweep and writes `sweep.csv` into `out_dir`.
pub fn run_sweep(
    base: &ScenarioConfig,
    param: &str,
    values: &[Value],
    threads: Option<usize>,
    out_dir: &Path,
) -> Result<(Vec<SweepPoint>, PathBuf), HarnessError> {
    let points = sweep(base, param, values, threads)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let path = out_dir.join(SWEEP_FILE);
    fs::write(&path, sweep_csv(param, &points)).map_err(io_err(&path))?;
    Ok((points, path))
}
