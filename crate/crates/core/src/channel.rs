//! Fiber propagation for the two receiver layouts.
//!
//! Loss and polarization mismatch scale every amplitude. Phase drift is where
//! the layouts differ: with two fibers the signal and reference lines wander
//! independently, with one fiber both pulses see the same drift process and
//! only the part accumulated during the interferometer delay survives in the
//! difference.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::alice::{Architecture, PulseFrame};
use crate::error::{check, ConfigError};
use crate::optics::{ComplexAmplitude, PhaseDriftProcess, DEFAULT_LINEWIDTH_HZ, DEFAULT_REP_RATE_HZ};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelMode {
    TwoFiber,
    SingleFiberDelayed { delay_s: f64 },
}

impl ChannelMode {
    pub fn architecture(self) -> Architecture {
        match self {
            ChannelMode::TwoFiber => Architecture::TwoFiber,
            ChannelMode::SingleFiberDelayed { .. } => Architecture::SingleFiberDelayed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub length_km: f64,
    pub loss_db_per_km: f64,
    pub excess_loss_db: f64,
    /// Scalar polarization mode overlap, multiplies photon number.
    pub pol_overlap: f64,
    pub linewidth_hz: f64,
    pub mode: ChannelMode,
    pub slot_period_s: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            length_km: 0.0,
            loss_db_per_km: 0.2,
            excess_loss_db: 0.0,
            pol_overlap: 1.0,
            linewidth_hz: DEFAULT_LINEWIDTH_HZ,
            mode: ChannelMode::TwoFiber,
            slot_period_s: 1.0 / DEFAULT_REP_RATE_HZ,
        }
    }
}

impl ChannelConfig {
    /// Lossless, drift-free, perfectly aligned channel.
    pub fn ideal(mode: ChannelMode) -> Self {
        Self {
            loss_db_per_km: 0.0,
            linewidth_hz: 0.0,
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.length_km >= 0.0 && self.length_km.is_finite(), "length_km", "must be finite and >= 0")?;
        check(self.loss_db_per_km >= 0.0 && self.loss_db_per_km.is_finite(), "loss_db_per_km", "must be finite and >= 0")?;
        check(self.excess_loss_db >= 0.0 && self.excess_loss_db.is_finite(), "excess_loss_db", "must be finite and >= 0")?;
        check((0.0..=1.0).contains(&self.pol_overlap), "pol_overlap", "must lie in [0, 1]")?;
        check(self.linewidth_hz >= 0.0 && self.linewidth_hz.is_finite(), "linewidth_hz", "must be finite and >= 0")?;
        check(self.slot_period_s > 0.0 && self.slot_period_s.is_finite(), "slot_period_s", "must be finite and > 0")?;
        if let ChannelMode::SingleFiberDelayed { delay_s } = self.mode {
            check(delay_s >= 0.0 && delay_s.is_finite(), "delay_s", "must be finite and >= 0")?;
        }
        Ok(())
    }

    /// Total loss in dB.
    pub fn loss_db(&self) -> f64 {
        self.length_km * self.loss_db_per_km + self.excess_loss_db
    }
}

/// Power transmittance `10^(−loss/10)`.
pub fn transmittance(cfg: &ChannelConfig) -> f64 {
    10f64.powf(-cfg.loss_db() / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedSlot {
    pub signal: ComplexAmplitude,
    pub reference: Option<ComplexAmplitude>,
    pub theta_signal: f64,
    pub theta_reference: f64,
}

impl PropagatedSlot {
    /// Phase of the signal relative to its reference.
    pub fn theta_diff(&self) -> f64 {
        self.theta_signal - self.theta_reference
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedFrame {
    pub architecture: Architecture,
    pub slots: Vec<PropagatedSlot>,
}

impl PropagatedFrame {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("frame built for {frame:?} but channel configured for {channel:?}")]
    ModeMismatch {
        frame: Architecture,
        channel: Architecture,
    },
}

/// Sends a frame through the fiber. Drift processes are seeded from `rng`.
///
/// Slot `k` leaves at `t_k = k·slot_period_s`. In the two-fiber layout the
/// signal and reference lines each carry their own drift process, sampled at
/// `t_k`. In the delayed layout a single process is sampled at `t_k` for the
/// signal and at `t_k + delay_s` for the reference pulse.
pub fn propagate<R: Rng>(
    frame: &PulseFrame,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<PropagatedFrame, ChannelError> {
    cfg.validate()?;
    let channel = cfg.mode.architecture();
    if frame.architecture != channel {
        return Err(ChannelError::ModeMismatch {
            frame: frame.architecture,
            channel,
        });
    }

    let gain = (transmittance(cfg) * cfg.pol_overlap).sqrt();
    let n = frame.len();
    let thetas = match cfg.mode {
        ChannelMode::TwoFiber => {
            let mut sig = PhaseDriftProcess::new(cfg.linewidth_hz, SimRng::from_rng(&mut *rng))?;
            let mut refl = PhaseDriftProcess::new(cfg.linewidth_hz, SimRng::from_rng(&mut *rng))?;
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                if k > 0 {
                    sig.advance(cfg.slot_period_s);
                    refl.advance(cfg.slot_period_s);
                }
                out.push((sig.phase(), refl.phase()));
            }
            out
        }
        ChannelMode::SingleFiberDelayed { delay_s } => {
            let drift = PhaseDriftProcess::new(cfg.linewidth_hz, SimRng::from_rng(&mut *rng))?;
            sample_delayed(drift, n, cfg.slot_period_s, delay_s)
        }
    };

    let slots = frame
        .slots
        .iter()
        .zip(thetas)
        .map(|(slot, (theta_signal, theta_reference))| PropagatedSlot {
            signal: slot.signal.scale(gain),
            reference: slot.reference.map(|r| r.scale(gain)),
            theta_signal,
            theta_reference,
        })
        .collect();

    Ok(PropagatedFrame {
        architecture: frame.architecture,
        slots,
    })
}

/// Samples one drift process at the merged instants `t_k` (signal) and
/// `t_k + delay` (reference), in time order.
fn sample_delayed<R: Rng>(
    mut drift: PhaseDriftProcess<R>,
    n: usize,
    period: f64,
    delay: f64,
) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    let (mut next_sig, mut next_ref) = (0usize, 0usize);
    let mut now = 0.0;
    while next_ref < n {
        let t_sig = next_sig as f64 * period;
        let t_ref = next_ref as f64 * period + delay;
        // Ties go to the signal so a zero delay yields identical phases.
        if next_sig < n && t_sig <= t_ref {
            out[next_sig].0 = drift.advance((t_sig - now).max(0.0));
            now = t_sig;
            next_sig += 1;
        } else {
            out[next_ref].1 = drift.advance((t_ref - now).max(0.0));
            now = t_ref;
            next_ref += 1;
        }
    }
    out
}
