//! Receiver: basis modulation, balanced homodyne sampling and bit decisions.
//!
//! Samples are expressed in shot-noise units: the vacuum quadrature has unit
//! variance and a coherent pulse `√μ·e^{jφ}` measured against an in-phase
//! reference has mean `2√μ·cos φ`. Electronic noise of the balanced pair is
//! referred to the input through the mixing gain, contributing `N_el/μ_ref`.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::PropagatedFrame;
use crate::error::{check, ConfigError};
use crate::optics::ComplexAmplitude;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BobConfig {
    /// Detector quantum efficiency in (0, 1].
    pub eta_det: f64,
    /// Electronic noise variance at unit reference photon number (SNU).
    pub electronic_noise: f64,
    pub mu_reference_at_detector: f64,
    /// Postselection half-width: `|q| <= q0` is inconclusive.
    pub threshold_q0: f64,
}

impl Default for BobConfig {
    fn default() -> Self {
        Self {
            eta_det: 1.0,
            electronic_noise: 0.0,
            mu_reference_at_detector: 1e6,
            threshold_q0: 0.0,
        }
    }
}

impl BobConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.eta_det > 0.0 && self.eta_det <= 1.0, "eta_det", "must lie in (0, 1]")?;
        check(
            self.electronic_noise >= 0.0 && self.electronic_noise.is_finite(),
            "electronic_noise",
            "must be finite and >= 0",
        )?;
        check(
            self.mu_reference_at_detector > 0.0 && !self.mu_reference_at_detector.is_nan(),
            "mu_reference_at_detector",
            "must be > 0",
        )?;
        check(
            self.threshold_q0 >= 0.0 && self.threshold_q0.is_finite(),
            "threshold_q0",
            "must be finite and >= 0",
        )
    }

    /// Total quadrature noise variance `1 + N_el/μ_ref`.
    pub fn noise_variance(&self) -> f64 {
        1.0 + self.electronic_noise / self.mu_reference_at_detector
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Bit0,
    Bit1,
    Inconclusive,
}

impl Decision {
    /// The decoded bit, if any (`true` = bit 1).
    pub fn bit(self) -> Option<bool> {
        match self {
            Decision::Bit0 => Some(false),
            Decision::Bit1 => Some(true),
            Decision::Inconclusive => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub slot_index: usize,
    pub bob_basis: bool,
    pub q: f64,
    pub decision: Decision,
}

/// Receiver phase for a basis choice: 0 or π/2.
pub fn basis_phase(basis: bool) -> f64 {
    if basis {
        FRAC_PI_2
    } else {
        0.0
    }
}

pub fn choose_bases<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random::<bool>()).collect()
}

/// Draws one balanced-homodyne quadrature sample.
///
/// `q = 2√η·Re[signal·e^{−j(φ_B − θ)}] + n`, `n ~ N(0, 1 + N_el/μ_ref)`, where
/// `θ` is the channel phase of the signal relative to the reference.
pub fn homodyne_sample<R: Rng + ?Sized>(
    signal: ComplexAmplitude,
    theta_diff: f64,
    phi_b: f64,
    cfg: &BobConfig,
    rng: &mut R,
) -> f64 {
    let rotated = signal * ComplexAmplitude::from_polar(1.0, theta_diff - phi_b);
    let mean = 2.0 * cfg.eta_det.sqrt() * rotated.re;
    let z: f64 = StandardNormal.sample(rng);
    mean + cfg.noise_variance().sqrt() * z
}

/// `q > q0` → bit 0, `q < −q0` → bit 1, anything else inconclusive.
pub fn decide(q: f64, threshold_q0: f64) -> Decision {
    if q > threshold_q0 {
        Decision::Bit0
    } else if q < -threshold_q0 {
        Decision::Bit1
    } else {
        Decision::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BobError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{bases} basis choices for a frame of {slots} slots")]
    LengthMismatch { bases: usize, slots: usize },
}

/// Measures every slot of a propagated frame with the given basis choices.
pub fn measure_frame<R: Rng + ?Sized>(
    frame: &PropagatedFrame,
    bases: &[bool],
    cfg: &BobConfig,
    rng: &mut R,
) -> Result<Vec<DetectionRecord>, BobError> {
    cfg.validate()?;
    if bases.len() != frame.len() {
        return Err(BobError::LengthMismatch {
            bases: bases.len(),
            slots: frame.len(),
        });
    }
    Ok(frame
        .slots
        .iter()
        .zip(bases)
        .enumerate()
        .map(|(slot_index, (slot, &basis))| {
            let q = homodyne_sample(slot.signal, slot.theta_diff(), basis_phase(basis), cfg, rng);
            DetectionRecord {
                slot_index,
                bob_basis: basis,
                q,
                decision: decide(q, cfg.threshold_q0),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alice::{build_frame, AliceConfig, Architecture, Symbol};
    use crate::channel::{propagate, ChannelConfig, ChannelMode};
    use crate::rng::{stream, Stream};
    use std::f64::consts::PI;

    struct Moments {
        n: f64,
        mean: f64,
        var: f64,
        kurtosis: f64,
    }

    fn moments(xs: &[f64]) -> Moments {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        Moments {
            n,
            mean,
            var: m2 * n / (n - 1.0),
            kurtosis: m4 / (m2 * m2),
        }
    }

    #[test]
    fn choose_bases_contract() {
        assert!(choose_bases(&mut stream(1, Stream::BobBases), 0).is_empty());
        let n = 100_000;
        let b = choose_bases(&mut stream(1, Stream::BobBases), n);
        let f = b.iter().filter(|&&x| x).count() as f64 / n as f64;
        assert!((f - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
        assert_eq!(b, choose_bases(&mut stream(1, Stream::BobBases), n));
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(3.1, 0.0), Decision::Bit0);
        assert_eq!(decide(-0.4, 1.0), Decision::Inconclusive);
        assert_eq!(decide(-1.5, 1.0), Decision::Bit1);
        assert_eq!(decide(0.0, 0.0), Decision::Inconclusive);
        assert_eq!(decide(1.0, 1.0), Decision::Inconclusive);
        assert_eq!(decide(-1.0, 1.0), Decision::Inconclusive);
    }

    #[test]
    fn vacuum_is_unit_normal() {
        let cfg = BobConfig::default();
        let mut rng = stream(21, Stream::DetectorNoise);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| homodyne_sample(ComplexAmplitude::ZERO, 0.0, 0.0, &cfg, &mut rng))
            .collect();
        let m = moments(&xs);
        assert!(m.mean.abs() < 3.0 / m.n.sqrt(), "mean {}", m.mean);
        assert!((m.var - 1.0).abs() < 3.0 * (2.0 / m.n).sqrt(), "var {}", m.var);
        assert!((m.kurtosis - 3.0).abs() < 3.0 * (24.0 / m.n).sqrt(), "kurt {}", m.kurtosis);
    }

    #[test]
    fn coherent_mean_and_quadrature_zero() {
        let cfg = BobConfig::default();
        let mut rng = stream(22, Stream::DetectorNoise);
        let n = 1_000_000;
        let one = ComplexAmplitude::new(1.0, 0.0);
        let xs: Vec<f64> = (0..n).map(|_| homodyne_sample(one, 0.0, 0.0, &cfg, &mut rng)).collect();
        let m = moments(&xs);
        assert!((m.mean - 2.0).abs() < 3.0 / m.n.sqrt(), "mean {}", m.mean);

        let quad = ComplexAmplitude::from_polar(1.0, PI / 2.0);
        let ys: Vec<f64> = (0..n).map(|_| homodyne_sample(quad, 0.0, 0.0, &cfg, &mut rng)).collect();
        assert!(moments(&ys).mean.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn mixing_gain_suppresses_electronic_noise() {
        let mut cfg = BobConfig { electronic_noise: 50.0, ..Default::default() };
        let mut last = f64::INFINITY;
        for mu_ref in [1.0, 10.0, 1e2, 1e4, 1e8, 1e12] {
            cfg.mu_reference_at_detector = mu_ref;
            let v = cfg.noise_variance();
            assert!(v < last && v >= 1.0);
            last = v;
        }
        assert!((last - 1.0).abs() < 1e-9);

        cfg.mu_reference_at_detector = 10.0;
        let mut rng = stream(23, Stream::DetectorNoise);
        let xs: Vec<f64> = (0..200_000)
            .map(|_| homodyne_sample(ComplexAmplitude::ZERO, 0.0, 0.0, &cfg, &mut rng))
            .collect();
        let m = moments(&xs);
        assert!((m.var - 6.0).abs() < 3.0 * 6.0 * (2.0 / m.n).sqrt(), "var {}", m.var);
    }

    #[test]
    fn mean_law_grid() {
        let cfg = BobConfig { eta_det: 0.8, ..Default::default() };
        let mut rng = stream(24, Stream::DetectorNoise);
        let n = 20_000;
        for mu in [0.25, 1.0, 4.0] {
            for k in 0..4 {
                let delta = k as f64 * PI / 2.0;
                let theta = 0.3;
                let signal = ComplexAmplitude::from_polar(f64::sqrt(mu), delta);
                let xs: Vec<f64> = (0..n)
                    .map(|_| homodyne_sample(signal, theta, 0.0, &cfg, &mut rng))
                    .collect();
                let expected = 2.0 * (0.8 * mu).sqrt() * (delta + theta).cos();
                let m = moments(&xs);
                assert!((m.mean - expected).abs() < 3.0 * (m.var / m.n).sqrt(), "mu {mu} k {k}");
            }
        }
    }

    fn matched_frame(mu: f64, bit: bool, n: usize) -> PropagatedFrame {
        let syms = vec![Symbol::new(false, bit); n];
        let f = build_frame(&syms, &AliceConfig::new(mu), Architecture::TwoFiber).unwrap();
        propagate(&f, &ChannelConfig::ideal(ChannelMode::TwoFiber), &mut stream(0, Stream::Channel)).unwrap()
    }

    #[test]
    fn measure_frame_matched_bases() {
        let n = 10_000;
        let cfg = BobConfig::default();
        let bases = vec![false; n];
        for (bit, sign) in [(false, 1.0), (true, -1.0)] {
            let recs = measure_frame(&matched_frame(4.0, bit, n), &bases, &cfg, &mut stream(5, Stream::DetectorNoise)).unwrap();
            let xs: Vec<f64> = recs.iter().map(|r| r.q).collect();
            let m = moments(&xs);
            assert!((m.mean - sign * 4.0).abs() < 3.0 * (m.var / m.n).sqrt());
            assert!(recs.iter().enumerate().all(|(i, r)| r.slot_index == i && r.decision == decide(r.q, 0.0)));
        }
    }

    #[test]
    fn measure_frame_mismatched_bases_is_noise() {
        let n = 10_000;
        let recs = measure_frame(&matched_frame(4.0, false, n), &vec![true; n], &BobConfig::default(), &mut stream(6, Stream::DetectorNoise)).unwrap();
        let xs: Vec<f64> = recs.iter().map(|r| r.q).collect();
        let m = moments(&xs);
        assert!(m.mean.abs() < 3.0 * (m.var / m.n).sqrt());
        let ones = recs.iter().filter(|r| r.decision == Decision::Bit1).count() as f64 / n as f64;
        assert!((ones - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn antipodal_symmetry() {
        // Two-sample Kolmogorov-Smirnov on q for bit 0 against −q for bit 1.
        let n = 20_000;
        let cfg = BobConfig::default();
        let bases = vec![false; n];
        let mut a: Vec<f64> = measure_frame(&matched_frame(1.0, false, n), &bases, &cfg, &mut stream(7, Stream::DetectorNoise))
            .unwrap()
            .iter()
            .map(|r| r.q)
            .collect();
        let mut b: Vec<f64> = measure_frame(&matched_frame(1.0, true, n), &bases, &cfg, &mut stream(8, Stream::DetectorNoise))
            .unwrap()
            .iter()
            .map(|r| -r.q)
            .collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 - j as f64).abs() / n as f64);
        }
        // c(α) for α ≈ 0.0027 (3σ two-sided).
        let crit = (-(0.0027f64 / 2.0).ln() / 2.0).sqrt() * (2.0 / n as f64).sqrt();
        assert!(d < crit, "KS D = {d}, critical {crit}");
    }

    #[test]
    fn length_mismatch_rejected() {
        let f = matched_frame(1.0, false, 3);
        let err = measure_frame(&f, &[true, false], &BobConfig::default(), &mut stream(1, Stream::DetectorNoise)).unwrap_err();
        assert_eq!(err, BobError::LengthMismatch { bases: 2, slots: 3 });
    }

    #[test]
    fn config_validation() {
        for cfg in [
            BobConfig { eta_det: 0.0, ..Default::default() },
            BobConfig { eta_det: 1.1, ..Default::default() },
            BobConfig { electronic_noise: -1.0, ..Default::default() },
            BobConfig { mu_reference_at_detector: 0.0, ..Default::default() },
            BobConfig { threshold_q0: -0.5, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
