//! Field-level primitives shared by transmitter, fiber and receiver.
//!
//! Amplitudes are carried in square-root-photon units per pulse slot, so the
//! mean photon number of a coherent pulse is simply `|E|^2`. Optical power only
//! enters through [`dbm_to_photons_per_pulse`].

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check, ConfigError};

/// Default repetition rate when none is configured.
pub const DEFAULT_REP_RATE_HZ: f64 = 1.0e6;
/// Default effective laser/fiber linewidth.
pub const DEFAULT_LINEWIDTH_HZ: f64 = 1.0e4;

/// Complex envelope of one pulse slot, in units of √photons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexAmplitude {
    pub re: f64,
    pub im: f64,
}

impl ComplexAmplitude {
    pub const ZERO: Self = Self { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn from_polar(magnitude: f64, phase_rad: f64) -> Self {
        Complex64::from_polar(magnitude, phase_rad).into()
    }

    /// Mean photon number `re² + im²`.
    pub fn photon_number(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn magnitude(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Phase in `(-π, π]`.
    pub fn phase(self) -> f64 {
        self.im.atan2(self.re)
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn scale(self, factor: f64) -> Self {
        Self::new(self.re * factor, self.im * factor)
    }

    fn as_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl From<Complex64> for ComplexAmplitude {
    fn from(c: Complex64) -> Self {
        Self::new(c.re, c.im)
    }
}

impl From<ComplexAmplitude> for Complex64 {
    fn from(e: ComplexAmplitude) -> Self {
        e.as_complex()
    }
}

impl Mul for ComplexAmplitude {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        (self.as_complex() * rhs.as_complex()).into()
    }
}

impl Add for ComplexAmplitude {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

/// Physical constants used for power/photon conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalConstants {
    pub wavelength_m: f64,
    pub planck_j_s: f64,
    pub light_speed_m_s: f64,
}

impl Default for OpticalConstants {
    fn default() -> Self {
        Self {
            wavelength_m: 1.543e-6,
            planck_j_s: 6.626_070_15e-34,
            light_speed_m_s: 2.997_924_58e8,
        }
    }
}

impl OpticalConstants {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.wavelength_m > 0.0, "wavelength_m", "must be > 0")?;
        check(self.planck_j_s > 0.0, "planck_j_s", "must be > 0")?;
        check(self.light_speed_m_s > 0.0, "light_speed_m_s", "must be > 0")
    }

    /// Photon energy `h·c/λ` in joules.
    pub fn photon_energy_j(&self) -> f64 {
        self.planck_j_s * self.light_speed_m_s / self.wavelength_m
    }
}

/// Dual-electrode Mach-Zehnder modulator.
///
/// `E_out = E_in · cos((φ1−φ2)/2) · exp(j(φ1+φ2)/2)`. The common-mode drive sets
/// the output phase, the differential drive sets the envelope.
pub fn mzm_dual_drive(e_in: ComplexAmplitude, phi1: f64, phi2: f64) -> ComplexAmplitude {
    let envelope = ((phi1 - phi2) / 2.0).cos();
    e_in * ComplexAmplitude::from_polar(envelope, (phi1 + phi2) / 2.0)
}

/// Single-electrode phase modulator as used by the receiver: `E · exp(−jφ)`.
pub fn phase_shift(e: ComplexAmplitude, phi_b: f64) -> ComplexAmplitude {
    e * ComplexAmplitude::from_polar(1.0, -phi_b)
}

/// Scales the amplitude by `10^(−loss_db/20)`. Gain is not modelled, so a
/// negative loss is rejected.
pub fn attenuate(e: ComplexAmplitude, loss_db: f64) -> Result<ComplexAmplitude, ConfigError> {
    check(loss_db >= 0.0, "loss_db", "must be >= 0 (amplification is not modelled)")?;
    Ok(e.scale(10f64.powf(-loss_db / 20.0)))
}

/// Optical power in watts for a level in dBm.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0) * 1e-3
}

/// Mean photons per pulse for a received power level at a given pulse rate.
pub fn dbm_to_photons_per_pulse(
    p_dbm: f64,
    constants: &OpticalConstants,
    rep_rate_hz: f64,
) -> Result<f64, ConfigError> {
    check(rep_rate_hz > 0.0, "rep_rate_hz", "must be > 0")?;
    constants.validate()?;
    Ok(dbm_to_watts(p_dbm) / (rep_rate_hz * constants.photon_energy_j()))
}

/// Wiener phase drift: each step of length `dt` adds a zero-mean Gaussian
/// increment with variance `2π·Δν·dt`.
#[derive(Debug, Clone)]
pub struct PhaseDriftProcess<R> {
    linewidth_hz: f64,
    current_phase_rad: f64,
    rng: R,
}

impl<R: Rng> PhaseDriftProcess<R> {
    pub fn new(linewidth_hz: f64, rng: R) -> Result<Self, ConfigError> {
        check(
            linewidth_hz >= 0.0 && linewidth_hz.is_finite(),
            "linewidth_hz",
            "must be finite and >= 0",
        )?;
        Ok(Self {
            linewidth_hz,
            current_phase_rad: 0.0,
            rng,
        })
    }

    pub fn linewidth_hz(&self) -> f64 {
        self.linewidth_hz
    }

    pub fn phase(&self) -> f64 {
        self.current_phase_rad
    }

    /// Advances the process by `dt_s` seconds and returns the new phase.
    ///
    /// A zero-variance step (zero linewidth or `dt_s == 0`) draws nothing from
    /// the stream.
    ///
    /// # Panics
    ///
    /// If `dt_s` is negative or not finite.
    pub fn advance(&mut self, dt_s: f64) -> f64 {
        assert!(dt_s >= 0.0 && dt_s.is_finite(), "drift step must be >= 0, got {dt_s}");
        let variance = 2.0 * PI * self.linewidth_hz * dt_s;
        if variance > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.current_phase_rad += variance.sqrt() * z;
        }
        self.current_phase_rad
    }
}
