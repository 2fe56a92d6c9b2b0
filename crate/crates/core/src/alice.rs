//! Transmitter: BB84 symbol source, QPSK encoding table and faint-pulse
//! frames.
//!
//! Basis and bit are chosen independently and mapped to the two electrode
//! phases of a dual-drive MZM. The table keeps the differential drive (and so
//! the envelope) identical for all four symbols while the common-mode drive
//! walks the QPSK constellation.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check, ConfigError};
use crate::optics::{mzm_dual_drive, ComplexAmplitude};

/// Tolerance for the table invariants, which hold exactly up to rounding.
const TABLE_TOL: f64 = 1e-12;

/// Alice's BB84 choice. `false`/`true` stand for basis 0/1 and bit 0/1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub basis: bool,
    pub bit: bool,
}

impl Symbol {
    pub const ALL: [Symbol; 4] = [
        Symbol::new(false, false),
        Symbol::new(false, true),
        Symbol::new(true, false),
        Symbol::new(true, true),
    ];

    pub const fn new(basis: bool, bit: bool) -> Self {
        Self { basis, bit }
    }

    fn index(self) -> usize {
        (usize::from(self.basis) << 1) | usize::from(self.bit)
    }
}

/// Electrode phases `(φ1, φ2)` for each `(basis, bit)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingTable {
    /// Indexed by `basis·2 + bit`.
    rows: [(f64, f64); 4],
}

impl EncodingTable {
    /// Builds a table from explicit rows, ordered (0,0), (0,1), (1,0), (1,1),
    /// rejecting rows that break the constant-envelope or QPSK constraints.
    pub fn from_rows(rows: [(f64, f64); 4]) -> Result<Self, ConfigError> {
        let table = Self { rows };
        table.validate()?;
        Ok(table)
    }

    /// `Φ_A = bit·π + basis·π/2`, `φ1 = Φ_A + π/4`, `φ2 = Φ_A − π/4`.
    pub fn standard() -> Self {
        let mut rows = [(0.0, 0.0); 4];
        for s in Symbol::ALL {
            let phase = f64::from(u8::from(s.bit)) * PI + f64::from(u8::from(s.basis)) * FRAC_PI_2;
            rows[s.index()] = (phase + FRAC_PI_4, phase - FRAC_PI_4);
        }
        Self { rows }
    }

    pub fn phases(&self, s: Symbol) -> (f64, f64) {
        self.rows[s.index()]
    }

    /// Envelope factor `|cos((φ1−φ2)/2)|` of a row.
    pub fn envelope(&self, s: Symbol) -> f64 {
        let (p1, p2) = self.phases(s);
        ((p1 - p2) / 2.0).cos().abs()
    }

    /// Optical phase imprinted on a symbol, reduced to `[0, 2π)`.
    pub fn symbol_phase(&self, s: Symbol) -> f64 {
        let (p1, p2) = self.phases(s);
        let mut phase = ((p1 + p2) / 2.0).rem_euclid(TAU);
        if TAU - phase < TABLE_TOL {
            phase = 0.0;
        }
        // A negative-cosine envelope flips the field by π.
        if ((p1 - p2) / 2.0).cos() < 0.0 {
            phase = (phase + PI).rem_euclid(TAU);
        }
        phase
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.rows.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(ConfigError::new("table", "phases must be finite"));
        }
        let env0 = self.envelope(Symbol::ALL[0]);
        check(env0 > TABLE_TOL, "table", "envelope factor must be non-zero")?;
        for s in Symbol::ALL {
            check(
                (self.envelope(s) - env0).abs() <= TABLE_TOL,
                "table",
                "envelope factor differs between rows",
            )?;
        }
        let mut seen = [false; 4];
        for s in Symbol::ALL {
            let phase = self.symbol_phase(s);
            let slot = (phase / FRAC_PI_2).round();
            check(
                (phase - slot * FRAC_PI_2).abs() <= TABLE_TOL,
                "table",
                "symbol phase is not a QPSK point",
            )?;
            seen[slot as usize % 4] = true;
        }
        check(seen.iter().all(|&x| x), "table", "rows do not cover all four QPSK phases")
    }
}

impl Default for EncodingTable {
    fn default() -> Self {
        Self::standard()
    }
}

/// The table used when none is injected.
pub fn default_table() -> EncodingTable {
    EncodingTable::standard()
}

/// Fiber layout the frame is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Self-homodyne: the reference travels in a second fiber.
    TwoFiber,
    /// Delayed homodyne: strong reference pulses share the fiber with the
    /// signal, offset by the interferometer delay.
    SingleFiberDelayed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliceConfig {
    /// Mean photon number per launched signal pulse.
    pub mu_signal: f64,
    /// Mean photon number per reference pulse; required for the delayed layout.
    pub mu_reference: Option<f64>,
    pub table: EncodingTable,
}

impl AliceConfig {
    pub fn new(mu_signal: f64) -> Self {
        Self {
            mu_signal,
            mu_reference: None,
            table: EncodingTable::standard(),
        }
    }

    pub fn validate(&self, architecture: Architecture) -> Result<(), ConfigError> {
        check(
            self.mu_signal > 0.0 && self.mu_signal.is_finite(),
            "mu_signal",
            "must be finite and > 0",
        )?;
        if architecture == Architecture::SingleFiberDelayed {
            match self.mu_reference {
                Some(mu) if mu > 0.0 && mu.is_finite() => {}
                Some(_) => return Err(ConfigError::new("mu_reference", "must be finite and > 0")),
                None => {
                    return Err(ConfigError::new(
                        "mu_reference",
                        "required for the single-fiber delayed layout",
                    ))
                }
            }
        }
        self.table.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSlot {
    pub slot_index: usize,
    pub signal: ComplexAmplitude,
    pub reference: Option<ComplexAmplitude>,
    /// Ground truth, only meaningful on Alice's side of the harness.
    pub alice_symbol: Symbol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseFrame {
    pub architecture: Architecture,
    pub slots: Vec<PulseSlot>,
}

impl PulseFrame {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        self.slots.iter().map(|s| s.alice_symbol).collect()
    }
}

/// Drives the modulator with the table row for `s`.
pub fn encode_symbol(s: Symbol, table: &EncodingTable, e_in: ComplexAmplitude) -> ComplexAmplitude {
    let (phi1, phi2) = table.phases(s);
    mzm_dual_drive(e_in, phi1, phi2)
}

/// `n` independent uniform symbols.
pub fn random_symbols<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Symbol> {
    (0..n)
        .map(|_| {
            let basis = rng.random::<bool>();
            let bit = rng.random::<bool>();
            Symbol::new(basis, bit)
        })
        .collect()
}

/// Builds one slot per symbol. The input amplitude is pre-scaled by the
/// table's envelope so each launched signal pulse carries exactly
/// `cfg.mu_signal` photons.
pub fn build_frame(
    symbols: &[Symbol],
    cfg: &AliceConfig,
    architecture: Architecture,
) -> Result<PulseFrame, ConfigError> {
    check(!symbols.is_empty(), "symbols", "frame needs at least one symbol")?;
    cfg.validate(architecture)?;

    let reference = match architecture {
        Architecture::TwoFiber => None,
        Architecture::SingleFiberDelayed => cfg
            .mu_reference
            .map(|mu| ComplexAmplitude::new(mu.sqrt(), 0.0)),
    };

    let slots = symbols
        .iter()
        .enumerate()
        .map(|(slot_index, &s)| {
            let drive = (cfg.mu_signal / cfg.table.envelope(s).powi(2)).sqrt();
            PulseSlot {
                slot_index,
                signal: encode_symbol(s, &cfg.table, ComplexAmplitude::new(drive, 0.0)),
                reference,
                alice_symbol: s,
            }
        })
        .collect();

    Ok(PulseFrame {
        architecture,
        slots,
    })
}
