//! Coherent-state BB84 with QPSK phase encoding and balanced homodyne
//! detection.
//!
//! The crate is organised the way a pulse travels:
//!
//! - [`optics`]: field primitives (dual-drive MZM, phase shift, loss, laser
//!   phase drift, power conversion).
//! - [`alice`]: BB84 symbol source, QPSK encoding table, frame construction.
//! - [`channel`]: fiber loss, polarization overlap and phase drift for the
//!   two-fiber self-homodyne and single-fiber delayed-homodyne layouts.
//! - [`bob`]: basis modulation, homodyne sampling in shot-noise units and bit
//!   decisions.
//! - [`protocol`]: sifting, QBER estimation, the line-delimited JSON wire
//!   format, transports and end-to-end sessions.
//! - [`harness`]: histograms, peak statistics, the analytic QBER, scenario
//!   files, parameter sweeps and the self-test.
//!
//! Every stochastic step draws from an explicit seeded stream (see [`rng`]), so
//! a session is a pure function of its configuration and seed.

pub mod alice;
pub mod bob;
pub mod channel;
pub mod error;
pub mod harness;
pub mod optics;
pub mod protocol;
pub mod rng;

pub use alice::{Architecture, AliceConfig, EncodingTable, PulseFrame, Symbol};
pub use bob::{BobConfig, Decision, DetectionRecord};
pub use channel::{ChannelConfig, ChannelMode, PropagatedFrame};
pub use error::ConfigError;
pub use harness::{Histogram, PeakSummary, ScenarioConfig};
pub use optics::{ComplexAmplitude, OpticalConstants, PhaseDriftProcess};
pub use protocol::{Message, SessionConfig, SessionReport, Transport};
