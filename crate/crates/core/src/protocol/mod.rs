//! Classical post-processing: sifting, QBER estimation, the message format,
//! transports and the two endpoint state machines.

mod session;
pub mod transport;
pub mod wire;

use thiserror::Error;

use crate::bob::{Decision, DetectionRecord};

pub use session::{
    run_alice, run_bob, run_session, run_session_over, simulate_physics, AliceOutcome, BobOutcome,
    PhysicsRun, SessionConfig, SessionError, SessionReport, SessionRun, SlotDiagnostic, SlotLabel,
};
pub use transport::{LineTransport, QueueTransport, Transport, TransportError};
pub use wire::{decode_message, encode_message, Message, WireError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("QBER sample is empty")]
    EmptySample,
}

/// Slots where both sides used the same basis and Bob's outcome was
/// conclusive, in slot order.
pub fn sift(alice_bases: &[bool], bob_records: &[DetectionRecord]) -> Result<Vec<usize>, ProtocolError> {
    if alice_bases.len() != bob_records.len() {
        return Err(ProtocolError::LengthMismatch {
            left: alice_bases.len(),
            right: bob_records.len(),
        });
    }
    Ok(alice_bases
        .iter()
        .zip(bob_records)
        .enumerate()
        .filter(|(_, (&a, r))| a == r.bob_basis && r.decision != Decision::Inconclusive)
        .map(|(i, _)| i)
        .collect())
}

/// Fraction of disagreeing positions.
pub fn estimate_qber(alice_bits: &[bool], bob_bits: &[bool]) -> Result<f64, ProtocolError> {
    if alice_bits.len() != bob_bits.len() {
        return Err(ProtocolError::LengthMismatch {
            left: alice_bits.len(),
            right: bob_bits.len(),
        });
    }
    if alice_bits.is_empty() {
        return Err(ProtocolError::EmptySample);
    }
    let errors = alice_bits.iter().zip(bob_bits).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / alice_bits.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bob::decide;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;
    use rand::Rng;

    fn parse(s: &str) -> Vec<bool> {
        s.bytes().map(|b| b == b'1').collect()
    }

    fn records(bases: &[bool], decisions: &[Decision]) -> Vec<DetectionRecord> {
        bases
            .iter()
            .zip(decisions)
            .enumerate()
            .map(|(slot_index, (&bob_basis, &decision))| DetectionRecord { slot_index, bob_basis, q: 1.0, decision })
            .collect()
    }

    // Brute force through bit masks.
    fn sift_oracle(alice: u32, bob: u32, conclusive: u32, n: usize) -> Vec<usize> {
        let keep = !(alice ^ bob) & conclusive;
        (0..n).filter(|i| keep >> i & 1 == 1).collect()
    }

    #[test]
    fn sift_examples() {
        let recs = records(&parse("0011"), &[Decision::Bit0; 4]);
        assert_eq!(sift(&parse("0101"), &recs).unwrap(), vec![0, 3]);
        let recs = records(&parse("0101"), &[Decision::Bit1; 4]);
        assert_eq!(sift(&parse("0101"), &recs).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(
            sift(&parse("01"), &recs),
            Err(ProtocolError::LengthMismatch { left: 2, right: 4 })
        );
    }

    #[test]
    fn sift_drops_inconclusive() {
        let recs = records(&parse("000"), &[Decision::Bit0, Decision::Inconclusive, Decision::Bit1]);
        assert_eq!(sift(&parse("000"), &recs).unwrap(), vec![0, 2]);
    }

    #[test]
    fn sift_kept_fraction_is_half() {
        let n = 100_000;
        let mut rng = stream(31, Stream::BobBases);
        let alice: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let bob: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let recs = records(&bob, &vec![Decision::Bit0; n]);
        let f = sift(&alice, &recs).unwrap().len() as f64 / n as f64;
        assert!((f - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{f}");
    }

    #[test]
    fn qber_examples() {
        assert_eq!(estimate_qber(&parse("0110"), &parse("0110")).unwrap(), 0.0);
        assert_eq!(estimate_qber(&parse("0110"), &parse("1001")).unwrap(), 1.0);
        assert_eq!(estimate_qber(&parse("0110"), &parse("0111")).unwrap(), 0.25);
        assert_eq!(estimate_qber(&[], &[]), Err(ProtocolError::EmptySample));
        assert!(matches!(estimate_qber(&parse("0"), &parse("01")), Err(ProtocolError::LengthMismatch { .. })));
    }

    #[test]
    fn qber_at_unit_mean_photon_number() {
        // Matched-basis bit-0 pulses with μ_eff = 1: P(q < 0) = Q(2).
        let n = 10_000;
        let cfg = crate::bob::BobConfig::default();
        let mut rng = stream(32, Stream::DetectorNoise);
        let one = crate::optics::ComplexAmplitude::new(1.0, 0.0);
        let bob: Vec<bool> = (0..n)
            .map(|_| decide(crate::bob::homodyne_sample(one, 0.0, 0.0, &cfg, &mut rng), 0.0) == Decision::Bit1)
            .collect();
        let q = estimate_qber(&vec![false; n], &bob).unwrap();
        let p = 0.022_750_13;
        assert!((q - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{q}");
    }

    proptest! {
        #[test]
        fn sift_matches_brute_force(alice in 0u32..1 << 16, bob in 0u32..1 << 16, conclusive in 0u32..1 << 16) {
            let n = 16;
            let a: Vec<bool> = (0..n).map(|i| alice >> i & 1 == 1).collect();
            let b: Vec<bool> = (0..n).map(|i| bob >> i & 1 == 1).collect();
            let d: Vec<Decision> = (0..n)
                .map(|i| if conclusive >> i & 1 == 1 { Decision::Bit0 } else { Decision::Inconclusive })
                .collect();
            prop_assert_eq!(sift(&a, &records(&b, &d)).unwrap(), sift_oracle(alice, bob, conclusive, n));
        }
    }
}
