//! Fast subset of the invariant suite, runnable from the command line.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;

use super::analysis::theoretical_qber;
use crate::alice::{build_frame, default_table, AliceConfig, Architecture, Symbol};
use crate::bob::{homodyne_sample, BobConfig, Decision, DetectionRecord};
use crate::channel::{propagate, ChannelConfig, ChannelMode};
use crate::optics::ComplexAmplitude;
use crate::protocol::{decode_message, encode_message, run_session, sift, Message, SessionConfig};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn encoder() -> Check {
    let frame = build_frame(&Symbol::ALL, &AliceConfig::new(1.0), Architecture::TwoFiber);
    let Ok(frame) = frame else {
        return check("encoder constellation", false, "frame construction failed".into());
    };
    let mut phases: Vec<f64> = frame.slots.iter().map(|s| s.signal.phase().rem_euclid(TAU)).collect();
    phases.sort_by(f64::total_cmp);
    let phase_err = phases
        .iter()
        .zip([0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2])
        .map(|(a, b)| (a - b).abs().min(TAU - (a - b).abs()))
        .fold(0.0, f64::max);
    let env_err = frame
        .slots
        .iter()
        .map(|s| (s.signal.photon_number() - 1.0).abs())
        .fold(0.0, f64::max);
    check(
        "encoder constellation",
        phase_err < 1e-12 && env_err < 1e-12 && default_table().validate().is_ok(),
        format!("max phase error {phase_err:.1e} rad, max envelope error {env_err:.1e}"),
    )
}

fn vacuum() -> Check {
    let n = 100_000;
    let cfg = BobConfig::default();
    let mut rng = stream(1, Stream::DetectorNoise);
    let xs: Vec<f64> = (0..n)
        .map(|_| homodyne_sample(ComplexAmplitude::ZERO, 0.0, 0.0, &cfg, &mut rng))
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let nf = n as f64;
    check(
        "vacuum shot-noise normalization",
        mean.abs() < 3.0 / nf.sqrt() && (var - 1.0).abs() < 3.0 * (2.0 / nf).sqrt(),
        format!("mean {mean:.4}, variance {var:.4}"),
    )
}

fn qber_oracle() -> Check {
    let n = 100_000;
    let cfg = BobConfig::default();
    let mut rng = stream(2, Stream::DetectorNoise);
    let one = ComplexAmplitude::new(1.0, 0.0);
    let errors = (0..n)
        .filter(|_| homodyne_sample(one, 0.0, 0.0, &cfg, &mut rng) < 0.0)
        .count();
    let p = theoretical_qber(1.0, 1.0);
    let got = errors as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    check(
        "QBER matches erfc law at mu_eff=1",
        (got - p).abs() < 3.0 * se,
        format!("measured {got:.5}, expected {p:.5} ± {:.5}", 3.0 * se),
    )
}

fn sifting() -> Check {
    let mut rng = stream(3, Stream::BobBases);
    let mut ok = true;
    for _ in 0..1_000 {
        let (a, b, c): (u16, u16, u16) = (rng.random(), rng.random(), rng.random());
        let alice: Vec<bool> = (0..16).map(|i| a >> i & 1 == 1).collect();
        let recs: Vec<DetectionRecord> = (0..16)
            .map(|i| DetectionRecord {
                slot_index: i,
                bob_basis: b >> i & 1 == 1,
                q: 0.0,
                decision: if c >> i & 1 == 1 { Decision::Bit0 } else { Decision::Inconclusive },
            })
            .collect();
        let keep = !(a ^ b) & c;
        let want: Vec<usize> = (0..16).filter(|i| keep >> i & 1 == 1).collect();
        ok &= sift(&alice, &recs).ok() == Some(want);
    }
    check("sifting equals brute force", ok, "1000 random 16-slot instances".into())
}

fn wire() -> Check {
    let msgs = [
        Message::BasisAnnounce { session_id: 1, first_slot: 0, bases: vec![false, true, true, false] },
        Message::SiftResult { session_id: 1, kept_slots: vec![0, 3] },
        Message::SampleRequest { session_id: 1, slots: vec![3] },
        Message::SampleReveal { session_id: 1, bits: vec![true] },
        Message::Abort { session_id: 1, reason: "test".into() },
    ];
    let round_trip = msgs.iter().all(|m| decode_message(&encode_message(m)).as_ref() == Ok(m));
    let rejects = decode_message(b"{\"type\":\"sift_result\",\"session_id\":1,\"kept_slots\":[5,3]}\n").is_err();
    check("wire format round trip", round_trip && rejects, "all five message types".into())
}

fn common_mode() -> Check {
    let mut alice = AliceConfig::new(1.0);
    alice.mu_reference = Some(1e4);
    let frame = build_frame(&[Symbol::ALL[0]; 256], &alice, Architecture::SingleFiberDelayed);
    let cfg = ChannelConfig {
        linewidth_hz: 1e6,
        ..ChannelConfig::ideal(ChannelMode::SingleFiberDelayed { delay_s: 0.0 })
    };
    let ok = frame
        .ok()
        .and_then(|f| propagate(&f, &cfg, &mut stream(4, Stream::Channel)).ok())
        .is_some_and(|p| p.slots.iter().all(|s| s.theta_signal == s.theta_reference));
    check("zero-delay drift cancels", ok, "256 slots at 1 MHz linewidth".into())
}

fn determinism_and_agreement() -> Check {
    let cfg = SessionConfig {
        alice: AliceConfig::new(25.0),
        bob: BobConfig::default(),
        channel: ChannelConfig::ideal(ChannelMode::TwoFiber),
        n_pulses: 5_000,
        sample_fraction: 0.2,
        seed: 5,
    };
    match (run_session(&cfg), run_session(&cfg)) {
        (Ok(a), Ok(b)) => {
            let same = a.report.to_json_bytes() == b.report.to_json_bytes();
            let agree = a.report.sifted_key == a.report.bob_sifted_key;
            check(
                "deterministic session and key agreement",
                same && agree,
                format!("{} key bits, identical reports: {same}", a.report.n_key_bits),
            )
        }
        (Err(e), _) | (_, Err(e)) => check("deterministic session and key agreement", false, e.to_string()),
    }
}

/// Runs every quick check; takes well under a second in release builds.
pub fn selftest() -> Vec<Check> {
    vec![
        encoder(),
        vacuum(),
        qber_oracle(),
        sifting(),
        wire(),
        common_mode(),
        determinism_and_agreement(),
    ]
}
