use std::thread;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::transport::{QueueTransport, Transport, TransportError};
use super::wire::Message;
use super::{estimate_qber, ProtocolError};
use crate::alice::{build_frame, random_symbols, AliceConfig, Symbol};
use crate::bob::{basis_phase, choose_bases, measure_frame, BobConfig, BobError, Decision, DetectionRecord};
use crate::channel::{propagate, transmittance, ChannelConfig, ChannelError};
use crate::error::{check, ConfigError};
use crate::rng::{stream, Stream};

/// Everything needed to reproduce a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub alice: AliceConfig,
    pub bob: BobConfig,
    pub channel: ChannelConfig,
    pub n_pulses: usize,
    /// Fraction of sifted slots sacrificed for the QBER estimate, in (0, 1).
    pub sample_fraction: f64,
    pub seed: u64,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.n_pulses > 0, "n_pulses", "must be > 0")?;
        check(
            self.sample_fraction > 0.0 && self.sample_fraction < 1.0,
            "sample_fraction",
            "must lie strictly between 0 and 1",
        )?;
        self.channel.validate()?;
        self.alice.validate(self.channel.mode.architecture())?;
        self.bob.validate()
    }

    /// The session id on the wire is the seed.
    pub fn session_id(&self) -> u64 {
        self.seed
    }

    /// Detected mean photon number `η_det·η_pol·T·μ`.
    pub fn mu_eff(&self) -> f64 {
        self.bob.eta_det * self.channel.pol_overlap * transmittance(&self.channel) * self.alice.mu_signal
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Bob(#[from] BobError),
    #[error("session aborted: {reason}")]
    Aborted { reason: String },
    #[error("peer aborted the session: {reason}")]
    PeerAborted { reason: String },
    #[error(transparent)]
    Transport(TransportError),
    #[error("endpoints disagree: {0}")]
    Inconsistent(String),
}

/// Simulated optical layer of a session: who sent what, who measured what.
#[derive(Debug, Clone)]
pub struct PhysicsRun {
    pub symbols: Vec<Symbol>,
    pub records: Vec<DetectionRecord>,
}

/// Builds, propagates and measures one frame from the seed's streams.
pub fn simulate_physics(cfg: &SessionConfig) -> Result<PhysicsRun, SessionError> {
    cfg.validate()?;
    let symbols = random_symbols(&mut stream(cfg.seed, Stream::AliceSymbols), cfg.n_pulses);
    let bases = choose_bases(&mut stream(cfg.seed, Stream::BobBases), cfg.n_pulses);
    let frame = build_frame(&symbols, &cfg.alice, cfg.channel.mode.architecture())?;
    let received = propagate(&frame, &cfg.channel, &mut stream(cfg.seed, Stream::Channel))?;
    let records = measure_frame(&received, &bases, &cfg.bob, &mut stream(cfg.seed, Stream::DetectorNoise))?;
    Ok(PhysicsRun { symbols, records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliceOutcome {
    pub n_base_matched: usize,
    pub kept: Vec<u64>,
    pub sample: Vec<u64>,
    pub sample_errors: usize,
    pub qber: f64,
    pub key: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BobOutcome {
    pub kept: Vec<u64>,
    pub sample: Vec<u64>,
    pub key: Vec<bool>,
}

struct Endpoint<T> {
    link: T,
    session_id: u64,
}

impl<T: Transport> Endpoint<T> {
    fn send(&mut self, msg: Message) -> Result<(), SessionError> {
        self.link.send(&msg).map_err(SessionError::Transport)
    }

    fn abort<X>(&mut self, reason: impl Into<String>) -> Result<X, SessionError> {
        let reason = reason.into();
        // The peer may already be gone; the local error is what matters.
        let _ = self.link.send(&Message::Abort {
            session_id: self.session_id,
            reason: reason.clone(),
        });
        Err(SessionError::Aborted { reason })
    }

    fn recv(&mut self) -> Result<Message, SessionError> {
        match self.link.recv() {
            Ok(Message::Abort { reason, .. }) => Err(SessionError::PeerAborted { reason }),
            Ok(m) if m.session_id() != self.session_id => self.abort(format!(
                "session id {} does not match {}",
                m.session_id(),
                self.session_id
            )),
            Ok(m) => Ok(m),
            Err(TransportError::Wire(e)) => self.abort(format!("malformed message: {e}")),
            Err(e) => Err(SessionError::Transport(e)),
        }
    }
}

fn unexpected<T: Transport, X>(ep: &mut Endpoint<T>, want: &str, got: &Message) -> Result<X, SessionError> {
    ep.abort(format!("expected {want}, got {}", got.kind()))
}

/// `sub` and `sup` strictly increasing; true if every element of `sub` is in `sup`.
fn is_sorted_subset(sub: &[u64], sup: &[u64]) -> bool {
    let mut it = sup.iter();
    sub.iter().all(|x| it.by_ref().any(|y| y == x))
}

/// Removes the (sorted) `sample` slots from the (sorted) `kept` slots.
fn without(kept: &[u64], sample: &[u64]) -> Vec<u64> {
    let mut s = sample.iter().peekable();
    kept.iter()
        .copied()
        .filter(|k| {
            while s.peek().is_some_and(|&&x| x < *k) {
                s.next();
            }
            s.peek() != Some(&k)
        })
        .collect()
}

/// Alice's side of the public discussion.
///
/// Waits for Bob's bases, answers with the basis-matched slots, receives the
/// slots Bob kept, requests a random sample of them and estimates the QBER on
/// the revealed bits. The remaining kept slots form her key.
pub fn run_alice<T: Transport, R: Rng>(
    link: T,
    session_id: u64,
    symbols: &[Symbol],
    sample_fraction: f64,
    rng: &mut R,
) -> Result<AliceOutcome, SessionError> {
    let mut ep = Endpoint { link, session_id };
    let n = symbols.len() as u64;

    let bases = match ep.recv()? {
        Message::BasisAnnounce { first_slot: 0, bases, .. } if bases.len() as u64 == n => bases,
        Message::BasisAnnounce { first_slot, bases, .. } => {
            return ep.abort(format!(
                "bases announced for slots {first_slot}..{}, expected 0..{n}",
                first_slot.saturating_add(bases.len() as u64)
            ))
        }
        other => return unexpected(&mut ep, "basis_announce", &other),
    };
    let matched: Vec<u64> = symbols
        .iter()
        .zip(&bases)
        .enumerate()
        .filter(|(_, (s, &b))| s.basis == b)
        .map(|(i, _)| i as u64)
        .collect();
    ep.send(Message::SiftResult {
        session_id,
        kept_slots: matched.clone(),
    })?;

    let kept = match ep.recv()? {
        Message::SiftResult { kept_slots, .. } if is_sorted_subset(&kept_slots, &matched) => kept_slots,
        Message::SiftResult { .. } => return ep.abort("confirmed slots are not a subset of the sift result"),
        other => return unexpected(&mut ep, "sift_result", &other),
    };

    let sample_size = ((sample_fraction * kept.len() as f64).ceil() as usize).min(kept.len());
    if sample_size == 0 {
        return ep.abort("no sifted slots left for the QBER sample");
    }
    let mut picks = index::sample(rng, kept.len(), sample_size).into_vec();
    picks.sort_unstable();
    let sample: Vec<u64> = picks.iter().map(|&i| kept[i]).collect();
    ep.send(Message::SampleRequest {
        session_id,
        slots: sample.clone(),
    })?;

    let revealed = match ep.recv()? {
        Message::SampleReveal { bits, .. } => bits,
        other => return unexpected(&mut ep, "sample_reveal", &other),
    };
    let own: Vec<bool> = sample.iter().map(|&s| symbols[s as usize].bit).collect();
    let qber = match estimate_qber(&own, &revealed) {
        Ok(q) => q,
        Err(ProtocolError::LengthMismatch { left, right }) => {
            return ep.abort(format!("length mismatch: requested {left} bits, revealed {right}"))
        }
        Err(e) => return ep.abort(e.to_string()),
    };
    let sample_errors = own.iter().zip(&revealed).filter(|(a, b)| a != b).count();

    let key = without(&kept, &sample)
        .iter()
        .map(|&s| symbols[s as usize].bit)
        .collect();
    Ok(AliceOutcome {
        n_base_matched: matched.len(),
        kept,
        sample,
        sample_errors,
        qber,
        key,
    })
}

/// Bob's side of the public discussion.
///
/// Announces all bases, narrows Alice's basis-matched list to conclusive
/// outcomes, reveals the requested sample and keeps the rest as his key.
pub fn run_bob<T: Transport>(
    link: T,
    session_id: u64,
    records: &[DetectionRecord],
) -> Result<BobOutcome, SessionError> {
    let mut ep = Endpoint { link, session_id };
    let n = records.len() as u64;
    ep.send(Message::BasisAnnounce {
        session_id,
        first_slot: 0,
        bases: records.iter().map(|r| r.bob_basis).collect(),
    })?;

    let matched = match ep.recv()? {
        Message::SiftResult { kept_slots, .. } if kept_slots.last().is_none_or(|&s| s < n) => kept_slots,
        Message::SiftResult { .. } => return ep.abort("sift result references slots beyond the frame"),
        other => return unexpected(&mut ep, "sift_result", &other),
    };
    let kept: Vec<u64> = matched
        .into_iter()
        .filter(|&s| records[s as usize].decision != Decision::Inconclusive)
        .collect();
    ep.send(Message::SiftResult {
        session_id,
        kept_slots: kept.clone(),
    })?;

    let sample = match ep.recv()? {
        Message::SampleRequest { slots, .. } if is_sorted_subset(&slots, &kept) => slots,
        Message::SampleRequest { .. } => return ep.abort("sample request includes slots that were not kept"),
        other => return unexpected(&mut ep, "sample_request", &other),
    };
    let bit_of = |s: u64| records[s as usize].decision == Decision::Bit1;
    ep.send(Message::SampleReveal {
        session_id,
        bits: sample.iter().map(|&s| bit_of(s)).collect(),
    })?;

    let key = without(&kept, &sample).into_iter().map(bit_of).collect();
    Ok(BobOutcome { kept, sample, key })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotLabel {
    Key,
    Sample,
    Inconclusive,
    BasisMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDiagnostic {
    pub slot: usize,
    pub phi_a: f64,
    pub phi_b: f64,
    pub q: f64,
    pub label: SlotLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: u64,
    pub seed: u64,
    pub n_pulses: usize,
    pub n_base_matched: usize,
    pub n_inconclusive: usize,
    pub n_kept: usize,
    pub n_sample: usize,
    pub n_sample_errors: usize,
    pub n_key_bits: usize,
    pub qber_estimate: f64,
    pub mu_eff: f64,
    /// Alice's sifted key after removing the revealed sample.
    pub sifted_key: Vec<u8>,
    pub bob_sifted_key: Vec<u8>,
    pub config: SessionConfig,
    pub slots: Vec<SlotDiagnostic>,
}

impl SessionReport {
    /// Compact JSON, newline-terminated.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("report serialization is infallible");
        out.push(b'\n');
        out
    }

    /// Positions where the two keys disagree.
    pub fn key_mismatches(&self) -> usize {
        self.sifted_key
            .iter()
            .zip(&self.bob_sifted_key)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// A finished session with the simulation-side ground truth kept alongside.
#[derive(Debug, Clone)]
pub struct SessionRun {
    pub report: SessionReport,
    pub physics: PhysicsRun,
}

/// Runs a session with both endpoints in this process.
pub fn run_session(cfg: &SessionConfig) -> Result<SessionRun, SessionError> {
    let (a, b) = QueueTransport::pair();
    run_session_over(cfg, a, b)
}

/// Runs a session with Alice on a worker thread and Bob on the caller's,
/// talking over the given links.
pub fn run_session_over<A, B>(cfg: &SessionConfig, alice_link: A, bob_link: B) -> Result<SessionRun, SessionError>
where
    A: Transport + Send,
    B: Transport,
{
    let physics = simulate_physics(cfg)?;
    let session_id = cfg.session_id();
    let (alice, bob) = thread::scope(|scope| {
        let alice = scope.spawn(|| {
            let mut rng = stream(cfg.seed, Stream::SampleSelection);
            run_alice(alice_link, session_id, &physics.symbols, cfg.sample_fraction, &mut rng)
        });
        let bob = run_bob(bob_link, session_id, &physics.records);
        (alice.join().expect("alice endpoint panicked"), bob)
    });
    let (alice, bob) = match (alice, bob) {
        (Ok(a), Ok(b)) => (a, b),
        // Prefer the side that decided to abort over the one that was told.
        (Err(e @ SessionError::PeerAborted { .. }), Err(other)) => {
            return Err(if matches!(other, SessionError::PeerAborted { .. }) { e } else { other })
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let report = assemble(cfg, &physics, alice, bob)?;
    Ok(SessionRun { report, physics })
}

fn assemble(
    cfg: &SessionConfig,
    physics: &PhysicsRun,
    alice: AliceOutcome,
    bob: BobOutcome,
) -> Result<SessionReport, SessionError> {
    if alice.kept != bob.kept || alice.sample != bob.sample || alice.key.len() != bob.key.len() {
        return Err(SessionError::Inconsistent("sifted slot lists differ".into()));
    }
    let n = physics.records.len();
    let mut labels = vec![SlotLabel::BasisMismatch; n];
    for (i, (s, r)) in physics.symbols.iter().zip(&physics.records).enumerate() {
        if s.basis == r.bob_basis {
            labels[i] = SlotLabel::Inconclusive;
        }
    }
    for &k in &alice.kept {
        labels[k as usize] = SlotLabel::Key;
    }
    for &k in &alice.sample {
        labels[k as usize] = SlotLabel::Sample;
    }
    let slots = physics
        .symbols
        .iter()
        .zip(&physics.records)
        .zip(labels)
        .map(|((s, r), label)| SlotDiagnostic {
            slot: r.slot_index,
            phi_a: cfg.alice.table.symbol_phase(*s),
            phi_b: basis_phase(r.bob_basis),
            q: r.q,
            label,
        })
        .collect();
    let bits = |k: &[bool]| k.iter().map(|&b| u8::from(b)).collect::<Vec<u8>>();

    Ok(SessionReport {
        session_id: cfg.session_id(),
        seed: cfg.seed,
        n_pulses: cfg.n_pulses,
        n_base_matched: alice.n_base_matched,
        n_inconclusive: physics
            .records
            .iter()
            .filter(|r| r.decision == Decision::Inconclusive)
            .count(),
        n_kept: alice.kept.len(),
        n_sample: alice.sample.len(),
        n_sample_errors: alice.sample_errors,
        n_key_bits: alice.key.len(),
        qber_estimate: alice.qber,
        mu_eff: cfg.mu_eff(),
        sifted_key: bits(&alice.key),
        bob_sifted_key: bits(&bob.key),
        config: cfg.clone(),
        slots,
    })
}
