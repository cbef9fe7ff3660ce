//! Key agreement between Alice and Bob over framed messages.
//!
//! A session runs PROBE exchanges, one DROP_LIST each way, a TAGS/VERDICT
//! consistency check over every stream and, if no stream pair validates,
//! the difference-vector exchange followed by rounds of RECOMB_SEED, TAGS
//! and VERDICT. Every message crosses an in-memory link as encoded bytes.

mod endpoint;
mod eve;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use thiserror::Error;

pub use endpoint::{Endpoint, RECOMBINED_TAG_INDEX};
pub use eve::{eve_attempt, EveReport, EveView};

use crate::bits::{BitStream, Party};
use crate::channel::PairedTraceSet;
use crate::quantizer::QuantizeError;
use crate::recombine::{DegreeMode, RecombineError, DEFAULT_THETA};
use crate::validation::ValidationError;
use crate::wire::{self, Direction, MessageType, ProtocolMessage, WireError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Recombine(#[from] RecombineError),
    #[error("unexpected {} message while {state}", got.name())]
    Unexpected { state: &'static str, got: MessageType },
    #[error("message travels in the sender's own direction")]
    WrongDirection,
    #[error("only Alice can open a session, and only once")]
    InvalidStart,
    #[error("{0} does not take part in key agreement")]
    NotAParticipant(Party),
    #[error("local side has {local} streams, remote side {remote}")]
    StreamCountMismatch { local: usize, remote: usize },
    #[error("parameter {0} differs between the two sides")]
    ParameterMismatch(&'static str),
    #[error("only {available} bits available for a {needed}-bit key")]
    InsufficientBits { available: usize, needed: usize },
    #[error("alpha must be finite and non-negative, got {0}")]
    InvalidAlpha(f64),
    #[error("key length must be at least 1")]
    ZeroKeyLength,
    #[error("session stalled before both sides finished")]
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AgreementParams {
    pub alpha: f64,
    /// Target detection probability of the consistency check.
    pub gamma: f64,
    pub theta: u8,
    pub key_length: usize,
    /// Recombination rounds before giving up. Zero disables recombination.
    pub max_rounds: u32,
    pub degree_mode: DegreeMode,
    /// Seed of Alice's public randomness (reference string, round seeds).
    pub seed: u64,
}

impl Default for AgreementParams {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            gamma: 0.98,
            theta: DEFAULT_THETA,
            key_length: 128,
            max_rounds: 10,
            degree_mode: DegreeMode::AsWritten,
            seed: 0,
        }
    }
}

impl AgreementParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(ProtocolError::InvalidAlpha(self.alpha));
        }
        crate::validation::checking_length(self.gamma)?;
        if self.theta < 2 {
            return Err(RecombineError::InvalidTheta(self.theta).into());
        }
        if self.key_length == 0 {
            return Err(ProtocolError::ZeroKeyLength);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MatchedVia {
    /// A stream pair validated outright; the key is its prefix.
    Direct(usize),
    Recombination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Failure {
    RoundsExhausted,
}

/// How one endpoint's session ended.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub key: Option<BitStream>,
    pub matched_via: Option<MatchedVia>,
    pub rounds_used: u32,
    /// Streams whose tags validated in the consistency check.
    pub matched_streams: Vec<usize>,
    pub streams: Vec<BitStream>,
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tally {
    pub messages: usize,
    /// Framed bytes, headers included.
    pub bytes: usize,
}

/// Message and byte counts per type and direction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MessageCounters {
    by_kind: BTreeMap<(u8, bool), Tally>,
}

impl MessageCounters {
    pub fn from_transcript(transcript: &[ProtocolMessage]) -> Self {
        let mut c = Self::default();
        for m in transcript {
            c.record(m);
        }
        c
    }

    pub fn record(&mut self, m: &ProtocolMessage) {
        let key = (m.kind().code(), m.direction() == Direction::BobToAlice);
        let t = self.by_kind.entry(key).or_default();
        t.messages += 1;
        t.bytes += m.frame_len();
    }

    pub fn get(&self, kind: MessageType, direction: Direction) -> Tally {
        self.by_kind
            .get(&(kind.code(), direction == Direction::BobToAlice))
            .copied()
            .unwrap_or_default()
    }

    pub fn sent_by(&self, direction: Direction) -> Tally {
        MessageType::ALL.iter().fold(Tally::default(), |acc, &k| {
            let t = self.get(k, direction);
            Tally {
                messages: acc.messages + t.messages,
                bytes: acc.bytes + t.bytes,
            }
        })
    }

    pub fn total(&self) -> Tally {
        let a = self.sent_by(Direction::AliceToBob);
        let b = self.sent_by(Direction::BobToAlice);
        Tally {
            messages: a.messages + b.messages,
            bytes: a.bytes + b.bytes,
        }
    }

    /// Messages excluding PROBE, i.e. the cost of reconciliation proper.
    pub fn reconciliation_messages(&self) -> usize {
        self.total().messages
            - self.get(MessageType::Probe, Direction::AliceToBob).messages
            - self.get(MessageType::Probe, Direction::BobToAlice).messages
    }
}

/// What both endpoints ended with plus the exchanged messages.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub alice: Outcome,
    pub bob: Outcome,
    pub transcript: Vec<ProtocolMessage>,
}

/// Relays messages between the endpoints until both finish. Each message is
/// encoded, decoded and only then handed to its recipient.
pub fn run_session(alice: &mut Endpoint, bob: &mut Endpoint) -> Result<SessionRecord, ProtocolError> {
    let mut queue: alloc::collections::VecDeque<Vec<u8>> = alice.start()?.iter().map(wire::encode).collect();
    let mut transcript = Vec::new();
    while let Some(frame) = queue.pop_front() {
        let msg = wire::decode(&frame)?;
        let replies = match msg.direction() {
            Direction::AliceToBob => bob.receive(&msg)?,
            Direction::BobToAlice => alice.receive(&msg)?,
        };
        transcript.push(msg);
        queue.extend(replies.iter().map(wire::encode));
    }
    match (alice.outcome(), bob.outcome()) {
        (Some(a), Some(b)) => Ok(SessionRecord {
            alice: a.clone(),
            bob: b.clone(),
            transcript,
        }),
        _ => Err(ProtocolError::Stalled),
    }
}

/// Summary of one full key agreement.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyAgreementResult {
    /// Alice's key, present when both sides accepted one.
    pub key: Option<BitStream>,
    /// Whether Alice and Bob hold identical keys.
    pub keys_agree: bool,
    pub matched_via: Option<MatchedVia>,
    pub rounds_used: u32,
    /// Alice's copies of the streams that validated outright.
    pub matched_streams: Vec<BitStream>,
    pub stream_lengths: Vec<usize>,
    pub counters: MessageCounters,
    pub transcript: Vec<ProtocolMessage>,
}

impl KeyAgreementResult {
    fn from_record(rec: SessionRecord) -> Self {
        let keys_agree = match (&rec.alice.key, &rec.bob.key) {
            (Some(a), Some(b)) => a.bits() == b.bits(),
            (None, None) => true,
            _ => false,
        };
        Self {
            key: rec.alice.key.clone().filter(|_| rec.bob.key.is_some()),
            keys_agree,
            matched_via: rec.alice.matched_via,
            rounds_used: rec.alice.rounds_used,
            matched_streams: rec
                .alice
                .matched_streams
                .iter()
                .map(|&i| rec.alice.streams[i].clone())
                .collect(),
            stream_lengths: rec.alice.streams.iter().map(BitStream::len).collect(),
            counters: MessageCounters::from_transcript(&rec.transcript),
            transcript: rec.transcript,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.key.is_some() && self.keys_agree
    }

    /// Bits in the streams that validated outright.
    pub fn secret_bits(&self) -> usize {
        self.matched_streams.iter().map(BitStream::len).sum()
    }
}

/// Runs a full session from channel traces and returns the result together
/// with what an eavesdropper saw.
pub fn run_key_agreement(
    traces: &PairedTraceSet,
    params: &AgreementParams,
) -> Result<(KeyAgreementResult, EveView), ProtocolError> {
    let mut alice = Endpoint::from_trace(Party::Alice, &traces.alice, params)?;
    let mut bob = Endpoint::from_trace(Party::Bob, &traces.bob, params)?;
    let rec = run_session(&mut alice, &mut bob)?;
    let view = EveView {
        transcript: rec.transcript.clone(),
        trace: traces.eve.clone(),
    };
    Ok((KeyAgreementResult::from_record(rec), view))
}

/// Runs the reconciliation part of a session on bit streams both sides
/// already hold.
pub fn reconcile_streams(
    alice: Vec<BitStream>,
    bob: Vec<BitStream>,
    params: &AgreementParams,
) -> Result<KeyAgreementResult, ProtocolError> {
    if alice.len() != bob.len() {
        return Err(ProtocolError::StreamCountMismatch {
            local: alice.len(),
            remote: bob.len(),
        });
    }
    let mut a = Endpoint::from_streams(Party::Alice, alice, params)?;
    let mut b = Endpoint::from_streams(Party::Bob, bob, params)?;
    Ok(KeyAgreementResult::from_record(run_session(&mut a, &mut b)?))
}

/// Result of scanning a transcript for fragments of a secret.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakScan {
    /// Payload bit offsets whose following `window` bits equal some window
    /// of the secret.
    pub hits: usize,
    /// Hits expected by chance if payload bits were independent of the secret.
    pub expected: f64,
}

/// Looks for every `window`-bit substring of `secret` at every bit offset of
/// every payload. `window` is clamped to `1..=64`.
pub fn scan_transcript(transcript: &[ProtocolMessage], secret: &BitStream, window: usize) -> LeakScan {
    let w = window.clamp(1, 64);
    let mask = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
    let windows = |bits: &mut dyn Iterator<Item = bool>, f: &mut dyn FnMut(u64)| {
        let mut acc = 0u64;
        for (i, b) in bits.enumerate() {
            acc = ((acc << 1) | u64::from(b)) & mask;
            if i + 1 >= w {
                f(acc);
            }
        }
    };
    let mut needles = BTreeSet::new();
    windows(&mut secret.bits().iter().copied(), &mut |x| {
        needles.insert(x);
    });
    let mut hits = 0;
    let mut positions = 0usize;
    for m in transcript {
        let p = m.payload();
        let mut bits = p.iter().flat_map(|&byte| (0..8).rev().map(move |k| byte >> k & 1 == 1));
        windows(&mut bits, &mut |x| {
            positions += 1;
            if needles.contains(&x) {
                hits += 1;
            }
        });
    }
    LeakScan {
        hits,
        expected: positions as f64 * needles.len() as f64 / libm::exp2(w as f64),
    }
}

#[cfg(test)]
mod tests;
