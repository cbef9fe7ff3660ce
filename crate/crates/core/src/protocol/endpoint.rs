use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AgreementParams, Failure, MatchedVia, Outcome, ProtocolError};
use crate::bits::{BitStream, Party};
use crate::channel::CsiTrace;
use crate::quantizer::{self, DropList, LocalQuantization};
use crate::recombine::{self, Allocation};
use crate::validation::{self, ValidationTag};
use crate::wire::{Body, Direction, MessageType, ProtocolMessage};

/// Stream index carried by the tag of a recombined key.
pub const RECOMBINED_TAG_INDEX: usize = u16::MAX as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    /// Alice before `start`.
    Idle,
    /// Alice waiting for Bob's echo of probe `seq`.
    Probing {
        seq: u32,
    },
    /// Bob waiting for the first probe or, without probes, for drop lists.
    AwaitProbeOrDrops,
    AwaitDropList,
    AwaitTags,
    AwaitTagVerdict,
    AwaitDiffVector,
    AwaitDiffReply,
    AwaitSeed {
        round: u32,
    },
    AwaitRoundTag {
        round: u32,
    },
    AwaitRoundVerdict {
        round: u32,
    },
    Done,
}

impl State {
    fn name(self) -> &'static str {
        match self {
            State::Idle => "idle",
            State::Probing { .. } => "probing",
            State::AwaitProbeOrDrops => "awaiting probe or drop list",
            State::AwaitDropList => "awaiting drop list",
            State::AwaitTags => "awaiting tags",
            State::AwaitTagVerdict => "awaiting tag verdict",
            State::AwaitDiffVector => "awaiting difference vector",
            State::AwaitDiffReply => "awaiting difference reply",
            State::AwaitSeed { .. } => "awaiting recombination seed",
            State::AwaitRoundTag { .. } => "awaiting recombined tag",
            State::AwaitRoundVerdict { .. } => "awaiting recombination verdict",
            State::Done => "done",
        }
    }
}

/// One side of a key agreement, advanced by incoming messages.
///
/// Alice drives the exchange: she probes, publishes her drop lists, tags,
/// the reference string for the difference degrees and every recombination
/// seed. Bob answers each step.
#[derive(Debug, Clone)]
pub struct Endpoint {
    party: Party,
    params: AgreementParams,
    state: State,
    /// Per-subcarrier amplitudes, absent when starting from bit streams.
    amplitudes: Option<Vec<Vec<f64>>>,
    local: Vec<LocalQuantization>,
    streams: Vec<BitStream>,
    r: u8,
    rng: ChaCha8Rng,
    residues: Vec<u8>,
    reference: Option<BitStream>,
    allocation: Option<Allocation>,
    round_key: Option<BitStream>,
    outcome: Option<Outcome>,
    matched: Vec<usize>,
    rounds_used: u32,
}

impl Endpoint {
    fn base(party: Party, params: &AgreementParams) -> Result<Self, ProtocolError> {
        if !matches!(party, Party::Alice | Party::Bob) {
            return Err(ProtocolError::NotAParticipant(party));
        }
        params.validate()?;
        Ok(Self {
            party,
            params: params.clone(),
            state: if party == Party::Alice {
                State::Idle
            } else {
                State::AwaitProbeOrDrops
            },
            amplitudes: None,
            local: Vec::new(),
            streams: Vec::new(),
            r: validation::checking_length(params.gamma)?,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            residues: Vec::new(),
            reference: None,
            allocation: None,
            round_key: None,
            outcome: None,
            matched: Vec::new(),
            rounds_used: 0,
        })
    }

    /// An endpoint that probes, quantizes `trace` and then reconciles.
    pub fn from_trace(party: Party, trace: &CsiTrace, params: &AgreementParams) -> Result<Self, ProtocolError> {
        let mut ep = Self::base(party, params)?;
        let amplitudes: Vec<Vec<f64>> = (0..trace.subcarriers()).map(|i| trace.amplitudes(i).to_vec()).collect();
        ep.local = amplitudes
            .iter()
            .map(|a| quantizer::quantize_local(a, params.alpha))
            .collect::<Result<_, _>>()?;
        ep.amplitudes = Some(amplitudes);
        Ok(ep)
    }

    /// An endpoint that already holds its bit streams and starts at the
    /// consistency check.
    pub fn from_streams(
        party: Party,
        streams: Vec<BitStream>,
        params: &AgreementParams,
    ) -> Result<Self, ProtocolError> {
        let mut ep = Self::base(party, params)?;
        ep.streams = streams
            .into_iter()
            .enumerate()
            .map(|(i, mut s)| {
                s.set_origin(party, i);
                s
            })
            .collect();
        if party == Party::Bob {
            ep.state = State::AwaitTags;
        }
        Ok(ep)
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn streams(&self) -> &[BitStream] {
        &self.streams
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        self.outcome.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.state == State::Done
    }

    fn direction(&self) -> Direction {
        match self.party {
            Party::Bob => Direction::BobToAlice,
            _ => Direction::AliceToBob,
        }
    }

    fn msg(&self, body: &Body) -> ProtocolMessage {
        ProtocolMessage::new(self.direction(), body)
    }

    fn drop_body(&self) -> Body {
        Body::DropList(
            self.local
                .iter()
                .map(|l| l.drops.indices().iter().map(|&i| i as u32).collect())
                .collect(),
        )
    }

    /// Messages Alice sends to open the session.
    pub fn start(&mut self) -> Result<Vec<ProtocolMessage>, ProtocolError> {
        if self.party != Party::Alice || self.state != State::Idle {
            return Err(ProtocolError::InvalidStart);
        }
        match &self.amplitudes {
            Some(a) if !a.is_empty() && !a[0].is_empty() => {
                self.state = State::Probing { seq: 0 };
                Ok(vec![self.msg(&Body::Probe(0))])
            }
            Some(_) => Err(ProtocolError::InsufficientBits {
                available: 0,
                needed: self.params.key_length,
            }),
            None => {
                self.check_material()?;
                self.send_tags()
            }
        }
    }

    fn check_material(&self) -> Result<(), ProtocolError> {
        let available: usize = self.streams.iter().map(BitStream::len).sum();
        let longest = self.streams.iter().map(BitStream::len).max().unwrap_or(0);
        if longest < self.params.key_length && available < self.params.key_length {
            return Err(ProtocolError::InsufficientBits {
                available,
                needed: self.params.key_length,
            });
        }
        Ok(())
    }

    fn finish_streams(&mut self, remote: Vec<Vec<u32>>) -> Result<(), ProtocolError> {
        let amplitudes = self.amplitudes.as_ref().ok_or(ProtocolError::Unexpected {
            state: "stream mode",
            got: MessageType::DropList,
        })?;
        if remote.len() != amplitudes.len() {
            return Err(ProtocolError::StreamCountMismatch {
                local: amplitudes.len(),
                remote: remote.len(),
            });
        }
        let mut streams = Vec::with_capacity(remote.len());
        for (i, list) in remote.into_iter().enumerate() {
            let samples = &amplitudes[i];
            let remote = DropList::new(list.into_iter().map(|x| x as usize).collect(), samples.len())?;
            streams.push(quantizer::finish_stream(
                samples,
                &self.local[i],
                &remote,
                self.party,
                i,
            )?);
        }
        self.streams = streams;
        Ok(())
    }

    fn send_tags(&mut self) -> Result<Vec<ProtocolMessage>, ProtocolError> {
        let tags = self
            .streams
            .iter()
            .enumerate()
            .map(|(i, s)| validation::make_indexed_tag(s, self.r, i))
            .collect::<Result<Vec<_>, _>>()?;
        self.state = State::AwaitTagVerdict;
        Ok(vec![self.msg(&Body::Tags(tags))])
    }

    fn eligible_match(&self) -> Option<usize> {
        self.matched
            .iter()
            .copied()
            .find(|&i| self.streams[i].len() >= self.params.key_length)
    }

    fn finish(&mut self, key: Option<(BitStream, MatchedVia)>, failure: Option<Failure>) {
        let (key, matched_via) = match key {
            Some((k, via)) => (Some(k), Some(via)),
            None => (None, None),
        };
        self.outcome = Some(Outcome {
            key,
            matched_via,
            rounds_used: self.rounds_used,
            matched_streams: self.matched.clone(),
            streams: self.streams.clone(),
            failure,
        });
        self.state = State::Done;
    }

    fn finish_direct(&mut self, i: usize) {
        let mut key = self.streams[i].truncated(self.params.key_length);
        key.set_origin(self.party, i);
        self.finish(Some((key, MatchedVia::Direct(i))), None);
    }

    fn lengths(&self) -> Vec<usize> {
        self.streams.iter().map(BitStream::len).collect()
    }

    fn settle_allocation(&mut self, alice: &[u8], bob: &[u8]) -> Result<(), ProtocolError> {
        let dd = recombine::degrees_from_residues(alice, bob, self.params.theta, self.params.degree_mode)?;
        let w = recombine::weights(&dd)?;
        self.allocation = Some(recombine::allocate(&w, self.params.key_length, &self.lengths())?);
        Ok(())
    }

    fn round_key(&self, seed: u64) -> Result<BitStream, ProtocolError> {
        let allocation = self.allocation.as_ref().expect("allocation settled before rounds");
        let plan = recombine::plan(seed, allocation, &self.lengths())?;
        Ok(recombine::recombine(&self.streams, &plan)?)
    }

    /// Alice opens recombination round `round`.
    fn open_round(&mut self, round: u32) -> Result<Vec<ProtocolMessage>, ProtocolError> {
        let seed = self.rng.next_u64();
        let key = self.round_key(seed)?;
        let tag = validation::make_indexed_tag(&key, self.r, RECOMBINED_TAG_INDEX)?;
        self.round_key = Some(key);
        self.rounds_used = round;
        self.state = State::AwaitRoundVerdict { round };
        Ok(vec![
            self.msg(&Body::RecombSeed(seed)),
            self.msg(&Body::Tags(vec![tag])),
        ])
    }

    fn tags_for_streams(&self, tags: &[ValidationTag]) -> Result<Vec<bool>, ProtocolError> {
        if tags.len() != self.streams.len() {
            return Err(ProtocolError::StreamCountMismatch {
                local: self.streams.len(),
                remote: tags.len(),
            });
        }
        tags.iter()
            .map(|t| {
                let local = self
                    .streams
                    .get(t.stream_index())
                    .ok_or(ProtocolError::StreamCountMismatch {
                        local: self.streams.len(),
                        remote: t.stream_index() + 1,
                    })?;
                Ok(validation::validate(t, local, self.r)?.is_match())
            })
            .collect()
    }

    /// Handles one message addressed to this endpoint and returns the replies.
    pub fn receive(&mut self, msg: &ProtocolMessage) -> Result<Vec<ProtocolMessage>, ProtocolError> {
        if msg.direction() == self.direction() {
            return Err(ProtocolError::WrongDirection);
        }
        let body = msg.body()?;
        let unexpected = ProtocolError::Unexpected {
            state: self.state.name(),
            got: msg.kind(),
        };
        match (self.party, self.state, body) {
            (Party::Alice, State::Probing { seq }, Body::Probe(echo)) if echo == seq => {
                let probes = self.amplitudes.as_ref().map_or(0, |a| a[0].len()) as u32;
                if seq + 1 < probes {
                    self.state = State::Probing { seq: seq + 1 };
                    Ok(vec![self.msg(&Body::Probe(seq + 1))])
                } else {
                    self.state = State::AwaitDropList;
                    Ok(vec![self.msg(&self.drop_body())])
                }
            }
            (Party::Bob, State::AwaitProbeOrDrops, Body::Probe(seq)) => Ok(vec![self.msg(&Body::Probe(seq))]),
            (Party::Bob, State::AwaitProbeOrDrops, Body::DropList(lists)) => {
                self.finish_streams(lists)?;
                self.state = State::AwaitTags;
                Ok(vec![self.msg(&self.drop_body())])
            }
            (Party::Alice, State::AwaitDropList, Body::DropList(lists)) => {
                self.finish_streams(lists)?;
                self.check_material()?;
                self.send_tags()
            }
            (Party::Bob, State::AwaitTags, Body::Tags(tags)) => {
                let verdicts = self.tags_for_streams(&tags)?;
                self.matched = (0..verdicts.len()).filter(|&i| verdicts[i]).collect();
                let reply = vec![self.msg(&Body::Verdict(verdicts))];
                if let Some(i) = self.eligible_match() {
                    self.finish_direct(i);
                } else if self.params.max_rounds == 0 {
                    self.finish(None, Some(Failure::RoundsExhausted));
                } else {
                    self.state = State::AwaitDiffVector;
                }
                Ok(reply)
            }
            (Party::Alice, State::AwaitTagVerdict, Body::Verdict(verdicts)) => {
                if verdicts.len() != self.streams.len() {
                    return Err(ProtocolError::StreamCountMismatch {
                        local: self.streams.len(),
                        remote: verdicts.len(),
                    });
                }
                self.matched = (0..verdicts.len()).filter(|&i| verdicts[i]).collect();
                if let Some(i) = self.eligible_match() {
                    self.finish_direct(i);
                    return Ok(Vec::new());
                }
                if self.params.max_rounds == 0 {
                    self.finish(None, Some(Failure::RoundsExhausted));
                    return Ok(Vec::new());
                }
                let reference: BitStream = (0..self.params.key_length).map(|_| self.rng.random()).collect();
                self.residues = recombine::distance_residues(&self.streams, reference.bits(), self.params.theta)?;
                self.state = State::AwaitDiffReply;
                let body = Body::DiffVector {
                    theta: self.params.theta,
                    residues: self.residues.clone(),
                    reference: reference.clone(),
                };
                self.reference = Some(reference);
                Ok(vec![self.msg(&body)])
            }
            (
                Party::Bob,
                State::AwaitDiffVector,
                Body::DiffVector {
                    theta,
                    residues,
                    reference,
                },
            ) => {
                if theta != self.params.theta {
                    return Err(ProtocolError::ParameterMismatch("theta"));
                }
                self.residues = recombine::distance_residues(&self.streams, reference.bits(), theta)?;
                self.settle_allocation(&residues, &self.residues.clone())?;
                self.reference = Some(reference);
                self.state = State::AwaitSeed { round: 1 };
                Ok(vec![self.msg(&Body::DiffVector {
                    theta,
                    residues: self.residues.clone(),
                    reference: BitStream::default(),
                })])
            }
            (Party::Alice, State::AwaitDiffReply, Body::DiffVector { theta, residues, .. }) => {
                if theta != self.params.theta {
                    return Err(ProtocolError::ParameterMismatch("theta"));
                }
                self.settle_allocation(&self.residues.clone(), &residues)?;
                self.open_round(1)
            }
            (Party::Bob, State::AwaitSeed { round }, Body::RecombSeed(seed)) => {
                self.round_key = Some(self.round_key(seed)?);
                self.rounds_used = round;
                self.state = State::AwaitRoundTag { round };
                Ok(Vec::new())
            }
            (Party::Bob, State::AwaitRoundTag { round }, Body::Tags(tags)) => {
                let [tag] = tags.as_slice() else {
                    return Err(ProtocolError::StreamCountMismatch {
                        local: 1,
                        remote: tags.len(),
                    });
                };
                let key = self.round_key.take().expect("seed precedes tag");
                let ok = validation::validate(tag, &key, self.r)?.is_match();
                let reply = vec![self.msg(&Body::Verdict(vec![ok]))];
                if ok {
                    self.finish(Some((key, MatchedVia::Recombination)), None);
                } else if round >= self.params.max_rounds {
                    self.finish(None, Some(Failure::RoundsExhausted));
                } else {
                    self.state = State::AwaitSeed { round: round + 1 };
                }
                Ok(reply)
            }
            (Party::Alice, State::AwaitRoundVerdict { round }, Body::Verdict(v)) => {
                let [ok] = v.as_slice() else {
                    return Err(ProtocolError::StreamCountMismatch {
                        local: 1,
                        remote: v.len(),
                    });
                };
                if *ok {
                    let key = self.round_key.take().expect("round key kept until verdict");
                    self.finish(Some((key, MatchedVia::Recombination)), None);
                    Ok(Vec::new())
                } else if round >= self.params.max_rounds {
                    self.finish(None, Some(Failure::RoundsExhausted));
                    Ok(Vec::new())
                } else {
                    self.open_round(round + 1)
                }
            }
            _ => Err(unexpected),
        }
    }
}
