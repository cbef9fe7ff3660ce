//! Cascade reconciliation, used as the message-count baseline.
//!
//! Each round both sides shuffle positions with a shared permutation, split
//! them into blocks (the block size doubles every round) and exchange all
//! block parities in one message per direction. Every block with differing
//! parity is bisected by Bob, one query/answer pair per halving, and the
//! located bit is flipped on Bob's side. A flip re-opens the blocks of
//! earlier rounds that contain the bit, which are bisected in turn. The run
//! stops after the first round with no odd block, or when the rounds run
//! out. An even number of errors in every block of a round therefore goes
//! unnoticed.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bits::BitStream;
use crate::wire::{Body, Direction, ProtocolMessage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error("streams differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("initial block size must be at least 1")]
    ZeroBlockSize,
    #[error("at least one round is required")]
    NoRounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CascadeConfig {
    pub initial_block_size: usize,
    pub rounds: usize,
    /// Seed of the public per-round permutations.
    pub rng_seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            initial_block_size: 16,
            rounds: 4,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconciliationOutcome {
    /// Bob's stream after all flips.
    pub corrected: BitStream,
    pub messages_alice_to_bob: usize,
    pub messages_bob_to_alice: usize,
    /// Parity bits Alice disclosed (block parities plus bisection answers).
    pub bits_leaked: usize,
    /// Bisection query/answer pairs.
    pub bisections: usize,
    pub rounds_run: usize,
    pub transcript: Vec<ProtocolMessage>,
}

impl ReconciliationOutcome {
    pub fn messages_sent(&self) -> usize {
        self.messages_alice_to_bob + self.messages_bob_to_alice
    }
}

struct Pass {
    order: Vec<usize>,
    /// `block_of[position]` for this pass.
    block_of: Vec<usize>,
    block: usize,
    alice_parity: Vec<bool>,
}

impl Pass {
    fn range(&self, blk: usize) -> (usize, usize) {
        let start = blk * self.block;
        (start, (start + self.block).min(self.order.len()))
    }
}

fn parity(bits: &[bool], order: &[usize]) -> bool {
    order.iter().fold(false, |p, &i| p ^ bits[i])
}

struct Session<'a> {
    alice: &'a [bool],
    bob: Vec<bool>,
    outcome_transcript: Vec<ProtocolMessage>,
    a2b: usize,
    b2a: usize,
    leaked: usize,
    bisections: usize,
}

impl Session<'_> {
    fn send(&mut self, direction: Direction, body: Body) {
        match direction {
            Direction::AliceToBob => self.a2b += 1,
            Direction::BobToAlice => self.b2a += 1,
        }
        self.outcome_transcript.push(ProtocolMessage::new(direction, &body));
    }

    /// Bisects an odd block of `pass` and returns the flipped position.
    fn bisect(&mut self, round: usize, pass: &Pass, blk: usize) -> usize {
        let (mut start, mut end) = pass.range(blk);
        while end - start > 1 {
            let mid = start + (end - start) / 2;
            let span = &pass.order[start..mid];
            self.send(
                Direction::BobToAlice,
                Body::Bisect {
                    round: round as u16,
                    start: start as u32,
                    end: mid as u32,
                    parity: None,
                },
            );
            let theirs = parity(self.alice, span);
            self.send(
                Direction::AliceToBob,
                Body::Bisect {
                    round: round as u16,
                    start: start as u32,
                    end: mid as u32,
                    parity: Some(theirs),
                },
            );
            self.leaked += 1;
            self.bisections += 1;
            if theirs != parity(&self.bob, span) {
                end = mid;
            } else {
                start = mid;
            }
        }
        let pos = pass.order[start];
        self.bob[pos] = !self.bob[pos];
        pos
    }
}

/// Reconciles Bob's `b` towards Alice's `a`.
pub fn cascade_reconcile(
    a: &BitStream,
    b: &BitStream,
    cfg: &CascadeConfig,
) -> Result<ReconciliationOutcome, CascadeError> {
    if a.len() != b.len() {
        return Err(CascadeError::LengthMismatch(a.len(), b.len()));
    }
    if cfg.initial_block_size == 0 {
        return Err(CascadeError::ZeroBlockSize);
    }
    if cfg.rounds == 0 {
        return Err(CascadeError::NoRounds);
    }
    let n = a.len();
    let mut s = Session {
        alice: a.bits(),
        bob: b.bits().to_vec(),
        outcome_transcript: Vec::new(),
        a2b: 0,
        b2a: 0,
        leaked: 0,
        bisections: 0,
    };
    let mut passes: Vec<Pass> = Vec::with_capacity(cfg.rounds);
    let mut rounds_run = 0;

    for round in 0..cfg.rounds {
        rounds_run = round + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(round as u64);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let block = cfg
            .initial_block_size
            .saturating_mul(1usize.checked_shl(round as u32).unwrap_or(usize::MAX))
            .max(1);
        let mut block_of = alloc::vec![0; n];
        for (slot, &pos) in order.iter().enumerate() {
            block_of[pos] = slot / block;
        }
        let blocks = n.div_ceil(block);
        let alice_parity: Vec<bool> = (0..blocks)
            .map(|blk| parity(s.alice, &order[blk * block..((blk + 1) * block).min(n)]))
            .collect();
        let bob_parity: Vec<bool> = (0..blocks)
            .map(|blk| parity(&s.bob, &order[blk * block..((blk + 1) * block).min(n)]))
            .collect();
        s.send(
            Direction::AliceToBob,
            Body::Parity {
                round: round as u16,
                parities: alice_parity.clone(),
            },
        );
        s.send(
            Direction::BobToAlice,
            Body::Parity {
                round: round as u16,
                parities: bob_parity.clone(),
            },
        );
        s.leaked += blocks;

        let mut pending: Vec<(usize, usize)> = (0..blocks)
            .filter(|&blk| alice_parity[blk] != bob_parity[blk])
            .map(|blk| (round, blk))
            .collect();
        passes.push(Pass {
            order,
            block_of,
            block,
            alice_parity,
        });
        if pending.is_empty() {
            break;
        }

        // Smallest blocks (earliest rounds) first.
        while let Some(idx) = pending
            .iter()
            .enumerate()
            .min_by_key(|(_, &(r, blk))| (r, blk))
            .map(|(i, _)| i)
        {
            let (r, blk) = pending.swap_remove(idx);
            let pass = &passes[r];
            let (lo, hi) = pass.range(blk);
            if parity(&s.bob, &pass.order[lo..hi]) == pass.alice_parity[blk] {
                continue;
            }
            let pos = s.bisect(r, pass, blk);
            for (q, other) in passes.iter().enumerate() {
                let entry = (q, other.block_of[pos]);
                if q != r && !pending.contains(&entry) {
                    pending.push(entry);
                }
            }
        }
    }

    Ok(ReconciliationOutcome {
        corrected: BitStream::new(s.bob),
        messages_alice_to_bob: s.a2b,
        messages_bob_to_alice: s.b2a,
        bits_leaked: s.leaked,
        bisections: s.bisections,
        rounds_run,
        transcript: s.outcome_transcript,
    })
}
