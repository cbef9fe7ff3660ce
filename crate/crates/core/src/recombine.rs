//! Weighted key recombination.
//!
//! When no stream pair validates, each side measures the edit distance of
//! every stream to a public random reference string and publishes it modulo
//! `theta`. The per-stream gap between the two residues estimates how far the
//! streams disagree; streams that look consistent get proportionally more
//! bits in a freshly recombined key. Bit positions come from a public seed so
//! both sides pick the same positions without revealing any bit values.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bits::BitStream;

/// Default residue modulus.
pub const DEFAULT_THETA: u8 = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecombineError {
    #[error("theta must be at least 2, got {0}")]
    InvalidTheta(u8),
    #[error("distance vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no streams to weight")]
    NoStreams,
    #[error("key length must be at least 1")]
    ZeroKeyLength,
    #[error("streams hold {available} bits, key needs {needed}")]
    InsufficientMaterial { available: usize, needed: usize },
    #[error("weights and stream lengths differ in length ({0} vs {1})")]
    ShapeMismatch(usize, usize),
    #[error("selection ({stream}, {position}) is outside the stream set; plans are out of sync")]
    OutOfRange { stream: usize, position: usize },
    #[error("residue {value} is not below theta {theta}")]
    InvalidResidue { value: u8, theta: u8 },
    #[error("product factor 1 - d/(L - t) undefined: L - t = {0} <= 0")]
    Degenerate(i64),
    #[error("at least one recombination round is required")]
    NoRounds,
}

/// How two residues are turned into a difference degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DegreeMode {
    /// `|a mod theta - b mod theta|`.
    #[default]
    AsWritten,
    /// `min(d, theta - d)` on top of the plain difference, so residues that
    /// wrapped around the modulus count as close.
    Circular,
}

/// Levenshtein distance with unit costs, two-row dynamic program.
pub fn edit_distance(a: &[bool], b: &[bool]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Alice's published half of the difference-degree exchange: the reference
/// string and her residues `d mod theta`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffProbe {
    pub reference: BitStream,
    pub residues: Vec<u8>,
    pub theta: u8,
}

impl DiffProbe {
    pub fn new(reference: BitStream, residues: Vec<u8>, theta: u8) -> Result<Self, RecombineError> {
        if theta < 2 {
            return Err(RecombineError::InvalidTheta(theta));
        }
        if let Some(&value) = residues.iter().find(|&&r| r >= theta) {
            return Err(RecombineError::InvalidResidue { value, theta });
        }
        Ok(Self {
            reference,
            residues,
            theta,
        })
    }

    /// Measures every stream against `reference`.
    pub fn measure(streams: &[BitStream], reference: BitStream, theta: u8) -> Result<Self, RecombineError> {
        let residues = distance_residues(streams, reference.bits(), theta)?;
        Self::new(reference, residues, theta)
    }
}

/// `edit_distance(stream, reference) mod theta` for every stream.
pub fn distance_residues(streams: &[BitStream], reference: &[bool], theta: u8) -> Result<Vec<u8>, RecombineError> {
    if theta < 2 {
        return Err(RecombineError::InvalidTheta(theta));
    }
    Ok(streams
        .iter()
        .map(|s| (edit_distance(s.bits(), reference) % theta as usize) as u8)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffDegrees {
    pub degrees: Vec<u8>,
    pub theta: u8,
}

/// Difference degree from raw distances.
pub fn difference_degree(
    d_a: &[usize],
    d_b: &[usize],
    theta: u8,
    mode: DegreeMode,
) -> Result<DiffDegrees, RecombineError> {
    if theta < 2 {
        return Err(RecombineError::InvalidTheta(theta));
    }
    let t = theta as usize;
    let a: Vec<u8> = d_a.iter().map(|d| (d % t) as u8).collect();
    let b: Vec<u8> = d_b.iter().map(|d| (d % t) as u8).collect();
    degrees_from_residues(&a, &b, theta, mode)
}

/// Difference degree from already reduced residues, as exchanged on the wire.
pub fn degrees_from_residues(a: &[u8], b: &[u8], theta: u8, mode: DegreeMode) -> Result<DiffDegrees, RecombineError> {
    if theta < 2 {
        return Err(RecombineError::InvalidTheta(theta));
    }
    if a.len() != b.len() {
        return Err(RecombineError::LengthMismatch(a.len(), b.len()));
    }
    if let Some(&value) = a.iter().chain(b).find(|&&r| r >= theta) {
        return Err(RecombineError::InvalidResidue { value, theta });
    }
    let degrees = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.abs_diff(y);
            match mode {
                DegreeMode::AsWritten => d,
                DegreeMode::Circular => d.min(theta - d),
            }
        })
        .collect();
    Ok(DiffDegrees { degrees, theta })
}

/// `w_i = (theta - d_i) / sum_j (theta - d_j)`.
pub fn weights(dd: &DiffDegrees) -> Result<Vec<f64>, RecombineError> {
    if dd.degrees.is_empty() {
        return Err(RecombineError::NoStreams);
    }
    let theta = dd.theta as u32;
    let slack: Vec<u32> = dd.degrees.iter().map(|&d| theta - d as u32).collect();
    let total: u32 = slack.iter().sum();
    Ok(slack.iter().map(|&s| s as f64 / total as f64).collect())
}

/// How many bits each stream contributes to a key of `key_length` bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub weights: Vec<f64>,
    /// `ceil(L * w_i)` before any repair.
    pub raw_picks: Vec<usize>,
    /// Repaired picks; they sum to `key_length` and respect stream lengths.
    pub picks: Vec<usize>,
    pub key_length: usize,
}

/// Index of the largest entry among those accepted by `eligible`, ties going
/// to the lowest index.
fn largest(picks: &[usize], eligible: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &p) in picks.iter().enumerate() {
        if eligible(i) && best.is_none_or(|b| p > picks[b]) {
            best = Some(i);
        }
    }
    best
}

/// Raw picks are `ceil(L * w_i)`. Streams are then capped at their length;
/// while the total exceeds `L` the stream with the most picks (lowest index
/// on ties) gives one back, and while it falls short the stream with the
/// most picks that still has spare bits takes one more.
pub fn allocate(weights: &[f64], key_length: usize, stream_lengths: &[usize]) -> Result<Allocation, RecombineError> {
    if weights.is_empty() {
        return Err(RecombineError::NoStreams);
    }
    if key_length == 0 {
        return Err(RecombineError::ZeroKeyLength);
    }
    if weights.len() != stream_lengths.len() {
        return Err(RecombineError::ShapeMismatch(weights.len(), stream_lengths.len()));
    }
    let available: usize = stream_lengths.iter().sum();
    if available < key_length {
        return Err(RecombineError::InsufficientMaterial {
            available,
            needed: key_length,
        });
    }
    // The tolerance keeps exact products such as 10 * 0.5 from rounding up.
    let raw_picks: Vec<usize> = weights
        .iter()
        .map(|&w| libm::ceil(key_length as f64 * w - 1e-9).max(0.0) as usize)
        .collect();
    let mut picks: Vec<usize> = raw_picks
        .iter()
        .zip(stream_lengths)
        .map(|(&p, &len)| p.min(len))
        .collect();
    let mut total: usize = picks.iter().sum();
    while total > key_length {
        let i = largest(&picks, |_| true).expect("non-empty");
        picks[i] -= 1;
        total -= 1;
    }
    while total < key_length {
        let i = largest(&picks, |i| picks[i] < stream_lengths[i]).expect("enough material");
        picks[i] += 1;
        total += 1;
    }
    Ok(Allocation {
        weights: weights.to_vec(),
        raw_picks,
        picks,
        key_length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub stream: usize,
    pub position: usize,
}

/// Which bit of which stream goes where in the recombined key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecombinationPlan {
    pub seed: u64,
    pub selections: Vec<Selection>,
}

/// Draws `picks[i]` distinct positions from stream `i` with a ChaCha8
/// generator keyed by `seed` on stream number `i` (partial Fisher-Yates).
pub fn plan(seed: u64, allocation: &Allocation, stream_lengths: &[usize]) -> Result<RecombinationPlan, RecombineError> {
    if allocation.picks.len() != stream_lengths.len() {
        return Err(RecombineError::ShapeMismatch(
            allocation.picks.len(),
            stream_lengths.len(),
        ));
    }
    let mut selections = Vec::with_capacity(allocation.key_length);
    for (i, (&count, &len)) in allocation.picks.iter().zip(stream_lengths).enumerate() {
        if count > len {
            return Err(RecombineError::OutOfRange {
                stream: i,
                position: count - 1,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut positions: Vec<usize> = (0..len).collect();
        for j in 0..count {
            let k = rng.random_range(j..len);
            positions.swap(j, k);
            selections.push(Selection {
                stream: i,
                position: positions[j],
            });
        }
    }
    Ok(RecombinationPlan { seed, selections })
}

pub fn recombine(streams: &[BitStream], plan: &RecombinationPlan) -> Result<BitStream, RecombineError> {
    plan.selections
        .iter()
        .map(|s| {
            streams
                .get(s.stream)
                .and_then(|bits| bits.get(s.position))
                .ok_or(RecombineError::OutOfRange {
                    stream: s.stream,
                    position: s.position,
                })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(BitStream::new)
}

/// Probability that `picks[i]` draws from each stream avoid all of its
/// `mismatches[i]` differing bits, and that at least one of `rounds`
/// independent recombinations succeeds.
///
/// Each stream contributes `prod_{t=0}^{l} max(0, 1 - d/(L - t))`, i.e. the
/// product runs over `l + 1` factors.
pub fn success_probability(
    mismatches: &[usize],
    picks: &[usize],
    length: usize,
    rounds: u32,
) -> Result<f64, RecombineError> {
    if mismatches.len() != picks.len() {
        return Err(RecombineError::ShapeMismatch(mismatches.len(), picks.len()));
    }
    if rounds == 0 {
        return Err(RecombineError::NoRounds);
    }
    let mut all = 1.0;
    for (&d, &l) in mismatches.iter().zip(picks) {
        for t in 0..=l {
            let remaining = length as i64 - t as i64;
            if remaining <= 0 {
                return Err(RecombineError::Degenerate(remaining));
            }
            all *= (1.0 - d as f64 / remaining as f64).max(0.0);
        }
    }
    let p = 1.0 - libm::pow(1.0 - all, rounds as f64);
    Ok(p.clamp(0.0, 1.0))
}
