use alloc::vec::Vec;

use crate::analysis;
use crate::bits::{BitStream, Party};
use crate::channel::CsiTrace;
use crate::quantizer::{self, DropList};
use crate::wire::{Body, Direction, ProtocolMessage};

/// Everything a passive eavesdropper holds after a session: the public
/// transcript and her own channel observations.
#[derive(Debug, Clone, PartialEq)]
pub struct EveView {
    pub transcript: Vec<ProtocolMessage>,
    pub trace: CsiTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveReport {
    /// Eve's guess of each stream.
    pub streams: Vec<BitStream>,
    /// Pearson correlation with the true stream, `None` when undefined.
    pub correlations: Vec<Option<f64>>,
    /// Fraction of positions where Eve agrees with the true stream.
    pub agreement: Vec<Option<f64>>,
}

impl EveReport {
    pub fn max_abs_correlation(&self) -> Option<f64> {
        self.correlations.iter().flatten().map(|c| c.abs()).reduce(f64::max)
    }
}

fn drop_lists(transcript: &[ProtocolMessage], direction: Direction) -> Option<Vec<Vec<u32>>> {
    transcript
        .iter()
        .filter(|m| m.direction() == direction)
        .find_map(|m| match m.body() {
            Ok(Body::DropList(lists)) => Some(lists),
            _ => None,
        })
}

/// Eve keeps the positions both public drop lists leave and slices her own
/// amplitudes at their mean, then compares with `truth` (one stream per
/// subcarrier, as held by Alice).
pub fn eve_attempt(view: &EveView, truth: &[BitStream]) -> EveReport {
    let a = drop_lists(&view.transcript, Direction::AliceToBob).unwrap_or_default();
    let b = drop_lists(&view.transcript, Direction::BobToAlice).unwrap_or_default();
    let m = view.trace.subcarriers().min(a.len()).min(b.len());
    let mut streams = Vec::with_capacity(m);
    for i in 0..m {
        let samples = view.trace.amplitudes(i);
        let n = samples.len();
        let to_list = |l: &[u32]| DropList::new(l.iter().map(|&x| x as usize).collect(), n);
        let kept = match (to_list(&a[i]), to_list(&b[i])) {
            (Ok(da), Ok(db)) => quantizer::merge_kept(&da, &db, n).unwrap_or_default(),
            _ => Vec::new(),
        };
        let mean = samples.iter().sum::<f64>() / n.max(1) as f64;
        let bits: Vec<bool> = kept.iter().map(|&j| samples[j] >= mean).collect();
        streams.push(BitStream::with_origin(bits, Party::Eve, i));
    }
    let pairs = || streams.iter().zip(truth);
    let correlations = pairs()
        .map(|(e, t)| analysis::pearson_bits(e.bits(), t.bits()).ok())
        .collect();
    let agreement = pairs()
        .map(|(e, t)| analysis::mismatch_ratio(e.bits(), t.bits()).ok().map(|r| 1.0 - r))
        .collect();
    EveReport {
        streams,
        correlations,
        agreement,
    }
}
