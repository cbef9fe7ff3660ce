//! Adaptive two-threshold quantizer.
//!
//! Samples strictly inside `(mean - alpha*std, mean + alpha*std)` are dropped.
//! Both parties publish their drop lists and keep only indices neither of
//! them dropped; the rest map to `1` at or above the upper threshold and `0`
//! at or below the lower one.

use alloc::vec::Vec;

use thiserror::Error;

use crate::bits::{BitStream, Party};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantizeError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {0} is not finite")]
    NonFinite(usize),
    #[error("alpha must be finite and >= 0, got {0}")]
    InvalidAlpha(f64),
    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("drop list indices must be strictly increasing")]
    Unsorted,
    #[error("kept index {0} lies inside the drop band; drop lists are out of sync")]
    InsideBand(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub upper: f64,
    pub lower: f64,
    pub alpha: f64,
    pub mean: f64,
    pub std_dev: f64,
}

impl Thresholds {
    /// True for samples strictly between the thresholds.
    pub fn in_band(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }
}

/// Mean and population standard deviation based thresholds.
pub fn compute_thresholds(samples: &[f64], alpha: f64) -> Result<Thresholds, QuantizeError> {
    if samples.len() < 2 {
        return Err(QuantizeError::TooFewSamples(samples.len()));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(QuantizeError::InvalidAlpha(alpha));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(QuantizeError::NonFinite(i));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std_dev = libm::sqrt(var);
    Ok(Thresholds {
        upper: mean + alpha * std_dev,
        lower: mean - alpha * std_dev,
        alpha,
        mean,
        std_dev,
    })
}

/// Sorted, duplicate-free sample indices a party discards.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropList {
    indices: Vec<usize>,
}

impl DropList {
    /// Validates that `indices` are strictly increasing and below `len`.
    pub fn new(indices: Vec<usize>, len: usize) -> Result<Self, QuantizeError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QuantizeError::Unsorted);
        }
        if let Some(&index) = indices.last().filter(|&&i| i >= len) {
            return Err(QuantizeError::IndexOutOfRange { index, len });
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn drop_indices(samples: &[f64], th: &Thresholds) -> DropList {
    DropList {
        indices: samples
            .iter()
            .enumerate()
            .filter(|(_, &x)| th.in_band(x))
            .map(|(i, _)| i)
            .collect(),
    }
}

/// Ascending indices absent from both drop lists.
pub fn merge_kept(a: &DropList, b: &DropList, n: usize) -> Result<Vec<usize>, QuantizeError> {
    for list in [a, b] {
        if let Some(&index) = list.indices.last().filter(|&&i| i >= n) {
            return Err(QuantizeError::IndexOutOfRange { index, len: n });
        }
    }
    let mut dropped = alloc::vec![false; n];
    for &i in a.indices.iter().chain(&b.indices) {
        dropped[i] = true;
    }
    Ok((0..n).filter(|&i| !dropped[i]).collect())
}

pub fn extract_bits(samples: &[f64], th: &Thresholds, kept: &[usize]) -> Result<BitStream, QuantizeError> {
    kept.iter()
        .map(|&j| {
            let x = *samples.get(j).ok_or(QuantizeError::IndexOutOfRange {
                index: j,
                len: samples.len(),
            })?;
            if x >= th.upper {
                Ok(true)
            } else if x <= th.lower {
                Ok(false)
            } else {
                Err(QuantizeError::InsideBand(j))
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(BitStream::new)
}

/// One party's view of a subcarrier after thresholds and local drops.
#[derive(Debug, Clone)]
pub struct LocalQuantization {
    pub thresholds: Thresholds,
    pub drops: DropList,
}

/// Thresholds and drop list for one amplitude sequence.
pub fn quantize_local(samples: &[f64], alpha: f64) -> Result<LocalQuantization, QuantizeError> {
    let thresholds = compute_thresholds(samples, alpha)?;
    let drops = drop_indices(samples, &thresholds);
    Ok(LocalQuantization { thresholds, drops })
}

/// Bits for `party` on `stream` once both drop lists are known.
pub fn finish_stream(
    samples: &[f64],
    local: &LocalQuantization,
    remote: &DropList,
    party: Party,
    stream: usize,
) -> Result<BitStream, QuantizeError> {
    let kept = merge_kept(&local.drops, remote, samples.len())?;
    let mut bits = extract_bits(samples, &local.thresholds, &kept)?;
    bits.set_origin(party, stream);
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn constant_samples_collapse_thresholds() {
        let th = compute_thresholds(&[0.0; 4], 1.0).unwrap();
        assert_eq!((th.upper, th.lower), (0.0, 0.0));
    }

    #[test]
    fn two_sample_hand_computation() {
        let th = compute_thresholds(&[1.0, 3.0], 1.0).unwrap();
        assert_eq!((th.mean, th.std_dev, th.upper, th.lower), (2.0, 1.0, 3.0, 1.0));
        assert!(drop_indices(&[1.0, 3.0], &th).is_empty());
        let bits = extract_bits(&[1.0, 3.0], &th, &[0, 1]).unwrap();
        assert_eq!(bits.to_ascii(), "01");
        assert!(extract_bits(&[1.0, 3.0], &th, &[]).unwrap().is_empty());
    }

    #[test]
    fn zero_alpha_thresholds_meet_at_mean() {
        let th = compute_thresholds(&[4.0, -1.0, 9.5, 2.25], 0.0).unwrap();
        assert_eq!(th.upper, th.mean);
        assert_eq!(th.lower, th.mean);
    }

    #[test]
    fn everything_at_mean_is_dropped_for_positive_alpha() {
        let samples = [5.0, 5.0, 5.0];
        let th = Thresholds {
            upper: 6.0,
            lower: 4.0,
            alpha: 0.5,
            mean: 5.0,
            std_dev: 2.0,
        };
        assert_eq!(drop_indices(&samples, &th).indices(), &[0, 1, 2]);
    }

    #[test]
    fn three_sample_band() {
        let samples = [0.0, 10.0, 5.0];
        let th = compute_thresholds(&samples, 0.5).unwrap();
        assert!((th.std_dev - 4.0824829).abs() < 1e-6);
        // brute force: 5 - 2.04 < x < 5 + 2.04
        let expected: Vec<usize> = samples
            .iter()
            .enumerate()
            .filter(|(_, &x)| (x - 5.0f64).abs() < 0.5 * 4.082_482_904_638_63)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(drop_indices(&samples, &th).indices(), expected.as_slice());
        assert_eq!(expected, vec![2]);
    }

    #[test]
    fn merge_is_complement_of_union() {
        let a = DropList::new(vec![0], 4).unwrap();
        let b = DropList::new(vec![2], 4).unwrap();
        assert_eq!(merge_kept(&a, &b, 4).unwrap(), vec![1, 3]);
        let none = DropList::default();
        assert_eq!(merge_kept(&none, &none, 3).unwrap(), vec![0, 1, 2]);
        let bad = DropList { indices: vec![7] };
        assert!(matches!(
            merge_kept(&bad, &none, 4),
            Err(QuantizeError::IndexOutOfRange { index: 7, len: 4 })
        ));
    }

    #[test]
    fn drop_list_validation() {
        assert_eq!(DropList::new(vec![2, 1], 4), Err(QuantizeError::Unsorted));
        assert_eq!(DropList::new(vec![1, 1], 4), Err(QuantizeError::Unsorted));
        assert!(DropList::new(vec![4], 4).is_err());
    }

    #[test]
    fn desynced_kept_index_is_rejected() {
        let samples = [0.0, 10.0, 5.0];
        let th = compute_thresholds(&samples, 0.5).unwrap();
        assert_eq!(extract_bits(&samples, &th, &[0, 2]), Err(QuantizeError::InsideBand(2)));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(compute_thresholds(&[1.0], 0.4), Err(QuantizeError::TooFewSamples(1)));
        assert_eq!(
            compute_thresholds(&[1.0, f64::NAN], 0.4),
            Err(QuantizeError::NonFinite(1))
        );
        assert!(compute_thresholds(&[1.0, 2.0], -0.1).is_err());
    }

    fn samples_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, 2..64)
    }

    proptest! {
        #[test]
        fn merge_matches_brute_force(
            a in prop::collection::btree_set(0usize..20, 0..20),
            b in prop::collection::btree_set(0usize..20, 0..20),
        ) {
            let da = DropList::new(a.iter().copied().collect(), 20).unwrap();
            let db = DropList::new(b.iter().copied().collect(), 20).unwrap();
            let expected: Vec<usize> =
                (0..20).filter(|i| !a.contains(i) && !b.contains(i)).collect();
            prop_assert_eq!(merge_kept(&da, &db, 20).unwrap(), expected);
        }

        #[test]
        fn every_index_is_dropped_or_quantized(s in samples_strategy(), alpha in 0.0f64..2.0) {
            let th = compute_thresholds(&s, alpha).unwrap();
            let drops = drop_indices(&s, &th);
            let kept = merge_kept(&drops, &DropList::default(), s.len()).unwrap();
            prop_assert_eq!(drops.len() + kept.len(), s.len());
            let bits = extract_bits(&s, &th, &kept).unwrap();
            prop_assert_eq!(bits.len(), kept.len());
        }

        #[test]
        fn drop_set_grows_with_alpha(s in samples_strategy(), a in 0.0f64..1.5, step in 0.0f64..1.0) {
            let small = drop_indices(&s, &compute_thresholds(&s, a).unwrap());
            let large = drop_indices(&s, &compute_thresholds(&s, a + step).unwrap());
            prop_assert!(small.indices().iter().all(|i| large.indices().contains(i)));
        }

        #[test]
        fn reflection_flips_bits(s in samples_strategy(), alpha in 0.0f64..1.5) {
            let th = compute_thresholds(&s, alpha).unwrap();
            // Reflect around the mean; small rounding can move samples that
            // sit exactly on a threshold, so only compare clear-cut indices.
            let reflected: Vec<f64> = s.iter().map(|x| 2.0 * th.mean - x).collect();
            let rth = compute_thresholds(&reflected, alpha).unwrap();
            let eps = 1e-9 * (1.0 + th.std_dev + th.mean.abs());
            for (i, &x) in s.iter().enumerate() {
                if (x - th.upper).abs() < eps || (x - th.lower).abs() < eps {
                    continue;
                }
                prop_assert_eq!(th.in_band(x), rth.in_band(reflected[i]));
                if !th.in_band(x) {
                    prop_assert_eq!(x >= th.upper, reflected[i] <= rth.lower);
                }
            }
        }
    }
}
