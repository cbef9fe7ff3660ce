//! Consistency validation over truncated SHA-1 digests.
//!
//! A stream is hashed over its canonical encoding (8-byte big-endian bit
//! length, then the bits packed MSB-first) and only the leading `r` digest
//! bits travel on the wire. Two different streams collide on `r` bits with
//! probability about `2^-r`.

use alloc::vec::Vec;

use sha1::{Digest, Sha1};
use thiserror::Error;

use crate::bits::BitStream;

pub const DIGEST_BITS: u8 = 160;

/// Checking length for a 98% detection probability.
pub const DEFAULT_CHECK_BITS: u8 = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("detection probability must lie in (0, 1), got {0}")]
    InvalidGamma(f64),
    #[error("detection probability {0} needs more than 160 digest bits")]
    GammaTooStrict(f64),
    #[error("checking length must be in 1..=160, got {0}")]
    InvalidLength(u8),
    #[error("checking length mismatch: remote tag has {remote} bits, local side uses {local}")]
    LengthMismatch { remote: u8, local: u8 },
    #[error("tag has {found} bytes, {r}-bit tags need {expected}")]
    TagSize { r: u8, found: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Match,
    Mismatch,
}

impl Verdict {
    pub fn is_match(self) -> bool {
        self == Verdict::Match
    }
}

/// Smallest `r` with `1 - 2^-r >= gamma`.
pub fn checking_length(gamma: f64) -> Result<u8, ValidationError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ValidationError::InvalidGamma(gamma));
    }
    (1..=DIGEST_BITS)
        .find(|&r| 1.0 - libm::exp2(-(r as f64)) >= gamma)
        .ok_or(ValidationError::GammaTooStrict(gamma))
}

pub fn sha1_digest(bytes: &[u8]) -> [u8; 20] {
    Sha1::digest(bytes).into()
}

/// Leading `r` bits of a stream's digest.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValidationTag {
    r: u8,
    tag: Vec<u8>,
    stream_index: usize,
}

impl ValidationTag {
    /// Builds a tag from raw wire bytes. Bits past `r` in the last byte are
    /// cleared.
    pub fn from_parts(r: u8, mut tag: Vec<u8>, stream_index: usize) -> Result<Self, ValidationError> {
        if r == 0 || r > DIGEST_BITS {
            return Err(ValidationError::InvalidLength(r));
        }
        let expected = (r as usize).div_ceil(8);
        if tag.len() != expected {
            return Err(ValidationError::TagSize {
                r,
                found: tag.len(),
                expected,
            });
        }
        let rem = r % 8;
        if rem != 0 {
            tag[expected - 1] &= 0xFFu8 << (8 - rem);
        }
        Ok(Self { r, tag, stream_index })
    }

    pub fn r(&self) -> u8 {
        self.r
    }

    pub fn bytes(&self) -> &[u8] {
        &self.tag
    }

    pub fn stream_index(&self) -> usize {
        self.stream_index
    }

    /// `r` as one byte, then `ceil(r/8)` tag bytes.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.tag.len());
        out.push(self.r);
        out.extend_from_slice(&self.tag);
        out
    }
}

/// Tag for `bits`, indexed by the stream's origin (0 if it has none).
pub fn make_tag(bits: &BitStream, r: u8) -> Result<ValidationTag, ValidationError> {
    let index = bits.origin().map_or(0, |o| o.index);
    make_indexed_tag(bits, r, index)
}

pub fn make_indexed_tag(bits: &BitStream, r: u8, stream_index: usize) -> Result<ValidationTag, ValidationError> {
    if r == 0 || r > DIGEST_BITS {
        return Err(ValidationError::InvalidLength(r));
    }
    let digest = sha1_digest(&bits.canonical_bytes());
    ValidationTag::from_parts(r, digest[..(r as usize).div_ceil(8)].to_vec(), stream_index)
}

/// Recomputes the tag over `local` with the local checking length and
/// compares it with the remote tag.
pub fn validate(remote: &ValidationTag, local: &BitStream, local_r: u8) -> Result<Verdict, ValidationError> {
    if remote.r != local_r {
        return Err(ValidationError::LengthMismatch {
            remote: remote.r,
            local: local_r,
        });
    }
    let mine = make_indexed_tag(local, local_r, remote.stream_index)?;
    Ok(if mine.tag == remote.tag {
        Verdict::Match
    } else {
        Verdict::Mismatch
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checking_lengths() {
        assert_eq!(checking_length(0.98), Ok(6));
        assert_eq!(checking_length(0.5), Ok(1));
        assert_eq!(checking_length(0.999), Ok(10));
        assert_eq!(checking_length(0.75), Ok(2));
        for bad in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(matches!(checking_length(bad), Err(ValidationError::InvalidGamma(_))));
        }
    }

    #[test]
    fn abc_digest() {
        let d = sha1_digest(b"abc");
        let hex: alloc::string::String = d.iter().map(|b| alloc::format!("{b:02x}")).collect();
        assert_eq!(hex, "a9993e364706816aba3e25717850c26c9cd0d89d");
    }

    #[test]
    fn empty_stream_tag_is_digest_of_zero_header() {
        let tag = make_tag(&BitStream::default(), 8).unwrap();
        assert_eq!(tag.bytes(), &sha1_digest(&[0u8; 8])[..1]);
    }

    #[test]
    fn partial_byte_is_masked() {
        let s = BitStream::from_ascii("1100").unwrap();
        let t = make_tag(&s, 6).unwrap();
        assert_eq!(t.bytes().len(), 1);
        assert_eq!(t.bytes()[0] & 0b11, 0);
        assert_eq!(t.to_wire().len(), 2);
        assert_eq!(t, make_tag(&s, 6).unwrap());
    }

    #[test]
    fn equal_streams_match_and_length_mismatch_errors() {
        let s = BitStream::from_ascii("0110100110").unwrap();
        let t = make_tag(&s, 6).unwrap();
        assert_eq!(validate(&t, &s, 6), Ok(Verdict::Match));
        assert_eq!(
            validate(&t, &s, 7),
            Err(ValidationError::LengthMismatch { remote: 6, local: 7 })
        );
    }

    #[test]
    fn one_flip_is_detected_at_the_expected_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 10_000;
        let mut mismatches = 0;
        for _ in 0..trials {
            let bits: alloc::vec::Vec<bool> = (0..300).map(|_| rng.random()).collect();
            let mut other = bits.clone();
            let j = rng.random_range(0..300);
            other[j] = !other[j];
            let t = make_tag(&BitStream::new(bits), 6).unwrap();
            if !validate(&t, &BitStream::new(other), 6).unwrap().is_match() {
                mismatches += 1;
            }
        }
        // 1 - 2^-6 = 0.984; 3-sigma binomial slack at n = 1e4 is 0.0038.
        let rate = mismatches as f64 / trials as f64;
        assert!(rate >= 0.97, "detection rate {rate}");
        assert!((rate - 0.984375).abs() < 0.0038 + 1e-9, "detection rate {rate}");
    }

    #[test]
    fn rejects_bad_lengths() {
        let s = BitStream::default();
        assert_eq!(make_tag(&s, 0), Err(ValidationError::InvalidLength(0)));
        assert_eq!(make_tag(&s, 161), Err(ValidationError::InvalidLength(161)));
        assert!(ValidationTag::from_parts(12, alloc::vec![0], 0).is_err());
    }
}
