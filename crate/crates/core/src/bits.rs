//! Bit sequences and their canonical byte encoding.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// One of the three radios in a key extraction experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Party {
    Alice,
    Bob,
    Eve,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
            Party::Eve => "eve",
        })
    }
}

/// Which party produced a stream and from which subcarrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamOrigin {
    pub party: Party,
    pub index: usize,
}

/// An ordered 0/1 sequence, optionally tagged with where it came from.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitStream {
    bits: Vec<bool>,
    origin: Option<StreamOrigin>,
}

impl BitStream {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits, origin: None }
    }

    pub fn with_origin(bits: Vec<bool>, party: Party, index: usize) -> Self {
        Self {
            bits,
            origin: Some(StreamOrigin { party, index }),
        }
    }

    /// Parses a string of `0` and `1` characters. Returns `None` on any other
    /// character.
    pub fn from_ascii(s: &str) -> Option<Self> {
        s.bytes()
            .map(|b| match b {
                b'0' => Some(false),
                b'1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self::new)
    }

    pub fn origin(&self) -> Option<StreamOrigin> {
        self.origin
    }

    pub fn set_origin(&mut self, party: Party, index: usize) {
        self.origin = Some(StreamOrigin { party, index });
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        self.bits.get(index).copied()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// First `len` bits, keeping the origin.
    pub fn truncated(&self, len: usize) -> Self {
        Self {
            bits: self.bits[..len.min(self.bits.len())].to_vec(),
            origin: self.origin,
        }
    }

    pub fn to_ascii(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Bits packed MSB-first, the final partial byte zero-padded.
    pub fn to_packed(&self) -> Vec<u8> {
        pack_bits(&self.bits)
    }

    /// Canonical hashing input: 8-byte big-endian bit length followed by the
    /// packed bits.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.bits.len().div_ceil(8));
        out.extend_from_slice(&(self.bits.len() as u64).to_be_bytes());
        out.extend_from_slice(&self.to_packed());
        out
    }
}

impl fmt::Debug for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("BitStream");
        if let Some(o) = self.origin {
            d.field("party", &o.party).field("index", &o.index);
        }
        if self.bits.len() <= 64 {
            d.field("bits", &self.to_ascii());
        } else {
            d.field("len", &self.bits.len());
        }
        d.finish()
    }
}

impl From<Vec<bool>> for BitStream {
    fn from(bits: Vec<bool>) -> Self {
        Self::new(bits)
    }
}

impl FromIterator<bool> for BitStream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bits.len().div_ceil(8));
    for chunk in bits.chunks(8) {
        let mut byte = 0u8;
        for (i, &b) in chunk.iter().enumerate() {
            if b {
                byte |= 0x80 >> i;
            }
        }
        out.push(byte);
    }
    out
}

/// Inverse of [`pack_bits`]; `bytes` must hold at least `len` bits.
pub fn unpack_bits(bytes: &[u8], len: usize) -> Vec<bool> {
    (0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect()
}
