//! Framed wire format.
//!
//! Every frame is `type (1 byte) | payload length (u32 BE) | payload`. The low
//! seven bits of the type byte carry the message type and the high bit the
//! direction (`0` for Alice to Bob, `1` for Bob to Alice). All integers are
//! big-endian.
//!
//! | type         | code | payload                                                           |
//! |--------------|------|-------------------------------------------------------------------|
//! | PROBE        | 1    | `u32` probe sequence number                                       |
//! | DROP_LIST    | 2    | `u16 m`, then per stream `u32 count` and `count` x `u32` indices  |
//! | TAGS         | 3    | `u16 count`, then per tag `u16 stream`, `u8 r`, `ceil(r/8)` bytes |
//! | DIFF_VECTOR  | 4    | `u8 theta`, `u16 m`, `m` x `u8` residues, `u32 nbits`, packed X   |
//! | RECOMB_SEED  | 5    | `u64` seed                                                        |
//! | VERDICT      | 6    | one byte per verdict, `1` match / `0` mismatch                    |
//! | PARITY       | 7    | `u16 round`, `u32 nbits`, packed parity bits                      |
//! | BISECT       | 8    | `u16 round`, `u32 start`, `u32 end`, `u8` parity (`0xFF` = query) |

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::bits::{pack_bits, unpack_bits, BitStream};
use crate::validation::{ValidationError, ValidationTag};

pub const HEADER_LEN: usize = 5;

/// Largest payload a frame may announce.
pub const MAX_PAYLOAD: usize = 64 << 20;

const DIRECTION_BIT: u8 = 0x80;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("truncated frame: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("payload length {0} exceeds the {MAX_PAYLOAD}-byte limit")]
    LengthOverflow(usize),
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("malformed {kind} payload: {reason}")]
    Malformed { kind: MessageType, reason: &'static str },
    #[error(transparent)]
    Tag(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageType {
    Probe,
    DropList,
    Tags,
    DiffVector,
    RecombSeed,
    Verdict,
    Parity,
    Bisect,
}

impl MessageType {
    pub const ALL: [MessageType; 8] = [
        MessageType::Probe,
        MessageType::DropList,
        MessageType::Tags,
        MessageType::DiffVector,
        MessageType::RecombSeed,
        MessageType::Verdict,
        MessageType::Parity,
        MessageType::Bisect,
    ];

    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).wrapping_sub(1)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageType::Probe => "PROBE",
            MessageType::DropList => "DROP_LIST",
            MessageType::Tags => "TAGS",
            MessageType::DiffVector => "DIFF_VECTOR",
            MessageType::RecombSeed => "RECOMB_SEED",
            MessageType::Verdict => "VERDICT",
            MessageType::Parity => "PARITY",
            MessageType::Bisect => "BISECT",
        }
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    AliceToBob,
    BobToAlice,
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::AliceToBob => Direction::BobToAlice,
            Direction::BobToAlice => Direction::AliceToBob,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::AliceToBob => "A->B",
            Direction::BobToAlice => "B->A",
        }
    }
}

/// Decoded payload contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Probe(u32),
    DropList(Vec<Vec<u32>>),
    Tags(Vec<ValidationTag>),
    DiffVector {
        theta: u8,
        residues: Vec<u8>,
        reference: BitStream,
    },
    RecombSeed(u64),
    Verdict(Vec<bool>),
    Parity {
        round: u16,
        parities: Vec<bool>,
    },
    Bisect {
        round: u16,
        start: u32,
        end: u32,
        /// `None` for a query, the answering side's parity otherwise.
        parity: Option<bool>,
    },
}

impl Body {
    pub fn kind(&self) -> MessageType {
        match self {
            Body::Probe(_) => MessageType::Probe,
            Body::DropList(_) => MessageType::DropList,
            Body::Tags(_) => MessageType::Tags,
            Body::DiffVector { .. } => MessageType::DiffVector,
            Body::RecombSeed(_) => MessageType::RecombSeed,
            Body::Verdict(_) => MessageType::Verdict,
            Body::Parity { .. } => MessageType::Parity,
            Body::Bisect { .. } => MessageType::Bisect,
        }
    }

    pub fn to_payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Body::Probe(seq) => out.extend_from_slice(&seq.to_be_bytes()),
            Body::DropList(lists) => {
                out.extend_from_slice(&(lists.len() as u16).to_be_bytes());
                for list in lists {
                    out.extend_from_slice(&(list.len() as u32).to_be_bytes());
                    for i in list {
                        out.extend_from_slice(&i.to_be_bytes());
                    }
                }
            }
            Body::Tags(tags) => {
                out.extend_from_slice(&(tags.len() as u16).to_be_bytes());
                for t in tags {
                    out.extend_from_slice(&(t.stream_index() as u16).to_be_bytes());
                    out.extend_from_slice(&t.to_wire());
                }
            }
            Body::DiffVector {
                theta,
                residues,
                reference,
            } => {
                out.push(*theta);
                out.extend_from_slice(&(residues.len() as u16).to_be_bytes());
                out.extend_from_slice(residues);
                out.extend_from_slice(&(reference.len() as u32).to_be_bytes());
                out.extend_from_slice(&reference.to_packed());
            }
            Body::RecombSeed(seed) => out.extend_from_slice(&seed.to_be_bytes()),
            Body::Verdict(v) => out.extend(v.iter().map(|&m| u8::from(m))),
            Body::Parity { round, parities } => {
                out.extend_from_slice(&round.to_be_bytes());
                out.extend_from_slice(&(parities.len() as u32).to_be_bytes());
                out.extend_from_slice(&pack_bits(parities));
            }
            Body::Bisect {
                round,
                start,
                end,
                parity,
            } => {
                out.extend_from_slice(&round.to_be_bytes());
                out.extend_from_slice(&start.to_be_bytes());
                out.extend_from_slice(&end.to_be_bytes());
                out.push(parity.map_or(0xFF, u8::from));
            }
        }
        out
    }

    pub fn parse(kind: MessageType, payload: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader { kind, buf: payload };
        let body = match kind {
            MessageType::Probe => Body::Probe(r.u32()?),
            MessageType::DropList => {
                let m = r.u16()? as usize;
                let mut lists = Vec::with_capacity(m);
                for _ in 0..m {
                    let count = r.u32()? as usize;
                    r.need(count.saturating_mul(4))?;
                    lists.push((0..count).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?);
                }
                Body::DropList(lists)
            }
            MessageType::Tags => {
                let count = r.u16()? as usize;
                let mut tags = Vec::with_capacity(count);
                for _ in 0..count {
                    let stream = r.u16()? as usize;
                    let bits = r.u8()?;
                    let bytes = r.take((bits as usize).div_ceil(8))?;
                    tags.push(ValidationTag::from_parts(bits, bytes.to_vec(), stream)?);
                }
                Body::Tags(tags)
            }
            MessageType::DiffVector => {
                let theta = r.u8()?;
                let m = r.u16()? as usize;
                let residues = r.take(m)?.to_vec();
                let nbits = r.u32()? as usize;
                let packed = r.take(nbits.div_ceil(8))?;
                Body::DiffVector {
                    theta,
                    residues,
                    reference: BitStream::new(unpack_bits(packed, nbits)),
                }
            }
            MessageType::RecombSeed => Body::RecombSeed(r.u64()?),
            MessageType::Verdict => {
                let v = r
                    .take(payload.len())?
                    .iter()
                    .map(|&b| match b {
                        0 => Ok(false),
                        1 => Ok(true),
                        _ => Err(r.malformed("verdict byte must be 0 or 1")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Body::Verdict(v)
            }
            MessageType::Parity => {
                let round = r.u16()?;
                let nbits = r.u32()? as usize;
                let packed = r.take(nbits.div_ceil(8))?;
                Body::Parity {
                    round,
                    parities: unpack_bits(packed, nbits),
                }
            }
            MessageType::Bisect => {
                let round = r.u16()?;
                let start = r.u32()?;
                let end = r.u32()?;
                let parity = match r.u8()? {
                    0 => Some(false),
                    1 => Some(true),
                    0xFF => None,
                    _ => return Err(r.malformed("bisect parity must be 0, 1 or 0xFF")),
                };
                Body::Bisect {
                    round,
                    start,
                    end,
                    parity,
                }
            }
        };
        if !r.buf.is_empty() {
            return Err(r.malformed("trailing bytes"));
        }
        Ok(body)
    }
}

struct Reader<'a> {
    kind: MessageType,
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn malformed(&self, reason: &'static str) -> WireError {
        WireError::Malformed {
            kind: self.kind,
            reason,
        }
    }

    fn need(&self, n: usize) -> Result<(), WireError> {
        if self.buf.len() < n {
            Err(self.malformed("payload shorter than its fields"))
        } else {
            Ok(())
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        self.need(n)?;
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// A typed message as it crosses the link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolMessage {
    kind: MessageType,
    direction: Direction,
    payload: Vec<u8>,
}

impl ProtocolMessage {
    pub fn new(direction: Direction, body: &Body) -> Self {
        Self {
            kind: body.kind(),
            direction,
            payload: body.to_payload(),
        }
    }

    /// Checks that `payload` parses as `kind` before accepting it.
    pub fn from_raw(kind: MessageType, direction: Direction, payload: Vec<u8>) -> Result<Self, WireError> {
        Body::parse(kind, &payload)?;
        Ok(Self {
            kind,
            direction,
            payload,
        })
    }

    pub fn kind(&self) -> MessageType {
        self.kind
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn body(&self) -> Result<Body, WireError> {
        Body::parse(self.kind, &self.payload)
    }

    /// Size of the encoded frame.
    pub fn frame_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

pub fn encode(msg: &ProtocolMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(msg.frame_len());
    let dir = match msg.direction {
        Direction::AliceToBob => 0,
        Direction::BobToAlice => DIRECTION_BIT,
    };
    out.push(msg.kind.code() | dir);
    out.extend_from_slice(&(msg.payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&msg.payload);
    out
}

/// Decodes exactly one frame.
pub fn decode(frame: &[u8]) -> Result<ProtocolMessage, WireError> {
    let (msg, used) = decode_prefix(frame)?;
    if used != frame.len() {
        return Err(WireError::TrailingBytes(frame.len() - used));
    }
    Ok(msg)
}

/// Decodes the first frame in `buf`, returning it and the bytes consumed.
pub fn decode_prefix(buf: &[u8]) -> Result<(ProtocolMessage, usize), WireError> {
    if buf.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            expected: HEADER_LEN,
            actual: buf.len(),
        });
    }
    let code = buf[0] & !DIRECTION_BIT;
    let kind = MessageType::from_code(code).ok_or(WireError::UnknownType(buf[0]))?;
    let direction = if buf[0] & DIRECTION_BIT == 0 {
        Direction::AliceToBob
    } else {
        Direction::BobToAlice
    };
    let len = u32::from_be_bytes(buf[1..5].try_into().expect("4 bytes")) as usize;
    if len > MAX_PAYLOAD {
        return Err(WireError::LengthOverflow(len));
    }
    let total = HEADER_LEN + len;
    if buf.len() < total {
        return Err(WireError::Truncated {
            expected: total,
            actual: buf.len(),
        });
    }
    let msg = ProtocolMessage::from_raw(kind, direction, buf[HEADER_LEN..total].to_vec())?;
    Ok((msg, total))
}
