//! Transcripts as JSON lines: one object per message with its type,
//! direction, payload length and hex payload.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use skece_core::wire::{Direction, MessageType, ProtocolMessage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    #[serde(rename = "type")]
    pub kind: String,
    pub direction: String,
    pub length: usize,
    pub payload: String,
}

impl From<&ProtocolMessage> for Record {
    fn from(m: &ProtocolMessage) -> Self {
        Self {
            kind: m.kind().name().to_string(),
            direction: m.direction().label().to_string(),
            length: m.payload().len(),
            payload: hex::encode(m.payload()),
        }
    }
}

impl Record {
    pub fn to_message(&self) -> Result<ProtocolMessage, String> {
        let kind = MessageType::ALL
            .into_iter()
            .find(|k| k.name() == self.kind)
            .ok_or_else(|| format!("unknown message type {:?}", self.kind))?;
        let direction = [Direction::AliceToBob, Direction::BobToAlice]
            .into_iter()
            .find(|d| d.label() == self.direction)
            .ok_or_else(|| format!("unknown direction {:?}", self.direction))?;
        let payload = hex::decode(&self.payload).map_err(|e| e.to_string())?;
        if payload.len() != self.length {
            return Err(format!(
                "length {} does not match payload of {} bytes",
                self.length,
                payload.len()
            ));
        }
        ProtocolMessage::from_raw(kind, direction, payload).map_err(|e| e.to_string())
    }
}

pub fn write_jsonl<W: Write>(mut out: W, transcript: &[ProtocolMessage]) -> std::io::Result<()> {
    for m in transcript {
        serde_json::to_writer(&mut out, &Record::from(m))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<ProtocolMessage>, TranscriptError> {
    let mut msgs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| TranscriptError::Malformed { line: i + 1, reason };
        let rec: Record = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        msgs.push(rec.to_message().map_err(malformed)?);
    }
    Ok(msgs)
}
