//! CSV trace files, one per party.
//!
//! Header `time,subcarrier,amplitude_db,phase_rad`; rows sorted by time and
//! then subcarrier, every instant listing subcarriers `0..m` exactly once.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use skece_core::channel::{ChannelError, CsiTrace};
use skece_core::Party;
use thiserror::Error;

pub const HEADER: [&str; 4] = ["time", "subcarrier", "amplitude_db", "phase_rad"];

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("header must be {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error("line {line}: time {time} is earlier than the previous instant")]
    Decreasing { line: u64, time: f64 },
    #[error("line {line}: expected subcarrier {expected}, found {found}")]
    SubcarrierOrder { line: u64, expected: usize, found: usize },
    #[error("instant at line {line} lists {found} subcarriers, earlier instants list {expected}")]
    InconsistentSubcarriers { line: u64, expected: usize, found: usize },
    #[error("trace file has no rows")]
    Empty,
    #[error(transparent)]
    Trace(#[from] ChannelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Row {
    time: f64,
    subcarrier: usize,
    amplitude_db: f64,
    phase_rad: f64,
}

struct Builder {
    times: Vec<f64>,
    amplitude: Vec<Vec<f64>>,
    phase: Vec<Vec<f64>>,
    /// Subcarriers seen at the current instant.
    current: usize,
    /// Subcarrier count fixed by the first instant.
    m: Option<usize>,
    instant_line: u64,
}

impl Builder {
    fn close_instant(&mut self, line: u64) -> Result<(), TraceIoError> {
        match self.m {
            None => self.m = Some(self.current),
            Some(m) if m != self.current => {
                return Err(TraceIoError::InconsistentSubcarriers {
                    line,
                    expected: m,
                    found: self.current,
                })
            }
            _ => {}
        }
        Ok(())
    }

    fn push(&mut self, row: Row, line: u64) -> Result<(), TraceIoError> {
        let new_instant = self.times.last().is_none_or(|&t| row.time != t);
        if new_instant {
            if let Some(&t) = self.times.last() {
                if row.time < t {
                    return Err(TraceIoError::Decreasing { line, time: row.time });
                }
                self.close_instant(self.instant_line)?;
            }
            self.times.push(row.time);
            self.current = 0;
            self.instant_line = line;
        }
        if row.subcarrier != self.current {
            return Err(TraceIoError::SubcarrierOrder {
                line,
                expected: self.current,
                found: row.subcarrier,
            });
        }
        if self.m.is_some_and(|m| self.current >= m) {
            return Err(TraceIoError::InconsistentSubcarriers {
                line,
                expected: self.m.unwrap_or(0),
                found: self.current + 1,
            });
        }
        if self.m.is_none() {
            self.amplitude.push(Vec::new());
            self.phase.push(Vec::new());
        }
        self.amplitude[self.current].push(row.amplitude_db);
        self.phase[self.current].push(row.phase_rad);
        self.current += 1;
        Ok(())
    }
}

pub fn read_trace<R: Read>(input: R, party: Party) -> Result<CsiTrace, TraceIoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(TraceIoError::Header {
            expected: HEADER.join(","),
            found: header.join(","),
        });
    }
    let mut b = Builder {
        times: Vec::new(),
        amplitude: Vec::new(),
        phase: Vec::new(),
        current: 0,
        m: None,
        instant_line: 0,
    };
    let mut last_line = 1;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            TraceIoError::Malformed {
                line,
                reason: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: Row = rec.deserialize(None).map_err(|e| TraceIoError::Malformed {
            line,
            reason: e.to_string(),
        })?;
        b.push(row, line)?;
        last_line = line;
    }
    if b.times.is_empty() {
        return Err(TraceIoError::Empty);
    }
    b.close_instant(last_line)?;
    Ok(CsiTrace::new(party, b.times, b.amplitude, b.phase)?)
}

pub fn load_trace(path: &Path, party: Party) -> Result<CsiTrace, TraceIoError> {
    let f = File::open(path).map_err(|source| TraceIoError::Open {
        path: path.display().to_string(),
        source,
    })?;
    read_trace(f, party)
}

pub fn write_trace<W: Write>(out: W, trace: &CsiTrace) -> Result<(), TraceIoError> {
    // Header comes from the row fields, which follow HEADER.
    let mut w = csv::Writer::from_writer(out);
    for s in trace.samples() {
        w.serialize(Row {
            time: s.time,
            subcarrier: s.subcarrier,
            amplitude_db: s.amplitude_db,
            phase_rad: s.phase_rad,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace(path: &Path, trace: &CsiTrace) -> Result<(), TraceIoError> {
    let f = File::create(path).map_err(|source| TraceIoError::Open {
        path: path.display().to_string(),
        source,
    })?;
    write_trace(std::io::BufWriter::new(f), trace)
}
