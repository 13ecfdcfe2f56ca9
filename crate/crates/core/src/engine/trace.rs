use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::vl::{EsId, Nanos, VlId};

/// Header line of the trace CSV format.
pub const TRACE_HEADER: &str = "time_ns,event,vl_id,src,dst,seq,latency_ns";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceKind {
    Emitted,
    Accepted,
    Rejected,
    Filtered,
    Delivered,
    DiscardedDup,
    SkippedPeriod,
}

impl TraceKind {
    pub const ALL: [TraceKind; 7] = [
        TraceKind::Emitted,
        TraceKind::Accepted,
        TraceKind::Rejected,
        TraceKind::Filtered,
        TraceKind::Delivered,
        TraceKind::DiscardedDup,
        TraceKind::SkippedPeriod,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Emitted => "emitted",
            TraceKind::Accepted => "accepted",
            TraceKind::Rejected => "rejected",
            TraceKind::Filtered => "filtered",
            TraceKind::Delivered => "delivered",
            TraceKind::DiscardedDup => "discarded_dup",
            TraceKind::SkippedPeriod => "skipped_period",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TraceKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

/// One recorded state change along a VL path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Nanos,
    pub kind: TraceKind,
    pub vl_id: VlId,
    pub src: EsId,
    pub dst: EsId,
    pub seq: u8,
    /// Delivery time minus the emission time carried by the frame.
    pub latency: Option<Nanos>,
}

impl TraceEvent {
    pub fn path(&self) -> PathKey {
        PathKey {
            vl_id: self.vl_id,
            src: self.src,
            dst: self.dst,
        }
    }

    pub fn write_csv_row<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write!(
            w,
            "{},{},{},{},{},{},",
            self.time, self.kind, self.vl_id, self.src, self.dst, self.seq
        )?;
        if let Some(l) = self.latency {
            write!(w, "{l}")?;
        }
        writeln!(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathKey {
    pub vl_id: VlId,
    pub src: EsId,
    pub dst: EsId,
}

impl fmt::Display for PathKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VL{} {}->{}", self.vl_id, self.src, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("bad header: expected `{TRACE_HEADER}`")]
    BadHeader,
    #[error("{} malformed row(s); first: {}", .0.len(), .0[0])]
    Malformed(Vec<RowError>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceLog {
    pub events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn push(&mut self, e: TraceEvent) {
        self.events.push(e);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: TraceKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for e in &self.events {
            e.write_csv_row(&mut w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::with_capacity(self.events.len() * 40 + 64);
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace rows are ASCII")
    }

    /// Parses a trace file. Every malformed row is reported with its 1-based
    /// line number.
    pub fn parse(text: &str) -> Result<TraceLog, TraceError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            None => return Err(TraceError::Empty),
            Some((_, h)) if h.trim_end_matches('\r') != TRACE_HEADER => return Err(TraceError::BadHeader),
            _ => {}
        }
        let mut events = Vec::new();
        let mut errors = Vec::new();
        for (idx, raw) in lines {
            let line = raw.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            match parse_row(line) {
                Ok(e) => events.push(e),
                Err(message) => errors.push(RowError { line: idx + 1, message }),
            }
        }
        if !errors.is_empty() {
            return Err(TraceError::Malformed(errors));
        }
        Ok(TraceLog { events })
    }
}

fn parse_row(line: &str) -> Result<TraceEvent, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 7 {
        return Err(format!("expected 7 fields, found {}", fields.len()));
    }
    fn num<T: FromStr>(name: &str, v: &str) -> Result<T, String> {
        v.parse().map_err(|_| format!("bad {name} {v:?}"))
    }
    let kind: TraceKind = fields[1]
        .parse()
        .map_err(|_| format!("unknown event {:?}", fields[1]))?;
    let latency = match fields[6] {
        "" => None,
        v => Some(num::<Nanos>("latency_ns", v)?),
    };
    if (kind == TraceKind::Delivered) != latency.is_some() {
        return Err("latency_ns must be set exactly on delivered rows".into());
    }
    Ok(TraceEvent {
        time: num("time_ns", fields[0])?,
        kind,
        vl_id: VlId(num("vl_id", fields[2])?),
        src: EsId(num("src", fields[3])?),
        dst: EsId(num("dst", fields[4])?),
        seq: num("seq", fields[5])?,
        latency,
    })
}
