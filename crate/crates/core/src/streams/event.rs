//! Timestamped input events and the line-oriented event log.
//!
//! One event per line, fields separated by a single tab:
//!
//! ```text
//! <timestamp>\tS\t<pamp>\t<danger>\t<safe>\t<inflammation>
//! <timestamp>\tA\t<label>\t<process>
//! ```
//!
//! Numbers use the shortest representation that parses back to the same
//! `f64`, so a write/read cycle is bit-exact.

use std::cmp::Ordering;
use std::io::{BufRead, Write};

use crate::cell::{AntigenLabel, SignalVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Signals(SignalVector),
    Antigen { label: AntigenLabel, process: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub timestamp: f64,
    pub payload: Payload,
}

fn check_timestamp(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("timestamp {t} must be finite and >= 0")))
    }
}

fn check_process(p: &str) -> Result<()> {
    if p.is_empty() || p.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
        Err(Error::InvalidConfig(format!("invalid process name {p:?}")))
    } else {
        Ok(())
    }
}

impl Event {
    pub fn signals(timestamp: f64, s: SignalVector) -> Result<Self> {
        check_timestamp(timestamp)?;
        s.validate()?;
        Ok(Event {
            timestamp,
            payload: Payload::Signals(s),
        })
    }

    pub fn antigen(timestamp: f64, label: AntigenLabel, process: impl Into<String>) -> Result<Self> {
        check_timestamp(timestamp)?;
        let process = process.into();
        check_process(&process)?;
        Ok(Event {
            timestamp,
            payload: Payload::Antigen { label, process },
        })
    }

    /// Logical second (tick) the event belongs to.
    pub fn second(&self) -> u64 {
        self.timestamp.floor() as u64
    }

    pub fn signal_vector(&self) -> Option<SignalVector> {
        match self.payload {
            Payload::Signals(s) => Some(s),
            Payload::Antigen { .. } => None,
        }
    }

    pub fn is_signal(&self) -> bool {
        matches!(self.payload, Payload::Signals(_))
    }

    pub fn to_line(&self) -> String {
        match &self.payload {
            Payload::Signals(s) => format!(
                "{}\tS\t{}\t{}\t{}\t{}",
                self.timestamp, s.pamp, s.danger, s.safe, s.inflammation
            ),
            Payload::Antigen { label, process } => {
                format!("{}\tA\t{}\t{}", self.timestamp, label, process)
            }
        }
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let err = |m: String| Error::parse(line_no, m);
        let fields: Vec<&str> = line.split('\t').collect();
        let num = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}"))) };
        let timestamp = num(fields[0])?;
        let event = match (fields.get(1).copied(), fields.len()) {
            (Some("S"), 6) => {
                let s = SignalVector {
                    pamp: num(fields[2])?,
                    danger: num(fields[3])?,
                    safe: num(fields[4])?,
                    inflammation: num(fields[5])?,
                };
                Event::signals(timestamp, s)
            }
            (Some("A"), 4) => {
                AntigenLabel::new(fields[2]).and_then(|label| Event::antigen(timestamp, label, fields[3]))
            }
            (Some(kind @ ("S" | "A")), n) => return Err(err(format!("wrong field count {n} for kind {kind}"))),
            (kind, _) => return Err(err(format!("unknown event kind {kind:?}"))),
        };
        event.map_err(|e| err(e.to_string()))
    }

    /// Total order used to apply events that share a tick: timestamp, then
    /// signals before antigen, then payload.
    pub fn canonical_cmp(&self, other: &Event) -> Ordering {
        self.timestamp
            .total_cmp(&other.timestamp)
            .then_with(|| match (&self.payload, &other.payload) {
                (Payload::Signals(a), Payload::Signals(b)) => a
                    .pamp
                    .total_cmp(&b.pamp)
                    .then(a.danger.total_cmp(&b.danger))
                    .then(a.safe.total_cmp(&b.safe))
                    .then(a.inflammation.total_cmp(&b.inflammation)),
                (Payload::Signals(_), Payload::Antigen { .. }) => Ordering::Less,
                (Payload::Antigen { .. }, Payload::Signals(_)) => Ordering::Greater,
                (Payload::Antigen { label: la, process: pa }, Payload::Antigen { label: lb, process: pb }) => {
                    la.cmp(lb).then_with(|| pa.cmp(pb))
                }
            })
    }
}

pub fn write_log<W: Write>(mut out: W, events: &[Event]) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for (i, e) in events.iter().enumerate() {
        if e.timestamp < last {
            return Err(Error::parse(i + 1, "timestamps must be non-decreasing"));
        }
        last = e.timestamp;
        writeln!(out, "{}", e.to_line())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_log<R: BufRead>(input: R) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let e = Event::parse_line(&line, i + 1)?;
        if e.timestamp < last {
            return Err(Error::parse(
                i + 1,
                format!("timestamp {} precedes {}", e.timestamp, last),
            ));
        }
        last = e.timestamp;
        events.push(e);
    }
    Ok(events)
}
