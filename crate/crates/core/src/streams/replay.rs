//! Variable-rate replay of recorded event streams.

use std::fmt;
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::streams::engine::EventSink;
use crate::streams::event::Event;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplayRate {
    /// No waiting; logical time still comes from the timestamps.
    Max,
    /// Wall-clock speed-up: inter-event gaps are divided by this factor.
    Factor(f64),
}

impl FromStr for ReplayRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(ReplayRate::Max);
        }
        match s.parse::<f64>() {
            Ok(r) if r.is_finite() && r > 0.0 => Ok(ReplayRate::Factor(r)),
            _ => Err(Error::InvalidConfig(format!(
                "replay rate must be a positive number or \"max\", got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for ReplayRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayRate::Max => f.write_str("max"),
            ReplayRate::Factor(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReplayStats {
    pub delivered: usize,
    pub elapsed: Duration,
}

/// Delivers `events` to `sink` in order, pacing them by their timestamps.
///
/// A sink failure stops the replay and is reported as
/// [`Error::SinkDisconnected`] with the number of events still undelivered.
pub fn replay<S: EventSink + ?Sized>(events: &[Event], rate: ReplayRate, sink: &mut S) -> Result<ReplayStats> {
    if let ReplayRate::Factor(r) = rate {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidConfig(format!("replay rate {r} must be positive")));
        }
    }
    if let Some(i) = events.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::parse(i + 2, "timestamps must be non-decreasing"));
    }
    let start = Instant::now();
    let origin = events.first().map_or(0.0, |e| e.timestamp);
    for (i, e) in events.iter().enumerate() {
        if let ReplayRate::Factor(r) = rate {
            let due = start + Duration::from_secs_f64((e.timestamp - origin) / r);
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        if let Err(err) = sink.deliver(e) {
            tracing::warn!(error = %err, delivered = i, "replay sink failed");
            return Err(Error::SinkDisconnected {
                delivered: i,
                undelivered: events.len() - i,
            });
        }
    }
    Ok(ReplayStats {
        delivered: events.len(),
        elapsed: start.elapsed(),
    })
}
