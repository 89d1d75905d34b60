//! Per-second traffic counters to signal concentrations.

use std::collections::VecDeque;

use crate::cell::SignalVector;
use crate::error::{Error, Result};

/// Traffic counters for one second.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrafficSample {
    pub packets: f64,
    pub unreachable: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalConstants {
    /// PAMP per ICMP destination-unreachable error per second.
    pub k_pamp: f64,
    /// Danger per outgoing packet per second.
    pub k_danger: f64,
    /// Safe lost per packet/s of moving-average change.
    pub k_safe: f64,
    pub safe_max: f64,
    /// Moving-average window, in seconds.
    pub window: usize,
}

impl Default for SignalConstants {
    fn default() -> Self {
        SignalConstants {
            k_pamp: 2.0,
            k_danger: 2.0,
            k_safe: 1.0,
            safe_max: 100.0,
            window: 2,
        }
    }
}

impl SignalConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.k_pamp, self.k_danger, self.k_safe, self.safe_max]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !ok || self.window == 0 {
            return Err(Error::InvalidConfig(format!("bad signal constants {self:?}")));
        }
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Signals for the most recent second.
///
/// `packet_history` holds packets/s for consecutive seconds, oldest first,
/// ending with the current second. The moving average at a second covers up
/// to `window` samples; its change against the previous second's average
/// drives the safe signal down. With a single sample the change is zero.
pub fn derive_signals(
    packet_history: &[f64],
    unreachable: f64,
    user_absent: bool,
    k: &SignalConstants,
) -> Result<SignalVector> {
    let current = *packet_history
        .last()
        .ok_or_else(|| Error::InvalidConfig("empty packet history".into()))?;
    if packet_history.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || !(unreachable.is_finite() && unreachable >= 0.0)
    {
        return Err(Error::InvalidSignal("traffic counters must be non-negative".into()));
    }
    let n = packet_history.len();
    let delta = if n < 2 {
        0.0
    } else {
        let now = &packet_history[n.saturating_sub(k.window)..];
        let before = &packet_history[(n - 1).saturating_sub(k.window)..n - 1];
        mean(now) - mean(before)
    };
    SignalVector::new(
        k.k_pamp * unreachable,
        k.k_danger * current,
        (k.safe_max - k.k_safe * delta.abs()).max(0.0),
        if user_absent { 1.0 } else { 0.0 },
    )
}

/// Streaming wrapper around [`derive_signals`] keeping the needed history.
#[derive(Debug, Clone)]
pub struct SignalDeriver {
    constants: SignalConstants,
    user_absent: bool,
    history: VecDeque<f64>,
}

impl SignalDeriver {
    pub fn new(constants: SignalConstants, user_absent: bool) -> Result<Self> {
        constants.validate()?;
        Ok(SignalDeriver {
            constants,
            user_absent,
            history: VecDeque::with_capacity(constants.window + 1),
        })
    }

    pub fn push(&mut self, sample: TrafficSample) -> Result<SignalVector> {
        self.history.push_back(sample.packets);
        if self.history.len() > self.constants.window + 1 {
            self.history.pop_front();
        }
        derive_signals(
            self.history.make_contiguous(),
            sample.unreachable,
            self.user_absent,
            &self.constants,
        )
    }
}
