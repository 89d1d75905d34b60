//! Synthetic port scan session.
//!
//! Emulates an interactive session on a monitored host: remote login, an
//! ICMP ping sweep, a quiet pause, a file transfer and logout. Per-second
//! traffic counters are turned into signals with [`SignalDeriver`]; antigen
//! events stand in for system calls of the processes involved, labelled by
//! pid and tagged with the process name.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::cell::AntigenLabel;
use crate::error::{Error, Result};
use crate::streams::event::Event;
use crate::streams::signals::{SignalConstants, SignalDeriver, TrafficSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Login,
    Scan,
    Pause,
    Transfer,
    Close,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Login, Phase::Scan, Phase::Pause, Phase::Transfer, Phase::Close];

    fn index(self) -> usize {
        self as usize
    }
}

/// What a process's system call volume follows within a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Constant,
    ScanTraffic,
    TransferTraffic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessActivity {
    pub name: String,
    pub pids: Vec<String>,
    /// Mean antigen per second in each phase, indexed like [`Phase::ALL`].
    pub rates: [f64; 5],
    pub modulation: Modulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InflammationMode {
    UserPresent,
    UserAbsent,
}

pub const SSH_DAEMON: &str = "ssh-daemon";
pub const SHELL: &str = "shell";
pub const SCANNER: &str = "scanner";
pub const FORWARD_AGENT: &str = "forward-agent";
pub const FILE_TRANSFER: &str = "file-transfer";

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Seconds spent in each phase, indexed like [`Phase::ALL`].
    pub durations: [u32; 5],
    pub address_count: u32,
    pub fraction_unreachable: f64,
    /// Probes sent to every address (ICMP echo plus TCP ACK).
    pub probes_per_address: u32,
    /// Extra probe rounds for addresses that never answer.
    pub retries: u32,
    /// Chance that a scan second is a burst rather than a wait for replies.
    pub burst_probability: f64,
    pub baseline_pps: f64,
    /// Extra packets per second of interactive ssh traffic during login and close.
    pub interactive_pps: f64,
    pub transfer_bytes: f64,
    pub transfer_packet_bytes: f64,
    /// Acknowledgement packets per data packet of the transfer.
    pub transfer_ack_ratio: f64,
    pub constants: SignalConstants,
    pub inflammation: InflammationMode,
    pub processes: Vec<ProcessActivity>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let p = |name: &str, pids: &[&str], rates: [f64; 5], modulation| ProcessActivity {
            name: name.to_string(),
            pids: pids.iter().map(|s| s.to_string()).collect(),
            rates,
            modulation,
        };
        ScenarioConfig {
            durations: [20, 20, 30, 20, 10],
            address_count: 1000,
            fraction_unreachable: 0.75,
            probes_per_address: 2,
            retries: 2,
            burst_probability: 0.5,
            baseline_pps: 8.0,
            interactive_pps: 10.0,
            transfer_bytes: 3.3e6,
            transfer_packet_bytes: 1448.0,
            transfer_ack_ratio: 0.5,
            constants: SignalConstants::default(),
            inflammation: InflammationMode::UserPresent,
            processes: vec![
                p(
                    SSH_DAEMON,
                    &["2201", "2202", "2203"],
                    [12.0, 0.2, 0.2, 0.2, 10.0],
                    Modulation::Constant,
                ),
                p(SHELL, &["2210"], [3.0, 2.0, 2.0, 3.0, 3.0], Modulation::Constant),
                p(
                    FORWARD_AGENT,
                    &["2215"],
                    [4.0, 4.0, 4.0, 4.0, 4.0],
                    Modulation::Constant,
                ),
                p(SCANNER, &["2230"], [0.0, 150.0, 0.0, 0.0, 0.0], Modulation::ScanTraffic),
                p(
                    FILE_TRANSFER,
                    &["2240"],
                    [0.0, 0.0, 0.0, 15.0, 0.0],
                    Modulation::TransferTraffic,
                ),
            ],
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("scenario: {m}")));
        if self.durations.contains(&0) {
            return bad("phase durations must be positive");
        }
        for f in [self.fraction_unreachable, self.burst_probability] {
            if !(0.0..=1.0).contains(&f) {
                return bad("fractions must lie in [0, 1]");
            }
        }
        let non_negative = [
            self.baseline_pps,
            self.interactive_pps,
            self.transfer_bytes,
            self.transfer_ack_ratio,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("traffic parameters must be non-negative");
        }
        if self.transfer_packet_bytes.is_nan() || self.transfer_packet_bytes <= 0.0 {
            return bad("transfer packet size must be positive");
        }
        for p in &self.processes {
            if p.pids.is_empty() || p.rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return bad(&format!("process {} needs pids and non-negative rates", p.name));
            }
            for pid in &p.pids {
                AntigenLabel::new(pid)?;
            }
        }
        self.constants.validate()
    }

    pub fn total_seconds(&self) -> u32 {
        self.durations.iter().sum()
    }

    pub fn phase_at(&self, second: u32) -> Option<Phase> {
        let mut end = 0;
        for phase in Phase::ALL {
            end += self.durations[phase.index()];
            if second < end {
                return Some(phase);
            }
        }
        None
    }

    fn phase_range(&self, phase: Phase) -> std::ops::Range<usize> {
        let start: u32 = self.durations[..phase.index()].iter().sum();
        start as usize..(start + self.durations[phase.index()]) as usize
    }

    /// Maps every antigen label (pid) to its process name.
    pub fn process_groups(&self) -> Vec<(String, Vec<AntigenLabel>)> {
        self.processes
            .iter()
            .map(|p| {
                let labels = p
                    .pids
                    .iter()
                    .map(|pid| AntigenLabel::new(pid).expect("validated"))
                    .collect();
                (p.name.clone(), labels)
            })
            .collect()
    }
}

/// Per-second traffic and the signals derived from it.
#[derive(Debug, Clone)]
pub struct ScenarioTrace {
    pub traffic: Vec<TrafficSample>,
    pub phases: Vec<Phase>,
    pub events: Vec<Event>,
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

/// Spreads `total` over `weights`, scaled to sum to `total`.
fn spread(total: f64, weights: &[f64]) -> Vec<f64> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0.0; weights.len()];
    }
    weights.iter().map(|w| total * w / sum).collect()
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Vec<Event>> {
    Ok(generate_trace(cfg)?.events)
}

/// Builds the whole session: one signal event at the start of every second
/// followed by that second's antigen events, in timestamp order.
pub fn generate_trace(cfg: &ScenarioConfig) -> Result<ScenarioTrace> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = cfg.total_seconds() as usize;
    let phases: Vec<Phase> = (0..total as u32).map(|t| cfg.phase_at(t).expect("in range")).collect();

    // Scan: bursts of probes alternate with waits for replies; unreachable
    // errors come back one second after the probes that caused them.
    let scan = cfg.phase_range(Phase::Scan);
    let scan_weights: Vec<f64> = scan
        .clone()
        .map(|_| {
            if rng.random::<f64>() < cfg.burst_probability {
                rng.random_range(0.7..1.3)
            } else {
                rng.random_range(0.0..0.08)
            }
        })
        .collect();
    let addresses = cfg.address_count as f64;
    let unreachable_hosts = addresses * cfg.fraction_unreachable;
    let probes = cfg.probes_per_address as f64;
    let scan_total = addresses * probes + unreachable_hosts * probes * cfg.retries as f64;
    let scan_pps = spread(scan_total, &scan_weights);
    let mut scan_packets = vec![0.0; total];
    let mut unreachable = vec![0.0; total];
    let error_share = unreachable_hosts * probes * (1.0 + cfg.retries as f64) / scan_total.max(1.0);
    for (k, t) in scan.clone().enumerate() {
        scan_packets[t] = scan_pps[k].round();
        if t + 1 < total {
            unreachable[t + 1] = (scan_pps[k] * error_share).round();
        }
    }

    // Transfer: half-rate first and last seconds, steady in between.
    let transfer = cfg.phase_range(Phase::Transfer);
    let n = transfer.len();
    let transfer_weights: Vec<f64> = (0..n)
        .map(|i| if n > 2 && (i == 0 || i == n - 1) { 0.5 } else { 1.0 })
        .map(|w| w * rng.random_range(0.95..1.05))
        .collect();
    let transfer_total = (cfg.transfer_bytes / cfg.transfer_packet_bytes).ceil() * (1.0 + cfg.transfer_ack_ratio);
    let transfer_pps = spread(transfer_total, &transfer_weights);
    let mut transfer_packets = vec![0.0; total];
    for (k, t) in transfer.clone().enumerate() {
        transfer_packets[t] = transfer_pps[k].round();
    }

    let mean_of = |v: &[f64], r: &std::ops::Range<usize>| {
        if r.is_empty() {
            0.0
        } else {
            v[r.clone()].iter().sum::<f64>() / r.len() as f64
        }
    };
    let scan_mean = mean_of(&scan_packets, &scan);
    let transfer_mean = mean_of(&transfer_packets, &transfer);

    let user_absent = cfg.inflammation == InflammationMode::UserAbsent;
    let mut deriver = SignalDeriver::new(cfg.constants, user_absent)?;
    let labels: Vec<Vec<AntigenLabel>> = cfg
        .processes
        .iter()
        .map(|p| {
            p.pids
                .iter()
                .map(|pid| AntigenLabel::new(pid).expect("validated"))
                .collect()
        })
        .collect();

    let mut traffic = Vec::with_capacity(total);
    let mut events = Vec::new();
    for t in 0..total {
        let phase = phases[t];
        let interactive = match phase {
            Phase::Login | Phase::Close => poisson(&mut rng, cfg.interactive_pps) as f64,
            _ => 0.0,
        };
        let sample = TrafficSample {
            packets: poisson(&mut rng, cfg.baseline_pps) as f64 + interactive + scan_packets[t] + transfer_packets[t],
            unreachable: unreachable[t],
        };
        traffic.push(sample);
        let signals = deriver.push(sample)?;
        events.push(Event::signals(t as f64, signals)?);

        let mut second: Vec<(f64, usize, usize)> = Vec::new();
        for (pi, p) in cfg.processes.iter().enumerate() {
            let base = p.rates[phase.index()];
            let scale = match p.modulation {
                Modulation::Constant => 1.0,
                Modulation::ScanTraffic if scan_mean > 0.0 => scan_packets[t] / scan_mean,
                Modulation::TransferTraffic if transfer_mean > 0.0 => transfer_packets[t] / transfer_mean,
                _ => 0.0,
            };
            for _ in 0..poisson(&mut rng, base * scale) {
                let pid = rng.random_range(0..p.pids.len());
                second.push((t as f64 + rng.random::<f64>(), pi, pid));
            }
        }
        second.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (ts, pi, pid) in second {
            events.push(Event::antigen(
                ts,
                labels[pi][pid].clone(),
                cfg.processes[pi].name.clone(),
            )?);
        }
    }
    Ok(ScenarioTrace {
        traffic,
        phases,
        events,
    })
}
