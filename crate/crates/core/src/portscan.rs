//! Port scan detection experiments over the synthetic session.
//!
//! Four signal combinations are compared. Each runs the same set of
//! repeats: repeat `r` regenerates the session from a seed derived from the
//! base seed and `r`, so the experiments see identical traffic and differ
//! only in the signals the cells receive and in their weights.

use std::collections::BTreeMap;
use std::fmt;

use crate::analysis::{aggregate, group_counts, mean_std, paired_t_test, MagMode, PairedTTest, RunSummary};
use crate::cell::{Input, Output, SignalVector};
use crate::error::{Error, Result};
use crate::seeds;
use crate::streams::scenario::{generate_scenario, InflammationMode, ScenarioConfig, FILE_TRANSFER, SCANNER};
use crate::streams::{Event, Payload, TissueEngine};
use crate::tissue::{MigrationRecord, PopulationConfig, ThresholdMode};

/// Migration threshold range for the port scan population. Calm traffic
/// adds about 22 csm per second, so cells live for roughly nine seconds.
pub const PORTSCAN_THRESHOLD: ThresholdMode = ThresholdMode::Uniform { lo: 100.0, hi: 300.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortscanExperiment {
    pub id: u8,
    pub pamp: bool,
    pub inflammation: bool,
    /// Weight of the safe signal on the mature output.
    pub safe_to_mat: f64,
}

impl fmt::Display for PortscanExperiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let signals = match (self.pamp, self.inflammation) {
            (false, _) => "danger+safe",
            (true, false) => "pamp+danger+safe",
            (true, true) => "pamp+danger+safe+inflammation",
        };
        write!(f, "experiment {} ({signals}, safe->mat {})", self.id, self.safe_to_mat)
    }
}

pub const EXPERIMENTS: [PortscanExperiment; 4] = [
    PortscanExperiment {
        id: 1,
        pamp: false,
        inflammation: false,
        safe_to_mat: -1.0,
    },
    PortscanExperiment {
        id: 2,
        pamp: true,
        inflammation: false,
        safe_to_mat: -1.0,
    },
    PortscanExperiment {
        id: 3,
        pamp: true,
        inflammation: false,
        safe_to_mat: -2.0,
    },
    PortscanExperiment {
        id: 4,
        pamp: true,
        inflammation: true,
        safe_to_mat: -2.0,
    },
];

pub fn experiment(id: u8) -> Result<PortscanExperiment> {
    EXPERIMENTS
        .iter()
        .find(|e| e.id == id)
        .copied()
        .ok_or_else(|| Error::InvalidConfig(format!("no port scan experiment {id}; expected 1-4")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortscanConfig {
    pub scenario: ScenarioConfig,
    pub population: PopulationConfig,
    pub repeats: usize,
    pub mode: MagMode,
    pub seed: u64,
}

impl Default for PortscanConfig {
    fn default() -> Self {
        PortscanConfig {
            scenario: ScenarioConfig::default(),
            population: PopulationConfig::portscan(),
            repeats: 10,
            mode: MagMode::PerRunMean,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PortscanOutcome {
    pub experiment: PortscanExperiment,
    pub summary: RunSummary,
    /// Antigen presented per migrated cell, per run.
    pub antigen_per_dc: Vec<f64>,
    /// Scanner against file transfer, over the per-run fractions.
    pub separation: Option<PairedTTest>,
    pub records: Vec<Vec<MigrationRecord>>,
}

impl PortscanOutcome {
    pub fn mean_mag(&self, process: &str) -> Option<f64> {
        let series = self.summary.group_series(process);
        (!series.is_empty()).then(|| mean_std(&series).0)
    }

    pub fn mean_antigen_per_dc(&self) -> f64 {
        mean_std(&self.antigen_per_dc).0
    }
}

const SCENARIO_STREAM: u64 = 11;
const TISSUE_STREAM: u64 = 12;

/// The session for repeat `r` as seen by experiment `exp`.
pub fn experiment_events(exp: &PortscanExperiment, cfg: &PortscanConfig, repeat: u64) -> Result<Vec<Event>> {
    let scenario = ScenarioConfig {
        seed: seeds::derive(cfg.seed, SCENARIO_STREAM, repeat),
        inflammation: if exp.inflammation {
            InflammationMode::UserAbsent
        } else {
            InflammationMode::UserPresent
        },
        ..cfg.scenario.clone()
    };
    let mut events = generate_scenario(&scenario)?;
    if !exp.pamp {
        for e in &mut events {
            if let Payload::Signals(s) = &mut e.payload {
                *s = SignalVector { pamp: 0.0, ..*s };
            }
        }
    }
    Ok(events)
}

pub fn experiment_population(exp: &PortscanExperiment, cfg: &PortscanConfig, repeat: u64) -> Result<PopulationConfig> {
    Ok(PopulationConfig {
        weights: cfg.population.weights.with(Output::Mat, Input::Safe, exp.safe_to_mat)?,
        seed: seeds::derive(cfg.seed, TISSUE_STREAM, repeat),
        ..cfg.population.clone()
    })
}

pub fn run_portscan_experiment(exp: &PortscanExperiment, cfg: &PortscanConfig) -> Result<PortscanOutcome> {
    if cfg.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be positive".into()));
    }
    let groups = cfg.scenario.process_groups();
    let mut per_run_groups = Vec::with_capacity(cfg.repeats);
    let mut antigen_per_dc = Vec::with_capacity(cfg.repeats);
    let mut all = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats as u64 {
        let events = experiment_events(exp, cfg, r)?;
        let records = TissueEngine::run(experiment_population(exp, cfg, r)?, &events)?;
        let presented: usize = records.iter().map(|m| m.antigens.len()).sum();
        antigen_per_dc.push(if records.is_empty() {
            0.0
        } else {
            presented as f64 / records.len() as f64
        });
        per_run_groups.push(group_counts(&aggregate(&records), &groups));
        all.push(records);
    }
    let pooled: Vec<MigrationRecord> = all.iter().flatten().cloned().collect();
    let summary = RunSummary {
        verdicts: aggregate(&pooled),
        per_run_groups,
        errors: None,
    };
    let separation = paired_series(&summary, SCANNER, FILE_TRANSFER).and_then(|(x, y)| paired_t_test(&x, &y).ok());
    if let Some(t) = &separation {
        tracing::info!(experiment = exp.id, diff = t.mean_difference, p = ?t.p_value, "scanner vs file transfer");
    }
    Ok(PortscanOutcome {
        experiment: *exp,
        summary,
        antigen_per_dc,
        separation,
        records: all,
    })
}

/// Per-run fractions of two groups over the runs where both were presented.
pub fn paired_series(summary: &RunSummary, a: &str, b: &str) -> Option<(Vec<f64>, Vec<f64>)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = summary
        .per_run_groups
        .iter()
        .filter_map(|g| Some((g.get(a)?.mag()?, g.get(b)?.mag()?)))
        .unzip();
    (xs.len() >= 2).then_some((xs, ys))
}

/// Per-process `%mAg` of each experiment, keyed by experiment id.
pub fn mag_matrix(outcomes: &[PortscanOutcome], mode: MagMode) -> BTreeMap<u8, BTreeMap<String, Option<f64>>> {
    outcomes
        .iter()
        .map(|o| {
            let row = o
                .summary
                .group_rows(mode)
                .into_iter()
                .map(|r| (r.name, r.mag))
                .collect();
            (o.experiment.id, row)
        })
        .collect()
}
