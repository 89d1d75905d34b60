//! The tissue compartment and the dendritic cell population living in it.
//!
//! One call to [`Tissue::run_tick`] is one cell cycle: every cell, visited in
//! a freshly shuffled order, may sample one antigen-store slot and then fuses
//! the current signals. Cells that reach their migration threshold leave the
//! pool, emit a [`MigrationRecord`] and are replaced by a fresh cell, so the
//! pool size never changes. Signals decay completely at the end of a tick.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cell::{AntigenLabel, CellId, Context, CytokineState, DendriticCell, SignalVector, WeightMatrix};
use crate::error::{Error, Result};

/// How each cell's migration threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    Fixed(f64),
    /// Drawn uniformly from the closed range `[lo, hi]`, independently per cell.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl ThresholdMode {
    fn validate(&self) -> Result<()> {
        match *self {
            ThresholdMode::Fixed(v) if v.is_finite() && v > 0.0 => Ok(()),
            ThresholdMode::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi => Ok(()),
            other => Err(Error::InvalidConfig(format!("bad migration threshold {other}"))),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            ThresholdMode::Fixed(v) => v,
            ThresholdMode::Uniform { lo, hi } if lo == hi => lo,
            ThresholdMode::Uniform { lo, hi } => rng.random_range(lo..=hi),
        }
    }
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMode::Fixed(v) => write!(f, "{v}"),
            ThresholdMode::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
        }
    }
}

impl FromStr for ThresholdMode {
    type Err = Error;

    /// Accepts `10`, `uniform(5,15)` or `var` (shorthand for `uniform(5,15)`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidConfig(format!("cannot parse threshold {s:?}"));
        let mode = if s == "var" {
            ThresholdMode::Uniform { lo: 5.0, hi: 15.0 }
        } else if let Some(inner) = s.strip_prefix("uniform(").and_then(|r| r.strip_suffix(')')) {
            let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
            ThresholdMode::Uniform {
                lo: lo.trim().parse().map_err(|_| bad())?,
                hi: hi.trim().parse().map_err(|_| bad())?,
            }
        } else {
            ThresholdMode::Fixed(s.parse().map_err(|_| bad())?)
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// Tissue server and population parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationConfig {
    pub num_cells: usize,
    pub cell_antigen_capacity: usize,
    pub tissue_antigen_capacity: usize,
    pub sampling_probability: f64,
    /// How many times one deposited antigen may be sampled before its slot clears.
    pub sample_multiplicity: u32,
    pub threshold: ThresholdMode,
    pub weights: WeightMatrix,
    pub seed: u64,
}

impl PopulationConfig {
    /// Breast cancer column of the tissue parameter table.
    pub fn breast_cancer() -> Self {
        PopulationConfig {
            num_cells: 100,
            cell_antigen_capacity: 50,
            tissue_antigen_capacity: 1,
            sampling_probability: 0.10,
            sample_multiplicity: 10,
            threshold: ThresholdMode::Uniform { lo: 5.0, hi: 15.0 },
            weights: WeightMatrix::default(),
            seed: 0,
        }
    }

    /// Port scan column of the tissue parameter table. The threshold range is
    /// not part of that table; see `portscan::PORTSCAN_THRESHOLD`.
    pub fn portscan() -> Self {
        PopulationConfig {
            num_cells: 500,
            cell_antigen_capacity: 50,
            tissue_antigen_capacity: 500,
            sampling_probability: 1.0,
            sample_multiplicity: 1,
            threshold: crate::portscan::PORTSCAN_THRESHOLD,
            weights: WeightMatrix::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_cells", self.num_cells),
            ("cell_antigen_capacity", self.cell_antigen_capacity),
            ("tissue_antigen_capacity", self.tissue_antigen_capacity),
            ("sample_multiplicity", self.sample_multiplicity as usize),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.sampling_probability) {
            return Err(Error::InvalidConfig(format!(
                "sampling probability {} outside [0, 1]",
                self.sampling_probability
            )));
        }
        self.threshold.validate()
    }
}

#[derive(Debug, Clone)]
struct Slot {
    label: AntigenLabel,
    remaining: u32,
}

/// Fixed-capacity antigen store plus the current signal levels.
#[derive(Debug, Clone)]
pub struct TissueCompartment {
    slots: Vec<Option<Slot>>,
    free: Vec<usize>,
    multiplicity: u32,
    signals: SignalVector,
    clock: u64,
}

impl TissueCompartment {
    pub fn new(capacity: usize, multiplicity: u32) -> Result<Self> {
        if capacity == 0 || multiplicity == 0 {
            return Err(Error::InvalidConfig(
                "tissue capacity and sample multiplicity must be positive".into(),
            ));
        }
        Ok(TissueCompartment {
            slots: vec![None; capacity],
            free: (0..capacity).rev().collect(),
            multiplicity,
            signals: SignalVector::ZERO,
            clock: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn occupied(&self) -> usize {
        self.slots.len() - self.free.len()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn signals(&self) -> SignalVector {
        self.signals
    }

    /// Stored labels in slot order.
    pub fn labels(&self) -> impl Iterator<Item = &AntigenLabel> {
        self.slots.iter().flatten().map(|s| &s.label)
    }

    /// Places `label` in a free slot, or overwrites a uniformly random slot
    /// when the store is full. Returns the overwritten label, if any.
    pub fn deposit<R: Rng>(&mut self, label: AntigenLabel, rng: &mut R) -> Option<AntigenLabel> {
        let slot = Slot {
            label,
            remaining: self.multiplicity,
        };
        if let Some(i) = self.free.pop() {
            self.slots[i] = Some(slot);
            None
        } else {
            let i = rng.random_range(0..self.slots.len());
            self.slots[i].replace(slot).map(|old| old.label)
        }
    }

    /// Full replacement of the current signal levels.
    pub fn set_signals(&mut self, s: SignalVector) -> Result<()> {
        s.validate()?;
        self.signals = s;
        Ok(())
    }

    fn peek(&self, slot: usize) -> Option<&AntigenLabel> {
        self.slots[slot].as_ref().map(|s| &s.label)
    }

    fn take(&mut self, slot: usize) -> Option<AntigenLabel> {
        let entry = self.slots[slot].as_mut()?;
        entry.remaining -= 1;
        if entry.remaining == 0 {
            self.free.push(slot);
            self.slots[slot].take().map(|s| s.label)
        } else {
            Some(entry.label.clone())
        }
    }

    fn end_tick(&mut self) {
        self.clock += 1;
        self.signals = SignalVector::ZERO;
    }
}

/// One migration event, as written to the migration log.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationRecord {
    pub tick: u64,
    pub cell_id: CellId,
    pub context: Context,
    pub antigens: Vec<AntigenLabel>,
    pub cytokines: CytokineState,
    pub threshold: f64,
}

impl MigrationRecord {
    /// `tick  cell_id  context  antigens  csm  semi  mat  threshold`, tab
    /// separated; antigens comma separated, `-` when empty.
    pub fn to_line(&self) -> String {
        let antigens = if self.antigens.is_empty() {
            "-".to_string()
        } else {
            self.antigens
                .iter()
                .map(AntigenLabel::as_str)
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.tick,
            self.cell_id,
            self.context,
            antigens,
            self.cytokines.csm,
            self.cytokines.semi,
            self.cytokines.mat,
            self.threshold
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 {
            return Err(Error::parse(
                line_no,
                format!("expected 8 fields, got {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad number {:?}", fields[i])))
        };
        let antigens = if fields[3] == "-" {
            Vec::new()
        } else {
            fields[3]
                .split(',')
                .map(AntigenLabel::new)
                .collect::<Result<_>>()
                .map_err(|e| Error::parse(line_no, e.to_string()))?
        };
        Ok(MigrationRecord {
            tick: fields[0].parse().map_err(|_| Error::parse(line_no, "bad tick"))?,
            cell_id: fields[1].parse().map_err(|_| Error::parse(line_no, "bad cell id"))?,
            context: fields[2]
                .parse()
                .map_err(|e: Error| Error::parse(line_no, e.to_string()))?,
            antigens,
            cytokines: CytokineState {
                csm: num(4)?,
                semi: num(5)?,
                mat: num(6)?,
            },
            threshold: num(7)?,
        })
    }
}

pub fn write_migration_log<W: Write>(mut out: W, records: &[MigrationRecord]) -> Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_line())?;
    }
    Ok(())
}

pub fn read_migration_log<R: BufRead>(input: R) -> Result<Vec<MigrationRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        records.push(MigrationRecord::parse_line(&line, i + 1)?);
    }
    Ok(records)
}

/// Counters kept over a tissue's lifetime.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TissueStats {
    pub deposits: u64,
    pub overwrites: u64,
    pub ingestions: u64,
    pub refused_full: u64,
    pub migrations: u64,
}

/// Compartment, cell pool and the single random generator driving both.
#[derive(Debug, Clone)]
pub struct Tissue {
    config: PopulationConfig,
    compartment: TissueCompartment,
    pool: Vec<DendriticCell>,
    next_id: CellId,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    stats: TissueStats,
}

impl Tissue {
    pub fn new(config: PopulationConfig) -> Result<Self> {
        config.validate()?;
        let compartment = TissueCompartment::new(config.tissue_antigen_capacity, config.sample_multiplicity)?;
        let mut tissue = Tissue {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            compartment,
            pool: Vec::with_capacity(config.num_cells),
            next_id: 0,
            order: (0..config.num_cells).collect(),
            stats: TissueStats::default(),
            config,
        };
        for _ in 0..tissue.config.num_cells {
            let cell = tissue.fresh_cell();
            tissue.pool.push(cell);
        }
        Ok(tissue)
    }

    fn fresh_cell(&mut self) -> DendriticCell {
        let threshold = self.config.threshold.draw(&mut self.rng);
        let id = self.next_id;
        self.next_id += 1;
        DendriticCell::new(id, threshold, self.config.cell_antigen_capacity).expect("config validated at construction")
    }

    pub fn config(&self) -> &PopulationConfig {
        &self.config
    }

    pub fn compartment(&self) -> &TissueCompartment {
        &self.compartment
    }

    pub fn pool(&self) -> &[DendriticCell] {
        &self.pool
    }

    pub fn stats(&self) -> TissueStats {
        self.stats
    }

    pub fn clock(&self) -> u64 {
        self.compartment.clock
    }

    pub fn deposit_antigen(&mut self, label: AntigenLabel) -> Option<AntigenLabel> {
        self.stats.deposits += 1;
        let evicted = self.compartment.deposit(label, &mut self.rng);
        if evicted.is_some() {
            self.stats.overwrites += 1;
        }
        evicted
    }

    pub fn set_signals(&mut self, s: SignalVector) -> Result<()> {
        self.compartment.set_signals(s)
    }

    /// One cell cycle. Sampling happens before the cytokine update.
    pub fn run_tick(&mut self) -> Vec<MigrationRecord> {
        let mut records = Vec::new();
        let signals = self.compartment.signals;
        let weights = self.config.weights;
        let p = self.config.sampling_probability;
        let capacity = self.compartment.capacity();
        let tick = self.compartment.clock;

        self.order.shuffle(&mut self.rng);
        for k in 0..self.order.len() {
            let idx = self.order[k];
            if self.rng.random::<f64>() < p {
                let slot = self.rng.random_range(0..capacity);
                if self.compartment.peek(slot).is_some() {
                    if self.pool[idx].is_full() {
                        self.stats.refused_full += 1;
                    } else if let Some(label) = self.compartment.take(slot) {
                        self.pool[idx]
                            .ingest(label)
                            .expect("pool cells are immature and not full");
                        self.stats.ingestions += 1;
                    }
                }
            }
            let migrated = self.pool[idx]
                .update(&signals, &weights)
                .expect("pool cells are immature");
            if migrated {
                let fresh = self.fresh_cell();
                let done = std::mem::replace(&mut self.pool[idx], fresh);
                let context = done.present().expect("cell migrated").0;
                records.push(MigrationRecord {
                    tick,
                    cell_id: done.id(),
                    context,
                    cytokines: done.cytokines(),
                    threshold: done.migration_threshold(),
                    antigens: done.into_antigen(),
                });
            }
        }
        self.stats.migrations += records.len() as u64;
        self.compartment.end_tick();
        records
    }
}
