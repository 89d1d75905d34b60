//! Cell-level mathematics of the dendritic cell algorithm.
//!
//! A dendritic cell accumulates three cytokine values from the signals it is
//! exposed to, collects antigen while immature, and migrates once its
//! costimulatory (csm) total reaches its migration threshold. On migration
//! it presents everything it collected in a single context, mature or
//! semi-mature, decided by whichever of the two cytokine totals is larger.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Signal concentrations seen by every cell during one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalVector {
    pub pamp: f64,
    pub danger: f64,
    pub safe: f64,
    pub inflammation: f64,
}

impl SignalVector {
    pub const ZERO: SignalVector = SignalVector {
        pamp: 0.0,
        danger: 0.0,
        safe: 0.0,
        inflammation: 0.0,
    };

    pub const MAX_INFLAMMATION: f64 = 2.0;

    pub fn new(pamp: f64, danger: f64, safe: f64, inflammation: f64) -> Result<Self> {
        let s = SignalVector {
            pamp,
            danger,
            safe,
            inflammation,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pamp", self.pamp), ("danger", self.danger), ("safe", self.safe)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidSignal(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if !(0.0..=Self::MAX_INFLAMMATION).contains(&self.inflammation) {
            return Err(Error::InvalidSignal(format!(
                "inflammation = {} outside [0, 2]",
                self.inflammation
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> SignalVector {
        SignalVector {
            pamp: self.pamp * k,
            danger: self.danger * k,
            safe: self.safe * k,
            inflammation: self.inflammation,
        }
    }
}

/// Input signal feeding a weight column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    Pamp,
    Danger,
    Safe,
}

/// Cytokine produced by a weight row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    Csm,
    Semi,
    Mat,
}

impl Output {
    pub const ALL: [Output; 3] = [Output::Csm, Output::Semi, Output::Mat];

    fn row(self) -> usize {
        match self {
            Output::Csm => 0,
            Output::Semi => 1,
            Output::Mat => 2,
        }
    }
}

impl Input {
    fn col(self) -> usize {
        match self {
            Input::Pamp => 0,
            Input::Danger => 1,
            Input::Safe => 2,
        }
    }
}

/// 3x3 fusion weights, rows = {csm, semi, mat}, columns = {pamp, danger, safe}.
///
/// Every row must have a non-zero sum of absolute weights, since that sum is
/// the normalisation denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightMatrix {
    rows: [[f64; 3]; 3],
}

impl Default for WeightMatrix {
    fn default() -> Self {
        WeightMatrix {
            rows: [[2.0, 1.0, 2.0], [0.0, 0.0, 3.0], [2.0, 1.0, -3.0]],
        }
    }
}

impl WeightMatrix {
    /// Rows are given as `[pamp, danger, safe]` for csm, semi and mat.
    pub fn new(csm: [f64; 3], semi: [f64; 3], mat: [f64; 3]) -> Result<Self> {
        let m = WeightMatrix { rows: [csm, semi, mat] };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for out in Output::ALL {
            let row = &self.rows[out.row()];
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidWeights(format!("{out:?} row has a non-finite weight")));
            }
            if row.iter().map(|w| w.abs()).sum::<f64>() == 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "{out:?} row has zero absolute weight sum"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, out: Output, input: Input) -> f64 {
        self.rows[out.row()][input.col()]
    }

    /// Returns a copy with one cell replaced; fails if that zeroes a row.
    pub fn with(&self, out: Output, input: Input, weight: f64) -> Result<Self> {
        let mut m = *self;
        m.rows[out.row()][input.col()] = weight;
        m.validate()?;
        Ok(m)
    }

    fn norm(&self, out: Output) -> f64 {
        self.rows[out.row()].iter().map(|w| w.abs()).sum()
    }
}

/// Cytokine totals (or per-update increments).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CytokineState {
    pub csm: f64,
    pub semi: f64,
    pub mat: f64,
}

/// Weighted-sum signal fusion.
///
/// Each output is `(Wp*P + Ws*S + Wd*D) / (|Wp| + |Ws| + |Wd|) * (1 + IC) / 2`.
/// The absolute-value denominator keeps the mat row (2 + 1 - 3 = 0) finite.
pub fn fuse_signals(s: &SignalVector, w: &WeightMatrix) -> CytokineState {
    let amplify = (1.0 + s.inflammation) / 2.0;
    let eval = |out: Output| {
        let sum =
            w.get(out, Input::Pamp) * s.pamp + w.get(out, Input::Safe) * s.safe + w.get(out, Input::Danger) * s.danger;
        sum / w.norm(out) * amplify
    };
    CytokineState {
        csm: eval(Output::Csm),
        semi: eval(Output::Semi),
        mat: eval(Output::Mat),
    }
}

/// Opaque antigen token. Non-empty, without whitespace, control characters
/// or commas, so it can be embedded in the tab/comma separated log formats.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AntigenLabel(Arc<str>);

impl AntigenLabel {
    pub fn new(label: impl AsRef<str>) -> Result<Self> {
        let label = label.as_ref();
        if label.is_empty() || label.chars().any(|c| c.is_whitespace() || c.is_control() || c == ',') {
            return Err(Error::InvalidLabel(label.to_string()));
        }
        Ok(AntigenLabel(Arc::from(label)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AntigenLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for AntigenLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AntigenLabel::new(s)
    }
}

/// Context a migrated cell presents its antigen in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Context {
    SemiMature,
    Mature,
}

impl Context {
    pub fn as_str(self) -> &'static str {
        match self {
            Context::Mature => "mature",
            Context::SemiMature => "semi",
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Context {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mature" => Ok(Context::Mature),
            "semi" => Ok(Context::SemiMature),
            other => Err(Error::InvalidConfig(format!("unknown context {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Immature,
    Migrated,
}

pub type CellId = u64;

#[derive(Debug, Clone)]
pub struct DendriticCell {
    id: CellId,
    state: CellState,
    cytokines: CytokineState,
    migration_threshold: f64,
    antigen: Vec<AntigenLabel>,
    capacity: usize,
}

impl DendriticCell {
    pub fn new(id: CellId, migration_threshold: f64, capacity: usize) -> Result<Self> {
        if !(migration_threshold.is_finite() && migration_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "migration threshold must be positive, got {migration_threshold}"
            )));
        }
        if capacity == 0 {
            return Err(Error::InvalidConfig("cell antigen capacity must be positive".into()));
        }
        Ok(DendriticCell {
            id,
            state: CellState::Immature,
            cytokines: CytokineState::default(),
            migration_threshold,
            antigen: Vec::new(),
            capacity,
        })
    }

    pub fn id(&self) -> CellId {
        self.id
    }

    pub fn state(&self) -> CellState {
        self.state
    }

    pub fn is_migrated(&self) -> bool {
        self.state == CellState::Migrated
    }

    pub fn cytokines(&self) -> CytokineState {
        self.cytokines
    }

    pub fn migration_threshold(&self) -> f64 {
        self.migration_threshold
    }

    pub fn antigen(&self) -> &[AntigenLabel] {
        &self.antigen
    }

    pub fn is_full(&self) -> bool {
        self.antigen.len() >= self.capacity
    }

    /// Adds an already fused increment. csm increments are floored at zero.
    /// Returns whether this update made the cell migrate.
    pub fn accumulate(&mut self, delta: CytokineState) -> Result<bool> {
        if self.is_migrated() {
            return Err(Error::CellMigrated(self.id));
        }
        self.cytokines.csm += delta.csm.max(0.0);
        self.cytokines.semi += delta.semi;
        self.cytokines.mat += delta.mat;
        if self.cytokines.csm >= self.migration_threshold {
            self.state = CellState::Migrated;
        }
        Ok(self.is_migrated())
    }

    /// Fuses `s` with `w` and accumulates the result.
    pub fn update(&mut self, s: &SignalVector, w: &WeightMatrix) -> Result<bool> {
        self.accumulate(fuse_signals(s, w))
    }

    pub fn ingest(&mut self, label: AntigenLabel) -> Result<()> {
        if self.is_migrated() {
            return Err(Error::CellMigrated(self.id));
        }
        if self.is_full() {
            return Err(Error::CellStoreFull {
                cell: self.id,
                capacity: self.capacity,
            });
        }
        self.antigen.push(label);
        Ok(())
    }

    /// Context and collected antigen of a migrated cell. Ties go to semi-mature.
    pub fn present(&self) -> Result<(Context, &[AntigenLabel])> {
        if !self.is_migrated() {
            return Err(Error::CellImmature(self.id));
        }
        let context = if self.cytokines.mat > self.cytokines.semi {
            Context::Mature
        } else {
            Context::SemiMature
        };
        Ok((context, &self.antigen))
    }

    pub(crate) fn into_antigen(self) -> Vec<AntigenLabel> {
        self.antigen
    }
}
