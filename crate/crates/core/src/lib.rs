//! Dendritic cell algorithm.
//!
//! A population of artificial dendritic cells samples antigen (opaque labels)
//! from a shared tissue compartment while integrating input signals into
//! three cytokine outputs. When a cell's costimulation crosses its migration
//! threshold it leaves the pool and presents everything it collected in
//! either a mature or semi-mature context. Aggregating those presentations
//! per label gives the anomaly verdict.

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod analysis;
pub mod cell;
pub mod datasets;
pub mod error;
pub mod portscan;
pub mod seeds;
pub mod streams;
pub mod tissue;

pub use cell::{
    fuse_signals, AntigenLabel, CellId, CellState, Context, CytokineState, DendriticCell, Input, Output, SignalVector,
    WeightMatrix,
};
pub use error::{Error, Result};
pub use tissue::{MigrationRecord, PopulationConfig, ThresholdMode, Tissue, TissueCompartment};
