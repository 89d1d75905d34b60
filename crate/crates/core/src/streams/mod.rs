//! Event streams: log format, replay, framed transport and the synthetic
//! port scan scenario.

pub mod engine;
pub mod event;
pub mod replay;
pub mod scenario;
pub mod signals;
pub mod transport;

pub use engine::{EventSink, TissueEngine};
pub use event::{read_log, write_log, Event, Payload};
pub use replay::{replay, ReplayRate, ReplayStats};
pub use scenario::{generate_scenario, generate_trace, InflammationMode, Phase, ScenarioConfig};
pub use signals::{derive_signals, SignalConstants, SignalDeriver, TrafficSample};
pub use transport::{serve_session, Client, ServeOptions, SessionReport, MAX_FRAME};
