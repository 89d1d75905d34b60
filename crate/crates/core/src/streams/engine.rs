use crate::error::{Error, Result};
use crate::streams::event::{Event, Payload};
use crate::tissue::{MigrationRecord, PopulationConfig, Tissue};

/// Anything events can be delivered to: the in-process engine, a network
/// client, or a plain buffer.
pub trait EventSink {
    fn deliver(&mut self, event: &Event) -> Result<()>;
}

impl EventSink for Vec<Event> {
    fn deliver(&mut self, event: &Event) -> Result<()> {
        self.push(event.clone());
        Ok(())
    }
}

/// Drives a [`Tissue`] from a timestamped event stream.
///
/// Logical second `k` collects every event with a timestamp in `[k, k+1)`.
/// When the stream moves past it, the collected events are applied in
/// canonical order (signals replace, antigen is deposited) and one tick runs.
/// Seconds without events still tick, with decayed (zero) signals.
#[derive(Debug)]
pub struct TissueEngine {
    tissue: Tissue,
    open_second: u64,
    pending: Vec<Event>,
    started: bool,
    records: Vec<MigrationRecord>,
    delivered: usize,
}

impl TissueEngine {
    pub fn new(config: PopulationConfig) -> Result<Self> {
        Ok(Self::from_tissue(Tissue::new(config)?))
    }

    pub fn from_tissue(tissue: Tissue) -> Self {
        TissueEngine {
            open_second: tissue.clock(),
            tissue,
            pending: Vec::new(),
            started: false,
            records: Vec::new(),
            delivered: 0,
        }
    }

    pub fn tissue(&self) -> &Tissue {
        &self.tissue
    }

    pub fn records(&self) -> &[MigrationRecord] {
        &self.records
    }

    /// Events accepted so far.
    pub fn delivered(&self) -> usize {
        self.delivered
    }

    /// Hands over records produced since the last call.
    pub fn drain_records(&mut self) -> Vec<MigrationRecord> {
        std::mem::take(&mut self.records)
    }

    pub fn push(&mut self, event: Event) -> Result<()> {
        let second = event.second();
        if second < self.open_second {
            return Err(Error::LateEvent {
                timestamp: event.timestamp,
                second,
            });
        }
        self.advance_to(second)?;
        self.started = true;
        self.pending.push(event);
        self.delivered += 1;
        Ok(())
    }

    /// Ticks every second strictly before `second`.
    pub fn advance_to(&mut self, second: u64) -> Result<()> {
        while self.open_second < second {
            self.tick()?;
        }
        Ok(())
    }

    fn tick(&mut self) -> Result<()> {
        let mut events = std::mem::take(&mut self.pending);
        events.sort_by(Event::canonical_cmp);
        for e in events {
            match e.payload {
                Payload::Signals(s) => self.tissue.set_signals(s)?,
                Payload::Antigen { label, .. } => {
                    self.tissue.deposit_antigen(label);
                }
            }
        }
        self.records.extend(self.tissue.run_tick());
        self.open_second += 1;
        Ok(())
    }

    /// Ticks the last open second, if anything was delivered. Idempotent.
    pub fn finish(&mut self) -> Result<()> {
        if self.started {
            self.tick()?;
            self.started = false;
        }
        Ok(())
    }

    /// Runs a whole stream and returns every migration record.
    pub fn run(config: PopulationConfig, events: &[Event]) -> Result<Vec<MigrationRecord>> {
        let mut engine = TissueEngine::new(config)?;
        for e in events {
            engine.push(e.clone())?;
        }
        engine.finish()?;
        Ok(engine.drain_records())
    }
}

impl EventSink for TissueEngine {
    fn deliver(&mut self, event: &Event) -> Result<()> {
        self.push(event.clone())
    }
}
