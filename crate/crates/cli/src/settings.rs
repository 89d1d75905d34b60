//! Effective run settings: kind defaults, then the config file, then flags.
//!
//! The config file is line-oriented `key = value`; `#` starts a comment.
//! Every key the run does not understand is an error. [`Settings::render`]
//! writes the same format, so a manifest can be fed back with `--config`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context as _, Result};
use dca::analysis::MagMode;
use dca::datasets::{ClassAssignment, Orientation};
use dca::streams::scenario::{InflammationMode, ScenarioConfig};
use dca::{Input, Output, PopulationConfig, ThresholdMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    BreastCancer,
    Portscan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub population: PopulationConfig,
    pub repeats: usize,
    pub classification_threshold: f64,
    pub calibration_target: f64,
    pub orientation: Orientation,
    pub class0: ClassAssignment,
    pub scenario: ScenarioConfig,
    pub mag_mode: MagMode,
    pub seed: u64,
}

const OUTPUTS: [(&str, Output); 3] = [("csm", Output::Csm), ("semi", Output::Semi), ("mat", Output::Mat)];
const INPUTS: [(&str, Input); 3] = [("pamp", Input::Pamp), ("danger", Input::Danger), ("safe", Input::Safe)];

impl Settings {
    pub fn defaults(kind: Kind) -> Self {
        let (population, repeats) = match kind {
            Kind::BreastCancer => (PopulationConfig::breast_cancer(), 20),
            Kind::Portscan => (PopulationConfig::portscan(), 10),
        };
        Settings {
            population,
            repeats,
            classification_threshold: 0.65,
            calibration_target: 0.1,
            orientation: Orientation::Absolute,
            class0: ClassAssignment::SmallerIsZero,
            scenario: ScenarioConfig::default(),
            mag_mode: MagMode::PerRunMean,
            seed: 0,
        }
    }

    pub fn load(kind: Kind, path: Option<&Path>) -> Result<Self> {
        let mut s = Settings::defaults(kind);
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            s.apply_text(&text)
                .with_context(|| format!("in config {}", path.display()))?;
        }
        Ok(s)
    }

    /// Applies every line or none of them.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut next = self.clone();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
            next.set(key.trim(), value.trim())
                .with_context(|| format!("line {}: {}", n + 1, key.trim()))?;
        }
        next.population.validate()?;
        next.scenario.validate()?;
        *self = next;
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.population;
        let sc = &mut self.scenario;
        match key {
            "seed" => self.seed = num(value)?,
            "num_cells" => p.num_cells = num(value)?,
            "cell_antigen_capacity" => p.cell_antigen_capacity = num(value)?,
            "tissue_antigen_capacity" => p.tissue_antigen_capacity = num(value)?,
            "sampling_probability" => p.sampling_probability = num(value)?,
            "sample_multiplicity" => p.sample_multiplicity = num(value)?,
            "migration_threshold" => p.threshold = value.parse()?,
            "repeats" => self.repeats = num(value)?,
            "classification_threshold" => self.classification_threshold = num(value)?,
            "calibration_target" => self.calibration_target = num(value)?,
            "orientation" => self.orientation = value.parse()?,
            "class0" => self.class0 = value.parse()?,
            "mag_mode" => self.mag_mode = parse_mag_mode(value)?,
            "scenario.durations" => {
                let v: Vec<u32> = value.split(',').map(|x| num(x.trim())).collect::<Result<_>>()?;
                sc.durations = v
                    .try_into()
                    .map_err(|_| anyhow!("expected five comma-separated durations"))?;
            }
            "scenario.address_count" => sc.address_count = num(value)?,
            "scenario.fraction_unreachable" => sc.fraction_unreachable = num(value)?,
            "scenario.probes_per_address" => sc.probes_per_address = num(value)?,
            "scenario.retries" => sc.retries = num(value)?,
            "scenario.burst_probability" => sc.burst_probability = num(value)?,
            "scenario.baseline_pps" => sc.baseline_pps = num(value)?,
            "scenario.interactive_pps" => sc.interactive_pps = num(value)?,
            "scenario.transfer_bytes" => sc.transfer_bytes = num(value)?,
            "scenario.transfer_packet_bytes" => sc.transfer_packet_bytes = num(value)?,
            "scenario.transfer_ack_ratio" => sc.transfer_ack_ratio = num(value)?,
            "scenario.user_absent" => {
                sc.inflammation = if num::<bool>(value)? {
                    InflammationMode::UserAbsent
                } else {
                    InflammationMode::UserPresent
                }
            }
            "signal.k_pamp" => sc.constants.k_pamp = num(value)?,
            "signal.k_danger" => sc.constants.k_danger = num(value)?,
            "signal.k_safe" => sc.constants.k_safe = num(value)?,
            "signal.safe_max" => sc.constants.safe_max = num(value)?,
            "signal.window" => sc.constants.window = num(value)?,
            _ => {
                let weight = key.strip_prefix("weight.").and_then(|rest| rest.split_once('.'));
                let Some((out, input)) = weight else {
                    bail!("unknown key");
                };
                let out = OUTPUTS
                    .iter()
                    .find(|o| o.0 == out)
                    .ok_or_else(|| anyhow!("unknown output {out:?}"))?
                    .1;
                let input = INPUTS
                    .iter()
                    .find(|i| i.0 == input)
                    .ok_or_else(|| anyhow!("unknown input {input:?}"))?
                    .1;
                p.weights = p.weights.with(out, input, num(value)?)?;
            }
        }
        Ok(())
    }

    /// All settings in config-file form, in a fixed order.
    pub fn render(&self) -> String {
        let p = &self.population;
        let sc = &self.scenario;
        let d = sc.durations.map(|x| x.to_string()).join(",");
        let mut entries: Vec<(String, String)> = vec![
            ("seed".into(), self.seed.to_string()),
            ("num_cells".into(), p.num_cells.to_string()),
            ("cell_antigen_capacity".into(), p.cell_antigen_capacity.to_string()),
            ("tissue_antigen_capacity".into(), p.tissue_antigen_capacity.to_string()),
            ("sampling_probability".into(), p.sampling_probability.to_string()),
            ("sample_multiplicity".into(), p.sample_multiplicity.to_string()),
            ("migration_threshold".into(), p.threshold.to_string()),
        ];
        for (oname, out) in OUTPUTS {
            for (iname, input) in INPUTS {
                entries.push((format!("weight.{oname}.{iname}"), p.weights.get(out, input).to_string()));
            }
        }
        entries.extend([
            ("repeats".into(), self.repeats.to_string()),
            (
                "classification_threshold".into(),
                self.classification_threshold.to_string(),
            ),
            ("calibration_target".into(), self.calibration_target.to_string()),
            ("orientation".into(), self.orientation.to_string()),
            ("class0".into(), class0_name(self.class0).into()),
            ("mag_mode".into(), mag_mode_name(self.mag_mode).into()),
            ("scenario.durations".into(), d),
            ("scenario.address_count".into(), sc.address_count.to_string()),
            (
                "scenario.fraction_unreachable".into(),
                sc.fraction_unreachable.to_string(),
            ),
            ("scenario.probes_per_address".into(), sc.probes_per_address.to_string()),
            ("scenario.retries".into(), sc.retries.to_string()),
            ("scenario.burst_probability".into(), sc.burst_probability.to_string()),
            ("scenario.baseline_pps".into(), sc.baseline_pps.to_string()),
            ("scenario.interactive_pps".into(), sc.interactive_pps.to_string()),
            ("scenario.transfer_bytes".into(), sc.transfer_bytes.to_string()),
            (
                "scenario.transfer_packet_bytes".into(),
                sc.transfer_packet_bytes.to_string(),
            ),
            ("scenario.transfer_ack_ratio".into(), sc.transfer_ack_ratio.to_string()),
            (
                "scenario.user_absent".into(),
                (sc.inflammation == InflammationMode::UserAbsent).to_string(),
            ),
            ("signal.k_pamp".into(), sc.constants.k_pamp.to_string()),
            ("signal.k_danger".into(), sc.constants.k_danger.to_string()),
            ("signal.k_safe".into(), sc.constants.k_safe.to_string()),
            ("signal.safe_max".into(), sc.constants.safe_max.to_string()),
            ("signal.window".into(), sc.constants.window.to_string()),
        ]);
        let mut s = String::new();
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn num<T: std::str::FromStr>(value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("bad value {value:?}: {e}"))
}

pub fn parse_mag_mode(s: &str) -> Result<MagMode> {
    match s {
        "per-run" => Ok(MagMode::PerRunMean),
        "pooled" => Ok(MagMode::Pooled),
        _ => bail!("mag mode must be per-run or pooled, got {s:?}"),
    }
}

fn mag_mode_name(m: MagMode) -> &'static str {
    match m {
        MagMode::PerRunMean => "per-run",
        MagMode::Pooled => "pooled",
    }
}

fn class0_name(c: ClassAssignment) -> &'static str {
    match c {
        ClassAssignment::SmallerIsZero => "smaller",
        ClassAssignment::MalignantIsZero => "malignant",
        ClassAssignment::BenignIsZero => "benign",
    }
}

/// Parses `1,5,10,15,var` into threshold modes; `var` is uniform(5,15).
pub fn parse_sweep(s: &str) -> Result<Vec<ThresholdMode>> {
    s.split(',')
        .map(|t| t.trim().parse::<ThresholdMode>().map_err(Into::into))
        .collect()
}
