//! Labelled tabular data as a signal and antigen stream.
//!
//! Each item becomes one second of input: its attributes set the signals and
//! its id is deposited as antigen. The attribute with the largest spread
//! drives PAMP and safe through its distance to the two class means; the
//! next three drive danger.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{aggregate, classify, count_errors, mean_std, ErrorCount, RunSummary, Verdicts};
use crate::cell::{fuse_signals, AntigenLabel, SignalVector, WeightMatrix};
use crate::error::{Error, Result};
use crate::seeds;
use crate::streams::{Event, TissueEngine};
use crate::tissue::{MigrationRecord, PopulationConfig};

pub const ATTRIBUTES: usize = 9;

pub const ATTRIBUTE_NAMES: [&str; ATTRIBUTES] = [
    "clump_thickness",
    "cell_size_uniformity",
    "cell_shape_uniformity",
    "marginal_adhesion",
    "epithelial_cell_size",
    "bare_nuclei",
    "bland_chromatin",
    "normal_nucleoli",
    "mitoses",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LabelledItem {
    pub id: AntigenLabel,
    pub attributes: [f64; ATTRIBUTES],
    /// 0 = normal, 1 = anomalous.
    pub true_class: u8,
}

/// Which UCI class code (2 = benign, 4 = malignant) becomes class 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassAssignment {
    /// Class 0 is whichever class has fewer items.
    #[default]
    SmallerIsZero,
    MalignantIsZero,
    BenignIsZero,
}

impl FromStr for ClassAssignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smaller" => Ok(ClassAssignment::SmallerIsZero),
            "malignant" => Ok(ClassAssignment::MalignantIsZero),
            "benign" => Ok(ClassAssignment::BenignIsZero),
            _ => Err(Error::InvalidConfig(format!(
                "class-0 assignment must be smaller, malignant or benign, got {s:?}"
            ))),
        }
    }
}

fn fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// Loads the UCI breast-cancer-wisconsin file: sample code, nine attributes
/// on a 1–10 scale, class 2 or 4. Rows with missing values (`?`) are
/// dropped. Attributes are divided by 10. Sample codes repeat in the file,
/// so ids are `code:line`.
pub fn load_uci<R: BufRead>(input: R, assignment: ClassAssignment) -> Result<Vec<LabelledItem>> {
    let mut rows: Vec<(AntigenLabel, [f64; ATTRIBUTES], bool)> = Vec::new();
    let mut dropped = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f = fields(&line);
        if f.len() != ATTRIBUTES + 2 {
            return Err(Error::parse(
                n,
                format!("expected {} fields, got {}", ATTRIBUTES + 2, f.len()),
            ));
        }
        if f.contains(&"?") {
            dropped += 1;
            continue;
        }
        let mut attributes = [0.0; ATTRIBUTES];
        for (a, raw) in attributes.iter_mut().zip(&f[1..=ATTRIBUTES]) {
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::parse(n, format!("bad attribute {raw:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(n, "attribute is not finite"));
            }
            *a = v / 10.0;
        }
        let malignant = match f[ATTRIBUTES + 1] {
            "2" => false,
            "4" => true,
            other => return Err(Error::parse(n, format!("class must be 2 or 4, got {other:?}"))),
        };
        let id = AntigenLabel::new(format!("{}:{n}", f[0])).map_err(|e| Error::parse(n, e.to_string()))?;
        rows.push((id, attributes, malignant));
    }
    let malignant = rows.iter().filter(|r| r.2).count();
    let malignant_is_zero = match assignment {
        ClassAssignment::MalignantIsZero => true,
        ClassAssignment::BenignIsZero => false,
        ClassAssignment::SmallerIsZero => malignant <= rows.len() - malignant,
    };
    tracing::debug!(kept = rows.len(), dropped, malignant, "loaded UCI file");
    Ok(rows
        .into_iter()
        .map(|(id, attributes, m)| LabelledItem {
            id,
            attributes,
            true_class: u8::from(m != malignant_is_zero),
        })
        .collect())
}

/// Loads `id, nine attributes, class` lines with class 0 or 1. Attributes
/// are taken as already normalised. Lines starting with `#` are skipped.
pub fn load_csv<R: BufRead>(input: R) -> Result<Vec<LabelledItem>> {
    let mut items = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f = fields(&line);
        if f.len() != ATTRIBUTES + 2 {
            return Err(Error::parse(
                n,
                format!("expected {} fields, got {}", ATTRIBUTES + 2, f.len()),
            ));
        }
        let mut attributes = [0.0; ATTRIBUTES];
        for (a, raw) in attributes.iter_mut().zip(&f[1..=ATTRIBUTES]) {
            *a = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(n, format!("bad attribute {raw:?}")))?;
        }
        let true_class = match f[ATTRIBUTES + 1] {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::parse(n, format!("class must be 0 or 1, got {other:?}"))),
        };
        let id = AntigenLabel::new(f[0]).map_err(|e| Error::parse(n, e.to_string()))?;
        items.push(LabelledItem {
            id,
            attributes,
            true_class,
        });
    }
    check_unique(&items)?;
    Ok(items)
}

fn check_unique(items: &[LabelledItem]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for it in items {
        if !seen.insert(&it.id) {
            return Err(Error::Dataset(format!("duplicate item id {}", it.id)));
        }
    }
    Ok(())
}

/// How the PAMP/safe attribute's class-mean distances become signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// pamp = |x − μ0|, safe = |x − μ1|.
    #[default]
    Absolute,
    /// pamp = |x − μ1|, safe = |x − μ0|.
    Swapped,
    /// Only deviations towards the other class count:
    /// pamp = max(0, σ(x − μ0)), safe = max(0, −σ(x − μ1)), σ = sign(μ1 − μ0).
    Signed,
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(Orientation::Absolute),
            "swapped" => Ok(Orientation::Swapped),
            "signed" => Ok(Orientation::Signed),
            _ => Err(Error::InvalidConfig(format!(
                "orientation must be absolute, swapped or signed, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Absolute => "absolute",
            Orientation::Swapped => "swapped",
            Orientation::Signed => "signed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalMapping {
    pub danger_attributes: [usize; 3],
    pub pamp_safe_attribute: usize,
    /// Mean of the PAMP/safe attribute in class 0 and class 1.
    pub class_means: [f64; 2],
    pub scale: f64,
    pub orientation: Orientation,
}

impl SignalMapping {
    pub fn validate(&self) -> Result<()> {
        let mut idx = self.danger_attributes.to_vec();
        idx.push(self.pamp_safe_attribute);
        idx.sort_unstable();
        idx.dedup();
        if idx.len() != 4 || idx.iter().any(|&i| i >= ATTRIBUTES) {
            return Err(Error::InvalidConfig(
                "mapping attributes must be four distinct indices below 9".into(),
            ));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) || self.class_means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig(
                "mapping scale must be positive and class means finite".into(),
            ));
        }
        Ok(())
    }
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Attribute indices ordered by decreasing standard deviation; ties keep
/// index order.
pub fn rank_attributes(items: &[LabelledItem]) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = (0..ATTRIBUTES)
        .map(|a| (a, std_dev(items.iter().map(move |it| it.attributes[a]))))
        .collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1));
    ranked
}

/// Top-ranked attribute feeds PAMP and safe, the next three feed danger.
/// Scale is 1; see [`calibrate_scale`].
pub fn select_attributes(items: &[LabelledItem]) -> Result<SignalMapping> {
    if items.len() < 2 {
        return Err(Error::Dataset("attribute selection needs at least two items".into()));
    }
    let ranked = rank_attributes(items);
    if ranked[0].1 == 0.0 {
        return Err(Error::Dataset("every attribute is constant".into()));
    }
    let top = ranked[0].0;
    let mut class_means = [0.0; 2];
    for (c, mean) in class_means.iter_mut().enumerate() {
        let xs: Vec<f64> = items
            .iter()
            .filter(|it| usize::from(it.true_class) == c)
            .map(|it| it.attributes[top])
            .collect();
        if xs.is_empty() {
            return Err(Error::Dataset(format!("no items of class {c}")));
        }
        *mean = xs.iter().sum::<f64>() / xs.len() as f64;
    }
    Ok(SignalMapping {
        danger_attributes: [ranked[1].0, ranked[2].0, ranked[3].0],
        pamp_safe_attribute: top,
        class_means,
        scale: 1.0,
        orientation: Orientation::default(),
    })
}

pub fn item_to_signals(item: &LabelledItem, m: &SignalMapping) -> SignalVector {
    let x = item.attributes[m.pamp_safe_attribute];
    let [mu0, mu1] = m.class_means;
    let (pamp, safe) = match m.orientation {
        Orientation::Absolute => ((x - mu0).abs(), (x - mu1).abs()),
        Orientation::Swapped => ((x - mu1).abs(), (x - mu0).abs()),
        Orientation::Signed => {
            let sign = if mu1 >= mu0 { 1.0 } else { -1.0 };
            ((sign * (x - mu0)).max(0.0), (-sign * (x - mu1)).max(0.0))
        }
    };
    let danger = m.danger_attributes.iter().map(|&a| item.attributes[a]).sum::<f64>() / 3.0;
    // Attributes are non-negative on the 0–1 scale; clamp guards odd inputs.
    SignalVector {
        pamp: m.scale * pamp,
        danger: m.scale * danger.max(0.0),
        safe: m.scale * safe,
        inflammation: 0.0,
    }
}

/// Sets `m.scale` so the mean per-item csm increment equals `target`, and
/// returns the new scale.
pub fn calibrate_scale(items: &[LabelledItem], m: &mut SignalMapping, w: &WeightMatrix, target: f64) -> Result<f64> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "calibration target {target} must be positive"
        )));
    }
    let unit = SignalMapping {
        scale: 1.0,
        ..m.clone()
    };
    let mean = items
        .iter()
        .map(|it| fuse_signals(&item_to_signals(it, &unit), w).csm)
        .sum::<f64>()
        / items.len().max(1) as f64;
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::Dataset(
            "items produce no costimulation; cannot calibrate".into(),
        ));
    }
    m.scale = target / mean;
    tracing::info!(scale = m.scale, target, "calibrated signal scale");
    Ok(m.scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataOrder {
    OneStep,
    TwoStep,
    Random,
}

impl FromStr for DataOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-step" => Ok(DataOrder::OneStep),
            "two-step" => Ok(DataOrder::TwoStep),
            "random" => Ok(DataOrder::Random),
            _ => Err(Error::InvalidConfig(format!(
                "order must be one-step, two-step or random, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for DataOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataOrder::OneStep => "one-step",
            DataOrder::TwoStep => "two-step",
            DataOrder::Random => "random",
        })
    }
}

/// Class 0 then class 1; or the first ⌈n₀/2⌉ of class 0, all of class 1,
/// then the rest of class 0; or a seeded shuffle. File order is kept within
/// a class.
pub fn order_stream(items: &[LabelledItem], order: DataOrder, seed: u64) -> Vec<LabelledItem> {
    let (zero, one): (Vec<&LabelledItem>, Vec<&LabelledItem>) = items.iter().partition(|it| it.true_class == 0);
    let out: Vec<&LabelledItem> = match order {
        DataOrder::OneStep => zero.into_iter().chain(one).collect(),
        DataOrder::TwoStep => {
            let half = zero.len().div_ceil(2);
            zero[..half].iter().chain(&one).chain(&zero[half..]).copied().collect()
        }
        DataOrder::Random => {
            let mut all: Vec<&LabelledItem> = items.iter().collect();
            all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            all
        }
    };
    out.into_iter().cloned().collect()
}

/// One event pair per item and second: its signals, then its antigen.
pub fn item_events(items: &[LabelledItem], m: &SignalMapping) -> Result<Vec<Event>> {
    let mut events = Vec::with_capacity(items.len() * 2);
    for (t, it) in items.iter().enumerate() {
        events.push(Event::signals(t as f64, item_to_signals(it, m))?);
        events.push(Event::antigen(t as f64, it.id.clone(), "item")?);
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcConfig {
    pub population: PopulationConfig,
    pub repeats: usize,
    pub threshold: f64,
    /// Mean csm increment per item the signal scale is calibrated to.
    pub calibration_target: f64,
    pub orientation: Orientation,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            population: PopulationConfig::breast_cancer(),
            repeats: 20,
            threshold: 0.65,
            calibration_target: 0.1,
            orientation: Orientation::Absolute,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BcOutcome {
    pub order: DataOrder,
    pub mapping: SignalMapping,
    /// Verdicts pooled over all repeats, with the pooled error count.
    pub summary: RunSummary,
    pub per_run_errors: Vec<ErrorCount>,
    /// Migration records of every repeat, in order.
    pub records: Vec<Vec<MigrationRecord>>,
    /// Item ids in streaming order of the first repeat.
    pub first_order: Vec<AntigenLabel>,
}

impl BcOutcome {
    pub fn errors(&self) -> usize {
        self.summary.errors.map_or(0, |e| e.total())
    }

    pub fn per_run_error_stats(&self) -> (f64, f64) {
        let v: Vec<f64> = self.per_run_errors.iter().map(|e| e.total() as f64).collect();
        mean_std(&v)
    }
}

const ORDER_STREAM: u64 = 1;
const TISSUE_STREAM: u64 = 2;

/// Streams the items `cfg.repeats` times, one item per second, and
/// classifies every item from its presentations pooled over all repeats.
pub fn run_bc_experiment(items: &[LabelledItem], order: DataOrder, cfg: &BcConfig) -> Result<BcOutcome> {
    if cfg.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be positive".into()));
    }
    check_unique(items)?;
    let mut mapping = select_attributes(items)?;
    mapping.orientation = cfg.orientation;
    calibrate_scale(items, &mut mapping, &cfg.population.weights, cfg.calibration_target)?;
    let truth: BTreeMap<AntigenLabel, u8> = items.iter().map(|it| (it.id.clone(), it.true_class)).collect();

    let mut all_records = Vec::with_capacity(cfg.repeats);
    let mut per_run_errors = Vec::with_capacity(cfg.repeats);
    let mut first_order = Vec::new();
    for r in 0..cfg.repeats as u64 {
        let ordered = order_stream(items, order, seeds::derive(cfg.seed, ORDER_STREAM, r));
        if r == 0 {
            first_order = ordered.iter().map(|it| it.id.clone()).collect();
        }
        let population = PopulationConfig {
            seed: seeds::derive(cfg.seed, TISSUE_STREAM, r),
            ..cfg.population.clone()
        };
        let records = TissueEngine::run(population, &item_events(&ordered, &mapping)?)?;
        let mut v = aggregate(&records);
        classify(&mut v, cfg.threshold)?;
        per_run_errors.push(count_errors(&v, &truth)?);
        all_records.push(records);
    }
    let pooled: Vec<MigrationRecord> = all_records.iter().flatten().cloned().collect();
    let mut verdicts = aggregate(&pooled);
    classify(&mut verdicts, cfg.threshold)?;
    let errors = count_errors(&verdicts, &truth)?;
    tracing::info!(%order, errors = errors.total(), unseen = errors.unseen, "experiment finished");
    Ok(BcOutcome {
        order,
        mapping,
        summary: RunSummary {
            verdicts,
            per_run_groups: Vec::new(),
            errors: Some(errors),
        },
        per_run_errors,
        records: all_records,
        first_order,
    })
}

/// Mean context per stream position; `None` where the item was never presented.
pub fn context_profile(verdicts: &Verdicts, order: &[AntigenLabel]) -> Vec<Option<f64>> {
    order
        .iter()
        .map(|l| verdicts.get(l).and_then(|v| v.mean_context()))
        .collect()
}

/// Centred rolling mean over `window` positions, ignoring undefined entries.
pub fn rolling_mean(profile: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let half = window / 2;
    (0..profile.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(profile.len());
            let vals: Vec<f64> = profile[lo..hi].iter().flatten().copied().collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

/// First position (0-based) where the series rises above 0.5.
pub fn first_crossing(series: &[Option<f64>]) -> Option<usize> {
    series.iter().position(|v| v.is_some_and(|x| x > 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn item(id: &str, attributes: [f64; 9], class: u8) -> LabelledItem {
        LabelledItem {
            id: AntigenLabel::new(id).unwrap(),
            attributes,
            true_class: class,
        }
    }

    #[test]
    fn uci_loading() {
        let text = "1000025,5,1,1,1,2,1,3,1,1,2\n1002945,5,4,4,5,7,10,3,2,1,2\n1057013,8,4,5,1,2,?,7,3,1,4\n1017122,8,10,10,8,7,10,9,7,1,4\n";
        let items = load_uci(text.as_bytes(), ClassAssignment::SmallerIsZero).unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(items[0].id.as_str(), "1000025:1");
        assert_eq!(items[1].attributes[5], 1.0);
        // One malignant vs two benign: malignant is class 0.
        assert_eq!(items.iter().map(|i| i.true_class).collect::<Vec<_>>(), vec![1, 1, 0]);
        let items = load_uci(text.as_bytes(), ClassAssignment::BenignIsZero).unwrap();
        assert_eq!(items[2].true_class, 1);
        assert!(load_uci("1,2,3\n".as_bytes(), ClassAssignment::default()).is_err());
        assert!(matches!(
            load_uci("1,1,1,1,1,1,1,1,1,1,3\n".as_bytes(), ClassAssignment::default()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn csv_loading() {
        let text = "# id, attrs, class\na,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1\nb,0,0,0,0,0,0,0,0,0,0\n";
        let items = load_csv(text.as_bytes()).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].true_class, 1);
        assert!(load_csv("a,0,0,0,0,0,0,0,0,0,0\na,0,0,0,0,0,0,0,0,0,1\n".as_bytes()).is_err());
        assert!(load_csv("a,0,0,0,0,0,0,0,0,0,2\n".as_bytes()).is_err());
    }

    #[test]
    fn single_varying_attribute_is_top() {
        let mut a = [0.5; 9];
        let b = [0.5; 9];
        a[4] = 0.9;
        let items = vec![item("a", a, 0), item("b", b, 1)];
        let m = select_attributes(&items).unwrap();
        assert_eq!(m.pamp_safe_attribute, 4);
        assert_eq!(m.class_means, [0.9, 0.5]);
        assert!(select_attributes(&[item("a", b, 0), item("b", b, 1)]).is_err());
        assert!(select_attributes(&items[..1]).is_err());
    }

    #[test]
    fn signal_mapping_examples() {
        let m = SignalMapping {
            danger_attributes: [0, 1, 2],
            pamp_safe_attribute: 3,
            class_means: [0.2, 0.8],
            scale: 100.0,
            orientation: Orientation::Absolute,
        };
        let at0 = item("a", [0.2, 0.4, 0.6, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0], 0);
        let s = item_to_signals(&at0, &m);
        assert_eq!(s.pamp, 0.0);
        assert_abs_diff_eq!(s.danger, 40.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.safe, 60.0, epsilon = 1e-12);
        assert_eq!(s.inflammation, 0.0);
        let at1 = item("b", [0.0, 0.0, 0.0, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0], 1);
        assert_eq!(item_to_signals(&at1, &m).safe, 0.0);
        let swapped = SignalMapping {
            orientation: Orientation::Swapped,
            ..m.clone()
        };
        assert_eq!(item_to_signals(&at0, &swapped).safe, 0.0);
        // Beyond the class-0 mean, away from class 1: no PAMP under the signed reading.
        let signed = SignalMapping {
            orientation: Orientation::Signed,
            ..m
        };
        let below = item("c", [0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0], 0);
        let s = item_to_signals(&below, &signed);
        assert_eq!(s.pamp, 0.0);
        assert_abs_diff_eq!(s.safe, 70.0, epsilon = 1e-12);
    }

    #[test]
    fn calibration_hits_target() {
        let items: Vec<LabelledItem> = (0..20)
            .map(|i| {
                let x = i as f64 / 20.0;
                item(
                    &format!("i{i}"),
                    [x, 1.0 - x, x * x, 0.3, x / 2.0, 0.1, 0.2, 0.3, 0.4],
                    (i % 2) as u8,
                )
            })
            .collect();
        let mut m = select_attributes(&items).unwrap();
        let w = WeightMatrix::default();
        calibrate_scale(&items, &mut m, &w, 0.25).unwrap();
        let mean: f64 = items
            .iter()
            .map(|it| fuse_signals(&item_to_signals(it, &m), &w).csm)
            .sum::<f64>()
            / 20.0;
        assert_abs_diff_eq!(mean, 0.25, epsilon = 1e-12);
    }

    fn toy(n0: usize, n1: usize) -> Vec<LabelledItem> {
        (0..n0 + n1)
            .map(|i| item(&format!("i{i}"), [i as f64; 9], u8::from(i >= n0)))
            .collect()
    }

    #[test]
    fn orderings() {
        let items = toy(240, 460);
        let one = order_stream(&items, DataOrder::OneStep, 0);
        assert!(one[..240].iter().all(|i| i.true_class == 0));
        assert!(one[240..].iter().all(|i| i.true_class == 1));
        let two = order_stream(&items, DataOrder::TwoStep, 0);
        assert!(two[..120].iter().all(|i| i.true_class == 0));
        assert!(two[120..580].iter().all(|i| i.true_class == 1));
        assert!(two[580..].iter().all(|i| i.true_class == 0));
        let odd = order_stream(&toy(239, 444), DataOrder::TwoStep, 0);
        assert!(odd[..120].iter().all(|i| i.true_class == 0));
        assert_eq!(odd[120].true_class, 1);
        assert_eq!(
            order_stream(&items, DataOrder::Random, 9),
            order_stream(&items, DataOrder::Random, 9)
        );
        assert_ne!(
            order_stream(&items, DataOrder::Random, 9),
            order_stream(&items, DataOrder::Random, 10)
        );
    }

    #[test]
    fn rolling_and_crossing() {
        let p = vec![Some(0.0), None, Some(0.2), Some(1.0), Some(1.0)];
        let r = rolling_mean(&p, 3);
        assert_eq!(r[1], Some(0.1));
        assert_eq!(r[2], Some(0.6));
        assert_eq!(first_crossing(&r), Some(2));
        assert_eq!(first_crossing(&[None, Some(0.5)]), None);
    }

    fn items_strategy() -> impl Strategy<Value = Vec<LabelledItem>> {
        proptest::collection::vec((proptest::array::uniform9(0.0..1.0f64), 0..2u8), 4..40).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (a, c))| item(&format!("i{i}"), a, c))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn signals_never_negative(items in items_strategy(), o in 0..3usize) {
            prop_assume!(items.iter().any(|i| i.true_class == 0) && items.iter().any(|i| i.true_class == 1));
            let mut m = select_attributes(&items).unwrap();
            m.orientation = [Orientation::Absolute, Orientation::Swapped, Orientation::Signed][o];
            for it in &items {
                prop_assert!(item_to_signals(it, &m).validate().is_ok());
            }
        }

        #[test]
        fn ranking_ignores_item_order(items in items_strategy(), seed in any::<u64>()) {
            let mut shuffled = items.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let idx = |r: Vec<(usize, f64)>| r.into_iter().map(|x| x.0).collect::<Vec<_>>();
            let a = rank_attributes(&items);
            let b = rank_attributes(&shuffled);
            // Equal up to float noise in the std; compare where the gap is clear.
            if a.windows(2).all(|w| w[0].1 - w[1].1 > 1e-9) {
                prop_assert_eq!(idx(a), idx(b));
            }
        }

        #[test]
        fn every_item_streamed_once(n0 in 0..30usize, n1 in 0..30usize, o in 0..3usize, seed in any::<u64>()) {
            let items = toy(n0, n1);
            let order = [DataOrder::OneStep, DataOrder::TwoStep, DataOrder::Random][o];
            let mut ids: Vec<String> = order_stream(&items, order, seed).iter().map(|i| i.id.to_string()).collect();
            ids.sort();
            let mut expected: Vec<String> = items.iter().map(|i| i.id.to_string()).collect();
            expected.sort();
            prop_assert_eq!(ids, expected);
        }
    }
}
