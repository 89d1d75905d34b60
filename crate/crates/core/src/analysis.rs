//! Post-hoc analysis of migration records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cell::{AntigenLabel, Context};
use crate::error::{Error, Result};
use crate::tissue::MigrationRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntigenVerdict {
    pub label: AntigenLabel,
    pub presented_mature: u64,
    pub presented_semi: u64,
    /// 1 = anomalous, 0 = normal. Set by [`classify`].
    pub decided_class: Option<u8>,
}

impl AntigenVerdict {
    pub fn presentations(&self) -> u64 {
        self.presented_mature + self.presented_semi
    }

    /// Fraction of presentations in mature context; `None` if never presented.
    pub fn mean_context(&self) -> Option<f64> {
        let total = self.presentations();
        (total > 0).then(|| self.presented_mature as f64 / total as f64)
    }
}

pub type Verdicts = BTreeMap<AntigenLabel, AntigenVerdict>;

/// Every antigen copy in every record counts as one presentation.
pub fn aggregate(records: &[MigrationRecord]) -> Verdicts {
    let mut out = Verdicts::new();
    for r in records {
        for label in &r.antigens {
            let v = out.entry(label.clone()).or_insert_with(|| AntigenVerdict {
                label: label.clone(),
                presented_mature: 0,
                presented_semi: 0,
                decided_class: None,
            });
            match r.context {
                Context::Mature => v.presented_mature += 1,
                Context::SemiMature => v.presented_semi += 1,
            }
        }
    }
    out
}

/// Marks a presented antigen anomalous (class 1) iff its mean context is
/// strictly above `threshold`.
pub fn classify(verdicts: &mut Verdicts, threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidConfig(format!(
            "classification threshold {threshold} outside [0, 1]"
        )));
    }
    for v in verdicts.values_mut() {
        v.decided_class = v.mean_context().map(|m| u8::from(m > threshold));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorCount {
    /// Presented antigen whose decided class disagrees with the truth.
    pub misclassified: usize,
    /// Labelled antigen that was never presented.
    pub unseen: usize,
}

impl ErrorCount {
    pub fn total(&self) -> usize {
        self.misclassified + self.unseen
    }
}

/// Compares classified verdicts with ground truth. A verdict without a
/// truth entry is a dataset defect.
pub fn count_errors(verdicts: &Verdicts, truth: &BTreeMap<AntigenLabel, u8>) -> Result<ErrorCount> {
    let mut count = ErrorCount::default();
    for (label, v) in verdicts {
        let expected = truth
            .get(label)
            .ok_or_else(|| Error::Dataset(format!("no ground truth for antigen {label}")))?;
        match v.decided_class {
            Some(c) if c == *expected => {}
            Some(_) => count.misclassified += 1,
            None => count.unseen += 1,
        }
    }
    count.unseen += truth.keys().filter(|l| !verdicts.contains_key(*l)).count();
    Ok(count)
}

/// Presentation counts of one process group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroupCount {
    pub mature: u64,
    pub presentations: u64,
}

impl GroupCount {
    pub fn mag(&self) -> Option<f64> {
        (self.presentations > 0).then(|| self.mature as f64 / self.presentations as f64)
    }
}

pub fn group_counts(verdicts: &Verdicts, groups: &[(String, Vec<AntigenLabel>)]) -> BTreeMap<String, GroupCount> {
    groups
        .iter()
        .map(|(name, labels)| {
            let mut c = GroupCount::default();
            for l in labels {
                if let Some(v) = verdicts.get(l) {
                    c.mature += v.presented_mature;
                    c.presentations += v.presentations();
                }
            }
            (name.clone(), c)
        })
        .collect()
}

/// Fraction of each group's presentations that were mature; `None` for a
/// group that was never presented.
pub fn process_mag(verdicts: &Verdicts, groups: &[(String, Vec<AntigenLabel>)]) -> BTreeMap<String, Option<f64>> {
    group_counts(verdicts, groups)
        .into_iter()
        .map(|(name, c)| (name, c.mag()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTTest {
    pub mean_difference: f64,
    pub degrees_of_freedom: usize,
    /// `None` when the differences have zero variance.
    pub statistic: Option<f64>,
    /// Two-tailed. 1 for identical samples, `None` for a constant nonzero shift.
    pub p_value: Option<f64>,
    pub exact_tie: bool,
}

pub fn paired_t_test(xs: &[f64], ys: &[f64]) -> Result<PairedTTest> {
    if xs.len() != ys.len() {
        return Err(Error::Stats(format!(
            "paired samples differ in length: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Stats("a paired test needs at least two pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Stats("samples must be finite".into()));
    }
    let d: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = d.len() - 1;
    let exact = d.iter().all(|v| *v == d[0]);
    if exact || var == 0.0 {
        return Ok(PairedTTest {
            mean_difference: mean,
            degrees_of_freedom: df,
            statistic: None,
            p_value: (mean == 0.0).then_some(1.0),
            exact_tie: true,
        });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Stats(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(PairedTTest {
        mean_difference: mean,
        degrees_of_freedom: df,
        statistic: Some(t),
        p_value: Some(p),
        exact_tie: false,
    })
}

/// Sample mean and standard deviation (n − 1); std is 0 for fewer than two values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// How per-run group fractions are combined across repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MagMode {
    /// Mean of the per-run fractions.
    #[default]
    PerRunMean,
    /// Mature presentations over all presentations, pooled across runs.
    Pooled,
}

/// One row of a process group table.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRow {
    pub name: String,
    pub mean_presentations: f64,
    pub mag: Option<f64>,
    pub mag_std: Option<f64>,
}

/// Results of repeated runs over the same input.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    /// Verdicts pooled over every run.
    pub verdicts: Verdicts,
    /// Group counts of every run, in run order.
    pub per_run_groups: Vec<BTreeMap<String, GroupCount>>,
    pub errors: Option<ErrorCount>,
}

impl RunSummary {
    /// Per-run fractions of one group, skipping runs where it was never presented.
    pub fn group_series(&self, name: &str) -> Vec<f64> {
        self.per_run_groups
            .iter()
            .filter_map(|g| g.get(name).and_then(GroupCount::mag))
            .collect()
    }

    pub fn group_rows(&self, mode: MagMode) -> Vec<GroupRow> {
        let Some(first) = self.per_run_groups.first() else {
            return Vec::new();
        };
        let runs = self.per_run_groups.len() as f64;
        first
            .keys()
            .map(|name| {
                let counts: Vec<GroupCount> = self
                    .per_run_groups
                    .iter()
                    .filter_map(|g| g.get(name).copied())
                    .collect();
                let series = self.group_series(name);
                let (mean, std) = mean_std(&series);
                let mag = match mode {
                    MagMode::PerRunMean => (!series.is_empty()).then_some(mean),
                    MagMode::Pooled => GroupCount {
                        mature: counts.iter().map(|c| c.mature).sum(),
                        presentations: counts.iter().map(|c| c.presentations).sum(),
                    }
                    .mag(),
                };
                GroupRow {
                    name: name.clone(),
                    mean_presentations: counts.iter().map(|c| c.presentations).sum::<u64>() as f64 / runs,
                    mag,
                    mag_std: (!series.is_empty()).then_some(std),
                }
            })
            .collect()
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

pub fn group_table(rows: &[GroupRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(7);
    let mut s = format!(
        "{:<width$}  {:>12}  {:>8}  {:>8}\n",
        "process", "antigen", "%mAg", "std"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>12.1}  {:>8}  {:>8}",
            r.name,
            r.mean_presentations,
            opt(r.mag, 3),
            opt(r.mag_std, 3)
        );
    }
    s
}

/// `process  antigen  mag  std`, tab separated, `-` for undefined.
pub fn group_tsv(rows: &[GroupRow]) -> String {
    let mut s = String::from("process\tantigen\tmag\tstd\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            r.name,
            r.mean_presentations,
            r.mag.map_or("-".into(), |v| v.to_string()),
            r.mag_std.map_or("-".into(), |v| v.to_string())
        );
    }
    s
}

/// `label  mature  semi  mean_context  class`, tab separated.
pub fn verdict_tsv(verdicts: &Verdicts) -> String {
    let mut s = String::from("label\tmature\tsemi\tmean_context\tclass\n");
    for v in verdicts.values() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            v.label,
            v.presented_mature,
            v.presented_semi,
            v.mean_context().map_or("-".into(), |m| m.to_string()),
            v.decided_class.map_or("-".into(), |c| c.to_string())
        );
    }
    s
}

pub fn verdict_table(verdicts: &Verdicts) -> String {
    let width = verdicts.keys().map(|l| l.as_str().len()).max().unwrap_or(0).max(5);
    let mut s = format!(
        "{:<width$}  {:>6}  {:>6}  {:>8}  {:>5}\n",
        "label", "mature", "semi", "context", "class"
    );
    for v in verdicts.values() {
        let _ = writeln!(
            s,
            "{:<width$}  {:>6}  {:>6}  {:>8}  {:>5}",
            v.label.as_str(),
            v.presented_mature,
            v.presented_semi,
            opt(v.mean_context(), 4),
            v.decided_class.map_or("-".into(), |c| c.to_string())
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CytokineState;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn l(s: &str) -> AntigenLabel {
        AntigenLabel::new(s).unwrap()
    }

    fn rec(context: Context, antigens: &[&str]) -> MigrationRecord {
        MigrationRecord {
            tick: 0,
            cell_id: 0,
            context,
            antigens: antigens.iter().map(|a| l(a)).collect(),
            cytokines: CytokineState::default(),
            threshold: 1.0,
        }
    }

    #[test]
    fn multiset_counting() {
        let v = aggregate(&[rec(Context::Mature, &["a", "a", "b"])]);
        assert_eq!(v[&l("a")].presented_mature, 2);
        assert_eq!(v[&l("b")].presented_mature, 1);
        assert!(aggregate(&[]).is_empty());
    }

    #[test]
    fn mean_context_two_thirds() {
        let v = aggregate(&[
            rec(Context::Mature, &["a"]),
            rec(Context::SemiMature, &["a"]),
            rec(Context::Mature, &["a"]),
        ]);
        assert_abs_diff_eq!(v[&l("a")].mean_context().unwrap(), 2.0 / 3.0);
    }

    fn verdict(mature: u64, semi: u64) -> Verdicts {
        let mut v = Verdicts::new();
        v.insert(
            l("x"),
            AntigenVerdict {
                label: l("x"),
                presented_mature: mature,
                presented_semi: semi,
                decided_class: None,
            },
        );
        v
    }

    #[test]
    fn threshold_is_strict() {
        let mut v = verdict(66, 34);
        classify(&mut v, 0.65).unwrap();
        assert_eq!(v[&l("x")].decided_class, Some(1));
        let mut v = verdict(65, 35);
        classify(&mut v, 0.65).unwrap();
        assert_eq!(v[&l("x")].decided_class, Some(0));
        let mut v = verdict(0, 10);
        classify(&mut v, 0.65).unwrap();
        assert_eq!(v[&l("x")].decided_class, Some(0));
        assert!(classify(&mut v, 1.5).is_err());
    }

    #[test]
    fn error_counting() {
        let mut v = aggregate(&[rec(Context::Mature, &["a"]), rec(Context::SemiMature, &["b"])]);
        classify(&mut v, 0.65).unwrap();
        let truth: BTreeMap<_, _> = [(l("a"), 1), (l("b"), 0), (l("c"), 1)].into();
        assert_eq!(
            count_errors(&v, &truth).unwrap(),
            ErrorCount {
                misclassified: 0,
                unseen: 1
            }
        );
        let wrong: BTreeMap<_, _> = [(l("a"), 0), (l("b"), 1)].into();
        assert_eq!(count_errors(&v, &wrong).unwrap().total(), 2);
        let partial: BTreeMap<_, _> = [(l("a"), 1)].into();
        assert!(matches!(count_errors(&v, &partial), Err(Error::Dataset(_))));
    }

    #[test]
    fn group_fractions() {
        let mut v = verdict(843, 157);
        v.insert(
            l("y"),
            AntigenVerdict {
                label: l("y"),
                presented_mature: 1,
                presented_semi: 3,
                decided_class: None,
            },
        );
        let groups = vec![
            ("scanner".to_string(), vec![l("x")]),
            ("idle".to_string(), vec![l("z")]),
            ("single".to_string(), vec![l("y")]),
        ];
        let m = process_mag(&v, &groups);
        assert_abs_diff_eq!(m["scanner"].unwrap(), 0.843);
        assert_eq!(m["idle"], None);
        assert_eq!(m["single"], v[&l("y")].mean_context());
    }

    #[test]
    fn t_test_reference_values() {
        let r = paired_t_test(&[0.91, 0.85, 0.88], &[0.40, 0.42, 0.44]).unwrap();
        assert_abs_diff_eq!(r.statistic.unwrap(), 18.2785465274976, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p_value.unwrap(), 0.0029796976768238573, epsilon = 1e-9);
        assert_eq!(r.degrees_of_freedom, 2);
        let r = paired_t_test(&[1.2, 3.4, 2.2, 5.0, 4.1], &[1.0, 2.9, 2.5, 4.0, 3.3]).unwrap();
        assert_abs_diff_eq!(r.statistic.unwrap(), 1.9184911688665691, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p_value.unwrap(), 0.12749279131561178, epsilon = 1e-9);
    }

    #[test]
    fn t_test_degenerate_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let tie = paired_t_test(&xs, &xs).unwrap();
        assert!(tie.exact_tie);
        assert_eq!((tie.mean_difference, tie.p_value), (0.0, Some(1.0)));
        let shift = paired_t_test(&xs, &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(shift.exact_tie);
        assert_eq!(shift.mean_difference, 1.0);
        assert_eq!(shift.p_value, None);
        assert!(matches!(paired_t_test(&xs, &[1.0]), Err(Error::Stats(_))));
        assert!(paired_t_test(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn summary_rows() {
        let mk = |m, p| {
            BTreeMap::from([(
                "a".to_string(),
                GroupCount {
                    mature: m,
                    presentations: p,
                },
            )])
        };
        let s = RunSummary {
            per_run_groups: vec![mk(1, 2), mk(9, 10), mk(0, 0)],
            ..Default::default()
        };
        let per_run = &s.group_rows(MagMode::PerRunMean)[0];
        assert_abs_diff_eq!(per_run.mag.unwrap(), 0.7);
        assert_abs_diff_eq!(per_run.mean_presentations, 4.0);
        let pooled = &s.group_rows(MagMode::Pooled)[0];
        assert_abs_diff_eq!(pooled.mag.unwrap(), 10.0 / 12.0);
        assert!(group_table(&s.group_rows(MagMode::PerRunMean)).contains("0.700"));
        assert!(group_tsv(&s.group_rows(MagMode::PerRunMean)).starts_with("process\t"));
    }

    fn records() -> impl Strategy<Value = Vec<MigrationRecord>> {
        let one = (any::<bool>(), proptest::collection::vec(0..6u8, 0..5)).prop_map(|(m, a)| {
            let names: Vec<String> = a.iter().map(|i| format!("g{i}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            rec(if m { Context::Mature } else { Context::SemiMature }, &refs)
        });
        proptest::collection::vec(one, 0..30)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn aggregate_is_order_independent(recs in records(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = recs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(aggregate(&recs), aggregate(&shuffled));
        }

        #[test]
        fn presentations_are_conserved(recs in records()) {
            let v = aggregate(&recs);
            let total: u64 = v.values().map(AntigenVerdict::presentations).sum();
            prop_assert_eq!(total as usize, recs.iter().map(|r| r.antigens.len()).sum::<usize>());
        }

        #[test]
        fn threshold_extremes(recs in records()) {
            let mut v = aggregate(&recs);
            classify(&mut v, 1.0).unwrap();
            prop_assert!(v.values().all(|x| x.decided_class == Some(0)));
            classify(&mut v, 0.0).unwrap();
            // Class 1 needs a mean context above zero.
            prop_assert!(v.values().all(|x| x.decided_class == Some(u8::from(x.presented_mature > 0))));
        }

        #[test]
        fn union_mag_is_weighted_mean(recs in records()) {
            let v = aggregate(&recs);
            let a: Vec<AntigenLabel> = (0..3).map(|i| l(&format!("g{i}"))).collect();
            let b: Vec<AntigenLabel> = (3..6).map(|i| l(&format!("g{i}"))).collect();
            let both: Vec<AntigenLabel> = a.iter().chain(&b).cloned().collect();
            let m = process_mag(&v, &[("a".into(), a), ("b".into(), b), ("u".into(), both)]);
            if let (Some(x), Some(y), Some(u)) = (m["a"], m["b"], m["u"]) {
                prop_assert!(u >= x.min(y) - 1e-12 && u <= x.max(y) + 1e-12);
            }
        }
    }
}
