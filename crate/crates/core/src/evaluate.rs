//! Verification and identification metrics.
//!
//! Each probe is scored once against every class mean; accept/reject
//! decisions are then a pure function of the scores and the threshold `tau`,
//! which makes threshold sweeps cheap.
//!
//! Decision rule, with `d(c)` the distance to class `c`'s mean:
//! * positive probe of class `c`: TP iff the nearest class is `c` and its
//!   distance is `<= tau`, otherwise FN;
//! * negative probe filed under class `c`: FP iff it is accepted (any
//!   class with `d <= tau` under [`NegativeRule::AnyClass`], or `d(c) <= tau`
//!   under [`NegativeRule::OwnClass`]), otherwise TN.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crate::pipeline::run_protocol;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, d: Decision) {
        match d {
            Decision::TruePositive => self.tp += 1,
            Decision::FalsePositive => self.fp += 1,
            Decision::FalseNegative => self.fn_ += 1,
            Decision::TrueNegative => self.tn += 1,
        }
    }
}

/// Exact count ratio; absent when the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn value(self) -> Option<f64> {
        (self.den != 0).then(|| self.num as f64 / self.den as f64)
    }

    /// `1 - self`, exactly.
    pub fn complement(self) -> Ratio {
        Ratio {
            num: self.den - self.num,
            den: self.den,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metrics {
    pub sensitivity: Ratio,
    pub specificity: Ratio,
    pub fpr: Ratio,
    pub fnr: Ratio,
    pub accuracy: Ratio,
}

pub fn compute_metrics(c: &ConfusionCounts) -> Metrics {
    let sensitivity = Ratio { num: c.tp, den: c.tp + c.fn_ };
    let specificity = Ratio { num: c.tn, den: c.fp + c.tn };
    Metrics {
        sensitivity,
        specificity,
        fpr: specificity.complement(),
        fnr: sensitivity.complement(),
        accuracy: Ratio { num: c.tp + c.tn, den: c.total() },
    }
}

/// Percentage rounded to 0.01, or `n/a` for an undefined ratio.
pub fn format_percent(r: Ratio) -> String {
    match r.value() {
        Some(v) => format!("{:.2}%", 100.0 * v),
        None => "n/a".to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NegativeRule {
    /// Rejected only if every class distance exceeds `tau`.
    #[default]
    AnyClass,
    /// Rejected if the distance to the class it was filed under exceeds `tau`.
    OwnClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum ThresholdRule {
    /// Nearest-rank percentile (0, 100] of training self-class distances.
    Percentile(f64),
    Fixed(f64),
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Percentile(100.0)
    }
}

pub fn calibrate_threshold(self_distances: &[f64], rule: ThresholdRule) -> Result<f64> {
    match rule {
        ThresholdRule::Fixed(t) => Ok(t),
        ThresholdRule::Percentile(p) => {
            if !(p > 0.0 && p <= 100.0) {
                return Err(Error::invalid(format!("percentile must be in (0, 100], got {p}")));
            }
            if self_distances.is_empty() {
                return Err(Error::invalid("no training distances to calibrate the threshold"));
            }
            let mut d = self_distances.to_vec();
            d.sort_by(f64::total_cmp);
            let rank = ((p / 100.0) * d.len() as f64).ceil() as usize;
            Ok(d[rank.clamp(1, d.len()) - 1])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub probe_id: String,
    /// Class the probe is filed under in the manifest.
    pub class_id: String,
    pub kind: ProbeKind,
    pub predicted: String,
    pub best_score: f64,
    pub own_class_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
}

pub fn decide(o: &ProbeOutcome, tau: f64, rule: NegativeRule) -> Decision {
    match o.kind {
        ProbeKind::Positive => {
            if o.predicted == o.class_id && o.best_score <= tau {
                Decision::TruePositive
            } else {
                Decision::FalseNegative
            }
        }
        ProbeKind::Negative => {
            let d = match rule {
                NegativeRule::AnyClass => o.best_score,
                NegativeRule::OwnClass => o.own_class_score,
            };
            if d <= tau {
                Decision::FalsePositive
            } else {
                Decision::TrueNegative
            }
        }
    }
}

pub fn count(outcomes: &[ProbeOutcome], tau: f64, rule: NegativeRule) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for o in outcomes {
        c.record(decide(o, tau, rule));
    }
    c
}

pub fn threshold_sweep(outcomes: &[ProbeOutcome], taus: &[f64], rule: NegativeRule) -> Vec<(f64, ConfusionCounts)> {
    taus.iter().map(|&t| (t, count(outcomes, t, rule))).collect()
}

/// Rank-1 identification rate over positive probes.
pub fn rank1(outcomes: &[ProbeOutcome]) -> Ratio {
    let pos = outcomes.iter().filter(|o| o.kind == ProbeKind::Positive);
    let (hits, total) = pos.fold((0, 0), |(h, n), o| (h + u64::from(o.predicted == o.class_id), n + 1));
    Ratio { num: hits, den: total }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBreakdown {
    pub class_id: String,
    pub counts: ConfusionCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub fingerprint: String,
    pub tau: f64,
    pub negative_rule: NegativeRule,
    pub counts: ConfusionCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub accuracy: Option<f64>,
    pub rank1_accuracy: Option<f64>,
    pub per_class: Vec<ClassBreakdown>,
    pub config: serde_json::Value,
}

pub fn build_report(
    outcomes: &[ProbeOutcome],
    tau: f64,
    rule: NegativeRule,
    fingerprint: &str,
    config: serde_json::Value,
) -> EvalReport {
    let counts = count(outcomes, tau, rule);
    let m = compute_metrics(&counts);
    let mut per_class: BTreeMap<&str, ConfusionCounts> = BTreeMap::new();
    for o in outcomes {
        per_class.entry(&o.class_id).or_default().record(decide(o, tau, rule));
    }
    let per_class = per_class
        .into_iter()
        .map(|(id, counts)| {
            let m = compute_metrics(&counts);
            ClassBreakdown {
                class_id: id.to_string(),
                counts,
                sensitivity: m.sensitivity.value(),
                specificity: m.specificity.value(),
            }
        })
        .collect();
    EvalReport {
        version: REPORT_VERSION,
        fingerprint: fingerprint.to_string(),
        tau,
        negative_rule: rule,
        counts,
        sensitivity: m.sensitivity.value(),
        specificity: m.specificity.value(),
        fpr: m.fpr.value(),
        fnr: m.fnr.value(),
        accuracy: m.accuracy.value(),
        rank1_accuracy: rank1(outcomes).value(),
        per_class,
        config,
    }
}

/// 2×2 confusion table followed by the derived rates.
pub fn render_table(report: &EvalReport) -> String {
    let c = &report.counts;
    let cell = |label: &str, v: u64| format!("({label}) = {v}");
    let mut s = String::new();
    let _ = writeln!(s, "{:<10}{:>20}{:>20}", "", "Positive", "Negative");
    let _ = writeln!(s, "{:<10}{:>20}{:>20}", "Positive", cell("TP", c.tp), cell("FP", c.fp));
    let _ = writeln!(s, "{:<10}{:>20}{:>20}", "Negative", cell("FN", c.fn_), cell("TN", c.tn));
    let _ = writeln!(s);
    let rows = [
        ("Sensitivity = TP / (TP + FN)", report.sensitivity),
        ("Specificity = TN / (FP + TN)", report.specificity),
        ("False positive rate = FP / (FP + TN)", report.fpr),
        ("False negative rate = FN / (TP + FN)", report.fnr),
        ("Accuracy = (TP + TN) / (TP + TN + FP + FN)", report.accuracy),
        ("Rank-1 identification", report.rank1_accuracy),
    ];
    for (label, v) in rows {
        let shown = v.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
        let _ = writeln!(s, "{label:<44}{shown:>10}");
    }
    let _ = writeln!(s, "{:<44}{:>10}", "Threshold tau", report.tau);
    s
}

pub fn decisions_csv(outcomes: &[ProbeOutcome], tau: f64, rule: NegativeRule) -> String {
    let mut s = String::from("probe_id,class_id,kind,predicted,best_score,own_class_score,decision\n");
    for o in outcomes {
        let kind = match o.kind {
            ProbeKind::Positive => "positive",
            ProbeKind::Negative => "negative",
        };
        let d = match decide(o, tau, rule) {
            Decision::TruePositive => "TP",
            Decision::FalsePositive => "FP",
            Decision::FalseNegative => "FN",
            Decision::TrueNegative => "TN",
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            o.probe_id, o.class_id, kind, o.predicted, o.best_score, o.own_class_score, d
        );
    }
    s
}

pub fn sweep_csv(sweep: &[(f64, ConfusionCounts)]) -> String {
    let mut s = String::from("tau,tp,fp,fn,tn,sensitivity,specificity\n");
    for (t, c) in sweep {
        let m = compute_metrics(c);
        let f = |r: Ratio| r.value().map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{t},{},{},{},{},{},{}", c.tp, c.fp, c.fn_, c.tn, f(m.sensitivity), f(m.specificity));
    }
    s
}

/// For each class subject, draws `per_class` items belonging to other
/// subjects with a seeded shuffle. `pool` holds `(subject, item)` pairs.
pub fn assign_negatives(
    pool: &[(String, String)],
    classes: &[String],
    per_class: usize,
    seed: u64,
) -> Result<Vec<(String, Vec<String>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    classes
        .iter()
        .map(|class| {
            let mut others: Vec<&String> = pool.iter().filter(|(s, _)| s != class).map(|(_, item)| item).collect();
            if others.len() < per_class {
                return Err(Error::invalid(format!(
                    "class '{class}' needs {per_class} negatives, only {} available",
                    others.len()
                )));
            }
            others.shuffle(&mut rng);
            Ok((class.clone(), others.into_iter().take(per_class).cloned().collect()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    fn outcome(kind: ProbeKind, class: &str, predicted: &str, best: f64, own: f64) -> ProbeOutcome {
        ProbeOutcome {
            probe_id: "p".into(),
            class_id: class.into(),
            kind,
            predicted: predicted.into(),
            best_score: best,
            own_class_score: own,
        }
    }

    #[test]
    fn published_style_counts() {
        let m = compute_metrics(&counts(1416, 31, 184, 1369));
        assert_eq!(format_percent(m.sensitivity), "88.50%");
        assert_eq!(m.sensitivity, Ratio { num: 1416, den: 1600 });
        assert_eq!(m.fnr, Ratio { num: 184, den: 1600 });
        assert_eq!(m.fpr, Ratio { num: 31, den: 1400 });
    }

    #[test]
    fn perfect_classifier() {
        let m = compute_metrics(&counts(10, 0, 0, 5));
        for r in [m.sensitivity, m.specificity, m.accuracy] {
            assert_eq!(r.value(), Some(1.0));
        }
        assert_eq!(m.fpr.value(), Some(0.0));
    }

    #[test]
    fn zero_denominators_are_absent() {
        let m = compute_metrics(&counts(0, 0, 0, 0));
        assert_eq!(m.sensitivity.value(), None);
        assert_eq!(m.accuracy.value(), None);
        assert_eq!(format_percent(m.specificity), "n/a");
        let m = compute_metrics(&counts(3, 0, 1, 0));
        assert_eq!(m.specificity.value(), None);
        assert_eq!(m.sensitivity.value(), Some(0.75));
    }

    #[test]
    fn percentile_threshold() {
        let d = [3.0, 1.0, 2.0, 5.0];
        assert_eq!(calibrate_threshold(&d, ThresholdRule::Percentile(100.0)).unwrap(), 5.0);
        assert_eq!(calibrate_threshold(&d, ThresholdRule::Percentile(50.0)).unwrap(), 2.0);
        assert_eq!(calibrate_threshold(&d, ThresholdRule::Percentile(1.0)).unwrap(), 1.0);
        assert_eq!(calibrate_threshold(&[], ThresholdRule::Fixed(4.0)).unwrap(), 4.0);
        assert!(calibrate_threshold(&[], ThresholdRule::Percentile(90.0)).is_err());
        assert!(calibrate_threshold(&d, ThresholdRule::Percentile(0.0)).is_err());
    }

    #[test]
    fn decisions() {
        let rule = NegativeRule::AnyClass;
        assert_eq!(decide(&outcome(ProbeKind::Positive, "a", "a", 1.0, 1.0), 2.0, rule), Decision::TruePositive);
        assert_eq!(decide(&outcome(ProbeKind::Positive, "a", "b", 1.0, 3.0), 2.0, rule), Decision::FalseNegative);
        assert_eq!(decide(&outcome(ProbeKind::Positive, "a", "a", 3.0, 3.0), 2.0, rule), Decision::FalseNegative);
        assert_eq!(decide(&outcome(ProbeKind::Negative, "a", "b", 1.0, 5.0), 2.0, rule), Decision::FalsePositive);
        assert_eq!(
            decide(&outcome(ProbeKind::Negative, "a", "b", 1.0, 5.0), 2.0, NegativeRule::OwnClass),
            Decision::TrueNegative
        );
        assert_eq!(decide(&outcome(ProbeKind::Negative, "a", "a", 3.0, 3.0), 2.0, rule), Decision::TrueNegative);
    }

    #[test]
    fn report_groups_by_class() {
        let outcomes = vec![
            outcome(ProbeKind::Positive, "b", "b", 1.0, 1.0),
            outcome(ProbeKind::Positive, "a", "b", 1.0, 2.0),
            outcome(ProbeKind::Negative, "a", "b", 9.0, 9.0),
        ];
        let r = build_report(&outcomes, 5.0, NegativeRule::AnyClass, "fp", serde_json::Value::Null);
        assert_eq!(r.counts, counts(1, 0, 1, 1));
        assert_eq!(r.per_class.len(), 2);
        assert_eq!(r.per_class[0].class_id, "a");
        assert_eq!(r.per_class[0].counts, counts(0, 0, 1, 1));
        assert_eq!(r.rank1_accuracy, Some(0.5));
        let table = render_table(&r);
        assert!(table.contains("(TP) = 1"));
        assert!(table.contains("50.00%"));
    }

    #[test]
    fn empty_probe_set() {
        let r = build_report(&[], 1.0, NegativeRule::AnyClass, "fp", serde_json::Value::Null);
        assert_eq!(r.counts.total(), 0);
        assert!(r.sensitivity.is_none() && r.specificity.is_none() && r.accuracy.is_none());
        assert!(r.rank1_accuracy.is_none());
    }

    #[test]
    fn negatives_come_from_other_subjects() {
        let pool: Vec<(String, String)> = (0..4)
            .flat_map(|s| (0..3).map(move |i| (format!("s{s}"), format!("s{s}/{i}"))))
            .collect();
        let classes: Vec<String> = (0..4).map(|s| format!("s{s}")).collect();
        let a = assign_negatives(&pool, &classes, 5, 9).unwrap();
        let b = assign_negatives(&pool, &classes, 5, 9).unwrap();
        assert_eq!(a, b);
        for (class, items) in &a {
            assert_eq!(items.len(), 5);
            assert!(items.iter().all(|i| !i.starts_with(&format!("{class}/"))));
        }
        assert!(assign_negatives(&pool, &classes, 10, 0).is_err());
    }
}
