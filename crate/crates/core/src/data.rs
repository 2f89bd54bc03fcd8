//! Study-level 2×2 counts and their logit-scale outcomes.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{Sym2, Vec2};
use crate::math::logit;
use crate::{Error, Result};

/// One study's 2×2 table against the reference standard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Study2x2 {
    pub label: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_group: Option<String>,
}

impl Study2x2 {
    pub fn new(label: impl Into<String>, tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Study2x2 { label: label.into(), tp, fp, fn_, tn, test_group: None }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.test_group = Some(group.into());
        self
    }

    /// Diseased participants, `tp + fn`.
    pub fn n_a(&self) -> u64 {
        self.tp + self.fn_
    }

    /// Non-diseased participants, `fp + tn`.
    pub fn n_b(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.n_a() + self.n_b()
    }

    pub fn has_zero_cell(&self) -> bool {
        self.tp == 0 || self.fp == 0 || self.fn_ == 0 || self.tn == 0
    }

    fn validate(&self) -> Result<()> {
        if self.n_a() == 0 {
            return Err(Error::EmptyArm { label: self.label.clone(), arm: "diseased" });
        }
        if self.n_b() == 0 {
            return Err(Error::EmptyArm { label: self.label.clone(), arm: "non-diseased" });
        }
        Ok(())
    }
}

/// An ordered collection of studies. Order is meaningful: influence output
/// refers to studies by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    studies: Vec<Study2x2>,
}

impl Dataset {
    /// Validates arm sizes and label uniqueness.
    pub fn new(name: impl Into<String>, studies: Vec<Study2x2>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &studies {
            s.validate()?;
            if !seen.insert(s.label.as_str()) {
                return Err(Error::DuplicateLabel(s.label.clone()));
            }
        }
        Ok(Dataset { name: name.into(), studies })
    }

    pub fn studies(&self) -> &[Study2x2] {
        &self.studies
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    /// Distinct test groups in order of first appearance.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for g in self.studies.iter().filter_map(|s| s.test_group.as_ref()) {
            if !out.iter().any(|o| o == g) {
                out.push(g.clone());
            }
        }
        out
    }

    /// The studies belonging to `group`, in file order.
    pub fn group(&self, group: &str) -> Option<Dataset> {
        let studies: Vec<Study2x2> = self
            .studies
            .iter()
            .filter(|s| s.test_group.as_deref() == Some(group))
            .cloned()
            .collect();
        if studies.is_empty() {
            return None;
        }
        let mut name = self.name.clone();
        name.push(':');
        name.push_str(group);
        Some(Dataset { name, studies })
    }

    /// The dataset with study `index` removed.
    pub fn without(&self, index: usize) -> Dataset {
        let mut studies = self.studies.clone();
        studies.remove(index);
        Dataset { name: self.name.clone(), studies }
    }
}

/// Zero-cell handling applied before taking logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionPolicy {
    /// Add 0.5 to all four cells of studies that contain a zero cell.
    #[default]
    AffectedStudies,
    /// Add 0.5 to every cell of every study.
    AllStudies,
    /// No correction; zero cells are an error.
    None,
}

impl fmt::Display for CorrectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrectionPolicy::AffectedStudies => "affected-studies",
            CorrectionPolicy::AllStudies => "all-studies",
            CorrectionPolicy::None => "none",
        })
    }
}

/// Logit sensitivity and logit FPR of one study with their within-study
/// variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitOutcome {
    pub y_a: f64,
    pub y_b: f64,
    pub s2_a: f64,
    pub s2_b: f64,
}

impl LogitOutcome {
    pub fn y(&self) -> Vec2 {
        [self.y_a, self.y_b]
    }

    /// Within-study covariance; diagonal under conditional independence.
    pub fn s(&self) -> Sym2 {
        Sym2::diag(self.s2_a, self.s2_b)
    }

    /// Computes the outcome from raw counts under `policy`.
    pub fn from_counts(
        label: &str,
        tp: u64,
        fp: u64,
        fn_: u64,
        tn: u64,
        policy: CorrectionPolicy,
    ) -> Result<Self> {
        if tp + fn_ == 0 {
            return Err(Error::EmptyArm { label: label.into(), arm: "diseased" });
        }
        if fp + tn == 0 {
            return Err(Error::EmptyArm { label: label.into(), arm: "non-diseased" });
        }
        let zero = tp == 0 || fp == 0 || fn_ == 0 || tn == 0;
        let add = match policy {
            CorrectionPolicy::AllStudies => 0.5,
            CorrectionPolicy::AffectedStudies if zero => 0.5,
            CorrectionPolicy::AffectedStudies => 0.0,
            CorrectionPolicy::None if zero => return Err(Error::ZeroCell(label.into())),
            CorrectionPolicy::None => 0.0,
        };
        let (tp, fp, fn_, tn) =
            (tp as f64 + add, fp as f64 + add, fn_ as f64 + add, tn as f64 + add);
        Ok(LogitOutcome {
            y_a: logit(tp / (tp + fn_)),
            y_b: logit(fp / (fp + tn)),
            s2_a: 1.0 / tp + 1.0 / fn_,
            s2_b: 1.0 / fp + 1.0 / tn,
        })
    }
}

/// Per-study outcomes in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSet {
    pub outcomes: Vec<LogitOutcome>,
    /// Name of the dataset the outcomes came from.
    pub source: String,
    pub correction_policy: CorrectionPolicy,
}

impl OutcomeSet {
    pub fn new(source: impl Into<String>, outcomes: Vec<LogitOutcome>, policy: CorrectionPolicy) -> Self {
        OutcomeSet { outcomes, source: source.into(), correction_policy: policy }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn without(&self, index: usize) -> OutcomeSet {
        let mut outcomes = self.outcomes.clone();
        outcomes.remove(index);
        OutcomeSet { outcomes, source: self.source.clone(), correction_policy: self.correction_policy }
    }
}

/// Logit-transforms every study of `data` under `policy`.
pub fn to_outcomes(data: &Dataset, policy: CorrectionPolicy) -> Result<OutcomeSet> {
    let outcomes = data
        .studies()
        .iter()
        .map(|s| LogitOutcome::from_counts(&s.label, s.tp, s.fp, s.fn_, s.tn, policy))
        .collect::<Result<Vec<_>>>()?;
    Ok(OutcomeSet::new(data.name.clone(), outcomes, policy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::expit;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    fn one(tp: u64, fp: u64, fn_: u64, tn: u64, policy: CorrectionPolicy) -> LogitOutcome {
        LogitOutcome::from_counts("s", tp, fp, fn_, tn, policy).unwrap()
    }

    #[test]
    fn balanced_arm_has_zero_logit() {
        let o = one(5, 3, 5, 9, CorrectionPolicy::None);
        assert_eq!(o.y_a, 0.0);
        assert!((o.s2_a - 0.4).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_outcome() {
        let o = one(10, 2, 10, 40, CorrectionPolicy::AffectedStudies);
        assert!((o.s2_a - 0.2).abs() < 1e-15);
        // logit(2/42) = ln(2/40) = -ln 20
        assert!((o.y_b - (-2.995_732_273_553_991)).abs() < 1e-12);
        assert!((o.s2_b - (0.5 + 1.0 / 40.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_cell_correction_affected_studies() {
        let o = one(12, 3, 0, 20, CorrectionPolicy::AffectedStudies);
        assert!((o.y_a - logit(12.5 / 13.0)).abs() < 1e-15);
        assert!((o.s2_a - (1.0 / 12.5 + 1.0 / 0.5)).abs() < 1e-15);
        assert!((o.y_b - logit(3.5 / 24.0)).abs() < 1e-15);
    }

    #[test]
    fn all_studies_corrects_clean_tables() {
        let o = one(10, 2, 10, 40, CorrectionPolicy::AllStudies);
        assert!((o.y_b - logit(2.5 / 43.0)).abs() < 1e-15);
    }

    #[test]
    fn none_rejects_zero_cells() {
        let err = LogitOutcome::from_counts("x", 0, 3, 4, 5, CorrectionPolicy::None).unwrap_err();
        assert_eq!(err, Error::ZeroCell("x".into()));
    }

    #[test]
    fn empty_arm_is_rejected() {
        assert!(matches!(
            Dataset::new("d", vec![Study2x2::new("a", 0, 3, 0, 5)]),
            Err(Error::EmptyArm { .. })
        ));
        assert!(matches!(
            LogitOutcome::from_counts("a", 2, 0, 3, 0, CorrectionPolicy::AllStudies),
            Err(Error::EmptyArm { arm: "non-diseased", .. })
        ));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let r = Dataset::new("d", vec![Study2x2::new("a", 1, 1, 1, 1), Study2x2::new("a", 2, 2, 2, 2)]);
        assert_eq!(r.unwrap_err(), Error::DuplicateLabel("a".into()));
    }

    #[test]
    fn groups_preserve_order() {
        let d = Dataset::new(
            "c",
            vec![
                Study2x2::new("1", 1, 1, 1, 1).with_group("LAG"),
                Study2x2::new("2", 1, 1, 1, 1).with_group("CT"),
                Study2x2::new("3", 1, 1, 1, 1).with_group("LAG"),
            ],
        )
        .unwrap();
        assert_eq!(d.groups(), vec![String::from("LAG"), String::from("CT")]);
        let lag = d.group("LAG").unwrap();
        assert_eq!(lag.len(), 2);
        assert_eq!(lag.studies()[1].label, "3");
        assert!(d.group("MRI").is_none());
    }

    proptest! {
        #[test]
        fn expit_round_trips_to_corrected_counts(
            tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500,
        ) {
            prop_assume!(tp + fn_ > 0 && fp + tn > 0);
            let o = one(tp, fp, fn_, tn, CorrectionPolicy::AffectedStudies);
            let add = if tp == 0 || fp == 0 || fn_ == 0 || tn == 0 { 0.5 } else { 0.0 };
            let n_a = (tp + fn_) as f64 + 2.0 * add;
            let n_b = (fp + tn) as f64 + 2.0 * add;
            prop_assert!((expit(o.y_a) * n_a - (tp as f64 + add)).abs() < 1e-12 * n_a.max(1.0));
            prop_assert!((expit(o.y_b) * n_b - (fp as f64 + add)).abs() < 1e-12 * n_b.max(1.0));
            prop_assert!(o.s2_a > 0.0 && o.s2_b > 0.0 && o.s2_a.is_finite() && o.s2_b.is_finite());
        }

        #[test]
        fn sensitivity_logit_increases_with_tp(tp in 1u64..300, fn_ in 1u64..300, bump in 1u64..50) {
            let lo = one(tp, 5, fn_, 5, CorrectionPolicy::None);
            let hi = one(tp + bump, 5, fn_, 5, CorrectionPolicy::None);
            prop_assert!(hi.y_a > lo.y_a);
        }

        #[test]
        fn none_and_affected_agree_without_zeros(
            counts in proptest::collection::vec((1u64..200, 1u64..200, 1u64..200, 1u64..200), 1..12)
        ) {
            let studies = counts
                .iter()
                .enumerate()
                .map(|(i, &(a, b, c, d))| Study2x2::new(format!("s{i}"), a, b, c, d))
                .collect();
            let data = Dataset::new("p", studies).unwrap();
            let a = to_outcomes(&data, CorrectionPolicy::None).unwrap();
            let b = to_outcomes(&data, CorrectionPolicy::AffectedStudies).unwrap();
            prop_assert_eq!(a.outcomes, b.outcomes);
        }
    }
}
