//! Leave-one-study-out influence of each study on the SROC AUC.
//!
//! `ΔAUC(i) = AUC^(−i) − AUC`: positive when the AUC rises after study `i`
//! is removed. A study is flagged when its observed ΔAUC falls outside the
//! percentile thresholds of its own bootstrap ΔAUC distribution.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    bootstrap_influence_prepared, leave_one_out_deltas, BootstrapConfig, Prepared, ReplicateFailure,
};
use crate::data::Dataset;
use crate::exec::Executor;
use crate::{Error, Result, MIN_STUDIES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRow {
    /// 1-based position in the dataset.
    pub index: usize,
    pub label: String,
    /// AUC with this study removed; `None` if that refit failed.
    pub auc_loo: Option<f64>,
    pub delta_auc: Option<f64>,
    pub lo: f64,
    pub hi: f64,
    pub influential: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceTable {
    pub full_auc: f64,
    /// One row per study, in dataset order.
    pub rows: Vec<InfluenceRow>,
    pub requested_b: usize,
    pub effective_b: usize,
    pub failures: Vec<ReplicateFailure>,
}

impl InfluenceTable {
    /// Rows ordered by decreasing |ΔAUC|; failed rows last.
    pub fn sorted_by_magnitude(&self) -> Vec<&InfluenceRow> {
        let mut rows: Vec<&InfluenceRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            let key = |r: &InfluenceRow| r.delta_auc.map_or(-1.0, f64::abs);
            key(b).total_cmp(&key(a)).then(a.index.cmp(&b.index))
        });
        rows
    }
}

/// Observed leave-one-out ΔAUC for every study with bootstrap thresholds.
pub fn leave_one_out_table<E: Executor>(data: &Dataset, config: &BootstrapConfig, exec: &E) -> Result<InfluenceTable> {
    config.validate()?;
    if data.len() <= MIN_STUDIES {
        return Err(Error::TooFewStudies { needed: MIN_STUDIES + 1, got: data.len() });
    }
    let prep = Prepared::new(data, config)?;
    let (full_auc, observed) = leave_one_out_deltas(&prep.outcomes, config)?;
    let dist = bootstrap_influence_prepared(&prep, config, exec)?;

    let rows = data
        .studies()
        .iter()
        .zip(observed)
        .zip(&dist.thresholds)
        .enumerate()
        .map(|(i, ((study, delta), &(lo, hi)))| {
            let (delta_auc, error) = match delta {
                Ok(d) => (Some(d), None),
                Err(e) => (None, Some(e.to_string())),
            };
            InfluenceRow {
                index: i + 1,
                label: study.label.clone(),
                auc_loo: delta_auc.map(|d| full_auc + d),
                delta_auc,
                lo,
                hi,
                influential: delta_auc.is_some_and(|d| d < lo || d > hi),
                error,
            }
        })
        .collect();

    Ok(InfluenceTable {
        full_auc,
        rows,
        requested_b: dist.requested_b,
        effective_b: dist.effective_b,
        failures: dist.failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    AucIncreasesWhenRemoved,
    AucDecreasesWhenRemoved,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AucIncreasesWhenRemoved => "AUC increases when removed",
            Direction::AucDecreasesWhenRemoved => "AUC decreases when removed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedStudy {
    pub row: InfluenceRow,
    pub direction: Direction,
}

/// Rows whose ΔAUC lies outside their thresholds, tagged with its direction.
pub fn flag_influential(rows: &[InfluenceRow]) -> Vec<FlaggedStudy> {
    rows.iter()
        .filter_map(|r| {
            let d = r.delta_auc?;
            if !(d < r.lo || d > r.hi) {
                return None;
            }
            let direction =
                if d > 0.0 { Direction::AucIncreasesWhenRemoved } else { Direction::AucDecreasesWhenRemoved };
            Some(FlaggedStudy { row: r.clone(), direction })
        })
        .collect()
}
