//! Key-value scenario files and the coverage results ledger.
//!
//! ```text
//! # moderate heterogeneity
//! n_studies = 20
//! n_a = 200
//! n_b = 200
//! mu_a = 1.0
//! mu_b = -1.5
//! sigma_a = 0.5
//! sigma_b = 0.5
//! rho = -0.4
//! replications = 500
//! b = 1000
//! seed = 20200101
//! ```
//!
//! Unspecified keys keep their default values. `n_min`/`n_max` replace
//! `n_a`/`n_b` to draw arm sizes uniformly from a range.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use dtaboot_core::bootstrap::ResamplingVariant;
use dtaboot_core::data::CorrectionPolicy;
use dtaboot_core::sim::{CoverageReport, SimScenario, SubjectCounts};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
#[error("scenario line {line}: {reason}")]
pub struct ScenarioError {
    pub line: usize,
    pub reason: String,
}

fn value<T: FromStr>(v: &str, line: usize, key: &str) -> Result<T, ScenarioError> {
    v.parse().map_err(|_| ScenarioError { line, reason: format!("invalid value '{v}' for {key}") })
}

pub fn parse_scenario(text: &str) -> Result<SimScenario, ScenarioError> {
    let mut s = SimScenario::default();
    let (mut n_a, mut n_b, mut n_min, mut n_max) = (None, None, None, None);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| ScenarioError { line, reason: "expected key = value".into() })?;
        let (k, v) = (k.trim(), v.trim());
        let p = &mut s.true_params;
        match k {
            "mu_a" => p.mu_a = value(v, line, k)?,
            "mu_b" => p.mu_b = value(v, line, k)?,
            "sigma_a" => p.sigma_a = value(v, line, k)?,
            "sigma_b" => p.sigma_b = value(v, line, k)?,
            "rho" => p.rho = value(v, line, k)?,
            "n_studies" => s.n_studies = value(v, line, k)?,
            "n_a" => n_a = Some(value(v, line, k)?),
            "n_b" => n_b = Some(value(v, line, k)?),
            "n_min" => n_min = Some(value(v, line, k)?),
            "n_max" => n_max = Some(value(v, line, k)?),
            "replications" => s.replications = value(v, line, k)?,
            "seed" => s.seed = value(v, line, k)?,
            "b" => s.bootstrap.b = value(v, line, k)?,
            "level" => s.bootstrap.level = value(v, line, k)?,
            "max_failure_fraction" => s.bootstrap.max_failure_fraction = value(v, line, k)?,
            "variant" => {
                s.bootstrap.resampling_variant = match v {
                    "normal" => ResamplingVariant::Normal,
                    "binomial" => ResamplingVariant::Binomial,
                    _ => return Err(ScenarioError { line, reason: format!("unknown variant '{v}'") }),
                }
            }
            "correction" => {
                s.bootstrap.correction = match v {
                    "affected" => CorrectionPolicy::AffectedStudies,
                    "all" => CorrectionPolicy::AllStudies,
                    "none" => CorrectionPolicy::None,
                    _ => return Err(ScenarioError { line, reason: format!("unknown correction '{v}'") }),
                }
            }
            _ => return Err(ScenarioError { line, reason: format!("unknown key '{k}'") }),
        }
    }
    let fixed = n_a.is_some() || n_b.is_some();
    let ranged = n_min.is_some() || n_max.is_some();
    s.subject_counts = match (fixed, ranged, s.subject_counts) {
        (true, true, _) => {
            return Err(ScenarioError { line: 0, reason: "n_a/n_b and n_min/n_max are mutually exclusive".into() })
        }
        (true, false, SubjectCounts::Fixed { n_a: da, n_b: db }) => {
            SubjectCounts::Fixed { n_a: n_a.unwrap_or(da), n_b: n_b.unwrap_or(db) }
        }
        (false, true, _) => match (n_min, n_max) {
            (Some(min), Some(max)) => SubjectCounts::Range { min, max },
            _ => return Err(ScenarioError { line: 0, reason: "n_min and n_max must be given together".into() }),
        },
        (_, _, c) => c,
    };
    Ok(s)
}

/// Hex SHA-256 prefix of the scenario's canonical JSON form.
pub fn scenario_hash(s: &SimScenario) -> String {
    let json = serde_json::to_vec(s).expect("scenario serializes");
    Sha256::digest(&json)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

const LEDGER_HEADER: [&str; 12] = [
    "scenario_hash",
    "true_auc",
    "coverage",
    "coverage_se",
    "mean_width",
    "bias_mu_a",
    "bias_mu_b",
    "bias_sigma_a",
    "bias_sigma_b",
    "bias_rho",
    "replications",
    "failed",
];

/// Appends one row to the ledger, writing the header if the file is new.
pub fn append_ledger(path: &Path, hash: &str, r: &CoverageReport) -> std::io::Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(LEDGER_HEADER)?;
    }
    let b = &r.bias;
    let row = [
        hash.to_string(),
        r.true_auc.to_string(),
        r.coverage.to_string(),
        r.coverage_se.to_string(),
        r.mean_width.to_string(),
        b.mu_a.to_string(),
        b.mu_b.to_string(),
        b.sigma_a.to_string(),
        b.sigma_b.to_string(),
        b.rho.to_string(),
        r.replications.to_string(),
        r.failed.to_string(),
    ];
    w.write_record(&row)?;
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error())?.flush()
}
