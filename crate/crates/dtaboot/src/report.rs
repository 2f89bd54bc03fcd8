//! JSON documents, CSV tables and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use dtaboot_core::bootstrap::{BootstrapConfig, BootstrapRun, DaucTestResult};
use dtaboot_core::influence::{FlaggedStudy, InfluenceTable};
use dtaboot_core::reml::{BivariateFit, SummaryAccuracy};
use dtaboot_core::sim::{CoverageReport, SimScenario};
use dtaboot_core::sroc::{AucResult, SrocCurve};
use serde::{Deserialize, Serialize};

/// Top-level JSON document written by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_unix_seconds: Option<u64>,
    pub config: RunConfig,
    pub results: T,
}

impl<T> Report<T> {
    pub fn new(command: &str, config: RunConfig, results: T, timestamp: bool) -> Self {
        let generated_unix_seconds = timestamp.then(|| {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
        });
        Report {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            generated_unix_seconds,
            config,
            results,
        }
    }
}

/// Echo of the inputs and settings that produced a report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<SimScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub group: String,
    pub n_studies: usize,
    pub fit: BivariateFit,
    pub summary: SummaryAccuracy,
    pub hsroc: SrocCurve,
    pub auc: AucResult,
    /// Confidence region of (FPR, sensitivity) as a closed polygon.
    pub confidence_region: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAucCi {
    pub group: String,
    pub n_studies: usize,
    pub run: BootstrapRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub group1: String,
    pub group2: String,
    pub test: DaucTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupInfluence {
    pub group: String,
    pub level: f64,
    pub table: InfluenceTable,
    pub flagged: Vec<FlaggedStudy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub coverage: CoverageReport,
}

/// A CSV table held in memory until written.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

/// Column label of a percentile such as `p2.5` or `p97.5`.
pub fn percentile_label(p: f64) -> String {
    let v = (p * 1000.0).round() / 10.0;
    format!("p{v}")
}

/// One summary row per test group.
pub fn fit_table(fits: &[GroupFit]) -> Table {
    let mut t = Table::new(&[
        "test",
        "n_studies",
        "sensitivity",
        "sensitivity_lower",
        "sensitivity_upper",
        "fpr",
        "fpr_lower",
        "fpr_upper",
        "sd_logit_sensitivity",
        "sd_logit_fpr",
        "correlation",
        "auc",
    ]);
    for g in fits {
        let (s, p) = (&g.summary, &g.fit.params);
        t.push(vec![
            g.group.clone(),
            g.n_studies.to_string(),
            num(s.sens.point),
            num(s.sens.lower),
            num(s.sens.upper),
            num(s.fpr.point),
            num(s.fpr.lower),
            num(s.fpr.upper),
            num(p.sigma_a),
            num(p.sigma_b),
            num(p.rho),
            num(g.auc.value),
        ]);
    }
    t
}

pub fn auc_ci_table(runs: &[GroupAucCi]) -> Table {
    let mut t = Table::new(&["test", "n_studies", "auc", "lower", "upper", "level", "effective_b", "failures"]);
    for g in runs {
        let r = &g.run;
        t.push(vec![
            g.group.clone(),
            g.n_studies.to_string(),
            num(r.point),
            num(r.interval.0),
            num(r.interval.1),
            num(r.level),
            r.effective_b.to_string(),
            r.failures.len().to_string(),
        ]);
    }
    t
}

pub fn compare_table(c: &[Comparison]) -> Table {
    let mut t = Table::new(&[
        "comparison",
        "auc1",
        "auc2",
        "dauc",
        "lower",
        "upper",
        "p_value",
        "wald_sensitivity_z",
        "wald_sensitivity_p",
        "wald_fpr_z",
        "wald_fpr_p",
    ]);
    for x in c {
        let r = &x.test;
        t.push(vec![
            format!("{} vs {}", x.group1, x.group2),
            num(r.auc1),
            num(r.auc2),
            num(r.dauc),
            num(r.interval.0),
            num(r.interval.1),
            num(r.p_value),
            num(r.wald.sens.z),
            num(r.wald.sens.p_value),
            num(r.wald.fpr.z),
            num(r.wald.fpr.p_value),
        ]);
    }
    t
}

/// `study, AUC, dAUC, p<lo>, p<hi>, flag` with one row per excluded study.
pub fn influence_table(g: &GroupInfluence) -> Table {
    let alpha = (1.0 - g.level) / 2.0;
    let lo = percentile_label(alpha);
    let hi = percentile_label(1.0 - alpha);
    let mut t = Table::new(&["study", "AUC", "dAUC", &lo, &hi, "flag"]);
    for r in &g.table.rows {
        t.push(vec![
            r.label.clone(),
            opt(r.auc_loo),
            opt(r.delta_auc),
            num(r.lo),
            num(r.hi),
            if r.influential { "*".into() } else { String::new() },
        ]);
    }
    t
}

/// Replicate statistics in replicate order.
pub fn replicates_table(name: &str, runs: &[(&str, &BootstrapRun)]) -> Table {
    let mut t = Table::new(&["group", "replicate", name]);
    for (g, r) in runs {
        for (i, s) in r.statistics.iter().enumerate() {
            t.push(vec![g.to_string(), (i + 1).to_string(), num(*s)]);
        }
    }
    t
}

pub fn curve_table(group: &str, points: &[[f64; 2]]) -> Table {
    let mut t = Table::new(&["group", "fpr", "sensitivity"]);
    for p in points {
        t.push(vec![group.to_string(), num(p[0]), num(p[1])]);
    }
    t
}

pub fn coverage_table(hash: &str, r: &CoverageReport) -> Table {
    let mut t = Table::new(&[
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
    ]);
    let b = &r.bias;
    t.push(vec![
        hash.to_string(),
        num(r.true_auc),
        num(r.coverage),
        num(r.coverage_se),
        num(r.mean_width),
        num(b.mu_a),
        num(b.mu_b),
        num(b.sigma_a),
        num(b.sigma_b),
        num(b.rho),
        r.replications.to_string(),
        r.failed.to_string(),
    ]);
    t
}

pub fn to_json<T: Serialize>(report: &Report<T>) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}
