//! Command-line surface and command dispatch.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dtaboot_core::bootstrap::{bootstrap_auc_ci, bootstrap_compare_auc, BootstrapConfig, ResamplingVariant};
use dtaboot_core::data::{to_outcomes, CorrectionPolicy, Dataset};
use dtaboot_core::influence::{flag_influential, leave_one_out_table};
use dtaboot_core::reml::{confidence_region, fit_reml, summary_accuracy};
use dtaboot_core::sim::coverage_study;
use dtaboot_core::sroc::{compute_auc, hsroc_params, sample_curve, AucOptions};

use crate::exec::ThreadPool;
use crate::input::{read_dataset, ParseError};
use crate::report::{self, Comparison, GroupAucCi, GroupFit, GroupInfluence, Report, RunConfig, SimulationResult, Table};
use crate::scenario::{append_ledger, parse_scenario, scenario_hash, ScenarioError};
use crate::svg::{render_sroc_svg, PlotLayer, PlotOptions, CURVE_POINTS, REGION_POINTS};

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "DTABOOT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dtaboot", version, about = "Bivariate meta-analysis of diagnostic accuracy with bootstrap AUC inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the bivariate model: summary sensitivity and FPR, SDs and AUC.
    Fit(DataArgs),
    /// Bootstrap confidence interval of the SROC AUC.
    AucCi(DataArgs),
    /// Bootstrap test of the AUC difference between two test groups.
    Compare(DataArgs),
    /// Leave-one-study-out ΔAUC with bootstrap thresholds.
    Influence(DataArgs),
    /// Coverage of the bootstrap AUC interval on simulated data.
    Simulate(SimArgs),
    /// SROC plot of one or more test groups as SVG.
    Plot(DataArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with columns study,TP,FP,FN,TN[,test].
    #[arg(long)]
    pub input: PathBuf,
    /// Test group(s) to analyse, comma-separated. Defaults to every group.
    #[arg(long = "group", visible_alias = "groups", value_delimiter = ',')]
    pub groups: Vec<String>,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// CSV ledger to append results to [default: <out>/ledger.csv].
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BootArgs {
    /// Bootstrap replicates [default: 2000].
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Confidence level [default: 0.95].
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    /// Zero-cell continuity correction [default: affected].
    #[arg(long, value_enum)]
    pub correction: Option<Correction>,
    /// FPR integration range of the AUC as `lo,hi` [default: 0,1].
    #[arg(long, value_parser = parse_range)]
    pub range: Option<(f64, f64)>,
    /// Worker threads; 0 uses every CPU.
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, default_value = "dtaboot-out")]
    pub out: PathBuf,
    /// Output formats, comma-separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    /// Omit the generation time from JSON output.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Also print the primary artifact to stdout.
    #[arg(long)]
    pub stdout: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Normal,
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Correction {
    Affected,
    All,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] dtaboot_core::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const CONVERGENCE: i32 = 4;
    pub const BUDGET: i32 = 5;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dtaboot_core::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Parse(_) | CliError::Scenario(_) => exit::PARSE,
            CliError::Io { .. } => exit::OTHER,
            CliError::Model(e) => match e {
                E::BudgetExceeded { .. } => exit::BUDGET,
                E::SimulationFailures { .. } => exit::CONVERGENCE,
                e if e.is_convergence() => exit::CONVERGENCE,
                E::TooFewStudies { .. } | E::ZeroCell(_) | E::EmptyArm { .. } | E::DuplicateLabel(_) => exit::PARSE,
                E::InvalidConfig(_) | E::InvalidLevel(_) | E::InvalidRange { .. } | E::ResolutionTooSmall(_) => {
                    exit::USAGE
                }
                _ => exit::OTHER,
            },
        }
    }
}

/// Files written and text produced by one command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Human-readable summary, meant for stderr.
    pub summary: String,
    /// Primary artifact, printed to stdout when requested.
    pub stdout: Option<String>,
}

struct Writer<'a> {
    output: &'a OutputArgs,
    formats: Vec<Format>,
    outcome: Outcome,
}

impl<'a> Writer<'a> {
    fn new(output: &'a OutputArgs, default: &[Format], allowed: &[Format], command: &str) -> Result<Self, CliError> {
        let formats = output.format.clone().unwrap_or_else(|| default.to_vec());
        if let Some(f) = formats.iter().find(|f| !allowed.contains(f)) {
            return Err(CliError::Usage(format!("format {f:?} is not available for {command}").to_lowercase()));
        }
        Ok(Writer { output, formats, outcome: Outcome::default() })
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn file(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = report::write_atomic(&self.output.out, name, contents.as_bytes()).map_err(|source| CliError::Io {
            context: format!("cannot write {}", self.output.out.join(name).display()),
            source,
        })?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn primary(&mut self, contents: String) {
        if self.output.stdout && self.outcome.stdout.is_none() {
            self.outcome.stdout = Some(contents);
        }
    }

    fn json<T: serde::Serialize>(&mut self, command: &str, config: RunConfig, results: T) -> Result<(), CliError> {
        if self.wants(Format::Json) {
            let text = report::to_json(&Report::new(command, config, results, !self.output.no_timestamp));
            self.file(&format!("{command}.json"), &text)?;
            self.primary(text);
        }
        Ok(())
    }

    fn csv(&mut self, name: &str, table: &Table, primary: bool) -> Result<(), CliError> {
        if self.wants(Format::Csv) {
            let text = table.to_csv();
            self.file(name, &text)?;
            if primary {
                self.primary(text);
            }
        }
        Ok(())
    }

    fn finish(mut self, summary: String) -> Outcome {
        self.outcome.summary = summary;
        self.outcome
    }
}

fn bootstrap_config(a: &BootArgs) -> Result<BootstrapConfig, CliError> {
    let mut c = BootstrapConfig::default();
    apply_overrides(&mut c, a);
    c.validate()?;
    Ok(c)
}

fn apply_overrides(c: &mut BootstrapConfig, a: &BootArgs) {
    if let Some(b) = a.b {
        c.b = b;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(l) = a.level {
        c.level = l;
    }
    if let Some(v) = a.variant {
        c.resampling_variant = match v {
            Variant::Normal => ResamplingVariant::Normal,
            Variant::Binomial => ResamplingVariant::Binomial,
        };
    }
    if let Some(k) = a.correction {
        c.correction = match k {
            Correction::Affected => CorrectionPolicy::AffectedStudies,
            Correction::All => CorrectionPolicy::AllStudies,
            Correction::None => CorrectionPolicy::None,
        };
    }
    if let Some((lo, hi)) = a.range {
        c.auc = AucOptions { lo, hi, ..c.auc };
    }
}

fn pool(a: &BootArgs) -> Result<ThreadPool, CliError> {
    ThreadPool::new(a.threads.unwrap_or(0)).map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))
}

/// Named subsets of the input selected by `--group`, or every group.
fn select(data: &Dataset, groups: &[String]) -> Result<Vec<(String, Dataset)>, CliError> {
    if groups.is_empty() {
        let all = data.groups();
        if all.is_empty() {
            return Ok(vec![(data.name.clone(), data.clone())]);
        }
        return Ok(all.into_iter().map(|g| (g.clone(), data.group(&g).expect("listed group exists"))).collect());
    }
    groups
        .iter()
        .map(|g| {
            data.group(g)
                .map(|d| (g.clone(), d))
                .ok_or_else(|| CliError::Usage(format!("test group '{g}' not found in {}", data.name)))
        })
        .collect()
}

fn run_config(args: &DataArgs, selected: &[(String, Dataset)], config: BootstrapConfig) -> RunConfig {
    RunConfig {
        inputs: vec![args.input.display().to_string()],
        groups: selected.iter().map(|(g, _)| g.clone()).collect(),
        bootstrap: Some(config),
        ..Default::default()
    }
}

fn fit_groups(selected: &[(String, Dataset)], config: &BootstrapConfig) -> Result<Vec<GroupFit>, CliError> {
    selected
        .iter()
        .map(|(g, d)| {
            if d.len() < dtaboot_core::MIN_STUDIES {
                return Err(dtaboot_core::Error::TooFewStudies { needed: dtaboot_core::MIN_STUDIES, got: d.len() }.into());
            }
            let fit = fit_reml(&to_outcomes(d, config.correction)?, &config.fit)?;
            let hsroc = hsroc_params(&fit)?;
            Ok(GroupFit {
                group: g.clone(),
                n_studies: d.len(),
                summary: summary_accuracy(&fit, config.level)?,
                auc: compute_auc(&hsroc, &config.auc)?,
                confidence_region: confidence_region(&fit, config.level, REGION_POINTS)?,
                hsroc,
                fit,
            })
        })
        .collect()
}

fn svg_of(selected: &[(String, Dataset)], fits: &[GroupFit], level: f64, title: &str) -> Result<String, CliError> {
    let layers: Vec<PlotLayer<'_>> = selected
        .iter()
        .zip(fits)
        .map(|((g, d), f)| PlotLayer { name: g, data: d, fit: &f.fit })
        .collect();
    Ok(render_sroc_svg(&layers, &PlotOptions { title: title.to_string(), level })?)
}

fn pct(level: f64) -> String {
    format!("{}%", (level * 1000.0).round() / 10.0)
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    use Format::*;
    match cli.command {
        Command::Fit(a) => {
            let mut w = Writer::new(&a.output, &[Json, Csv], &[Json, Csv, Svg], "fit")?;
            let config = bootstrap_config(&a.boot)?;
            let data = read_dataset(&a.input)?;
            let selected = select(&data, &a.groups)?;
            let fits = fit_groups(&selected, &config)?;

            let mut s = String::new();
            let _ = writeln!(
                s,
                "{:<12} {:>4}  {:<24} {:<24} {:>7} {:>7} {:>7}",
                "test",
                "N",
                format!("sens ({} CI)", pct(config.level)),
                format!("FPR ({} CI)", pct(config.level)),
                "SD(A)",
                "SD(B)",
                "AUC"
            );
            for f in &fits {
                let (se, fp) = (&f.summary.sens, &f.summary.fpr);
                let _ = writeln!(
                    s,
                    "{:<12} {:>4}  {:<24} {:<24} {:>7.3} {:>7.3} {:>7.3}",
                    f.group,
                    f.n_studies,
                    format!("{:.3} ({:.3}, {:.3})", se.point, se.lower, se.upper),
                    format!("{:.3} ({:.3}, {:.3})", fp.point, fp.lower, fp.upper),
                    f.fit.params.sigma_a,
                    f.fit.params.sigma_b,
                    f.auc.value
                );
            }

            let table = report::fit_table(&fits);
            let mut curves = Table::new(&["group", "fpr", "sensitivity"]);
            for f in &fits {
                curves.rows.extend(report::curve_table(&f.group, &sample_curve(&f.hsroc, CURVE_POINTS)).rows);
            }
            let svg = if w.wants(Svg) { Some(svg_of(&selected, &fits, config.level, &data.name)?) } else { None };
            w.json("fit", run_config(&a, &selected, config), &fits)?;
            w.csv("fit.csv", &table, true)?;
            w.csv("curve.csv", &curves, false)?;
            if let Some(svg) = svg {
                w.file("fit.svg", &svg)?;
                w.primary(svg);
            }
            Ok(w.finish(s))
        }
        Command::AucCi(a) => {
            let mut w = Writer::new(&a.output, &[Json, Csv], &[Json, Csv], "auc-ci")?;
            let config = bootstrap_config(&a.boot)?;
            let data = read_dataset(&a.input)?;
            let selected = select(&data, &a.groups)?;
            let exec = pool(&a.boot)?;
            let mut runs = Vec::new();
            for (g, d) in &selected {
                let run = bootstrap_auc_ci(d, &config, &exec)?;
                runs.push(GroupAucCi { group: g.clone(), n_studies: d.len(), run });
            }
            let mut s = String::new();
            let _ = writeln!(s, "{:<12} {:>4} {:>7}  {:<18} {:>6} {:>8}", "test", "N", "AUC", pct(config.level) + " CI", "B", "failures");
            for r in &runs {
                let _ = writeln!(
                    s,
                    "{:<12} {:>4} {:>7.3}  {:<18} {:>6} {:>8}",
                    r.group,
                    r.n_studies,
                    r.run.point,
                    format!("({:.3}, {:.3})", r.run.interval.0, r.run.interval.1),
                    r.run.effective_b,
                    r.run.failures.len()
                );
            }
            let reps: Vec<(&str, &_)> = runs.iter().map(|r| (r.group.as_str(), &r.run)).collect();
            let replicates = report::replicates_table("auc", &reps);
            let table = report::auc_ci_table(&runs);
            w.json("auc-ci", run_config(&a, &selected, config), &runs)?;
            w.csv("auc-ci.csv", &table, true)?;
            w.csv("replicates.csv", &replicates, false)?;
            Ok(w.finish(s))
        }
        Command::Compare(a) => {
            let mut w = Writer::new(&a.output, &[Json, Csv], &[Json, Csv], "compare")?;
            if a.groups.len() != 2 {
                return Err(CliError::Usage(format!(
                    "compare needs exactly two test groups via --groups A,B (got {})",
                    a.groups.len()
                )));
            }
            if a.groups[0] == a.groups[1] {
                return Err(CliError::Usage("compare needs two different test groups".into()));
            }
            let config = bootstrap_config(&a.boot)?;
            let data = read_dataset(&a.input)?;
            let selected = select(&data, &a.groups)?;
            let exec = pool(&a.boot)?;
            let test = bootstrap_compare_auc(&selected[0].1, &selected[1].1, &config, &exec)?;
            let c = Comparison { group1: selected[0].0.clone(), group2: selected[1].0.clone(), test };
            let mut s = String::new();
            let r = &c.test;
            let _ = writeln!(s, "{} vs {}", c.group1, c.group2);
            let _ = writeln!(s, "  AUC {:.3} vs {:.3}", r.auc1, r.auc2);
            let _ = writeln!(
                s,
                "  dAUC {:.3} ({} CI {:.3}, {:.3})  p = {:.3}",
                r.dauc,
                pct(config.level),
                r.interval.0,
                r.interval.1,
                r.p_value
            );
            let _ = writeln!(s, "  Wald sensitivity: z = {:.3}, p = {:.3}", r.wald.sens.z, r.wald.sens.p_value);
            let _ = writeln!(s, "  Wald FPR:         z = {:.3}, p = {:.3}", r.wald.fpr.z, r.wald.fpr.p_value);
            let label = format!("{} vs {}", c.group1, c.group2);
            let replicates = report::replicates_table("dauc", &[(label.as_str(), &c.test.run)]);
            let table = report::compare_table(std::slice::from_ref(&c));
            w.json("compare", run_config(&a, &selected, config), &c)?;
            w.csv("compare.csv", &table, true)?;
            w.csv("replicates.csv", &replicates, false)?;
            Ok(w.finish(s))
        }
        Command::Influence(a) => {
            let mut w = Writer::new(&a.output, &[Json, Csv], &[Json, Csv], "influence")?;
            let config = bootstrap_config(&a.boot)?;
            let data = read_dataset(&a.input)?;
            let selected = select(&data, &a.groups)?;
            let exec = pool(&a.boot)?;
            let mut results = Vec::new();
            for (g, d) in &selected {
                let table = leave_one_out_table(d, &config, &exec)?;
                let flagged = flag_influential(&table.rows);
                results.push(GroupInfluence { group: g.clone(), level: config.level, table, flagged });
            }
            let mut s = String::new();
            for r in &results {
                let _ = writeln!(s, "{}: full AUC {:.3}", r.group, r.table.full_auc);
                let _ = writeln!(s, "  {:<4} {:<16} {:>7} {:>7} {:>7} {:>7}", "#", "study", "AUC", "dAUC", "lower", "upper");
                for row in &r.table.rows {
                    let f = |x: Option<f64>| x.map_or_else(|| "failed".to_string(), |v| format!("{v:.3}"));
                    let _ = writeln!(
                        s,
                        "  {:<4} {:<16} {:>7} {:>7} {:>7.3} {:>7.3} {}",
                        row.index,
                        row.label,
                        f(row.auc_loo),
                        f(row.delta_auc),
                        row.lo,
                        row.hi,
                        if row.influential { "*" } else { "" }
                    );
                }
                for fl in &r.flagged {
                    let _ = writeln!(s, "  influential: study {} ({}): {}", fl.row.index, fl.row.label, fl.direction);
                }
            }
            w.json("influence", run_config(&a, &selected, config), &results)?;
            let single = results.len() == 1;
            for (i, r) in results.iter().enumerate() {
                let name = if single { "influence.csv".to_string() } else { format!("influence-{}.csv", r.group) };
                w.csv(&name, &report::influence_table(r), i == 0)?;
            }
            Ok(w.finish(s))
        }
        Command::Simulate(a) => {
            let mut w = Writer::new(&a.output, &[Json, Csv], &[Json, Csv], "simulate")?;
            let mut scenario = match &a.scenario {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                        context: format!("cannot read {}", p.display()),
                        source,
                    })?;
                    parse_scenario(&text)?
                }
                None => Default::default(),
            };
            apply_overrides(&mut scenario.bootstrap, &a.boot);
            if let Some(seed) = a.boot.seed {
                scenario.seed = seed;
            }
            if let Some(r) = a.replications {
                scenario.replications = r;
            }
            scenario.validate()?;
            let exec = pool(&a.boot)?;
            let coverage = coverage_study(&scenario, &exec)?;
            let hash = scenario_hash(&scenario);
            let ledger = a.ledger.clone().unwrap_or_else(|| a.output.out.join("ledger.csv"));
            if let Some(dir) = ledger.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .map_err(|source| CliError::Io { context: format!("cannot create {}", dir.display()), source })?;
            }
            append_ledger(&ledger, &hash, &coverage)
                .map_err(|source| CliError::Io { context: format!("cannot append to {}", ledger.display()), source })?;

            let mut s = String::new();
            let b = &coverage.bias;
            let _ = writeln!(s, "scenario {hash}: true AUC {:.4}", coverage.true_auc);
            let _ = writeln!(
                s,
                "  coverage {:.3} (SE {:.3}) over {} replications, {} failed",
                coverage.coverage, coverage.coverage_se, coverage.replications, coverage.failed
            );
            let _ = writeln!(s, "  mean interval width {:.4}", coverage.mean_width);
            let _ = writeln!(
                s,
                "  bias: mu_a {:+.4}  mu_b {:+.4}  sigma_a {:+.4}  sigma_b {:+.4}  rho {:+.4}",
                b.mu_a, b.mu_b, b.sigma_a, b.sigma_b, b.rho
            );
            let table = report::coverage_table(&hash, &coverage);
            let config = RunConfig {
                inputs: a.scenario.iter().map(|p| p.display().to_string()).collect(),
                scenario: Some(scenario),
                scenario_hash: Some(hash),
                ..Default::default()
            };
            w.json("simulate", config, SimulationResult { coverage })?;
            w.csv("simulate.csv", &table, true)?;
            w.outcome.files.push(ledger);
            Ok(w.finish(s))
        }
        Command::Plot(a) => {
            let mut w = Writer::new(&a.output, &[Svg], &[Svg], "plot")?;
            let config = bootstrap_config(&a.boot)?;
            let data = read_dataset(&a.input)?;
            let selected = select(&data, &a.groups)?;
            let fits = fit_groups(&selected, &config)?;
            let svg = svg_of(&selected, &fits, config.level, &data.name)?;
            w.file("plot.svg", &svg)?;
            w.primary(svg);
            let names: Vec<&str> = selected.iter().map(|(g, _)| g.as_str()).collect();
            Ok(w.finish(format!("SROC plot of {}\n", names.join(", "))))
        }
    }
}
