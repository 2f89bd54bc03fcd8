//! Parametric bootstrap on the fitted bivariate model.
//!
//! Each replicate draws study-level true effects `θ_i* ~ N(μ̂, Σ̂)` and then
//! either logit outcomes `y_i* ~ N(θ_i*, S_i)` with the original within-study
//! covariances ([`ResamplingVariant::Normal`]) or binomial counts with the
//! original arm sizes ([`ResamplingVariant::Binomial`]). The synthetic data
//! are refitted and the statistic of interest recomputed.
//!
//! Replicates whose refit fails are redrawn from a fresh stream. The total
//! number of failures is capped at `max_failure_fraction · B`; beyond that
//! the run is abandoned with [`Error::BudgetExceeded`].

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use libm::{floor, sqrt};
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{to_outcomes, CorrectionPolicy, Dataset, LogitOutcome, OutcomeSet};
use crate::exec::Executor;
use crate::math::expit;
use crate::reml::{fit_reml, wald_compare_summary, BivariateFit, FitOptions, WaldComparison};
use crate::rng::{replicate_stream, Tag};
use crate::sroc::{auc_of_fit, AucOptions};
use crate::{Error, Result, MIN_STUDIES};

/// Smallest replicate count accepted by the engine.
pub const MIN_REPLICATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResamplingVariant {
    /// `y_i* ~ N(θ_i*, S_i)`.
    #[default]
    Normal,
    /// `TP_i* ~ Bin(n_Ai, expit θ_Ai*)`, `FP_i* ~ Bin(n_Bi, expit θ_Bi*)`.
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub b: usize,
    pub seed: u64,
    pub resampling_variant: ResamplingVariant,
    pub level: f64,
    pub max_failure_fraction: f64,
    /// Zero-cell handling for the original data and for binomial replicates.
    pub correction: CorrectionPolicy,
    pub auc: AucOptions,
    #[serde(skip)]
    pub fit: FitOptions,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            b: 2000,
            seed: 1,
            resampling_variant: ResamplingVariant::Normal,
            level: 0.95,
            max_failure_fraction: 0.05,
            correction: CorrectionPolicy::AffectedStudies,
            auc: AucOptions::default(),
            fit: FitOptions::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b < MIN_REPLICATES {
            return Err(Error::InvalidConfig(alloc::format!(
                "bootstrap replicate count {} is below the minimum of {MIN_REPLICATES}",
                self.b
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidLevel(self.level));
        }
        if !(0.0..1.0).contains(&self.max_failure_fraction) {
            return Err(Error::InvalidConfig("max_failure_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Number of failed refits tolerated before the run is abandoned.
    pub fn failure_allowance(&self) -> usize {
        floor(self.max_failure_fraction * self.b as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub attempt: u16,
    pub reason: String,
}

/// Replicate statistics and the percentile interval built from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRun {
    /// Estimate from the original data.
    pub point: f64,
    pub interval: (f64, f64),
    pub level: f64,
    pub requested_b: usize,
    pub effective_b: usize,
    pub seed: u64,
    pub resampling_variant: ResamplingVariant,
    pub failures: Vec<ReplicateFailure>,
    /// Replicate statistics ordered by replicate index.
    pub statistics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaucTestResult {
    pub auc1: f64,
    pub auc2: f64,
    /// `AUC_1 − AUC_2` on the original data.
    pub dauc: f64,
    pub interval: (f64, f64),
    pub p_value: f64,
    /// Wald comparisons of the summary logit sensitivity and FPR.
    pub wald: WaldComparison,
    pub run: BootstrapRun,
}

/// Original data of one bootstrap arm: counts, outcomes and fit.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Dataset,
    pub outcomes: OutcomeSet,
    pub fit: BivariateFit,
    pub auc: f64,
}

impl Prepared {
    pub fn new(data: &Dataset, config: &BootstrapConfig) -> Result<Self> {
        if data.len() < MIN_STUDIES {
            return Err(Error::TooFewStudies { needed: MIN_STUDIES, got: data.len() });
        }
        let outcomes = to_outcomes(data, config.correction)?;
        let fit = fit_reml(&outcomes, &config.fit)?;
        let auc = auc_of_fit(&fit, &config.auc)?;
        Ok(Prepared { data: data.clone(), outcomes, fit, auc })
    }
}

/// Draws one synthetic outcome set from the fitted model.
pub fn resample_replicate<R: Rng + ?Sized>(
    fit: &BivariateFit,
    data: &Dataset,
    outcomes: &OutcomeSet,
    variant: ResamplingVariant,
    rng: &mut R,
) -> Result<OutcomeSet> {
    let thetas = draw_effects(fit, outcomes.len(), rng);
    let synthetic = match variant {
        ResamplingVariant::Normal => outcomes
            .outcomes
            .iter()
            .zip(&thetas)
            .map(|(o, t)| {
                let za: f64 = rng.sample(StandardNormal);
                let zb: f64 = rng.sample(StandardNormal);
                Ok(LogitOutcome { y_a: t[0] + sqrt(o.s2_a) * za, y_b: t[1] + sqrt(o.s2_b) * zb, ..*o })
            })
            .collect::<Result<Vec<_>>>()?,
        ResamplingVariant::Binomial => data
            .studies()
            .iter()
            .zip(&thetas)
            .map(|(s, t)| {
                let (tp, fp) = binomial_counts(s.n_a(), s.n_b(), *t, rng);
                LogitOutcome::from_counts(&s.label, tp, fp, s.n_a() - tp, s.n_b() - fp, outcomes.correction_policy)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(OutcomeSet::new(outcomes.source.clone(), synthetic, outcomes.correction_policy))
}

/// `n` draws of `θ ~ N(μ̂, Σ̂)`.
pub fn draw_effects<R: Rng + ?Sized>(fit: &BivariateFit, n: usize, rng: &mut R) -> Vec<[f64; 2]> {
    let factor = fit.params.sigma().psd_factor();
    let mu = fit.params.mu();
    (0..n)
        .map(|_| {
            let z = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            let d = factor.apply(z);
            [mu[0] + d[0], mu[1] + d[1]]
        })
        .collect()
}

/// `(TP, FP)` drawn with success probabilities `expit(θ)`.
pub fn binomial_counts<R: Rng + ?Sized>(n_a: u64, n_b: u64, theta: [f64; 2], rng: &mut R) -> (u64, u64) {
    let draw = |n: u64, p: f64, rng: &mut R| match Binomial::new(n, p) {
        Ok(d) => d.sample(rng),
        // Only reachable for non-finite p.
        Err(_) => 0,
    };
    let tp = draw(n_a, expit(theta[0]), rng);
    let fp = draw(n_b, expit(theta[1]), rng);
    (tp, fp)
}

/// Runs `b` replicates through `exec`, redrawing failed ones within the
/// configured failure budget.
pub(crate) fn run_replicates<E, T, F>(
    exec: &E,
    config: &BootstrapConfig,
    replicate: F,
) -> Result<(Vec<T>, Vec<ReplicateFailure>)>
where
    E: Executor,
    T: Send,
    F: Fn(usize, u16) -> Result<T> + Sync + Send,
{
    let allowed = config.failure_allowance();
    let failed = AtomicUsize::new(0);
    let results = exec.map_indexed(config.b, |b| {
        let mut log = Vec::new();
        let mut attempt: u16 = 0;
        loop {
            match replicate(b, attempt) {
                Ok(v) => return (Some(v), log),
                Err(e) => {
                    log.push(ReplicateFailure { replicate: b, attempt, reason: e.to_string() });
                    let total = failed.fetch_add(1, Ordering::Relaxed) + 1;
                    if total > allowed || attempt == u16::MAX {
                        return (None, log);
                    }
                    attempt += 1;
                }
            }
        }
    });
    let mut values = Vec::with_capacity(config.b);
    let mut failures = Vec::new();
    let mut complete = true;
    for (v, log) in results {
        failures.extend(log);
        match v {
            Some(v) => values.push(v),
            None => complete = false,
        }
    }
    if !complete || failures.len() > allowed {
        return Err(Error::BudgetExceeded { failures: failures.len().max(allowed + 1), allowed });
    }
    Ok((values, failures))
}

fn refit_auc(outcomes: &OutcomeSet, config: &BootstrapConfig) -> Result<f64> {
    let fit = fit_reml(outcomes, &config.fit)?;
    auc_of_fit(&fit, &config.auc)
}

/// Percentile bootstrap interval for the SROC AUC.
pub fn bootstrap_auc_ci<E: Executor>(data: &Dataset, config: &BootstrapConfig, exec: &E) -> Result<BootstrapRun> {
    config.validate()?;
    let prep = Prepared::new(data, config)?;
    bootstrap_auc_ci_prepared(&prep, config, exec)
}

/// [`bootstrap_auc_ci`] for data that has already been fitted.
pub fn bootstrap_auc_ci_prepared<E: Executor>(prep: &Prepared, config: &BootstrapConfig, exec: &E) -> Result<BootstrapRun> {
    config.validate()?;
    let (stats, failures) = run_replicates(exec, config, |b, attempt| {
        let mut rng = replicate_stream(config.seed, b as u64, Tag::Single, attempt);
        let synthetic = resample_replicate(&prep.fit, &prep.data, &prep.outcomes, config.resampling_variant, &mut rng)?;
        refit_auc(&synthetic, config)
    })?;
    let interval = percentile_interval(&stats, config.level)?;
    Ok(BootstrapRun {
        point: prep.auc,
        interval,
        level: config.level,
        requested_b: config.b,
        effective_b: stats.len(),
        seed: config.seed,
        resampling_variant: config.resampling_variant,
        failures,
        statistics: stats,
    })
}

/// Bootstrap test of `H0: AUC_1 = AUC_2` for two independent sets of studies.
pub fn bootstrap_compare_auc<E: Executor>(
    data1: &Dataset,
    data2: &Dataset,
    config: &BootstrapConfig,
    exec: &E,
) -> Result<DaucTestResult> {
    config.validate()?;
    let arm1 = Prepared::new(data1, config)?;
    let arm2 = Prepared::new(data2, config)?;
    let (stats, failures) = run_replicates(exec, config, |b, attempt| {
        let mut rng1 = replicate_stream(config.seed, b as u64, Tag::Arm1, attempt);
        let mut rng2 = replicate_stream(config.seed, b as u64, Tag::Arm2, attempt);
        let y1 = resample_replicate(&arm1.fit, &arm1.data, &arm1.outcomes, config.resampling_variant, &mut rng1)?;
        let y2 = resample_replicate(&arm2.fit, &arm2.data, &arm2.outcomes, config.resampling_variant, &mut rng2)?;
        Ok(refit_auc(&y1, config)? - refit_auc(&y2, config)?)
    })?;
    let dauc = arm1.auc - arm2.auc;
    let interval = percentile_interval(&stats, config.level)?;
    let p_value = bootstrap_p_value(&stats)?;
    Ok(DaucTestResult {
        auc1: arm1.auc,
        auc2: arm2.auc,
        dauc,
        interval,
        p_value,
        wald: wald_compare_summary(&arm1.fit, &arm2.fit)?,
        run: BootstrapRun {
            point: dauc,
            interval,
            level: config.level,
            requested_b: config.b,
            effective_b: stats.len(),
            seed: config.seed,
            resampling_variant: config.resampling_variant,
            failures,
            statistics: stats,
        },
    })
}

/// Bootstrap distribution of every study's leave-one-out ΔAUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceDistribution {
    /// `deltas[i][b]`: ΔAUC of study `i` in replicate `b`.
    pub deltas: Vec<Vec<f64>>,
    /// Per-study percentile thresholds at the configured level.
    pub thresholds: Vec<(f64, f64)>,
    pub requested_b: usize,
    pub effective_b: usize,
    pub failures: Vec<ReplicateFailure>,
}

/// ΔAUC(i) = AUC^(−i) − AUC for every study of one outcome set.
pub(crate) fn leave_one_out_deltas(outcomes: &OutcomeSet, config: &BootstrapConfig) -> Result<(f64, Vec<Result<f64>>)> {
    let full = refit_auc(outcomes, config)?;
    let deltas = (0..outcomes.len())
        .map(|i| refit_auc(&outcomes.without(i), config).map(|a| a - full))
        .collect();
    Ok((full, deltas))
}

pub fn bootstrap_influence_distribution<E: Executor>(
    data: &Dataset,
    config: &BootstrapConfig,
    exec: &E,
) -> Result<InfluenceDistribution> {
    config.validate()?;
    let prep = Prepared::new(data, config)?;
    bootstrap_influence_prepared(&prep, config, exec)
}

pub fn bootstrap_influence_prepared<E: Executor>(
    prep: &Prepared,
    config: &BootstrapConfig,
    exec: &E,
) -> Result<InfluenceDistribution> {
    config.validate()?;
    let n = prep.outcomes.len();
    if n <= MIN_STUDIES {
        return Err(Error::TooFewStudies { needed: MIN_STUDIES + 1, got: n });
    }
    let (rows, failures) = run_replicates(exec, config, |b, attempt| {
        let mut rng = replicate_stream(config.seed, b as u64, Tag::Single, attempt);
        let synthetic = resample_replicate(&prep.fit, &prep.data, &prep.outcomes, config.resampling_variant, &mut rng)?;
        let (_, deltas) = leave_one_out_deltas(&synthetic, config)?;
        deltas.into_iter().collect::<Result<Vec<f64>>>()
    })?;
    let mut deltas = alloc::vec![Vec::with_capacity(rows.len()); n];
    for row in &rows {
        for (i, d) in row.iter().enumerate() {
            deltas[i].push(*d);
        }
    }
    let thresholds = deltas.iter().map(|d| percentile_interval(d, config.level)).collect::<Result<Vec<_>>>()?;
    Ok(InfluenceDistribution { deltas, thresholds, requested_b: config.b, effective_b: rows.len(), failures })
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n − 1)p + 1`). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Equal-tailed percentile interval at `level`.
pub fn percentile_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail)))
}

/// Two-sided bootstrap p-value for `H0: statistic = 0`, by percentile
/// inversion with the add-one correction:
/// `min(1, 2 · min[(1 + #{s ≤ 0}), (1 + #{s ≥ 0})] / (B + 1))`.
pub fn bootstrap_p_value(samples: &[f64]) -> Result<f64> {
    if samples.len() < MIN_REPLICATES {
        return Err(Error::TooFewSamples { needed: MIN_REPLICATES, got: samples.len() });
    }
    let b = samples.len() as f64;
    let below = samples.iter().filter(|&&s| s <= 0.0).count() as f64;
    let above = samples.iter().filter(|&&s| s >= 0.0).count() as f64;
    let tail = (1.0 + below).min(1.0 + above) / (b + 1.0);
    Ok((2.0 * tail).min(1.0))
}
