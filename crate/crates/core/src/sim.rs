//! Synthetic meta-analyses from known parameters and Monte Carlo coverage of
//! the bootstrap AUC interval.

use alloc::format;
use alloc::vec::Vec;

use libm::sqrt;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_auc_ci_prepared, binomial_counts, BootstrapConfig, Prepared};
use crate::data::{Dataset, Study2x2};
use crate::exec::{Executor, Serial};
use crate::linalg::Sym2;
use crate::reml::{BivariateFit, BivariateParams, BoundaryFlags};
use crate::rng::{derive_seed, replicate_stream, Tag};
use crate::sroc::auc_of_fit;
use crate::{Error, Result, MIN_STUDIES};

/// Per-study arm sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubjectCounts {
    Fixed { n_a: u64, n_b: u64 },
    /// Each arm drawn uniformly from `min..=max`.
    Range { min: u64, max: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub true_params: BivariateParams,
    pub n_studies: usize,
    pub subject_counts: SubjectCounts,
    pub replications: usize,
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
}

/// Smallest replication count for a coverage estimate.
pub const MIN_REPLICATIONS: usize = 100;
/// Smallest arm size accepted in a scenario.
pub const MIN_SUBJECTS: u64 = 10;
/// Fraction of failed replications that aborts a coverage study.
pub const MAX_REPLICATION_FAILURES: f64 = 0.10;

impl Default for SimScenario {
    /// Twenty studies of 200 participants per arm, σ_A = σ_B = 0.5, ρ = −0.4.
    fn default() -> Self {
        SimScenario {
            true_params: BivariateParams { mu_a: 1.0, mu_b: -1.5, sigma_a: 0.5, sigma_b: 0.5, rho: -0.4 },
            n_studies: 20,
            subject_counts: SubjectCounts::Fixed { n_a: 200, n_b: 200 },
            replications: 500,
            bootstrap: BootstrapConfig { b: 1000, ..Default::default() },
            seed: 20_200_101,
        }
    }
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        let p = &self.true_params;
        if !(p.sigma_a >= 0.0 && p.sigma_b >= 0.0 && (-1.0..=1.0).contains(&p.rho)) {
            return Err(Error::InvalidConfig("true parameters must have σ ≥ 0 and |ρ| ≤ 1".into()));
        }
        if self.n_studies < MIN_STUDIES {
            return Err(Error::TooFewStudies { needed: MIN_STUDIES, got: self.n_studies });
        }
        let min_subjects = match self.subject_counts {
            SubjectCounts::Fixed { n_a, n_b } => n_a.min(n_b),
            SubjectCounts::Range { min, max } => {
                if min > max {
                    return Err(Error::InvalidConfig("subject count range is inverted".into()));
                }
                min
            }
        };
        if min_subjects < MIN_SUBJECTS {
            return Err(Error::InvalidConfig(format!("subject counts must be at least {MIN_SUBJECTS}")));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::InvalidConfig(format!("replications must be at least {MIN_REPLICATIONS}")));
        }
        self.bootstrap.validate()
    }

    /// AUC of the SROC curve implied by the true parameters.
    pub fn true_auc(&self) -> Result<f64> {
        auc_of_fit(&pseudo_fit(&self.true_params), &self.bootstrap.auc)
    }
}

fn pseudo_fit(params: &BivariateParams) -> BivariateFit {
    BivariateFit {
        params: *params,
        cov_mu: Sym2::ZERO,
        reml_value: 0.0,
        converged: true,
        iterations: 0,
        boundary_hit: BoundaryFlags::default(),
        n_studies: 0,
    }
}

/// Draws `θ_i ~ N(μ, Σ)` and binomial counts with `p = expit(θ_i)`.
pub fn simulate_dataset<R: Rng + ?Sized>(scenario: &SimScenario, rng: &mut R) -> Dataset {
    let fit = pseudo_fit(&scenario.true_params);
    let thetas = crate::bootstrap::draw_effects(&fit, scenario.n_studies, rng);
    let studies = thetas
        .iter()
        .enumerate()
        .map(|(i, theta)| {
            let (n_a, n_b) = match scenario.subject_counts {
                SubjectCounts::Fixed { n_a, n_b } => (n_a, n_b),
                SubjectCounts::Range { min, max } => (rng.random_range(min..=max), rng.random_range(min..=max)),
            };
            let (tp, fp) = binomial_counts(n_a, n_b, *theta, rng);
            Study2x2::new(format!("sim{}", i + 1), tp, fp, n_a - tp, n_b - fp)
        })
        .collect();
    Dataset::new("simulated", studies).expect("simulated studies have non-empty arms and unique labels")
}

/// Mean of `estimate − truth` per parameter across successful replications.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamBias {
    pub mu_a: f64,
    pub mu_b: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub true_auc: f64,
    pub coverage: f64,
    /// Binomial standard error of `coverage`.
    pub coverage_se: f64,
    pub mean_width: f64,
    pub replications: usize,
    pub successful: usize,
    pub failed: usize,
    pub bias: ParamBias,
}

struct Replication {
    covered: bool,
    width: f64,
    params: BivariateParams,
}

fn run_replication(scenario: &SimScenario, r: usize, true_auc: f64) -> Result<Replication> {
    let mut rng = replicate_stream(scenario.seed, r as u64, Tag::Simulate, 0);
    let data = simulate_dataset(scenario, &mut rng);
    let config = BootstrapConfig { seed: derive_seed(scenario.seed, r as u64), ..scenario.bootstrap };
    let prep = Prepared::new(&data, &config)?;
    let run = bootstrap_auc_ci_prepared(&prep, &config, &Serial)?;
    let (lo, hi) = run.interval;
    Ok(Replication { covered: lo <= true_auc && true_auc <= hi, width: hi - lo, params: prep.fit.params })
}

/// Simulates `replications` datasets, runs the bootstrap AUC interval on
/// each and reports how often it contains the true AUC.
///
/// Replications run through `exec`; each one's bootstrap runs serially.
pub fn coverage_study<E: Executor>(scenario: &SimScenario, exec: &E) -> Result<CoverageReport> {
    scenario.validate()?;
    let true_auc = scenario.true_auc()?;
    let results = exec.map_indexed(scenario.replications, |r| run_replication(scenario, r, true_auc));
    let ok: Vec<&Replication> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failed = results.len() - ok.len();
    if failed as f64 > MAX_REPLICATION_FAILURES * scenario.replications as f64 || ok.is_empty() {
        return Err(Error::SimulationFailures { failed, attempted: scenario.replications });
    }
    let n = ok.len() as f64;
    let coverage = ok.iter().filter(|r| r.covered).count() as f64 / n;
    let mean = |f: fn(&BivariateParams) -> f64| ok.iter().map(|r| f(&r.params)).sum::<f64>() / n;
    let t = &scenario.true_params;
    Ok(CoverageReport {
        true_auc,
        coverage,
        coverage_se: sqrt(coverage * (1.0 - coverage) / n),
        mean_width: ok.iter().map(|r| r.width).sum::<f64>() / n,
        replications: scenario.replications,
        successful: ok.len(),
        failed,
        bias: ParamBias {
            mu_a: mean(|p| p.mu_a) - t.mu_a,
            mu_b: mean(|p| p.mu_b) - t.mu_b,
            sigma_a: mean(|p| p.sigma_a) - t.sigma_a,
            sigma_b: mean(|p| p.sigma_b) - t.sigma_b,
            rho: mean(|p| p.rho) - t.rho,
        },
    })
}
