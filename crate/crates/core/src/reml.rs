//! Bivariate normal-normal random-effects model fitted by restricted maximum
//! likelihood.
//!
//! The mean is profiled out by generalised least squares, so the optimiser
//! only searches the three covariance parameters, on the unconstrained scale
//! `(ln σ_A, ln σ_B, atanh ρ)`.

use alloc::vec::Vec;

use libm::{atanh, exp, log, sqrt, tanh};
use serde::{Deserialize, Serialize};

use crate::data::OutcomeSet;
use crate::linalg::{Sym2, Vec2};
use crate::math::{chi2_2_quantile, expit, normal_quantile, two_sided_normal_p};
use crate::simplex::{self, SimplexOptions};
use crate::{Error, Result, MIN_STUDIES};

/// Box for the transformed parameters `ln σ_A`, `ln σ_B`, `atanh ρ`.
pub const LOG_SIGMA_BOUNDS: (f64, f64) = (-12.0, 5.0);
pub const ATANH_RHO_BOUNDS: (f64, f64) = (-12.0, 12.0);
const BOUNDS: [(f64, f64); 3] = [LOG_SIGMA_BOUNDS, LOG_SIGMA_BOUNDS, ATANH_RHO_BOUNDS];
const BOUNDARY_EPS: f64 = 1e-6;
const START_VARIANCE_FLOOR: f64 = 1e-4;

/// Summary means and between-study covariance on the logit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateParams {
    pub mu_a: f64,
    pub mu_b: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub rho: f64,
}

impl BivariateParams {
    pub fn mu(&self) -> Vec2 {
        [self.mu_a, self.mu_b]
    }

    pub fn sigma(&self) -> Sym2 {
        Sym2::from_sd_corr(self.sigma_a, self.sigma_b, self.rho)
    }
}

/// Which transformed parameters ended up on their clamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoundaryFlags {
    pub sigma_a: bool,
    pub sigma_b: bool,
    pub rho: bool,
}

impl BoundaryFlags {
    pub fn any(&self) -> bool {
        self.sigma_a || self.sigma_b || self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateFit {
    pub params: BivariateParams,
    /// Covariance of `(μ̂_A, μ̂_B)`.
    pub cov_mu: Sym2,
    /// Maximised restricted log-likelihood, without the `2π` constant.
    pub reml_value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub boundary_hit: BoundaryFlags,
    pub n_studies: usize,
}

impl BivariateFit {
    pub fn se_mu(&self) -> Vec2 {
        [sqrt(self.cov_mu.xx), sqrt(self.cov_mu.yy)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Number of simplex runs from jittered starting points.
    pub restarts: usize,
    pub simplex: SimplexOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { restarts: 5, simplex: SimplexOptions::default() }
    }
}

/// Restricted log-likelihood at between-study covariance `sigma`, or `None`
/// when some matrix is singular or a value is not finite.
///
/// Single pass: `Σ r_iᵀ W_i r_i = Σ y_iᵀ W_i y_i − μ̂ᵀ (Σ W_i) μ̂`.
fn reml_at(sigma: &Sym2, data: &OutcomeSet) -> Option<f64> {
    let (mut ixx, mut ixy, mut iyy) = (0.0, 0.0, 0.0);
    let (mut wy0, mut wy1) = (0.0, 0.0);
    let mut log_det_v = 0.0;
    // Determinants are multiplied and logged in batches; one `log` per study dominates otherwise.
    let mut det_prod = 1.0;
    let mut ywy = 0.0;
    for o in &data.outcomes {
        let (vxx, vyy) = (sigma.xx + o.s2_a, sigma.yy + o.s2_b);
        let det = vxx * vyy - sigma.xy * sigma.xy;
        if !(det > 0.0) {
            return None;
        }
        let inv = 1.0 / det;
        let (wxx, wxy, wyy) = (vyy * inv, -sigma.xy * inv, vxx * inv);
        det_prod *= det;
        if !(1e-150..=1e150).contains(&det_prod) {
            log_det_v += log(det_prod);
            det_prod = 1.0;
        }
        let (a, b) = (wxx * o.y_a + wxy * o.y_b, wxy * o.y_a + wyy * o.y_b);
        wy0 += a;
        wy1 += b;
        ywy += o.y_a * a + o.y_b * b;
        ixx += wxx;
        ixy += wxy;
        iyy += wyy;
    }
    log_det_v += log(det_prod);
    let info_det = ixx * iyy - ixy * ixy;
    if !(info_det > 0.0) {
        return None;
    }
    // μ̂ᵀ I μ̂ = (Σ W y)ᵀ I⁻¹ (Σ W y)
    let fitted = (iyy * wy0 * wy0 - 2.0 * ixy * wy0 * wy1 + ixx * wy1 * wy1) / info_det;
    let quad = (ywy - fitted).max(0.0);
    let value = -0.5 * (log_det_v + quad) - 0.5 * log(info_det);
    value.is_finite().then_some(value)
}

/// Restricted log-likelihood of the between-study parameters, with the mean
/// profiled out by GLS:
///
/// `ℓ_R = -½ Σ_i [ln|V_i| + r_iᵀ V_i⁻¹ r_i] - ½ ln|Σ_i V_i⁻¹|`,
/// `V_i = Σ + S_i`, `r_i = y_i - μ̂(Σ)`.
pub fn restricted_log_likelihood(sigma_a: f64, sigma_b: f64, rho: f64, data: &OutcomeSet) -> Result<f64> {
    if data.len() < MIN_STUDIES {
        return Err(Error::TooFewStudies { needed: MIN_STUDIES, got: data.len() });
    }
    let sigma = Sym2::from_sd_corr(sigma_a, sigma_b, rho);
    for o in &data.outcomes {
        if !((sigma + o.s()).det() > 0.0) {
            return Err(Error::Singular("study marginal covariance"));
        }
    }
    reml_at(&sigma, data).ok_or(Error::NonFinite("restricted log-likelihood"))
}

/// GLS estimate of the summary mean and its covariance for a fixed `Σ`.
pub fn gls_mean(sigma: &Sym2, data: &OutcomeSet) -> Result<(Vec2, Sym2)> {
    let mut info = Sym2::ZERO;
    let mut wy = [0.0; 2];
    for o in &data.outcomes {
        let w = (*sigma + o.s()).inverse().ok_or(Error::Singular("study marginal covariance"))?;
        let wyi = w.mul_vec(o.y());
        wy[0] += wyi[0];
        wy[1] += wyi[1];
        info += w;
    }
    let cov = info.inverse().ok_or(Error::Singular("total information matrix"))?;
    let mu = cov.mul_vec(wy);
    if !(mu[0].is_finite() && mu[1].is_finite() && cov.is_finite()) {
        return Err(Error::NonFinite("GLS mean"));
    }
    Ok((mu, cov))
}

fn to_params(theta: &[f64; 3]) -> (f64, f64, f64) {
    (exp(theta[0]), exp(theta[1]), tanh(theta[2]))
}

/// Method-of-moments starting point on the transformed scale.
fn moment_start(data: &OutcomeSet) -> [f64; 3] {
    let n = data.len() as f64;
    let mean = |f: fn(&crate::data::LogitOutcome) -> f64| data.outcomes.iter().map(f).sum::<f64>() / n;
    let (ma, mb) = (mean(|o| o.y_a), mean(|o| o.y_b));
    let (sa, sb) = (mean(|o| o.s2_a), mean(|o| o.s2_b));
    let mut vaa = 0.0;
    let mut vbb = 0.0;
    let mut vab = 0.0;
    for o in &data.outcomes {
        vaa += (o.y_a - ma) * (o.y_a - ma);
        vbb += (o.y_b - mb) * (o.y_b - mb);
        vab += (o.y_a - ma) * (o.y_b - mb);
    }
    let denom = n - 1.0;
    let var_a = (vaa / denom - sa).max(START_VARIANCE_FLOOR);
    let var_b = (vbb / denom - sb).max(START_VARIANCE_FLOOR);
    let rho = (vab / denom / sqrt(var_a * var_b)).clamp(-0.9, 0.9);
    let rho = if rho.is_finite() { rho } else { 0.0 };
    [0.5 * log(var_a), 0.5 * log(var_b), atanh(rho)]
}

/// Deterministic jitter pattern applied to the moment start, one row per restart.
const JITTER: [[f64; 3]; 8] = [
    [0.0, 0.0, 0.0],
    [0.7, -0.7, 0.6],
    [-0.7, 0.7, -0.6],
    [1.2, 1.2, 0.0],
    [-1.5, -1.5, 0.0],
    [0.3, 0.3, 1.2],
    [-0.3, 0.3, -1.2],
    [2.0, -1.0, 0.3],
];

/// Fits the bivariate model by REML.
pub fn fit_reml(data: &OutcomeSet, options: &FitOptions) -> Result<BivariateFit> {
    if data.len() < MIN_STUDIES {
        return Err(Error::TooFewStudies { needed: MIN_STUDIES, got: data.len() });
    }
    let first = data.outcomes[0];
    if data.outcomes.iter().all(|o| o.y_a == first.y_a && o.y_b == first.y_b) {
        return Err(Error::DegenerateData);
    }

    let objective = |theta: &[f64; 3]| {
        let (sa, sb, rho) = to_params(theta);
        match reml_at(&Sym2::from_sd_corr(sa, sb, rho), data) {
            Some(v) => -v,
            None => f64::INFINITY,
        }
    };

    let start = moment_start(data);
    let restarts = options.restarts.clamp(1, JITTER.len());
    let mut best: Option<simplex::SimplexOutcome<3>> = None;
    let mut iterations = 0;
    for jitter in JITTER.iter().take(restarts) {
        let mut s = start;
        for i in 0..3 {
            s[i] += jitter[i];
        }
        let run = simplex::minimize(objective, s, &BOUNDS, &options.simplex);
        iterations += run.iterations;
        if run.converged && best.as_ref().is_none_or(|b| run.f < b.f) {
            best = Some(run);
        }
    }
    let best = best.ok_or(Error::NonConvergence { restarts })?;

    let (sigma_a, sigma_b, rho) = to_params(&best.x);
    let sigma = Sym2::from_sd_corr(sigma_a, sigma_b, rho);
    let (mu, cov_mu) = gls_mean(&sigma, data)?;
    let at_bound = |x: f64, (lo, hi): (f64, f64)| x <= lo + BOUNDARY_EPS || x >= hi - BOUNDARY_EPS;
    Ok(BivariateFit {
        params: BivariateParams { mu_a: mu[0], mu_b: mu[1], sigma_a, sigma_b, rho },
        cov_mu,
        reml_value: -best.f,
        converged: true,
        iterations,
        boundary_hit: BoundaryFlags {
            sigma_a: at_bound(best.x[0], LOG_SIGMA_BOUNDS),
            sigma_b: at_bound(best.x[1], LOG_SIGMA_BOUNDS),
            rho: at_bound(best.x[2], ATANH_RHO_BOUNDS),
        },
        n_studies: data.len(),
    })
}

/// Point estimate and confidence limits on the probability scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryAccuracy {
    pub sens: Estimate,
    pub fpr: Estimate,
    pub level: f64,
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(level))
    }
}

/// Summary sensitivity and FPR with Wald intervals built on the logit scale.
pub fn summary_accuracy(fit: &BivariateFit, level: f64) -> Result<SummaryAccuracy> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    check_level(level)?;
    let z = normal_quantile(0.5 + level / 2.0);
    let se = fit.se_mu();
    let est = |mu: f64, se: f64| Estimate { point: expit(mu), lower: expit(mu - z * se), upper: expit(mu + z * se) };
    Ok(SummaryAccuracy { sens: est(fit.params.mu_a, se[0]), fpr: est(fit.params.mu_b, se[1]), level })
}

/// Confidence ellipse for `(μ_A, μ_B)` on the logit scale as `(μ_B, μ_A)`
/// points, i.e. x = logit FPR, y = logit sensitivity. The first vertex is
/// repeated at the end.
pub fn logit_confidence_region(fit: &BivariateFit, level: f64, n_points: usize) -> Result<Vec<[f64; 2]>> {
    check_level(level)?;
    if n_points < 3 {
        return Err(Error::InvalidConfig("confidence region needs at least 3 points".into()));
    }
    let l = fit.cov_mu.cholesky().ok_or(Error::Singular("summary covariance"))?;
    let r = sqrt(chi2_2_quantile(level));
    let mut out = Vec::with_capacity(n_points + 1);
    for k in 0..n_points {
        let t = 2.0 * core::f64::consts::PI * k as f64 / n_points as f64;
        let (s, c) = libm::sincos(t);
        let da = r * l.l11 * c;
        let db = r * (l.l21 * c + l.l22 * s);
        out.push([fit.params.mu_b + db, fit.params.mu_a + da]);
    }
    out.push(out[0]);
    Ok(out)
}

/// [`logit_confidence_region`] mapped into ROC space `(FPR, sensitivity)`.
pub fn confidence_region(fit: &BivariateFit, level: f64, n_points: usize) -> Result<Vec<[f64; 2]>> {
    Ok(logit_confidence_region(fit, level, n_points)?
        .into_iter()
        .map(|[x, y]| [expit(x), expit(y)])
        .collect())
}

/// Difference of one logit-scale summary between two independent fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldTest {
    pub difference: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldComparison {
    pub sens: WaldTest,
    pub fpr: WaldTest,
}

/// Wald z-tests of `μ_1 - μ_2` for logit sensitivity and logit FPR.
///
/// The two fits must come from disjoint sets of studies; this is not checked.
pub fn wald_compare_summary(fit1: &BivariateFit, fit2: &BivariateFit) -> Result<WaldComparison> {
    if !fit1.converged || !fit2.converged {
        return Err(Error::NotConverged);
    }
    let test = |d: f64, v1: f64, v2: f64| {
        let se = sqrt(v1 + v2);
        let z = if d == 0.0 { 0.0 } else { d / se };
        WaldTest { difference: d, se, z, p_value: two_sided_normal_p(z) }
    };
    Ok(WaldComparison {
        sens: test(fit1.params.mu_a - fit2.params.mu_a, fit1.cov_mu.xx, fit2.cov_mu.xx),
        fpr: test(fit1.params.mu_b - fit2.params.mu_b, fit1.cov_mu.yy, fit2.cov_mu.yy),
    })
}

#[cfg(test)]
pub(crate) mod tests;
