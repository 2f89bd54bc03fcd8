//! Rutter–Gatsonis SROC curve implied by a bivariate fit, and its AUC.
//!
//! With shape `β = ln(σ_B/σ_A)` the curve is
//! `logit(Se) = μ_A + (σ_A/σ_B)(logit(FPR) − μ_B)`: it passes through the
//! summary point and its slope on the logit scale is `e^{−β}`.

use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use serde::{Deserialize, Serialize};

use crate::linalg::{Sym2, Vec2};
use crate::math::{expit, logit};
use crate::reml::BivariateFit;
use crate::{Error, Result};

/// HSROC parameterisation of a fitted bivariate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrocCurve {
    /// `Λ e^{−β/2}`, the logit-sensitivity at logit FPR 0.
    pub intercept: f64,
    /// `e^{−β} = σ_A/σ_B`.
    pub slope: f64,
    /// Accuracy `Λ`.
    pub lambda: f64,
    /// Shape `β`.
    pub beta: f64,
    /// Mean positivity threshold `Θ`.
    pub theta: f64,
    pub tau2_theta: f64,
    pub tau2_alpha: f64,
}

impl SrocCurve {
    /// Curve with the given logit-scale intercept and slope; the variance
    /// components are left at zero and `Θ` at zero.
    pub fn from_line(intercept: f64, slope: f64) -> Self {
        let beta = -log(slope);
        SrocCurve { intercept, slope, lambda: intercept * exp(beta / 2.0), beta, theta: 0.0, tau2_theta: 0.0, tau2_alpha: 0.0 }
    }

    /// Bivariate means and covariance implied by the HSROC parameters, from
    /// `logit(Se) = e^{−β/2}(θ + α/2)` and `logit(FPR) = e^{β/2}(θ − α/2)`.
    pub fn bivariate_moments(&self) -> (Vec2, Sym2) {
        let (down, up) = (exp(-self.beta / 2.0), exp(self.beta / 2.0));
        let mu = [down * (self.theta + self.lambda / 2.0), up * (self.theta - self.lambda / 2.0)];
        let quarter = self.tau2_alpha / 4.0;
        let cov = Sym2 {
            xx: down * down * (self.tau2_theta + quarter),
            xy: self.tau2_theta - quarter,
            yy: up * up * (self.tau2_theta + quarter),
        };
        (mu, cov)
    }
}

/// Maps a bivariate fit to its HSROC parameters.
pub fn hsroc_params(fit: &BivariateFit) -> Result<SrocCurve> {
    let p = &fit.params;
    if !(p.sigma_a > 0.0 && p.sigma_b > 0.0) || !p.sigma_a.is_finite() || !p.sigma_b.is_finite() {
        return Err(Error::ZeroHeterogeneity);
    }
    let ratio = p.sigma_b / p.sigma_a;
    let beta = log(ratio);
    let lambda = sqrt(ratio) * p.mu_a - sqrt(1.0 / ratio) * p.mu_b;
    let theta = 0.5 * (sqrt(ratio) * p.mu_a + sqrt(1.0 / ratio) * p.mu_b);
    let sab = p.sigma_a * p.sigma_b;
    let cov = p.rho * sab;
    let slope = p.sigma_a / p.sigma_b;
    Ok(SrocCurve {
        intercept: p.mu_a - slope * p.mu_b,
        slope,
        lambda,
        beta,
        theta,
        tau2_theta: 0.5 * (sab + cov),
        tau2_alpha: 2.0 * (sab - cov),
    })
}

/// Sensitivity on the SROC curve at a false positive rate in (0, 1).
pub fn sroc_sensitivity_at(curve: &SrocCurve, fpr: f64) -> Result<f64> {
    if !(fpr > 0.0 && fpr < 1.0) {
        return Err(Error::FprOutOfRange(fpr));
    }
    Ok(sensitivity(curve, fpr))
}

/// Curve value extended by its limits 0 and 1 at the ends of [0, 1].
#[inline]
fn sensitivity(curve: &SrocCurve, fpr: f64) -> f64 {
    if fpr <= 0.0 {
        0.0
    } else if fpr >= 1.0 {
        1.0
    } else {
        expit(curve.intercept + curve.slope * logit(fpr))
    }
}

/// `n` points `(fpr, sensitivity)` evenly spaced over [0, 1], endpoints included.
pub fn sample_curve(curve: &SrocCurve, n: usize) -> Vec<[f64; 2]> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            let x = k as f64 / (n - 1) as f64;
            [x, sensitivity(curve, x)]
        })
        .collect()
}

pub const DEFAULT_RESOLUTION: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucOptions {
    pub lo: f64,
    pub hi: f64,
    /// Number of Simpson sub-intervals; odd values are rounded up.
    pub resolution: usize,
}

impl Default for AucOptions {
    fn default() -> Self {
        AucOptions { lo: 0.0, hi: 1.0, resolution: DEFAULT_RESOLUTION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub method: &'static str,
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub value: f64,
    pub fpr_range: (f64, f64),
    #[serde(skip_deserializing, default = "simpson_record")]
    pub quadrature: Quadrature,
}

fn simpson_record() -> Quadrature {
    Quadrature { method: "composite-simpson", intervals: DEFAULT_RESOLUTION }
}

/// Area under the SROC curve over `[lo, hi]` by composite Simpson's rule on
/// a uniform grid.
pub fn compute_auc(curve: &SrocCurve, opts: &AucOptions) -> Result<AucResult> {
    let (lo, hi) = (opts.lo, opts.hi);
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidRange { lo, hi });
    }
    if opts.resolution < 8 {
        return Err(Error::ResolutionTooSmall(opts.resolution));
    }
    let n = opts.resolution + opts.resolution % 2;
    let h = (hi - lo) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for k in 1..n {
        let v = sensitivity(curve, lo + k as f64 * h);
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    let ends = sensitivity(curve, lo) + sensitivity(curve, hi);
    let value = (h / 3.0) * (ends + 4.0 * odd + 2.0 * even);
    Ok(AucResult {
        value: value.clamp(0.0, 1.0),
        fpr_range: (lo, hi),
        quadrature: Quadrature { method: "composite-simpson", intervals: n },
    })
}

/// Full-range AUC of the curve implied by `fit`, at the default resolution.
pub fn auc_of_fit(fit: &BivariateFit, opts: &AucOptions) -> Result<f64> {
    Ok(compute_auc(&hsroc_params(fit)?, opts)?.value)
}
