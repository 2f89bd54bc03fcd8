use super::*;
use crate::data::{to_outcomes, CorrectionPolicy, Dataset, LogitOutcome, Study2x2};
use alloc::format;
use alloc::vec;
use rand::{Rng, SeedableRng};

pub(crate) fn sample_counts() -> Vec<(u64, u64, u64, u64)> {
    vec![
        (25, 8, 12, 80),
        (40, 15, 10, 120),
        (12, 3, 14, 45),
        (30, 22, 9, 95),
        (18, 5, 5, 60),
        (55, 30, 20, 210),
        (9, 2, 11, 38),
        (33, 11, 6, 70),
        (21, 14, 15, 88),
        (47, 9, 13, 102),
    ]
}

fn outcomes_from(counts: &[(u64, u64, u64, u64)]) -> OutcomeSet {
    let studies = counts
        .iter()
        .enumerate()
        .map(|(i, &(tp, fp, fn_, tn))| Study2x2::new(format!("s{}", i + 1), tp, fp, fn_, tn))
        .collect();
    to_outcomes(&Dataset::new("sample", studies).unwrap(), CorrectionPolicy::AffectedStudies).unwrap()
}

fn toy(ys: &[[f64; 2]], s2: [f64; 2]) -> OutcomeSet {
    OutcomeSet::new(
        "toy",
        ys.iter().map(|y| LogitOutcome { y_a: y[0], y_b: y[1], s2_a: s2[0], s2_b: s2[1] }).collect(),
        CorrectionPolicy::None,
    )
}

// ---- independent oracles: plain arrays, no Sym2 ----

fn det2(m: [[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inv2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let d = det2(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

fn marginal_cov(sa: f64, sb: f64, rho: f64, o: &LogitOutcome) -> [[f64; 2]; 2] {
    [[sa * sa + o.s2_a, rho * sa * sb], [rho * sa * sb, sb * sb + o.s2_b]]
}

/// Log-density of a bivariate normal, written out from the textbook formula.
fn log_mvn(y: [f64; 2], mean: [f64; 2], v: [[f64; 2]; 2]) -> f64 {
    let w = inv2(v);
    let r = [y[0] - mean[0], y[1] - mean[1]];
    let q = r[0] * (w[0][0] * r[0] + w[0][1] * r[1]) + r[1] * (w[1][0] * r[0] + w[1][1] * r[1]);
    -libm::log(2.0 * core::f64::consts::PI) - 0.5 * libm::log(det2(v)) - 0.5 * q
}

/// Solves the weighted normal equations (Σ W_i) μ = Σ W_i y_i by Cramer's rule.
fn normal_equations(sa: f64, sb: f64, rho: f64, data: &OutcomeSet) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut a = [[0.0; 2]; 2];
    let mut rhs = [0.0; 2];
    for o in &data.outcomes {
        let w = inv2(marginal_cov(sa, sb, rho, o));
        for r in 0..2 {
            for c in 0..2 {
                a[r][c] += w[r][c];
            }
            rhs[r] += w[r][0] * o.y_a + w[r][1] * o.y_b;
        }
    }
    let d = det2(a);
    let mu = [(rhs[0] * a[1][1] - a[0][1] * rhs[1]) / d, (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / d];
    (mu, inv2(a))
}

fn brute_force_reml(sa: f64, sb: f64, rho: f64, data: &OutcomeSet) -> f64 {
    let (mu, cov) = normal_equations(sa, sb, rho, data);
    let n = data.len() as f64;
    let ll: f64 = data.outcomes.iter().map(|o| log_mvn(o.y(), mu, marginal_cov(sa, sb, rho, o))).sum();
    // Drop the 2π constants and add the REML adjustment -½ ln|Σ W_i| = +½ ln|cov|.
    ll + n * libm::log(2.0 * core::f64::consts::PI) + 0.5 * libm::log(det2(cov))
}

#[test]
fn two_study_toy_closed_form() {
    // Σ = 0, S_i = I: ℓ = -½ Σ r_iᵀ r_i - ½ ln|2I|.
    let same = toy(&[[0.3, -1.0], [0.3, -1.0]], [1.0, 1.0]);
    let v = reml_at(&Sym2::ZERO, &same).unwrap();
    assert!((v + libm::log(2.0)).abs() < 1e-15);

    let apart = toy(&[[1.0, 0.0], [-1.0, 2.0]], [1.0, 1.0]);
    // μ̂ = (0, 1); residuals (1,-1), (-1,1).
    let v = reml_at(&Sym2::ZERO, &apart).unwrap();
    assert!((v - (-2.0 - libm::log(2.0))).abs() < 1e-14);
}

#[test]
fn matches_brute_force_density_composition() {
    let data = toy(&[[1.1, -2.0], [0.4, -1.2], [1.9, -2.6]], [0.3, 0.15]);
    let mut data = data;
    data.outcomes[1].s2_a = 0.5;
    data.outcomes[2].s2_b = 0.08;
    let ours = restricted_log_likelihood(0.5, 0.5, 0.0, &data).unwrap();
    let oracle = brute_force_reml(0.5, 0.5, 0.0, &data);
    assert!((ours - oracle).abs() < 1e-12, "{ours} vs {oracle}");

    let real = outcomes_from(&sample_counts());
    for &(sa, sb, rho) in &[(0.2, 0.9, -0.5), (1.3, 0.05, 0.7), (0.6, 0.6, 0.0)] {
        let ours = restricted_log_likelihood(sa, sb, rho, &real).unwrap();
        assert!((ours - brute_force_reml(sa, sb, rho, &real)).abs() < 1e-10);
    }
}

#[test]
fn reml_equals_log_integral_over_flat_mean() {
    // Restricted likelihood = ∫ Π N(y_i; μ, V_i) dμ up to (2π)^{N-1}.
    let data = toy(&[[1.1, -2.0], [0.4, -1.2], [1.9, -2.6], [0.8, -1.9]], [0.3, 0.2]);
    let (sa, sb, rho) = (0.4, 0.3, -0.3);
    let (mu, _) = normal_equations(sa, sb, rho, &data);
    let log_joint = |m: [f64; 2]| -> f64 {
        data.outcomes.iter().map(|o| log_mvn(o.y(), m, marginal_cov(sa, sb, rho, o))).sum()
    };
    let peak = log_joint(mu);
    let (half, steps) = (3.0, 600);
    let h = 2.0 * half / steps as f64;
    let mut total = 0.0;
    for i in 0..=steps {
        for j in 0..=steps {
            let m = [mu[0] - half + i as f64 * h, mu[1] - half + j as f64 * h];
            let wi = if i == 0 || i == steps { 0.5 } else { 1.0 };
            let wj = if j == 0 || j == steps { 0.5 } else { 1.0 };
            total += wi * wj * libm::exp(log_joint(m) - peak);
        }
    }
    let log_integral = peak + libm::log(total * h * h);
    let n = data.len() as f64;
    let expected = log_integral + (n - 1.0) * libm::log(2.0 * core::f64::consts::PI);
    let ours = restricted_log_likelihood(sa, sb, rho, &data).unwrap();
    assert!((ours - expected).abs() < 1e-8, "{ours} vs {expected}");
}

#[test]
fn likelihood_is_permutation_invariant() {
    let data = outcomes_from(&sample_counts());
    let mut rev = data.clone();
    rev.outcomes.reverse();
    let a = restricted_log_likelihood(0.7, 0.4, -0.2, &data).unwrap();
    let b = restricted_log_likelihood(0.7, 0.4, -0.2, &rev).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn too_few_studies() {
    let data = toy(&[[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0]);
    assert_eq!(
        restricted_log_likelihood(0.1, 0.1, 0.0, &data).unwrap_err(),
        Error::TooFewStudies { needed: 3, got: 2 }
    );
    assert!(matches!(fit_reml(&data, &FitOptions::default()), Err(Error::TooFewStudies { .. })));
}

#[test]
fn gls_equal_weights_is_arithmetic_mean() {
    let data = toy(&[[1.0, -1.0], [2.0, -3.0], [0.0, -2.0]], [0.2, 0.4]);
    let (mu, cov) = gls_mean(&Sym2::ZERO, &data).unwrap();
    assert!((mu[0] - 1.0).abs() < 1e-15 && (mu[1] + 2.0).abs() < 1e-15);
    assert!((cov.xx - 0.2 / 3.0).abs() < 1e-15 && (cov.yy - 0.4 / 3.0).abs() < 1e-15);
}

#[test]
fn gls_dominant_study() {
    let mut data = toy(&[[1.5, -0.5], [9.0, 9.0], [-9.0, -9.0]], [1e8, 1e8]);
    data.outcomes[0].s2_a = 1e-4;
    data.outcomes[0].s2_b = 1e-4;
    let (mu, _) = gls_mean(&Sym2::ZERO, &data).unwrap();
    assert!((mu[0] - 1.5).abs() < 1e-9 && (mu[1] + 0.5).abs() < 1e-9);
}

#[test]
fn gls_matches_explicit_normal_equations() {
    let data = toy(&[[1.1, -2.0], [0.4, -1.2], [1.9, -2.6]], [0.3, 0.15]);
    let mut data = data;
    data.outcomes[0].s2_b = 0.9;
    for &(sa, sb, rho) in &[(0.5, 0.5, 0.0), (0.8, 0.3, -0.6), (0.1, 1.2, 0.9)] {
        let (mu, cov) = gls_mean(&Sym2::from_sd_corr(sa, sb, rho), &data).unwrap();
        let (mu_o, cov_o) = normal_equations(sa, sb, rho, &data);
        assert!((mu[0] - mu_o[0]).abs() < 1e-12 && (mu[1] - mu_o[1]).abs() < 1e-12);
        assert!((cov.xx - cov_o[0][0]).abs() < 1e-12);
        assert!((cov.xy - cov_o[0][1]).abs() < 1e-12);
        assert!((cov.yy - cov_o[1][1]).abs() < 1e-12);
    }
}

#[test]
fn fit_is_a_local_maximum() {
    let data = outcomes_from(&sample_counts());
    let fit = fit_reml(&data, &FitOptions::default()).unwrap();
    assert!(fit.converged && !fit.boundary_hit.any());
    let p = fit.params;
    let theta = [libm::log(p.sigma_a), libm::log(p.sigma_b), libm::atanh(p.rho)];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..64 {
        let mut t = theta;
        for (i, ti) in t.iter_mut().enumerate() {
            *ti += rng.random_range(-0.05..0.05);
            *ti = ti.clamp(BOUNDS[i].0, BOUNDS[i].1);
        }
        let v = restricted_log_likelihood(libm::exp(t[0]), libm::exp(t[1]), libm::tanh(t[2]), &data).unwrap();
        assert!(fit.reml_value >= v - 1e-12);
    }
    // reml_value agrees with a direct evaluation at the optimum.
    let direct = restricted_log_likelihood(p.sigma_a, p.sigma_b, p.rho, &data).unwrap();
    assert!((direct - fit.reml_value).abs() < 1e-12);
}

#[test]
fn fit_is_permutation_invariant() {
    let data = outcomes_from(&sample_counts());
    let mut shuffled = data.clone();
    shuffled.outcomes.swap(0, 7);
    shuffled.outcomes.swap(2, 9);
    shuffled.outcomes.reverse();
    let a = fit_reml(&data, &FitOptions::default()).unwrap().params;
    let b = fit_reml(&shuffled, &FitOptions::default()).unwrap().params;
    for (x, y) in [(a.mu_a, b.mu_a), (a.mu_b, b.mu_b), (a.sigma_a, b.sigma_a), (a.sigma_b, b.sigma_b), (a.rho, b.rho)] {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn duplicating_a_study_shrinks_gls_covariance() {
    let data = outcomes_from(&sample_counts());
    let fit = fit_reml(&data, &FitOptions::default()).unwrap();
    let sigma = fit.params.sigma();
    let (_, before) = gls_mean(&sigma, &data).unwrap();
    for i in 0..data.len() {
        let mut dup = data.clone();
        dup.outcomes.push(data.outcomes[i]);
        let (_, after) = gls_mean(&sigma, &dup).unwrap();
        let [lo, _] = (before - after).eigenvalues();
        assert!(lo >= -1e-15, "study {i}: {lo}");
    }
}

#[test]
fn zero_heterogeneity_hits_boundary() {
    // Identical true accuracy in every study with tiny sampling noise.
    let data = toy(&[[1.0, -2.0], [1.0001, -2.0], [0.9999, -2.0001], [1.0, -1.9999]], [0.5, 0.5]);
    let fit = fit_reml(&data, &FitOptions::default()).unwrap();
    assert!(fit.boundary_hit.sigma_a && fit.boundary_hit.sigma_b);
    assert!(fit.params.sigma_a < 1e-4);
}

#[test]
fn degenerate_data_is_rejected() {
    let data = toy(&[[1.0, -2.0], [1.0, -2.0], [1.0, -2.0]], [0.5, 0.5]);
    assert_eq!(fit_reml(&data, &FitOptions::default()).unwrap_err(), Error::DegenerateData);
}

fn manual_fit(mu: [f64; 2], cov: Sym2) -> BivariateFit {
    BivariateFit {
        params: BivariateParams { mu_a: mu[0], mu_b: mu[1], sigma_a: 0.5, sigma_b: 0.5, rho: 0.0 },
        cov_mu: cov,
        reml_value: 0.0,
        converged: true,
        iterations: 0,
        boundary_hit: BoundaryFlags::default(),
        n_studies: 5,
    }
}

#[test]
fn summary_accuracy_degenerate_and_ordered() {
    let s = summary_accuracy(&manual_fit([0.0, -2.0], Sym2::ZERO), 0.95).unwrap();
    assert_eq!((s.sens.point, s.sens.lower, s.sens.upper), (0.5, 0.5, 0.5));

    let fit = fit_reml(&outcomes_from(&sample_counts()), &FitOptions::default()).unwrap();
    let s = summary_accuracy(&fit, 0.95).unwrap();
    for e in [s.sens, s.fpr] {
        assert!(0.0 < e.lower && e.lower < e.point && e.point < e.upper && e.upper < 1.0);
    }
    // Endpoints are expit of the logit-scale Wald interval.
    let se = fit.se_mu();
    let z = 1.959_963_984_540_054;
    assert!((s.sens.lower - expit(fit.params.mu_a - z * se[0])).abs() < 1e-15);
    assert!((s.fpr.upper - expit(fit.params.mu_b + z * se[1])).abs() < 1e-15);
    assert!(summary_accuracy(&fit, 1.0).is_err());

    let mut bad = fit.clone();
    bad.converged = false;
    assert_eq!(summary_accuracy(&bad, 0.95).unwrap_err(), Error::NotConverged);
}

#[test]
fn isotropic_confidence_region_is_a_circle() {
    let c = 0.04;
    let fit = manual_fit([1.0, -1.5], Sym2::diag(c, c));
    let pts = logit_confidence_region(&fit, 0.95, 64).unwrap();
    assert_eq!(pts.len(), 65);
    assert_eq!(pts[0], pts[64]);
    let radius = libm::sqrt(c * 5.991_464_547_107_979);
    for [x, y] in &pts {
        let r = libm::sqrt((x + 1.5) * (x + 1.5) + (y - 1.0) * (y - 1.0));
        assert!((r - radius).abs() < 1e-12);
    }
    for [x, y] in confidence_region(&fit, 0.95, 64).unwrap() {
        assert!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0);
    }
    assert!(matches!(confidence_region(&manual_fit([0.0, 0.0], Sym2::ZERO), 0.95, 8), Err(Error::Singular(_))));
}

#[test]
fn correlated_region_satisfies_quadratic_form() {
    let cov = Sym2::new(0.05, -0.02, 0.03);
    let fit = manual_fit([0.4, -2.0], cov);
    let inv = cov.inverse().unwrap();
    for [x, y] in logit_confidence_region(&fit, 0.9, 40).unwrap() {
        let q = inv.quad_form([y - 0.4, x + 2.0]);
        assert!((q - crate::math::chi2_2_quantile(0.9)).abs() < 1e-10);
    }
}

#[test]
fn wald_comparisons() {
    let a = manual_fit([1.0, -2.0], Sym2::new(0.04, 0.01, 0.09));
    let same = wald_compare_summary(&a, &a).unwrap();
    assert_eq!(same.sens.z, 0.0);
    assert_eq!(same.sens.p_value, 1.0);
    assert_eq!(same.fpr.p_value, 1.0);

    let b = manual_fit([0.5, -1.0], Sym2::new(0.05, 0.0, 0.07));
    let w = wald_compare_summary(&a, &b).unwrap();
    // (1.0 - 0.5) / sqrt(0.09) = 5/3; (-2 + 1) / sqrt(0.16) = -2.5
    assert!((w.sens.z - 5.0 / 3.0).abs() < 1e-14);
    assert!((w.fpr.z + 2.5).abs() < 1e-14);
    assert!((w.fpr.p_value - 0.012_419_330_651_552).abs() < 1e-12);
}
