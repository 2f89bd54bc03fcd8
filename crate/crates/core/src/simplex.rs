//! Derivative-free Nelder–Mead minimisation inside a box.
//!
//! Trial points are projected onto the box before evaluation, so the simplex
//! never leaves it; solutions pinned to a face show up as coordinates equal
//! to a bound.

use libm::fabs;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop when the spread of objective values across the simplex is below this.
    pub f_tol: f64,
    /// ...and every vertex lies within this (max-norm) distance of the best one.
    pub x_tol: f64,
    pub max_iter: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { f_tol: 1e-10, x_tol: 1e-8, max_iter: 4000, initial_step: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOutcome<const D: usize> {
    pub x: [f64; D],
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project<const D: usize>(mut x: [f64; D], bounds: &[(f64, f64); D]) -> [f64; D] {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
    x
}

fn toward<const D: usize>(from: &[f64; D], to: &[f64; D], t: f64) -> [f64; D] {
    let mut out = *from;
    for i in 0..D {
        out[i] = from[i] + t * (to[i] - from[i]);
    }
    out
}

/// Minimises `f` starting from `start` with standard coefficients
/// (reflection 1, expansion 2, contraction ½, shrink ½).
pub fn minimize<const D: usize, F>(
    mut f: F,
    start: [f64; D],
    bounds: &[(f64, f64); D],
    opts: &SimplexOptions,
) -> SimplexOutcome<D>
where
    F: FnMut(&[f64; D]) -> f64,
{
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64; D]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() { v } else { f64::INFINITY }
    };

    let x0 = project(start, bounds);
    let mut pts = [[0.0; D]; 8];
    assert!(D < pts.len(), "simplex dimension too large");
    let mut vals = [0.0; 8];
    pts[0] = x0;
    vals[0] = eval(&x0);
    for j in 0..D {
        let mut x = x0;
        let (lo, hi) = bounds[j];
        x[j] = if x0[j] + opts.initial_step <= hi { x0[j] + opts.initial_step } else { x0[j] - opts.initial_step };
        x[j] = x[j].clamp(lo, hi);
        pts[j + 1] = x;
        vals[j + 1] = eval(&x);
    }

    let n = D + 1;
    let mut iterations = 0;
    let mut converged = false;
    loop {
        // Insertion sort by objective value; stable so ties keep their order.
        for i in 1..n {
            let mut k = i;
            while k > 0 && vals[k] < vals[k - 1] {
                vals.swap(k, k - 1);
                pts.swap(k, k - 1);
                k -= 1;
            }
        }

        let spread = vals[n - 1] - vals[0];
        let mut diameter: f64 = 0.0;
        for p in &pts[1..n] {
            for i in 0..D {
                diameter = diameter.max(fabs(p[i] - pts[0][i]));
            }
        }
        if spread.is_finite() && spread < opts.f_tol && diameter < opts.x_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; D];
        for p in &pts[..D] {
            for i in 0..D {
                centroid[i] += p[i] / D as f64;
            }
        }
        let worst = pts[D];
        let f_worst = vals[D];
        let f_second = vals[D - 1];
        let f_best = vals[0];

        let xr = project(toward(&centroid, &worst, -1.0), bounds);
        let fr = eval(&xr);
        if fr < f_best {
            let xe = project(toward(&centroid, &worst, -2.0), bounds);
            let fe = eval(&xe);
            if fe < fr {
                pts[D] = xe;
                vals[D] = fe;
            } else {
                pts[D] = xr;
                vals[D] = fr;
            }
            continue;
        }
        if fr < f_second {
            pts[D] = xr;
            vals[D] = fr;
            continue;
        }
        if fr < f_worst {
            let xc = project(toward(&centroid, &xr, 0.5), bounds);
            let fc = eval(&xc);
            if fc <= fr {
                pts[D] = xc;
                vals[D] = fc;
                continue;
            }
        } else {
            let xc = project(toward(&centroid, &worst, 0.5), bounds);
            let fc = eval(&xc);
            if fc < f_worst {
                pts[D] = xc;
                vals[D] = fc;
                continue;
            }
        }
        let best = pts[0];
        for k in 1..n {
            pts[k] = toward(&best, &pts[k], 0.5);
            vals[k] = eval(&pts[k]);
        }
    }

    SimplexOutcome { x: pts[0], f: vals[0], iterations, evaluations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let rosen = |x: &[f64; 2]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions { max_iter: 10_000, ..Default::default() };
        let out = minimize(rosen, [-1.2, 1.0], &[(-10.0, 10.0); 2], &opts);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn minimum_on_the_boundary() {
        let f = |x: &[f64; 3]| (x[0] + 20.0).powi(2) + (x[1] - 0.3).powi(2) + (x[2] - 2.0).powi(2);
        let out = minimize(f, [0.0, 0.0, 0.0], &[(-12.0, 5.0), (-12.0, 5.0), (-12.0, 12.0)], &SimplexOptions::default());
        assert!(out.converged);
        assert_eq!(out.x[0], -12.0);
        assert!((out.x[1] - 0.3).abs() < 1e-7 && (out.x[2] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn non_finite_values_are_avoided() {
        let f = |x: &[f64; 2]| if x[0] > 1.0 { f64::NAN } else { (x[0] - 0.5).powi(2) + x[1] * x[1] };
        let out = minimize(f, [0.9, 0.9], &[(-5.0, 5.0); 2], &SimplexOptions::default());
        assert!(out.converged && (out.x[0] - 0.5).abs() < 1e-7);
    }
}
