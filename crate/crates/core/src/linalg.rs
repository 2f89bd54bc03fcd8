//! Closed-form 2×2 linear algebra for the bivariate model.

use core::ops::{Add, AddAssign, Mul, Sub};
use libm::sqrt;
use serde::{Deserialize, Serialize};

pub type Vec2 = [f64; 2];

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
///
/// Serialized as a nested row-major array.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, xy: 0.0, yy: 0.0 };
    pub const IDENTITY: Sym2 = Sym2 { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub const fn diag(xx: f64, yy: f64) -> Self {
        Sym2 { xx, xy: 0.0, yy }
    }

    /// Covariance matrix from two standard deviations and a correlation.
    pub fn from_sd_corr(sd_x: f64, sd_y: f64, rho: f64) -> Self {
        Sym2 { xx: sd_x * sd_x, xy: rho * sd_x * sd_y, yy: sd_y * sd_y }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let d = self.det();
        if !(d.is_finite()) || d == 0.0 {
            return None;
        }
        Some(Sym2 { xx: self.yy / d, xy: -self.xy / d, yy: self.xx / d })
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    pub fn quad_form(&self, v: Vec2) -> f64 {
        v[0] * v[0] * self.xx + 2.0 * v[0] * v[1] * self.xy + v[1] * v[1] * self.yy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let half_tr = 0.5 * self.trace();
        let half_diff = 0.5 * (self.xx - self.yy);
        let r = sqrt(half_diff * half_diff + self.xy * self.xy);
        [half_tr - r, half_tr + r]
    }

    /// Lower-triangular Cholesky factor, if the matrix is positive definite.
    pub fn cholesky(&self) -> Option<Lower2> {
        if !(self.xx > 0.0) {
            return None;
        }
        let l11 = sqrt(self.xx);
        let l21 = self.xy / l11;
        let rem = self.yy - l21 * l21;
        if !(rem > 0.0) {
            return None;
        }
        Some(Lower2 { l11, l21, l22: sqrt(rem) })
    }

    /// A factor `L` with `L Lᵀ = A⁺`, where `A⁺` is this matrix with negative
    /// eigenvalues clipped to zero. Uses Cholesky when it succeeds; otherwise
    /// `L = Q diag(sqrt(λ⁺))`, which is not triangular.
    pub fn psd_factor(&self) -> Factor2 {
        if let Some(l) = self.cholesky() {
            return Factor2 { m: [[l.l11, 0.0], [l.l21, l.l22]] };
        }
        let [lo, hi] = self.eigenvalues();
        let (v_hi, v_lo) = self.eigenvectors(hi);
        let s_hi = sqrt(hi.max(0.0));
        let s_lo = sqrt(lo.max(0.0));
        Factor2 { m: [[v_hi[0] * s_hi, v_lo[0] * s_lo], [v_hi[1] * s_hi, v_lo[1] * s_lo]] }
    }

    fn eigenvectors(&self, hi: f64) -> (Vec2, Vec2) {
        // (A - λI) v = 0: pick the better-conditioned row.
        let a = [self.xy, hi - self.xx];
        let b = [hi - self.yy, self.xy];
        let v = if a[0] * a[0] + a[1] * a[1] >= b[0] * b[0] + b[1] * b[1] { a } else { b };
        let n = sqrt(v[0] * v[0] + v[1] * v[1]);
        let v_hi = if n > 0.0 { [v[0] / n, v[1] / n] } else { [1.0, 0.0] };
        (v_hi, [-v_hi[1], v_hi[0]])
    }

    pub fn frobenius(&self) -> f64 {
        sqrt(self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy)
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }
}

impl From<[[f64; 2]; 2]> for Sym2 {
    fn from(m: [[f64; 2]; 2]) -> Self {
        Sym2 { xx: m[0][0], xy: 0.5 * (m[0][1] + m[1][0]), yy: m[1][1] }
    }
}

impl From<Sym2> for [[f64; 2]; 2] {
    fn from(s: Sym2) -> Self {
        [[s.xx, s.xy], [s.xy, s.yy]]
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2 { xx: self.xx + o.xx, xy: self.xy + o.xy, yy: self.yy + o.yy }
    }
}

impl AddAssign for Sym2 {
    fn add_assign(&mut self, o: Sym2) {
        self.xx += o.xx;
        self.xy += o.xy;
        self.yy += o.yy;
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2 { xx: self.xx - o.xx, xy: self.xy - o.xy, yy: self.yy - o.yy }
    }
}

impl Mul<f64> for Sym2 {
    type Output = Sym2;
    fn mul(self, k: f64) -> Sym2 {
        Sym2 { xx: self.xx * k, xy: self.xy * k, yy: self.yy * k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lower2 {
    pub l11: f64,
    pub l21: f64,
    pub l22: f64,
}

/// General 2×2 matrix used as a square-root factor of a covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor2 {
    pub m: [[f64; 2]; 2],
}

impl Factor2 {
    pub fn apply(&self, z: Vec2) -> Vec2 {
        [
            self.m[0][0] * z[0] + self.m[0][1] * z[1],
            self.m[1][0] * z[0] + self.m[1][1] * z[1],
        ]
    }

    /// `F Fᵀ`
    pub fn outer(&self) -> Sym2 {
        let m = &self.m;
        Sym2 {
            xx: m[0][0] * m[0][0] + m[0][1] * m[0][1],
            xy: m[0][0] * m[1][0] + m[0][1] * m[1][1],
            yy: m[1][0] * m[1][0] + m[1][1] * m[1][1],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_times_self_is_identity() {
        let a = Sym2::new(2.0, 0.3, 0.7);
        let inv = a.inverse().unwrap();
        let col0 = a.mul_vec([inv.xx, inv.xy]);
        let col1 = a.mul_vec([inv.xy, inv.yy]);
        assert!((col0[0] - 1.0).abs() < 1e-15 && col0[1].abs() < 1e-15);
        assert!(col1[0].abs() < 1e-15 && (col1[1] - 1.0).abs() < 1e-15);
        assert!(Sym2::new(1.0, 1.0, 1.0).inverse().is_none());
    }

    #[test]
    fn psd_factor_reproduces_matrix() {
        let pd = Sym2::new(0.6, -0.2, 0.3);
        assert!((pd.psd_factor().outer() - pd).frobenius() < 1e-15);
        // Rank one: rho = 1.
        let r1 = Sym2::from_sd_corr(0.5, 0.8, 1.0);
        assert!((r1.psd_factor().outer() - r1).frobenius() < 1e-12);
        // Indefinite: negative eigenvalue clipped.
        let ind = Sym2::new(1.0, 2.0, 1.0);
        let clipped = ind.psd_factor().outer();
        assert!((clipped - Sym2::new(1.5, 1.5, 1.5)).frobenius() < 1e-12);
        assert_eq!(Sym2::ZERO.psd_factor().outer(), Sym2::ZERO);
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        assert_eq!(Sym2::diag(3.0, 1.0).eigenvalues(), [1.0, 3.0]);
    }
}
