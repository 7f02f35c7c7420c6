use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mm,
    Pwe,
    Estimate,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mm => "mm",
            Method::Pwe => "pwe",
            Method::Estimate => "estimate",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a tensor was discretized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    /// Fourier half-width `N` along x₂, `d = 2N + 1`.
    Mm { n: usize },
    /// Plane-wave cutoff `|gᵢ| ≤ G`, `d = 2G + 1`.
    Pwe { g: usize },
    /// Finite-difference grid `n × n` (or Richardson-extrapolated levels).
    Oracle { grid: usize },
    Estimate,
}

impl Truncation {
    /// Number of retained Fourier modes per axis, where that makes sense.
    pub fn d(&self) -> Option<usize> {
        match *self {
            Truncation::Mm { n } => Some(2 * n + 1),
            Truncation::Pwe { g } => Some(2 * g + 1),
            Truncation::Oracle { grid } => Some(grid),
            Truncation::Estimate => None,
        }
    }

    /// Size of the dense system the method solves.
    pub fn matrix_dim(&self) -> Option<usize> {
        match *self {
            Truncation::Mm { n } => Some(2 * (2 * n + 1)),
            Truncation::Pwe { g } => Some((2 * g + 1).pow(2) - 1),
            Truncation::Oracle { grid } => Some(grid * grid),
            Truncation::Estimate => None,
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Mm { n } => write!(f, "N={n}"),
            Truncation::Pwe { g } => write!(f, "G={g}"),
            Truncation::Oracle { grid } => write!(f, "n={grid}"),
            Truncation::Estimate => f.write_str("closed-form"),
        }
    }
}

/// The homogenization correction `M_ij` with the cell means it refers to:
/// `μ_eff(κ) = ⟨μ⟩ − Σ M_ij κᵢκⱼ` and `c²(κ) = μ_eff(κ)/⟨ρ⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTensor {
    pub m11: f64,
    pub m22: f64,
    /// Missing for methods that only produce principal values.
    pub m12: Option<f64>,
    pub mean_mu: f64,
    pub mean_rho: f64,
    pub method: Method,
    pub truncation: Truncation,
}

impl EffectiveTensor {
    pub fn m12_or_zero(&self) -> f64 {
        self.m12.unwrap_or(0.0)
    }

    pub fn mu_eff(&self, kappa: [f64; 2]) -> f64 {
        let [k1, k2] = normalize(kappa);
        self.mean_mu - (self.m11 * k1 * k1 + 2.0 * self.m12_or_zero() * k1 * k2 + self.m22 * k2 * k2)
    }

    /// `c(κ)` for a direction `κ` (normalized internally).
    pub fn speed(&self, kappa: [f64; 2]) -> Result<f64> {
        let c2 = self.mu_eff(kappa) / self.mean_rho;
        if !(c2.is_finite() && c2 > 0.0) {
            return Err(Error::Truncation(format!(
                "{}: non-positive effective modulus {:e} along {kappa:?}",
                self.method,
                c2 * self.mean_rho
            )));
        }
        Ok(c2.sqrt())
    }

    pub fn speed_axis(&self, axis: usize) -> Result<f64> {
        match axis {
            1 => self.speed([1.0, 0.0]),
            2 => self.speed([0.0, 1.0]),
            _ => Err(Error::InvalidParameter(format!("axis must be 1 or 2, got {axis}"))),
        }
    }

    /// `(S₁₁, S₂₂, S₁₂)` with `S₁₁p₁² + 2S₁₂p₁p₂ + S₂₂p₂² = 1` the slowness
    /// ellipse `p = κ/c(κ)`.
    pub fn slowness_ellipse(&self) -> (f64, f64, f64) {
        (
            (self.mean_mu - self.m11) / self.mean_rho,
            (self.mean_mu - self.m22) / self.mean_rho,
            -self.m12_or_zero() / self.mean_rho,
        )
    }

    /// Extreme values of `μ_eff(κ)` over unit `κ`, as `(min, max)`.
    pub fn mu_eff_range(&self) -> (f64, f64) {
        let (a, b, c) = (self.m11, self.m22, self.m12_or_zero());
        let mid = 0.5 * (a + b);
        let rad = (0.25 * (a - b).powi(2) + c * c).sqrt();
        (self.mean_mu - (mid + rad), self.mean_mu - (mid - rad))
    }

    pub fn is_elliptic(&self) -> bool {
        self.mu_eff_range().0 > 0.0
    }

    /// Exchange of the axis labels.
    pub fn swapped(&self) -> Self {
        Self {
            m11: self.m22,
            m22: self.m11,
            ..self.clone()
        }
    }
}

fn normalize(k: [f64; 2]) -> [f64; 2] {
    let n = (k[0] * k[0] + k[1] * k[1]).sqrt();
    if n == 0.0 {
        return [1.0, 0.0];
    }
    [k[0] / n, k[1] / n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EffectiveTensor {
        EffectiveTensor {
            m11: 1.0,
            m22: 0.5,
            m12: Some(0.2),
            mean_mu: 4.0,
            mean_rho: 2.0,
            method: Method::Mm,
            truncation: Truncation::Mm { n: 1 },
        }
    }

    #[test]
    fn quadratic_form() {
        let t = sample();
        assert!((t.mu_eff([1.0, 0.0]) - 3.0).abs() < 1e-15);
        assert!((t.mu_eff([0.0, 3.0]) - 3.5).abs() < 1e-15);
        assert!((t.mu_eff([1.0, 1.0]) - (4.0 - (0.5 + 0.2 + 0.25))).abs() < 1e-14);
        assert!((t.speed([1.0, 0.0]).unwrap() - 1.5f64.sqrt()).abs() < 1e-15);
        let (lo, hi) = t.mu_eff_range();
        for i in 0..64 {
            let a = i as f64 * 0.1;
            let m = t.mu_eff([a.cos(), a.sin()]);
            assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
        }
    }

    #[test]
    fn slowness_points_lie_on_ellipse() {
        let t = sample();
        let (a, b, c) = t.slowness_ellipse();
        for i in 0..16 {
            let th = i as f64 * 0.4;
            let k = [th.cos(), th.sin()];
            let v = t.speed(k).unwrap();
            let p = [k[0] / v, k[1] / v];
            let q = a * p[0] * p[0] + 2.0 * c * p[0] * p[1] + b * p[1] * p[1];
            assert!((q - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_modulus_is_an_error() {
        let mut t = sample();
        t.m11 = 5.0;
        assert!(t.speed([1.0, 0.0]).is_err());
        assert!(!t.is_elliptic());
    }

    #[test]
    fn dims() {
        assert_eq!(Truncation::Mm { n: 8 }.matrix_dim(), Some(34));
        assert_eq!(Truncation::Pwe { g: 4 }.matrix_dim(), Some(80));
    }
}
