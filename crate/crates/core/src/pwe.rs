//! Plane-wave expansion of the cell problem `C₀h = ∂ᵢμ` with
//! `C₀ = −∇·μ∇`, truncated to reciprocal vectors `|gᵢ| ≤ G`, `g ≠ 0`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::cell::{cell_fourier_2d, UnitCell};
use crate::dense::Cholesky;
use crate::error::{Error, Result};
use crate::tensor::{EffectiveTensor, Method, Truncation};

/// Assembled plane-wave system.
#[derive(Debug, Clone)]
pub struct PweSystem {
    pub cutoff: usize,
    /// Retained `(g₁, g₂)`, zero excluded.
    pub indices: Vec<(i64, i64)>,
    /// `C₀(g, g′) = 4π²(g₁g₁′/T₁² + g₂g₂′/T₂²)μ̂_{g−g′}`, divided by `⟨μ⟩`.
    pub c0: Array2<Complex64>,
    /// `(∂ᵢμ)̂_g = 2πi(gᵢ/Tᵢ)μ̂_g`, divided by `⟨μ⟩`.
    pub rhs: [Array1<Complex64>; 2],
    pub mu_ref: f64,
}

impl PweSystem {
    pub fn new(cell: &UnitCell, cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidParameter("plane-wave cutoff G must be at least 1".into()));
        }
        let (_, mu_ref) = cell.averages();
        let k = 2 * cutoff;
        let span = 2 * k + 1;
        let hat = cell_fourier_2d(cell, k, |p| p.mu / mu_ref);
        let at = |g1: i64, g2: i64| hat[(g1 + k as i64) as usize * span + (g2 + k as i64) as usize];
        let g = cutoff as i64;
        let indices: Vec<(i64, i64)> = (-g..=g)
            .flat_map(|a| (-g..=g).map(move |b| (a, b)))
            .filter(|&p| p != (0, 0))
            .collect();
        let [t1, t2] = cell.periods();
        let w = 4.0 * PI * PI;
        let m = indices.len();
        let c0 = Array2::from_shape_fn((m, m), |(i, j)| {
            let (a1, a2) = indices[i];
            let (b1, b2) = indices[j];
            let dot = (a1 * b1) as f64 / (t1 * t1) + (a2 * b2) as f64 / (t2 * t2);
            at(a1 - b1, a2 - b2) * (w * dot)
        });
        let rhs = [0usize, 1].map(|axis| {
            let t = cell.periods()[axis];
            Array1::from_iter(indices.iter().map(|&(a, b)| {
                let gi = if axis == 0 { a } else { b } as f64;
                Complex64::new(0.0, 2.0 * PI * gi / t) * at(a, b)
            }))
        });
        Ok(Self {
            cutoff,
            indices,
            c0,
            rhs,
            mu_ref,
        })
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// `[[M₁₁, M₁₂], [M₂₁, M₂₂]]` in physical units, before symmetrization.
    pub fn solve(&self) -> Result<[[Complex64; 2]; 2]> {
        let chol = Cholesky::factor(&self.c0).map_err(|e| match e {
            Error::Singular { pivot, index } => Error::Truncation(format!(
                "plane-wave operator is not positive definite (pivot {pivot:e} at {index})"
            )),
            other => other,
        })?;
        let x = [chol.solve(&self.rhs[0])?, chol.solve(&self.rhs[1])?];
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let v: Complex64 = x[i].iter().zip(self.rhs[j].iter()).map(|(a, b)| a * b.conj()).sum();
                m[i][j] = v * self.mu_ref;
            }
        }
        Ok(m)
    }
}

pub fn pwe_effective_tensor(cell: &UnitCell, cutoff: usize) -> Result<EffectiveTensor> {
    let (rho, mu) = cell.averages();
    let m = PweSystem::new(cell, cutoff)?.solve()?;
    let scale = m[0][0].norm().max(m[1][1].norm()).max(mu * 1e-300);
    let imag = m.iter().flatten().map(|z| z.im.abs()).fold(0.0, f64::max);
    let asym = (m[0][1] - m[1][0].conj()).norm();
    if imag > 1e-8 * scale || asym > 1e-8 * scale {
        return Err(Error::Asymmetric {
            relative: imag.max(asym) / scale,
        });
    }
    Ok(EffectiveTensor {
        m11: m[0][0].re,
        m22: m[1][1].re,
        m12: Some(0.5 * (m[0][1].re + m[1][0].re)),
        mean_mu: mu,
        mean_rho: rho,
        method: Method::Pwe,
        truncation: Truncation::Pwe { g: cutoff },
    })
}
