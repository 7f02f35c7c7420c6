//! Toeplitz operators of truncated Fourier series and the change to a real
//! cosine/sine basis in which every real operator has real entries.
//!
//! Basis index `j = n + N` for `n = −N..N`. In the exponential basis `j`
//! is `e^{2πinx/T}`; in the real basis `N` is the constant, `N + k` is
//! `√2·cos(2πkx/T)` and `N − k` is `√2·sin(2πkx/T)`.

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Toeplitz matrix `(c_{n−m})` from coefficients stored at `c[n + 2N]`.
pub fn toeplitz(coeffs: &[Complex64], half_width: usize) -> Array2<Complex64> {
    let d = 2 * half_width + 1;
    assert!(coeffs.len() >= 4 * half_width + 1, "need coefficients up to |n| = 2N");
    let off = (coeffs.len() - 1) / 2;
    Array2::from_shape_fn((d, d), |(i, j)| coeffs[off + i - j])
}

/// Unitary map from real-basis coordinates to exponential-basis coordinates.
pub fn real_basis(half_width: usize) -> Array2<Complex64> {
    let n = half_width;
    let d = 2 * n + 1;
    let mut u = Array2::<Complex64>::zeros((d, d));
    u[[n, n]] = Complex64::new(1.0, 0.0);
    for k in 1..=n {
        let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let i = Complex64::new(0.0, FRAC_1_SQRT_2);
        u[[n + k, n + k]] = r;
        u[[n - k, n + k]] = r;
        u[[n + k, n - k]] = -i;
        u[[n - k, n - k]] = i;
    }
    u
}

/// Kronecker product of two complex matrices.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// `Uᴴ·H·U`, with the (rounding-level) imaginary part discarded.
pub fn to_real(h: &Array2<Complex64>, u: &Array2<Complex64>) -> Array2<f64> {
    let uh = u.t().mapv(|z| z.conj());
    uh.dot(h).dot(u).mapv(|z| z.re)
}

/// Largest imaginary part left by [`to_real`], relative to the largest entry.
pub fn realness_defect(h: &Array2<Complex64>, u: &Array2<Complex64>) -> f64 {
    let uh = u.t().mapv(|z| z.conj());
    let r = uh.dot(h).dot(u);
    let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    r.iter().map(|z| z.im.abs()).fold(0.0, f64::max) / scale
}

/// Derivative `d/dx` on period `T` in the exponential basis: `diag(2πin/T)`.
pub fn derivative(half_width: usize, period: f64) -> Array2<Complex64> {
    let d = 2 * half_width + 1;
    let mut m = Array2::<Complex64>::zeros((d, d));
    for j in 0..d {
        let n = j as f64 - half_width as f64;
        m[[j, j]] = Complex64::new(0.0, 2.0 * PI * n / period);
    }
    m
}

/// Real-basis derivative: maps `√2cos → −k√2sin` and `√2sin → k√2cos`,
/// scaled by `2π/T`.
pub fn real_derivative(half_width: usize, period: f64) -> Array2<f64> {
    let n = half_width;
    let d = 2 * n + 1;
    let mut m = Array2::<f64>::zeros((d, d));
    for k in 1..=n {
        let w = 2.0 * PI * k as f64 / period;
        m[[n - k, n + k]] = -w;
        m[[n + k, n - k]] = w;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_unitary() {
        let u = real_basis(4);
        let p = u.t().mapv(|z| z.conj()).dot(&u);
        for ((i, j), v) in p.indexed_iter() {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((v - Complex64::new(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn derivative_matches_transformed() {
        let u = real_basis(3);
        let d = derivative(3, 1.7);
        assert!(realness_defect(&d, &u) < 1e-15);
        let direct = real_derivative(3, 1.7);
        let via = to_real(&d, &u);
        for (a, b) in direct.iter().zip(via.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn toeplitz_layout() {
        let c: Vec<Complex64> = (-2..=2).map(|n| Complex64::new(n as f64, 0.0)).collect();
        let t = toeplitz(&c, 1);
        assert_eq!(t[[0, 0]].re, 0.0);
        assert_eq!(t[[2, 0]].re, 2.0);
        assert_eq!(t[[0, 2]].re, -2.0);
    }
}
