//! Independent oracles shared by the integration targets.
#![allow(dead_code)]

use mmspeed_core::ElasticPhase;

pub fn inv3(a: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]
    };
    let det: f64 = (0..3).map(|j| a[0][j] * cof(0, j)).sum();
    std::array::from_fn(|i| std::array::from_fn(|j| cof(j, i) / det))
}

/// Eigenvalues of a symmetric 3×3 matrix, descending, by the trigonometric
/// solution of the characteristic cubic.
pub fn sym_eigenvalues3(a: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let p2 = (0..3).map(|i| (a[i][i] - q).powi(2)).sum::<f64>() + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| (a[i][j] - if i == j { q } else { 0.0 }) / p));
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det_b / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

/// Backus average of layers stacked along axis `normal` (0-based) with
/// thickness fractions `w`, as a full stiffness callback.
pub fn backus(layers: &[(f64, ElasticPhase)], normal: usize) -> impl Fn(usize, usize, usize, usize) -> f64 {
    let z = normal;
    let n_inv: Vec<[[f64; 3]; 3]> = layers
        .iter()
        .map(|(_, p)| inv3(std::array::from_fn(|i| std::array::from_fn(|k| p.stiffness(i, z, k, z)))))
        .collect();
    let avg = |f: &dyn Fn(usize) -> f64| layers.iter().enumerate().map(|(l, (w, _))| w * f(l)).sum::<f64>();
    let mean_n_inv: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|k| avg(&|l| n_inv[l][i][k])));
    let n_eff = inv3(mean_n_inv);
    let layers = layers.to_vec();
    move |i, j, k, l| {
        let avg = |f: &dyn Fn(usize) -> f64| layers.iter().enumerate().map(|(q, (w, _))| w * f(q)).sum::<f64>();
        let c = |q: usize, a, b, c_, d| layers[q].1.stiffness(a, b, c_, d);
        let mean = avg(&|q| c(q, i, j, k, l));
        let corr = avg(&|q| {
            let mut s = 0.0;
            for m in 0..3 {
                for n in 0..3 {
                    s += c(q, i, j, m, z) * n_inv[q][m][n] * c(q, n, z, k, l);
                }
            }
            s
        });
        let left: [f64; 3] = std::array::from_fn(|p| avg(&|q| (0..3).map(|m| c(q, i, j, m, z) * n_inv[q][m][p]).sum()));
        let right: [f64; 3] = std::array::from_fn(|p| avg(&|q| (0..3).map(|n| n_inv[q][p][n] * c(q, n, z, k, l)).sum()));
        let mut back = 0.0;
        for p in 0..3 {
            for r in 0..3 {
                back += left[p] * n_eff[p][r] * right[r];
            }
        }
        mean - corr + back
    }
}

pub fn christoffel_speeds(c: &dyn Fn(usize, usize, usize, usize) -> f64, axis: usize, rho: f64) -> [f64; 3] {
    let g: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|k| c(i, axis, k, axis) / rho));
    sym_eigenvalues3(g).map(f64::sqrt)
}

/// `(⟨μ⁻¹⟩⁻¹, ⟨μ⟩)` of layers given as `(thickness fraction, μ)`.
pub fn laminate_moduli(layers: &[(f64, f64)]) -> (f64, f64) {
    let harmonic = 1.0 / layers.iter().map(|(w, m)| w / m).sum::<f64>();
    let arithmetic = layers.iter().map(|(w, m)| w * m).sum();
    (harmonic, arithmetic)
}

