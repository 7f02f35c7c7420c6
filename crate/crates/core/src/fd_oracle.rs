//! Finite-volume ground truth for the cell problem.
//!
//! Unknowns live at cell centres of an `n × n` periodic grid. The face
//! coefficient between two centres is the exact mixed average of `μ` over
//! the dual cell: harmonic along the flux, arithmetic across it, which makes
//! laminates exact in either orientation. The zero-mean system is solved by
//! plain conjugate gradients and `μ_eff·e` is the mean face flux.

use serde::{Deserialize, Serialize};

use crate::cell::{mixed_average, UnitCell};
use crate::error::{Error, Result};
use crate::tensor::{EffectiveTensor, Method, Truncation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Relative residual target.
    pub tol: f64,
    /// Iteration cap; `None` means `50·n`.
    pub max_iter: Option<usize>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

/// Face coefficients of a periodic grid: `kx[j*n + i]` sits between cells
/// `(i, j)` and `(i+1, j)`, `ky[j*n + i]` between `(i, j)` and `(i, j+1)`.
#[derive(Debug, Clone)]
pub struct GridField {
    pub n: usize,
    pub h: [f64; 2],
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    pub mu_ref: f64,
}

impl GridField {
    pub fn new(cell: &UnitCell, n: usize) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("oracle grid must be a power of two >= 64, got {n}")));
        }
        let [t1, t2] = cell.periods();
        let h = [t1 / n as f64, t2 / n as f64];
        let (_, mu_ref) = cell.averages();
        let mut kx = vec![0.0; n * n];
        let mut ky = vec![0.0; n * n];
        // Faces away from any breakpoint see one phase; only test the rest.
        let near = |axis: usize, lo: f64, hi: f64| {
            let t = cell.periods()[axis];
            cell.breakpoints(axis).iter().any(|&b| {
                let r = (b - lo).rem_euclid(t);
                r > 0.0 && r < hi - lo
            })
        };
        for j in 0..n {
            for i in 0..n {
                let cx = (i as f64 + 0.5) * h[0];
                let cy = (j as f64 + 0.5) * h[1];
                // x-face: dual cell [cx, cx + hx] × [cy − hy/2, cy + hy/2].
                let lo = [cx, cy - 0.5 * h[1]];
                let hi = [cx + h[0], cy + 0.5 * h[1]];
                kx[j * n + i] = if near(0, lo[0], hi[0]) || near(1, lo[1], hi[1]) {
                    mixed_average(cell, lo, hi, 0)
                } else {
                    cell.phase_at([cx + 0.5 * h[0], cy]).mu
                } / mu_ref;
                let lo = [cx - 0.5 * h[0], cy];
                let hi = [cx + 0.5 * h[0], cy + h[1]];
                ky[j * n + i] = if near(0, lo[0], hi[0]) || near(1, lo[1], hi[1]) {
                    mixed_average(cell, lo, hi, 1)
                } else {
                    cell.phase_at([cx, cy + 0.5 * h[1]]).mu
                } / mu_ref;
            }
        }
        Ok(Self { n, h, kx, ky, mu_ref })
    }

    /// `y = −∇·k∇x` with periodic wrap.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        let (ax, ay) = (1.0 / (self.h[0] * self.h[0]), 1.0 / (self.h[1] * self.h[1]));
        for j in 0..n {
            let jm = if j == 0 { n - 1 } else { j - 1 };
            let jp = if j + 1 == n { 0 } else { j + 1 };
            for i in 0..n {
                let im = if i == 0 { n - 1 } else { i - 1 };
                let ip = if i + 1 == n { 0 } else { i + 1 };
                let c = x[j * n + i];
                let e = self.kx[j * n + i] * (x[j * n + ip] - c);
                let w = self.kx[j * n + im] * (c - x[j * n + im]);
                let s = self.ky[j * n + i] * (x[jp * n + i] - c);
                let no = self.ky[jm * n + i] * (c - x[jm * n + i]);
                y[j * n + i] = -(ax * (e - w) + ay * (s - no));
            }
        }
    }

    /// Right side `∇·(k e)` for a unit macroscopic gradient along `axis`.
    fn rhs(&self, axis: usize) -> Vec<f64> {
        let n = self.n;
        let mut b = vec![0.0; n * n];
        for j in 0..n {
            let jm = if j == 0 { n - 1 } else { j - 1 };
            for i in 0..n {
                let im = if i == 0 { n - 1 } else { i - 1 };
                b[j * n + i] = if axis == 0 {
                    (self.kx[j * n + i] - self.kx[j * n + im]) / self.h[0]
                } else {
                    (self.ky[j * n + i] - self.ky[jm * n + i]) / self.h[1]
                };
            }
        }
        b
    }

    /// Mean face fluxes `(⟨k(e + ∇h)⟩₁, ⟨k(e + ∇h)⟩₂)` in physical units.
    fn mean_flux(&self, h: &[f64], axis: usize) -> [f64; 2] {
        let n = self.n;
        let (mut fx, mut fy) = (0.0, 0.0);
        for j in 0..n {
            let jp = if j + 1 == n { 0 } else { j + 1 };
            for i in 0..n {
                let ip = if i + 1 == n { 0 } else { i + 1 };
                let c = h[j * n + i];
                let gx = (h[j * n + ip] - c) / self.h[0] + if axis == 0 { 1.0 } else { 0.0 };
                let gy = (h[jp * n + i] - c) / self.h[1] + if axis == 1 { 1.0 } else { 0.0 };
                fx += self.kx[j * n + i] * gx;
                fy += self.ky[j * n + i] * gy;
            }
        }
        let m = (n * n) as f64;
        [fx / m * self.mu_ref, fy / m * self.mu_ref]
    }

    /// Zero-mean CG solve of `−∇·k∇h = b`.
    pub fn solve(&self, b: &[f64], opts: &OracleOptions) -> Result<Vec<f64>> {
        let len = b.len();
        let cap = opts.max_iter.unwrap_or(50 * self.n);
        let project = |v: &mut [f64]| {
            let mean = v.iter().sum::<f64>() / len as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        };
        let mut r = b.to_vec();
        project(&mut r);
        let bnorm = dot(&r, &r).sqrt();
        let mut x = vec![0.0; len];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut p = r.clone();
        let mut ap = vec![0.0; len];
        let mut rr = dot(&r, &r);
        for _ in 0..cap {
            self.apply(&p, &mut ap);
            project(&mut ap);
            let alpha = rr / dot(&p, &ap);
            for k in 0..len {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= opts.tol * bnorm {
                project(&mut x);
                return Ok(x);
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..len {
                p[k] = r[k] + beta * p[k];
            }
        }
        Err(Error::NoConvergence {
            iterations: cap,
            residual: rr.sqrt() / bnorm,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `M_ij` on a single grid.
pub fn oracle_effective_tensor(cell: &UnitCell, n: usize, opts: &OracleOptions) -> Result<EffectiveTensor> {
    let field = GridField::new(cell, n)?;
    let (rho, mu) = cell.averages();
    let mut flux = [[0.0; 2]; 2];
    for (axis, row) in flux.iter_mut().enumerate() {
        let h = field.solve(&field.rhs(axis), opts)?;
        *row = field.mean_flux(&h, axis);
    }
    Ok(EffectiveTensor {
        m11: mu - flux[0][0],
        m22: mu - flux[1][1],
        m12: Some(-0.5 * (flux[0][1] + flux[1][0])),
        mean_mu: mu,
        mean_rho: rho,
        method: Method::Oracle,
        truncation: Truncation::Oracle { grid: n },
    })
}

/// Richardson extrapolation over grids `n, 2n, 4n, …` (at least two). With
/// three or more levels the order is estimated from the last three. When the
/// last two differences change sign the sequence is oscillating (interfaces
/// moving relative to the grid) and the finest value is returned unchanged.
pub fn richardson(values: &[f64]) -> Result<f64> {
    match values {
        [] | [_] => Err(Error::InvalidParameter("Richardson extrapolation needs two levels".into())),
        [a, b] => Ok(2.0 * b - a),
        [.., a, b, c] => {
            let (d1, d2) = (b - a, c - b);
            if d2 == 0.0 || d1 == 0.0 {
                return Ok(*c);
            }
            let ratio = d2 / d1;
            if ratio < 0.0 {
                return Ok(*c);
            }
            let p = if ratio < 1.0 { (1.0 / ratio).log2() } else { 1.0 };
            Ok(c + d2 / (2f64.powf(p) - 1.0))
        }
    }
}

/// Tensor extrapolated componentwise from the given grid levels.
pub fn oracle_richardson(cell: &UnitCell, grids: &[usize], opts: &OracleOptions) -> Result<EffectiveTensor> {
    if grids.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::InvalidParameter("grid levels must double".into()));
    }
    let ts = grids
        .iter()
        .map(|&n| oracle_effective_tensor(cell, n, opts))
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: &dyn Fn(&EffectiveTensor) -> f64| richardson(&ts.iter().map(f).collect::<Vec<_>>());
    let last = ts.last().expect("at least one level");
    Ok(EffectiveTensor {
        m11: pick(&|t| t.m11)?,
        m22: pick(&|t| t.m22)?,
        m12: Some(pick(&|t| t.m12_or_zero())?),
        truncation: Truncation::Oracle {
            grid: *grids.last().expect("at least one level"),
        },
        ..last.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{Inclusion, MaterialPhase};

    #[test]
    fn homogeneous_is_exact() {
        let cell = UnitCell::homogeneous(MaterialPhase::epoxy()).unwrap();
        let t = oracle_effective_tensor(&cell, 64, &OracleOptions::default()).unwrap();
        assert!(t.m11.abs() < 1e-6 && t.m22.abs() < 1e-6);
    }

    #[test]
    fn laminate_is_exact_off_grid() {
        let a = MaterialPhase::new(1.0, 1.0).unwrap();
        let b = MaterialPhase::new(1.0, 4.0).unwrap();
        let cell = UnitCell::new([1.0, 1.0], a, vec![Inclusion::new([0.3, 0.0], [0.4137, 1.0], b)]).unwrap();
        let t = oracle_effective_tensor(&cell, 64, &OracleOptions::default()).unwrap();
        let h = 1.0 / (0.5863 / 1.0 + 0.4137 / 4.0);
        let mean = 0.5863 + 0.4137 * 4.0;
        assert!((t.mean_mu - t.m11 - h).abs() < 1e-8 * h, "{}", t.mean_mu - t.m11);
        assert!((t.mean_mu - t.m22 - mean).abs() < 1e-8 * mean);
        assert!(t.m12.unwrap().abs() < 1e-9);
    }

    #[test]
    fn grid_must_be_power_of_two() {
        let cell = UnitCell::homogeneous(MaterialPhase::epoxy()).unwrap();
        assert!(GridField::new(&cell, 100).is_err());
        assert!(GridField::new(&cell, 32).is_err());
    }

    #[test]
    fn operator_is_symmetric() {
        let cell = UnitCell::square_rod(MaterialPhase::epoxy(), MaterialPhase::steel(), 0.37).unwrap();
        let f = GridField::new(&cell, 64).unwrap();
        let len = 64 * 64;
        let u: Vec<f64> = (0..len).map(|k| ((k * 37 % 101) as f64).sin()).collect();
        let v: Vec<f64> = (0..len).map(|k| ((k * 13 % 97) as f64).cos()).collect();
        let (mut au, mut av) = (vec![0.0; len], vec![0.0; len]);
        f.apply(&u, &mut au);
        f.apply(&v, &mut av);
        let (a, b) = (dot(&au, &v), dot(&u, &av));
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        let mut one = vec![0.0; len];
        f.apply(&vec![1.0; len], &mut one);
        assert!(one.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn grid_aligned_refinement_is_monotone() {
        let cell = UnitCell::square_rod(MaterialPhase::epoxy(), MaterialPhase::steel(), 0.25).unwrap();
        let c: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&n| oracle_effective_tensor(&cell, n, &OracleOptions::default()).unwrap().speed_axis(1).unwrap())
            .collect();
        let gaps: Vec<f64> = c.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
    }

    #[test]
    fn richardson_recovers_first_order_limit() {
        let v: Vec<f64> = [64.0, 128.0, 256.0].iter().map(|n| 3.0 + 2.0 / n + 0.0 / (n * n)).collect();
        assert!((richardson(&v).unwrap() - 3.0).abs() < 1e-12);
        let v: Vec<f64> = [64.0, 128.0, 256.0].iter().map(|n| 3.0 + 5.0 / (n * n)).collect();
        assert!((richardson(&v).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(richardson(&[1.0, 2.0, 1.5]).unwrap(), 1.5);
    }
}
