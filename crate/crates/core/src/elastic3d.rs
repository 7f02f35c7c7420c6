//! Quasistatic speeds of 3D elastic waves along a lattice axis.
//!
//! Propagating along x₁, the state `η = (u, t)` with traction
//! `tᵢ = c_i1kl ∂_l u_k` obeys `η' = Qη`,
//!
//! ```text
//!   Q = [[−C⁻¹A₁,            C⁻¹    ],
//!        [A₂ − A₁ᴴC⁻¹A₁,     A₁ᴴC⁻¹ ]]
//! ```
//!
//! with `C = (c_i1k1)`, `A₁ = (c_i1ka ∂_a)` and `A₂ = −(∂_a c_iakb ∂_b)`,
//! `a, b ∈ {2, 3}`, all double-Fourier truncated over (x₂, x₃). The mean
//! tractions of the periodic corrector under unit mean gradients `∂₁u = e_k`
//! form the 3×3 matrix whose eigenvalues are `⟨ρ⟩c²`.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::cell::{piece_coefficient, Cell, Inclusion, Phase};
use crate::dense::{self, Cholesky};
use crate::error::{Error, Result};
use crate::mm::FactorizationRule;
use crate::shooting::{self, FixedModes, PropagatedSlab};
use crate::spectral;

/// Elastic phase with stiffness in two-index (Voigt) notation, order
/// 11, 22, 33, 23, 13, 12.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticPhase {
    pub rho: f64,
    pub c: [[f64; 6]; 6],
}

/// Voigt index of the symmetric pair `(i, j)`, zero-based.
pub fn voigt(i: usize, j: usize) -> usize {
    if i == j {
        i
    } else {
        6 - i - j
    }
}

impl ElasticPhase {
    pub fn new(rho: f64, c: [[f64; 6]; 6]) -> Result<Self> {
        let p = Self { rho, c };
        p.validate()?;
        Ok(p)
    }

    /// Isotropic phase from Lamé constants.
    pub fn isotropic(rho: f64, lambda: f64, mu: f64) -> Result<Self> {
        let mut c = [[0.0; 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = lambda;
            }
            c[i][i] = lambda + 2.0 * mu;
            c[i + 3][i + 3] = mu;
        }
        Self::new(rho, c)
    }

    /// `c_ijkl`, zero-based indices.
    pub fn stiffness(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.c[voigt(i, j)][voigt(k, l)]
    }

    /// Extreme eigenvalues of the 6×6 stiffness matrix.
    pub fn stiffness_range(&self) -> (f64, f64) {
        let m = Array2::from_shape_fn((6, 6), |(i, j)| self.c[i][j]);
        let e = dense::sym_eigen_small(&m).expect("validated symmetric");
        (e.values[5], e.values[0])
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidMaterial(format!("density must be positive, got {}", self.rho)));
        }
        let m = Array2::from_shape_fn((6, 6), |(i, j)| self.c[i][j]);
        let scale = m.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if !m.iter().all(|x| x.is_finite()) || scale == 0.0 {
            return Err(Error::InvalidMaterial("stiffness must be finite and nonzero".into()));
        }
        for i in 0..6 {
            for j in 0..i {
                if (m[[i, j]] - m[[j, i]]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidMaterial("stiffness matrix is not symmetric".into()));
                }
            }
        }
        Cholesky::factor(&m)
            .map(|_| ())
            .map_err(|_| Error::InvalidMaterial("stiffness matrix is not positive definite".into()))
    }
}

impl Phase for ElasticPhase {
    fn density(&self) -> f64 {
        self.rho
    }

    fn permute_axes(&self, perm: &[usize]) -> Self {
        let pairs = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
        let mut c = [[0.0; 6]; 6];
        for (a, &(i, j)) in pairs.iter().enumerate() {
            for (b, &(k, l)) in pairs.iter().enumerate() {
                c[a][b] = self.stiffness(perm[i], perm[j], perm[k], perm[l]);
            }
        }
        Self { rho: self.rho, c }
    }
}

pub type ElasticCell = Cell<ElasticPhase, 3>;

impl Cell<ElasticPhase, 3> {
    pub fn new(periods: [f64; 3], background: ElasticPhase, inclusions: Vec<Inclusion<ElasticPhase, 3>>) -> Result<Self> {
        Self::with_validation(periods, background, inclusions, ElasticPhase::validate)
    }

    /// Scalar bounds on every `⟨ρ⟩c²` from the extreme phase stiffness
    /// eigenvalues: `(min λ_min, max λ_max)/⟨ρ⟩`.
    pub fn speed_squared_bounds(&self) -> (f64, f64) {
        let g = self.grid();
        let rho = self.mean_density();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (_, _, p) in g.boxes() {
            let (a, b) = p.stiffness_range();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo / rho, hi / rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elastic3dOptions {
    pub n2: usize,
    pub n3: usize,
    /// `Direct` uses the Toeplitz matrix of the pointwise inverse of `C`;
    /// both inverse rules invert the Toeplitz matrix of `C`. The `A` blocks
    /// always use direct products.
    pub rule: FactorizationRule,
    pub max_growth: f64,
}

impl Elastic3dOptions {
    pub fn new(n2: usize, n3: usize) -> Self {
        Self {
            n2,
            n3,
            rule: FactorizationRule::Laurent,
            max_growth: 8f64.exp(),
        }
    }

    pub fn modes(&self) -> usize {
        (2 * self.n2 + 1) * (2 * self.n3 + 1)
    }

    pub fn state_dim(&self) -> usize {
        6 * self.modes()
    }
}

/// Double Fourier coefficients over (x₂, x₃) for `|n₂| ≤ k2`, `|n₃| ≤ k3`.
#[derive(Debug, Clone)]
struct Fourier2 {
    k2: usize,
    k3: usize,
    data: Vec<Complex64>,
}

impl Fourier2 {
    fn at(&self, n2: i64, n3: i64) -> Complex64 {
        let w = 2 * self.k3 + 1;
        self.data[(n2 + self.k2 as i64) as usize * w + (n3 + self.k3 as i64) as usize]
    }
}

/// One x₁-slab of a 3D cell: the (x₂, x₃) boxes of its cross-section.
struct Section<'a> {
    width: f64,
    period: [f64; 2],
    boxes: Vec<([f64; 2], [f64; 2], &'a ElasticPhase)>,
}

impl Section<'_> {
    fn fourier(&self, k2: usize, k3: usize, f: impl Fn(&ElasticPhase) -> f64) -> Fourier2 {
        let w3 = 2 * k3 + 1;
        let mut data = vec![Complex64::new(0.0, 0.0); (2 * k2 + 1) * w3];
        for (lo, hi, p) in &self.boxes {
            let v = f(p);
            if v == 0.0 {
                continue;
            }
            let c2: Vec<Complex64> = (-(k2 as i64)..=k2 as i64)
                .map(|n| piece_coefficient(lo[0], hi[0], self.period[0], n))
                .collect();
            let c3: Vec<Complex64> = (-(k3 as i64)..=k3 as i64)
                .map(|n| piece_coefficient(lo[1], hi[1], self.period[1], n))
                .collect();
            for (i, a) in c2.iter().enumerate() {
                for (j, b) in c3.iter().enumerate() {
                    data[i * w3 + j] += a * b * v;
                }
            }
        }
        Fourier2 { k2, k3, data }
    }
}

fn sections(cell: &ElasticCell) -> Vec<Section<'_>> {
    let g = cell.grid();
    let [xe, ye, ze] = g.edges.clone();
    let [_, t2, t3] = cell.periods();
    (0..xe.len() - 1)
        .map(|i| Section {
            width: xe[i + 1] - xe[i],
            period: [t2, t3],
            boxes: (0..ye.len() - 1)
                .flat_map(|j| (0..ze.len() - 1).map(move |k| (j, k)))
                .map(|(j, k)| {
                    let mid = [
                        0.5 * (xe[i] + xe[i + 1]),
                        0.5 * (ye[j] + ye[j + 1]),
                        0.5 * (ze[k] + ze[k + 1]),
                    ];
                    ([ye[j], ze[k]], [ye[j + 1], ze[k + 1]], cell.phase_at(mid))
                })
                .collect(),
        })
        .collect()
}

/// Mode `(n₂, n₃)` sits at `(n₂ + N₂)(2N₃ + 1) + n₃ + N₃`.
fn toeplitz2(f: &Fourier2, n2: usize, n3: usize) -> Array2<Complex64> {
    let d3 = 2 * n3 + 1;
    let dim = (2 * n2 + 1) * d3;
    Array2::from_shape_fn((dim, dim), |(p, q)| {
        let (p2, p3) = ((p / d3) as i64, (p % d3) as i64);
        let (q2, q3) = ((q / d3) as i64, (q % d3) as i64);
        f.at(p2 - q2, p3 - q3)
    })
}

fn derivative2(n2: usize, n3: usize, axis: usize, period: f64) -> Array1<Complex64> {
    let d3 = 2 * n3 + 1;
    Array1::from_shape_fn((2 * n2 + 1) * d3, |p| {
        let n = if axis == 0 {
            (p / d3) as f64 - n2 as f64
        } else {
            (p % d3) as f64 - n3 as f64
        };
        Complex64::new(0.0, 2.0 * PI * n / period)
    })
}

/// Complex blocks of one slab generator in the exponential basis, stiffness
/// divided by `c_ref`: `(C⁻¹, A₁, A₂)`.
pub struct ElasticBlocks {
    pub c_inv: Array2<Complex64>,
    pub a1: Array2<Complex64>,
    pub a2: Array2<Complex64>,
}

fn assemble_blocks(sec: &Section<'_>, opts: &Elastic3dOptions, c_ref: f64) -> Result<ElasticBlocks> {
    let (n2, n3) = (opts.n2, opts.n3);
    let (k2, k3) = (2 * n2, 2 * n3);
    let m = opts.modes();
    let dim = 3 * m;
    let t = |f: Fourier2| toeplitz2(&f, n2, n3);
    let dd = [
        derivative2(n2, n3, 0, sec.period[0]),
        derivative2(n2, n3, 1, sec.period[1]),
    ];

    let mut c_big = Array2::<Complex64>::zeros((dim, dim));
    let mut a1 = Array2::<Complex64>::zeros((dim, dim));
    let mut a2 = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..3 {
        for k in 0..3 {
            let blk = t(sec.fourier(k2, k3, |p| p.stiffness(i, 0, k, 0) / c_ref));
            c_big.slice_mut(s![i * m..(i + 1) * m, k * m..(k + 1) * m]).assign(&blk);
            for a in 0..2 {
                // Column scaling by the derivative along a (acting first).
                let blk = t(sec.fourier(k2, k3, |p| p.stiffness(i, 0, k, a + 1) / c_ref));
                let prod = &blk * &dd[a].view().insert_axis(ndarray::Axis(0));
                let mut dst = a1.slice_mut(s![i * m..(i + 1) * m, k * m..(k + 1) * m]);
                dst += &prod;
                for b in 0..2 {
                    let blk = t(sec.fourier(k2, k3, |p| p.stiffness(i, a + 1, k, b + 1) / c_ref));
                    let prod = &(&blk * &dd[b].view().insert_axis(ndarray::Axis(0)))
                        * &dd[a].view().insert_axis(ndarray::Axis(1));
                    let mut dst = a2.slice_mut(s![i * m..(i + 1) * m, k * m..(k + 1) * m]);
                    dst -= &prod;
                }
            }
        }
    }
    let c_inv = match opts.rule {
        FactorizationRule::Direct => {
            let mut out = Array2::<Complex64>::zeros((dim, dim));
            let inv_at = |p: &ElasticPhase| -> [[f64; 3]; 3] {
                let c = Array2::from_shape_fn((3, 3), |(i, k)| p.stiffness(i, 0, k, 0) / c_ref);
                let inv = dense::inverse(&c).expect("positive definite stiffness");
                std::array::from_fn(|i| std::array::from_fn(|k| inv[[i, k]]))
            };
            for i in 0..3 {
                for k in 0..3 {
                    let blk = t(sec.fourier(k2, k3, |p| inv_at(p)[i][k]));
                    out.slice_mut(s![i * m..(i + 1) * m, k * m..(k + 1) * m]).assign(&blk);
                }
            }
            out
        }
        FactorizationRule::Laurent | FactorizationRule::FullInverse => dense::inverse(&c_big)?,
    };
    Ok(ElasticBlocks { c_inv, a1, a2 })
}

fn hermitian_part(m: &Array2<Complex64>) -> Array2<Complex64> {
    (m + &m.t().mapv(|z| z.conj())) * Complex64::new(0.5, 0.0)
}

/// Real slab generator in the balanced state `(u, S⁻¹t)`.
fn slab_generator(sec: &Section<'_>, opts: &Elastic3dOptions, c_ref: f64) -> Result<Array2<f64>> {
    let b = assemble_blocks(sec, opts, c_ref)?;
    let c_inv = hermitian_part(&b.c_inv);
    let a2 = hermitian_part(&b.a2);
    let a1h = b.a1.t().mapv(|z| z.conj());
    let ci_a1 = c_inv.dot(&b.a1);
    let q11 = -&ci_a1;
    let q21 = hermitian_part(&(&a2 - &a1h.dot(&ci_a1)));
    let q22 = a1h.dot(&c_inv);

    let m = opts.modes();
    let u1 = spectral::kron(&spectral::real_basis(opts.n2), &spectral::real_basis(opts.n3));
    let mut w = Array2::<Complex64>::zeros((3 * m, 3 * m));
    for i in 0..3 {
        w.slice_mut(s![i * m..(i + 1) * m, i * m..(i + 1) * m]).assign(&u1);
    }
    let scale = traction_scale(opts, sec.period);
    let s_row = scale.view().insert_axis(ndarray::Axis(0));
    let s_col = scale.view().insert_axis(ndarray::Axis(1));
    let dim = 3 * m;
    let mut q = Array2::<f64>::zeros((2 * dim, 2 * dim));
    q.slice_mut(s![..dim, ..dim]).assign(&spectral::to_real(&q11, &w));
    q.slice_mut(s![..dim, dim..]).assign(&(&spectral::to_real(&c_inv, &w) * &s_row));
    q.slice_mut(s![dim.., ..dim]).assign(&(&spectral::to_real(&q21, &w) / &s_col));
    q.slice_mut(s![dim.., dim..]).assign(&(&(&spectral::to_real(&q22, &w) / &s_col) * &s_row));
    Ok(q)
}

fn traction_scale(opts: &Elastic3dOptions, period: [f64; 2]) -> Array1<f64> {
    let d3 = 2 * opts.n3 + 1;
    let m = opts.modes();
    Array1::from_shape_fn(3 * m, |p| {
        let j = p % m;
        let a = (j / d3) as f64 - opts.n2 as f64;
        let b = (j % d3) as f64 - opts.n3 as f64;
        let k = 2.0 * PI * ((a / period[0]).powi(2) + (b / period[1]).powi(2)).sqrt();
        if k == 0.0 {
            1.0
        } else {
            k
        }
    })
}

/// Cell average of `tr C / 3`, the modulus unit used internally.
fn reference_stiffness(cell: &ElasticCell) -> f64 {
    cell.grid()
        .average(|p| (p.stiffness(0, 0, 0, 0) + p.stiffness(1, 0, 1, 0) + p.stiffness(2, 0, 2, 0)) / 3.0)
}

/// Principal speeds along one lattice axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticSpeeds {
    /// Descending.
    pub speeds: [f64; 3],
    /// Symmetrized `⟨ρ⟩c²` matrix in the frame whose first axis is the
    /// propagation axis.
    pub matrix: [[f64; 3]; 3],
    pub mean_rho: f64,
    pub state_dim: usize,
}

/// The cell relabelled so that `axis` (1, 2 or 3) comes first, cyclically.
pub fn oriented(cell: &ElasticCell, axis: usize) -> Result<ElasticCell> {
    match axis {
        1 => Ok(cell.clone()),
        2 => Ok(cell.permute_axes([1, 2, 0])),
        3 => Ok(cell.permute_axes([2, 0, 1])),
        _ => Err(Error::InvalidParameter(format!("axis must be 1, 2 or 3, got {axis}"))),
    }
}

pub fn principal_speeds_3d(cell: &ElasticCell, opts: &Elastic3dOptions, axis: usize) -> Result<ElasticSpeeds> {
    let cell = oriented(cell, axis)?;
    let rho = cell.mean_density();
    let c_ref = reference_stiffness(&cell);
    let m = opts.modes();
    let dim = 3 * m;
    let zero = opts.n2 * (2 * opts.n3 + 1) + opts.n3;

    let secs = sections(&cell);
    let slabs = secs
        .iter()
        .map(|sec| {
            let q = slab_generator(sec, opts, c_ref)?;
            PropagatedSlab::new(std::sync::Arc::new(q), sec.width, opts.max_growth)
        })
        .collect::<Result<Vec<_>>>()?;
    let modes = FixedModes {
        displacement: (0..3).map(|i| i * m + zero).collect(),
        traction: (0..3).map(|i| dim + i * m + zero).collect(),
    };
    let sol = shooting::solve_periodic(&shooting::steps(&slabs), &modes, cell.periods()[0], opts.max_growth)?;
    let k = sol.traction_block(&modes) * c_ref;

    let scale = k.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let asym = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| (k[[i, j]] - k[[j, i]]).abs())
        .fold(0.0, f64::max);
    if asym > 1e-8 * scale {
        return Err(Error::Asymmetric { relative: asym / scale });
    }
    let eig = dense::sym_eigen_small(&(&k / rho))?;
    if eig.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Truncation(format!(
            "non-positive effective stiffness eigenvalue {:e}",
            eig.values[2] * rho
        )));
    }
    let sym = |i: usize, j: usize| 0.5 * (k[[i, j]] + k[[j, i]]);
    Ok(ElasticSpeeds {
        speeds: [eig.values[0].sqrt(), eig.values[1].sqrt(), eig.values[2].sqrt()],
        matrix: std::array::from_fn(|i| std::array::from_fn(|j| sym(i, j))),
        mean_rho: rho,
        state_dim: opts.state_dim(),
    })
}

/// Exponential-basis blocks of the first slab, for structural checks.
pub fn first_slab_blocks(cell: &ElasticCell, opts: &Elastic3dOptions) -> Result<ElasticBlocks> {
    let c_ref = reference_stiffness(cell);
    let secs = sections(cell);
    assemble_blocks(&secs[0], opts, c_ref)
}

/// Real generator of the first slab in the plain state `(u, t)` scaling.
pub fn first_slab_generator(cell: &ElasticCell, opts: &Elastic3dOptions) -> Result<Array2<f64>> {
    let c_ref = reference_stiffness(cell);
    slab_generator(&sections(cell)[0], opts, c_ref)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(rho: f64, l: f64, m: f64) -> ElasticPhase {
        ElasticPhase::isotropic(rho, l, m).unwrap()
    }

    #[test]
    fn voigt_map() {
        assert_eq!(voigt(0, 0), 0);
        assert_eq!(voigt(1, 2), 3);
        assert_eq!(voigt(2, 0), 4);
        assert_eq!(voigt(0, 1), 5);
    }

    #[test]
    fn rejects_indefinite_stiffness() {
        let mut c = iso(1.0, 1.0, 1.0).c;
        c[3][3] = -1.0;
        assert!(ElasticPhase::new(1.0, c).is_err());
        assert!(ElasticPhase::isotropic(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn homogeneous_speeds() {
        let p = iso(2.0, 3.0, 1.5);
        let cell = ElasticCell::new([1.0, 1.0, 1.0], p, vec![]).unwrap();
        let v = principal_speeds_3d(&cell, &Elastic3dOptions::new(1, 1), 1).unwrap();
        let want = [(6.0f64 / 2.0).sqrt(), (0.75f64).sqrt(), (0.75f64).sqrt()];
        for (a, b) in v.speeds.iter().zip(want) {
            assert!((a - b).abs() < 1e-10 * b, "{:?}", v.speeds);
        }
    }

    #[test]
    fn second_stiffness_block_is_hermitian() {
        let cell = ElasticCell::new(
            [1.0, 1.0, 1.0],
            iso(1.0, 2.0, 1.0),
            vec![Inclusion::new([0.2, 0.1, 0.3], [0.5, 0.4, 0.3], iso(3.0, 5.0, 4.0))],
        )
        .unwrap();
        let opts = Elastic3dOptions::new(1, 2);
        let secs = sections(&cell);
        let b = assemble_blocks(&secs[1], &opts, 1.0).unwrap();
        let scale = b.a2.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for ((i, j), z) in b.a2.indexed_iter() {
            assert!((z - b.a2[[j, i]].conj()).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn generator_annihilates_constant_displacements() {
        let cell = ElasticCell::new(
            [1.0, 1.0, 1.0],
            iso(1.0, 2.0, 1.0),
            vec![Inclusion::new([0.0, 0.1, 0.3], [1.0, 0.4, 0.3], iso(3.0, 5.0, 4.0))],
        )
        .unwrap();
        let opts = Elastic3dOptions::new(1, 1);
        let q = first_slab_generator(&cell, &opts).unwrap();
        let m = opts.modes();
        let zero = 4;
        let scale = q.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for i in 0..3 {
            assert!(q.column(i * m + zero).iter().all(|x| x.abs() < 1e-12 * scale));
            assert!(q.row(3 * m + i * m + zero).iter().all(|x| x.abs() < 1e-12 * scale));
        }
    }

    #[test]
    fn permuted_phase_swaps_components() {
        let mut c = iso(1.0, 1.0, 1.0).c;
        c[1][1] = 7.0;
        let p = ElasticPhase::new(1.0, c).unwrap();
        let q = p.permute_axes(&[1, 2, 0]);
        assert_eq!(q.stiffness(0, 0, 0, 0), 7.0);
    }
}
