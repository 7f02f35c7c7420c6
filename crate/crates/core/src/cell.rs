//! Periodic unit cells made of a background phase and axis-aligned
//! rectangular (2D) or box (3D) inclusions, with exact slab partitions,
//! closed-form Fourier data and cell averages.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Anything that can fill a region of a unit cell.
pub trait Phase: Clone + PartialEq + std::fmt::Debug + Send + Sync {
    fn density(&self) -> f64;
    /// The same material seen with coordinate axes relabelled so that new
    /// axis `k` is old axis `perm[k]`.
    fn permute_axes(&self, perm: &[usize]) -> Self;
}

/// Isotropic scalar-wave phase: density and shear modulus, both in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialPhase {
    pub rho: f64,
    pub mu: f64,
}

impl MaterialPhase {
    pub fn new(rho: f64, mu: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidMaterial(format!("density must be positive, got {rho}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidMaterial(format!("shear modulus must be positive, got {mu}")));
        }
        Ok(Self { rho, mu })
    }

    /// Steel: 7.8·10³ kg/m³, 80 GPa.
    pub const fn steel() -> Self {
        Self { rho: 7.8e3, mu: 80e9 }
    }

    /// Epoxy: 1.14·10³ kg/m³, 1.48 GPa.
    pub const fn epoxy() -> Self {
        Self { rho: 1.14e3, mu: 1.48e9 }
    }

    /// Shear-wave speed of the pure phase.
    pub fn speed(&self) -> f64 {
        (self.mu / self.rho).sqrt()
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.rho, self.mu).map(|_| ())
    }
}

impl Phase for MaterialPhase {
    fn density(&self) -> f64 {
        self.rho
    }
    fn permute_axes(&self, _perm: &[usize]) -> Self {
        *self
    }
}

/// Axis-aligned box `[corner, corner + size)` filled with one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Inclusion<P, const D: usize> {
    pub corner: [f64; D],
    pub size: [f64; D],
    pub phase: P,
}

impl<P, const D: usize> Inclusion<P, D> {
    pub fn new(corner: [f64; D], size: [f64; D], phase: P) -> Self {
        Self { corner, size, phase }
    }

    fn contains(&self, x: &[f64; D]) -> bool {
        (0..D).all(|k| x[k] >= self.corner[k] && x[k] < self.corner[k] + self.size[k])
    }

    fn is_empty(&self) -> bool {
        self.size.iter().any(|&s| s <= 0.0)
    }
}

/// Rectangular periodic cell `[0,T₁)×…` with painter's-rule inclusions:
/// where inclusions overlap, the later one wins.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell<P, const D: usize> {
    periods: [f64; D],
    background: P,
    inclusions: Vec<Inclusion<P, D>>,
}

/// Two-dimensional scalar cell.
pub type UnitCell = Cell<MaterialPhase, 2>;

fn edge_tol(period: f64) -> f64 {
    1e-12 * period
}

impl<P: Phase, const D: usize> Cell<P, D> {
    pub fn periods(&self) -> [f64; D] {
        self.periods
    }
    pub fn background(&self) -> &P {
        &self.background
    }
    pub fn inclusions(&self) -> &[Inclusion<P, D>] {
        &self.inclusions
    }

    pub fn area(&self) -> f64 {
        self.periods.iter().product()
    }

    /// Builds a cell. Inclusions with a zero extent are dropped; coordinates
    /// within `1e-12·T` of the cell boundary are snapped onto it.
    pub fn with_validation(
        periods: [f64; D],
        background: P,
        inclusions: Vec<Inclusion<P, D>>,
        check_phase: impl Fn(&P) -> Result<()>,
    ) -> Result<Self> {
        for (k, &t) in periods.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidCell(format!("period {} must be positive, got {t}", k + 1)));
            }
        }
        check_phase(&background)?;
        let mut kept = Vec::with_capacity(inclusions.len());
        for (idx, mut inc) in inclusions.into_iter().enumerate() {
            for k in 0..D {
                let tol = edge_tol(periods[k]);
                let (lo, sz) = (inc.corner[k], inc.size[k]);
                if !lo.is_finite() || !sz.is_finite() {
                    return Err(Error::InvalidCell(format!("inclusion {idx} has non-finite geometry")));
                }
                if sz < -tol {
                    return Err(Error::InvalidCell(format!("inclusion {idx} has negative size {sz}")));
                }
                let hi = lo + sz;
                if lo < -tol || hi > periods[k] + tol {
                    return Err(Error::InvalidCell(format!(
                        "inclusion {idx} spans [{lo}, {hi}] along axis {}, outside [0, {}]",
                        k + 1,
                        periods[k]
                    )));
                }
                let lo = lo.clamp(0.0, periods[k]);
                let hi = hi.clamp(lo, periods[k]);
                inc.corner[k] = lo;
                inc.size[k] = if hi - lo < tol { 0.0 } else { hi - lo };
            }
            check_phase(&inc.phase)?;
            if !inc.is_empty() {
                kept.push(inc);
            }
        }
        Ok(Self {
            periods,
            background,
            inclusions: kept,
        })
    }

    /// Phase at a point; coordinates are wrapped into the cell.
    pub fn phase_at(&self, x: [f64; D]) -> &P {
        let mut y = x;
        for k in 0..D {
            y[k] = x[k].rem_euclid(self.periods[k]);
        }
        self.inclusions
            .iter()
            .rev()
            .find(|inc| inc.contains(&y))
            .map(|inc| &inc.phase)
            .unwrap_or(&self.background)
    }

    /// Sorted distinct edge coordinates along `axis`, including 0 and T.
    pub fn breakpoints(&self, axis: usize) -> Vec<f64> {
        let t = self.periods[axis];
        let mut pts = vec![0.0, t];
        for inc in &self.inclusions {
            pts.push(inc.corner[axis]);
            pts.push(inc.corner[axis] + inc.size[axis]);
        }
        dedup_sorted(pts, edge_tol(t))
    }

    /// Tensor grid of all edge coordinates, with the phase of every grid box.
    pub fn grid(&self) -> PhaseGrid<P, D> {
        let edges: [Vec<f64>; D] = std::array::from_fn(|k| self.breakpoints(k));
        PhaseGrid::from_edges(edges, |c| self.phase_at(c).clone())
    }

    /// Relabels axes: new axis `k` is old axis `perm[k]`.
    pub fn permute_axes(&self, perm: [usize; D]) -> Self {
        let mut seen = [false; D];
        for &p in &perm {
            assert!(p < D && !seen[p], "invalid axis permutation {perm:?}");
            seen[p] = true;
        }
        Self {
            periods: std::array::from_fn(|k| self.periods[perm[k]]),
            background: self.background.permute_axes(&perm),
            inclusions: self
                .inclusions
                .iter()
                .map(|inc| Inclusion {
                    corner: std::array::from_fn(|k| inc.corner[perm[k]]),
                    size: std::array::from_fn(|k| inc.size[perm[k]]),
                    phase: inc.phase.permute_axes(&perm),
                })
                .collect(),
        }
    }

    /// Mirror image `x_axis -> T - x_axis`. Phases are unchanged, which is
    /// exact for the scalar phase and for any stiffness even in that axis.
    pub fn reflect(&self, axis: usize) -> Self {
        let t = self.periods[axis];
        let mut out = self.clone();
        for inc in &mut out.inclusions {
            inc.corner[axis] = t - inc.corner[axis] - inc.size[axis];
        }
        out
    }

    pub fn mean_density(&self) -> f64 {
        self.grid().average(|p| p.density())
    }

    /// Fraction of the cell not covered by the background phase.
    pub fn inclusion_fraction(&self) -> f64 {
        let bg = self.background.clone();
        self.grid().average(|p| if *p == bg { 0.0 } else { 1.0 })
    }
}

impl UnitCell {
    pub fn new(periods: [f64; 2], background: MaterialPhase, inclusions: Vec<Inclusion<MaterialPhase, 2>>) -> Result<Self> {
        Self::with_validation(periods, background, inclusions, MaterialPhase::validate)
    }

    pub fn homogeneous(phase: MaterialPhase) -> Result<Self> {
        Self::new([1.0, 1.0], phase, vec![])
    }

    /// Unit cell with a centred square rod of side `√f`.
    pub fn square_rod(matrix: MaterialPhase, rod: MaterialPhase, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!("volume fraction {fraction} outside [0, 1]")));
        }
        let a = fraction.sqrt();
        let lo = (1.0 - a) / 2.0;
        Self::new([1.0, 1.0], matrix, vec![Inclusion::new([lo, lo], [a, a], rod)])
    }

    /// `(⟨ρ⟩, ⟨μ⟩)`, exact area-weighted averages.
    pub fn averages(&self) -> (f64, f64) {
        let g = self.grid();
        (g.average(|p| p.rho), g.average(|p| p.mu))
    }

    /// `⟨μ⁻¹⟩⁻¹`, the harmonic (Reuss) mean.
    pub fn harmonic_mean_mu(&self) -> f64 {
        1.0 / self.grid().average(|p| 1.0 / p.mu)
    }

    /// `(√(⟨μ⁻¹⟩⁻¹/⟨ρ⟩), √(⟨μ⟩/⟨ρ⟩))`: speeds from the Reuss and Voigt bounds.
    pub fn speed_bounds(&self) -> (f64, f64) {
        let (rho, mu) = self.averages();
        ((self.harmonic_mean_mu() / rho).sqrt(), (mu / rho).sqrt())
    }

    /// Multiplies every shear modulus by `s_mu` and every density by `s_rho`.
    pub fn scaled(&self, s_mu: f64, s_rho: f64) -> Result<Self> {
        let f = |p: &MaterialPhase| MaterialPhase::new(p.rho * s_rho, p.mu * s_mu);
        Self::new(
            self.periods,
            f(&self.background)?,
            self.inclusions
                .iter()
                .map(|inc| Ok(Inclusion::new(inc.corner, inc.size, f(&inc.phase)?)))
                .collect::<Result<_>>()?,
        )
    }

    /// Transposed cell, used for propagation along the second axis.
    pub fn transposed(&self) -> Self {
        self.permute_axes([1, 0])
    }

    /// Splits the cell into x₁-slabs inside which the material depends on
    /// x₂ only.
    pub fn slab_partition(&self) -> SlabPartition {
        let g = self.grid();
        let [xe, ye] = &g.edges;
        let slabs = (0..xe.len() - 1)
            .map(|i| Slab {
                start: xe[i],
                width: xe[i + 1] - xe[i],
                profile: Profile::merged(
                    (0..ye.len() - 1).map(|j| (ye[j], ye[j + 1], *g.phase(&[i, j]))),
                    self.periods[1],
                ),
            })
            .collect();
        SlabPartition {
            period: self.periods[0],
            slabs,
        }
    }

    /// The same crystal turned by 45°, rendered on a square cell of unit
    /// side as `slices` x₁-slabs (a staircase) whose x₂-profile is the exact
    /// cut through each slice's midline.
    ///
    /// The rotated cell is the √2-larger supercell spanned by (T,T) and
    /// (−T,T), rescaled to side 1; new x₁ runs along (1,1)/√2.
    pub fn rotate45(&self, slices: usize) -> Result<Self> {
        let t = self.periods[0];
        if (self.periods[1] - t).abs() > edge_tol(t) {
            return Err(Error::InvalidCell(format!(
                "rotation needs a square period, got {}x{}",
                self.periods[0], self.periods[1]
            )));
        }
        if slices == 0 {
            return Err(Error::InvalidParameter("rotation needs at least one slice".into()));
        }
        let bx: Vec<f64> = self.breakpoints(0).iter().map(|b| b / t).collect();
        let by: Vec<f64> = self.breakpoints(1).iter().map(|b| b / t).collect();
        let width = 1.0 / slices as f64;
        let mut inclusions = Vec::new();
        for s in 0..slices {
            let c = (s as f64 + 0.5) * width;
            // Along the midline, x₁ = T(c − τ) and x₂ = T(c + τ), τ ∈ [0, 1).
            let mut cuts = vec![0.0, 1.0];
            for &b in &bx {
                cuts.push((c - b).rem_euclid(1.0));
            }
            for &b in &by {
                cuts.push((b - c).rem_euclid(1.0));
            }
            let cuts = dedup_sorted(cuts, 1e-13);
            let pieces = cuts.windows(2).map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                (w[0], w[1], *self.phase_at([t * (c - m), t * (c + m)]))
            });
            for (lo, hi, p) in Profile::merged(pieces, 1.0).pieces {
                if p != self.background {
                    inclusions.push(Inclusion::new([s as f64 * width, lo], [width, hi - lo], p));
                }
            }
        }
        Self::new([1.0, 1.0], self.background, inclusions)
    }
}

/// Piecewise-constant function of one periodic coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile<P> {
    pub period: f64,
    /// `(lo, hi, phase)` pieces, contiguous and covering `[0, period)`.
    pub pieces: Vec<(f64, f64, P)>,
}

impl<P: Clone + PartialEq> Profile<P> {
    /// Joins adjacent pieces with equal phase.
    pub fn merged(pieces: impl IntoIterator<Item = (f64, f64, P)>, period: f64) -> Self {
        let mut out: Vec<(f64, f64, P)> = Vec::new();
        for (lo, hi, p) in pieces {
            if hi <= lo {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.2 == p => last.1 = hi,
                _ => out.push((lo, hi, p)),
            }
        }
        Self { period, pieces: out }
    }

    pub fn map<Q>(&self, f: impl Fn(&P) -> Q) -> Profile<Q> {
        Profile {
            period: self.period,
            pieces: self.pieces.iter().map(|(a, b, p)| (*a, *b, f(p))).collect(),
        }
    }
}

impl<P> Profile<P> {
    pub fn average(&self, f: impl Fn(&P) -> f64) -> f64 {
        self.pieces.iter().map(|(a, b, p)| (b - a) * f(p)).sum::<f64>() / self.period
    }
}

impl Profile<f64> {
    /// Coefficients `f̂ₙ` for `n = −K..K` (index `n + K`) of
    /// `f(x) = Σ f̂ₙ e^{2πinx/T}`.
    pub fn fourier(&self, k: usize) -> Vec<Complex64> {
        (-(k as i64)..=k as i64)
            .map(|n| {
                self.pieces
                    .iter()
                    .map(|&(a, b, v)| piece_coefficient(a, b, self.period, n) * v)
                    .sum()
            })
            .collect()
    }
}

/// `(1/T)∫ₐᵇ e^{−2πinx/T} dx`.
pub fn piece_coefficient(a: f64, b: f64, period: f64, n: i64) -> Complex64 {
    if n == 0 {
        return Complex64::new((b - a) / period, 0.0);
    }
    if b - a == period {
        return Complex64::new(0.0, 0.0);
    }
    let w = -2.0 * PI * n as f64 / period;
    let eb = Complex64::from_polar(1.0, w * b);
    let ea = Complex64::from_polar(1.0, w * a);
    (eb - ea) / Complex64::new(0.0, w * period)
}

/// One x₁-interval with its x₂-profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    pub start: f64,
    pub width: f64,
    pub profile: Profile<MaterialPhase>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabPartition {
    pub period: f64,
    pub slabs: Vec<Slab>,
}

impl SlabPartition {
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.slabs.iter().map(|s| s.start).collect();
        b.push(self.period);
        b
    }
}

/// Fourier data of one slab: coefficients of `μ` and `1/μ` along x₂ for
/// `|n| ≤ 2N`, enough for `(2N+1)×(2N+1)` Toeplitz matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSlab {
    pub width: f64,
    pub half_width: usize,
    pub period: f64,
    /// `μ̂ₙ`, index `n + 2N`.
    pub mu_hat: Vec<Complex64>,
    /// `(μ⁻¹)̂ₙ`, index `n + 2N`.
    pub inv_mu_hat: Vec<Complex64>,
}

impl FourierSlab {
    pub fn new(slab: &Slab, half_width: usize) -> Self {
        let mu = slab.profile.map(|p| p.mu);
        let inv = slab.profile.map(|p| 1.0 / p.mu);
        Self {
            width: slab.width,
            half_width,
            period: slab.profile.period,
            mu_hat: mu.fourier(2 * half_width),
            inv_mu_hat: inv.fourier(2 * half_width),
        }
    }

    pub fn mu(&self, n: i64) -> Complex64 {
        self.mu_hat[(n + 2 * self.half_width as i64) as usize]
    }

    pub fn inv_mu(&self, n: i64) -> Complex64 {
        self.inv_mu_hat[(n + 2 * self.half_width as i64) as usize]
    }
}

/// Tensor grid of cell edges with one phase per box.
#[derive(Debug, Clone)]
pub struct PhaseGrid<P, const D: usize> {
    pub edges: [Vec<f64>; D],
    phases: Vec<P>,
}

impl<P, const D: usize> PhaseGrid<P, D> {
    fn from_edges(edges: [Vec<f64>; D], mut at: impl FnMut([f64; D]) -> P) -> Self {
        let dims: [usize; D] = std::array::from_fn(|k| edges[k].len() - 1);
        let total: usize = dims.iter().product();
        let mut phases = Vec::with_capacity(total);
        for flat in 0..total {
            let idx = unflatten(flat, &dims);
            let c = std::array::from_fn(|k| 0.5 * (edges[k][idx[k]] + edges[k][idx[k] + 1]));
            phases.push(at(c));
        }
        Self { edges, phases }
    }

    pub fn dims(&self) -> [usize; D] {
        std::array::from_fn(|k| self.edges[k].len() - 1)
    }

    pub fn phase(&self, idx: &[usize; D]) -> &P {
        let dims = self.dims();
        let mut flat = 0;
        for k in 0..D {
            flat = flat * dims[k] + idx[k];
        }
        &self.phases[flat]
    }

    /// Iterates over `(lower corner, upper corner, phase)` of every box.
    pub fn boxes(&self) -> impl Iterator<Item = ([f64; D], [f64; D], &P)> + '_ {
        let dims = self.dims();
        self.phases.iter().enumerate().map(move |(flat, p)| {
            let idx = unflatten(flat, &dims);
            (
                std::array::from_fn(|k| self.edges[k][idx[k]]),
                std::array::from_fn(|k| self.edges[k][idx[k] + 1]),
                p,
            )
        })
    }

    pub fn average(&self, f: impl Fn(&P) -> f64) -> f64 {
        let total: f64 = (0..D).map(|k| self.edges[k].last().unwrap() - self.edges[k][0]).product();
        self.boxes()
            .map(|(lo, hi, p)| (0..D).map(|k| hi[k] - lo[k]).product::<f64>() * f(p))
            .sum::<f64>()
            / total
    }
}

fn unflatten<const D: usize>(mut flat: usize, dims: &[usize; D]) -> [usize; D] {
    let mut idx = [0; D];
    for k in (0..D).rev() {
        idx[k] = flat % dims[k];
        flat /= dims[k];
    }
    idx
}

pub(crate) fn dedup_sorted(mut pts: Vec<f64>, tol: f64) -> Vec<f64> {
    pts.sort_by(f64::total_cmp);
    let max = pts.last().copied();
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last() {
            Some(&last) if p - last <= tol => {}
            _ => out.push(p),
        }
    }
    // The upper end stays exact even when a nearby point was kept instead.
    if let (Some(last), Some(max)) = (out.last_mut(), max) {
        *last = max;
    }
    out
}

/// Mixed average `⟨⟨μ⁻¹⟩_a⁻¹⟩_b` over an axis-aligned rectangle: harmonic
/// along `harmonic_axis` and arithmetic across it.
pub fn mixed_average(cell: &UnitCell, lo: [f64; 2], hi: [f64; 2], harmonic_axis: usize) -> f64 {
    let across = 1 - harmonic_axis;
    let cuts = |axis: usize| -> Vec<f64> {
        let t = cell.periods[axis];
        let mut pts = vec![lo[axis], hi[axis]];
        for b in cell.breakpoints(axis) {
            let mut k = ((lo[axis] - b) / t).floor();
            loop {
                let p = b + k * t;
                if p >= hi[axis] {
                    break;
                }
                if p > lo[axis] {
                    pts.push(p);
                }
                k += 1.0;
            }
        }
        dedup_sorted(pts, 1e-14 * t)
    };
    let hc = cuts(harmonic_axis);
    let ac = cuts(across);
    let mut total = 0.0;
    for w in ac.windows(2) {
        let mid_a = 0.5 * (w[0] + w[1]);
        let mut resistance = 0.0;
        for v in hc.windows(2) {
            let mid_h = 0.5 * (v[0] + v[1]);
            let mut x = [0.0; 2];
            x[harmonic_axis] = mid_h;
            x[across] = mid_a;
            resistance += (v[1] - v[0]) / cell.phase_at(x).mu;
        }
        total += (w[1] - w[0]) * (hi[harmonic_axis] - lo[harmonic_axis]) / resistance;
    }
    total / (hi[across] - lo[across])
}

/// Two-dimensional Fourier coefficients `μ̂_g` (and of `1/μ`) of a 2D cell
/// for `|g₁|, |g₂| ≤ k`, row-major with index `(g₁ + k)(2k+1) + g₂ + k`.
pub fn cell_fourier_2d(cell: &UnitCell, k: usize, f: impl Fn(&MaterialPhase) -> f64) -> Vec<Complex64> {
    let g = cell.grid();
    let [t1, t2] = cell.periods;
    let span = 2 * k + 1;
    let mut out = vec![Complex64::new(0.0, 0.0); span * span];
    let boxes: Vec<_> = g.boxes().collect();
    for (lo, hi, p) in boxes {
        let v = f(p);
        let c1: Vec<Complex64> = (-(k as i64)..=k as i64).map(|n| piece_coefficient(lo[0], hi[0], t1, n)).collect();
        let c2: Vec<Complex64> = (-(k as i64)..=k as i64).map(|n| piece_coefficient(lo[1], hi[1], t2, n)).collect();
        for (i, a) in c1.iter().enumerate() {
            for (j, b) in c2.iter().enumerate() {
                out[i * span + j] += a * b * v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn st() -> MaterialPhase {
        MaterialPhase::steel()
    }
    fn ep() -> MaterialPhase {
        MaterialPhase::epoxy()
    }

    #[test]
    fn homogeneous_epoxy_everywhere() {
        let cell = UnitCell::homogeneous(ep()).unwrap();
        for x in [[0.0, 0.0], [0.3, 0.9], [0.99, 0.5]] {
            assert_eq!(*cell.phase_at(x), MaterialPhase { rho: 1.14e3, mu: 1.48e9 });
        }
    }

    #[test]
    fn rod_center_is_rod_phase() {
        let cell = UnitCell::square_rod(st(), ep(), 0.3).unwrap();
        assert_eq!(*cell.phase_at([0.5, 0.5]), ep());
        assert_eq!(*cell.phase_at([0.01, 0.5]), st());
    }

    #[test]
    fn later_inclusion_wins() {
        let a = MaterialPhase::new(1.0, 2.0).unwrap();
        let b = MaterialPhase::new(3.0, 4.0).unwrap();
        let cell = UnitCell::new(
            [1.0, 1.0],
            ep(),
            vec![
                Inclusion::new([0.1, 0.1], [0.5, 0.5], a),
                Inclusion::new([0.4, 0.4], [0.5, 0.5], b),
            ],
        )
        .unwrap();
        assert_eq!(*cell.phase_at([0.5, 0.5]), b);
        assert_eq!(*cell.phase_at([0.2, 0.2]), a);
    }

    #[test]
    fn construction_errors() {
        let out = UnitCell::new([1.0, 1.0], ep(), vec![Inclusion::new([0.8, 0.0], [0.5, 0.5], st())]);
        assert!(matches!(out, Err(Error::InvalidCell(_))));
        assert!(MaterialPhase::new(0.0, 1.0).is_err());
        assert!(MaterialPhase::new(1.0, -1.0).is_err());
        assert!(UnitCell::new([0.0, 1.0], ep(), vec![]).is_err());
        let bad = MaterialPhase { rho: 1.0, mu: 0.0 };
        assert!(UnitCell::new([1.0, 1.0], ep(), vec![Inclusion::new([0.0, 0.0], [0.5, 0.5], bad)]).is_err());
    }

    #[test]
    fn slab_counts() {
        let homog = UnitCell::homogeneous(st()).unwrap().slab_partition();
        assert_eq!(homog.slabs.len(), 1);
        assert_eq!(homog.breakpoints(), vec![0.0, 1.0]);

        let a = 0.5;
        let rod = UnitCell::square_rod(st(), ep(), a * a).unwrap().slab_partition();
        assert_eq!(rod.slabs.len(), 3);
        let b = rod.breakpoints();
        assert_relative_eq!(b[1], (1.0 - a) / 2.0);
        assert_relative_eq!(b[2], (1.0 + a) / 2.0);

        let two = UnitCell::new(
            [1.0, 1.0],
            st(),
            vec![
                Inclusion::new([0.1, 0.1], [0.2, 0.2], ep()),
                Inclusion::new([0.5, 0.6], [0.3, 0.2], ep()),
            ],
        )
        .unwrap()
        .slab_partition();
        assert_eq!(two.slabs.len(), 5);
    }

    #[test]
    fn slab_material_is_x1_independent() {
        let cell = UnitCell::new(
            [1.2, 0.8],
            st(),
            vec![
                Inclusion::new([0.1, 0.1], [0.6, 0.3], ep()),
                Inclusion::new([0.4, 0.2], [0.7, 0.5], MaterialPhase::new(2.0e3, 5e9).unwrap()),
            ],
        )
        .unwrap();
        let part = cell.slab_partition();
        let total: f64 = part.slabs.iter().map(|s| s.width).sum();
        assert_relative_eq!(total, 1.2, max_relative = 1e-15);
        for slab in &part.slabs {
            for frac in [0.01, 0.5, 0.99] {
                let x1 = slab.start + frac * slab.width;
                for &(lo, hi, p) in &slab.profile.pieces {
                    assert_eq!(*cell.phase_at([x1, 0.5 * (lo + hi)]), p);
                }
            }
        }
    }

    #[test]
    fn constant_profile_coefficients() {
        let p = Profile { period: 1.0, pieces: vec![(0.0, 1.0, 5.0)] };
        let c = p.fourier(3);
        assert_relative_eq!(c[3].re, 5.0);
        for (i, v) in c.iter().enumerate() {
            if i != 3 {
                assert!(v.norm() < 1e-15);
            }
        }
    }

    /// Composite Simpson's rule on each smooth piece of the integrand.
    fn quadrature_coefficient(pieces: &[(f64, f64, f64)], period: f64, n: i64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(a, b, v) in pieces {
            let m = 2000;
            let h = (b - a) / m as f64;
            for i in 0..=m {
                let x = a + i as f64 * h;
                let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += Complex64::from_polar(1.0, -2.0 * PI * n as f64 * x / period) * (w * v * h / 3.0);
            }
        }
        acc / period
    }

    #[test]
    fn two_piece_coefficients_match_quadrature() {
        let pieces = vec![(0.0, 0.5, 1.0), (0.5, 1.0, 3.0)];
        let p = Profile { period: 1.0, pieces: pieces.clone() };
        let c = p.fourier(4);
        assert_relative_eq!(c[4].re, 2.0, max_relative = 1e-15);
        // n = 1: (1 − 3)(e^{−iπ} − 1)/(−2πi) = 2i/π.
        assert!((c[5] - Complex64::new(0.0, 2.0 / PI)).norm() < 1e-15);
        for n in -4..=4i64 {
            let q = quadrature_coefficient(&pieces, 1.0, n);
            assert!((c[(n + 4) as usize] - q).norm() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn coefficients_are_hermitian() {
        let p = Profile {
            period: 2.5,
            pieces: vec![(0.0, 0.3, 1.0), (0.3, 1.7, 9.0), (1.7, 2.5, 0.2)],
        };
        let c = p.fourier(6);
        for n in 1..=6 {
            assert!((c[6 - n] - c[6 + n].conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn averages_area_weighted() {
        let (rho, mu) = UnitCell::homogeneous(st()).unwrap().averages();
        assert_eq!((rho, mu), (7.8e3, 8e10));
        let (_, mu) = UnitCell::square_rod(st(), ep(), 0.25).unwrap().averages();
        assert_relative_eq!(mu, 0.75 * 80e9 + 0.25 * 1.48e9, max_relative = 1e-14);
        let (rho, mu) = UnitCell::square_rod(st(), ep(), 1.0).unwrap().averages();
        assert_relative_eq!(rho, ep().rho, max_relative = 1e-15);
        assert_relative_eq!(mu, ep().mu, max_relative = 1e-15);
    }

    #[test]
    fn slab_zero_modes_average_to_mean() {
        let cell = UnitCell::new(
            [1.0, 1.3],
            st(),
            vec![
                Inclusion::new([0.2, 0.1], [0.5, 0.7], ep()),
                Inclusion::new([0.0, 0.9], [0.4, 0.3], MaterialPhase::new(3e3, 7e9).unwrap()),
            ],
        )
        .unwrap();
        let part = cell.slab_partition();
        let weighted: f64 = part
            .slabs
            .iter()
            .map(|s| s.width * FourierSlab::new(s, 2).mu(0).re)
            .sum::<f64>()
            / part.period;
        assert_relative_eq!(weighted, cell.averages().1, max_relative = 1e-12);
    }

    #[test]
    fn rotation_keeps_homogeneous_cell() {
        let cell = UnitCell::homogeneous(ep()).unwrap().rotate45(16).unwrap();
        assert!(cell.inclusions().is_empty());
        assert_eq!(*cell.background(), ep());
    }

    #[test]
    fn rotation_preserves_fraction() {
        let cell = UnitCell::square_rod(st(), ep(), 0.5).unwrap();
        let rot = cell.rotate45(64).unwrap();
        assert_relative_eq!(rot.inclusion_fraction(), 0.5, max_relative = 1e-3);
        assert!(rot.slab_partition().slabs.len() <= 64);
    }

    #[test]
    fn rotated_centred_rod_is_even_in_x2() {
        let rot = UnitCell::square_rod(st(), ep(), 0.4).unwrap().rotate45(48).unwrap();
        for u1 in [0.11, 0.37, 0.5, 0.83] {
            for s in [0.05, 0.2, 0.31, 0.45] {
                assert_eq!(rot.phase_at([u1, s]), rot.phase_at([u1, -s]));
            }
        }
    }

    #[test]
    fn rotation_needs_square_cell() {
        let cell = UnitCell::new([1.0, 2.0], st(), vec![]).unwrap();
        assert!(cell.rotate45(8).is_err());
    }

    #[test]
    fn mixed_average_limits() {
        let lam = UnitCell::new([1.0, 1.0], st(), vec![Inclusion::new([0.5, 0.0], [0.5, 1.0], ep())]).unwrap();
        let h = mixed_average(&lam, [0.0, 0.0], [1.0, 1.0], 0);
        assert_relative_eq!(h, 2.0 / (1.0 / st().mu + 1.0 / ep().mu), max_relative = 1e-14);
        let a = mixed_average(&lam, [0.0, 0.0], [1.0, 1.0], 1);
        assert_relative_eq!(a, 0.5 * (st().mu + ep().mu), max_relative = 1e-14);
        // Windows that wrap around the period.
        let w = mixed_average(&lam, [-0.25, 0.0], [0.25, 0.1], 0);
        assert_relative_eq!(w, 2.0 / (1.0 / st().mu + 1.0 / ep().mu), max_relative = 1e-14);
    }

    #[test]
    fn two_dimensional_coefficients_factorize() {
        let cell = UnitCell::square_rod(st(), ep(), 0.36).unwrap();
        let c = cell_fourier_2d(&cell, 3, |p| p.mu);
        let (_, mu) = cell.averages();
        assert_relative_eq!(c[3 * 7 + 3].re, mu, max_relative = 1e-14);
        let a = 0.6;
        let lo = 0.2;
        let f1 = piece_coefficient(lo, lo + a, 1.0, 1);
        let f2 = piece_coefficient(lo, lo + a, 1.0, 2);
        let expect = f1 * f2 * (ep().mu - st().mu);
        assert!((c[4 * 7 + 5] - expect).norm() < 1e-6);
    }
}
