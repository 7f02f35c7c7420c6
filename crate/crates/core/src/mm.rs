//! Monodromy-matrix solver for the 2D scalar problem.
//!
//! Along x₁ the state `η = (v, μ∂₁v)` of the static cell problem obeys
//! `η' = Q₀(x₁)η` with `Q₀ = [[0, 𝛍⁻¹], [A, 0]]` and `A = −∂₂μ∂₂`, both
//! truncated to `2N+1` Fourier modes in x₂. Every slab contributes one exact
//! exponential, and the effective modulus along x₁ is the mean traction of
//! the periodic corrector with unit mean gradient.
//!
//! Internally moduli are divided by `⟨μ⟩`, so the traction block of every
//! generator and monodromy matrix is measured in units of `⟨μ⟩`.

use ndarray::{s, Array1, Array2};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, LazyLock, OnceLock};

use crate::cell::{FourierSlab, Slab, UnitCell};
use crate::dense::{self, Lu};
use crate::error::{Error, Result};
use crate::shooting::{self, FixedModes};
use crate::spectral;
use crate::tensor::{EffectiveTensor, Method, Truncation};

/// How the truncated products `μ·f` and `μ⁻¹·f` are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorizationRule {
    /// `𝛍⁻¹ = T(1/μ)`, `A = D·T(μ)·D`: each entry exact, slowest in `N`.
    Direct,
    /// `𝛍⁻¹ = T(μ)⁻¹`, `A = D·T(μ)·D`.
    Laurent,
    /// `𝛍⁻¹ = T(μ)⁻¹`, `A = D·T(1/μ)⁻¹·D`: inverse rule for both products,
    /// matching which field is continuous across x₂-interfaces.
    #[default]
    FullInverse,
}

impl FactorizationRule {
    pub fn name(self) -> &'static str {
        match self {
            FactorizationRule::Direct => "direct",
            FactorizationRule::Laurent => "laurent",
            FactorizationRule::FullInverse => "full-inverse",
        }
    }
}

impl fmt::Display for FactorizationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FactorizationRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Self::Direct),
            "laurent" | "inverse" => Ok(Self::Laurent),
            "full-inverse" | "full" | "li" => Ok(Self::FullInverse),
            other => Err(Error::InvalidParameter(format!("unknown inverse rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmOptions {
    /// Fourier half-width `N`; `d = 2N + 1`.
    pub n: usize,
    pub rule: FactorizationRule,
    /// Largest 1-norm a single propagator block may reach in the periodic
    /// solve.
    pub max_growth: f64,
    /// Slices of the 45° staircase; `None` means `16·(2N+1)`.
    pub rotation_slices: Option<usize>,
}

impl MmOptions {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rule: FactorizationRule::default(),
            max_growth: 8f64.exp(),
            rotation_slices: None,
        }
    }

    pub fn with_rule(self, rule: FactorizationRule) -> Self {
        Self { rule, ..self }
    }

    pub fn d(&self) -> usize {
        2 * self.n + 1
    }

    pub fn slices(&self) -> usize {
        self.rotation_slices.unwrap_or(16 * self.d())
    }
}

/// Fourier-truncated generator of one slab in the real cos/sin basis.
#[derive(Debug, Clone)]
pub struct TruncatedGenerator {
    pub half_width: usize,
    /// The `𝛍⁻¹` block.
    pub inv_mu: Array2<f64>,
    /// The `A` block.
    pub a: Array2<f64>,
    /// Row giving the x₂-mean of `μ∂₂v` from the displacement block.
    pub flux_row: Array1<f64>,
    /// Traction mode `k` is carried as `σₖ/sₖ` with `sₖ = 2π|k|/T₂` (and
    /// `s₀ = 1`), which balances the two blocks of every propagator.
    pub traction_scale: Array1<f64>,
}

impl TruncatedGenerator {
    pub fn d(&self) -> usize {
        2 * self.half_width + 1
    }

    /// `Q₀` in the balanced state `(v, S⁻¹σ)`: `[[0, 𝛍⁻¹S], [S⁻¹A, 0]]`.
    pub fn q(&self) -> Array2<f64> {
        let d = self.d();
        let s_row = self.traction_scale.view().insert_axis(ndarray::Axis(0));
        let s_col = self.traction_scale.view().insert_axis(ndarray::Axis(1));
        let mut q = Array2::zeros((2 * d, 2 * d));
        q.slice_mut(s![..d, d..]).assign(&(&self.inv_mu * &s_row));
        q.slice_mut(s![d.., ..d]).assign(&(&self.a / &s_col));
        q
    }

    /// `Q₀` in the plain state `(v, σ)`.
    pub fn q_unscaled(&self) -> Array2<f64> {
        let d = self.d();
        let mut q = Array2::zeros((2 * d, 2 * d));
        q.slice_mut(s![..d, d..]).assign(&self.inv_mu);
        q.slice_mut(s![d.., ..d]).assign(&self.a);
        q
    }
}

/// Generator of `slab` with moduli divided by `mu_ref`.
pub fn assemble_generator(slab: &FourierSlab, rule: FactorizationRule, mu_ref: f64) -> Result<TruncatedGenerator> {
    let n = slab.half_width;
    if slab.mu_hat.len() < 4 * n + 1 || slab.inv_mu_hat.len() < 4 * n + 1 {
        return Err(Error::Dimension(format!("slab coefficients stop short of |n| = 2N = {}", 2 * n)));
    }
    let u = spectral::real_basis(n);
    let t_mu = spectral::to_real(&spectral::toeplitz(&slab.mu_hat, n), &u) / mu_ref;
    let t_inv = spectral::to_real(&spectral::toeplitz(&slab.inv_mu_hat, n), &u) * mu_ref;
    let dr = spectral::real_derivative(n, slab.period);

    let (inv_mu, k) = match rule {
        FactorizationRule::Direct => (t_inv, t_mu),
        FactorizationRule::Laurent => (symmetric_inverse(&t_mu)?, t_mu),
        FactorizationRule::FullInverse => (symmetric_inverse(&t_mu)?, symmetric_inverse(&t_inv)?),
    };
    // A = −D·K·D = Dᵀ·K·D since D is antisymmetric.
    let flux = k.dot(&dr);
    let mut a = -dr.dot(&flux);
    symmetrize(&mut a);
    Ok(TruncatedGenerator {
        half_width: n,
        inv_mu,
        a,
        flux_row: flux.row(n).to_owned(),
        traction_scale: traction_scale(n, slab.period),
    })
}

/// Complex exponential-basis blocks `(𝛍⁻¹, A)` of the Direct rule, in physical
/// units. Reference path for checking the real assembly.
pub fn complex_generator_blocks(slab: &FourierSlab) -> (Array2<num_complex::Complex64>, Array2<num_complex::Complex64>) {
    let n = slab.half_width;
    let inv = spectral::toeplitz(&slab.inv_mu_hat, n);
    let t = spectral::toeplitz(&slab.mu_hat, n);
    let dm = spectral::derivative(n, slab.period);
    let a = -dm.dot(&t).dot(&dm);
    (inv, a)
}

fn traction_scale(n: usize, period: f64) -> Array1<f64> {
    Array1::from_shape_fn(2 * n + 1, |j| {
        let k = j.abs_diff(n);
        if k == 0 {
            1.0
        } else {
            2.0 * std::f64::consts::PI * k as f64 / period
        }
    })
}

fn symmetric_inverse(m: &Array2<f64>) -> Result<Array2<f64>> {
    let mut inv = dense::inverse(m)?;
    symmetrize(&mut inv);
    Ok(inv)
}

fn symmetrize(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
}

/// A slab's generator with its propagators.
#[derive(Debug)]
pub struct SlabOperator {
    pub generator: TruncatedGenerator,
    pub propagated: shooting::PropagatedSlab,
    integral: OnceLock<Array2<f64>>,
}

impl SlabOperator {
    fn new(slab: &FourierSlab, rule: FactorizationRule, mu_ref: f64, max_growth: f64) -> Result<Self> {
        let generator = assemble_generator(slab, rule, mu_ref)?;
        let propagated = shooting::PropagatedSlab::new(Arc::new(generator.q()), slab.width, max_growth)?;
        Ok(Self {
            generator,
            propagated,
            integral: OnceLock::new(),
        })
    }

    /// `∫₀ʰ exp(sQ₀) ds` over one piece.
    pub fn piece_integral(&self) -> Result<&Array2<f64>> {
        if let Some(v) = self.integral.get() {
            return Ok(v);
        }
        let v = shooting::piece_integral(&self.propagated)?;
        Ok(self.integral.get_or_init(|| v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct SlabKey {
    profile: Vec<(u64, u64, u64, u64)>,
    width: u64,
    period: u64,
    n: usize,
    rule: FactorizationRule,
    mu_ref: u64,
    growth: u64,
}

impl SlabKey {
    fn new(slab: &Slab, opts: &MmOptions, mu_ref: f64) -> Self {
        Self {
            profile: slab
                .profile
                .pieces
                .iter()
                .map(|(a, b, p)| (a.to_bits(), b.to_bits(), p.mu.to_bits(), p.rho.to_bits()))
                .collect(),
            width: slab.width.to_bits(),
            period: slab.profile.period.to_bits(),
            n: opts.n,
            rule: opts.rule,
            mu_ref: mu_ref.to_bits(),
            growth: opts.max_growth.to_bits(),
        }
    }
}

/// Shared cache of slab operators keyed by profile, width and truncation.
/// Concurrent readers share entries; racing inserts of the same key build
/// identical values, so whichever lands first is kept.
#[derive(Default)]
pub struct SlabCache {
    map: RwLock<HashMap<SlabKey, Arc<SlabOperator>>>,
}

const CACHE_LIMIT: usize = 4096;

impl SlabCache {
    pub fn global() -> &'static SlabCache {
        static CACHE: LazyLock<SlabCache> = LazyLock::new(SlabCache::default);
        &CACHE
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.write().clear();
    }

    fn get(&self, slab: &Slab, opts: &MmOptions, mu_ref: f64) -> Result<Arc<SlabOperator>> {
        let key = SlabKey::new(slab, opts, mu_ref);
        if let Some(op) = self.map.read().get(&key) {
            return Ok(op.clone());
        }
        let op = Arc::new(SlabOperator::new(&FourierSlab::new(slab, opts.n), opts.rule, mu_ref, opts.max_growth)?);
        let mut map = self.map.write();
        if map.len() >= CACHE_LIMIT {
            map.clear();
        }
        Ok(map.entry(key).or_insert(op).clone())
    }
}

/// `M₀` for propagation along `axis`, with the slab widths it was built from.
#[derive(Debug, Clone)]
pub struct MonodromyMatrix {
    pub d: usize,
    pub m0: Array2<f64>,
    pub widths: Vec<f64>,
    /// Piece propagators and their multiplicities, first slab first.
    pub factors: Vec<(Arc<Array2<f64>>, usize)>,
    /// Modulus scale of the traction block; traction modes are further
    /// balanced as in [`TruncatedGenerator::traction_scale`].
    pub mu_ref: f64,
}

impl MonodromyMatrix {
    /// `(‖M₀w₀ − w₀‖, ‖M₀ᵀw̃₀ − w̃₀‖)`, both divided by `‖M₀‖₁`.
    pub fn fixed_vector_residuals(&self) -> (f64, f64) {
        let d = self.d;
        let n = d / 2;
        let scale = dense::norm1(&self.m0.view());
        let mut right = self.m0.column(n).to_owned();
        right[n] -= 1.0;
        let mut left = self.m0.row(d + n).to_owned();
        left[d + n] -= 1.0;
        let norm = |v: &Array1<f64>| v.iter().map(|x| x.abs()).sum::<f64>();
        (norm(&right) / scale, norm(&left) / scale)
    }

    /// `det M₀` as the product of the piece determinants. Each piece has
    /// bounded growth, so this stays accurate where the determinant of the
    /// formed product loses about `ε‖M₀‖²`.
    pub fn det(&self) -> Result<f64> {
        let mut log = 0.0;
        let mut sign = 1.0;
        for (step, pieces) in &self.factors {
            let d = dense::det(step)?;
            if d < 0.0 && pieces % 2 == 1 {
                sign = -sign;
            }
            log += *pieces as f64 * d.abs().ln();
        }
        Ok(sign * log.exp())
    }

    /// Determinant of the formed `M₀`.
    pub fn det_product(&self) -> Result<f64> {
        dense::det(&self.m0)
    }

    /// `ξ = (M₀ − I)⁻¹T₁w₀` by the literal deflated solve; returns the mean
    /// traction in physical units. Loses accuracy as `M₀` grows with `N`.
    pub fn deflated_mu_eff(&self, period: f64) -> Result<f64> {
        let x = shooting::solve_monodromy_direct(&self.m0, &modes_2d(self.d), period)?;
        Ok(x[[0, 0]] * self.mu_ref)
    }
}

fn modes_2d(d: usize) -> FixedModes {
    let n = d / 2;
    FixedModes {
        displacement: vec![n],
        traction: vec![d + n],
    }
}

fn oriented(cell: &UnitCell, axis: usize) -> Result<UnitCell> {
    match axis {
        1 => Ok(cell.clone()),
        2 => Ok(cell.transposed()),
        _ => Err(Error::InvalidParameter(format!("axis must be 1 or 2, got {axis}"))),
    }
}

fn operators(cell: &UnitCell, opts: &MmOptions) -> Result<(Vec<Arc<SlabOperator>>, f64, f64)> {
    let (_, mu_ref) = cell.averages();
    let part = cell.slab_partition();
    let cache = SlabCache::global();
    let ops = part
        .slabs
        .iter()
        .map(|s| cache.get(s, opts, mu_ref))
        .collect::<Result<Vec<_>>>()?;
    Ok((ops, mu_ref, part.period))
}

pub fn monodromy(cell: &UnitCell, opts: &MmOptions, axis: usize) -> Result<MonodromyMatrix> {
    let cell = oriented(cell, axis)?;
    let (ops, mu_ref, _) = operators(&cell, opts)?;
    let slabs: Vec<_> = ops.iter().map(|o| o.propagated.clone()).collect();
    let m0 = shooting::ordered_product(&slabs).map_err(|e| match e {
        Error::Overflow(_) => Error::Overflow(format!("monodromy product at N = {}", opts.n)),
        other => other,
    })?;
    Ok(MonodromyMatrix {
        d: opts.d(),
        m0,
        widths: ops.iter().map(|o| o.propagated.width).collect(),
        factors: slabs.iter().map(|s| (s.step.clone(), s.pieces)).collect(),
        mu_ref,
    })
}

/// Periodic corrector along x₁ of an already oriented cell.
struct Corrector {
    ops: Vec<Arc<SlabOperator>>,
    solution: shooting::PeriodicSolution,
    mu_ref: f64,
    period: f64,
}

impl Corrector {
    fn solve(cell: &UnitCell, opts: &MmOptions) -> Result<Self> {
        let (ops, mu_ref, period) = operators(cell, opts)?;
        let slabs: Vec<_> = ops.iter().map(|o| o.propagated.clone()).collect();
        let steps = shooting::steps(&slabs);
        let solution = shooting::solve_periodic(&steps, &modes_2d(opts.d()), period, opts.max_growth)?;
        Ok(Self {
            ops,
            solution,
            mu_ref,
            period,
        })
    }

    /// `μ_eff,11` in physical units.
    fn mu_eff(&self) -> f64 {
        let d = self.ops[0].generator.d();
        self.solution.nodes[0][[d + d / 2, 0]] * self.mu_ref
    }

    /// `⟨μ∂₂v⟩` over the cell, i.e. `μ_eff,21`.
    fn cross_flux(&self) -> Result<f64> {
        let d = self.ops[0].generator.d();
        let mut nodes = self.solution.nodes.iter();
        let mut total = 0.0;
        for op in &self.ops {
            let int = op.piece_integral()?;
            // Mean flux row applied to the displacement block of ∫η.
            let row = op.generator.flux_row.dot(&int.slice(s![..d, ..]));
            for _ in 0..op.propagated.pieces {
                let eta = nodes.next().expect("one node per piece");
                total += row.dot(&eta.column(0));
            }
        }
        Ok(total / self.period * self.mu_ref)
    }
}

fn checked_c2(mu_eff: f64, rho: f64, what: &str) -> Result<f64> {
    let c2 = mu_eff / rho;
    if !c2.is_finite() {
        return Err(Error::NonFinite(format!("c² along {what}")));
    }
    if c2 <= 0.0 {
        return Err(Error::Truncation(format!(
            "negative effective modulus {mu_eff:e} along {what}; increase N"
        )));
    }
    Ok(c2)
}

/// Result of a principal-direction solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalSpeed {
    pub c: f64,
    /// `M_axis,axis = ⟨μ⟩ − c²⟨ρ⟩`.
    pub m: f64,
}

pub fn principal_speed(cell: &UnitCell, opts: &MmOptions, axis: usize) -> Result<PrincipalSpeed> {
    let oriented = oriented(cell, axis)?;
    let corr = Corrector::solve(&oriented, opts)?;
    let (rho, mu) = cell.averages();
    let mu_eff = corr.mu_eff();
    let c2 = checked_c2(mu_eff, rho, if axis == 1 { "x1" } else { "x2" })?;
    Ok(PrincipalSpeed { c: c2.sqrt(), m: mu - mu_eff })
}

/// Same quantity from the literal `(M₀ − I)⁻¹` solve on the assembled
/// monodromy matrix; for cross-checks at small `N`.
pub fn principal_speed_direct(cell: &UnitCell, opts: &MmOptions, axis: usize) -> Result<PrincipalSpeed> {
    let m = monodromy(cell, opts, axis)?;
    let period = cell.periods()[axis - 1];
    let (rho, mu) = cell.averages();
    let mu_eff = m.deflated_mu_eff(period)?;
    let c2 = checked_c2(mu_eff, rho, "monodromy axis")?;
    Ok(PrincipalSpeed { c: c2.sqrt(), m: mu - mu_eff })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffDiagonalPath {
    /// Mean cross flux of the x₁ corrector.
    #[default]
    Direct,
    /// `(M̃₁₁ − M̃₂₂)/2` on the cell turned by 45°.
    Rotation,
}

pub fn offdiagonal_m12(cell: &UnitCell, opts: &MmOptions, path: OffDiagonalPath) -> Result<f64> {
    match path {
        OffDiagonalPath::Direct => Ok(-Corrector::solve(cell, opts)?.cross_flux()?),
        OffDiagonalPath::Rotation => {
            let rot = cell.rotate45(opts.slices())?;
            let a = principal_speed(&rot, opts, 1)?;
            let b = principal_speed(&rot, opts, 2)?;
            Ok(0.5 * (a.m - b.m))
        }
    }
}

/// Full 2×2 tensor: both principal solves and the direct off-diagonal term.
pub fn effective_tensor(cell: &UnitCell, opts: &MmOptions) -> Result<EffectiveTensor> {
    let (rho, mu) = cell.averages();
    let c1 = Corrector::solve(cell, opts)?;
    let mu11 = c1.mu_eff();
    checked_c2(mu11, rho, "x1")?;
    let m12 = -c1.cross_flux()?;
    let c2 = Corrector::solve(&cell.transposed(), opts)?;
    let mu22 = c2.mu_eff();
    checked_c2(mu22, rho, "x2")?;
    let t = EffectiveTensor {
        m11: mu - mu11,
        m22: mu - mu22,
        m12: Some(m12),
        mean_mu: mu,
        mean_rho: rho,
        method: Method::Mm,
        truncation: Truncation::Mm { n: opts.n },
    };
    if !t.is_elliptic() {
        return Err(Error::Truncation(format!(
            "effective tensor is not elliptic at N = {} (M12 = {m12:e})",
            opts.n
        )));
    }
    Ok(t)
}

/// `c²(κ₁) ≈ (⟨⟨μ⁻¹⟩₁⁻¹⟩₂ + ⟨⟨μ⟩₂⁻¹⟩₁⁻¹)/(2⟨ρ⟩)`: the mean of the two
/// orderings of harmonic-along-x₁ and arithmetic-along-x₂ averaging.
pub fn closed_form_estimate(cell: &UnitCell) -> f64 {
    closed_form_mu(cell) / cell.averages().0
}

fn closed_form_mu(cell: &UnitCell) -> f64 {
    let g = cell.grid();
    let [xe, ye] = &g.edges;
    let [t1, t2] = cell.periods();
    let (nx, ny) = (xe.len() - 1, ye.len() - 1);
    // Harmonic along x₁ on each x₂ line, then arithmetic over x₂.
    let mut first = 0.0;
    for j in 0..ny {
        let inv: f64 = (0..nx).map(|i| (xe[i + 1] - xe[i]) / g.phase(&[i, j]).mu).sum::<f64>() / t1;
        first += (ye[j + 1] - ye[j]) / t2 / inv;
    }
    // Arithmetic along x₂ on each x₁ line, then harmonic over x₁.
    let mut inv = 0.0;
    for i in 0..nx {
        let mean: f64 = (0..ny).map(|j| (ye[j + 1] - ye[j]) * g.phase(&[i, j]).mu).sum::<f64>() / t2;
        inv += (xe[i + 1] - xe[i]) / t1 / mean;
    }
    0.5 * (first + 1.0 / inv)
}

/// Principal values of the closed-form estimate as a tensor without `M₁₂`.
pub fn estimate_tensor(cell: &UnitCell) -> EffectiveTensor {
    let (rho, mu) = cell.averages();
    EffectiveTensor {
        m11: mu - closed_form_mu(cell),
        m22: mu - closed_form_mu(&cell.transposed()),
        m12: None,
        mean_mu: mu,
        mean_rho: rho,
        method: Method::Estimate,
        truncation: Truncation::Estimate,
    }
}

/// Traction-block solve of `(M₀ − I)x = T₁w₀` on a complex monodromy; used
/// only to check the real assembly against the exponential basis.
#[doc(hidden)]
pub fn complex_mu_eff_direct(cell: &UnitCell, n: usize) -> Result<f64> {
    use num_complex::Complex64;
    let part = cell.slab_partition();
    let (_, mu_ref) = cell.averages();
    let d = 2 * n + 1;
    let mut m = dense::identity::<Complex64>(2 * d);
    for slab in &part.slabs {
        let fs = FourierSlab::new(slab, n);
        let (inv, a) = complex_generator_blocks(&fs);
        let mut q = Array2::<Complex64>::zeros((2 * d, 2 * d));
        q.slice_mut(s![..d, d..]).assign(&(inv * Complex64::new(mu_ref, 0.0)));
        q.slice_mut(s![d.., ..d]).assign(&(a / Complex64::new(mu_ref, 0.0)));
        m = dense::mat_exp(&q, slab.width)?.dot(&m);
    }
    let keep_c: Vec<usize> = (0..2 * d).filter(|&c| c != n).collect();
    let keep_r: Vec<usize> = (0..2 * d).filter(|&r| r != d + n).collect();
    let mut k = m - &dense::identity::<Complex64>(2 * d);
    k = k.select(ndarray::Axis(0), &keep_r).select(ndarray::Axis(1), &keep_c);
    let mut rhs = Array1::<Complex64>::zeros(2 * d - 1);
    rhs[n] = Complex64::new(part.period, 0.0);
    let x = Lu::factor(&k)?.solve(&rhs)?;
    let idx = keep_c.iter().position(|&c| c == d + n).expect("traction column kept");
    Ok(x[idx].re * mu_ref)
}
