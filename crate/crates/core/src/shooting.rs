//! Periodic cell solve behind the deflated monodromy system.
//!
//! For a state `η` obeying `η' = Q(x₁)η` with piecewise-constant `Q`, the
//! corrector data `ξ(0) = T₁(M₀ − I)⁻¹w₀` solves
//!
//! ```text
//!   ηⱼ₊₁ − Eⱼ ηⱼ = 0   (j < K−1),      η₀ − E_{K−1} η_{K−1} = −T₁ w₀
//! ```
//!
//! where `Eⱼ = exp(hⱼQⱼ)` are the propagators of `K` consecutive pieces.
//! Eliminating `η₁..η_{K−1}` gives back `(M₀ − I)η₀ = T₁w₀` exactly; keeping
//! them bounds the growth any single block can carry, so the solve stays
//! accurate when the full product `M₀` spans more decades than `f64` holds.
//! Deflation removes the pinned displacement zero-mode columns of `η₀` and
//! the traction zero-mode rows of the closing equation.

use ndarray::Array2;
use std::sync::Arc;

use crate::dense::{self, Lu};
use crate::error::{Error, Result};

/// One constant-generator interval, already split into equal pieces.
#[derive(Debug, Clone)]
pub struct PropagatedSlab {
    pub generator: Arc<Array2<f64>>,
    pub width: f64,
    pub pieces: usize,
    /// `exp((width/pieces)·Q)`.
    pub step: Arc<Array2<f64>>,
}

impl PropagatedSlab {
    /// Splits the slab until each piece's propagator has 1-norm at most
    /// `max_growth`.
    pub fn new(generator: Arc<Array2<f64>>, width: f64, max_growth: f64) -> Result<Self> {
        let mut pieces = 1usize;
        loop {
            let step = dense::mat_exp(&generator, width / pieces as f64)?;
            let growth = dense::norm1(&step.view());
            if growth <= max_growth || pieces >= 1 << 16 {
                return Ok(Self {
                    generator,
                    width,
                    pieces,
                    step: Arc::new(step),
                });
            }
            // Growth is roughly exponential in the piece length.
            let ratio = (growth.ln() / max_growth.ln()).ceil().max(2.0) as usize;
            pieces *= ratio;
        }
    }

    pub fn piece_width(&self) -> f64 {
        self.width / self.pieces as f64
    }
}

/// Zero-mode bookkeeping of the state vector.
#[derive(Debug, Clone)]
pub struct FixedModes {
    /// Indices of the displacement zero modes (the `w₀` directions).
    pub displacement: Vec<usize>,
    /// Indices of the traction zero modes (the `w̃₀` directions).
    pub traction: Vec<usize>,
}

/// Node states of the periodic corrector, one column per unit macroscopic
/// gradient along each displacement zero mode.
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    /// `η` at the start of every step, in order, each `state × modes`.
    pub nodes: Vec<Array2<f64>>,
    /// Number of blocks in the shooting system actually solved.
    pub blocks: usize,
}

impl PeriodicSolution {
    /// `W̃₀·ξ(0)`: traction zero modes of the initial state, one row per
    /// traction mode and one column per applied gradient.
    pub fn traction_block(&self, modes: &FixedModes) -> Array2<f64> {
        self.nodes[0].select(ndarray::Axis(0), &modes.traction)
    }
}

/// Piece propagators of all slabs in propagation order.
pub fn steps(slabs: &[PropagatedSlab]) -> Vec<&Array2<f64>> {
    slabs
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.step.as_ref(), s.pieces))
        .collect()
}

/// Solves the periodic problem over the ordered `steps`. Consecutive steps
/// are fused while the fused propagator stays below `max_growth` in 1-norm;
/// the states inside each fused block are recovered by forward propagation.
pub fn solve_periodic(
    steps: &[&Array2<f64>],
    modes: &FixedModes,
    period: f64,
    max_growth: f64,
) -> Result<PeriodicSolution> {
    let state = steps
        .first()
        .ok_or_else(|| Error::InvalidCell("no slabs to propagate".into()))?
        .nrows();
    let r = modes.displacement.len();
    if r != modes.traction.len() {
        return Err(Error::Dimension("displacement/traction zero modes differ in count".into()));
    }

    // Greedy fusion into blocks [first step, fused propagator].
    let mut blocks: Vec<(usize, Array2<f64>)> = Vec::new();
    for (i, &e) in steps.iter().enumerate() {
        if let Some((_, prod)) = blocks.last_mut() {
            let fused = e.dot(prod);
            if dense::norm1(&fused.view()) <= max_growth {
                *prod = fused;
                continue;
            }
        }
        blocks.push((i, e.clone()));
    }
    let k = blocks.len();
    let n = k * state;

    let mut keep_col = vec![true; n];
    for &c in &modes.displacement {
        keep_col[c] = false;
    }
    let mut keep_row = vec![true; n];
    for &t in &modes.traction {
        keep_row[(k - 1) * state + t] = false;
    }
    let col_map = compact_index(&keep_col);
    let row_map = compact_index(&keep_row);
    let m = n - r;

    let mut sys = Array2::<f64>::zeros((m, m));
    let mut rhs = Array2::<f64>::zeros((m, r));
    for (j, (_, e)) in blocks.iter().enumerate() {
        let next = (j + 1) % k;
        for a in 0..state {
            let Some(row) = row_map[j * state + a] else { continue };
            if let Some(col) = col_map[next * state + a] {
                sys[[row, col]] += 1.0;
            }
            for b in 0..state {
                if let Some(col) = col_map[j * state + b] {
                    sys[[row, col]] -= e[[a, b]];
                }
            }
        }
    }
    for (q, &c) in modes.displacement.iter().enumerate() {
        if let Some(row) = row_map[(k - 1) * state + c] {
            rhs[[row, q]] = -period;
        }
    }

    let sol = Lu::factor(&sys)
        .map_err(|e| match e {
            Error::Singular { pivot, index } => Error::Truncation(format!(
                "deflated periodic system is singular (pivot {pivot:e} at {index}); degenerate cell or insufficient truncation"
            )),
            other => other,
        })?
        .solve_matrix(&rhs)?;

    let mut nodes = Vec::with_capacity(steps.len());
    for (j, (first, _)) in blocks.iter().enumerate() {
        let mut node = Array2::<f64>::zeros((state, r));
        for a in 0..state {
            if let Some(col) = col_map[j * state + a] {
                node.row_mut(a).assign(&sol.row(col));
            }
        }
        let last = blocks.get(j + 1).map_or(steps.len(), |b| b.0);
        nodes.push(node);
        for step in &steps[*first..last - 1] {
            let next = step.dot(nodes.last().expect("block start pushed"));
            nodes.push(next);
        }
    }
    if nodes.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("periodic corrector".into()));
    }
    Ok(PeriodicSolution { nodes, blocks: k })
}

fn compact_index(keep: &[bool]) -> Vec<Option<usize>> {
    let mut next = 0;
    keep.iter()
        .map(|&k| {
            if k {
                next += 1;
                Some(next - 1)
            } else {
                None
            }
        })
        .collect()
}

/// Ordered product of slab exponentials; the first slab is the rightmost
/// factor.
pub fn ordered_product(slabs: &[PropagatedSlab]) -> Result<Array2<f64>> {
    let n = slabs
        .first()
        .ok_or_else(|| Error::InvalidCell("no slabs to propagate".into()))?
        .generator
        .nrows();
    let mut m = dense::identity::<f64>(n);
    for slab in slabs {
        let full = dense::mat_exp(&slab.generator, slab.width)?;
        m = full.dot(&m);
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow("monodromy product".into()));
        }
    }
    Ok(m)
}

/// Solves the deflated `(M₀ − I)x = T₁w₀` directly on the assembled
/// monodromy matrix. Only accurate while `M₀` is moderately conditioned.
pub fn solve_monodromy_direct(m0: &Array2<f64>, modes: &FixedModes, period: f64) -> Result<Array2<f64>> {
    let n = m0.nrows();
    let r = modes.displacement.len();
    let cols: Vec<usize> = (0..n).filter(|c| !modes.displacement.contains(c)).collect();
    let rows: Vec<usize> = (0..n).filter(|c| !modes.traction.contains(c)).collect();
    let mut k = m0 - &dense::identity::<f64>(n);
    k = k.select(ndarray::Axis(0), &rows).select(ndarray::Axis(1), &cols);
    let mut rhs = Array2::<f64>::zeros((n - r, r));
    for (q, &c) in modes.displacement.iter().enumerate() {
        let row = rows.iter().position(|&x| x == c).expect("displacement row kept");
        rhs[[row, q]] = period;
    }
    let x = Lu::factor(&k)?.solve_matrix(&rhs)?;
    let mut full = Array2::<f64>::zeros((n, r));
    for (i, &c) in cols.iter().enumerate() {
        full.row_mut(c).assign(&x.row(i));
    }
    Ok(full.select(ndarray::Axis(0), &modes.traction))
}

/// `∫` of the state over one piece of `slab`, given its starting state.
pub fn piece_integral(slab: &PropagatedSlab) -> Result<Array2<f64>> {
    dense::exp_integral(&slab.generator, slab.piece_width())
}
