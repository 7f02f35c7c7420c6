//! Fixtures shared by the benchmarks.

use mmspeed_core::{ElasticCell, ElasticPhase, Inclusion, MaterialPhase, UnitCell};
use ndarray::Array2;

pub fn steel_in_epoxy(f: f64) -> UnitCell {
    UnitCell::square_rod(MaterialPhase::epoxy(), MaterialPhase::steel(), f).expect("valid fraction")
}

pub fn steel_cube_in_epoxy() -> ElasticCell {
    let epoxy = ElasticPhase::isotropic(1140.0, 4.4e9, 1.48e9).expect("positive definite");
    let steel = ElasticPhase::isotropic(7800.0, 1.15e11, 8.0e10).expect("positive definite");
    ElasticCell::new(
        [1.0, 1.0, 1.0],
        epoxy,
        vec![Inclusion::new([0.25, 0.25, 0.25], [0.5, 0.5, 0.5], steel)],
    )
    .expect("valid cell")
}

/// Deterministic dense matrix with unit-order entries and 1-norm about `dim`.
pub fn test_matrix(dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((dim, dim), |(i, j)| (((i * 7 + j * 13) % 17) as f64 - 8.0) / 8.0)
}
