//! Quasistatic effective sound speed of periodic composites.
//!
//! The core method propagates a Fourier-truncated state across the cell
//! with exact slab exponentials (the monodromy matrix) and reads the
//! effective modulus off the periodic corrector. A plane-wave baseline, a
//! closed-form estimate, a finite-difference oracle and a 3D elastic
//! principal-direction solver share the same cell model.

pub mod cell;
pub mod dense;
pub mod elastic3d;
pub mod error;
pub mod fd_oracle;
pub mod mm;
pub mod pwe;
pub mod shooting;
pub mod spectral;
pub mod tensor;

pub use cell::{Cell, FourierSlab, Inclusion, MaterialPhase, Phase, Profile, Slab, SlabPartition, UnitCell};
pub use elastic3d::{principal_speeds_3d, Elastic3dOptions, ElasticCell, ElasticPhase, ElasticSpeeds};
pub use error::{Error, Result};
pub use mm::{
    closed_form_estimate, effective_tensor, estimate_tensor, monodromy, offdiagonal_m12, principal_speed,
    FactorizationRule, MmOptions, MonodromyMatrix, OffDiagonalPath, PrincipalSpeed, TruncatedGenerator,
};
pub use fd_oracle::{oracle_effective_tensor, oracle_richardson, OracleOptions};
pub use pwe::{pwe_effective_tensor, PweSystem};
pub use tensor::{EffectiveTensor, Method, Truncation};
