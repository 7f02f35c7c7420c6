//! TOML cell descriptions.
//!
//! ```toml
//! [cell]
//! periods = [1.0, 1.0]        # two or three entries
//! dimension = 2               # optional, must match `periods`
//!
//! [background]
//! material = "epoxy"          # or rho = ..., mu = ...
//!
//! [[inclusion]]
//! corner = [0.25, 0.25]
//! size = [0.5, 0.5]
//! rho = 7800.0
//! mu = 8.0e10
//! ```
//!
//! Three-dimensional phases take `rho` with either `lambda` and `mu`
//! (isotropic) or a 6×6 Voigt stiffness `c`.

use mmspeed_core::{ElasticCell, ElasticPhase, Inclusion, MaterialPhase, UnitCell};
use serde::Deserialize;
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellFile {
    pub cell: CellSection,
    pub background: PhaseSpec,
    #[serde(default, rename = "inclusion")]
    pub inclusions: Vec<InclusionSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    pub periods: Vec<f64>,
    pub dimension: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub material: Option<String>,
    pub rho: Option<f64>,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub c: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionSpec {
    pub corner: Vec<f64>,
    pub size: Vec<f64>,
    pub material: Option<String>,
    pub rho: Option<f64>,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub c: Option<Vec<Vec<f64>>>,
}

impl InclusionSpec {
    fn phase(&self) -> PhaseSpec {
        PhaseSpec {
            material: self.material.clone(),
            rho: self.rho,
            mu: self.mu,
            lambda: self.lambda,
            c: self.c.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum LoadedCell {
    Scalar(UnitCell),
    Elastic(ElasticCell),
}

impl LoadedCell {
    pub fn dimension(&self) -> usize {
        match self {
            LoadedCell::Scalar(_) => 2,
            LoadedCell::Elastic(_) => 3,
        }
    }
}

impl PhaseSpec {
    fn scalar(&self) -> std::result::Result<MaterialPhase, String> {
        if self.lambda.is_some() || self.c.is_some() {
            return Err("`lambda` and `c` are only valid in three-dimensional cells".into());
        }
        match (&self.material, self.rho, self.mu) {
            (Some(name), None, None) => named(name),
            (None, Some(rho), Some(mu)) => MaterialPhase::new(rho, mu).map_err(|e| e.to_string()),
            (Some(_), _, _) => Err("give either `material` or `rho` and `mu`, not both".into()),
            _ => Err("a phase needs `rho` and `mu` (or `material`)".into()),
        }
    }

    fn elastic(&self) -> std::result::Result<ElasticPhase, String> {
        if self.material.is_some() {
            return Err("named materials are only defined for two-dimensional cells".into());
        }
        let rho = self.rho.ok_or("a phase needs `rho`")?;
        let phase = match (self.lambda, self.mu, &self.c) {
            (Some(l), Some(m), None) => ElasticPhase::isotropic(rho, l, m),
            (None, None, Some(rows)) => {
                if rows.len() != 6 || rows.iter().any(|r| r.len() != 6) {
                    return Err("`c` must be a 6×6 array".into());
                }
                ElasticPhase::new(rho, std::array::from_fn(|i| std::array::from_fn(|j| rows[i][j])))
            }
            _ => return Err("a three-dimensional phase needs `lambda` and `mu`, or `c`".into()),
        };
        phase.map_err(|e| e.to_string())
    }
}

fn named(name: &str) -> std::result::Result<MaterialPhase, String> {
    match name.to_ascii_lowercase().as_str() {
        "steel" => Ok(MaterialPhase::steel()),
        "epoxy" => Ok(MaterialPhase::epoxy()),
        other => Err(format!("unknown material '{other}' (known: steel, epoxy)")),
    }
}

fn array<const D: usize>(v: &[f64], what: &str) -> std::result::Result<[f64; D], String> {
    <[f64; D]>::try_from(v).map_err(|_| format!("`{what}` needs {D} entries, got {}", v.len()))
}

impl CellFile {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn build(&self) -> std::result::Result<LoadedCell, String> {
        let dim = self.cell.periods.len();
        if let Some(d) = self.cell.dimension {
            if d != dim {
                return Err(format!("dimension = {d} but {dim} periods given"));
            }
        }
        match dim {
            2 => {
                let bg = self.background.scalar().map_err(|e| format!("[background]: {e}"))?;
                let incs = self
                    .inclusions
                    .iter()
                    .enumerate()
                    .map(|(k, inc)| {
                        let at = |e: String| format!("inclusion {}: {e}", k + 1);
                        Ok(Inclusion::new(
                            array(&inc.corner, "corner").map_err(at)?,
                            array(&inc.size, "size").map_err(at)?,
                            inc.phase().scalar().map_err(at)?,
                        ))
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()?;
                let periods = array(&self.cell.periods, "periods")?;
                UnitCell::new(periods, bg, incs).map(LoadedCell::Scalar).map_err(|e| e.to_string())
            }
            3 => {
                let bg = self.background.elastic().map_err(|e| format!("[background]: {e}"))?;
                let incs = self
                    .inclusions
                    .iter()
                    .enumerate()
                    .map(|(k, inc)| {
                        let at = |e: String| format!("inclusion {}: {e}", k + 1);
                        Ok(Inclusion::new(
                            array(&inc.corner, "corner").map_err(at)?,
                            array(&inc.size, "size").map_err(at)?,
                            inc.phase().elastic().map_err(at)?,
                        ))
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()?;
                let periods = array(&self.cell.periods, "periods")?;
                ElasticCell::new(periods, bg, incs).map(LoadedCell::Elastic).map_err(|e| e.to_string())
            }
            _ => Err(format!("cells have 2 or 3 periods, got {dim}")),
        }
    }
}

pub fn load(path: &Path) -> Result<LoadedCell> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    let err = |message| CliError::CellFile {
        path: path.to_owned(),
        message,
    };
    CellFile::parse(&text).map_err(err)?.build().map_err(err)
}
