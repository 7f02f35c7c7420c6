use clap::{Args, Parser, Subcommand, ValueEnum};
use mmspeed_core::{FactorizationRule, MaterialPhase, UnitCell};
use std::path::PathBuf;
use std::str::FromStr;

use crate::cellfile::{self, LoadedCell};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "mmspeed", version, about = "Quasistatic effective shear speeds of periodic composites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// One CSV row per method and truncation on a single cell.
    Compute(RunArgs),
    /// Centred square rods of side √f·T over a range of f.
    Sweep(RunArgs),
    /// Relative error against a reference versus truncation size.
    Convergence(RunArgs),
    /// Like compute, with relative gaps to a reference method.
    Compare(RunArgs),
}

impl Command {
    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Compute(a) | Command::Sweep(a) | Command::Convergence(a) | Command::Compare(a) => a,
        }
    }

    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Compute(_) => CommandKind::Compute,
            Command::Sweep(_) => CommandKind::Sweep,
            Command::Convergence(_) => CommandKind::Convergence,
            Command::Compare(_) => CommandKind::Compare,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Compute,
    Sweep,
    Convergence,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum MethodName {
    Mm,
    Pwe,
    Estimate,
    Oracle,
    Elastic3d,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Mm => "mm",
            MethodName::Pwe => "pwe",
            MethodName::Estimate => "estimate",
            MethodName::Oracle => "oracle",
            MethodName::Elastic3d => "elastic3d",
        }
    }
}

/// `start:stop:steps`, inclusive, `steps ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FRange {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl FRange {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| if k + 1 == self.steps { self.stop } else { self.start + h * k as f64 })
            .collect()
    }
}

impl FromStr for FRange {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected start:stop:steps, got '{s}'"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
        let (start, stop) = (num(a)?, num(b)?);
        let steps: usize = n.trim().parse().map_err(|e| format!("'{n}': {e}"))?;
        if steps == 0 {
            return Err("steps must be at least 1".into());
        }
        for f in [start, stop] {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("fraction {f} outside [0, 1]"));
            }
        }
        Ok(Self { start, stop, steps })
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML cell description.
    #[arg(long)]
    pub cell: Option<PathBuf>,

    #[arg(long, value_enum, value_delimiter = ',', default_value = "mm")]
    pub methods: Vec<MethodName>,

    /// Fourier half-widths for mm (comma separated).
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<usize>,

    /// Plane-wave cutoffs for pwe.
    #[arg(long = "G", value_delimiter = ',')]
    pub g: Vec<usize>,

    /// Oracle grid sizes; several doubling levels add an extrapolated row.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<usize>,

    /// Fourier half-width along x₂ for elastic3d.
    #[arg(long = "N2", default_value_t = 2)]
    pub n2: usize,

    /// Fourier half-width along x₃ for elastic3d.
    #[arg(long = "N3", default_value_t = 2)]
    pub n3: usize,

    /// Sweep fractions as start:stop:steps.
    #[arg(long = "f-range", default_value = "0:1:21")]
    pub f_range: FRange,

    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Fourier factorization of the inverse modulus: direct, laurent or full-inverse.
    #[arg(long = "inverse-rule", default_value = "full-inverse")]
    pub inverse_rule: FactorizationRule,

    #[arg(long, default_value_t = 1)]
    pub workers: usize,

    /// Sweep with matrix and rod phases exchanged.
    #[arg(long)]
    pub swap: bool,

    /// Propagation axis (1 or 2) for the speed reported by sweep and convergence.
    #[arg(long, default_value_t = 1)]
    pub axis: usize,

    /// Reference method for compare.
    #[arg(long, value_enum)]
    pub reference: Option<MethodName>,

    /// Half-width of the mm reference in convergence (default twice the largest N).
    #[arg(long = "reference-N")]
    pub reference_n: Option<usize>,
}

/// Validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub cell: Option<LoadedCell>,
    pub methods: Vec<MethodName>,
    pub n: Vec<usize>,
    pub g: Vec<usize>,
    pub grid: Vec<usize>,
    pub n2: usize,
    pub n3: usize,
    pub fractions: Vec<f64>,
    pub out: Option<PathBuf>,
    pub rule: FactorizationRule,
    pub workers: usize,
    pub swap: bool,
    pub axis: usize,
    pub reference: Option<MethodName>,
    pub reference_n: Option<usize>,
}

fn or_default(v: &[usize], default: &[usize]) -> Vec<usize> {
    let mut v = if v.is_empty() { default.to_vec() } else { v.to_vec() };
    v.sort_unstable();
    v.dedup();
    v
}

impl RunConfig {
    pub fn from_command(cmd: &Command) -> Result<Self> {
        let a = cmd.args();
        let kind = cmd.kind();
        let mut methods = a.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.is_empty() {
            return Err(CliError::Config("at least one method must be selected".into()));
        }
        if a.workers == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        if !(a.axis == 1 || a.axis == 2) {
            return Err(CliError::Config(format!("--axis must be 1 or 2, got {}", a.axis)));
        }
        let cell = a.cell.as_deref().map(cellfile::load).transpose()?;
        let (n_def, g_def, grid_def): (&[usize], &[usize], &[usize]) = match kind {
            CommandKind::Convergence => (&[1, 2, 4, 8], &[4, 8, 16], &[256, 512, 1024]),
            _ => (&[8], &[16], &[256]),
        };
        let grid = or_default(&a.grid, grid_def);
        if grid.windows(2).any(|w| w[1] != 2 * w[0]) && grid.len() > 1 && methods.contains(&MethodName::Oracle) {
            return Err(CliError::Config("oracle grid levels must double".into()));
        }
        let cfg = Self {
            command: kind,
            cell,
            methods,
            n: or_default(&a.n, n_def),
            g: or_default(&a.g, g_def),
            grid,
            n2: a.n2,
            n3: a.n3,
            fractions: a.f_range.values(),
            out: a.out.clone(),
            rule: a.inverse_rule,
            workers: a.workers,
            swap: a.swap,
            axis: a.axis,
            reference: a.reference,
            reference_n: a.reference_n,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.cell.as_ref().map(|c| c.dimension());
        let has_3d = self.methods.contains(&MethodName::Elastic3d);
        match (self.command, dim) {
            (CommandKind::Sweep, Some(3)) => Err(CliError::Config("sweep needs a two-dimensional cell".into())),
            (CommandKind::Sweep, _) if has_3d => Err(CliError::Config("elastic3d has no sweep".into())),
            (CommandKind::Sweep, _) => Ok(()),
            (_, None) => Err(CliError::Config("--cell is required".into())),
            (CommandKind::Compute, Some(3)) if self.methods != [MethodName::Elastic3d] => Err(CliError::Config(
                "three-dimensional cells support only --methods elastic3d".into(),
            )),
            (CommandKind::Convergence | CommandKind::Compare, Some(3)) => Err(CliError::Config(
                "convergence and compare need a two-dimensional cell".into(),
            )),
            (_, Some(2)) if has_3d => Err(CliError::Config("elastic3d needs a three-dimensional cell".into())),
            _ => Ok(()),
        }
    }

    pub fn scalar_cell(&self) -> Option<&UnitCell> {
        match &self.cell {
            Some(LoadedCell::Scalar(c)) => Some(c),
            _ => None,
        }
    }

    /// Periods and the `(matrix, rod)` phases for sweeps.
    pub fn sweep_family(&self) -> Result<([f64; 2], MaterialPhase, MaterialPhase)> {
        let (periods, matrix, rod) = match self.scalar_cell() {
            Some(cell) => {
                let rod = cell
                    .inclusions()
                    .first()
                    .ok_or_else(|| CliError::Config("sweep takes the rod phase from the first inclusion".into()))?
                    .phase;
                (cell.periods(), *cell.background(), rod)
            }
            None => ([1.0, 1.0], MaterialPhase::epoxy(), MaterialPhase::steel()),
        };
        Ok(if self.swap { (periods, rod, matrix) } else { (periods, matrix, rod) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_range_parsing() {
        let r: FRange = "0:1:5".parse().unwrap();
        assert_eq!(r.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!("0.3:0.9:1".parse::<FRange>().unwrap().values(), vec![0.3]);
        assert!("0:1:0".parse::<FRange>().is_err());
        assert!("0:1.5:3".parse::<FRange>().is_err());
        assert!("0:1".parse::<FRange>().is_err());
    }

    #[test]
    fn defaults_follow_the_command() {
        let cli = Cli::parse_from(["mmspeed", "sweep", "--methods", "mm,pwe"]);
        let cfg = RunConfig::from_command(&cli.command).unwrap();
        assert_eq!(cfg.n, vec![8]);
        assert_eq!(cfg.fractions.len(), 21);
        assert_eq!(cfg.rule, FactorizationRule::FullInverse);

        let cli = Cli::parse_from(["mmspeed", "sweep", "--inverse-rule", "laurent", "--N", "4,1,4"]);
        let cfg = RunConfig::from_command(&cli.command).unwrap();
        assert_eq!(cfg.rule, FactorizationRule::Laurent);
        assert_eq!(cfg.n, vec![1, 4]);
    }

    #[test]
    fn compute_requires_a_cell() {
        let cli = Cli::parse_from(["mmspeed", "compute"]);
        assert!(matches!(RunConfig::from_command(&cli.command), Err(CliError::Config(_))));
    }
}
