use mmspeed_core::{
    closed_form_estimate, effective_tensor, estimate_tensor, oracle_effective_tensor, oracle_richardson,
    principal_speed, principal_speeds_3d, pwe_effective_tensor, Elastic3dOptions, EffectiveTensor, ElasticCell,
    FactorizationRule, Inclusion, MaterialPhase, MmOptions, OracleOptions, UnitCell,
};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::time::Instant;

use crate::cellfile::LoadedCell;
use crate::config::{CommandKind, MethodName, RunConfig};
use crate::error::{CliError, Result};

pub const COMPUTE_HEADER: [&str; 10] = [
    "method",
    "truncation",
    "M11",
    "M22",
    "M12",
    "c_k1",
    "c_k2",
    "rho_avg",
    "mu_avg",
    "wall_time_ms",
];
pub const COMPUTE_3D_HEADER: [&str; 8] = ["method", "truncation", "axis", "c1", "c2", "c3", "rho_avg", "wall_time_ms"];
pub const SWEEP_HEADER: [&str; 7] = ["f", "method", "d", "c", "c_reuss", "c_voigt", "note"];
pub const CONVERGENCE_HEADER: [&str; 5] = ["method", "d", "rel_error", "wall_time_ms", "matrix_dim"];

/// CSV text plus the number of requested computations that failed.
#[derive(Debug, Clone, Default)]
pub struct Output {
    pub csv: String,
    pub failures: Vec<String>,
    pub total: usize,
}

impl Output {
    /// Whether the run should exit nonzero. Failed sweep points are rows,
    /// not failures.
    pub fn failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// A single evaluation on a two-dimensional cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Mm(usize),
    Pwe(usize),
    Estimate,
    Oracle(usize),
    OracleExtrapolated(Vec<usize>),
}

impl Task {
    pub fn method(&self) -> MethodName {
        match self {
            Task::Mm(_) => MethodName::Mm,
            Task::Pwe(_) => MethodName::Pwe,
            Task::Estimate => MethodName::Estimate,
            Task::Oracle(_) | Task::OracleExtrapolated(_) => MethodName::Oracle,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Task::Mm(n) => format!("N={n}"),
            Task::Pwe(g) => format!("G={g}"),
            Task::Estimate => "closed-form".into(),
            Task::Oracle(n) => format!("n={n}"),
            Task::OracleExtrapolated(levels) => format!(
                "n={}..{} extrapolated",
                levels.first().copied().unwrap_or(0),
                levels.last().copied().unwrap_or(0)
            ),
        }
    }

    /// Fourier modes per axis, or grid size for the oracle.
    pub fn d(&self) -> Option<usize> {
        match self {
            Task::Mm(n) => Some(2 * n + 1),
            Task::Pwe(g) => Some(2 * g + 1),
            Task::Estimate => None,
            Task::Oracle(n) => Some(*n),
            Task::OracleExtrapolated(l) => l.last().copied(),
        }
    }

    pub fn matrix_dim(&self) -> Option<usize> {
        match self {
            Task::Mm(n) => Some(2 * (2 * n + 1)),
            Task::Pwe(g) => Some((2 * g + 1).pow(2) - 1),
            Task::Oracle(n) => Some(n * n),
            Task::OracleExtrapolated(l) => l.last().map(|n| n * n),
            Task::Estimate => None,
        }
    }

    pub fn tensor(&self, cell: &UnitCell, rule: FactorizationRule) -> mmspeed_core::Result<EffectiveTensor> {
        let opts = OracleOptions::default();
        match self {
            Task::Mm(n) => effective_tensor(cell, &MmOptions::new(*n).with_rule(rule)),
            Task::Pwe(g) => pwe_effective_tensor(cell, *g),
            Task::Estimate => Ok(estimate_tensor(cell)),
            Task::Oracle(n) => oracle_effective_tensor(cell, *n, &opts),
            Task::OracleExtrapolated(levels) => oracle_richardson(cell, levels, &opts),
        }
    }

    /// `c(κ_axis)` alone; mm skips the cross-term solve.
    pub fn speed(&self, cell: &UnitCell, rule: FactorizationRule, axis: usize) -> mmspeed_core::Result<f64> {
        match self {
            Task::Mm(n) => Ok(principal_speed(cell, &MmOptions::new(*n).with_rule(rule), axis)?.c),
            Task::Estimate if axis == 1 => Ok(closed_form_estimate(cell).sqrt()),
            _ => self.tensor(cell, rule)?.speed_axis(axis),
        }
    }
}

fn tasks(cfg: &RunConfig, extrapolate: bool) -> Vec<Task> {
    let mut out = Vec::new();
    for m in &cfg.methods {
        match m {
            MethodName::Mm => out.extend(cfg.n.iter().map(|&n| Task::Mm(n))),
            MethodName::Pwe => out.extend(cfg.g.iter().map(|&g| Task::Pwe(g))),
            MethodName::Estimate => out.push(Task::Estimate),
            MethodName::Oracle => {
                out.extend(cfg.grid.iter().map(|&n| Task::Oracle(n)));
                if extrapolate && cfg.grid.len() > 1 {
                    out.push(Task::OracleExtrapolated(cfg.grid.clone()));
                }
            }
            MethodName::Elastic3d => {}
        }
    }
    out
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))
}

fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e16).contains(&x.abs()) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn ms(secs: f64) -> String {
    format!("{:.3}", secs * 1e3)
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn execute(cfg: &RunConfig) -> Result<Output> {
    match cfg.command {
        CommandKind::Compute => match &cfg.cell {
            Some(LoadedCell::Elastic(cell)) => compute_3d(cfg, cell),
            _ => compute(cfg, false),
        },
        CommandKind::Compare => compute(cfg, true),
        CommandKind::Sweep => sweep(cfg),
        CommandKind::Convergence => convergence(cfg),
    }
}

struct Evaluated {
    task: Task,
    tensor: std::result::Result<EffectiveTensor, String>,
    secs: f64,
}

fn evaluate_all(cfg: &RunConfig, cell: &UnitCell, tasks: Vec<Task>) -> Result<Vec<Evaluated>> {
    let rule = cfg.rule;
    let run = |task: Task| {
        let t = Instant::now();
        let tensor = task.tensor(cell, rule).map_err(|e| e.to_string());
        Evaluated {
            task,
            tensor,
            secs: t.elapsed().as_secs_f64(),
        }
    };
    Ok(pool(cfg.workers)?.install(|| tasks.into_par_iter().map(run).collect()))
}

fn compute(cfg: &RunConfig, compare: bool) -> Result<Output> {
    let cell = cfg.scalar_cell().expect("validated two-dimensional cell");
    let (rho, mu) = cell.averages();
    let results = evaluate_all(cfg, cell, tasks(cfg, true))?;
    let mut out = Output {
        total: results.len(),
        ..Output::default()
    };
    let mut header: Vec<&str> = COMPUTE_HEADER.to_vec();
    let mut reference = None;
    if compare {
        header.extend(["rel_gap_k1", "rel_gap_k2"]);
        let want = cfg.reference.unwrap_or(if cfg.methods.contains(&MethodName::Oracle) {
            MethodName::Oracle
        } else {
            MethodName::Mm
        });
        // The finest truncation of the reference method.
        let r = results
            .iter()
            .rev()
            .find(|e| e.task.method() == want)
            .ok_or_else(|| CliError::Config(format!("reference method {} is not selected", want.as_str())))?;
        let t = r
            .tensor
            .as_ref()
            .map_err(|e| CliError::Config(format!("reference {} {} failed: {e}", want.as_str(), r.task.label())))?;
        reference = Some([t.speed_axis(1)?, t.speed_axis(2)?]);
    }
    let mut w = writer();
    w.write_record(&header)?;
    for e in &results {
        let method = e.task.method().as_str();
        match &e.tensor {
            Ok(t) => {
                let speeds = [t.speed_axis(1), t.speed_axis(2)];
                let mut row = vec![
                    method.to_string(),
                    e.task.label(),
                    num(t.m11),
                    num(t.m22),
                    opt(t.m12),
                    opt(speeds[0].as_ref().ok().copied()),
                    opt(speeds[1].as_ref().ok().copied()),
                    num(rho),
                    num(mu),
                    ms(e.secs),
                ];
                for (axis, s) in speeds.iter().enumerate() {
                    if let Err(err) = s {
                        out.failures.push(format!("{method} {} axis {}: {err}", e.task.label(), axis + 1));
                    }
                }
                if let Some(r) = reference {
                    for (s, r) in speeds.iter().zip(r) {
                        row.push(opt(s.as_ref().ok().map(|c| (c - r).abs() / r)));
                    }
                }
                w.write_record(&row)?;
            }
            Err(err) => out.failures.push(format!("{method} {}: {err}", e.task.label())),
        }
    }
    out.csv = finish(w)?;
    Ok(out)
}

fn compute_3d(cfg: &RunConfig, cell: &ElasticCell) -> Result<Output> {
    let mut opts = Elastic3dOptions::new(cfg.n2, cfg.n3);
    opts.rule = cfg.rule;
    let label = format!("N2={} N3={}", cfg.n2, cfg.n3);
    let run = |axis: usize| {
        let t = Instant::now();
        let r = principal_speeds_3d(cell, &opts, axis);
        (axis, r, t.elapsed().as_secs_f64())
    };
    let results: Vec<_> = pool(cfg.workers)?.install(|| (1..=3).into_par_iter().map(run).collect());
    let mut out = Output {
        total: 3,
        ..Output::default()
    };
    let mut w = writer();
    w.write_record(COMPUTE_3D_HEADER)?;
    for (axis, r, secs) in results {
        match r {
            Ok(s) => w.write_record([
                "elastic3d".to_string(),
                label.clone(),
                axis.to_string(),
                num(s.speeds[0]),
                num(s.speeds[1]),
                num(s.speeds[2]),
                num(s.mean_rho),
                ms(secs),
            ])?,
            Err(e) => out.failures.push(format!("elastic3d {label} axis {axis}: {e}")),
        }
    }
    out.csv = finish(w)?;
    Ok(out)
}

/// Centred rod of side `√f·Tᵢ`. Sides within `1e-12·Tᵢ` of the period are
/// clamped to fill the cell.
pub fn rod_cell(periods: [f64; 2], matrix: MaterialPhase, rod: MaterialPhase, f: f64) -> Result<(UnitCell, String)> {
    if !(0.0..=1.0).contains(&f) {
        return Err(CliError::Config(format!("fraction {f} outside [0, 1]")));
    }
    let s = f.sqrt();
    let mut note = String::new();
    let mut corner = [0.0; 2];
    let mut size = [0.0; 2];
    for k in 0..2 {
        let t = periods[k];
        let side = s * t;
        if side >= t * (1.0 - 1e-12) {
            size[k] = t;
            note = "rod fills cell; clamped".into();
        } else {
            size[k] = side;
            corner[k] = 0.5 * (t - side);
        }
    }
    let incs = if f == 0.0 {
        note = "no rod".into();
        vec![]
    } else {
        vec![Inclusion::new(corner, size, rod)]
    };
    Ok((UnitCell::new(periods, matrix, incs)?, note))
}

struct SweepRow {
    f: f64,
    method: &'static str,
    d: Option<usize>,
    c: Option<f64>,
    bounds: (f64, f64),
    note: String,
}

fn sweep(cfg: &RunConfig) -> Result<Output> {
    let (periods, matrix, rod) = cfg.sweep_family()?;
    let cells = cfg
        .fractions
        .iter()
        .map(|&f| rod_cell(periods, matrix, rod, f).map(|(c, n)| (f, c, n)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Task)> = (0..cells.len())
        .flat_map(|i| tasks(cfg, false).into_iter().map(move |t| (i, t)))
        .collect();
    let (rule, axis) = (cfg.rule, cfg.axis);
    let run = |(i, task): (usize, Task)| {
        let (f, cell, note) = &cells[i];
        let r = task.speed(cell, rule, axis);
        let mut note = note.clone();
        if let Err(e) = &r {
            if !note.is_empty() {
                note.push_str("; ");
            }
            note.push_str(&format!("error: {e}"));
        }
        SweepRow {
            f: *f,
            method: task.method().as_str(),
            d: task.d(),
            c: r.ok(),
            bounds: cell.speed_bounds(),
            note,
        }
    };
    let mut rows: Vec<SweepRow> = pool(cfg.workers)?.install(|| jobs.into_par_iter().map(run).collect());
    rows.sort_by(|a, b| {
        a.f.partial_cmp(&b.f)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.method.cmp(b.method))
            .then_with(|| a.d.cmp(&b.d))
    });
    let mut w = writer();
    w.write_record(SWEEP_HEADER)?;
    for r in &rows {
        w.write_record([
            num(r.f),
            r.method.to_string(),
            r.d.map(|d| d.to_string()).unwrap_or_default(),
            opt(r.c),
            num(r.bounds.0),
            num(r.bounds.1),
            r.note.clone(),
        ])?;
    }
    Ok(Output {
        csv: finish(w)?,
        failures: vec![],
        total: rows.len(),
    })
}

/// Errors at or below this are rounding noise and excluded from fits.
pub const ROUNDING_FLOOR: f64 = 1e-14;

/// Least-squares slope of `−ln(error)` per unit `d`; `None` with fewer than
/// two errors above [`ROUNDING_FLOOR`].
pub fn decay_exponent(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > ROUNDING_FLOOR && e.is_finite())
        .map(|&(d, e)| (d as f64, e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (den > 0.0).then(|| -num / den)
}

fn convergence(cfg: &RunConfig) -> Result<Output> {
    let cell = cfg.scalar_cell().expect("validated two-dimensional cell");
    let (rule, axis) = (cfg.rule, cfg.axis);
    for m in &cfg.methods {
        if matches!(m, MethodName::Estimate | MethodName::Elastic3d) {
            return Err(CliError::Config(format!("{} has no truncation to converge", m.as_str())));
        }
    }
    let reference_task = if cfg.methods.contains(&MethodName::Oracle) {
        if cfg.grid.len() > 1 {
            Task::OracleExtrapolated(cfg.grid.clone())
        } else {
            Task::Oracle(cfg.grid[0])
        }
    } else {
        let n = cfg.reference_n.unwrap_or(2 * cfg.n.iter().copied().max().unwrap_or(8));
        Task::Mm(n)
    };
    let reference = reference_task
        .speed(cell, rule, axis)
        .map_err(|e| CliError::Config(format!("reference {} {} failed: {e}", reference_task.method().as_str(), reference_task.label())))?;

    let jobs: Vec<Task> = tasks(cfg, false).into_iter().filter(|t| t.method() != MethodName::Oracle).collect();
    let run = |task: Task| {
        let t = Instant::now();
        let r = task.speed(cell, rule, axis);
        (task, r, t.elapsed().as_secs_f64())
    };
    let results: Vec<_> = pool(cfg.workers)?.install(|| jobs.into_par_iter().map(run).collect());
    let mut out = Output {
        total: results.len(),
        ..Output::default()
    };
    let mut w = writer();
    w.write_record(CONVERGENCE_HEADER)?;
    let mut series: Vec<(&'static str, Vec<(usize, f64)>)> = Vec::new();
    for (task, r, secs) in &results {
        let method = task.method().as_str();
        match r {
            Ok(c) => {
                let err = (c - reference).abs() / reference;
                let d = task.d().expect("truncated method");
                w.write_record([
                    method.to_string(),
                    d.to_string(),
                    num(err),
                    ms(*secs),
                    task.matrix_dim().expect("truncated method").to_string(),
                ])?;
                match series.iter_mut().find(|(m, _)| *m == method) {
                    Some((_, s)) => s.push((d, err)),
                    None => series.push((method, vec![(d, err)])),
                }
            }
            Err(e) => out.failures.push(format!("{method} {}: {e}", task.label())),
        }
    }
    let mut csv = finish(w)?;
    csv.push_str(&format!(
        "# reference,{} {},{}\n",
        reference_task.method().as_str(),
        reference_task.label(),
        num(reference)
    ));
    for (m, s) in &series {
        let e = decay_exponent(s).map(num).unwrap_or_else(|| "none".into());
        csv.push_str(&format!("# decay_exponent,{m},{e}\n"));
    }
    out.csv = csv;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rod_geometry_and_guards() {
        let (ep, st) = (MaterialPhase::epoxy(), MaterialPhase::steel());
        let (cell, note) = rod_cell([1.0, 2.0], ep, st, 0.25).unwrap();
        let inc = &cell.inclusions()[0];
        assert_eq!(inc.corner, [0.25, 0.5]);
        assert_eq!(inc.size, [0.5, 1.0]);
        assert!(note.is_empty());
        assert!((cell.inclusion_fraction() - 0.25).abs() < 1e-15);

        let (full, note) = rod_cell([1.0, 1.0], ep, st, 1.0 - 1e-13).unwrap();
        assert_eq!(full.inclusions()[0].size, [1.0, 1.0]);
        assert!(note.contains("clamped"));
        let (empty, note) = rod_cell([1.0, 1.0], ep, st, 0.0).unwrap();
        assert!(empty.inclusions().is_empty() && note == "no rod");
    }

    #[test]
    fn decay_fit() {
        let pts: Vec<(usize, f64)> = [3, 5, 9, 17].iter().map(|&d| (d, (-0.5 * d as f64).exp())).collect();
        assert!((decay_exponent(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(decay_exponent(&[(3, 0.0), (5, 0.0)]), None);
    }

    #[test]
    fn task_dimensions() {
        assert_eq!(Task::Mm(8).matrix_dim(), Some(34));
        assert_eq!(Task::Pwe(4).matrix_dim(), Some(80));
        assert_eq!(Task::Pwe(4).d(), Some(9));
        assert_eq!(Task::Estimate.d(), None);
    }
}
