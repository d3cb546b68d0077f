//! Right-hand sides from inline values, a CSV file or a sweep across the
//! fold.

use fold_core::fiber::FoldProblem;
use fold_core::operators::SpectralData;
use fold_core::ApexResult;
use nalgebra::DVector;

use crate::config::{Basis, Loaded, RhsMode, SweepOrigin};
use crate::error::{io_error, CliError};

pub struct RhsBatch {
    pub gs: Vec<DVector<f64>>,
    /// Sweep offsets `ε`, one per `g`, in sweep mode.
    pub epsilons: Option<Vec<f64>>,
}

fn expand(row: &[f64], basis: Basis, spec: &SpectralData, index: usize) -> Result<DVector<f64>, CliError> {
    let n = spec.dim();
    match basis {
        Basis::Grid => {
            if row.len() != n {
                return Err(CliError::Usage(format!(
                    "right-hand side {index} has {} entries, operator dimension is {n}",
                    row.len()
                )));
            }
            Ok(DVector::from_column_slice(row))
        }
        Basis::Eigen => {
            let q = spec.eigenvectors().ok_or_else(|| {
                CliError::Usage("rhs.basis = \"eigen\" needs a symmetric operator".into())
            })?;
            if row.len() > n {
                return Err(CliError::Usage(format!(
                    "right-hand side {index} has {} coefficients, operator dimension is {n}",
                    row.len()
                )));
            }
            Ok(row
                .iter()
                .enumerate()
                .fold(DVector::zeros(n), |acc, (k, c)| acc + q.column(k) * *c))
        }
    }
}

fn read_rows(loaded: &Loaded) -> Result<Vec<Vec<f64>>, CliError> {
    let path = loaded.resolve(loaded.config.rhs.file.as_ref().expect("validated"));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(&path)
        .map_err(|e| io_error(&path, e))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io_error(&path, e))?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|e| {
                    CliError::Usage(format!("{}: row {}: `{field}`: {e}", path.display(), line + 1))
                })
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Right-hand sides that do not need the framed problem.
pub fn fixed_rhs(loaded: &Loaded, spec: &SpectralData) -> Result<Vec<DVector<f64>>, CliError> {
    let cfg = &loaded.config.rhs;
    let rows = match cfg.mode {
        RhsMode::File => read_rows(loaded)?,
        _ => cfg.values.clone(),
    };
    rows.iter()
        .enumerate()
        .map(|(k, row)| expand(row, cfg.basis, spec, k))
        .collect()
}

pub fn build_rhs(loaded: &Loaded, spec: &SpectralData, prob: &FoldProblem) -> Result<RhsBatch, CliError> {
    let cfg = &loaded.config.rhs;
    if cfg.mode != RhsMode::Sweep {
        let gs = fixed_rhs(loaded, spec)?;
        if gs.is_empty() {
            return Err(CliError::Usage("no right-hand sides: set rhs.values or rhs.file".into()));
        }
        return Ok(RhsBatch { gs, epsilons: None });
    }
    let base = match cfg.values.first() {
        Some(row) => expand(row, cfg.basis, spec, 0)?,
        None => DVector::zeros(spec.dim()),
    };
    let frame = prob.frame();
    let z = frame.coords(&base);
    let origin = match cfg.sweep_origin {
        SweepOrigin::Zero => base.clone(),
        SweepOrigin::Apex => match prob.fold_apex(&z)? {
            ApexResult::Apex(a) => frame.lift(&z) + frame.phi() * a.h_max,
            ApexResult::Monotone { .. } => {
                return Err(CliError::Usage(
                    "rhs.sweep_origin = \"apex\" but the fiber height is monotone; use \"zero\"".into(),
                ))
            }
        },
    };
    let m = cfg.sweep_points;
    let epsilons: Vec<f64> = (0..m)
        .map(|k| cfg.sweep_from + (cfg.sweep_to - cfg.sweep_from) * k as f64 / (m - 1) as f64)
        .collect();
    let gs = epsilons.iter().map(|e| &origin + frame.phi() * *e).collect();
    Ok(RhsBatch {
        gs,
        epsilons: Some(epsilons),
    })
}
