//! Plain-text operator format and eigendata CSV.
//!
//! ```text
//! # fold-operator v1
//! kind = laplacian-dirichlet
//! n = 3
//! symmetric = true
//! grid.bc = dirichlet
//! grid.length = 3.141592653589793
//! grid.spacing = 0.7853981633974483
//! grid.origin = 0
//! ---
//! 3.2422778766... -1.6211389383... 0
//! ...
//! ```
//!
//! Header lines are `key = value`; `grid.*` keys are absent for operators
//! without a grid. The body holds one matrix row per line, entries separated
//! by whitespace, printed with round-trip precision.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::grid::{BoundaryCondition, Grid};
use super::spectral::SpectralData;
use super::{Operator, OperatorKind};
use crate::error::{FoldError, Result};

pub const MAGIC: &str = "# fold-operator v1";

pub fn write_operator(op: &Operator) -> String {
    let mut out = String::new();
    let n = op.dim();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "kind = {}", op.kind().as_str());
    let _ = writeln!(out, "n = {n}");
    let _ = writeln!(out, "symmetric = {}", op.is_symmetric());
    if let Some(g) = op.grid() {
        let _ = writeln!(out, "grid.bc = {}", g.bc.as_str());
        let _ = writeln!(out, "grid.length = {:?}", g.length);
        let _ = writeln!(out, "grid.spacing = {:?}", g.spacing);
        let _ = writeln!(out, "grid.origin = {:?}", g.origin);
    }
    let _ = writeln!(out, "---");
    let m = op.matrix();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:?}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn read_operator(text: &str) -> Result<Operator> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(FoldError::Parse(format!("line 1: expected `{MAGIC}`"))),
    }
    let mut header = BTreeMap::new();
    let mut saw_separator = false;
    for (i, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "---" {
            saw_separator = true;
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FoldError::Parse(format!("line {}: expected `key = value`", i + 1)))?;
        header.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
    }
    if !saw_separator {
        return Err(FoldError::Parse("missing `---` separator".into()));
    }

    let get = |key: &str| -> Result<&(usize, String)> {
        header
            .get(key)
            .ok_or_else(|| FoldError::Parse(format!("missing header key `{key}`")))
    };
    let num = |key: &str| -> Result<f64> {
        let (line, v) = get(key)?;
        v.parse()
            .map_err(|_| FoldError::Parse(format!("line {line}: `{key}` is not a number")))
    };

    let (line, n_text) = get("n")?;
    let n: usize = n_text
        .parse()
        .map_err(|_| FoldError::Parse(format!("line {line}: `n` is not an integer")))?;
    let kind: OperatorKind = get("kind")?.1.parse()?;
    for key in header.keys() {
        let known = matches!(
            key.as_str(),
            "kind" | "n" | "symmetric" | "grid.bc" | "grid.length" | "grid.spacing" | "grid.origin"
        );
        if !known {
            return Err(FoldError::Parse(format!("unknown header key `{key}`")));
        }
    }

    let grid = if header.contains_key("grid.bc") {
        let bc: BoundaryCondition = get("grid.bc")?.1.parse()?;
        let grid = Grid {
            n,
            length: num("grid.length")?,
            spacing: num("grid.spacing")?,
            bc,
            origin: num("grid.origin")?,
        };
        if !(grid.spacing > 0.0 && grid.length > 0.0) {
            return Err(FoldError::Parse("grid spacing and length must be positive".into()));
        }
        Some(grid)
    } else {
        None
    };

    let mut entries = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rows += 1;
        let before = entries.len();
        for tok in line.split_whitespace() {
            let x: f64 = tok
                .parse()
                .map_err(|_| FoldError::Parse(format!("line {}: bad entry `{tok}`", i + 1)))?;
            entries.push(x);
        }
        if entries.len() - before != n {
            return Err(FoldError::Parse(format!(
                "line {}: expected {n} entries, got {}",
                i + 1,
                entries.len() - before
            )));
        }
    }
    if rows != n {
        return Err(FoldError::Dimension {
            expected: n,
            got: rows,
        });
    }
    Operator::from_parts(DMatrix::from_row_slice(n, n, &entries), grid, kind)
}

/// CSV with header `index,eigenvalue,residual`. Complex eigenvalues add an
/// `imag` column.
pub fn eigen_csv(spec: &SpectralData) -> String {
    let complex = spec.eigenvalues().iter().any(|z| z.im != 0.0);
    let mut out = String::from(if complex {
        "index,eigenvalue,imag,residual\n"
    } else {
        "index,eigenvalue,residual\n"
    });
    for (k, z) in spec.eigenvalues().iter().enumerate() {
        let residual = if spec.is_symmetric() {
            spec.residuals()[k]
        } else {
            f64::NAN
        };
        let residual = if residual.is_nan() {
            String::new()
        } else {
            format!("{residual:e}")
        };
        if complex {
            let _ = writeln!(out, "{k},{:?},{:?},{residual}", z.re, z.im);
        } else {
            let _ = writeln!(out, "{k},{:?},{residual}", z.re);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_harmonic_oscillator, build_laplacian_1d, spectral_decompose};

    #[test]
    fn round_trip_is_exact() {
        for op in [
            build_laplacian_1d(5, std::f64::consts::PI, BoundaryCondition::Neumann).unwrap(),
            build_harmonic_oscillator(7, 5.0).unwrap(),
            Operator::custom(DMatrix::from_row_slice(2, 2, &[0.1, -2.5e-17, 3.0, 1e300])).unwrap(),
        ] {
            let text = write_operator(&op);
            let back = read_operator(&text).unwrap();
            assert_eq!(back, op);
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_operator("nope").is_err());
        let short = "# fold-operator v1\nkind = custom\nn = 2\n---\n1 2\n";
        assert!(matches!(read_operator(short), Err(FoldError::Dimension { .. })));
        let extra = "# fold-operator v1\nkind = custom\nn = 1\nfoo = 1\n---\n1\n";
        assert!(read_operator(extra).unwrap_err().to_string().contains("foo"));
        let ragged = "# fold-operator v1\nkind = custom\nn = 2\n---\n1 2\n3\n";
        assert!(read_operator(ragged).is_err());
    }

    #[test]
    fn eigen_csv_lists_every_eigenvalue() {
        let op = build_laplacian_1d(4, 1.0, BoundaryCondition::Dirichlet).unwrap();
        let csv = eigen_csv(&spectral_decompose(&op).unwrap());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "index,eigenvalue,residual");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,"));
    }
}
