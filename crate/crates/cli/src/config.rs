//! Run configuration: TOML file, `FOLD_SECTION__KEY` environment overrides,
//! then command-line flags. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use fold_core::fiber::FiberOptions;
use fold_core::operators::BoundaryCondition;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "FOLD_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub operator: OperatorConfig,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub rhs: RhsConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub fiber: FiberConfig,
    #[serde(default)]
    pub oracle: OracleSection,
}

fn default_seed() -> u64 {
    7
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("fold-out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Laplacian,
    HarmonicOscillator,
    FractionalPower,
    KernelIntegral,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFn {
    /// `exp(-|x - y|)`
    ExpAbs,
    /// `exp(-(x - y)²)`
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    pub n: usize,
    /// Domain length; half-width for the harmonic oscillator.
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_bc")]
    pub bc: BoundaryCondition,
    /// Fractional exponent in `(0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Kernel values on the grid, one row per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_fn: Option<KernelFn>,
    /// Custom operator matrix given inline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Custom operator in the plain-text operator format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

fn default_length() -> f64 {
    PI
}

fn default_bc() -> BoundaryCondition {
    BoundaryCondition::Dirichlet
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    Nemitskii,
    Hybrid,
    Equivariant,
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formula {
    #[serde(alias = "ap-standard")]
    Ap,
    Polynomial,
    #[serde(alias = "custom-table")]
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedGroup {
    /// Grid reflection `x -> L - x`, index reversal without a grid.
    Reflection,
}

/// A named group or its full list of permutations (identity included).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Group {
    Named(NamedGroup),
    Elements(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: PerturbationKind,
    #[serde(default = "default_formula")]
    pub formula: Formula,
    /// Lower slope (AP), or `λ₀` for the affine kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Polynomial coefficients, constant term first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ys: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Group>,
    /// Affine offset; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
}

fn default_formula() -> Formula {
    Formula::Ap
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    Auto,
    Ground,
    Perron,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    #[serde(default = "default_frame_kind")]
    pub kind: FrameKind,
    /// Overrides the shift chosen by the compatibility check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

fn default_frame_kind() -> FrameKind {
    FrameKind::Auto
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            kind: FrameKind::Auto,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsMode {
    Coefficients,
    File,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Grid,
    Eigen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOrigin {
    Apex,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsConfig {
    #[serde(default = "default_rhs_mode")]
    pub mode: RhsMode,
    #[serde(default = "default_basis")]
    pub basis: Basis,
    /// One right-hand side per row; in sweep mode the first row is the base.
    #[serde(default)]
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default = "default_sweep_from")]
    pub sweep_from: f64,
    #[serde(default = "default_sweep_to")]
    pub sweep_to: f64,
    #[serde(default = "default_sweep_points")]
    pub sweep_points: usize,
    #[serde(default = "default_sweep_origin")]
    pub sweep_origin: SweepOrigin,
}

fn default_rhs_mode() -> RhsMode {
    RhsMode::Coefficients
}
fn default_basis() -> Basis {
    Basis::Grid
}
fn default_sweep_from() -> f64 {
    -1.0
}
fn default_sweep_to() -> f64 {
    1.0
}
fn default_sweep_points() -> usize {
    101
}
fn default_sweep_origin() -> SweepOrigin {
    SweepOrigin::Apex
}

impl Default for RhsConfig {
    fn default() -> Self {
        RhsConfig {
            mode: default_rhs_mode(),
            basis: default_basis(),
            values: Vec::new(),
            file: None,
            sweep_from: default_sweep_from(),
            sweep_to: default_sweep_to(),
            sweep_points: default_sweep_points(),
            sweep_origin: default_sweep_origin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Fiber fixed-point tolerance.
    pub fixed_point: f64,
    pub apex: f64,
    /// Relative Newton residual target.
    pub solve: f64,
    /// Relative tangent band around the apex height.
    pub tangent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let fiber = FiberOptions::default();
        let solve = fold_core::solver::SolveOptions::default();
        Tolerances {
            fixed_point: fiber.tol,
            apex: fiber.apex_tol,
            solve: solve.newton.tol_rel,
            tangent: solve.tangent_rel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberConfig {
    /// Number of seeded random fibers.
    pub fibers: usize,
    /// Samples per fiber.
    pub samples: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Fiber coordinates are drawn from `U(-amplitude, amplitude)`.
    pub amplitude: f64,
    /// Add the framing eigenvalue column (one eigensolve per sample).
    pub eigen: bool,
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig {
            fibers: 4,
            samples: 101,
            t_min: -10.0,
            t_max: 10.0,
            amplitude: 1.0,
            eigen: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub starts: usize,
    pub dedup_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_half_width: Option<f64>,
    /// Also rerun with twice the starts and compare.
    pub saturation: bool,
    /// Reuse brute-force results stored under `output_dir/oracle-cache`.
    pub cache: bool,
}

impl Default for OracleSection {
    fn default() -> Self {
        let d = fold_core::oracle::OracleConfig::default();
        OracleSection {
            starts: d.starts,
            dedup_tol: d.dedup_tol,
            box_half_width: None,
            saturation: true,
            cache: true,
        }
    }
}

/// Where the config was read from, for resolving relative paths.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

/// Reads, overrides and validates a config.
pub fn load(path: &Path, env: &[(String, String)], flags: &Overrides) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let config = parse(&text, env, flags).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded { config, base_dir })
}

pub fn parse(text: &str, env: &[(String, String)], flags: &Overrides) -> Result<RunConfig, CliError> {
    // parse the raw text first so schema errors carry line and column
    toml::from_str::<RunConfig>(text).map_err(|e| CliError::Usage(e.to_string().trim_end().to_string()))?;
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
    for (key, value) in env {
        if let Some(rest) = key.strip_prefix(ENV_PREFIX) {
            apply_env(&mut table, rest, value)?;
        }
    }
    if let Some(seed) = flags.seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    if let Some(out) = &flags.output_dir {
        table.insert("output_dir".into(), toml::Value::String(out.display().to_string()));
    }
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("after overrides: {}", e.to_string().trim_end())))?;
    config.validate()?;
    Ok(config)
}

/// `SECTION__KEY` or a bare top-level `KEY`, case-insensitive.
fn apply_env(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), CliError> {
    let parts: Vec<String> = key.split("__").map(|s| s.to_ascii_lowercase()).collect();
    let value = parse_value(raw);
    match parts.as_slice() {
        [k] => {
            table.insert(k.clone(), value);
        }
        [section, k] => {
            let entry = table
                .entry(section.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => {
                    t.insert(k.clone(), value);
                }
                _ => {
                    return Err(CliError::Usage(format!(
                        "environment override {ENV_PREFIX}{key}: `{section}` is not a section"
                    )))
                }
            }
        }
        _ => {
            return Err(CliError::Usage(format!(
                "environment override {ENV_PREFIX}{key}: expected SECTION__KEY"
            )))
        }
    }
    Ok(())
}

/// A TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn usage(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("`{key}`: {msg}"))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let op = &self.operator;
        if op.n == 0 {
            return Err(usage("operator.n", "must be at least 1"));
        }
        if !(op.length > 0.0 && op.length.is_finite()) {
            return Err(usage("operator.length", "must be positive"));
        }
        match op.kind {
            OperatorKind::FractionalPower => match op.s {
                Some(s) if s > 0.0 && s <= 1.0 => {}
                Some(s) => return Err(usage("operator.s", format!("must lie in (0, 1], got {s}"))),
                None => return Err(usage("operator.s", "required for fractional-power")),
            },
            OperatorKind::KernelIntegral => {
                if op.kernel.is_some() == op.kernel_fn.is_some() {
                    return Err(usage("operator.kernel", "give exactly one of kernel and kernel_fn"));
                }
                if let Some(k) = &op.kernel {
                    square(k, op.n, "operator.kernel")?;
                }
            }
            OperatorKind::Custom => {
                if op.matrix.is_some() == op.file.is_some() {
                    return Err(usage("operator.matrix", "give exactly one of matrix and file"));
                }
                if let Some(m) = &op.matrix {
                    square(m, op.n, "operator.matrix")?;
                }
            }
            OperatorKind::Laplacian | OperatorKind::HarmonicOscillator => {}
        }

        let nl = &self.nonlinearity;
        match (nl.kind, nl.formula) {
            (PerturbationKind::Affine, _) => {
                if nl.a.is_none() {
                    return Err(usage("nonlinearity.a", "required (slope λ₀) for the affine kind"));
                }
                if let Some(o) = &nl.offset {
                    if o.len() != op.n {
                        return Err(usage("nonlinearity.offset", format!("length {} != operator.n = {}", o.len(), op.n)));
                    }
                }
            }
            (_, Formula::Ap) => match (nl.a, nl.b) {
                (Some(a), Some(b)) if a < b => {}
                (Some(a), Some(b)) => return Err(usage("nonlinearity.b", format!("need a < b, got a = {a}, b = {b}"))),
                _ => return Err(usage("nonlinearity.a", "AP formula needs both a and b")),
            },
            (_, Formula::Polynomial) => {
                if nl.coeffs.as_ref().is_none_or(|c| c.is_empty()) {
                    return Err(usage("nonlinearity.coeffs", "required for the polynomial formula"));
                }
            }
            (_, Formula::Table) => {
                if nl.xs.is_none() || nl.ys.is_none() {
                    return Err(usage("nonlinearity.xs", "table formula needs xs and ys"));
                }
            }
        }
        match (&nl.group, nl.kind) {
            (None, PerturbationKind::Equivariant) => {
                return Err(usage("nonlinearity.group", "required for the equivariant kind"))
            }
            (Some(Group::Elements(perms)), _) if perms.iter().any(|p| p.len() != op.n) => {
                return Err(usage("nonlinearity.group", format!("every permutation needs length operator.n = {}", op.n)))
            }
            _ => {}
        }
        if let Some(g) = self.frame.gamma {
            if !g.is_finite() {
                return Err(usage("frame.gamma", "must be finite"));
            }
        }

        let r = &self.rhs;
        match r.mode {
            RhsMode::File if r.file.is_none() => return Err(usage("rhs.file", "required in file mode")),
            RhsMode::Sweep => {
                if r.sweep_points < 2 {
                    return Err(usage("rhs.sweep_points", "need at least 2"));
                }
                if !(r.sweep_from < r.sweep_to) {
                    return Err(usage("rhs.sweep_to", "must exceed sweep_from"));
                }
            }
            _ => {}
        }

        let t = &self.tolerances;
        for (key, v) in [
            ("tolerances.fixed_point", t.fixed_point),
            ("tolerances.apex", t.apex),
            ("tolerances.solve", t.solve),
            ("tolerances.tangent", t.tangent),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(usage(key, format!("must lie in (0, 1), got {v}")));
            }
        }
        let f = &self.fiber;
        if f.samples < 2 {
            return Err(usage("fiber.samples", "need at least 2"));
        }
        if !(f.t_min < f.t_max) {
            return Err(usage("fiber.t_max", "must exceed t_min"));
        }
        if !(f.amplitude >= 0.0) {
            return Err(usage("fiber.amplitude", "must be nonnegative"));
        }
        let o = &self.oracle;
        fold_core::oracle::OracleConfig {
            starts: o.starts,
            box_half_width: o.box_half_width,
            seed: self.seed,
            dedup_tol: o.dedup_tol,
        }
        .validate()
        .map_err(|e| CliError::Usage(format!("[oracle] {e}")))?;
        Ok(())
    }

    /// The resolved config, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn square(rows: &[Vec<f64>], n: usize, key: &str) -> Result<(), CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(usage(key, format!("must be {n}x{n}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[operator]
kind = "laplacian"
n = 8

[nonlinearity]
kind = "nemitskii"
a = 0.5
b = 2.0
"#;

    fn parse_plain(text: &str) -> Result<RunConfig, CliError> {
        parse(text, &[], &Overrides::default())
    }

    #[test]
    fn defaults_are_filled() {
        let c = parse_plain(BASE).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.operator.length, PI);
        assert_eq!(c.tolerances, Tolerances::default());
        let resolved = c.to_toml();
        assert!(resolved.contains("fixed_point"), "{resolved}");
        assert_eq!(parse_plain(&resolved).unwrap(), c);
    }

    #[test]
    fn formula_aliases_and_group_lists() {
        let text = BASE.replace("kind = \"nemitskii\"", "kind = \"equivariant\"\nformula = \"ap-standard\"");
        let with_list = format!("{text}group = [[0, 1, 2, 3, 4, 5, 6, 7], [7, 6, 5, 4, 3, 2, 1, 0]]\n");
        let c = parse_plain(&with_list).unwrap();
        assert_eq!(c.nonlinearity.formula, Formula::Ap);
        assert!(matches!(&c.nonlinearity.group, Some(Group::Elements(p)) if p.len() == 2));
        assert_eq!(parse_plain(&c.to_toml()).unwrap(), c);

        let named = parse_plain(&format!("{text}group = \"reflection\"\n")).unwrap();
        assert_eq!(named.nonlinearity.group, Some(Group::Named(NamedGroup::Reflection)));
        assert!(matches!(parse_plain(&format!("{text}group = [[0, 1]]\n")), Err(CliError::Usage(_))));
        assert!(matches!(parse_plain(&text), Err(CliError::Usage(_))));
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = parse_plain(&format!("{BASE}\n[fiber]\nsampels = 3\n")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sampels") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn missing_n_is_a_usage_error() {
        let err = parse_plain(&BASE.replace("n = 8\n", "")).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        assert!(err.to_string().contains("`n`"), "{err}");
    }

    #[test]
    fn environment_and_flags_override() {
        let env = vec![
            ("FOLD_NONLINEARITY__B".to_string(), "5.0".to_string()),
            ("FOLD_FIBER__EIGEN".to_string(), "false".to_string()),
            ("OTHER".to_string(), "1".to_string()),
        ];
        let flags = Overrides {
            seed: Some(11),
            output_dir: Some(PathBuf::from("x")),
        };
        let c = parse(BASE, &env, &flags).unwrap();
        assert_eq!(c.nonlinearity.b, Some(5.0));
        assert!(!c.fiber.eigen);
        assert_eq!(c.seed, 11);
        assert_eq!(c.output_dir, PathBuf::from("x"));
    }

    #[test]
    fn bad_environment_values_are_usage_errors() {
        let env = vec![("FOLD_NONLINEARITY__B".to_string(), "lots".to_string())];
        assert!(matches!(parse(BASE, &env, &Overrides::default()), Err(CliError::Usage(_))));
        let env = vec![("FOLD_SEED__X__Y".to_string(), "1".to_string())];
        assert!(matches!(parse(BASE, &env, &Overrides::default()), Err(CliError::Usage(_))));
    }

    #[test]
    fn validation_examples() {
        for (edit, key) in [
            (BASE.replace("b = 2.0", "b = 0.1"), "nonlinearity.b"),
            (BASE.replace("\"laplacian\"", "\"fractional-power\""), "operator.s"),
            (BASE.replace("\"laplacian\"", "\"custom\""), "operator.matrix"),
            (format!("{BASE}\n[rhs]\nmode = \"file\"\n"), "rhs.file"),
            (format!("{BASE}\n[oracle]\nstarts = 2\n"), "starts"),
        ] {
            let err = parse_plain(&edit).unwrap_err().to_string();
            assert!(err.contains(key), "{key}: {err}");
        }
    }
}
