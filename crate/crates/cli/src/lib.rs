//! Command-line front end: `circle`, `kernel` and `validate`.
//!
//! Settings come from a JSON [`RunConfig`] (`--config`, or `ibkernel.json`
//! in the working directory when present); command-line flags override it.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ibkernel::experiments::{run_circle_case_with, validate_moments, CircleCaseConfig};
use ibkernel::format::{error_table_csv, weights_csv, WeightDump};
use ibkernel::kernel::build_basis;
use ibkernel::linalg::norm_inf;
use ibkernel::qpsolve::solve_peskin4;
use ibkernel::{
    BasisDegree, DataSites, Error, EvalPoint, KernelBounds, KernelSource, KernelStrategy,
    KernelWeights, SolveMode, ToleranceSet, WeightKind,
};
use serde::Deserialize;

pub const DEFAULT_CONFIG: &str = "ibkernel.json";
pub const DEFAULT_VALIDATE_TOLERANCE: f64 = 1e-10;

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulationArg {
    Standard,
    BackusGilbert,
    Peskin4,
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKernelArg {
    Psi6,
    Peskin4,
}

impl From<WeightKernelArg> for WeightKind {
    fn from(w: WeightKernelArg) -> Self {
        match w {
            WeightKernelArg::Psi6 => WeightKind::SixPointSpline,
            WeightKernelArg::Peskin4 => WeightKind::FourPointPeskin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Constant,
    Linear,
}

impl From<BasisArg> for BasisDegree {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Constant => BasisDegree::ConstantOnly,
            BasisArg::Linear => BasisDegree::Linear,
        }
    }
}

/// JSON configuration. Every field is optional; missing circle-study fields
/// take the standard values for the selected case.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub extents: Option<Vec<(f64, f64)>>,
    pub h: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub marker_angles_deg: Option<Vec<f64>>,
    pub case: Option<u8>,
    pub bounds: Option<KernelBounds>,
    pub field: Option<(f64, f64)>,
    pub formulation: Option<FormulationArg>,
    pub weight_kernel: Option<WeightKernelArg>,
    pub basis_degree: Option<BasisDegree>,
    pub tolerances: ToleranceSet,
    pub validate_tolerance: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))
    }

    /// Reads `path` if given, else `ibkernel.json` in the working directory
    /// if it exists, else the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None => {
                let p = PathBuf::from(DEFAULT_CONFIG);
                if !p.exists() {
                    return Ok(Self::default());
                }
                p
            }
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Circle-study configuration for `case`, with file values layered over
    /// the standard setup.
    pub fn circle_config(&self, case: u8) -> Result<CircleCaseConfig, CliError> {
        let mut c = CircleCaseConfig::preset(case).map_err(CliError::from)?;
        if let Some(v) = &self.extents {
            c.extents = v.clone();
        }
        if let Some(v) = self.h {
            c.h = v;
        }
        if let Some(v) = &self.center {
            c.center = v.clone();
        }
        if let Some(v) = self.radius {
            c.radius = v;
        }
        if let Some(v) = &self.marker_angles_deg {
            c.marker_angles_deg = v.clone();
        }
        if self.bounds.is_some() {
            c.bounds = self.bounds;
        }
        if let Some(v) = self.field {
            c.field = v;
        }
        c.validate().map_err(CliError::from)?;
        Ok(c)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ibkernel",
    version,
    about = "Immersed-boundary kernel generation"
)]
pub struct Cli {
    /// JSON configuration file [default: ./ibkernel.json if present]
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interpolate a linear field to markers on a circle (cases 1 to 4).
    Circle(CircleArgs),
    /// Generate kernel weights at one evaluation point.
    Kernel(KernelArgs),
    /// Check the moment conditions of a weights file.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct CircleArgs {
    #[arg(long)]
    pub case: Option<u8>,
    #[arg(long)]
    pub h: Option<f64>,
    /// Weight bounds as `alpha,beta`
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    pub bounds: Option<KernelBounds>,
    /// Error-table CSV [default: circle_case<N>_errors.csv]
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Weights CSV [default: circle_case<N>_weights.csv]
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub formulation: Option<FormulationArg>,
    /// Evaluation point, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eval: Option<Vec<f64>>,
    /// Four-point kernel only: fractional offset per axis, comma separated
    #[arg(long, value_delimiter = ',')]
    pub shift: Option<Vec<f64>>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, value_enum)]
    pub weight_kernel: Option<WeightKernelArg>,
    #[arg(long, value_enum)]
    pub basis: Option<BasisArg>,
    /// One-sided only: weight bounds as `alpha,beta`
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    pub bounds: Option<KernelBounds>,
    /// Output JSON file [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

fn parse_bounds(s: &str) -> Result<KernelBounds, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected alpha,beta".into());
    }
    let a: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    KernelBounds::new(a, b).map_err(|e| e.to_string())
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_)
            | Error::DegenerateDomain(_)
            | Error::LengthMismatch { .. }
            | Error::StencilOutsideDomain { .. } => EXIT_CONFIG,
            _ => EXIT_SOLVER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::config(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn execute(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Circle(args) => cmd_circle(&config, args, out),
        Command::Kernel(args) => cmd_kernel(&config, args, out),
        Command::Validate(args) => cmd_validate(&config, args, out),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::config(format!("output: {e}"))
}

pub fn cmd_circle(
    config: &RunConfig,
    args: CircleArgs,
    out: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let case = args
        .case
        .or(config.case)
        .ok_or_else(|| CliError::config("circle needs --case or a `case` entry in the config"))?;
    let mut layered = config.clone();
    if args.h.is_some() {
        layered.h = args.h;
    }
    if args.bounds.is_some() {
        layered.bounds = args.bounds;
    }
    let circle = layered.circle_config(case)?;
    let run = run_circle_case_with(&circle, &config.tolerances)?;

    let table = error_table_csv(&run.table);
    let weights = weights_csv(&run);
    let table_path = args
        .table
        .unwrap_or_else(|| PathBuf::from(format!("circle_case{case}_errors.csv")));
    let weights_path = args
        .weights
        .unwrap_or_else(|| PathBuf::from(format!("circle_case{case}_weights.csv")));
    write_atomic(&table_path, &table)?;
    write_atomic(&weights_path, &weights)?;

    out.write_all(table.as_bytes()).map_err(io_err)?;
    for row in &run.table.rows {
        if let (Some(feasible), Some(violation)) = (row.phase1_feasible, row.phase1_violation) {
            writeln!(
                out,
                "# marker {}: phase-1 {} (violation {violation:.3e}), mode {}",
                row.marker_deg,
                if feasible { "feasible" } else { "infeasible" },
                row.mode
            )
            .map_err(io_err)?;
        }
    }
    if let Some(b) = circle.bounds.filter(|_| case >= 3) {
        let (lo, hi) = run.table.psi_range();
        writeln!(
            out,
            "# bounds [{}, {}]: psi range [{lo:.6e}, {hi:.6e}]",
            b.alpha(),
            b.beta()
        )
        .map_err(io_err)?;
    }
    let soft = run
        .table
        .rows
        .iter()
        .filter(|r| r.mode == SolveMode::SoftConstraint)
        .count();
    if soft > 0 {
        writeln!(out, "# SoftConstraint mode used for {soft} marker(s)").map_err(io_err)?;
    }
    Ok(())
}

/// Four-point weights for a bare shift, laid out on the nodes
/// `eval + offset·h` (eval defaults to the origin).
fn peskin_from_shift(
    shift: &[f64],
    eval: Option<Vec<f64>>,
    h: f64,
) -> Result<WeightDump, CliError> {
    let p = solve_peskin4(shift)?;
    let eval = EvalPoint::new(eval.unwrap_or_else(|| vec![0.0; shift.len()]))?;
    if eval.dim() != shift.len() {
        return Err(CliError::config(
            "--eval and --shift need the same dimension",
        ));
    }
    let mut sites: Vec<Vec<f64>> = vec![Vec::new()];
    for (axis, &s) in shift.iter().enumerate() {
        let offs = ibkernel::Peskin4Weights::offsets(s);
        sites = offs
            .iter()
            .flat_map(|o| {
                let x = eval.coords()[axis] + o * h;
                sites.iter().map(move |prefix| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    let basis = build_basis(eval.dim(), BasisDegree::Linear)?;
    let k = KernelWeights::new(
        p.tensor_weights(),
        DataSites::new(sites)?,
        eval,
        basis,
        KernelSource::ProblemC,
        SolveMode::Exact,
    )?;
    Ok(WeightDump::from_kernel(&k).with_peskin(&p))
}

pub fn cmd_kernel(
    config: &RunConfig,
    args: KernelArgs,
    out: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let formulation = args
        .formulation
        .or(config.formulation)
        .unwrap_or(FormulationArg::Standard);
    let h = args.h.or(config.h).unwrap_or(0.075);
    if args.shift.is_some() && formulation != FormulationArg::Peskin4 {
        return Err(CliError::config(
            "--shift applies to the peskin4 formulation only",
        ));
    }

    let dump = if let Some(shift) = &args.shift {
        peskin_from_shift(shift, args.eval.clone(), h)?
    } else {
        let eval =
            EvalPoint::new(args.eval.clone().ok_or_else(|| {
                CliError::config("kernel needs --eval (or --shift for peskin4)")
            })?)?;
        let circle = {
            let mut c = config.clone();
            c.h = Some(h);
            c.circle_config(config.case.unwrap_or(1))?
        };
        let extents = if eval.dim() == circle.extents.len() {
            circle.extents.clone()
        } else {
            vec![(-1.0, 1.0); eval.dim()]
        };
        let grid = ibkernel::ibops::make_grid(&extents, h)?;
        let bounds = args.bounds.or(config.bounds);
        let mut strategy = match formulation {
            FormulationArg::Standard => KernelStrategy::standard(),
            FormulationArg::BackusGilbert => KernelStrategy::backus_gilbert(),
            FormulationArg::Peskin4 => KernelStrategy::peskin4(),
            FormulationArg::OneSided => {
                let sd: Arc<dyn ibkernel::SignedDistance> = Arc::new(circle.circle()?);
                KernelStrategy::one_sided(Some(sd), bounds)
            }
        };
        if let Some(w) = args.weight_kernel.or(config.weight_kernel) {
            strategy.weight = w.into();
        }
        if let Some(b) = args.basis.map(BasisDegree::from).or(config.basis_degree) {
            strategy.basis = b;
        }
        strategy.tolerances = config.tolerances;
        let k = strategy.kernel_at(&grid, &eval)?;
        let dump = WeightDump::from_kernel(&k.weights);
        if formulation == FormulationArg::Peskin4 {
            let (_, shift) = ibkernel::ibops::peskin4_stencil(&grid, &eval)?;
            dump.with_peskin(&solve_peskin4(&shift)?)
        } else {
            dump
        }
    };

    let json = dump.to_json();
    match &args.out {
        Some(p) => {
            write_atomic(p, &json)?;
            let psi: Vec<String> = dump.psi.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "psi = [{}]", psi.join(", ")).map_err(io_err)?;
        }
        None => out.write_all(json.as_bytes()).map_err(io_err)?,
    }
    Ok(())
}

pub fn cmd_validate(
    config: &RunConfig,
    args: ValidateArgs,
    out: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let tolerance = args
        .tolerance
        .or(config.validate_tolerance)
        .unwrap_or(DEFAULT_VALIDATE_TOLERANCE);
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| CliError::config(format!("{}: {e}", args.file.display())))?;
    let dump = WeightDump::from_json(&text)?;
    let kernel = dump
        .to_kernel()
        .map_err(|e| CliError::config(format!("weights file: {e}")))?;
    let residuals = validate_moments(&kernel, kernel.basis())?;

    let mut worst = norm_inf(&residuals);
    for (j, r) in residuals.iter().enumerate() {
        writeln!(out, "moment {j}: {r:.3e}").map_err(io_err)?;
    }
    if let Some(p) = dump.peskin()? {
        let pr = p.postulate_residuals();
        let lines = [
            ("even sum", norm_inf(&pr.even_sum)),
            ("odd sum", norm_inf(&pr.odd_sum)),
            ("first moment", norm_inf(&pr.first_moment)),
            ("sum of squares", norm_inf(&pr.sum_of_squares)),
            ("tensor sum of squares", pr.tensor_sum_of_squares.abs()),
        ];
        for (name, v) in lines {
            writeln!(out, "{name}: {v:.3e}").map_err(io_err)?;
        }
        worst = worst.max(pr.max());
    }
    writeln!(out, "max residual {worst:.3e} (tolerance {tolerance:.1e})").map_err(io_err)?;
    if worst <= tolerance {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "residual {worst:.3e} exceeds tolerance {tolerance:.1e}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(RunConfig::from_json(r#"{"h": 0.1}"#).is_ok());
        let e = RunConfig::from_json(r#"{"grid_size": 0.1}"#).unwrap_err();
        assert_eq!(e.code, EXIT_CONFIG);
    }

    #[test]
    fn config_layers_over_standard_setup() {
        let c = RunConfig::from_json(r#"{"radius": 0.4, "formulation": "backus-gilbert", "tolerances": {"soft_penalty": 1e6}}"#)
            .unwrap();
        assert_eq!(c.formulation, Some(FormulationArg::BackusGilbert));
        assert_eq!(c.tolerances.soft_penalty, 1e6);
        let circle = c.circle_config(3).unwrap();
        assert_eq!(circle.radius, 0.4);
        assert_eq!(circle.h, 0.075);
        assert_eq!(circle.bounds, Some(KernelBounds::new(-0.07, 0.5).unwrap()));
    }

    #[test]
    fn bounds_parser() {
        let b = parse_bounds("-0.07,0.5").unwrap();
        assert_eq!((b.alpha(), b.beta()), (-0.07, 0.5));
        assert!(parse_bounds("1,0").is_err());
        assert!(parse_bounds("1").is_err());
    }

    #[test]
    fn solver_errors_map_to_exit_3() {
        assert_eq!(
            CliError::from(Error::MaxIterations { iterations: 3 }).code,
            EXIT_SOLVER
        );
        assert_eq!(
            CliError::from(Error::InvalidInput("x".into())).code,
            EXIT_CONFIG
        );
    }

    #[test]
    fn shift_kernel_matches_closed_form() {
        let d = peskin_from_shift(&[0.5], None, 1.0).unwrap();
        let r = 2.0_f64.sqrt();
        let expected = [
            (2.0 - r) / 8.0,
            (2.0 + r) / 8.0,
            (2.0 + r) / 8.0,
            (2.0 - r) / 8.0,
        ];
        for (a, b) in d.psi.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(d.eq_residual < 1e-15);
    }
}
