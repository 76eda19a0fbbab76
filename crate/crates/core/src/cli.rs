//! Command-line front end: argument types, command handlers and the exit-code mapping.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::equilib::Maxwellian;
use crate::error::{Error, Result};
use crate::fitlab::{self, Manifest};
use crate::hypotheses::{self, HypothesisId};
use crate::model::{EnergyModel, KernelModel, MixtureSpec, Psi, Species};
use crate::operator::{assemble_k1, k2_integrability_diagnostic, K1Grid};
use crate::relax::{self, RelaxFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ARGS: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "polykin", version, about = "Polyatomic Boltzmann collision models and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check kernel hypotheses for given (delta, zeta)
    Check(CheckArgs),
    /// Integrability (k2) or K1 matrix diagnostics
    Diag(DiagArgs),
    /// Particle relaxation run from a JSON config
    Relax(RelaxArgs),
    /// Fit delta and zeta from a data manifest
    Fit(FitArgs),
    /// Fit the bundled reference datasets and report hypothesis verdicts
    Table1(Table1Args),
}

#[derive(Debug, clap::Args)]
pub struct CheckArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub delta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub zeta: f64,
    /// Comma-separated hypothesis ids, e.g. H2,H3
    #[arg(long, value_delimiter = ',', default_value = "H2,H3")]
    pub hyp: Vec<String>,
    /// Use the extended H2 range zeta <= delta + 1
    #[arg(long)]
    pub extended: bool,
    /// Second species' delta for H6/H7 (defaults to --delta)
    #[arg(long, allow_hyphen_values = true)]
    pub delta2: Option<f64>,
    /// Resonant kinematic exponent for H4
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub zeta1: f64,
    /// Resonant internal exponent for H4
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub zeta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiagKind {
    K2,
    K1norm,
}

#[derive(Debug, clap::Args)]
pub struct DiagArgs {
    #[arg(long, value_enum)]
    pub kind: DiagKind,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub zeta: f64,
    /// Velocity nodes per axis for k1norm
    #[arg(long, default_value_t = 6)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct RelaxArgs {
    /// JSON run configuration
    pub config: PathBuf,
    /// Overrides relax.t_end
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Overrides relax.seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Report CSV path
    #[arg(long, default_value = "fit_report.csv")]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct Table1Args {
    /// Report CSV path
    #[arg(long, default_value = "table1.csv")]
    pub out: PathBuf,
    /// Also write the bundled datasets and their manifest to this directory
    #[arg(long)]
    pub export_dir: Option<PathBuf>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::MajorantViolation { .. } => EXIT_NUMERIC,
        _ => EXIT_ARGS,
    }
}

/// Writes `contents` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("--{name} must be finite")))
    }
}

fn to_line<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string(v)?)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Check(a) => cmd_check(&a, out),
        Command::Diag(a) => cmd_diag(&a, out),
        Command::Relax(a) => cmd_relax(&a, out),
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Table1(a) => cmd_table1(&a, out),
    }
}

/// One JSON verdict per line, in the requested order.
pub fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Result<()> {
    for (n, x) in [("delta", a.delta), ("zeta", a.zeta), ("zeta1", a.zeta1), ("zeta2", a.zeta2)] {
        finite(n, x)?;
    }
    let ids: Vec<HypothesisId> = a.hyp.iter().map(|h| h.parse()).collect::<Result<_>>()?;
    let mut lines = Vec::new();
    for id in ids {
        let value = match id {
            HypothesisId::H2 => to_line(&hypotheses::check_h2(a.delta, a.zeta, a.extended)?)?,
            HypothesisId::H4 => to_line(&hypotheses::check_resonant(a.delta, a.zeta, a.zeta1, a.zeta2)?)?,
            HypothesisId::H6 | HypothesisId::H7 => {
                let d2 = a.delta2.unwrap_or(a.delta);
                finite("delta2", d2)?;
                let pairs = hypotheses::check_mixture(&[a.delta, d2], &[vec![a.zeta; 2], vec![a.zeta; 2]], id)?;
                let satisfied = pairs.iter().all(|p| p.verdict.satisfied);
                to_line(&json!({ "hypothesis": id, "satisfied": satisfied, "pairs": pairs }))?
            }
            _ => to_line(&hypotheses::check_single(a.delta, a.zeta, id, None)?)?,
        };
        lines.push(value);
    }
    for l in lines {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

fn single_species(delta: f64, zeta: f64) -> MixtureSpec {
    MixtureSpec::single(
        Species::new("A", 1.0, EnergyModel::continuous(delta)),
        KernelModel::power_law(1.0, zeta),
    )
}

/// Writes the diagnostic CSV and prints a JSON summary.
pub fn cmd_diag(a: &DiagArgs, out: &mut dyn Write) -> Result<()> {
    finite("delta", a.delta)?;
    finite("zeta", a.zeta)?;
    let header = format!("# seed={}\n", a.seed);
    let summary = match a.kind {
        DiagKind::K2 => {
            let d = k2_integrability_diagnostic(a.delta, a.zeta, &Psi::Unit)?;
            let path = a.out.clone().unwrap_or_else(|| PathBuf::from("k2_diag.csv"));
            write_atomic(&path, &(header + &d.to_csv()))?;
            json!({
                "kind": "k2",
                "delta": a.delta,
                "zeta": a.zeta,
                "seed": a.seed,
                "verdict": d.verdict,
                "final_partial": d.partial_integrals.last(),
                "last_change": d.last_change,
                "numeric_integrable": d.numeric_integrable,
                "analytic_integrable": d.analytic_integrable,
                "inconsistent": d.inconsistent,
                "exponents": d.exponents,
                "csv": path,
            })
        }
        DiagKind::K1norm => {
            if a.grid < 2 {
                return Err(Error::invalid("--grid must be at least 2"));
            }
            let spec = single_species(a.delta, a.zeta);
            spec.ensure_valid()?;
            let m = Maxwellian::single(spec, 1.0, 1.0)?;
            let grid = K1Grid::new(a.grid, (2 * a.grid).div_ceil(3));
            let k = assemble_k1(&grid, &m)?;
            let path = a.out.clone().unwrap_or_else(|| PathBuf::from("k1_norms.csv"));
            write_atomic(&path, &(header + &k.to_csv()))?;
            json!({
                "kind": "k1norm",
                "delta": a.delta,
                "zeta": a.zeta,
                "seed": a.seed,
                "grid": grid,
                "nodes": k.len(),
                "hs_norm": k.hs_norm(),
                "symmetry_defect": k.symmetry_defect(),
                "csv": path,
            })
        }
    };
    writeln!(out, "{}", to_line(&summary)?)?;
    Ok(())
}

/// Runs a relaxation; writes `timeseries.csv` and `summary.json` under `out_dir`.
pub fn cmd_relax(a: &RelaxArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)?;
    let mut file: RelaxFile = serde_json::from_str(&text)?;
    if let Some(t) = a.t_end {
        file.relax.t_end = t;
    }
    if let Some(s) = a.seed {
        file.relax.seed = s;
    }
    let result = relax::run(&file.model, &file.init, &file.relax)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let csv = a.out_dir.join("timeseries.csv");
    let json_path = a.out_dir.join("summary.json");
    write_atomic(&csv, &result.series.to_csv())?;
    let summary = serde_json::to_string_pretty(&result.summary)?;
    write_atomic(&json_path, &summary)?;
    writeln!(out, "{}", to_line(&result.summary)?)?;
    Ok(())
}

fn fit_summary(rows: &[fitlab::ReportRow], csv: &Path) -> Value {
    json!({
        "rows": rows.iter().map(|r| json!({
            "gas": r.gas,
            "pressure_bar": r.pressure_bar,
            "delta_fit": r.delta_fit,
            "zeta_fit": r.zeta_fit,
            "delta_diff": r.delta_diff(),
            "zeta_diff": r.zeta_diff(),
            "polytropic": r.polytropic,
            "warnings": r.warnings,
        })).collect::<Vec<_>>(),
        "csv": csv,
    })
}

pub fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&a.manifest)?;
    let manifest = Manifest::from_json(&text)?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let rows = manifest
        .load(base)?
        .iter()
        .map(fitlab::fit_dataset)
        .collect::<Result<Vec<_>>>()?;
    write_atomic(&a.out, &fitlab::report_csv(&rows))?;
    writeln!(out, "{}", to_line(&fit_summary(&rows, &a.out))?)?;
    Ok(())
}

pub fn cmd_table1(a: &Table1Args, out: &mut dyn Write) -> Result<()> {
    if let Some(dir) = &a.export_dir {
        fitlab::write_bundled(dir)?;
    }
    let rows = fitlab::reproduce_table1(&fitlab::bundled_datasets())?;
    write_atomic(&a.out, &fitlab::report_csv(&rows))?;
    let mut summary = fit_summary(&rows, &a.out);
    let verdicts: Vec<Value> = rows
        .iter()
        .map(|r| -> Result<Value> {
            let h2 = hypotheses::check_h2(r.delta_fit, r.zeta_fit, false)?;
            let h3 = hypotheses::check_h3(r.delta_fit, r.zeta_fit, &Psi::Unit)?;
            Ok(json!({
                "gas": r.gas,
                "pressure_bar": r.pressure_bar,
                "H2": h2.satisfied,
                "H3": h3.satisfied,
                "H3_binding": h3.binding_condition,
            }))
        })
        .collect::<Result<_>>()?;
    summary["verdicts"] = Value::Array(verdicts);
    writeln!(out, "{}", to_line(&summary)?)?;
    Ok(())
}

/// Caps the rayon pool from `POLYKIN_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("POLYKIN_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("POLYKIN_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::invalid("POLYKIN_THREADS must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    Ok(())
}
