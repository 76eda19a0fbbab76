//! Extraction of δ from specific-heat data and ζ from viscosity data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::hypotheses::{GasRecord, REFERENCE_GASES};

/// Relative spread of ĉ_v below which a gas counts as polytropic.
pub const POLYTROPIC_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSeries {
    pub temperature: Vec<f64>,
    /// Dimensionless specific heat `c_v / (k_B / m)`.
    pub c_hat_v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViscositySeries {
    pub temperature: Vec<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Only set for specific-heat fits.
    pub polytropic: Option<bool>,
    pub max_relative_change: Option<f64>,
    /// Root-mean-square residual (log-log residual for viscosity fits).
    pub residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub value: f64,
    /// 95% confidence half-width; 0 when the data leave no degrees of freedom.
    pub half_width: f64,
    pub diagnostics: FitDiagnostics,
}

fn check_temperatures(t: &[f64], other: usize) -> Result<()> {
    if t.len() != other {
        return Err(Error::invalid(format!("{} temperatures but {} values", t.len(), other)));
    }
    if t.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 rows, got {}", t.len())));
    }
    if t.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::domain("temperatures must be positive and finite"));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("temperatures must be strictly increasing"));
    }
    Ok(())
}

fn t975(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

impl CvSeries {
    pub fn new(temperature: Vec<f64>, c_hat_v: Vec<f64>) -> Result<Self> {
        check_temperatures(&temperature, c_hat_v.len())?;
        if c_hat_v.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::domain("c_hat_v must be positive and finite"));
        }
        Ok(CvSeries { temperature, c_hat_v })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.temperature[0], *self.temperature.last().expect("nonempty"))
    }
}

impl ViscositySeries {
    pub fn new(temperature: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        check_temperatures(&temperature, mu.len())?;
        if mu.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::domain("viscosities must be positive and finite"));
        }
        Ok(ViscositySeries { temperature, mu })
    }
}

/// `δ = 2 mean(ĉ_v) - 3`, with a polytropic flag from the relative spread `(max - min) / min`.
pub fn fit_delta(series: &CvSeries) -> Result<FitResult> {
    let c = &series.c_hat_v;
    if c.is_empty() {
        return Err(Error::invalid("empty specific-heat series"));
    }
    let n = c.len() as f64;
    // offset by the first value so a constant series gives its value exactly
    let c0 = c[0];
    let mean = c0 + c.iter().map(|x| x - c0).sum::<f64>() / n;
    let delta = 2.0 * mean - 3.0;
    let min = c.iter().copied().fold(f64::INFINITY, f64::min);
    let max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (max - min) / min;
    let ss: f64 = c.iter().map(|x| (x - mean).powi(2)).sum();
    let rms = (ss / n).sqrt();
    let half_width = if c.len() > 1 {
        2.0 * t975(c.len() - 1) * (ss / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    let polytropic = spread <= POLYTROPIC_TOLERANCE;
    let mut warnings = Vec::new();
    if delta <= 0.0 {
        warnings.push(format!("delta = {delta} is at or below the monatomic boundary"));
    }
    if !polytropic {
        warnings.push(format!("relative c_v change {spread:.4} exceeds {POLYTROPIC_TOLERANCE}"));
    }
    Ok(FitResult {
        value: delta,
        half_width,
        diagnostics: FitDiagnostics {
            polytropic: Some(polytropic),
            max_relative_change: Some(spread),
            residual: rms,
            warnings,
        },
    })
}

/// Least-squares slope `s` of `log μ` against `log T`; `ζ = 2(1 - s)`.
pub fn fit_zeta(series: &ViscositySeries) -> Result<FitResult> {
    let x: Vec<f64> = series.temperature.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = series.mu.iter().map(|m| m.ln()).collect();
    let n = x.len() as f64;
    if x.len() < 2 {
        return Err(Error::invalid("need at least 2 viscosity rows"));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::domain("degenerate viscosity series: all temperatures equal"));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let mut warnings = Vec::new();
    let half_width = if x.len() > 2 {
        let se = (sse / (n - 2.0) / sxx).sqrt();
        2.0 * t975(x.len() - 2) * se
    } else {
        warnings.push("two rows: no confidence estimate".to_string());
        0.0
    };
    let zeta = 2.0 * (1.0 - slope);
    if !(zeta > -1.0) {
        warnings.push(format!("zeta = {zeta} is outside the kernel range zeta > -1"));
    }
    Ok(FitResult {
        value: zeta,
        half_width,
        diagnostics: FitDiagnostics {
            polytropic: None,
            max_relative_change: None,
            residual: (sse / n).sqrt(),
            warnings,
        },
    })
}

/// Viscosity at 300 K used to scale the synthetic series, in Pa s.
fn mu_300(gas: &str) -> f64 {
    match gas {
        "N2" => 1.78e-5,
        "O2" => 2.06e-5,
        "CO" => 1.77e-5,
        "H2" => 0.89e-5,
        _ => 1e-5,
    }
}

/// Exact polytropic, power-law series on `points` evenly spaced temperatures.
pub fn synthetic_series(
    interval: (f64, f64),
    delta: f64,
    zeta: f64,
    mu_ref: f64,
    points: usize,
) -> Result<(CvSeries, ViscositySeries)> {
    if points < 2 {
        return Err(Error::invalid("need at least 2 points"));
    }
    let (a, b) = interval;
    let t: Vec<f64> = (0..points)
        .map(|k| a + (b - a) * k as f64 / (points - 1) as f64)
        .collect();
    let s = 1.0 - zeta / 2.0;
    let cv = vec![(delta + 3.0) / 2.0; points];
    let mu = t.iter().map(|&x| mu_ref * (x / 300.0).powf(s)).collect();
    Ok((CvSeries::new(t.clone(), cv)?, ViscositySeries::new(t, mu)?))
}

/// Synthetic series generated from a reference gas record at one of its pressures.
pub fn reference_dataset(record: &GasRecord, pressure_bar: f64) -> Result<Dataset> {
    let &(p, delta, zeta) = record
        .values
        .iter()
        .find(|v| v.0 == pressure_bar)
        .ok_or_else(|| Error::invalid(format!("no {} entry at {pressure_bar} bar", record.gas)))?;
    let (cv, viscosity) = synthetic_series(record.interval, delta, zeta, mu_300(record.gas), 31)?;
    Ok(Dataset {
        gas: record.gas.to_string(),
        pressure_bar: p,
        cv,
        viscosity,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub gas: String,
    pub pressure_bar: f64,
    pub cv: CvSeries,
    pub viscosity: ViscositySeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub temperature: String,
    pub viscosity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub gas: String,
    pub pressure_bar: f64,
    /// CSV with header `T,c_hat_v`, relative to the manifest.
    pub cv: PathBuf,
    /// CSV with header `T,mu`, relative to the manifest.
    pub viscosity: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub units: Units,
    pub datasets: Vec<ManifestEntry>,
}

fn read_two_columns(path: &Path, header: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let head: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::invalid(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::trim)
        .collect();
    if head != header {
        return Err(Error::invalid(format!(
            "{}: expected header {}, got {}",
            path.display(),
            header.join(","),
            head.join(",")
        )));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::invalid(format!("{}: bad number {s:?} in row {}", path.display(), k + 1)))
        };
        if cols.len() != 2 {
            return Err(Error::invalid(format!("{}: row {} has {} columns", path.display(), k + 1, cols.len())));
        }
        a.push(parse(cols[0])?);
        b.push(parse(cols[1])?);
    }
    Ok((a, b))
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.datasets.is_empty() {
            return Err(Error::invalid("manifest lists no datasets"));
        }
        Ok(m)
    }

    /// Reads every dataset, resolving paths against `base`.
    pub fn load(&self, base: &Path) -> Result<Vec<Dataset>> {
        self.datasets
            .iter()
            .map(|e| {
                let (t, c) = read_two_columns(&base.join(&e.cv), ["T", "c_hat_v"])?;
                let (tm, mu) = read_two_columns(&base.join(&e.viscosity), ["T", "mu"])?;
                Ok(Dataset {
                    gas: e.gas.clone(),
                    pressure_bar: e.pressure_bar,
                    cv: CvSeries::new(t, c)?,
                    viscosity: ViscositySeries::new(tm, mu)?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub gas: String,
    pub pressure_bar: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub delta_fit: f64,
    pub delta_half_width: f64,
    pub zeta_fit: f64,
    pub zeta_half_width: f64,
    pub polytropic: bool,
    pub delta_ref: Option<f64>,
    pub zeta_ref: Option<f64>,
    pub zeta_chapman_cowling: Option<f64>,
    pub warnings: Vec<String>,
}

impl ReportRow {
    pub fn delta_diff(&self) -> Option<f64> {
        self.delta_ref.map(|r| self.delta_fit - r)
    }

    pub fn zeta_diff(&self) -> Option<f64> {
        self.zeta_ref.map(|r| self.zeta_fit - r)
    }

    pub fn zeta_cc_diff(&self) -> Option<f64> {
        self.zeta_chapman_cowling.map(|r| self.zeta_fit - r)
    }
}

fn reference_for(gas: &str, pressure_bar: f64) -> Option<(f64, f64, f64)> {
    let g = REFERENCE_GASES.iter().find(|g| g.gas.eq_ignore_ascii_case(gas))?;
    let &(_, d, z) = g.values.iter().find(|v| (v.0 - pressure_bar).abs() < 1e-9)?;
    Some((d, z, g.zeta_chapman_cowling))
}

/// Fits one dataset and attaches reference values when the gas and pressure are known.
pub fn fit_dataset(d: &Dataset) -> Result<ReportRow> {
    let delta = fit_delta(&d.cv)?;
    let zeta = fit_zeta(&d.viscosity)?;
    let reference = reference_for(&d.gas, d.pressure_bar);
    let (t_min, t_max) = d.cv.interval();
    let mut warnings = delta.diagnostics.warnings.clone();
    warnings.extend(zeta.diagnostics.warnings.iter().cloned());
    Ok(ReportRow {
        gas: d.gas.clone(),
        pressure_bar: d.pressure_bar,
        t_min,
        t_max,
        delta_fit: delta.value,
        delta_half_width: delta.half_width,
        zeta_fit: zeta.value,
        zeta_half_width: zeta.half_width,
        polytropic: delta.diagnostics.polytropic.unwrap_or(false),
        delta_ref: reference.map(|r| r.0),
        zeta_ref: reference.map(|r| r.1),
        zeta_chapman_cowling: reference.map(|r| r.2),
        warnings,
    })
}

/// Fits every reference gas at both pressures. `datasets` must cover all eight entries.
pub fn reproduce_table1(datasets: &[Dataset]) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for g in &REFERENCE_GASES {
        for &(p, _, _) in &g.values {
            let d = datasets
                .iter()
                .find(|d| d.gas.eq_ignore_ascii_case(g.gas) && (d.pressure_bar - p).abs() < 1e-9)
                .ok_or_else(|| Error::invalid(format!("dataset missing {} at {p} bar", g.gas)))?;
            rows.push(fit_dataset(d)?);
        }
    }
    Ok(rows)
}

/// The eight bundled synthetic datasets.
pub fn bundled_datasets() -> Vec<Dataset> {
    REFERENCE_GASES
        .iter()
        .flat_map(|g| g.values.iter().map(move |v| reference_dataset(g, v.0).expect("reference entry")))
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "gas,pressure_bar,T_min,T_max,delta_fit,delta_half_width,zeta_fit,zeta_half_width,polytropic,\
         delta_ref,zeta_ref,zeta_chapman_cowling,delta_diff,zeta_diff,zeta_cc_diff\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.gas,
            r.pressure_bar,
            r.t_min,
            r.t_max,
            r.delta_fit,
            r.delta_half_width,
            r.zeta_fit,
            r.zeta_half_width,
            r.polytropic,
            opt(r.delta_ref),
            opt(r.zeta_ref),
            opt(r.zeta_chapman_cowling),
            opt(r.delta_diff()),
            opt(r.zeta_diff()),
            opt(r.zeta_cc_diff()),
        );
    }
    out
}

/// Writes the bundled datasets as CSV files plus a `manifest.json` into `dir`.
pub fn write_bundled(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for d in bundled_datasets() {
        let stem = format!("{}_{}bar", d.gas.to_lowercase(), d.pressure_bar);
        let cv_name = PathBuf::from(format!("{stem}_cv.csv"));
        let mu_name = PathBuf::from(format!("{stem}_mu.csv"));
        let mut cv = String::from("T,c_hat_v\n");
        for (t, c) in d.cv.temperature.iter().zip(&d.cv.c_hat_v) {
            let _ = writeln!(cv, "{t},{c}");
        }
        let mut mu = String::from("T,mu\n");
        for (t, m) in d.viscosity.temperature.iter().zip(&d.viscosity.mu) {
            let _ = writeln!(mu, "{t},{m:e}");
        }
        std::fs::write(dir.join(&cv_name), cv)?;
        std::fs::write(dir.join(&mu_name), mu)?;
        entries.push(ManifestEntry {
            gas: d.gas,
            pressure_bar: d.pressure_bar,
            cv: cv_name,
            viscosity: mu_name,
        });
    }
    let manifest = Manifest {
        units: Units {
            temperature: "K".into(),
            viscosity: "Pa s".into(),
        },
        datasets: entries,
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}
