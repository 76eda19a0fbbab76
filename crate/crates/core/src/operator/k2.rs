//! Integrability diagnostic for the reduced `(r, R)` integral controlling the k2 norm.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Psi;
use crate::quadrature::log_mapped_unit;

pub const EPSILONS: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrability {
    Integrable,
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct K2Diagnostic {
    pub delta: f64,
    pub zeta: f64,
    pub epsilons: Vec<f64>,
    pub partial_integrals: Vec<f64>,
    /// Exponents of `r, 1-r, R, 1-R` in the integrand.
    pub exponents: [f64; 4],
    /// Same with `r` and `1-r` exchanged (the K3 analogue).
    pub mirrored_exponents: [f64; 4],
    /// Relative change of the partial integral over the last two `ε`.
    pub last_change: f64,
    pub numeric_integrable: bool,
    pub analytic_integrable: bool,
    /// Set when the two tests disagree.
    pub inconsistent: bool,
    pub verdict: Integrability,
}

impl K2Diagnostic {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,partial_integral\n");
        for (e, v) in self.epsilons.iter().zip(&self.partial_integrals) {
            let _ = writeln!(out, "{e:e},{v:e}");
        }
        out
    }
}

/// Exponents of `r, 1-r, R, 1-R` in `Ψ² (1-r)^{δ-3-ζ} r^{δ/2-2} R (1-R)^{3δ/2-3-ζ}`.
pub fn corner_exponents(delta: f64, zeta: f64, psi: &Psi) -> [f64; 4] {
    let [a, b, c, d] = psi.exponents();
    [
        delta / 2.0 - 2.0 + 2.0 * a,
        delta - 3.0 - zeta + 2.0 * b,
        1.0 + 2.0 * c,
        1.5 * delta - 3.0 - zeta + 2.0 * d,
    ]
}

/// `min(e + 1)` over the corner exponents; positive exactly when the integral converges.
pub fn min_exponent_slack(delta: f64, zeta: f64, psi: &Psi) -> f64 {
    corner_exponents(delta, zeta, psi).iter().fold(f64::INFINITY, |m, e| m.min(e + 1.0))
}

/// `∫_ε^{1-ε} x^p (1-x)^q dx`.
fn beta_partial(p: f64, q: f64, eps: f64) -> f64 {
    log_mapped_unit(eps, 1.0 - eps, 24, 20).integrate(|x| x.powf(p) * (1.0 - x).powf(q))
}

/// Partial integrals over `(ε, 1-ε)²` for `ε = 10⁻¹ … 10⁻⁶`, a Cauchy test on the last
/// two (relative change below 1%) and the corner-exponent test.
pub fn k2_integrability_diagnostic(delta: f64, zeta: f64, psi: &Psi) -> Result<K2Diagnostic> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    if !(zeta > -1.0) || !zeta.is_finite() {
        return Err(Error::domain(format!("zeta must exceed -1, got {zeta}")));
    }
    if !psi.is_symmetric() {
        return Err(Error::invalid("Ψ must be symmetric under r -> 1-r"));
    }
    let ex = corner_exponents(delta, zeta, psi);
    let mirrored = [ex[1], ex[0], ex[2], ex[3]];
    let partial: Vec<f64> = EPSILONS
        .iter()
        .map(|&e| beta_partial(ex[0], ex[1], e) * beta_partial(ex[2], ex[3], e))
        .collect();
    let n = partial.len();
    let last_change = (partial[n - 1] - partial[n - 2]).abs() / partial[n - 1].abs();
    let numeric = last_change < 0.01;
    let analytic = ex.iter().chain(&mirrored).all(|&e| e > -1.0);
    Ok(K2Diagnostic {
        delta,
        zeta,
        epsilons: EPSILONS.to_vec(),
        partial_integrals: partial,
        exponents: ex,
        mirrored_exponents: mirrored,
        last_change,
        numeric_integrable: numeric,
        analytic_integrable: analytic,
        inconsistent: numeric != analytic,
        verdict: if numeric && analytic {
            Integrability::Integrable
        } else {
            Integrability::Divergent
        },
    })
}
