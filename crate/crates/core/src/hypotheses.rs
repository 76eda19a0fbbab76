//! Decidable verdicts for the compactness hypotheses, specialized to kernels
//! `B = C Ψ(r,R) E^{ζ/2}` (and `C |V|^γ` for monatomic gases).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Psi;
use crate::operator::k2_integrability_diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HypothesisId {
    /// Monatomic cut-off bound `C|V|(1 + |V|^{ζ-2})`.
    H1,
    /// Single species, `CE(1 + (|V||V'|)^{ζ/2-1})`.
    H2,
    /// Single species, `CΨ(r,R)E^{ζ/2}` with the `(r,R)` integrability condition.
    H3,
    /// Resonant tensored bound.
    H4,
    /// Discrete levels, `CE^{1/2}(1 + (|V||V'|)^{ζ/2-1})`.
    H5,
    /// Mixture analogue of H2.
    H6,
    /// Mixture analogue of H3.
    H7,
}

impl HypothesisId {
    pub const ALL: [HypothesisId; 7] = [
        HypothesisId::H1,
        HypothesisId::H2,
        HypothesisId::H3,
        HypothesisId::H4,
        HypothesisId::H5,
        HypothesisId::H6,
        HypothesisId::H7,
    ];

    pub fn long_name(self) -> &'static str {
        match self {
            HypothesisId::H1 => "H1_monatomic",
            HypothesisId::H2 => "H2_single_BL",
            HypothesisId::H3 => "H3_single_Psi",
            HypothesisId::H4 => "H4_resonant",
            HypothesisId::H5 => "H5_discrete",
            HypothesisId::H6 => "H6_mixture_BL",
            HypothesisId::H7 => "H7_mixture_Psi",
        }
    }
}

impl fmt::Display for HypothesisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for HypothesisId {
    type Err = Error;

    /// Accepts `H2`, `h2` or the long form `H2_single_BL`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        HypothesisId::ALL
            .into_iter()
            .find(|h| t.eq_ignore_ascii_case(&h.to_string()) || t.eq_ignore_ascii_case(h.long_name()))
            .ok_or_else(|| Error::invalid(format!("unknown hypothesis '{t}' (expected H1..H7)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub condition: String,
    /// Distance to the boundary; negative when violated.
    pub slack: f64,
    /// A strict inequality fails at zero slack.
    pub strict: bool,
}

impl Margin {
    fn holds(&self) -> bool {
        if self.strict {
            self.slack > 0.0
        } else {
            self.slack >= 0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub hypothesis: HypothesisId,
    pub satisfied: bool,
    /// The violated condition with the most negative slack, or the tightest one when all hold.
    pub binding_condition: String,
    pub margins: Vec<Margin>,
    pub applicable: bool,
}

impl Verdict {
    fn from_margins(hypothesis: HypothesisId, margins: Vec<Margin>) -> Verdict {
        let satisfied = margins.iter().all(Margin::holds);
        let binding = margins
            .iter()
            .filter(|m| satisfied || !m.holds())
            .min_by(|a, b| a.slack.total_cmp(&b.slack))
            .map(|m| m.condition.clone())
            .unwrap_or_default();
        Verdict {
            hypothesis,
            satisfied,
            binding_condition: binding,
            margins,
            applicable: true,
        }
    }

    fn not_applicable(hypothesis: HypothesisId, why: &str) -> Verdict {
        Verdict {
            hypothesis,
            satisfied: false,
            binding_condition: format!("not applicable: {why}"),
            margins: Vec::new(),
            applicable: false,
        }
    }
}

/// Short decimal rendering without binary noise (`2.537`, not `2.5370000000000004`).
fn num(x: f64) -> String {
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn gt(name: &str, value: f64, bound: f64, bound_text: &str) -> Margin {
    Margin {
        condition: format!("{name} > {bound_text}"),
        slack: value - bound,
        strict: true,
    }
}

fn ge(name: &str, value: f64, bound: f64, bound_text: &str) -> Margin {
    Margin {
        condition: format!("{name} >= {bound_text}"),
        slack: value - bound,
        strict: false,
    }
}

fn lt(name: &str, value: f64, bound: f64, bound_text: &str) -> Margin {
    Margin {
        condition: format!("{name} < {bound_text}"),
        slack: bound - value,
        strict: true,
    }
}

fn le(name: &str, value: f64, bound: f64, bound_text: &str) -> Margin {
    Margin {
        condition: format!("{name} <= {bound_text}"),
        slack: bound - value,
        strict: false,
    }
}

fn check_positive_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("delta must be positive, got {delta}")))
    }
}

/// H2 for `B = C E^{ζ/2}`: `δ >= 2` and `-1 < ζ <= 2`, or `ζ <= δ + 1` with `extended`.
pub fn check_h2(delta: f64, zeta: f64, extended: bool) -> Result<Verdict> {
    check_positive_delta(delta)?;
    let upper = if extended {
        le("zeta", zeta, delta + 1.0, &format!("delta + 1 = {}", num(delta + 1.0)))
    } else {
        le("zeta", zeta, 2.0, "2")
    };
    Ok(Verdict::from_margins(
        HypothesisId::H2,
        vec![ge("delta", delta, 2.0, "2"), gt("zeta", zeta, -1.0, "-1"), upper],
    ))
}

/// H3 for `B = C Ψ E^{ζ/2}`. With `Ψ ≡ 1` the integrability condition reduces to
/// `δ > max(2, 2 + ζ)`; other `Ψ` go through the k2 diagnostic and its mirror.
pub fn check_h3(delta: f64, zeta: f64, psi: &Psi) -> Result<Verdict> {
    check_positive_delta(delta)?;
    let mut margins = vec![gt("zeta", zeta, -1.0, "-1")];
    if *psi == Psi::Unit {
        margins.push(gt("delta", delta, 2.0, "2"));
        margins.push(gt("delta", delta, 2.0 + zeta, &format!("2 + zeta = {}", num(2.0 + zeta))));
        return Ok(Verdict::from_margins(HypothesisId::H3, margins));
    }
    if !psi.is_symmetric() {
        return Err(Error::invalid("Ψ must be symmetric under r -> 1-r"));
    }
    margins.push(ge("delta", delta, 2.0, "2"));
    if zeta > -1.0 {
        let d = k2_integrability_diagnostic(delta, zeta, psi)?;
        margins.push(lt("relative change over the last two epsilons", d.last_change, 0.01, "0.01"));
        let names = ["r", "1-r", "R", "1-R"];
        for (label, ex) in [("k2", d.exponents), ("k3", d.mirrored_exponents)] {
            for (name, e) in names.iter().zip(ex) {
                margins.push(gt(&format!("{label} exponent of {name}"), e, -1.0, "-1"));
            }
        }
    }
    Ok(Verdict::from_margins(HypothesisId::H3, margins))
}

/// Single-species verdict. H1 reports "not applicable" for energy kernels.
pub fn check_single(delta: f64, zeta: f64, id: HypothesisId, psi: Option<&Psi>) -> Result<Verdict> {
    match id {
        HypothesisId::H1 => {
            check_positive_delta(delta)?;
            Ok(Verdict::not_applicable(id, "the bound is stated in |V|, not E; use check_monatomic"))
        }
        HypothesisId::H2 => check_h2(delta, zeta, false),
        HypothesisId::H3 => check_h3(delta, zeta, psi.unwrap_or(&Psi::Unit)),
        HypothesisId::H5 => {
            check_positive_delta(delta)?;
            Ok(check_discrete(zeta))
        }
        _ => Err(Error::invalid(format!("{id} is not a single-species energy-kernel hypothesis"))),
    }
}

/// H1 for `B = C |V|^γ`: the bound `C|V|(1 + |V|^{ζ-2})` with some `ζ ∈ (0,1)` holds
/// iff `-1 < γ <= 1`.
pub fn check_monatomic(gamma: f64) -> Verdict {
    Verdict::from_margins(
        HypothesisId::H1,
        vec![gt("gamma", gamma, -1.0, "-1"), le("gamma", gamma, 1.0, "1")],
    )
}

/// H4: `ζ ∈ [0,1)`, `ζ₁ ∈ [0,1/2)`, `ζ₂ ∈ (-δ, δ)`.
pub fn check_resonant(delta: f64, zeta: f64, zeta1: f64, zeta2: f64) -> Result<Verdict> {
    check_positive_delta(delta)?;
    let d = num(delta);
    Ok(Verdict::from_margins(
        HypothesisId::H4,
        vec![
            ge("zeta", zeta, 0.0, "0"),
            lt("zeta", zeta, 1.0, "1"),
            ge("zeta1", zeta1, 0.0, "0"),
            lt("zeta1", zeta1, 0.5, "1/2"),
            gt("zeta2", zeta2, -delta, &format!("-delta = -{d}")),
            lt("zeta2", zeta2, delta, &format!("delta = {d}")),
        ],
    ))
}

/// H5 for `B = C E^{ζ/2}` on discrete levels: the `E^{1/2}` form covers `-1 < ζ <= 1`.
pub fn check_discrete(zeta: f64) -> Verdict {
    Verdict::from_margins(
        HypothesisId::H5,
        vec![gt("zeta", zeta, -1.0, "-1"), le("zeta", zeta, 1.0, "1")],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub i: usize,
    pub j: usize,
    pub verdict: Verdict,
}

/// Mixture verdicts for every ordered pair `(i, j)`.
///
/// H6: `δ_i, δ_j >= 2` and `0 < ζ_ij < 1`. H7 (`Ψ ≡ 1`): `ζ_ij > -1`,
/// `δ_i - δ_j <= 2 + ζ_ij`, and every corner exponent of both integrability
/// conditions above `-1`.
pub fn check_mixture(deltas: &[f64], zetas: &[Vec<f64>], id: HypothesisId) -> Result<Vec<PairVerdict>> {
    let n = deltas.len();
    if n == 0 || zetas.len() != n || zetas.iter().any(|row| row.len() != n) {
        return Err(Error::invalid(format!("zeta matrix must be {n}x{n} for {n} species")));
    }
    for &d in deltas {
        check_positive_delta(d)?;
    }
    for (i, row) in zetas.iter().enumerate() {
        for (j, &z) in row.iter().enumerate() {
            if z != zetas[j][i] {
                return Err(Error::invalid(format!("zeta matrix not symmetric at ({i},{j})")));
            }
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (di, dj, z) = (deltas[i], deltas[j], zetas[i][j]);
            let verdict = match id {
                HypothesisId::H6 => Verdict::from_margins(
                    id,
                    vec![
                        ge(&format!("delta_{i}"), di, 2.0, "2"),
                        ge(&format!("delta_{j}"), dj, 2.0, "2"),
                        gt(&format!("zeta_{i}{j}"), z, 0.0, "0"),
                        lt(&format!("zeta_{i}{j}"), z, 1.0, "1"),
                    ],
                ),
                HypothesisId::H7 => {
                    let mut m = vec![
                        gt(&format!("zeta_{i}{j}"), z, -1.0, "-1"),
                        le(
                            &format!("delta_{i} - delta_{j}"),
                            di - dj,
                            2.0 + z,
                            &format!("2 + zeta_{i}{j} = {}", num(2.0 + z)),
                        ),
                    ];
                    let first = [
                        ("1-r", dj / 2.0 - 2.0),
                        ("r", (di + dj) / 2.0 - 3.0 - z),
                        ("1-R", di / 2.0 + dj - 3.0 - z),
                    ];
                    let second = [
                        ("1-r", dj - 3.0 - z),
                        ("r", di / 2.0 - 2.0),
                        ("1-R", di / 2.0 + dj - 3.0 - z),
                    ];
                    for (k, set) in [first, second].iter().enumerate() {
                        for (name, e) in set {
                            m.push(gt(&format!("condition {} exponent of {name}", k + 1), *e, -1.0, "-1"));
                        }
                    }
                    Verdict::from_margins(id, m)
                }
                _ => return Err(Error::invalid(format!("{id} is not a mixture hypothesis"))),
            };
            out.push(PairVerdict { i, j, verdict });
        }
    }
    Ok(out)
}

/// Reference `(δ, ζ)` values of four diatomic gases at two pressures, with the
/// temperature interval (K) of the underlying data and the Chapman-Cowling `ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GasRecord {
    pub gas: &'static str,
    pub interval: (f64, f64),
    /// `(pressure in bar, δ, ζ)`
    pub values: [(f64, f64, f64); 2],
    pub zeta_chapman_cowling: f64,
}

pub const REFERENCE_GASES: [GasRecord; 4] = [
    GasRecord {
        gas: "N2",
        interval: (300.0, 600.0),
        values: [(1.0, 2.017, 0.537), (0.092, 2.007, 0.536)],
        zeta_chapman_cowling: 0.524,
    },
    GasRecord {
        gas: "O2",
        interval: (300.0, 430.0),
        values: [(1.0, 2.080, 0.443), (0.092, 2.070, 0.441)],
        zeta_chapman_cowling: 0.454,
    },
    GasRecord {
        gas: "CO",
        interval: (300.0, 550.0),
        values: [(1.0, 2.022, 0.547), (0.092, 2.011, 0.524)],
        zeta_chapman_cowling: 0.532,
    },
    GasRecord {
        gas: "H2",
        interval: (300.0, 890.0),
        values: [(1.0, 1.940, 0.608), (0.092, 1.939, 0.608)],
        zeta_chapman_cowling: 0.664,
    },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub gas: &'static str,
    pub pressure_bar: f64,
    pub delta: f64,
    pub zeta: f64,
    pub h2: Verdict,
    pub h3: Verdict,
}

/// H2 and H3 verdicts for every reference gas and pressure.
pub fn table1_report() -> Vec<Table1Row> {
    REFERENCE_GASES
        .iter()
        .flat_map(|g| {
            g.values.iter().map(move |&(p, delta, zeta)| Table1Row {
                gas: g.gas,
                pressure_bar: p,
                delta,
                zeta,
                h2: check_h2(delta, zeta, false).expect("positive delta"),
                h3: check_h3(delta, zeta, &Psi::Unit).expect("positive delta"),
            })
        })
        .collect()
}
