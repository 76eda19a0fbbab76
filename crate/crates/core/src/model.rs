//! Species, internal-energy models, collision kernel families and unit conventions.
//!
//! Everything here is plain data: immutable after construction and cheap to share
//! between threads. The JSON layout of [`MixtureSpec`] is a stable file format:
//!
//! ```json
//! {"species":[{"label":"N2","mass":1.0,"energy":{"kind":"continuous","delta":2.017}}],
//!  "kernels":[[{"kind":"power_law_e","C":1.0,"zeta":0.537}]]}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One discrete internal-energy level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub degeneracy: f64,
}

impl Level {
    pub const fn new(energy: f64, degeneracy: f64) -> Self {
        Level { energy, degeneracy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyModel {
    Monatomic,
    /// Continuous internal energy with weight `φ(I) = I^{δ/2-1}`.
    #[serde(rename = "continuous")]
    ContinuousPowerLaw { delta: f64 },
    /// Finitely many levels, ordered by strictly increasing energy.
    #[serde(rename = "discrete")]
    DiscreteLevels { levels: Vec<Level> },
}

impl EnergyModel {
    pub fn continuous(delta: f64) -> Self {
        EnergyModel::ContinuousPowerLaw { delta }
    }

    pub fn discrete(levels: impl IntoIterator<Item = (f64, f64)>) -> Self {
        EnergyModel::DiscreteLevels {
            levels: levels
                .into_iter()
                .map(|(e, g)| Level::new(e, g))
                .collect(),
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self {
            EnergyModel::ContinuousPowerLaw { delta } => Some(*delta),
            _ => None,
        }
    }

    pub fn levels(&self) -> Option<&[Level]> {
        match self {
            EnergyModel::DiscreteLevels { levels } => Some(levels),
            _ => None,
        }
    }

    /// A single level of degeneracy one behaves exactly like a structureless molecule.
    pub fn is_effectively_monatomic(&self) -> bool {
        match self {
            EnergyModel::Monatomic => true,
            EnergyModel::ContinuousPowerLaw { .. } => false,
            EnergyModel::DiscreteLevels { levels } => {
                levels.len() == 1 && levels[0].degeneracy == 1.0
            }
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, EnergyModel::ContinuousPowerLaw { .. })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, EnergyModel::DiscreteLevels { .. })
    }

    /// Number of internal degrees of freedom entering the caloric equation of state
    /// (`δ` for the continuous model, zero for monatomic). Discrete levels have no
    /// temperature-independent value and return `None`.
    pub fn internal_dof(&self) -> Option<f64> {
        match self {
            EnergyModel::Monatomic => Some(0.0),
            EnergyModel::ContinuousPowerLaw { delta } => Some(*delta),
            EnergyModel::DiscreteLevels { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub label: String,
    pub mass: f64,
    pub energy: EnergyModel,
}

impl Species {
    pub fn new(label: impl Into<String>, mass: f64, energy: EnergyModel) -> Self {
        Species {
            label: label.into(),
            mass,
            energy,
        }
    }
}

/// Weight function `Ψ(r, R) = r^a (1-r)^b R^c (1-R)^d` on the open unit square.
///
/// `Unit` is `Ψ ≡ 1`. The weight is symmetric under `r -> 1-r` exactly when `a == b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Psi {
    Unit,
    Monomial {
        r: f64,
        one_minus_r: f64,
        big_r: f64,
        one_minus_big_r: f64,
    },
}

impl Psi {
    pub fn eval(&self, r: f64, big_r: f64) -> f64 {
        match *self {
            Psi::Unit => 1.0,
            Psi::Monomial {
                r: a,
                one_minus_r: b,
                big_r: c,
                one_minus_big_r: d,
            } => r.powf(a) * (1.0 - r).powf(b) * big_r.powf(c) * (1.0 - big_r).powf(d),
        }
    }

    /// Exponents `(a, b, c, d)` of `r, 1-r, R, 1-R`.
    pub fn exponents(&self) -> [f64; 4] {
        match *self {
            Psi::Unit => [0.0; 4],
            Psi::Monomial {
                r,
                one_minus_r,
                big_r,
                one_minus_big_r,
            } => [r, one_minus_r, big_r, one_minus_big_r],
        }
    }

    /// Samples `Ψ(r,R) - Ψ(1-r,R)` on a fixed interior grid.
    pub fn is_symmetric(&self) -> bool {
        let nodes = [0.05, 0.17, 0.3, 0.41, 0.5, 0.63, 0.77, 0.9, 0.98];
        nodes.iter().all(|&r| {
            nodes.iter().all(|&big_r| {
                let a = self.eval(r, big_r);
                let b = self.eval(1.0 - r, big_r);
                (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
            })
        })
    }
}

/// One term of the kinetic factor of a tensored resonant kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KinTerm {
    /// `|sin θ| (|V|² + |V|⁻¹)`
    SineSpeed,
    /// `|V|`
    Linear,
    /// `|V|^{-ζ}`
    InverseSpeed,
    /// `|sin θ|^{-ζ₁}`
    InverseSine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelModel {
    /// `B = C E^{ζ/2}`.
    PowerLawE {
        #[serde(rename = "C")]
        c: f64,
        zeta: f64,
    },
    /// `B = C Ψ(r,R) E^{ζ/2}`.
    PsiWeighted {
        #[serde(rename = "C")]
        c: f64,
        zeta: f64,
        psi: Psi,
    },
    /// `B = C b_kin(|V|, cos θ) b_int(I, I_*) 1_{[0, I+I_*]}(I')` with
    /// `b_int = (I+I_*)^{1+ζ₂/2-δ}` and `b_kin` a sum of [`KinTerm`]s
    /// (just `|V|` when the list is empty).
    ResonantTensored {
        #[serde(rename = "C")]
        c: f64,
        zeta: f64,
        zeta1: f64,
        zeta2: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        kin_terms: Vec<KinTerm>,
    },
}

impl KernelModel {
    pub fn power_law(c: f64, zeta: f64) -> Self {
        KernelModel::PowerLawE { c, zeta }
    }

    pub fn resonant(c: f64, zeta: f64, zeta1: f64, zeta2: f64) -> Self {
        KernelModel::ResonantTensored {
            c,
            zeta,
            zeta1,
            zeta2,
            kin_terms: Vec::new(),
        }
    }

    pub fn prefactor(&self) -> f64 {
        match self {
            KernelModel::PowerLawE { c, .. }
            | KernelModel::PsiWeighted { c, .. }
            | KernelModel::ResonantTensored { c, .. } => *c,
        }
    }

    pub fn zeta(&self) -> f64 {
        match self {
            KernelModel::PowerLawE { zeta, .. }
            | KernelModel::PsiWeighted { zeta, .. }
            | KernelModel::ResonantTensored { zeta, .. } => *zeta,
        }
    }

    /// Same model with the prefactor replaced.
    pub fn with_prefactor(&self, new_c: f64) -> Self {
        let mut k = self.clone();
        match &mut k {
            KernelModel::PowerLawE { c, .. }
            | KernelModel::PsiWeighted { c, .. }
            | KernelModel::ResonantTensored { c, .. } => *c = new_c,
        }
        k
    }

    pub fn kin_terms(&self) -> &[KinTerm] {
        const DEFAULT: [KinTerm; 1] = [KinTerm::Linear];
        match self {
            KernelModel::ResonantTensored { kin_terms, .. } if !kin_terms.is_empty() => kin_terms,
            _ => &DEFAULT,
        }
    }

    /// Whether the kernel depends on the collision only through `E` (and `Ψ(r,R)`).
    pub fn is_energy_kernel(&self) -> bool {
        !matches!(self, KernelModel::ResonantTensored { .. })
    }
}

/// Everything a kernel may depend on for one collision configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelContext {
    /// `|V| = |v - v_*|`
    pub rel_speed: f64,
    /// Center-of-mass energy `E`.
    pub energy: f64,
    pub internal: f64,
    pub internal_star: f64,
    /// Post-collisional internal energy `I'` (resonant collisions).
    pub internal_post: f64,
    pub r: f64,
    pub big_r: f64,
    /// Cosine of the angle between `V` and `σ`.
    pub cos_theta: f64,
    /// `δ` of the colliding species (resonant internal factor).
    pub delta: f64,
}

/// `φ(I) = I^{δ/2-1}`; at `I = 0` only defined for `δ >= 2` (value 1 at `δ = 2`).
pub fn phi_weight(internal: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    if !(internal >= 0.0) {
        return Err(Error::domain(format!(
            "internal energy must be nonnegative, got {internal}"
        )));
    }
    if internal == 0.0 {
        return match delta {
            2.0 => Ok(1.0),
            d if d > 2.0 => Ok(0.0),
            _ => Err(Error::domain(format!(
                "phi(0) diverges for delta = {delta} < 2"
            ))),
        };
    }
    Ok(internal.powf(delta / 2.0 - 1.0))
}

/// Evaluates the kernel `B` on one configuration.
pub fn eval_kernel(model: &KernelModel, ctx: &KernelContext) -> Result<f64> {
    if !(ctx.energy >= 0.0) {
        return Err(Error::domain(format!(
            "center-of-mass energy must be nonnegative, got {}",
            ctx.energy
        )));
    }
    if !(ctx.rel_speed >= 0.0) {
        return Err(Error::domain(format!(
            "relative speed must be nonnegative, got {}",
            ctx.rel_speed
        )));
    }
    Ok(match model {
        KernelModel::PowerLawE { c, zeta } => c * energy_power(ctx.energy, *zeta),
        KernelModel::PsiWeighted { c, zeta, psi } => {
            c * psi.eval(ctx.r, ctx.big_r) * energy_power(ctx.energy, *zeta)
        }
        KernelModel::ResonantTensored {
            c, zeta, zeta1, zeta2, ..
        } => {
            let total = ctx.internal + ctx.internal_star;
            if ctx.internal_post < 0.0 || ctx.internal_post > total {
                return Ok(0.0);
            }
            let kin = kinetic_factor(model.kin_terms(), ctx.rel_speed, ctx.cos_theta, *zeta, *zeta1);
            let int = total.powf(1.0 + zeta2 / 2.0 - ctx.delta);
            c * kin * int
        }
    })
}

fn energy_power(energy: f64, zeta: f64) -> f64 {
    if zeta == 0.0 {
        1.0
    } else {
        energy.powf(zeta / 2.0)
    }
}

pub(crate) fn kinetic_factor(terms: &[KinTerm], speed: f64, cos_theta: f64, zeta: f64, zeta1: f64) -> f64 {
    let sin = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    terms
        .iter()
        .map(|t| match t {
            KinTerm::SineSpeed => sin * (speed * speed + 1.0 / speed),
            KinTerm::Linear => speed,
            KinTerm::InverseSpeed => speed.powf(-zeta),
            KinTerm::InverseSine => sin.powf(-zeta1),
        })
        .sum()
}

/// Boltzmann constant in the chosen units. Nondimensional `k_B = 1` by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub k_b: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem { k_b: 1.0 }
    }
}

impl UnitSystem {
    /// SI units (J/K).
    pub const SI: UnitSystem = UnitSystem {
        k_b: 1.380_649e-23,
    };

    pub fn new(k_b: f64) -> Result<Self> {
        if !(k_b > 0.0) || !k_b.is_finite() {
            return Err(Error::domain(format!("k_B must be positive, got {k_b}")));
        }
        Ok(UnitSystem { k_b })
    }

    pub fn thermal_energy(&self, temperature: f64) -> f64 {
        self.k_b * temperature
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub species: Vec<Species>,
    /// `kernels[i][j]` governs collisions of species `i` with species `j`.
    pub kernels: Vec<Vec<KernelModel>>,
}

impl MixtureSpec {
    pub fn single(species: Species, kernel: KernelModel) -> Self {
        MixtureSpec {
            species: vec![species],
            kernels: vec![vec![kernel]],
        }
    }

    /// Mixture with the same kernel for every pair.
    pub fn uniform(species: Vec<Species>, kernel: KernelModel) -> Self {
        let n = species.len();
        MixtureSpec {
            species,
            kernels: vec![vec![kernel; n]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.species[i].mass
    }

    pub fn energy(&self, i: usize) -> &EnergyModel {
        &self.species[i].energy
    }

    pub fn kernel(&self, i: usize, j: usize) -> &KernelModel {
        &self.kernels[i][j]
    }

    pub fn reduced_mass(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.mass(i), self.mass(j));
        a * b / (a + b)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks every structural invariant; an empty list means the spec is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.species.is_empty() {
            out.push(Violation::new("species", "at least one species is required"));
        }
        for (i, s) in self.species.iter().enumerate() {
            let path = format!("species[{i}]");
            if !(s.mass > 0.0) || !s.mass.is_finite() {
                out.push(Violation::new(&path, format!("mass must be positive, got {}", s.mass)));
            }
            validate_energy(&s.energy, &format!("{path}.energy"), &mut out);
        }

        let n = self.species.len();
        if self.kernels.len() != n || self.kernels.iter().any(|row| row.len() != n) {
            out.push(Violation::new(
                "kernels",
                format!("kernel table must be {n}x{n}"),
            ));
            return out;
        }
        for i in 0..n {
            for j in 0..n {
                let path = format!("kernels[{i}][{j}]");
                let k = &self.kernels[i][j];
                validate_kernel(k, &path, &mut out);
                if let KernelModel::ResonantTensored { zeta2, .. } = k {
                    let partner = (j != i).then(|| self.energy(j).delta()).flatten();
                    for d in [self.energy(i).delta(), partner].into_iter().flatten() {
                        if !(zeta2.abs() < d) {
                            out.push(Violation::new(
                                &path,
                                format!("zeta2 = {zeta2} must lie in (-delta, delta) with delta = {d}"),
                            ));
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.kernels[i][j] != self.kernels[j][i] {
                    out.push(Violation::new(
                        format!("kernels[{i}][{j}]"),
                        format!("kernel table not symmetric: differs from kernels[{j}][{i}]"),
                    ));
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = v.iter().map(|v| v.to_string()).collect();
            Err(Error::invalid(msgs.join("; ")))
        }
    }
}

fn validate_energy(e: &EnergyModel, path: &str, out: &mut Vec<Violation>) {
    match e {
        EnergyModel::Monatomic => {}
        EnergyModel::ContinuousPowerLaw { delta } => {
            if !(*delta > 0.0) || !delta.is_finite() {
                out.push(Violation::new(path, format!("delta must be positive, got {delta}")));
            }
        }
        EnergyModel::DiscreteLevels { levels } => {
            if levels.is_empty() {
                out.push(Violation::new(path, "at least one level is required"));
            }
            for (k, l) in levels.iter().enumerate() {
                if !(l.energy >= 0.0) || !l.energy.is_finite() {
                    out.push(Violation::new(
                        format!("{path}.levels[{k}]"),
                        format!("level energy must be nonnegative, got {}", l.energy),
                    ));
                }
                if !(l.degeneracy > 0.0) || !l.degeneracy.is_finite() {
                    out.push(Violation::new(
                        format!("{path}.levels[{k}]"),
                        format!("degeneracy must be positive, got {}", l.degeneracy),
                    ));
                }
            }
            for (k, w) in levels.windows(2).enumerate() {
                if !(w[1].energy > w[0].energy) {
                    out.push(Violation::new(
                        format!("{path}.levels[{}]", k + 1),
                        format!(
                            "level energies must be strictly increasing: {} after {}",
                            w[1].energy, w[0].energy
                        ),
                    ));
                }
            }
        }
    }
}

fn validate_kernel(k: &KernelModel, path: &str, out: &mut Vec<Violation>) {
    let c = k.prefactor();
    // C = 0 is kept as the trivial "no collisions" kernel
    if !(c >= 0.0) || !c.is_finite() {
        out.push(Violation::new(path, format!("prefactor C must be nonnegative, got {c}")));
    }
    if !k.zeta().is_finite() {
        out.push(Violation::new(path, "zeta must be finite"));
    }
    match k {
        KernelModel::PowerLawE { .. } => {}
        KernelModel::PsiWeighted { psi, .. } => {
            if !psi.is_symmetric() {
                out.push(Violation::new(path, "psi must satisfy psi(r,R) = psi(1-r,R)"));
            }
        }
        KernelModel::ResonantTensored { zeta, zeta1, .. } => {
            if !(0.0..1.0).contains(zeta) {
                out.push(Violation::new(path, format!("zeta = {zeta} must lie in [0,1)")));
            }
            if !(0.0..0.5).contains(zeta1) {
                out.push(Violation::new(path, format!("zeta1 = {zeta1} must lie in [0,1/2)")));
            }
        }
    }
}

/// One failed invariant, located by a JSON-style path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_species() -> MixtureSpec {
        MixtureSpec::uniform(
            vec![
                Species::new("A", 1.0, EnergyModel::continuous(3.0)),
                Species::new("B", 2.0, EnergyModel::Monatomic),
            ],
            KernelModel::power_law(1.0, 0.5),
        )
    }

    #[test]
    fn phi_weight_examples() {
        assert_eq!(phi_weight(1.0, 3.7).unwrap(), 1.0);
        assert_eq!(phi_weight(4.0, 2.0).unwrap(), 1.0);
        assert_eq!(phi_weight(4.0, 4.0).unwrap(), 4.0);
        assert_eq!(phi_weight(0.0, 2.0).unwrap(), 1.0);
        assert_eq!(phi_weight(0.0, 3.0).unwrap(), 0.0);
        assert!(phi_weight(0.0, 1.5).is_err());
        assert!(phi_weight(-1.0, 3.0).is_err());
        assert!(phi_weight(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn phi_weight_unit_at_one(delta in 0.01f64..20.0) {
            prop_assert_eq!(phi_weight(1.0, delta).unwrap(), 1.0);
        }

        #[test]
        fn phi_weight_power_scaling(i in 1e-3f64..1e3, a in 1e-2f64..1e2, delta in 0.1f64..10.0) {
            let lhs = phi_weight(a * i, delta).unwrap();
            let rhs = a.powf(delta / 2.0 - 1.0) * phi_weight(i, delta).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
        }

        #[test]
        fn psi_weighted_kernel_mirror_symmetric(r in 0.01f64..0.99, big_r in 0.01f64..0.99, e in 0.0f64..50.0) {
            let k = KernelModel::PsiWeighted {
                c: 1.3,
                zeta: 0.4,
                psi: Psi::Monomial { r: 0.7, one_minus_r: 0.7, big_r: 0.2, one_minus_big_r: -0.3 },
            };
            let ctx = KernelContext { energy: e, r, big_r, ..Default::default() };
            let mirrored = KernelContext { r: 1.0 - r, ..ctx };
            let a = eval_kernel(&k, &ctx).unwrap();
            let b = eval_kernel(&k, &mirrored).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b));
        }
    }

    #[test]
    fn kernel_examples() {
        let ctx = KernelContext {
            rel_speed: 3.0,
            energy: 4.0,
            ..Default::default()
        };
        assert_eq!(eval_kernel(&KernelModel::power_law(1.0, 0.0), &ctx).unwrap(), 1.0);
        assert_eq!(eval_kernel(&KernelModel::power_law(1.0, 2.0), &ctx).unwrap(), 4.0);

        let res = KernelModel::resonant(1.0, 0.0, 0.0, 0.0);
        let ctx = KernelContext {
            rel_speed: 1.0,
            energy: 3.0,
            internal: 1.0,
            internal_star: 1.0,
            internal_post: 3.0,
            delta: 2.0,
            ..Default::default()
        };
        assert_eq!(eval_kernel(&res, &ctx).unwrap(), 0.0);
        let inside = KernelContext { internal_post: 0.5, ..ctx };
        // C |V| (I + I_*)^{1 + 0 - 2} = 1 * 1 * 1/2
        assert_eq!(eval_kernel(&res, &inside).unwrap(), 0.5);

        let bad = KernelContext { energy: -1.0, ..ctx };
        assert!(eval_kernel(&KernelModel::power_law(1.0, 1.0), &bad).is_err());
    }

    #[test]
    fn validate_examples() {
        assert!(two_species().validate().is_empty());

        let mut asym = two_species();
        asym.kernels[0][1] = KernelModel::power_law(2.0, 0.5);
        let v = asym.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("symmetric"));

        let dup = MixtureSpec::single(
            Species::new("D", 1.0, EnergyModel::discrete([(0.0, 1.0), (1.0, 3.0), (1.0, 5.0)])),
            KernelModel::power_law(1.0, 0.0),
        );
        let v = dup.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("strictly increasing"));
    }

    #[test]
    fn validate_reports_in_order() {
        let spec = MixtureSpec {
            species: vec![
                Species::new("x", -1.0, EnergyModel::continuous(-2.0)),
                Species::new("y", 1.0, EnergyModel::Monatomic),
            ],
            kernels: vec![
                vec![KernelModel::power_law(-1.0, 0.0), KernelModel::power_law(1.0, 0.0)],
                vec![KernelModel::power_law(1.0, 0.0), KernelModel::power_law(1.0, 0.0)],
            ],
        };
        let paths: Vec<_> = spec.validate().into_iter().map(|v| v.path).collect();
        assert_eq!(paths, ["species[0]", "species[0].energy", "kernels[0][0]"]);
    }

    #[test]
    fn validate_resonant_ranges() {
        let spec = MixtureSpec::single(
            Species::new("r", 1.0, EnergyModel::continuous(2.0)),
            KernelModel::resonant(1.0, 1.0, 0.6, 2.0),
        );
        assert_eq!(spec.validate().len(), 3);
        let asym_psi = MixtureSpec::single(
            Species::new("p", 1.0, EnergyModel::continuous(3.0)),
            KernelModel::PsiWeighted {
                c: 1.0,
                zeta: 0.0,
                psi: Psi::Monomial { r: 1.0, one_minus_r: 0.0, big_r: 0.0, one_minus_big_r: 0.0 },
            },
        );
        assert_eq!(asym_psi.validate().len(), 1);
    }

    #[test]
    fn json_field_names() {
        let spec = MixtureSpec::single(
            Species::new("N2", 1.0, EnergyModel::continuous(2.017)),
            KernelModel::power_law(1.0, 0.537),
        );
        let v: serde_json::Value = serde_json::from_str(&spec.to_json().unwrap()).unwrap();
        assert_eq!(v["species"][0]["label"], "N2");
        assert_eq!(v["species"][0]["energy"]["kind"], "continuous");
        assert_eq!(v["species"][0]["energy"]["delta"], 2.017);
        assert_eq!(v["kernels"][0][0]["kind"], "power_law_e");
        assert_eq!(v["kernels"][0][0]["C"], 1.0);

        let text = r#"{"species":[{"label":"d","mass":2,"energy":{"kind":"discrete","levels":[{"energy":0,"degeneracy":1},{"energy":1.5,"degeneracy":3}]}}],
            "kernels":[[{"kind":"resonant_tensored","C":1,"zeta":0.1,"zeta1":0.2,"zeta2":0.0,"kin_terms":["linear","sine_speed"]}]]}"#;
        let parsed = MixtureSpec::from_json(text).unwrap();
        assert_eq!(parsed.energy(0).levels().unwrap()[1], Level::new(1.5, 3.0));
        assert_eq!(parsed.kernel(0, 0).kin_terms(), &[KinTerm::Linear, KinTerm::SineSpeed]);
    }

    #[test]
    fn single_unit_level_is_monatomic() {
        assert!(EnergyModel::discrete([(0.0, 1.0)]).is_effectively_monatomic());
        assert!(!EnergyModel::discrete([(0.0, 2.0)]).is_effectively_monatomic());
        assert!(!EnergyModel::continuous(2.0).is_effectively_monatomic());
    }
}
