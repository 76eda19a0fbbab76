//! Maxwellian equilibria, partition functions and detailed balance.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::collide::{Internal, ParticleState};
use crate::error::{Error, Result};
use crate::model::{EnergyModel, KernelModel, MixtureSpec, UnitSystem};
use crate::vec3::Vec3;

/// Collision model family implied by a mixture specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Monatomic,
    BorgnakkeLarsen,
    Resonant,
    Discrete,
}

impl Family {
    /// Resonant kernels select the resonant family (single continuous species only);
    /// any discrete species selects the discrete family (remaining species must be
    /// monatomic); otherwise Borgnakke-Larsen, or monatomic when no species has
    /// internal energy.
    pub fn of(spec: &MixtureSpec) -> Result<Family> {
        let resonant = spec
            .kernels
            .iter()
            .flatten()
            .any(|k| matches!(k, KernelModel::ResonantTensored { .. }));
        let any_discrete = spec.species.iter().any(|s| s.energy.is_discrete());
        let any_continuous = spec.species.iter().any(|s| s.energy.is_continuous());
        if resonant {
            if spec.len() != 1 || !any_continuous {
                return Err(Error::FamilyMismatch(
                    "resonant kernels need a single continuous-energy species".into(),
                ));
            }
            return Ok(Family::Resonant);
        }
        if any_discrete {
            if any_continuous {
                return Err(Error::FamilyMismatch(
                    "mixing discrete-level and continuous-energy species is not supported".into(),
                ));
            }
            return Ok(Family::Discrete);
        }
        Ok(if any_continuous {
            Family::BorgnakkeLarsen
        } else {
            Family::Monatomic
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Temperatures {
    Single { t: f64 },
    Resonant { t_kin: f64, t_int: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumParams {
    /// Number density per species.
    pub densities: Vec<f64>,
    pub u: Vec3,
    pub temperatures: Temperatures,
}

impl EquilibriumParams {
    pub fn single(n: f64, u: Vec3, t: f64) -> Self {
        EquilibriumParams {
            densities: vec![n],
            u,
            temperatures: Temperatures::Single { t },
        }
    }

    pub fn two_temperature(n: f64, u: Vec3, t_kin: f64, t_int: f64) -> Self {
        EquilibriumParams {
            densities: vec![n],
            u,
            temperatures: Temperatures::Resonant { t_kin, t_int },
        }
    }

    pub fn mixture(densities: Vec<f64>, u: Vec3, t: f64) -> Self {
        EquilibriumParams {
            densities,
            u,
            temperatures: Temperatures::Single { t },
        }
    }

    pub fn t_kin(&self) -> f64 {
        match self.temperatures {
            Temperatures::Single { t } => t,
            Temperatures::Resonant { t_kin, .. } => t_kin,
        }
    }

    pub fn t_int(&self) -> f64 {
        match self.temperatures {
            Temperatures::Single { t } => t,
            Temperatures::Resonant { t_int, .. } => t_int,
        }
    }

    pub fn total_density(&self) -> f64 {
        self.densities.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.densities.iter().any(|&n| !(n >= 0.0) || !n.is_finite()) {
            return Err(Error::domain("densities must be finite and nonnegative"));
        }
        if !self.u.is_finite() {
            return Err(Error::domain("bulk velocity must be finite"));
        }
        for t in [self.t_kin(), self.t_int()] {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::domain(format!("temperature must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Internal partition function `q(T)`; 1 for monatomic species.
pub fn partition_function(energy: &EnergyModel, t: f64, units: UnitSystem) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("temperature must be positive, got {t}")));
    }
    Ok(ln_partition(energy, units.thermal_energy(t)).exp())
}

fn ln_partition(energy: &EnergyModel, kt: f64) -> f64 {
    match energy {
        EnergyModel::Monatomic => 0.0,
        EnergyModel::ContinuousPowerLaw { delta } => ln_gamma(delta / 2.0) + delta / 2.0 * kt.ln(),
        EnergyModel::DiscreteLevels { levels } => {
            // shift by the ground level to avoid underflow at low temperature
            let e0 = levels[0].energy;
            let s: f64 = levels.iter().map(|l| l.degeneracy * (-(l.energy - e0) / kt).exp()).sum();
            s.ln() - e0 / kt
        }
    }
}

/// `Ψ_res(Z) = ∫_0^Z φ(I') φ(Z - I') dI' = Z^{δ-1} Γ(δ/2)² / Γ(δ)`.
pub fn psi_res(z: f64, delta: f64) -> Result<f64> {
    if !(z >= 0.0) || !(delta > 0.0) {
        return Err(Error::domain(format!("psi_res needs Z >= 0 and delta > 0, got Z = {z}, delta = {delta}")));
    }
    if z == 0.0 {
        return Ok(if delta > 1.0 { 0.0 } else if delta == 1.0 { std::f64::consts::PI } else { f64::INFINITY });
    }
    Ok(((delta - 1.0) * z.ln() + 2.0 * ln_gamma(delta / 2.0) - ln_gamma(delta)).exp())
}

/// Weight `φ` of a single state: `I^{δ/2-1}`, the level degeneracy, or 1.
pub fn state_weight(spec: &MixtureSpec, w: &ParticleState) -> f64 {
    match (spec.energy(w.species), w.internal) {
        (EnergyModel::ContinuousPowerLaw { delta }, Internal::Continuous(i)) => power_weight(i, *delta),
        (EnergyModel::DiscreteLevels { levels }, Internal::Level(k)) => levels[k].degeneracy,
        _ => 1.0,
    }
}

fn power_weight(i: f64, delta: f64) -> f64 {
    let e = delta / 2.0 - 1.0;
    if e == 0.0 {
        1.0
    } else {
        i.powf(e)
    }
}

/// `Φ = φ(pre_0) φ(pre_1) / (φ(post_0) φ(post_1))`.
pub fn phi_factor(spec: &MixtureSpec, pre: &[ParticleState; 2], post: &[ParticleState; 2]) -> f64 {
    (state_weight(spec, &pre[0]) * state_weight(spec, &pre[1]))
        / (state_weight(spec, &post[0]) * state_weight(spec, &post[1]))
}

/// Parameters of a density of the form `c_s φ(I) exp(-β_kin m|v-u|²/2 - β_int I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinear {
    pub u: Vec3,
    pub beta_kin: f64,
    pub beta_int: f64,
}

/// Neumaier-compensated sum, returned as exactly zero when it lies below the rounding
/// floor `64 ε · scale` of its inputs.
pub(crate) fn snapped_sum(terms: &[f64], scale: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    let total = sum + comp;
    if total.abs() <= 64.0 * f64::EPSILON * scale {
        0.0
    } else {
        total
    }
}

impl LogLinear {
    /// `ln(f'g'_*Φ / (f g_*))` for two densities sharing these parameters. Conserved
    /// combinations cancel to exactly zero, so equilibrium integrands vanish samplewise.
    pub(crate) fn log_gain_ratio(&self, spec: &MixtureSpec, pre: &[ParticleState; 2], post: &[ParticleState; 2]) -> f64 {
        let mut kin = [0.0; 4];
        let mut int = [0.0; 4];
        let mut scale = 0.0;
        for (k, (p, sign)) in [(&post[0], 1.0), (&post[1], 1.0), (&pre[0], -1.0), (&pre[1], -1.0)]
            .into_iter()
            .enumerate()
        {
            let m = spec.mass(p.species);
            let rel = p.v - self.u;
            kin[k] = sign * 0.5 * m * rel.norm_sq();
            int[k] = sign * p.internal_energy(spec);
            let r = rel.norm() + p.v.norm() + self.u.norm();
            scale += 0.5 * m * r * r + int[k].abs();
        }
        if self.beta_kin == self.beta_int {
            let all = [kin[0], kin[1], kin[2], kin[3], int[0], int[1], int[2], int[3]];
            -self.beta_kin * snapped_sum(&all, scale)
        } else {
            -self.beta_kin * snapped_sum(&kin, scale) - self.beta_int * snapped_sum(&int, scale)
        }
    }
}

/// Maxwellian (or two-temperature product) density over particle states.
#[derive(Debug, Clone)]
pub struct Maxwellian {
    spec: MixtureSpec,
    params: EquilibriumParams,
    units: UnitSystem,
    family: Family,
    /// `ln(n_s (m/2πkT_kin)^{3/2} / q_s(T_int))`, `-inf` for empty species.
    log_norm: Vec<f64>,
}

impl Maxwellian {
    pub fn new(spec: MixtureSpec, params: EquilibriumParams, units: UnitSystem) -> Result<Self> {
        spec.ensure_valid()?;
        params.validate()?;
        let family = Family::of(&spec)?;
        if params.densities.len() != spec.len() {
            return Err(Error::invalid(format!(
                "{} densities given for {} species",
                params.densities.len(),
                spec.len()
            )));
        }
        let kt_kin = units.thermal_energy(params.t_kin());
        let kt_int = units.thermal_energy(params.t_int());
        let log_norm = spec
            .species
            .iter()
            .zip(&params.densities)
            .map(|(s, &n)| {
                n.ln() + 1.5 * (s.mass / (2.0 * std::f64::consts::PI * kt_kin)).ln() - ln_partition(&s.energy, kt_int)
            })
            .collect();
        Ok(Maxwellian {
            spec,
            params,
            units,
            family,
            log_norm,
        })
    }

    pub fn single(spec: MixtureSpec, n: f64, t: f64) -> Result<Self> {
        let densities = vec![n; spec.len()];
        Maxwellian::new(spec, EquilibriumParams::mixture(densities, Vec3::ZERO, t), UnitSystem::default())
    }

    pub fn spec(&self) -> &MixtureSpec {
        &self.spec
    }

    pub fn params(&self) -> &EquilibriumParams {
        &self.params
    }

    pub fn units(&self) -> UnitSystem {
        self.units
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// True unless the temperatures differ in a family that exchanges energy
    /// between kinetic and internal modes.
    pub fn is_equilibrium(&self) -> bool {
        self.params.t_kin() == self.params.t_int() || self.family == Family::Resonant
    }

    pub fn log_linear(&self) -> LogLinear {
        LogLinear {
            u: self.params.u,
            beta_kin: 1.0 / self.units.thermal_energy(self.params.t_kin()),
            beta_int: 1.0 / self.units.thermal_energy(self.params.t_int()),
        }
    }

    /// Evaluates the density, checking the state against the species table.
    pub fn eval(&self, w: &ParticleState) -> Result<f64> {
        w.check(&self.spec)?;
        Ok(self.density(w))
    }

    pub(crate) fn density(&self, w: &ParticleState) -> f64 {
        let s = w.species;
        let ll = self.log_linear();
        let m = self.spec.mass(s);
        let mut log = self.log_norm[s] - 0.5 * ll.beta_kin * m * (w.v - ll.u).norm_sq();
        if log == f64::NEG_INFINITY {
            return 0.0;
        }
        log -= ll.beta_int * w.internal_energy(&self.spec);
        log.exp() * state_weight(&self.spec, w)
    }

    pub fn moments(&self, species: usize) -> Result<Moments> {
        let s = self
            .spec
            .species
            .get(species)
            .ok_or_else(|| Error::invalid(format!("species {species} out of range")))?;
        let mut p = self.params.clone();
        p.densities = vec![self.params.densities[species]];
        equilibrium_moments(&p, &s.energy, s.mass, self.units)
    }

    /// Draws one particle of `species` from this density.
    pub fn sample<R: Rng + ?Sized>(&self, species: usize, rng: &mut R) -> ParticleState {
        let m = self.spec.mass(species);
        let kt_kin = self.units.thermal_energy(self.params.t_kin());
        let kt_int = self.units.thermal_energy(self.params.t_int());
        let normal = Normal::new(0.0, (kt_kin / m).sqrt()).expect("positive width");
        let u = self.params.u;
        let v = Vec3::new(
            u[0] + normal.sample(rng),
            u[1] + normal.sample(rng),
            u[2] + normal.sample(rng),
        );
        let internal = match self.spec.energy(species) {
            EnergyModel::Monatomic => Internal::None,
            EnergyModel::ContinuousPowerLaw { delta } => {
                Internal::Continuous(Gamma::new(delta / 2.0, kt_int).expect("positive shape").sample(rng))
            }
            EnergyModel::DiscreteLevels { levels } => Internal::Level(sample_level(levels, kt_int, rng)),
        };
        ParticleState {
            species,
            v,
            internal,
        }
    }
}

pub(crate) fn sample_level<R: Rng + ?Sized>(levels: &[crate::model::Level], kt: f64, rng: &mut R) -> usize {
    let e0 = levels[0].energy;
    let w: Vec<f64> = levels.iter().map(|l| l.degeneracy * (-(l.energy - e0) / kt).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (k, wk) in w.iter().enumerate() {
        if x < *wk {
            return k;
        }
        x -= wk;
    }
    levels.len() - 1
}

/// Value of `M'M'_*Φ - M M_*` at one collision configuration, with its reference scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetailedBalance {
    pub gain: f64,
    pub loss: f64,
    pub residual: f64,
}

impl DetailedBalance {
    pub fn relative(&self) -> f64 {
        let scale = self.gain.abs().max(self.loss.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.residual.abs() / scale
        }
    }
}

/// Direct evaluation of `M(post_0) M(post_1) Φ - M(pre_0) M(pre_1)`.
pub fn detailed_balance_residual(
    m: &Maxwellian,
    pre: [ParticleState; 2],
    post: [ParticleState; 2],
) -> Result<DetailedBalance> {
    let d = crate::collide::invariant_defect(&m.spec, pre, post)?;
    if d.relative() > 1e-10 {
        return Err(Error::invalid(format!(
            "sample is not an admissible collision (relative defect {:e})",
            d.relative()
        )));
    }
    let loss = m.density(&pre[0]) * m.density(&pre[1]);
    let gain = m.density(&post[0]) * m.density(&post[1]) * phi_factor(&m.spec, &pre, &post);
    Ok(DetailedBalance {
        gain,
        loss,
        residual: gain - loss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: f64,
    pub u: Vec3,
    /// Per-component velocity variance `k_B T_kin / m`.
    pub velocity_variance: f64,
    /// Temperature recovered from the velocity variance.
    pub temperature: f64,
    pub mean_internal: f64,
}

pub fn equilibrium_moments(params: &EquilibriumParams, energy: &EnergyModel, mass: f64, units: UnitSystem) -> Result<Moments> {
    params.validate()?;
    if !(mass > 0.0) {
        return Err(Error::domain("mass must be positive"));
    }
    let kt_kin = units.thermal_energy(params.t_kin());
    let kt_int = units.thermal_energy(params.t_int());
    Ok(Moments {
        n: params.total_density(),
        u: params.u,
        velocity_variance: kt_kin / mass,
        temperature: params.t_kin(),
        mean_internal: mean_internal_energy(energy, kt_int),
    })
}

pub(crate) fn mean_internal_energy(energy: &EnergyModel, kt: f64) -> f64 {
    match energy {
        EnergyModel::Monatomic => 0.0,
        EnergyModel::ContinuousPowerLaw { delta } => 0.5 * delta * kt,
        EnergyModel::DiscreteLevels { levels } => {
            let e0 = levels[0].energy;
            let (mut num, mut den) = (0.0, 0.0);
            for l in levels {
                let w = l.degeneracy * (-(l.energy - e0) / kt).exp();
                num += w * l.energy;
                den += w;
            }
            num / den
        }
    }
}
