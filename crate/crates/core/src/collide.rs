//! Exact binary collision rules.
//!
//! Every family shares the center-of-mass construction
//!
//! ```text
//! v'   = c + m_j/(m_i+m_j) |V'| σ
//! v'_* = c - m_i/(m_i+m_j) |V'| σ,      c = (m_i v + m_j v_*)/(m_i+m_j)
//! ```
//!
//! and differs only in how `|V'|` and the post-collisional internal states are chosen:
//! Borgnakke-Larsen splits `E` with `(r, R)`, resonant collisions keep `|V'| = |V|` and
//! redistribute `I + I_*`, discrete collisions pick target levels and pay the energy gap
//! out of the kinetic energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EnergyModel, MixtureSpec};
use crate::vec3::{UnitVec, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Internal {
    None,
    Continuous(f64),
    Level(usize),
}

/// Velocity plus internal coordinate of one molecule of a given species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub species: usize,
    pub v: Vec3,
    pub internal: Internal,
}

impl ParticleState {
    pub fn monatomic(species: usize, v: Vec3) -> Self {
        ParticleState {
            species,
            v,
            internal: Internal::None,
        }
    }

    pub fn continuous(species: usize, v: Vec3, internal: f64) -> Self {
        ParticleState {
            species,
            v,
            internal: Internal::Continuous(internal),
        }
    }

    pub fn level(species: usize, v: Vec3, k: usize) -> Self {
        ParticleState {
            species,
            v,
            internal: Internal::Level(k),
        }
    }

    /// Internal energy carried by this state (zero for structureless molecules).
    pub fn internal_energy(&self, spec: &MixtureSpec) -> f64 {
        match self.internal {
            Internal::None => 0.0,
            Internal::Continuous(i) => i,
            Internal::Level(k) => spec.energy(self.species).levels().map_or(0.0, |l| l[k].energy),
        }
    }

    pub fn continuous_internal(&self) -> Option<f64> {
        match self.internal {
            Internal::Continuous(i) => Some(i),
            _ => None,
        }
    }

    pub fn kinetic_energy(&self, spec: &MixtureSpec) -> f64 {
        0.5 * spec.mass(self.species) * self.v.norm_sq()
    }

    /// Checks that the internal coordinate matches the species' energy model.
    pub fn check(&self, spec: &MixtureSpec) -> Result<()> {
        let species = spec
            .species
            .get(self.species)
            .ok_or_else(|| Error::invalid(format!("species index {} out of range", self.species)))?;
        if !self.v.is_finite() {
            return Err(Error::invalid("velocity must be finite"));
        }
        match (&species.energy, self.internal) {
            (EnergyModel::Monatomic, Internal::None) => Ok(()),
            (EnergyModel::ContinuousPowerLaw { .. }, Internal::Continuous(i)) => {
                if i >= 0.0 && i.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("internal energy must be nonnegative, got {i}")))
                }
            }
            (EnergyModel::DiscreteLevels { levels }, Internal::Level(k)) => {
                if k < levels.len() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "level {k} out of range for species '{}' with {} levels",
                        species.label,
                        levels.len()
                    )))
                }
            }
            (model, internal) => Err(Error::invalid(format!(
                "internal state {internal:?} does not match energy model {model:?} of species '{}'",
                species.label
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CollisionParams {
    Monatomic {
        sigma: UnitVec,
    },
    BorgnakkeLarsen {
        r: f64,
        big_r: f64,
        sigma: UnitVec,
    },
    PolyMono {
        big_r: f64,
        sigma: UnitVec,
    },
    Resonant {
        internal_post: f64,
        sigma: UnitVec,
    },
    Discrete {
        level_post: usize,
        level_post_star: usize,
        sigma: UnitVec,
    },
}

impl CollisionParams {
    pub fn sigma(&self) -> UnitVec {
        match *self {
            CollisionParams::Monatomic { sigma }
            | CollisionParams::BorgnakkeLarsen { sigma, .. }
            | CollisionParams::PolyMono { sigma, .. }
            | CollisionParams::Resonant { sigma, .. }
            | CollisionParams::Discrete { sigma, .. } => sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionOutcome {
    /// Post-collisional states; a copy of the input when `admissible` is false.
    pub post: [ParticleState; 2],
    pub admissible: bool,
    /// Center-of-mass energy `E`.
    pub energy: f64,
    /// `8/((1-r)(1-R))` for single-species Borgnakke-Larsen collisions.
    pub jacobian: Option<f64>,
}

/// Center-of-mass energy `μ|V|²/2 + I + I_*` of a pair.
pub fn total_energy(spec: &MixtureSpec, pair: [ParticleState; 2]) -> Result<f64> {
    for p in &pair {
        p.check(spec)?;
    }
    Ok(pair_energy(spec, &pair))
}

pub(crate) fn pair_energy(spec: &MixtureSpec, pair: &[ParticleState; 2]) -> f64 {
    let mu = spec.reduced_mass(pair[0].species, pair[1].species);
    0.5 * mu * (pair[0].v - pair[1].v).norm_sq()
        + pair[0].internal_energy(spec)
        + pair[1].internal_energy(spec)
}

/// Elastic collision of two molecules of equal mass.
pub fn collide_monatomic(v: Vec3, v_star: Vec3, sigma: Vec3) -> Result<(Vec3, Vec3)> {
    let sigma = UnitVec::new(sigma).map_err(|e| Error::domain(e.to_string()))?;
    let speed = (v - v_star).norm();
    Ok(post_velocities(1.0, 1.0, v, v_star, speed, sigma))
}

/// Center-of-mass rule shared by all families.
pub(crate) fn post_velocities(
    m_i: f64,
    m_j: f64,
    v: Vec3,
    v_star: Vec3,
    rel_speed_post: f64,
    sigma: UnitVec,
) -> (Vec3, Vec3) {
    let s = sigma.get();
    if m_i == m_j {
        let center = (v + v_star) * 0.5;
        let half = s * (0.5 * rel_speed_post);
        (center + half, center - half)
    } else {
        let total = m_i + m_j;
        let center = (v * m_i + v_star * m_j) / total;
        (
            center + s * (m_j / total * rel_speed_post),
            center - s * (m_i / total * rel_speed_post),
        )
    }
}

fn is_poly(spec: &MixtureSpec, species: usize) -> bool {
    spec.energy(species).is_continuous()
}

fn check_unit_interval(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {x} must lie in [0,1]")))
    }
}

/// Dispatches on the parameter variant.
pub fn collide(spec: &MixtureSpec, pair: [ParticleState; 2], params: CollisionParams) -> Result<CollisionOutcome> {
    match params {
        CollisionParams::Resonant { .. } => collide_resonant(spec, pair, params),
        CollisionParams::Discrete { .. } => collide_discrete(spec, pair, params),
        _ => collide_borgnakke_larsen(spec, pair, params),
    }
}

/// Borgnakke-Larsen exchange for single species and mixtures of monatomic and
/// continuous-energy polyatomic species.
pub fn collide_borgnakke_larsen(
    spec: &MixtureSpec,
    pair: [ParticleState; 2],
    params: CollisionParams,
) -> Result<CollisionOutcome> {
    for p in &pair {
        p.check(spec)?;
    }
    let (i, j) = (pair[0].species, pair[1].species);
    let (poly_i, poly_j) = (is_poly(spec, i), is_poly(spec, j));
    for &s in &[i, j] {
        if spec.energy(s).is_discrete() {
            return Err(Error::FamilyMismatch(format!(
                "species '{}' has discrete levels; use discrete collision parameters",
                spec.species[s].label
            )));
        }
    }
    match (poly_i, poly_j, params) {
        (false, false, CollisionParams::Monatomic { .. })
        | (false, false, CollisionParams::BorgnakkeLarsen { .. })
        | (false, false, CollisionParams::PolyMono { .. }) => {}
        (true, true, CollisionParams::BorgnakkeLarsen { r, big_r, .. }) => {
            check_unit_interval("r", r)?;
            check_unit_interval("R", big_r)?;
        }
        (true, false, CollisionParams::PolyMono { big_r, .. })
        | (false, true, CollisionParams::PolyMono { big_r, .. }) => check_unit_interval("R", big_r)?,
        (pi, pj, p) => {
            return Err(Error::FamilyMismatch(format!(
                "parameters {p:?} do not match a pair with polyatomic flags ({pi}, {pj})"
            )))
        }
    }
    Ok(bl_outcome(spec, &pair, &params))
}

/// Borgnakke-Larsen post states without validation.
pub(crate) fn bl_outcome(spec: &MixtureSpec, pair: &[ParticleState; 2], params: &CollisionParams) -> CollisionOutcome {
    let (i, j) = (pair[0].species, pair[1].species);
    let (m_i, m_j) = (spec.mass(i), spec.mass(j));
    let energy = pair_energy(spec, pair);
    let mu = m_i * m_j / (m_i + m_j);
    let sigma = params.sigma();
    let mut post = *pair;
    let mut jacobian = None;
    let rel_speed_post = match *params {
        CollisionParams::BorgnakkeLarsen { r, big_r, .. } if is_poly(spec, i) && is_poly(spec, j) => {
            let internal = (1.0 - big_r) * energy;
            post[0].internal = Internal::Continuous(r * internal);
            post[1].internal = Internal::Continuous((1.0 - r) * internal);
            if i == j && r < 1.0 && big_r < 1.0 {
                jacobian = Some(8.0 / ((1.0 - r) * (1.0 - big_r)));
            }
            (2.0 * big_r * energy / mu).sqrt()
        }
        CollisionParams::PolyMono { big_r, .. } => {
            let target = if is_poly(spec, i) { 0 } else { 1 };
            post[target].internal = Internal::Continuous((1.0 - big_r) * energy);
            (2.0 * big_r * energy / mu).sqrt()
        }
        _ => (pair[0].v - pair[1].v).norm(),
    };
    let (v, v_star) = post_velocities(m_i, m_j, pair[0].v, pair[1].v, rel_speed_post, sigma);
    post[0].v = v;
    post[1].v = v_star;
    CollisionOutcome {
        post,
        admissible: true,
        energy,
        jacobian,
    }
}

/// Resonant collision: kinetic and internal energy are conserved separately.
pub fn collide_resonant(spec: &MixtureSpec, pair: [ParticleState; 2], params: CollisionParams) -> Result<CollisionOutcome> {
    for p in &pair {
        p.check(spec)?;
    }
    let CollisionParams::Resonant { internal_post, .. } = params else {
        return Err(Error::FamilyMismatch(format!("expected resonant parameters, got {params:?}")));
    };
    if pair[0].species != pair[1].species || !is_poly(spec, pair[0].species) {
        return Err(Error::FamilyMismatch(
            "resonant collisions need two molecules of one continuous-energy species".into(),
        ));
    }
    let total = pair[0].internal_energy(spec) + pair[1].internal_energy(spec);
    if !(0.0..=total).contains(&internal_post) {
        return Err(Error::domain(format!(
            "I' = {internal_post} must lie in [0, I + I_*] = [0, {total}]"
        )));
    }
    Ok(resonant_outcome(spec, &pair, internal_post, params.sigma()))
}

pub(crate) fn resonant_outcome(
    spec: &MixtureSpec,
    pair: &[ParticleState; 2],
    internal_post: f64,
    sigma: UnitVec,
) -> CollisionOutcome {
    let m = spec.mass(pair[0].species);
    let (i, i_star) = (pair[0].internal_energy(spec), pair[1].internal_energy(spec));
    let speed = (pair[0].v - pair[1].v).norm();
    let (v, v_star) = post_velocities(m, m, pair[0].v, pair[1].v, speed, sigma);
    let post = [
        ParticleState::continuous(pair[0].species, v, internal_post),
        ParticleState::continuous(pair[1].species, v_star, i + i_star - internal_post),
    ];
    CollisionOutcome {
        post,
        admissible: true,
        energy: pair_energy(spec, pair),
        jacobian: None,
    }
}

fn level_energy(spec: &MixtureSpec, species: usize, level: usize) -> Result<f64> {
    match spec.energy(species) {
        EnergyModel::DiscreteLevels { levels } => levels
            .get(level)
            .map(|l| l.energy)
            .ok_or_else(|| Error::invalid(format!("target level {level} out of range"))),
        EnergyModel::Monatomic if level == 0 => Ok(0.0),
        EnergyModel::Monatomic => Err(Error::invalid("monatomic species only has level 0")),
        EnergyModel::ContinuousPowerLaw { .. } => Err(Error::FamilyMismatch(
            "discrete collision with a continuous-energy species".into(),
        )),
    }
}

/// Collision between discrete-level (or monatomic) molecules. Inadmissible channels,
/// where the kinetic energy cannot pay the internal energy gap, are reported with
/// `admissible = false` rather than as errors.
pub fn collide_discrete(spec: &MixtureSpec, pair: [ParticleState; 2], params: CollisionParams) -> Result<CollisionOutcome> {
    for p in &pair {
        p.check(spec)?;
    }
    let CollisionParams::Discrete {
        level_post,
        level_post_star,
        sigma,
    } = params
    else {
        return Err(Error::FamilyMismatch(format!("expected discrete parameters, got {params:?}")));
    };
    let (i, j) = (pair[0].species, pair[1].species);
    let pre_i = level_energy(spec, i, level_index(&pair[0]))?;
    let pre_j = level_energy(spec, j, level_index(&pair[1]))?;
    let gap = level_energy(spec, i, level_post)? + level_energy(spec, j, level_post_star)? - pre_i - pre_j;
    Ok(discrete_outcome(spec, &pair, gap, level_post, level_post_star, sigma))
}

fn level_index(p: &ParticleState) -> usize {
    match p.internal {
        Internal::Level(k) => k,
        _ => 0,
    }
}

pub(crate) fn discrete_outcome(
    spec: &MixtureSpec,
    pair: &[ParticleState; 2],
    gap: f64,
    level_post: usize,
    level_post_star: usize,
    sigma: UnitVec,
) -> CollisionOutcome {
    let (i, j) = (pair[0].species, pair[1].species);
    let (m_i, m_j) = (spec.mass(i), spec.mass(j));
    let mu = m_i * m_j / (m_i + m_j);
    let energy = pair_energy(spec, pair);
    let post_sq = (pair[0].v - pair[1].v).norm_sq() - 2.0 * gap / mu;
    if post_sq < 0.0 {
        return CollisionOutcome {
            post: *pair,
            admissible: false,
            energy,
            jacobian: None,
        };
    }
    let (v, v_star) = post_velocities(m_i, m_j, pair[0].v, pair[1].v, post_sq.sqrt(), sigma);
    let relevel = |p: &ParticleState, v: Vec3, k: usize| ParticleState {
        species: p.species,
        v,
        internal: match p.internal {
            Internal::Level(_) => Internal::Level(k),
            other => other,
        },
    };
    CollisionOutcome {
        post: [relevel(&pair[0], v, level_post), relevel(&pair[1], v_star, level_post_star)],
        admissible: true,
        energy,
        jacobian: None,
    }
}

/// Differences (post minus pre) of the conserved quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defects {
    pub momentum: Vec3,
    pub energy: f64,
    pub kinetic: f64,
    pub internal: f64,
    /// Scales used by [`Defects::relative`]: `Σ m|v|` and the total pre-collision energy.
    pub momentum_scale: f64,
    pub energy_scale: f64,
}

impl Defects {
    /// Largest of the relative momentum and total-energy defects.
    pub fn relative(&self) -> f64 {
        let p = self.momentum.0.iter().fold(0.0f64, |a, c| a.max(c.abs())) / self.momentum_scale.max(f64::MIN_POSITIVE);
        let e = self.energy.abs() / self.energy_scale.max(f64::MIN_POSITIVE);
        p.max(e)
    }

    /// Kinetic and internal defects relative to the total energy, reported separately.
    pub fn relative_split(&self) -> (f64, f64) {
        let s = self.energy_scale.max(f64::MIN_POSITIVE);
        (self.kinetic.abs() / s, self.internal.abs() / s)
    }
}

pub fn invariant_defect(spec: &MixtureSpec, pre: [ParticleState; 2], post: [ParticleState; 2]) -> Result<Defects> {
    for p in pre.iter().chain(post.iter()) {
        p.check(spec)?;
    }
    if pre[0].species != post[0].species || pre[1].species != post[1].species {
        return Err(Error::invalid("pre and post pairs must have matching species"));
    }
    Ok(defects(spec, &pre, &post))
}

pub(crate) fn defects(spec: &MixtureSpec, pre: &[ParticleState; 2], post: &[ParticleState; 2]) -> Defects {
    let momentum = |p: &ParticleState| p.v * spec.mass(p.species);
    let kin = |s: &[ParticleState; 2]| s[0].kinetic_energy(spec) + s[1].kinetic_energy(spec);
    let int = |s: &[ParticleState; 2]| s[0].internal_energy(spec) + s[1].internal_energy(spec);
    let kinetic = kin(post) - kin(pre);
    let internal = int(post) - int(pre);
    Defects {
        momentum: (momentum(&post[0]) + momentum(&post[1])) - (momentum(&pre[0]) + momentum(&pre[1])),
        energy: (kin(post) + int(post)) - (kin(pre) + int(pre)),
        kinetic,
        internal,
        momentum_scale: pre.iter().map(|p| spec.mass(p.species) * p.v.norm()).sum(),
        energy_scale: kin(pre) + int(pre),
    }
}

/// Parameters `(r', R', σ')` of the collision leading from `post` back to `pre`,
/// computed from the `pre` pair. `None` marks an undefined component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseParameters {
    pub r: Option<f64>,
    pub big_r: Option<f64>,
    pub sigma: Option<UnitVec>,
}

/// Shell tolerance for [`inverse_parameters`].
const SHELL_TOLERANCE: f64 = 1e-10;

pub fn inverse_parameters(spec: &MixtureSpec, pre: [ParticleState; 2], post: [ParticleState; 2]) -> Result<InverseParameters> {
    let d = invariant_defect(spec, pre, post)?;
    if d.relative() > SHELL_TOLERANCE {
        return Err(Error::invalid(format!(
            "pairs are not on the same conservation shell (relative defect {:e})",
            d.relative()
        )));
    }
    let (i, j) = (pre[0].species, pre[1].species);
    let mu = spec.reduced_mass(i, j);
    let rel = pre[0].v - pre[1].v;
    let energy = pair_energy(spec, &pre);
    let big_r = (energy > 0.0).then(|| 0.5 * mu * rel.norm_sq() / energy);
    let r = if is_poly(spec, i) && is_poly(spec, j) {
        let (a, b) = (pre[0].internal_energy(spec), pre[1].internal_energy(spec));
        (a + b > 0.0).then(|| a / (a + b))
    } else {
        None
    };
    Ok(InverseParameters {
        r,
        big_r,
        sigma: UnitVec::normalize(rel),
    })
}

/// Jacobian `8/((1-r)(1-R))` of `(v_*, I_*) -> (v'_*, I'_*)` for single-species
/// Borgnakke-Larsen collisions.
pub fn jacobian_bl(r: f64, big_r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) || !(0.0..1.0).contains(&big_r) {
        return Err(Error::domain(format!("jacobian needs r, R in [0,1), got r = {r}, R = {big_r}")));
    }
    Ok(8.0 / ((1.0 - r) * (1.0 - big_r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelModel, Species};
    use proptest::prelude::*;

    fn single(delta: f64, m: f64) -> MixtureSpec {
        MixtureSpec::single(
            Species::new("p", m, EnergyModel::continuous(delta)),
            KernelModel::power_law(1.0, 0.0),
        )
    }

    fn unit(x: f64, y: f64, z: f64) -> UnitVec {
        UnitVec::normalize(Vec3::new(x, y, z)).unwrap()
    }

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn total_energy_examples() {
        let spec = single(2.0, 2.0);
        let pair = [
            ParticleState::continuous(0, Vec3::new(1.0, 0.0, 0.0), 1.0),
            ParticleState::continuous(0, Vec3::new(-1.0, 0.0, 0.0), 1.0),
        ];
        assert_eq!(total_energy(&spec, pair).unwrap(), 4.0);

        let still = [
            ParticleState::continuous(0, Vec3::new(0.3, 0.1, 0.0), 0.0),
            ParticleState::continuous(0, Vec3::new(0.3, 0.1, 0.0), 0.0),
        ];
        assert_eq!(total_energy(&spec, still).unwrap(), 0.0);

        let mix = MixtureSpec::uniform(
            vec![
                Species::new("a", 1.0, EnergyModel::Monatomic),
                Species::new("b", 3.0, EnergyModel::Monatomic),
            ],
            KernelModel::power_law(1.0, 0.0),
        );
        let pair = [
            ParticleState::monatomic(0, Vec3::new(2.0, 0.0, 0.0)),
            ParticleState::monatomic(1, Vec3::new(-2.0, 0.0, 0.0)),
        ];
        assert!((total_energy(&mix, pair).unwrap() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn monatomic_examples() {
        let v = Vec3::new(1.0, 0.0, 0.0);
        let vs = Vec3::new(-1.0, 0.0, 0.0);
        let (a, b) = collide_monatomic(v, vs, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!((a, b), (v, vs));
        let (a, b) = collide_monatomic(v, vs, Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(a, Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(b, Vec3::new(0.0, -1.0, 0.0));
        assert!(collide_monatomic(v, vs, Vec3::new(0.0, 2.0, 0.0)).is_err());
    }

    #[test]
    fn bl_example() {
        let spec = single(2.0, 2.0);
        let pair = [
            ParticleState::continuous(0, Vec3::new(1.0, 0.0, 0.0), 1.0),
            ParticleState::continuous(0, Vec3::new(-1.0, 0.0, 0.0), 1.0),
        ];
        let params = CollisionParams::BorgnakkeLarsen {
            r: 0.5,
            big_r: 0.25,
            sigma: unit(1.0, 0.0, 0.0),
        };
        let out = collide_borgnakke_larsen(&spec, pair, params).unwrap();
        let h = 0.5f64.sqrt();
        assert!(close(out.post[0].v, Vec3::new(h, 0.0, 0.0), 1e-15));
        assert!(close(out.post[1].v, Vec3::new(-h, 0.0, 0.0), 1e-15));
        assert_eq!(out.post[0].internal, Internal::Continuous(1.5));
        assert_eq!(out.post[1].internal, Internal::Continuous(1.5));
        assert!((total_energy(&spec, out.post).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(out.jacobian, Some(8.0 / (0.5 * 0.75)));

        let inv = inverse_parameters(&spec, pair, out.post).unwrap();
        assert!((inv.big_r.unwrap() - 0.5).abs() < 1e-15);
        assert!((inv.r.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(inv.sigma.unwrap().get(), Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn bl_identity_without_internal_energy() {
        let spec = single(3.0, 1.0);
        let pair = [
            ParticleState::continuous(0, Vec3::new(0.2, 1.0, -0.5), 0.0),
            ParticleState::continuous(0, Vec3::new(-1.0, 0.4, 0.3), 0.0),
        ];
        let sigma = UnitVec::normalize(pair[0].v - pair[1].v).unwrap();
        for r in [0.0, 0.3, 1.0] {
            let out = collide_borgnakke_larsen(&spec, pair, CollisionParams::BorgnakkeLarsen { r, big_r: 1.0, sigma }).unwrap();
            assert!(close(out.post[0].v, pair[0].v, 1e-14));
            assert!(close(out.post[1].v, pair[1].v, 1e-14));
            assert_eq!(out.post[0].internal_energy(&spec), 0.0);
        }
    }

    #[test]
    fn poly_mono_example() {
        let spec = MixtureSpec::uniform(
            vec![
                Species::new("p", 1.0, EnergyModel::continuous(2.5)),
                Species::new("m", 1.0, EnergyModel::Monatomic),
            ],
            KernelModel::power_law(1.0, 0.0),
        );
        let pair = [
            ParticleState::continuous(0, Vec3::new(1.0, 2.0, 0.0), 2.0),
            ParticleState::monatomic(1, Vec3::new(-1.0, 0.0, 1.0)),
        ];
        let e = 0.25 * (pair[0].v - pair[1].v).norm_sq() + 2.0;
        let out = collide(&spec, pair, CollisionParams::PolyMono { big_r: 0.5, sigma: unit(0.0, 0.0, 1.0) }).unwrap();
        assert!((out.post[0].internal_energy(&spec) - e / 2.0).abs() < 1e-14);
        assert!(defects(&spec, &pair, &out.post).relative() < 1e-14);

        // mono first, poly second
        let swapped = [pair[1], pair[0]];
        let out = collide(&spec, swapped, CollisionParams::PolyMono { big_r: 0.5, sigma: unit(0.0, 0.0, 1.0) }).unwrap();
        assert!((out.post[1].internal_energy(&spec) - e / 2.0).abs() < 1e-14);
    }

    #[test]
    fn parameter_mismatch_rejected() {
        let spec = single(2.0, 1.0);
        let pair = [
            ParticleState::continuous(0, Vec3::new(1.0, 0.0, 0.0), 1.0),
            ParticleState::continuous(0, Vec3::ZERO, 1.0),
        ];
        let sigma = unit(0.0, 1.0, 0.0);
        assert!(collide_borgnakke_larsen(&spec, pair, CollisionParams::PolyMono { big_r: 0.5, sigma }).is_err());
        assert!(collide_borgnakke_larsen(&spec, pair, CollisionParams::BorgnakkeLarsen { r: 1.5, big_r: 0.5, sigma }).is_err());
        let bad_state = [ParticleState::monatomic(0, Vec3::ZERO), pair[1]];
        assert!(collide(&spec, bad_state, CollisionParams::Monatomic { sigma }).is_err());
    }

    #[test]
    fn resonant_examples() {
        let spec = single(3.0, 1.0);
        let pair = [
            ParticleState::continuous(0, Vec3::new(0.5, -1.0, 0.2), 2.0),
            ParticleState::continuous(0, Vec3::new(-0.3, 0.4, 1.0), 0.0),
        ];
        let sigma = UnitVec::normalize(pair[0].v - pair[1].v).unwrap();
        let out = collide_resonant(&spec, pair, CollisionParams::Resonant { internal_post: 2.0, sigma }).unwrap();
        assert!(close(out.post[0].v, pair[0].v, 1e-15));
        assert!(close(out.post[1].v, pair[1].v, 1e-15));
        assert_eq!(out.post[1].internal_energy(&spec), 0.0);

        let out = collide_resonant(&spec, pair, CollisionParams::Resonant { internal_post: 0.5, sigma: unit(1.0, 1.0, 0.0) }).unwrap();
        assert_eq!(out.post[1].internal_energy(&spec), 1.5);
        let d = defects(&spec, &pair, &out.post);
        let (k, i) = d.relative_split();
        assert!(k < 1e-14 && i == 0.0);

        assert!(collide_resonant(&spec, pair, CollisionParams::Resonant { internal_post: 2.5, sigma }).is_err());
    }

    fn discrete_spec(m: f64) -> MixtureSpec {
        MixtureSpec::single(
            Species::new("d", m, EnergyModel::discrete([(0.0, 1.0), (1.0, 3.0), (3.0, 5.0)])),
            KernelModel::power_law(1.0, 0.0),
        )
    }

    #[test]
    fn discrete_examples() {
        let spec = discrete_spec(2.0);
        let pair = [
            ParticleState::level(0, Vec3::new(1.0, 0.0, 0.0), 0),
            ParticleState::level(0, Vec3::new(-1.0, 0.0, 0.0), 0),
        ];
        let sigma = unit(1.0, 0.0, 0.0);
        let same = collide_discrete(&spec, pair, CollisionParams::Discrete { level_post: 0, level_post_star: 0, sigma }).unwrap();
        assert!(same.admissible);
        assert_eq!(same.post, pair);

        // ΔI = 1: |V'| = sqrt(4 - 4/2) = sqrt 2
        let up = collide_discrete(&spec, pair, CollisionParams::Discrete { level_post: 1, level_post_star: 0, sigma }).unwrap();
        assert!(up.admissible);
        assert!(((up.post[0].v - up.post[1].v).norm() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(up.post[0].internal, Internal::Level(1));

        // ΔI = 3 needs |V|² >= 6
        let no = collide_discrete(&spec, pair, CollisionParams::Discrete { level_post: 2, level_post_star: 0, sigma }).unwrap();
        assert!(!no.admissible);
        assert!(collide_discrete(&spec, pair, CollisionParams::Discrete { level_post: 3, level_post_star: 0, sigma }).is_err());
    }

    #[test]
    fn defect_is_linear_in_perturbation() {
        let spec = single(2.0, 2.0);
        let pair = [
            ParticleState::continuous(0, Vec3::new(1.0, 0.0, 0.0), 1.0),
            ParticleState::continuous(0, Vec3::new(-1.0, 0.0, 0.0), 1.0),
        ];
        let sigma = unit(0.0, 1.0, 0.0);
        let out = collide(&spec, pair, CollisionParams::BorgnakkeLarsen { r: 0.3, big_r: 0.6, sigma }).unwrap();
        let eps = 1e-3;
        let mut post = out.post;
        post[0].v += Vec3::new(eps, 0.0, 0.0);
        let d = invariant_defect(&spec, pair, post).unwrap();
        assert!((d.momentum[0] - 2.0 * eps).abs() < 1e-15);
        assert_eq!(d.momentum[1], 0.0);
        assert_eq!(d.momentum[2], 0.0);
    }

    #[test]
    fn inverse_parameters_edge_cases() {
        let spec = single(2.0, 1.0);
        let pair = [
            ParticleState::continuous(0, Vec3::new(0.5, 0.5, 0.5), 1.0),
            ParticleState::continuous(0, Vec3::new(0.5, 0.5, 0.5), 2.0),
        ];
        let inv = inverse_parameters(&spec, pair, pair).unwrap();
        assert_eq!(inv.big_r, Some(0.0));
        assert!(inv.sigma.is_none());
        assert!((inv.r.unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let cold = [
            ParticleState::continuous(0, Vec3::new(1.0, 0.0, 0.0), 0.0),
            ParticleState::continuous(0, Vec3::new(0.0, 0.0, 0.0), 0.0),
        ];
        assert_eq!(inverse_parameters(&spec, cold, cold).unwrap().r, None);

        let mut off = pair;
        off[0].v = Vec3::new(2.0, 0.0, 0.0);
        assert!(inverse_parameters(&spec, pair, off).is_err());
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(jacobian_bl(0.0, 0.0).unwrap(), 8.0);
        assert_eq!(jacobian_bl(0.5, 0.5).unwrap(), 32.0);
        assert!(jacobian_bl(1.0, 0.0).is_err());
        assert!(jacobian_bl(0.0, 1.0).is_err());
        let mut last = 0.0;
        for k in 0..100 {
            let j = jacobian_bl(k as f64 / 100.0, 0.2).unwrap();
            assert!(j > last);
            last = j;
        }
    }

    fn arb_vec() -> impl Strategy<Value = Vec3> {
        (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn arb_sigma() -> impl Strategy<Value = UnitVec> {
        arb_vec().prop_filter_map("nonzero", UnitVec::normalize)
    }

    proptest! {
        #[test]
        fn bl_round_trip(v in arb_vec(), vs in arb_vec(), i in 0.01f64..5.0, is in 0.01f64..5.0,
                         r in 0.01f64..0.99, big_r in 0.01f64..0.99, sigma in arb_sigma(), m in 0.5f64..4.0) {
            let spec = single(2.5, m);
            let pair = [ParticleState::continuous(0, v, i), ParticleState::continuous(0, vs, is)];
            let out = collide(&spec, pair, CollisionParams::BorgnakkeLarsen { r, big_r, sigma }).unwrap();
            prop_assert!(defects(&spec, &pair, &out.post).relative() <= 1e-12);
            let inv = inverse_parameters(&spec, out.post, pair).unwrap();
            prop_assert!((inv.r.unwrap() - r).abs() <= 1e-10);
            prop_assert!((inv.big_r.unwrap() - big_r).abs() <= 1e-10);
            prop_assert!((inv.sigma.unwrap().get() - sigma.get()).norm() <= 1e-10);
            // the reverse collision, with parameters read off the original pair, lands on it
            let rev = inverse_parameters(&spec, pair, out.post).unwrap();
            prop_assume!(rev.sigma.is_some() && rev.r.is_some());
            let back = collide(&spec, out.post, CollisionParams::BorgnakkeLarsen {
                r: rev.r.unwrap(), big_r: rev.big_r.unwrap(), sigma: rev.sigma.unwrap() }).unwrap();
            let vscale = 1.0 + v.norm() + vs.norm();
            prop_assert!((back.post[0].v - v).norm() <= 1e-10 * vscale);
            prop_assert!((back.post[1].internal_energy(&spec) - is).abs() <= 1e-10 * (1.0 + i + is));
        }

        #[test]
        fn particle_swap_symmetry(v in arb_vec(), vs in arb_vec(), i in 0.0f64..5.0, is in 0.0f64..5.0,
                                  r in 0.0f64..1.0, big_r in 0.0f64..1.0, sigma in arb_sigma()) {
            let spec = MixtureSpec::uniform(
                vec![Species::new("a", 1.0, EnergyModel::continuous(2.0)),
                     Species::new("b", 2.5, EnergyModel::continuous(3.0))],
                KernelModel::power_law(1.0, 0.0));
            let pair = [ParticleState::continuous(0, v, i), ParticleState::continuous(1, vs, is)];
            let a = collide(&spec, pair, CollisionParams::BorgnakkeLarsen { r, big_r, sigma }).unwrap();
            let b = collide(&spec, [pair[1], pair[0]], CollisionParams::BorgnakkeLarsen { r: 1.0 - r, big_r, sigma: -sigma }).unwrap();
            let tol = 1e-12 * (1.0 + v.norm() + vs.norm() + i + is);
            prop_assert!((a.post[0].v - b.post[1].v).norm() <= tol);
            prop_assert!((a.post[1].v - b.post[0].v).norm() <= tol);
            prop_assert!((a.post[0].internal_energy(&spec) - b.post[1].internal_energy(&spec)).abs() <= tol);
        }

        #[test]
        fn discrete_mixture_conserves(v in arb_vec(), vs in arb_vec(), k in 0usize..3, l in 0usize..2,
                                      kp in 0usize..3, lp in 0usize..2, sigma in arb_sigma()) {
            let spec = MixtureSpec::uniform(
                vec![Species::new("a", 1.0, EnergyModel::discrete([(0.0, 1.0), (0.7, 2.0), (2.0, 1.0)])),
                     Species::new("b", 3.0, EnergyModel::discrete([(0.2, 1.0), (1.1, 4.0)]))],
                KernelModel::power_law(1.0, 0.0));
            let pair = [ParticleState::level(0, v, k), ParticleState::level(1, vs, l)];
            let out = collide(&spec, pair, CollisionParams::Discrete { level_post: kp, level_post_star: lp, sigma }).unwrap();
            let mu = spec.reduced_mass(0, 1);
            let levels_a = spec.energy(0).levels().unwrap();
            let levels_b = spec.energy(1).levels().unwrap();
            let gap = levels_a[kp].energy + levels_b[lp].energy - levels_a[k].energy - levels_b[l].energy;
            prop_assert_eq!(out.admissible, (v - vs).norm_sq() >= 2.0 * gap / mu);
            if out.admissible {
                prop_assert!(defects(&spec, &pair, &out.post).relative() <= 1e-12);
            }
        }
    }
}
