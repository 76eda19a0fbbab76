//! Spatially homogeneous particle relaxation with majorant (no-time-counter) pair selection.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::collide::{self, Internal, ParticleState};
use crate::equilib::{
    mean_internal_energy, snapped_sum, state_weight, EquilibriumParams, Family, Maxwellian, Temperatures,
};
use crate::error::{Error, Result};
use crate::model::{EnergyModel, MixtureSpec, UnitSystem};
use crate::operator::{Engine, Proposal};
use crate::vec3::Vec3;

/// Initial two-temperature state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    /// Particle count per species.
    pub counts: Vec<usize>,
    pub t_kin: f64,
    pub t_int: f64,
    #[serde(default)]
    pub u: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxConfig {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Record a row every this many steps.
    pub sample_every: usize,
    /// Total number density `n`; the ensemble occupies the volume `N / n`.
    pub density: f64,
    /// Majorant = `safety` × the `1 - tail` quantile of sampled acceptance weights.
    pub majorant_safety: f64,
    pub majorant_tail: f64,
    /// Pair draws used to set each majorant.
    pub majorant_samples: usize,
    /// Abort when the fraction of candidates exceeding the majorant passes this.
    pub max_violation_rate: f64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            dt: 0.05,
            t_end: 5.0,
            seed: 0,
            sample_every: 4,
            density: 1.0,
            majorant_safety: 2.0,
            majorant_tail: 1e-6,
            majorant_samples: 1_000_000,
            max_violation_rate: 1e-4,
        }
    }
}

impl RelaxConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.dt) || !pos(self.t_end) || !pos(self.density) || !pos(self.majorant_safety) {
            return Err(Error::invalid("dt, t_end, density and majorant_safety must be positive"));
        }
        if !(self.majorant_tail > 0.0 && self.majorant_tail < 1.0) {
            return Err(Error::invalid("majorant_tail must lie in (0, 1)"));
        }
        if self.sample_every == 0 || self.majorant_samples == 0 {
            return Err(Error::invalid("sample_every and majorant_samples must be positive"));
        }
        if !(self.max_violation_rate >= 0.0) {
            return Err(Error::invalid("max_violation_rate must be nonnegative"));
        }
        Ok(())
    }
}

/// Collision bookkeeping for one unordered species pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairClass {
    pub i: usize,
    pub j: usize,
    pub majorant: f64,
    #[serde(skip)]
    carry: f64,
}

pub struct Ensemble {
    spec: MixtureSpec,
    units: UnitSystem,
    pub particles: Vec<ParticleState>,
    /// Particle indices per species.
    members: Vec<Vec<usize>>,
    pub time: f64,
    pub collisions: u64,
    pub candidates: u64,
    pub violations: u64,
    pub worst_ratio: f64,
    /// Largest relative invariant defect of any accepted collision.
    pub max_defect: f64,
    classes: Vec<PairClass>,
    rng: ChaCha8Rng,
    engine_proposal: Proposal,
}

fn check_family(spec: &MixtureSpec) -> Result<Family> {
    let family = Family::of(spec)?;
    if family == Family::Resonant {
        return Err(Error::FamilyMismatch("particle relaxation covers Borgnakke-Larsen and discrete models".into()));
    }
    if spec.len() > 2 {
        return Err(Error::invalid("particle relaxation supports one or two species"));
    }
    Ok(family)
}

/// Samples the initial ensemble: Gaussian velocities at `t_kin`, Gamma internal
/// energies (or Gibbs levels) at `t_int`.
pub fn init_ensemble(spec: &MixtureSpec, init: &InitConfig, seed: u64) -> Result<Ensemble> {
    spec.ensure_valid()?;
    check_family(spec)?;
    if init.counts.len() != spec.len() {
        return Err(Error::invalid(format!(
            "{} particle counts for {} species",
            init.counts.len(),
            spec.len()
        )));
    }
    let total: usize = init.counts.iter().sum();
    if total < 2 {
        return Err(Error::invalid(format!("need at least 2 particles, got {total}")));
    }
    let densities = init.counts.iter().map(|&c| c as f64).collect();
    let params = EquilibriumParams {
        densities,
        u: init.u,
        temperatures: Temperatures::Resonant {
            t_kin: init.t_kin,
            t_int: init.t_int,
        },
    };
    let m = Maxwellian::new(spec.clone(), params, UnitSystem::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut particles = Vec::with_capacity(total);
    let mut members = vec![Vec::new(); spec.len()];
    for (s, &count) in init.counts.iter().enumerate() {
        for _ in 0..count {
            members[s].push(particles.len());
            particles.push(m.sample(s, &mut rng));
        }
    }
    Ok(Ensemble {
        spec: spec.clone(),
        units: UnitSystem::default(),
        particles,
        members,
        time: 0.0,
        collisions: 0,
        candidates: 0,
        violations: 0,
        worst_ratio: 0.0,
        max_defect: 0.0,
        classes: Vec::new(),
        rng,
        engine_proposal: Proposal::default(),
    })
}

/// Ensemble-level moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub t_kin: f64,
    /// Temperature matching the mean internal energy; equals `t_kin` without internal modes.
    pub t_int: f64,
    /// Mean internal energy over particles with internal modes.
    pub mean_internal: f64,
    pub h: f64,
    pub h_std_error: f64,
    pub collisions: u64,
}

/// Solves `Σ_s N_s g_s(kT) = target` for `T` by bisection in `ln T`; `g_s` increasing.
fn solve_temperature(target: f64, units: UnitSystem, g: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(units.thermal_energy(mid.exp())) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

impl Ensemble {
    pub fn spec(&self) -> &MixtureSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn classes(&self) -> &[PairClass] {
        &self.classes
    }

    pub fn total_momentum(&self) -> Vec3 {
        Vec3(std::array::from_fn(|k| {
            let terms: Vec<f64> = self
                .particles
                .iter()
                .map(|q| self.spec.mass(q.species) * q.v[k])
                .collect();
            snapped_sum(&terms, 0.0)
        }))
    }

    /// Total kinetic plus internal energy (compensated sum).
    pub fn total_energy(&self) -> f64 {
        let terms: Vec<f64> = self
            .particles
            .iter()
            .map(|q| q.kinetic_energy(&self.spec) + q.internal_energy(&self.spec))
            .collect();
        snapped_sum(&terms, 0.0)
    }

    fn mass_velocity(&self) -> Vec3 {
        let m: f64 = self.particles.iter().map(|q| self.spec.mass(q.species)).sum();
        self.total_momentum() * (1.0 / m)
    }

    fn peculiar_kinetic(&self) -> f64 {
        let u = self.mass_velocity();
        let terms: Vec<f64> = self
            .particles
            .iter()
            .map(|q| 0.5 * self.spec.mass(q.species) * (q.v - u).norm_sq())
            .collect();
        snapped_sum(&terms, 0.0)
    }

    fn internal_total(&self) -> f64 {
        let terms: Vec<f64> = self.particles.iter().map(|q| q.internal_energy(&self.spec)).collect();
        snapped_sum(&terms, 0.0)
    }

    fn has_internal(&self, s: usize) -> bool {
        !matches!(self.spec.energy(s), EnergyModel::Monatomic)
    }

    pub fn kinetic_temperature(&self) -> f64 {
        self.peculiar_kinetic() / (1.5 * self.len() as f64 * self.units.k_b)
    }

    pub fn internal_temperature(&self) -> f64 {
        if !(0..self.spec.len()).any(|s| self.has_internal(s)) {
            return self.kinetic_temperature();
        }
        let target = self.internal_total();
        solve_temperature(target, self.units, |kt| {
            (0..self.spec.len())
                .map(|s| self.members[s].len() as f64 * mean_internal_energy(self.spec.energy(s), kt))
                .sum()
        })
    }

    pub fn mean_internal(&self) -> f64 {
        let n: usize = (0..self.spec.len())
            .filter(|&s| self.has_internal(s))
            .map(|s| self.members[s].len())
            .sum();
        if n == 0 {
            0.0
        } else {
            self.internal_total() / n as f64
        }
    }

    /// Temperature of the equilibrium with the same center-of-momentum energy.
    pub fn equilibrium_temperature(&self) -> f64 {
        let target = self.peculiar_kinetic() + self.internal_total();
        solve_temperature(target, self.units, |kt| {
            (0..self.spec.len())
                .map(|s| self.members[s].len() as f64 * (1.5 * kt + mean_internal_energy(self.spec.energy(s), kt)))
                .sum()
        })
    }

    fn volume(&self, cfg: &RelaxConfig) -> f64 {
        self.len() as f64 / cfg.density
    }

    fn draw_pair(&mut self, class: usize) -> (usize, usize) {
        let PairClass { i, j, .. } = self.classes[class];
        let (ni, nj) = (self.members[i].len(), self.members[j].len());
        if i == j {
            let a = self.rng.random_range(0..ni);
            let mut b = self.rng.random_range(0..ni - 1);
            if b >= a {
                b += 1;
            }
            (self.members[i][a], self.members[i][b])
        } else {
            (
                self.members[i][self.rng.random_range(0..ni)],
                self.members[j][self.rng.random_range(0..nj)],
            )
        }
    }

    /// Sets each pair class's majorant from acceptance weights of random pairs.
    pub fn set_majorants(&mut self, cfg: &RelaxConfig) -> Result<()> {
        cfg.validate()?;
        let n = self.spec.len();
        let mut classes = Vec::new();
        for i in 0..n {
            for j in i..n {
                let ok = if i == j {
                    self.members[i].len() >= 2
                } else {
                    !self.members[i].is_empty() && !self.members[j].is_empty()
                };
                if ok {
                    classes.push(PairClass {
                        i,
                        j,
                        majorant: 0.0,
                        carry: 0.0,
                    });
                }
            }
        }
        self.classes = classes;
        let spec = self.spec.clone();
        let engine = Engine::new(&spec, self.engine_proposal)?;
        for c in 0..self.classes.len() {
            let mut weights = Vec::with_capacity(cfg.majorant_samples);
            for _ in 0..cfg.majorant_samples {
                let (a, b) = self.draw_pair(c);
                let pre = [self.particles[a], self.particles[b]];
                engine.collisions(&pre, &mut self.rng, false, |_, w| {
                    weights.push(w);
                    0.0
                });
            }
            weights.retain(|w| w.is_finite());
            weights.sort_by(f64::total_cmp);
            let q = if weights.is_empty() {
                0.0
            } else {
                let k = (((1.0 - cfg.majorant_tail) * weights.len() as f64).floor() as usize).min(weights.len() - 1);
                weights[k]
            };
            self.classes[c].majorant = cfg.majorant_safety * q;
        }
        Ok(())
    }

    /// Advances by `dt`. Each class draws `pairs × majorant × dt / volume` candidates
    /// (fractional parts carried to the next step) and accepts a candidate whose
    /// sampled weight is `g` with probability `g / majorant`.
    pub fn step(&mut self, cfg: &RelaxConfig) -> Result<()> {
        if self.classes.is_empty() {
            self.set_majorants(cfg)?;
        }
        let spec = self.spec.clone();
        let engine = Engine::new(&spec, self.engine_proposal)?;
        let volume = self.volume(cfg);
        for c in 0..self.classes.len() {
            let PairClass { i, j, majorant, carry } = self.classes[c];
            if majorant <= 0.0 {
                continue;
            }
            let (ni, nj) = (self.members[i].len() as f64, self.members[j].len() as f64);
            let pairs = if i == j { 0.5 * ni * (ni - 1.0) } else { ni * nj };
            let expected = pairs * majorant * cfg.dt / volume + carry;
            let count = expected.floor();
            self.classes[c].carry = expected - count;
            for _ in 0..count as u64 {
                let (a, b) = self.draw_pair(c);
                let pre = [self.particles[a], self.particles[b]];
                let mut chosen = None;
                let rng = &mut self.rng;
                engine.collisions(&pre, rng, false, |post, w| {
                    chosen = Some((*post, w));
                    0.0
                });
                self.candidates += 1;
                let Some((post, w)) = chosen else { continue };
                if w > majorant {
                    self.violations += 1;
                    self.worst_ratio = self.worst_ratio.max(w / majorant);
                }
                if self.rng.random::<f64>() * majorant < w {
                    let d = collide::defects(&spec, &pre, &post).relative();
                    self.max_defect = self.max_defect.max(d);
                    self.particles[a] = post[0];
                    self.particles[b] = post[1];
                    self.collisions += 1;
                }
            }
        }
        self.time += cfg.dt;
        if self.candidates > 0 && self.violations as f64 > cfg.max_violation_rate * self.candidates as f64 {
            return Err(Error::MajorantViolation {
                violations: self.violations,
                candidates: self.candidates,
                max_rate: cfg.max_violation_rate,
                worst_ratio: self.worst_ratio,
            });
        }
        Ok(())
    }

    pub fn snapshot(&self, bins: &HistogramBins) -> Snapshot {
        let (h, se) = h_estimate_with(self, bins);
        Snapshot {
            t: self.time,
            t_kin: self.kinetic_temperature(),
            t_int: self.internal_temperature(),
            mean_internal: self.mean_internal(),
            h,
            h_std_error: se,
            collisions: self.collisions,
        }
    }
}

/// Reference for the H estimate: the equilibrium with the ensemble's own mass, momentum
/// and energy. Cells are equal-probability under it (64 in `|v - u|`, 32 in `I`, one per
/// discrete level), and inside a cell the density estimate is the reference reshaped by
/// the observed cell mass, `f̂ = M · p̂_cell / P_cell`.
#[derive(Debug, Clone)]
pub struct HistogramBins {
    pub speed_bins: usize,
    pub internal_bins: usize,
    reference: Maxwellian,
}

impl HistogramBins {
    pub fn for_ensemble(e: &Ensemble) -> Result<Self> {
        let n = e.len() as f64;
        let params = EquilibriumParams::mixture(
            e.members.iter().map(|m| m.len() as f64 / n).collect(),
            e.mass_velocity(),
            e.equilibrium_temperature(),
        );
        Ok(HistogramBins {
            speed_bins: 64,
            internal_bins: 32,
            reference: Maxwellian::new(e.spec.clone(), params, e.units)?,
        })
    }

    pub fn reference_temperature(&self) -> f64 {
        self.reference.params().t_kin()
    }
}

/// Estimate of `H = ∫ f log(f / φ)` per particle, with its standard error.
pub fn h_estimate(e: &Ensemble) -> Result<(f64, f64)> {
    if e.len() < 1000 {
        return Err(Error::invalid(format!("H estimate needs at least 1000 particles, got {}", e.len())));
    }
    Ok(h_estimate_with(e, &HistogramBins::for_ensemble(e)?))
}

fn h_estimate_with(e: &Ensemble, bins: &HistogramBins) -> (f64, f64) {
    let m_ref = &bins.reference;
    let kt = e.units.thermal_energy(bins.reference_temperature());
    let u = m_ref.params().u;
    let mut terms = Vec::with_capacity(e.len());
    for s in 0..e.spec.len() {
        let members = &e.members[s];
        if members.is_empty() {
            continue;
        }
        let energy = e.spec.energy(s);
        let mass = e.spec.mass(s);
        let speed_law = Gamma::new(1.5, 1.0).expect("positive shape");
        let internal_law = energy.delta().map(|d| Gamma::new(d / 2.0, 1.0 / kt).expect("positive shape"));
        let level_probs: Vec<f64> = match energy {
            EnergyModel::DiscreteLevels { levels } => {
                let w: Vec<f64> = levels
                    .iter()
                    .map(|l| l.degeneracy * (-(l.energy - levels[0].energy) / kt).exp())
                    .collect();
                let z: f64 = w.iter().sum();
                w.iter().map(|x| x / z).collect()
            }
            _ => vec![1.0],
        };
        let ncols = match energy {
            EnergyModel::ContinuousPowerLaw { .. } => bins.internal_bins,
            _ => level_probs.len(),
        };
        let nb = bins.speed_bins;
        let cell = |p: &ParticleState| -> (usize, f64) {
            let x = 0.5 * mass * (p.v - u).norm_sq() / kt;
            let a = ((speed_law.cdf(x) * nb as f64) as usize).min(nb - 1);
            let (b, pb) = match (p.internal, &internal_law) {
                (Internal::Continuous(i), Some(law)) => (((law.cdf(i) * ncols as f64) as usize).min(ncols - 1), 1.0 / ncols as f64),
                (Internal::Level(k), _) => (k, level_probs[k]),
                _ => (0, 1.0),
            };
            (a * ncols + b, pb / nb as f64)
        };
        let mut hist = vec![0u32; nb * ncols];
        let cells: Vec<(usize, f64)> = members.iter().map(|&k| cell(&e.particles[k])).collect();
        for &(c, _) in &cells {
            hist[c] += 1;
        }
        let ns = members.len() as f64;
        for (&k, &(c, pc)) in members.iter().zip(&cells) {
            let p = &e.particles[k];
            let log_ref = m_ref.density(p).ln() - state_weight(&e.spec, p).ln();
            terms.push(log_ref + (hist[c] as f64 / ns / pc).ln());
        }
    }
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Sampled moments over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub seed: u64,
    pub rows: Vec<Snapshot>,
}

impl TimeSeries {
    /// CSV with a `# seed=` comment line and header `t,T_kin,T_int,mean_I,H,collisions`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# seed={}\nt,T_kin,T_int,mean_I,H,collisions\n", self.seed);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{}",
                r.t, r.t_kin, r.t_int, r.mean_internal, r.h, r.collisions
            );
        }
        out
    }

    /// No increase of `H` between consecutive rows beyond three combined standard
    /// errors, and a final value below the initial one.
    pub fn h_nonincreasing(&self) -> bool {
        let ok_steps = self.rows.windows(2).all(|w| {
            let tol = 3.0 * (w[0].h_std_error.powi(2) + w[1].h_std_error.powi(2)).sqrt();
            w[1].h - w[0].h <= tol
        });
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) if self.rows.len() >= 2 => ok_steps && b.h < a.h,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub particles: usize,
    pub t_eq: f64,
    pub final_t_kin: f64,
    pub final_t_int: f64,
    pub equipartition_gap: f64,
    /// Final `⟨I⟩` over its equilibrium value at `T_eq`; 1 without internal modes.
    pub internal_energy_ratio: f64,
    pub energy_drift: f64,
    pub momentum_drift: f64,
    pub max_collision_defect: f64,
    pub h_nonincreasing: bool,
    pub collisions: u64,
    pub candidates: u64,
    pub majorant_violations: u64,
    pub majorants: Vec<PairClass>,
    /// Equipartition gap and internal-energy ratio both within 2%, energy drift within 1e-10.
    pub passed: bool,
}

pub struct RunOutput {
    pub series: TimeSeries,
    pub summary: RunSummary,
    pub ensemble: Ensemble,
}

/// Initializes, relaxes to `cfg.t_end` and summarizes.
pub fn run(spec: &MixtureSpec, init: &InitConfig, cfg: &RelaxConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if !(init.t_kin > 0.0 && init.t_int > 0.0) {
        return Err(Error::domain("initial temperatures must be positive"));
    }
    let mut e = init_ensemble(spec, init, cfg.seed)?;
    e.set_majorants(cfg)?;
    let t_eq = e.equilibrium_temperature();
    let bins = HistogramBins::for_ensemble(&e)?;
    let e0 = e.total_energy();
    let p0 = e.total_momentum();
    let mut rows = vec![e.snapshot(&bins)];
    let steps = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    for k in 1..=steps {
        e.step(cfg)?;
        if k % cfg.sample_every == 0 || k == steps {
            rows.push(e.snapshot(&bins));
        }
    }
    let series = TimeSeries { seed: cfg.seed, rows };
    let last = *series.rows.last().expect("at least the initial row");
    let internal_eq: f64 = (0..spec.len())
        .map(|s| e.members[s].len() as f64 * mean_internal_energy(spec.energy(s), e.units.thermal_energy(t_eq)))
        .sum();
    let internal_energy_ratio = if internal_eq > 0.0 { e.internal_total() / internal_eq } else { 1.0 };
    let energy_drift = (e.total_energy() - e0).abs() / e0.abs();
    let p_scale: f64 = e.particles.iter().map(|q| spec.mass(q.species) * q.v.norm()).sum();
    let momentum_drift = (e.total_momentum() - p0).norm() / p_scale;
    let gap = (last.t_kin - last.t_int).abs() / t_eq;
    let summary = RunSummary {
        seed: cfg.seed,
        particles: e.len(),
        t_eq,
        final_t_kin: last.t_kin,
        final_t_int: last.t_int,
        equipartition_gap: gap,
        internal_energy_ratio,
        energy_drift,
        momentum_drift,
        max_collision_defect: e.max_defect,
        h_nonincreasing: series.h_nonincreasing(),
        collisions: e.collisions,
        candidates: e.candidates,
        majorant_violations: e.violations,
        majorants: e.classes.clone(),
        passed: gap <= 0.02 && (internal_energy_ratio - 1.0).abs() <= 0.02 && energy_drift <= 1e-10,
    };
    Ok(RunOutput {
        series,
        summary,
        ensemble: e,
    })
}

/// Relaxation input file: the model plus initial state and run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxFile {
    pub model: MixtureSpec,
    pub init: InitConfig,
    #[serde(default)]
    pub relax: RelaxConfig,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelModel, Species};

    fn bl(delta: f64, zeta: f64) -> MixtureSpec {
        MixtureSpec::single(
            Species::new("A", 1.0, EnergyModel::continuous(delta)),
            KernelModel::power_law(1.0, zeta),
        )
    }

    fn init(n: usize, t_kin: f64, t_int: f64) -> InitConfig {
        InitConfig {
            counts: vec![n],
            t_kin,
            t_int,
            u: Vec3::ZERO,
        }
    }

    fn quick() -> RelaxConfig {
        RelaxConfig {
            majorant_samples: 20_000,
            ..Default::default()
        }
    }

    #[test]
    fn init_matches_temperature() {
        let n = 20_000;
        let e = init_ensemble(&bl(2.0, 0.0), &init(n, 2.0, 1.0), 1).unwrap();
        let tol = 3.0 * (2.0 / (3.0 * n as f64)).sqrt() * 2.0;
        assert!((e.kinetic_temperature() - 2.0).abs() < tol);
        assert!((e.internal_temperature() - 1.0).abs() < 0.05);
        assert!(init_ensemble(&bl(2.0, 0.0), &init(1, 1.0, 1.0), 1).is_err());
    }

    #[test]
    fn equilibrium_temperature_budget() {
        let e = init_ensemble(&bl(2.0, 0.0), &init(50_000, 2.0, 1.0), 3).unwrap();
        let direct = (e.peculiar_kinetic() + e.internal_total()) / (2.5 * e.len() as f64);
        assert!((e.equilibrium_temperature() - direct).abs() < 1e-12 * direct);
        assert!((direct - 1.6).abs() < 0.02);
    }

    #[test]
    fn collision_rate_matches_frequency() {
        // ζ = 0, δ = 2: ν = 16π/15 per particle for n = 1
        let cfg = RelaxConfig {
            dt: 0.01,
            t_end: 0.2,
            ..quick()
        };
        let out = run(&bl(2.0, 0.0), &init(20_000, 1.0, 1.0), &cfg).unwrap();
        let rate = 2.0 * out.summary.collisions as f64 / (out.summary.particles as f64 * 0.2);
        let nu = 16.0 * std::f64::consts::PI / 15.0;
        assert!((rate - nu).abs() / nu < 0.05, "{rate} vs {nu}");
        assert_eq!(out.summary.majorant_violations, 0);
        assert!(out.summary.max_collision_defect <= 1e-12);
    }

    #[test]
    fn relaxes_to_equipartition_small() {
        let cfg = RelaxConfig { t_end: 4.0, ..quick() };
        let out = run(&bl(3.0, 0.5), &init(20_000, 2.0, 1.0), &cfg).unwrap();
        let s = &out.summary;
        assert!(s.equipartition_gap < 0.04, "{s:?}");
        assert!(s.energy_drift <= 1e-10);
        assert!(s.momentum_drift <= 1e-10);
        assert!(out.series.rows.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn equilibrium_start_is_stationary() {
        let cfg = RelaxConfig { t_end: 1.0, ..quick() };
        let out = run(&bl(2.0, 0.3), &init(20_000, 1.0, 1.0), &cfg).unwrap();
        for r in &out.series.rows {
            assert!((r.t_kin - r.t_int).abs() < 0.04, "{r:?}");
        }
    }

    #[test]
    fn binary_and_discrete_mixtures_conserve() {
        let mix = MixtureSpec::uniform(
            vec![
                Species::new("a", 1.0, EnergyModel::continuous(2.5)),
                Species::new("m", 2.0, EnergyModel::Monatomic),
            ],
            KernelModel::power_law(1.0, 0.4),
        );
        let disc = MixtureSpec::uniform(
            vec![
                Species::new("d", 1.0, EnergyModel::discrete([(0.0, 1.0), (0.5, 3.0), (1.2, 5.0)])),
                Species::new("m", 0.5, EnergyModel::Monatomic),
            ],
            KernelModel::power_law(1.0, 0.0),
        );
        for spec in [mix, disc] {
            let ic = InitConfig {
                counts: vec![5000, 3000],
                t_kin: 1.5,
                t_int: 0.7,
                u: Vec3::new(0.2, 0.0, -0.1),
            };
            let out = run(&spec, &ic, &RelaxConfig { t_end: 4.0, ..quick() }).unwrap();
            assert!(out.summary.energy_drift <= 1e-10);
            assert!(out.summary.max_collision_defect <= 1e-12);
            assert!(out.summary.equipartition_gap < 0.06, "{:?}", out.summary);
            assert_eq!(out.summary.majorants.len(), 3);
        }
    }

    #[test]
    fn deterministic_series() {
        let cfg = RelaxConfig { t_end: 0.5, ..quick() };
        let a = run(&bl(2.0, 0.5), &init(5000, 2.0, 1.0), &cfg).unwrap();
        let b = run(&bl(2.0, 0.5), &init(5000, 2.0, 1.0), &cfg).unwrap();
        assert_eq!(a.series.to_csv(), b.series.to_csv());
        assert!(a.series.to_csv().starts_with("# seed=0\nt,T_kin,T_int,mean_I,H,collisions\n"));
    }

    #[test]
    fn majorant_violation_aborts() {
        let cfg = RelaxConfig {
            majorant_safety: 0.5,
            max_violation_rate: 1e-3,
            t_end: 0.2,
            ..quick()
        };
        let err = run(&bl(3.0, 1.0), &init(5000, 1.0, 1.0), &cfg).err().unwrap();
        assert!(matches!(err, Error::MajorantViolation { .. }));
    }

    #[test]
    fn h_estimate_guards_and_relabeling() {
        let e = init_ensemble(&bl(3.0, 0.5), &init(500, 1.0, 1.0), 1).unwrap();
        assert!(h_estimate(&e).is_err());
        let mut e = init_ensemble(&bl(3.0, 0.5), &init(5000, 1.0, 1.0), 1).unwrap();
        let (h0, _) = h_estimate(&e).unwrap();
        e.particles.reverse();
        let (h1, _) = h_estimate(&e).unwrap();
        assert!((h0 - h1).abs() < 1e-12);
    }

    #[test]
    fn resonant_family_rejected() {
        let res = MixtureSpec::single(
            Species::new("r", 1.0, EnergyModel::continuous(3.0)),
            KernelModel::resonant(1.0, 0.0, 0.0, 0.0),
        );
        assert!(matches!(init_ensemble(&res, &init(10, 1.0, 1.0), 0), Err(Error::FamilyMismatch(_))));
    }
}
