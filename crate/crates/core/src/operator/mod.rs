//! Monte Carlo evaluation of the collision operator and its linearization.
//!
//! All estimators share one sampling engine: for a test state `w` of species `i` and
//! every partner species `j`, a partner state `w_*` and the collision parameters are
//! drawn from a proposal, and a visitor receives the pre/post states together with the
//! importance weight `A / q`. Gain and loss terms are evaluated on the same sample.

mod estimate;
mod k1;
mod k2;

pub use estimate::MCEstimate;
pub use k1::{assemble_k1, K1Grid, K1Matrix, K1Node};
pub use k2::{corner_exponents, k2_integrability_diagnostic, min_exponent_slack, Integrability, K2Diagnostic};

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::collide::{self, CollisionParams, Internal, ParticleState};
use crate::equilib::{phi_factor, snapped_sum, Family, LogLinear, Maxwellian};
use crate::error::{Error, Result};
use crate::model::{eval_kernel, EnergyModel, KernelContext, MixtureSpec};
use crate::vec3::{UnitVec, Vec3};

use estimate::{run_chunks, Moments};

/// A density over particle states.
pub trait DistributionFn: Sync {
    fn density(&self, w: &ParticleState) -> f64;

    /// Parameters of an exponential-family form, when the density has one. Two
    /// densities with equal parameters get exact samplewise gain/loss cancellation.
    fn log_linear(&self) -> Option<LogLinear> {
        None
    }

    /// Proposal matched to this density, if it knows one.
    fn proposal_hint(&self) -> Option<Proposal> {
        None
    }
}

impl DistributionFn for Maxwellian {
    fn density(&self, w: &ParticleState) -> f64 {
        Maxwellian::density(self, w)
    }

    fn log_linear(&self) -> Option<LogLinear> {
        Some(Maxwellian::log_linear(self))
    }

    fn proposal_hint(&self) -> Option<Proposal> {
        Some(Proposal::for_maxwellian(self))
    }
}

/// Wraps a closure as a density.
pub struct FnDistribution<F>(pub F);

impl<F: Fn(&ParticleState) -> f64 + Sync> DistributionFn for FnDistribution<F> {
    fn density(&self, w: &ParticleState) -> f64 {
        (self.0)(w)
    }
}

/// `M + M^{1/2} h`.
pub struct Perturbed<'a, H> {
    pub base: &'a Maxwellian,
    pub h: H,
}

impl<H: Fn(&ParticleState) -> f64 + Sync> DistributionFn for Perturbed<'_, H> {
    fn density(&self, w: &ParticleState) -> f64 {
        let m = self.base.density(w);
        m + m.sqrt() * (self.h)(w)
    }

    fn proposal_hint(&self) -> Option<Proposal> {
        Some(Proposal::for_maxwellian(self.base))
    }
}

/// Sampling distribution for partner states. Velocities are Gaussian around
/// `velocity` with standard deviation `velocity_width * sqrt(kT/m)`, continuous internal
/// energies are `Gamma(δ/2, internal_scale * kT)` and levels are Gibbs-distributed at
/// `internal_scale * T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub temperature: f64,
    pub velocity: Vec3,
    pub velocity_width: f64,
    pub internal_scale: f64,
}

impl Default for Proposal {
    fn default() -> Self {
        Proposal {
            temperature: 1.0,
            velocity: Vec3::ZERO,
            velocity_width: 1.0,
            internal_scale: 1.0,
        }
    }
}

impl Proposal {
    pub fn for_maxwellian(m: &Maxwellian) -> Self {
        let p = m.params();
        Proposal {
            temperature: p.t_kin(),
            velocity: p.u,
            velocity_width: 1.0,
            internal_scale: p.t_int() / p.t_kin(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !ok(self.temperature) || !ok(self.velocity_width) || !ok(self.internal_scale) || !self.velocity.is_finite() {
            return Err(Error::invalid(format!(
                "proposal needs positive finite temperature and widths, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub samples: u64,
    pub seed: u64,
    /// Falls back to the proposal matched to the distribution at hand.
    pub proposal: Option<Proposal>,
    pub chunk_size: u64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            samples: 100_000,
            seed: 0,
            proposal: None,
            chunk_size: 4096,
        }
    }
}

impl QuadratureConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        QuadratureConfig {
            samples,
            seed,
            ..Default::default()
        }
    }

    pub fn with_proposal(mut self, proposal: Proposal) -> Self {
        self.proposal = Some(proposal);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        if let Some(p) = &self.proposal {
            p.validate()?;
        }
        Ok(())
    }
}

/// One collision configuration handed to an estimator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Sample {
    pub pre: [ParticleState; 2],
    pub post: [ParticleState; 2],
    /// `A / q` for the partner state and the collision parameters.
    pub weight: f64,
}

enum InternalProposal {
    None,
    Gamma { dist: Gamma<f64>, shape: f64, scale: f64, log_norm: f64 },
    Levels { probs: Vec<f64>, log_probs: Vec<f64> },
}

impl InternalProposal {
    fn new(energy: &EnergyModel, kt: f64) -> Self {
        match energy {
            EnergyModel::Monatomic => InternalProposal::None,
            EnergyModel::ContinuousPowerLaw { delta } => {
                let shape = delta / 2.0;
                InternalProposal::Gamma {
                    dist: Gamma::new(shape, kt).expect("positive shape and scale"),
                    shape,
                    scale: kt,
                    log_norm: ln_gamma(shape) + shape * kt.ln(),
                }
            }
            EnergyModel::DiscreteLevels { levels } => {
                let e0 = levels[0].energy;
                let w: Vec<f64> = levels.iter().map(|l| l.degeneracy * (-(l.energy - e0) / kt).exp()).collect();
                let total: f64 = w.iter().sum();
                let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
                let log_probs = probs.iter().map(|p| p.ln()).collect();
                InternalProposal::Levels { probs, log_probs }
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Internal, f64) {
        match self {
            InternalProposal::None => (Internal::None, 0.0),
            InternalProposal::Gamma {
                dist,
                shape,
                scale,
                log_norm,
            } => loop {
                let x: f64 = dist.sample(rng);
                if x > 0.0 {
                    break (Internal::Continuous(x), (shape - 1.0) * x.ln() - x / scale - log_norm);
                }
            },
            InternalProposal::Levels { probs, log_probs } => {
                let mut u = rng.random::<f64>();
                let mut k = probs.len() - 1;
                for (idx, p) in probs.iter().enumerate() {
                    if u < *p {
                        k = idx;
                        break;
                    }
                    u -= p;
                }
                (Internal::Level(k), log_probs[k])
            }
        }
    }
}

enum PairRule {
    MonoMono,
    PolyMono { beta_big_r: Beta<f64>, norm: f64 },
    PolyPoly { beta_r: Beta<f64>, beta_big_r: Beta<f64>, norm: f64 },
    Resonant { delta: f64 },
    Discrete,
}

/// Draws from a Beta distribution, rejecting the endpoints.
fn open_unit<R: Rng + ?Sized>(b: &Beta<f64>, rng: &mut R) -> f64 {
    loop {
        let x = b.sample(rng);
        if x > 0.0 && x < 1.0 {
            return x;
        }
    }
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> UnitVec {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Some(u) = UnitVec::normalize(v) {
            return u;
        }
    }
}

pub(crate) struct Engine<'a> {
    spec: &'a MixtureSpec,
    proposal: Proposal,
    vel_sd: Vec<f64>,
    internal: Vec<InternalProposal>,
    rules: Vec<Vec<PairRule>>,
}

impl<'a> Engine<'a> {
    pub fn new(spec: &'a MixtureSpec, proposal: Proposal) -> Result<Self> {
        spec.ensure_valid()?;
        proposal.validate()?;
        let family = Family::of(spec)?;
        let kt = proposal.temperature;
        let vel_sd = spec
            .species
            .iter()
            .map(|s| proposal.velocity_width * (kt / s.mass).sqrt())
            .collect();
        let internal = spec
            .species
            .iter()
            .map(|s| InternalProposal::new(&s.energy, proposal.internal_scale * kt))
            .collect();
        let n = spec.len();
        let mut rules = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let (di, dj) = (spec.energy(i).delta(), spec.energy(j).delta());
                let rule = match family {
                    Family::Resonant => PairRule::Resonant {
                        delta: di.expect("resonant species are continuous"),
                    },
                    Family::Discrete => PairRule::Discrete,
                    Family::Monatomic => PairRule::MonoMono,
                    Family::BorgnakkeLarsen => match (di, dj) {
                        (Some(a), Some(b)) => PairRule::PolyPoly {
                            beta_r: Beta::new(a / 2.0, b / 2.0).expect("positive shapes"),
                            beta_big_r: Beta::new(1.5, (a + b) / 2.0).expect("positive shapes"),
                            norm: 4.0 * PI * (ln_beta(a / 2.0, b / 2.0) + ln_beta(1.5, (a + b) / 2.0)).exp(),
                        },
                        (Some(d), None) | (None, Some(d)) => PairRule::PolyMono {
                            beta_big_r: Beta::new(1.5, d / 2.0).expect("positive shapes"),
                            norm: 4.0 * PI * ln_beta(1.5, d / 2.0).exp(),
                        },
                        (None, None) => PairRule::MonoMono,
                    },
                };
                row.push(rule);
            }
            rules.push(row);
        }
        Ok(Engine {
            spec,
            proposal,
            vel_sd,
            internal,
            rules,
        })
    }

    /// Draws a state of `species` from the proposal; returns it with `ln q`.
    pub fn draw_state<R: Rng + ?Sized>(&self, species: usize, rng: &mut R) -> (ParticleState, f64) {
        let sd = self.vel_sd[species];
        let z = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let v = self.proposal.velocity + z * sd;
        let log_q_v = -1.5 * (2.0 * PI * sd * sd).ln() - 0.5 * z.norm_sq();
        let (internal, log_q_i) = self.internal[species].draw(rng);
        (
            ParticleState {
                species,
                v,
                internal,
            },
            log_q_v + log_q_i,
        )
    }

    /// Runs `visit` on one sampled configuration per partner species (one per open
    /// channel for discrete levels) and returns the sum of the visitor's values.
    pub fn partners<R: Rng + ?Sized, F: FnMut(&Sample) -> f64>(&self, w: &ParticleState, rng: &mut R, mut visit: F) -> f64 {
        let mut total = 0.0;
        for j in 0..self.spec.len() {
            let (partner, log_q) = self.draw_state(j, rng);
            let inv_q = (-log_q).exp();
            let pre = [*w, partner];
            total += self.collisions(&pre, rng, true, |post, weight| {
                visit(&Sample {
                    pre,
                    post: *post,
                    weight: weight * inv_q,
                })
            });
        }
        total
    }

    /// Draws collision parameters for a fixed pair and calls `visit(post, A/q)`.
    /// Discrete channels are either all enumerated or one is drawn uniformly (its
    /// weight then carries the channel count); closed channels are skipped.
    pub fn collisions<R: Rng + ?Sized, F: FnMut(&[ParticleState; 2], f64) -> f64>(
        &self,
        pre: &[ParticleState; 2],
        rng: &mut R,
        enumerate_channels: bool,
        mut visit: F,
    ) -> f64 {
        let spec = self.spec;
        let (i, j) = (pre[0].species, pre[1].species);
        let sigma = random_direction(rng);
        let rel = pre[0].v - pre[1].v;
        let speed = rel.norm();
        let cos_theta = if speed > 0.0 { sigma.get().dot(rel) / speed } else { 0.0 };
        let energy = collide::pair_energy(spec, pre);
        let kernel = spec.kernel(i, j);
        let mut ctx = KernelContext {
            rel_speed: speed,
            energy,
            internal: pre[0].internal_energy(spec),
            internal_star: pre[1].internal_energy(spec),
            internal_post: 0.0,
            r: 0.5,
            big_r: 0.5,
            cos_theta,
            delta: 0.0,
        };
        match &self.rules[i][j] {
            PairRule::MonoMono => {
                let out = collide::bl_outcome(spec, pre, &CollisionParams::Monatomic { sigma });
                let b = eval_kernel(kernel, &ctx).unwrap_or(f64::NAN);
                visit(&out.post, 4.0 * PI * b)
            }
            PairRule::PolyMono { beta_big_r, norm } => {
                let big_r = open_unit(beta_big_r, rng);
                ctx.big_r = big_r;
                let out = collide::bl_outcome(spec, pre, &CollisionParams::PolyMono { big_r, sigma });
                let b = eval_kernel(kernel, &ctx).unwrap_or(f64::NAN);
                visit(&out.post, norm * b)
            }
            PairRule::PolyPoly { beta_r, beta_big_r, norm } => {
                let r = open_unit(beta_r, rng);
                let big_r = open_unit(beta_big_r, rng);
                ctx.r = r;
                ctx.big_r = big_r;
                let out = collide::bl_outcome(spec, pre, &CollisionParams::BorgnakkeLarsen { r, big_r, sigma });
                let b = eval_kernel(kernel, &ctx).unwrap_or(f64::NAN);
                visit(&out.post, norm * b)
            }
            PairRule::Resonant { delta } => {
                let z = ctx.internal + ctx.internal_star;
                let ip = loop {
                    let x = rng.random::<f64>() * z;
                    if x > 0.0 && x < z {
                        break x;
                    }
                };
                ctx.internal_post = ip;
                ctx.delta = *delta;
                let out = collide::resonant_outcome(spec, pre, ip, sigma);
                let b = eval_kernel(kernel, &ctx).unwrap_or(f64::NAN);
                let a = delta / 2.0 - 1.0;
                let shape = if a == 0.0 { 1.0 } else { (ip * (z - ip)).powf(a) };
                visit(&out.post, 4.0 * PI * b * shape * z.powf(2.0 - delta))
            }
            PairRule::Discrete => {
                let levels_i = level_table(spec, i);
                let levels_j = level_table(spec, j);
                let pre_e = levels_i[level_of(&pre[0])].0 + levels_j[level_of(&pre[1])].0;
                let b = eval_kernel(kernel, &ctx).unwrap_or(f64::NAN);
                let channels = levels_i.len() * levels_j.len();
                let channel = |k: usize, l: usize, scale: f64, visit: &mut F| -> f64 {
                    let (ek, gk) = levels_i[k];
                    let (el, gl) = levels_j[l];
                    let out = collide::discrete_outcome(spec, pre, ek + el - pre_e, k, l, sigma);
                    if !out.admissible {
                        return 0.0;
                    }
                    let post_speed = (out.post[0].v - out.post[1].v).norm();
                    visit(&out.post, scale * 4.0 * PI * b * gk * gl * post_speed / energy.sqrt())
                };
                if enumerate_channels {
                    let mut total = 0.0;
                    for k in 0..levels_i.len() {
                        for l in 0..levels_j.len() {
                            total += channel(k, l, 1.0, &mut visit);
                        }
                    }
                    total
                } else {
                    let c = rng.random_range(0..channels);
                    channel(c / levels_j.len(), c % levels_j.len(), channels as f64, &mut visit)
                }
            }
        }
    }
}

/// `(energy, degeneracy)` of each level; a monatomic species has one level at zero.
fn level_table(spec: &MixtureSpec, s: usize) -> Vec<(f64, f64)> {
    match spec.energy(s).levels() {
        Some(levels) => levels.iter().map(|l| (l.energy, l.degeneracy)).collect(),
        None => vec![(0.0, 1.0)],
    }
}

fn level_of(p: &ParticleState) -> usize {
    match p.internal {
        Internal::Level(k) => k,
        _ => 0,
    }
}

fn finish(m: Moments, seed: u64) -> Result<MCEstimate> {
    let e = m.estimate(seed);
    if !e.value.is_finite() || !e.std_error.is_finite() {
        return Err(Error::domain(
            "estimate is not finite; the proposal density vanishes or the integrand is singular on the sampled support",
        ));
    }
    Ok(e)
}

fn proposal_for(cfg: &QuadratureConfig, hint: Option<Proposal>) -> Proposal {
    cfg.proposal.or(hint).unwrap_or_default()
}

/// Estimates `Q(f, g)(w) = ∫ (f'g'_*Φ - f g_*) A dW`.
pub fn eval_q<F: DistributionFn, G: DistributionFn>(
    spec: &MixtureSpec,
    f: &F,
    g: &G,
    w: &ParticleState,
    cfg: &QuadratureConfig,
) -> Result<MCEstimate> {
    cfg.validate()?;
    w.check(spec)?;
    let engine = Engine::new(spec, proposal_for(cfg, g.proposal_hint()))?;
    let shared = match (f.log_linear(), g.log_linear()) {
        (Some(a), Some(b)) if a == b => Some(a),
        _ => None,
    };
    let m = run_chunks(cfg.samples, cfg.seed, cfg.chunk_size, |rng: &mut ChaCha8Rng| {
        engine.partners(w, rng, |s| {
            let loss = f.density(&s.pre[0]) * g.density(&s.pre[1]);
            let diff = match &shared {
                Some(ll) => loss * ll.log_gain_ratio(spec, &s.pre, &s.post).exp_m1(),
                None => f.density(&s.post[0]) * g.density(&s.post[1]) * phi_factor(spec, &s.pre, &s.post) - loss,
            };
            if diff == 0.0 {
                0.0
            } else {
                diff * s.weight
            }
        })
    });
    finish(m, cfg.seed)
}

/// Estimates the collision frequency `ν(w) = ∫ M_* A dW`.
pub fn collision_frequency(w: &ParticleState, m: &Maxwellian, cfg: &QuadratureConfig) -> Result<MCEstimate> {
    cfg.validate()?;
    let spec = m.spec();
    w.check(spec)?;
    let engine = Engine::new(spec, proposal_for(cfg, Some(Proposal::for_maxwellian(m))))?;
    let est = run_chunks(cfg.samples, cfg.seed, cfg.chunk_size, |rng: &mut ChaCha8Rng| {
        engine.partners(w, rng, |s| {
            let ms = m.density(&s.pre[1]);
            if ms == 0.0 {
                0.0
            } else {
                ms * s.weight
            }
        })
    });
    finish(est, cfg.seed)
}

/// One of the three integral parts of the linearized operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KPart {
    /// `-(M^{-1/2} h)_*`
    K1,
    /// `(M^{-1/2} h)'_*`
    K2,
    /// `(M^{-1/2} h)'`
    K3,
}

impl KPart {
    pub const ALL: [KPart; 3] = [KPart::K1, KPart::K2, KPart::K3];
}

/// Estimates `M^{1/2}(w) ∫ t M_* A dW` where `t` is the part's term in `g = M^{-1/2} h`.
pub fn eval_k<H: Fn(&ParticleState) -> f64 + Sync>(
    h: H,
    w: &ParticleState,
    part: KPart,
    m: &Maxwellian,
    cfg: &QuadratureConfig,
) -> Result<MCEstimate> {
    cfg.validate()?;
    let spec = m.spec();
    w.check(spec)?;
    let engine = Engine::new(spec, proposal_for(cfg, Some(Proposal::for_maxwellian(m))))?;
    let g = |p: &ParticleState| {
        let d = m.density(p);
        if d > 0.0 {
            h(p) / d.sqrt()
        } else {
            0.0
        }
    };
    let root = m.density(w).sqrt();
    let est = run_chunks(cfg.samples, cfg.seed, cfg.chunk_size, |rng: &mut ChaCha8Rng| {
        engine.partners(w, rng, |s| {
            let term = match part {
                KPart::K1 => -g(&s.pre[1]),
                KPart::K2 => g(&s.post[1]),
                KPart::K3 => g(&s.post[0]),
            };
            if term == 0.0 {
                return 0.0;
            }
            let ms = m.density(&s.pre[1]);
            if ms == 0.0 {
                0.0
            } else {
                root * term * ms * s.weight
            }
        })
    });
    finish(est, cfg.seed)
}

/// Test function `ψ` for weak moments.
#[derive(Clone, Copy)]
pub enum TestFunction<'a> {
    Mass,
    /// `m v_axis`
    Momentum(usize),
    /// `m|v|²/2 + I`
    Energy,
    /// `m|v|²/2`
    KineticEnergy,
    /// `I`
    InternalEnergy,
    Custom(&'a (dyn Fn(&ParticleState) -> f64 + Sync)),
}

impl TestFunction<'_> {
    /// `ψ' + ψ'_* - ψ - ψ_*`. Known invariants are summed with rounding-floor snapping,
    /// so conserved quantities give exactly zero.
    fn defect(&self, spec: &MixtureSpec, pre: &[ParticleState; 2], post: &[ParticleState; 2]) -> f64 {
        let states = [(&post[0], 1.0), (&post[1], 1.0), (&pre[0], -1.0), (&pre[1], -1.0)];
        let kin = |p: &ParticleState| 0.5 * spec.mass(p.species) * p.v.norm_sq();
        match self {
            TestFunction::Mass => 0.0,
            TestFunction::Momentum(axis) => {
                let terms = states.map(|(p, s)| s * spec.mass(p.species) * p.v[*axis]);
                let scale: f64 = states.iter().map(|(p, _)| spec.mass(p.species) * p.v.norm()).sum();
                snapped_sum(&terms, scale)
            }
            TestFunction::Energy => {
                let k = states.map(|(p, s)| s * kin(p));
                let i = states.map(|(p, s)| s * p.internal_energy(spec));
                let all = [k[0], k[1], k[2], k[3], i[0], i[1], i[2], i[3]];
                snapped_sum(&all, all.iter().map(|x| x.abs()).sum())
            }
            TestFunction::KineticEnergy => {
                let k = states.map(|(p, s)| s * kin(p));
                snapped_sum(&k, k.iter().map(|x| x.abs()).sum())
            }
            TestFunction::InternalEnergy => {
                let i = states.map(|(p, s)| s * p.internal_energy(spec));
                snapped_sum(&i, i.iter().map(|x| x.abs()).sum())
            }
            TestFunction::Custom(psi) => states.iter().map(|(p, s)| s * psi(p)).sum(),
        }
    }
}

/// Draws the test state: a species uniformly, then a state from the proposal.
/// Returns the state with `1/q` for the combined draw.
fn draw_test_state<R: Rng + ?Sized>(engine: &Engine, n_species: usize, rng: &mut R) -> (ParticleState, f64) {
    let s = if n_species == 1 { 0 } else { rng.random_range(0..n_species) };
    let (w, log_q) = engine.draw_state(s, rng);
    (w, n_species as f64 * (-log_q).exp())
}

/// Estimates `∫ Q(f, f) ψ dw` through `½ ∫ f f_* (ψ' + ψ'_* - ψ - ψ_*) A dw dW`.
pub fn weak_moment<F: DistributionFn>(spec: &MixtureSpec, f: &F, psi: TestFunction, cfg: &QuadratureConfig) -> Result<MCEstimate> {
    cfg.validate()?;
    let engine = Engine::new(spec, proposal_for(cfg, f.proposal_hint()))?;
    let n = spec.len();
    let m = run_chunks(cfg.samples, cfg.seed, cfg.chunk_size, |rng: &mut ChaCha8Rng| {
        let (w, inv_q) = draw_test_state(&engine, n, rng);
        let fw = f.density(&w);
        engine.partners(&w, rng, |s| {
            let d = psi.defect(spec, &s.pre, &s.post);
            if d == 0.0 {
                return 0.0;
            }
            0.5 * fw * f.density(&s.pre[1]) * d * s.weight * inv_q
        })
    });
    finish(m, cfg.seed)
}

/// Entropy production estimate with per-sample diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub estimate: MCEstimate,
    /// Smallest per-sample term.
    pub min_term: f64,
    pub negative_terms: u64,
}

/// Estimates `¼ ∫ (a - b)(ln a - ln b) A dw dW` with `a = f'f'_*Φ`, `b = f f_*`.
pub fn entropy_production<F: DistributionFn>(spec: &MixtureSpec, f: &F, cfg: &QuadratureConfig) -> Result<EntropyEstimate> {
    cfg.validate()?;
    let engine = Engine::new(spec, proposal_for(cfg, f.proposal_hint()))?;
    let ll = f.log_linear();
    let n = spec.len();
    let m = run_chunks(cfg.samples, cfg.seed, cfg.chunk_size, |rng: &mut ChaCha8Rng| {
        let (w, inv_q) = draw_test_state(&engine, n, rng);
        let fw = f.density(&w);
        engine.partners(&w, rng, |s| {
            let b = fw * f.density(&s.pre[1]);
            let term = match &ll {
                Some(ll) => {
                    let delta = ll.log_gain_ratio(spec, &s.pre, &s.post);
                    if delta == 0.0 {
                        return 0.0;
                    }
                    b * delta.exp_m1() * delta
                }
                None => {
                    let a = f.density(&s.post[0]) * f.density(&s.post[1]) * phi_factor(spec, &s.pre, &s.post);
                    if !(a > 0.0 && b > 0.0) {
                        return f64::NAN;
                    }
                    if a == b {
                        return 0.0;
                    }
                    (a - b) * (a.ln() - b.ln())
                }
            };
            0.25 * term * s.weight * inv_q
        })
    });
    let estimate = m.estimate(cfg.seed);
    if !estimate.value.is_finite() {
        return Err(Error::domain("distribution is not strictly positive on the sampled states"));
    }
    Ok(EntropyEstimate {
        estimate,
        min_term: if m.count > 0 { m.min } else { 0.0 },
        negative_terms: m.negatives,
    })
}
