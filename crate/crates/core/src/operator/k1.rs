//! Quadrature assembly of the K1 kernel on a velocity × internal-energy tensor grid.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::collide::{Internal, ParticleState};
use crate::equilib::{Family, Maxwellian};
use crate::error::{Error, Result};
use crate::model::{EnergyModel, KernelModel, KinTerm, Psi};
use crate::quadrature::{gauss_hermite, gauss_laguerre};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K1Grid {
    /// Gauss-Hermite nodes per velocity axis.
    pub velocity_nodes: usize,
    /// Generalized Gauss-Laguerre nodes in `I`.
    pub internal_nodes: usize,
    /// Nodes with `|v - u|` above this many thermal speeds `sqrt(kT/m)` are dropped.
    pub speed_cutoff: f64,
    /// Nodes with `I > kT (δ/2 + internal_cutoff)` are dropped.
    pub internal_cutoff: f64,
}

impl Default for K1Grid {
    fn default() -> Self {
        K1Grid {
            velocity_nodes: 6,
            internal_nodes: 4,
            speed_cutoff: 6.0,
            internal_cutoff: 40.0,
        }
    }
}

impl K1Grid {
    pub fn new(velocity_nodes: usize, internal_nodes: usize) -> Self {
        K1Grid {
            velocity_nodes,
            internal_nodes,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K1Node {
    pub state: ParticleState,
    /// Quadrature weight for the measure `dv dI`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct K1Matrix {
    pub nodes: Vec<K1Node>,
    /// Row-major `k1(w_a, w_b)`.
    pub values: Vec<f64>,
}

impl K1Matrix {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.len() + b]
    }

    /// `max |k(a,b) - k(b,a)| / max |k|`, zero for the zero matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.len();
        let scale = self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a + 1..n {
                worst = worst.max((self.get(a, b) - self.get(b, a)).abs());
            }
        }
        worst / scale
    }

    /// Quadrature-weighted Frobenius norm, approximating the Hilbert-Schmidt norm.
    pub fn hs_norm(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|a| {
                let wa = self.nodes[a].weight;
                (0..n).map(|b| wa * self.nodes[b].weight * self.get(a, b).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `sqrt(Σ_b W_b k(a,b)²)` for each row.
    pub fn row_norms(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|a| (0..n).map(|b| self.nodes[b].weight * self.get(a, b).powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    /// `(K1 h)(w_a) ≈ Σ_b W_b k(a,b) h_b`.
    pub fn apply(&self, h: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if h.len() != n {
            return Err(Error::invalid(format!("vector has length {}, grid has {n} nodes", h.len())));
        }
        Ok((0..n)
            .map(|a| (0..n).map(|b| self.nodes[b].weight * self.get(a, b) * h[b]).sum())
            .collect())
    }

    /// CSV with columns `node_index,v,I,k1_row_norm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_index,v,I,k1_row_norm\n");
        for (k, (node, norm)) in self.nodes.iter().zip(self.row_norms()).enumerate() {
            let i = node.state.continuous_internal().unwrap_or(0.0);
            let _ = writeln!(out, "{k},{:e},{:e},{:e}", node.state.v.norm(), i, norm);
        }
        out
    }
}

/// Integral of `A` over the collision parameters left once `w` and `w_*` are fixed,
/// as a function of `(|V|, I + I_*)` with `E = μ|V|²/2 + I + I_*`.
enum Reduced {
    Energy { c: f64, zeta: f64, lambda: f64 },
    Resonant { c: f64, zeta: f64, zeta1: f64, zeta2: f64, delta: f64, beta: f64, terms: Vec<KinTerm> },
}

impl Reduced {
    fn new(kernel: &KernelModel, delta: Option<f64>) -> Result<Self> {
        // ∫ r^{δ/2-1} (1-r)^{δ/2-1} dr ∫ (1-R)^{δ-1} √R dR, with Ψ's exponents added
        let lambda = |psi: Psi| -> Result<f64> {
            let Some(d) = delta else {
                return Ok(4.0 * PI);
            };
            let [a, b, c, e] = psi.exponents();
            let shapes = [a + d / 2.0, b + d / 2.0, c + 1.5, e + d];
            if shapes.iter().any(|&s| s <= 0.0) {
                return Err(Error::domain(format!(
                    "Ψ exponents {:?} make the (r, R) integral diverge",
                    psi.exponents()
                )));
            }
            Ok(4.0 * PI * (ln_beta(shapes[0], shapes[1]) + ln_beta(shapes[2], shapes[3])).exp())
        };
        Ok(match kernel {
            KernelModel::PowerLawE { c, zeta } => Reduced::Energy {
                c: *c,
                zeta: *zeta,
                lambda: lambda(Psi::Unit)?,
            },
            KernelModel::PsiWeighted { c, zeta, psi } => Reduced::Energy {
                c: *c,
                zeta: *zeta,
                lambda: lambda(*psi)?,
            },
            KernelModel::ResonantTensored { c, zeta, zeta1, zeta2, .. } => {
                let d = delta.ok_or_else(|| Error::FamilyMismatch("resonant kernel on a monatomic species".into()))?;
                Reduced::Resonant {
                    c: *c,
                    zeta: *zeta,
                    zeta1: *zeta1,
                    zeta2: *zeta2,
                    delta: d,
                    beta: ln_beta(d / 2.0, d / 2.0).exp(),
                    terms: kernel.kin_terms().to_vec(),
                }
            }
        })
    }

    fn eval(&self, speed: f64, energy: f64, z: f64) -> f64 {
        match self {
            Reduced::Energy { c, zeta, lambda } => {
                let e = if *zeta == 0.0 { 1.0 } else { energy.powf(zeta / 2.0) };
                c * e * lambda
            }
            Reduced::Resonant {
                c,
                zeta,
                zeta1,
                zeta2,
                delta,
                beta,
                terms,
            } => c * z.powf(1.0 + zeta2 / 2.0 - delta) * beta * sphere_integral(terms, speed, *zeta, *zeta1),
        }
    }
}

/// `∫_{S²} b_kin dσ` in closed form.
fn sphere_integral(terms: &[KinTerm], speed: f64, zeta: f64, zeta1: f64) -> f64 {
    terms
        .iter()
        .map(|t| match t {
            KinTerm::Linear => 4.0 * PI * speed,
            KinTerm::InverseSpeed => 4.0 * PI * speed.powf(-zeta),
            KinTerm::SineSpeed => PI * PI * (speed * speed + 1.0 / speed),
            KinTerm::InverseSine => 2.0 * PI * ln_beta(0.5, 1.0 - zeta1 / 2.0).exp(),
        })
        .sum()
}

fn nodes_for(m: &Maxwellian, grid: &K1Grid) -> Result<Vec<K1Node>> {
    let spec = m.spec();
    let params = m.params();
    let mass = spec.mass(0);
    let kt = m.units().thermal_energy(params.t_kin());
    let kt_int = m.units().thermal_energy(params.t_int());
    let thermal = (kt / mass).sqrt();
    let hermite = gauss_hermite(grid.velocity_nodes);
    let scale = (2.0 * kt / mass).sqrt();
    let axis: Vec<(f64, f64)> = hermite
        .nodes
        .iter()
        .zip(&hermite.weights)
        .map(|(&x, &w)| (scale * x, w * (x * x).exp() * scale))
        .collect();
    let internal: Vec<(Internal, f64)> = match spec.energy(0) {
        EnergyModel::Monatomic => vec![(Internal::None, 1.0)],
        EnergyModel::ContinuousPowerLaw { delta } => {
            let alpha = delta / 2.0 - 1.0;
            let rule = gauss_laguerre(grid.internal_nodes, alpha);
            let cap = kt_int * (delta / 2.0 + grid.internal_cutoff);
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&y, &w)| (y * kt_int, w * y.exp() * y.powf(-alpha) * kt_int))
                .filter(|&(i, _)| i <= cap)
                .map(|(i, w)| (Internal::Continuous(i), w))
                .collect()
        }
        EnergyModel::DiscreteLevels { .. } => {
            return Err(Error::FamilyMismatch("K1 assembly covers continuous and monatomic species".into()));
        }
    };
    let mut nodes = Vec::new();
    for &(x, wx) in &axis {
        for &(y, wy) in &axis {
            for &(z, wz) in &axis {
                let c = Vec3::new(x, y, z);
                if c.norm() > grid.speed_cutoff * thermal {
                    continue;
                }
                for &(int, wi) in &internal {
                    nodes.push(K1Node {
                        state: ParticleState {
                            species: 0,
                            v: params.u + c,
                            internal: int,
                        },
                        weight: wx * wy * wz * wi,
                    });
                }
            }
        }
    }
    Ok(nodes)
}

/// Assembles `k1(w_a, w_b) = -M^{1/2}(w_a) M^{1/2}(w_b) ∫ A dr dR dσ` on the grid. The
/// inner integral is evaluated in closed form; every entry is computed independently,
/// so the symmetry defect measures the kernel and not a mirrored copy.
pub fn assemble_k1(grid: &K1Grid, m: &Maxwellian) -> Result<K1Matrix> {
    if grid.velocity_nodes == 0 || (m.spec().energy(0).is_continuous() && grid.internal_nodes == 0) {
        return Err(Error::invalid("grid must have at least one node per dimension"));
    }
    let spec = m.spec();
    if spec.len() != 1 {
        return Err(Error::invalid("K1 assembly needs a single-species model"));
    }
    if !matches!(m.family(), Family::Monatomic | Family::BorgnakkeLarsen | Family::Resonant) {
        return Err(Error::FamilyMismatch(format!("no K1 assembly for the {:?} family", m.family())));
    }
    let reduced = Reduced::new(spec.kernel(0, 0), spec.energy(0).delta())?;
    let nodes = nodes_for(m, grid)?;
    if nodes.is_empty() {
        return Err(Error::invalid("grid is empty after truncation"));
    }
    let n = nodes.len();
    let mu = 0.5 * spec.mass(0);
    let roots: Vec<f64> = nodes.iter().map(|nd| m.density(&nd.state).sqrt()).collect();
    let internals: Vec<f64> = nodes.iter().map(|nd| nd.state.internal_energy(spec)).collect();
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(a, row)| {
        for (b, out) in row.iter_mut().enumerate() {
            let speed = (nodes[a].state.v - nodes[b].state.v).norm();
            let z = internals[a] + internals[b];
            let energy = 0.5 * mu * speed * speed + z;
            let k = reduced.eval(speed, energy, z);
            // speed singularities of resonant kinetic terms sit on the diagonal only
            *out = if k.is_finite() { -roots[a] * roots[b] * k } else { 0.0 };
        }
    });
    Ok(K1Matrix { nodes, values })
}
