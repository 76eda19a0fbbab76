//! Deterministic quadrature rules.
//!
//! Gauss rules come from the Golub-Welsch eigenvalue construction; the endpoint-singular
//! integrals (`I^{δ/2-1}` weights, the `(r, R)` corner exponents) use tanh-sinh or a
//! log-mapped composite Gauss-Legendre rule.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Nodes and weights of an `n`-point Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix, weights are
/// `mu0 * (first eigenvector component)^2`.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> Rule {
    let n = diag.len();
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jm[(i, i)] = diag[i];
        if i + 1 < n {
            jm[(i, i + 1)] = offdiag[i];
            jm[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], mu0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss-Legendre on [-1, 1].
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    golub_welsch(&vec![0.0; n], &off, 2.0)
}

/// Gauss-Hermite for the weight `exp(-x^2)` on the real line.
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n >= 1);
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    golub_welsch(&vec![0.0; n], &off, std::f64::consts::PI.sqrt())
}

/// Generalized Gauss-Laguerre for the weight `x^alpha exp(-x)` on (0, inf), `alpha > -1`.
pub fn gauss_laguerre(n: usize, alpha: f64) -> Rule {
    assert!(n >= 1 && alpha > -1.0);
    let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + 1.0 + alpha).collect();
    let off: Vec<f64> = (1..n).map(|k| (k as f64 * (k as f64 + alpha)).sqrt()).collect();
    golub_welsch(&diag, &off, ln_gamma(alpha + 1.0).exp())
}

/// Composite Gauss-Legendre on `[a, b]` with `panels` equal panels.
pub fn composite_legendre(a: f64, b: f64, panels: usize, order: usize) -> Rule {
    let base = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(lo + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    Rule { nodes, weights }
}

/// Rule on `[lo, hi]` inside (0, 1) resolving power-law behavior at both ends of (0, 1):
/// each half is mapped logarithmically (`x = lo (1/2 / lo)^t`), so `x^e` becomes an
/// exponential in `t` and composite Gauss-Legendre converges fast.
pub fn log_mapped_unit(lo: f64, hi: f64, panels: usize, order: usize) -> Rule {
    assert!(0.0 < lo && lo < 0.5 && 0.5 < hi && hi < 1.0);
    let t = composite_legendre(0.0, 1.0, panels, order);
    let mut nodes = Vec::with_capacity(2 * t.len());
    let mut weights = Vec::with_capacity(2 * t.len());
    let left = (0.5 / lo).ln();
    for (&s, &w) in t.nodes.iter().zip(&t.weights) {
        let x = lo * (left * s).exp();
        nodes.push(x);
        weights.push(w * x * left);
    }
    let right = (0.5 / (1.0 - hi)).ln();
    for (&s, &w) in t.nodes.iter().zip(&t.weights).rev() {
        let y = (1.0 - hi) * (right * s).exp();
        nodes.push(1.0 - y);
        weights.push(w * y * right);
    }
    Rule { nodes, weights }
}

/// Tanh-sinh integration of `f` over `[a, b]`.
///
/// `f(x, dist)` also receives the distance from `x` to the nearer endpoint so that
/// integrands with endpoint singularities can be evaluated without cancellation.
/// Refines the step until two successive levels agree to `tol` (relative).
pub fn tanh_sinh(f: impl Fn(f64, f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let half = 0.5 * (b - a);
    let eval = |t: f64| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let c = s.cosh();
        // distance from the nearer endpoint, in units of half, is 1 - |tanh s| = 1/(e^{|s|} cosh s)
        let dist = half / ((s.abs()).exp() * c);
        if dist <= 0.0 || !dist.is_finite() {
            return 0.0;
        }
        let w = half * FRAC_PI_2 * t.cosh() / (c * c);
        let x = if t < 0.0 { a + dist } else { b - dist };
        let v = f(x, dist);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let t_max = 6.5;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = h * sum;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = h * sum;
        if (next - estimate).abs() <= tol * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre(5);
        assert!((r.integrate(|x| x.powi(8)) - 2.0 / 9.0).abs() < 1e-14);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        let r = gauss_hermite(8);
        let sp = std::f64::consts::PI.sqrt();
        assert!((r.integrate(|_| 1.0) - sp).abs() < 1e-13);
        assert!((r.integrate(|x| x * x) - sp / 2.0).abs() < 1e-13);
        assert!((r.integrate(|x| x.powi(4)) - 0.75 * sp).abs() < 1e-13);
    }

    #[test]
    fn laguerre_moments() {
        for alpha in [0.0, -0.4915, 0.5, 1.0] {
            let r = gauss_laguerre(10, alpha);
            for k in 0..4 {
                let exact = gamma(alpha + 1.0 + k as f64);
                assert!((r.integrate(|x| x.powi(k)) - exact).abs() < 1e-11 * exact);
            }
        }
    }

    #[test]
    fn log_mapped_handles_corner_powers() {
        let r = log_mapped_unit(1e-8, 1.0 - 1e-8, 8, 16);
        // ∫ x^{-1/2} from 1e-8 to 1-1e-8
        let exact = 2.0 * ((1.0f64 - 1e-8).sqrt() - 1e-4);
        assert!((r.integrate(|x| x.powf(-0.5)) - exact).abs() < 1e-10);
        let exact = ((1.0 - 1e-8) / 1e-8f64).ln();
        assert!((r.integrate(|x| 1.0 / x) - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        let v = tanh_sinh(|x, _| x.powf(-0.75), 0.0, 1.0, 1e-12);
        assert!((v - 4.0).abs() < 1e-9, "{v}");
        let v = tanh_sinh(|x, _| (1.0 - x * x).sqrt(), -1.0, 1.0, 1e-13);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
