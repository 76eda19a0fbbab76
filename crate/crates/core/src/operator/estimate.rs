//! Monte Carlo estimates and their deterministic parallel reduction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl MCEstimate {
    /// Whether `target` lies within `k` standard errors of the estimate.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    pub fn relative_error(&self, target: f64) -> f64 {
        (self.value - target).abs() / target.abs()
    }
}

/// Running mean and sum of squared deviations (Welford), mergeable with Chan's formula.
/// Also tracks the smallest sample and the number of negative samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub min: f64,
    pub negatives: u64,
}

impl Default for Moments {
    fn default() -> Self {
        Moments {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            negatives: 0,
        }
    }
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.min = self.min.min(x);
        self.negatives += u64::from(x < 0.0);
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        Moments {
            count: n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + other.m2 + d * d * na * nb / n as f64,
            min: self.min.min(other.min),
            negatives: self.negatives + other.negatives,
        }
    }

    pub fn estimate(&self, seed: u64) -> MCEstimate {
        let se = if self.count > 1 {
            (self.m2.max(0.0) / ((self.count - 1) as f64 * self.count as f64)).sqrt()
        } else {
            0.0
        };
        MCEstimate {
            value: self.mean,
            std_error: se,
            samples: self.count,
            seed,
        }
    }
}

/// RNG for one chunk: the seed selects the generator, the chunk index its stream.
pub(crate) fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Evaluates `sample` `n` times over fixed chunks in parallel. Chunk boundaries and
/// streams depend only on `(seed, n, chunk_size)`, and chunk results are merged in
/// chunk order, so the result is bitwise independent of the number of threads.
pub(crate) fn run_chunks<S>(n: u64, seed: u64, chunk_size: u64, sample: S) -> Moments
where
    S: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunk_size = chunk_size.max(1);
    let chunks = n.div_ceil(chunk_size);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = chunk_size.min(n - c * chunk_size);
            let mut acc = Moments::default();
            for _ in 0..len {
                acc.push(sample(&mut rng));
            }
            acc
        })
        .collect();
    parts.into_iter().fold(Moments::default(), Moments::merge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|k| ((k * 37 % 101) as f64).sin()).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - all.mean).abs() < 1e-14);
        assert!((m.m2 - all.m2).abs() < 1e-10);
    }

    #[test]
    fn zero_samples_give_exact_zero() {
        let m = run_chunks(10_000, 1, 64, |_| 0.0);
        let e = m.estimate(1);
        assert_eq!((e.value, e.std_error, e.samples), (0.0, 0.0, 10_000));
    }

    #[test]
    fn independent_of_thread_count() {
        let f = |rng: &mut ChaCha8Rng| rng.random::<f64>();
        let a = run_chunks(50_000, 7, 1000, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_chunks(50_000, 7, 1000, f));
        assert_eq!(a, b);
        assert!((a.mean - 0.5).abs() < 0.01);
    }
}
