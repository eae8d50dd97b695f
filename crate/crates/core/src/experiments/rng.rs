//! Seeded random draws for the experiments.
//!
//! Every trial gets its own ChaCha8 stream derived from the master seed and
//! a trial counter, so results do not depend on scheduling order. Normal
//! deviates use the Box-Muller transform on that stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;

/// Generator for stream `stream` of the master seed.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal deviates in pairs from Box-Muller.
pub struct Normal<'a, R: Rng> {
    rng: &'a mut R,
    spare: Option<f64>,
}

impl<'a, R: Rng> Normal<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        Self { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = std::f64::consts::TAU * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }
}

/// `m x n` matrix with i.i.d. standard normal entries, filled row by row.
pub fn gaussian_design<R: Rng>(m: usize, n: usize, rng: &mut R) -> Matrix {
    let mut normal = Normal::new(rng);
    let data = (0..m * n).map(|_| normal.sample()).collect();
    Matrix::new(m, n, data).expect("finite normal deviates")
}

/// Length-`n` vector with exactly `k` entries equal to +-1 on a uniformly
/// random support.
pub fn rademacher_signal<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<f64> {
    assert!(k >= 1 && k <= n, "sparsity must lie in [1, n]");
    let support = rand::seq::index::sample(rng, n, k).into_vec();
    let mut x = vec![0.0; n];
    for i in support {
        x[i] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    }
    x
}

/// Length-`m` vector with i.i.d. entries uniform on `[-delta, delta]`.
pub fn uniform_noise<R: Rng>(m: usize, delta: f64, rng: &mut R) -> Vec<f64> {
    assert!(delta >= 0.0, "noise level must be nonnegative");
    if delta == 0.0 {
        return vec![0.0; m];
    }
    (0..m).map(|_| delta * (2.0 * rng.gen::<f64>() - 1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_is_reproducible() {
        let a = gaussian_design(3, 4, &mut stream_rng(7, 0));
        let b = gaussian_design(3, 4, &mut stream_rng(7, 0));
        let c = gaussian_design(3, 4, &mut stream_rng(7, 1));
        assert_eq!(a.data()[0].to_bits(), b.data()[0].to_bits());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn normal_moments() {
        let mut rng = stream_rng(1, 0);
        let mut normal = Normal::new(&mut rng);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = normal.sample();
            s += z;
            s2 += z * z;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn signal_shape() {
        let mut rng = stream_rng(3, 0);
        let x = rademacher_signal(10, 10, &mut rng);
        assert!(x.iter().all(|v| v.abs() == 1.0));
        for k in 1..=10 {
            let x = rademacher_signal(10, k, &mut rng);
            assert_eq!(x.iter().map(|v| v.abs()).sum::<f64>(), k as f64);
        }
    }

    #[test]
    fn signal_support_is_uniform() {
        let (n, k, draws) = (20usize, 5usize, 10_000usize);
        let mut rng = stream_rng(11, 0);
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            for (i, v) in rademacher_signal(n, k, &mut rng).iter().enumerate() {
                if *v != 0.0 {
                    counts[i] += 1;
                }
            }
        }
        let p = k as f64 / n as f64;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sd + 1.0, "count {c}");
        }
    }

    #[test]
    fn noise_bounds() {
        let mut rng = stream_rng(5, 0);
        assert_eq!(uniform_noise(4, 0.0, &mut rng), vec![0.0; 4]);
        let w = uniform_noise(100_000, 0.3, &mut rng);
        assert!(w.iter().all(|v| v.abs() <= 0.3));
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 0.01);
    }
}
