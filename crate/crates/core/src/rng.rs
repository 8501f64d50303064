//! Seeded Gaussian sampling.

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

/// Two independent `N(0, 1)` draws by Box-Muller.
#[inline]
pub fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // (0, 1] keeps the log finite
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Circularly symmetric complex Gaussian with `E|z|^2 = variance`.
#[inline]
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex<T> {
    let (a, b) = standard_normal_pair(rng);
    let s = (variance * 0.5).sqrt();
    Complex::new(T::lit(a * s), T::lit(b * s))
}

/// Independent generator for block `block` of a run seeded with `seed`.
/// The stream is fixed by the pair alone, so results do not depend on how
/// blocks are spread over workers.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_box_muller() {
        let mut rng = block_rng(3, 0);
        let n = 200_000;
        let (mut m1, mut m2, mut cross) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let (a, b) = standard_normal_pair(&mut rng);
            m1 += a + b;
            m2 += a * a + b * b;
            cross += a * b;
        }
        let n2 = 2.0 * n as f64;
        assert!((m1 / n2).abs() < 0.01);
        assert!((m2 / n2 - 1.0).abs() < 0.01);
        assert!((cross / n as f64).abs() < 0.01);
    }

    #[test]
    fn blocks_are_distinct_and_reproducible() {
        let a: u64 = block_rng(1, 5).random();
        assert_eq!(a, block_rng(1, 5).random::<u64>());
        assert_ne!(a, block_rng(1, 6).random::<u64>());
        assert_ne!(a, block_rng(2, 5).random::<u64>());
    }
}
