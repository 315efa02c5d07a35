//! Seeded randomness. Every stochastic operation takes an explicit seed and
//! draws from ChaCha8, whose stream is fixed across platforms.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic hash of a sequence of words into a seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed_u64, |acc, &p| mix(acc ^ mix(p)))
}

/// I.i.d. phases uniform on `[-pi, pi)`.
pub fn random_phase(shape: (usize, usize), seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed);
    Array2::from_shape_simple_fn(shape, || -PI + 2.0 * PI * rng.random::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn deterministic() {
        assert_eq!(random_phase((16, 16), 42), random_phase((16, 16), 42));
        assert_ne!(random_phase((16, 16), 42), random_phase((16, 16), 43));
    }

    #[test]
    fn range() {
        let p = random_phase((64, 64), 1);
        assert!(p.iter().all(|&v| (-PI..PI).contains(&v)));
    }

    #[test]
    fn distinct_seeds_are_uncorrelated() {
        let a = random_phase((256, 256), 1).mapv(|p| C64::from_polar(1.0, p));
        let b = random_phase((256, 256), 2).mapv(|p| C64::from_polar(1.0, p));
        let n = a.len() as f64;
        let ma = a.sum() / n;
        let mb = b.sum() / n;
        let cov: C64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb).conj()).sum::<C64>() / n;
        let va: f64 = a.iter().map(|x| (x - ma).norm_sqr()).sum::<f64>() / n;
        let vb: f64 = b.iter().map(|y| (y - mb).norm_sqr()).sum::<f64>() / n;
        assert!(cov.norm() / (va * vb).sqrt() < 0.05);
    }

    #[test]
    fn circular_mean_vanishes() {
        let p = random_phase((1000, 1000), 7);
        let mean = p.iter().map(|&v| C64::from_polar(1.0, v)).sum::<C64>() / p.len() as f64;
        assert!(mean.norm() < 0.005, "{}", mean.norm());
    }

    #[test]
    fn chi_square_uniformity() {
        let p = random_phase((1000, 1000), 11);
        let mut bins = [0usize; 16];
        for &v in p.iter() {
            let b = (((v + PI) / (2.0 * PI)) * 16.0) as usize;
            bins[b.min(15)] += 1;
        }
        let expected = p.len() as f64 / 16.0;
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 15 degrees of freedom: P(chi2 > 37.70) = 0.001.
        assert!(chi2 < 37.70, "chi2 = {chi2}");
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: Vec<u64> = (0..100).map(|m| derive_seed(&[9, 2, m])).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_eq!(derive_seed(&[9, 2, 5]), seeds[5]);
    }
}
