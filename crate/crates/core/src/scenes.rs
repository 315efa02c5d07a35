//! Procedural test scenes.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::fft::{freq_index, ifft2_inplace};
use crate::field::IntensityImage;
use crate::rng::seeded;
use crate::C64;

/// Natural-image stand-in in sRGB: a random field with power spectrum
/// `1/f^2` plus a few hard-edged discs, stretched to `[0, 1]`.
pub fn natural(shape: (usize, usize), seed: u64) -> IntensityImage {
    let (ny, nx) = shape;
    let mut rng = seeded(seed);
    let mut spectrum = Array2::from_shape_fn(shape, |(r, c)| {
        let fy = freq_index(r, ny) as f64 / ny as f64;
        let fx = freq_index(c, nx) as f64 / nx as f64;
        let f = (fx * fx + fy * fy).sqrt().max(1.0 / ny.max(nx) as f64);
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im) / f
    });
    ifft2_inplace(&mut spectrum);
    let mut img = spectrum.mapv(|v| v.re);
    for _ in 0..6 {
        let cy = rng.random_range(0.0..ny as f64);
        let cx = rng.random_range(0.0..nx as f64);
        let radius = rng.random_range(0.05..0.2) * ny.min(nx) as f64;
        let level: f64 = StandardNormal.sample(&mut rng);
        let std = img.std(0.0);
        img.indexed_iter_mut().for_each(|((r, c), v)| {
            let (dy, dx) = (r as f64 - cy, c as f64 - cx);
            if dy * dy + dx * dx < radius * radius {
                *v += 1.5 * level * std;
            }
        });
    }
    stretch(img)
}

/// Uniform sRGB image.
pub fn flat(shape: (usize, usize), level: f64) -> IntensityImage {
    IntensityImage::srgb(Array2::from_elem(shape, level.clamp(0.0, 1.0))).expect("level is clamped")
}

/// Vertical fringes `floor + (1 + sin(2 pi c / period)) / 2`, rescaled so
/// the peak is 1, in sRGB.
pub fn sinusoid(shape: (usize, usize), period: f64, floor: f64) -> IntensityImage {
    let peak = 1.0 + floor;
    IntensityImage::srgb(Array2::from_shape_fn(shape, |(_, c)| {
        let phase = 2.0 * std::f64::consts::PI * c as f64 / period;
        (floor + 0.5 * (1.0 + phase.sin())) / peak
    }))
    .expect("values lie in [0, 1]")
}

/// Mutually independent sRGB patterns, one per seed offset: natural scenes
/// drawn from distinct seeds.
pub fn independent(shape: (usize, usize), count: usize, seed: u64) -> Vec<IntensityImage> {
    (0..count)
        .map(|i| natural(shape, crate::rng::derive_seed(&[seed, i as u64])))
        .collect()
}

fn stretch(img: Array2<f64>) -> IntensityImage {
    let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    IntensityImage::srgb(img.mapv(|v| ((v - lo) / span).clamp(0.0, 1.0))).expect("values are clamped")
}
