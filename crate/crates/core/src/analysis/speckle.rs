//! First-order statistics of a sum of `r` equal-length random phasors.
//!
//! The phasor length is `a / sqrt(r)`, so the mean intensity is `a^2`,
//! the variance `(1 - 1/r) a^4` and the contrast `sqrt(1 - 1/r)`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use super::bessel::{bessel_j0, bessel_j1};
use crate::error::{Error, Result};
use crate::geometry::SystemGeometry;
use crate::rng::{derive_seed, seeded};

/// Width of the Gaussian smoothing applied to the complex field before
/// taking the intensity, relative to `a`. It makes the Hankel integrals
/// absolutely convergent and turns the `r = 1` delta into a narrow peak.
pub const PDF_SMOOTHING: f64 = 1e-3;

/// Samples per Monte-Carlo shard.
const SHARD: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeckleModel {
    pub a: f64,
    pub r: u32,
}

impl SpeckleModel {
    pub fn new(r: u32, a: f64) -> Result<Self> {
        if r == 0 {
            return Err(Error::Domain("phasor count must be at least 1".into()));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Domain(format!("phasor amplitude must be positive, got {a}")));
        }
        Ok(SpeckleModel { a, r })
    }

    pub fn phasor_length(&self) -> f64 {
        self.a / (self.r as f64).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.a * self.a
    }

    pub fn variance(&self) -> f64 {
        (1.0 - 1.0 / self.r as f64) * self.a.powi(4)
    }

    pub fn contrast(&self) -> f64 {
        theoretical_contrast(self.r)
    }

    /// Characteristic function of the summed field at radial frequency `k`,
    /// including the smoothing.
    fn characteristic(&self, k: f64) -> f64 {
        let s = PDF_SMOOTHING * self.a;
        bessel_j0(k * self.phasor_length()).powi(self.r as i32) * (-0.5 * s * s * k * k).exp()
    }

    /// Simpson rule over `[0, k_max]` with a step resolving the fastest
    /// oscillation of `kernel(k) * characteristic(k)`.
    fn hankel(&self, radius: f64, kernel: impl Fn(f64) -> f64) -> Result<f64> {
        let s = PDF_SMOOTHING * self.a;
        let k_max = (80.0f64).sqrt() / s;
        let bandwidth = radius + self.r as f64 * self.phasor_length();
        let step = 2.0 * PI / bandwidth / 16.0;
        let mut n = (k_max / step).ceil() as usize;
        n += n % 2;
        let h = k_max / n as f64;
        let f = |k: f64| kernel(k) * self.characteristic(k);
        let mut acc = f(0.0) + f(k_max);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let value = acc * h / 3.0;
        if !value.is_finite() {
            return Err(Error::Quadrature(format!(
                "Hankel integral diverged at radius {radius}"
            )));
        }
        Ok(value)
    }
}

/// Intensity density `p(I) = 2 pi^2 int_0^inf rho J0^r(2 pi b rho) J0(2 pi sqrt(I) rho) d rho`
/// with phasor length `b = a / sqrt(r)`.
pub fn speckle_pdf(intensity: f64, model: &SpeckleModel) -> Result<f64> {
    if intensity.is_nan() || intensity < 0.0 {
        return Err(Error::Domain(format!("intensity must be nonnegative, got {intensity}")));
    }
    let radius = intensity.sqrt();
    // In k = 2 pi rho the density is (1/2) int k J0(k sqrt I) chi(k) dk.
    Ok(0.5 * model.hankel(radius, |k| k * bessel_j0(k * radius))?)
}

/// `P(I <= t) = sqrt(t) int_0^inf J1(k sqrt t) chi(k) dk`.
pub fn speckle_cdf(intensity: f64, model: &SpeckleModel) -> Result<f64> {
    if intensity.is_nan() || intensity < 0.0 {
        return Err(Error::Domain(format!("intensity must be nonnegative, got {intensity}")));
    }
    if intensity == 0.0 {
        return Ok(0.0);
    }
    let radius = intensity.sqrt();
    Ok(radius * model.hankel(radius, |k| bessel_j1(k * radius))?)
}

/// `sqrt(1 - 1/r)`.
pub fn theoretical_contrast(r: u32) -> f64 {
    (1.0 - 1.0 / r.max(1) as f64).sqrt()
}

/// Contrast after averaging `m` independent patterns, `C1 / sqrt(m)`.
pub fn tm_contrast(c1: f64, m: u32) -> f64 {
    c1 / (m.max(1) as f64).sqrt()
}

/// Phasors overlapping one voxel: the sinc^2 main-lobe area over the
/// Fourier-plane sampling area. Both scale as `lambda^2 f^2 / (nx ny dx dy)`,
/// so the ratio is 4 for any geometry.
pub fn overlap_ratio(geom: &SystemGeometry, wavelength: f64) -> f64 {
    let unit = wavelength * wavelength * geom.focal_length * geom.focal_length
        / (geom.nx as f64 * geom.ny as f64 * geom.dx * geom.dy);
    let lobe = 4.0 * unit;
    let interval = unit;
    lobe / interval
}

/// Intensities of `samples` independent draws of the phasor sum. Sharded
/// over threads with per-shard seeds; the output order is fixed.
pub fn monte_carlo_intensities(model: &SpeckleModel, samples: usize, seed: u64) -> Vec<f64> {
    let shards = samples.div_ceil(SHARD);
    let b2 = model.phasor_length().powi(2);
    let r = model.r as usize;
    (0..shards)
        .into_par_iter()
        .flat_map_iter(|shard| {
            let len = SHARD.min(samples - shard * SHARD);
            let mut rng = seeded(derive_seed(&[seed, shard as u64]));
            let mut phases = vec![0.0; r];
            (0..len)
                .map(|_| {
                    phases.iter_mut().for_each(|p| *p = rng.random_range(-PI..PI));
                    let mut cross = 0.0;
                    for j in 0..r {
                        for k in j + 1..r {
                            cross += (phases[j] - phases[k]).cos();
                        }
                    }
                    b2 * (r as f64 + 2.0 * cross)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Contrast `sigma / mean` of a Monte-Carlo phasor-sum ensemble.
pub fn monte_carlo_contrast(r: u32, a: f64, samples: usize, seed: u64) -> Result<f64> {
    if samples < 10_000 {
        return Err(Error::Domain(format!("need at least 10^4 samples, got {samples}")));
    }
    let model = SpeckleModel::new(r, a)?;
    let values = monte_carlo_intensities(&model, samples, seed);
    Ok(sample_contrast(&values))
}

fn sample_contrast(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt() / mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PROTOTYPE_FOCAL_LENGTH, PROTOTYPE_PITCH, PROTOTYPE_WAVELENGTHS};

    #[test]
    fn closed_forms() {
        assert_eq!(theoretical_contrast(1), 0.0);
        assert!((theoretical_contrast(4) - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((theoretical_contrast(1_000_000) - 1.0).abs() < 1e-6);
        assert_eq!(tm_contrast(0.87, 1), 0.87);
        assert!((tm_contrast(0.87, 24) - 0.1776).abs() < 5e-5);
        assert_eq!(tm_contrast(0.6, 4), 0.3);
    }

    #[test]
    fn overlap_ratio_is_four() {
        let geom = SystemGeometry::new(
            1920,
            1080,
            PROTOTYPE_PITCH,
            PROTOTYPE_PITCH,
            PROTOTYPE_FOCAL_LENGTH,
            PROTOTYPE_WAVELENGTHS,
        )
        .unwrap();
        assert_eq!(overlap_ratio(&geom, 450e-9), 4.0);
        let wide = SystemGeometry {
            nx: 3840,
            ..geom.clone()
        };
        assert_eq!(overlap_ratio(&wide, 450e-9), 4.0);
    }

    #[test]
    fn monte_carlo_single_phasor_has_no_speckle() {
        assert_eq!(monte_carlo_contrast(1, 0.7, 10_000, 3).unwrap(), 0.0);
        assert!(monte_carlo_contrast(4, 1.0, 100, 3).is_err());
    }

    #[test]
    fn monte_carlo_is_scale_free_and_deterministic() {
        let a = monte_carlo_contrast(4, 1.0, 100_000, 9).unwrap();
        let b = monte_carlo_contrast(4, 3.0, 100_000, 9).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert_eq!(a, monte_carlo_contrast(4, 1.0, 100_000, 9).unwrap());
    }

    #[test]
    fn model_moments() {
        let m = SpeckleModel::new(4, 2.0).unwrap();
        assert_eq!(m.mean(), 4.0);
        assert_eq!(m.variance(), 12.0);
        assert!(SpeckleModel::new(0, 1.0).is_err());
        assert!(SpeckleModel::new(2, 0.0).is_err());
    }

    #[test]
    fn pdf_normalises_and_has_mean_a_squared() {
        let model = SpeckleModel::new(4, 1.0).unwrap();
        assert!((speckle_cdf(6.0, &model).unwrap() - 1.0).abs() < 1e-3);
        // Trapezoid over the support [0, (r b)^2] = [0, 4].
        let n = 2000;
        let h = 4.2 / n as f64;
        let (mut mass, mut mean) = (0.0, 0.0);
        for i in 0..=n {
            let x = i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let p = speckle_pdf(x, &model).unwrap();
            assert!(p > -1e-3, "p({x}) = {p}");
            mass += w * p * h;
            mean += w * x * p * h;
        }
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
        assert!((mean - 1.0).abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn single_phasor_density_peaks_at_a_squared() {
        let model = SpeckleModel::new(1, 1.0).unwrap();
        let peak = speckle_pdf(1.0, &model).unwrap();
        assert!(peak > 50.0);
        assert!(speckle_pdf(0.9, &model).unwrap().abs() < 1e-3 * peak);
        assert!(speckle_pdf(1.1, &model).unwrap().abs() < 1e-3 * peak);
        assert!(speckle_pdf(-1.0, &model).is_err());
    }
}
