//! Image-quality metrics and speckle statistics.

mod bessel;
pub mod metrics;
pub mod speckle;

pub use bessel::{bessel_j0, bessel_j1};
pub use metrics::{michelson_contrast, psnr, speckle_contrast, ssim, ModulationAxis};
pub use speckle::{
    monte_carlo_contrast, monte_carlo_intensities, overlap_ratio, speckle_cdf, speckle_pdf, theoretical_contrast,
    tm_contrast, SpeckleModel,
};
