//! Binary amplitude computer-generated holography for speckle-free
//! multiplane ("true 3D") projection.
//!
//! The crate is organised bottom-up:
//!
//! * [`field`], [`color`], [`fft`], [`rng`] and [`geometry`]: grid types,
//!   transfer curves, unitary transforms and seeded randomness.
//! * [`propagation`]: angular-spectrum (coherent) and OTF-based (incoherent)
//!   free-space propagation, the Fourier lens, and adjoints.
//! * [`target`]: focal-stack targets from RGBD input or independent planes.
//! * [`encoding`]: single-sideband amplitude encoding and binarisation.
//! * [`optimizer`]: B-SGD with a straight-through estimator, plus the
//!   Gerchberg-Saxton and random-phase baselines.
//! * [`multiplex`]: temporally multiplexed frame sets and intensity averaging.
//! * [`analysis`]: image metrics and first-order speckle statistics.
//! * [`io`]: PNG, raw float, PBM and packed-bit file formats.

pub mod analysis;
pub mod color;
pub mod encoding;
pub mod error;
pub mod fft;
pub mod field;
pub mod geometry;
pub mod io;
pub mod multiplex;
pub mod optimizer;
pub mod propagation;
pub mod rng;
pub mod scenes;
pub mod target;

pub use error::{Error, Result};
pub use field::{ColorSpace, ComplexField, IntensityImage};
pub use geometry::{Channel, SystemGeometry, Window};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex<f64>;
