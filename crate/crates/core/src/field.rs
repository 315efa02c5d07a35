//! Sampled complex fields and intensity images.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// A 2D complex amplitude on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    data: Array2<C64>,
    /// Sample pitch `(x, y)` in meters.
    pitch: (f64, f64),
    /// Wavelength in meters.
    wavelength: f64,
}

impl ComplexField {
    /// Fails if any sample is NaN or infinite, or the pitch/wavelength is not
    /// positive.
    pub fn new(data: Array2<C64>, pitch: (f64, f64), wavelength: f64) -> Result<Self> {
        if let Some(((r, c), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field sample {v} at ({r}, {c})")));
        }
        if !(pitch.0 > 0.0 && pitch.1 > 0.0 && wavelength > 0.0) {
            return Err(Error::Domain(format!(
                "pitch {pitch:?} and wavelength {wavelength} must be positive"
            )));
        }
        Ok(Self {
            data,
            pitch,
            wavelength,
        })
    }

    /// Skips the finiteness scan; for results of operations on valid fields.
    pub(crate) fn from_parts(data: Array2<C64>, pitch: (f64, f64), wavelength: f64) -> Self {
        Self {
            data,
            pitch,
            wavelength,
        }
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<C64> {
        self.data
    }

    pub fn pitch(&self) -> (f64, f64) {
        self.pitch
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    /// Total energy `sum |u|^2`.
    pub fn energy(&self) -> f64 {
        energy(&self.data)
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.data.mapv(|v| v.norm_sqr())
    }

    pub fn amplitude(&self) -> Array2<f64> {
        self.data.mapv(|v| v.norm())
    }

    pub(crate) fn with_data(&self, data: Array2<C64>) -> Self {
        Self::from_parts(data, self.pitch, self.wavelength)
    }
}

pub fn energy(a: &Array2<C64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Srgb,
    Linear,
}

/// Nonnegative single-channel image tagged with its transfer curve.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    data: Array2<f64>,
    space: ColorSpace,
}

impl IntensityImage {
    /// Linear images must be finite and nonnegative; sRGB images must lie in
    /// `[0, 1]`.
    pub fn new(data: Array2<f64>, space: ColorSpace) -> Result<Self> {
        for ((row, col), &value) in data.indexed_iter() {
            let ok = match space {
                ColorSpace::Linear => value.is_finite() && value >= 0.0,
                ColorSpace::Srgb => (0.0..=1.0).contains(&value),
            };
            if !ok {
                return Err(match space {
                    ColorSpace::Srgb => Error::PixelOutOfRange { row, col, value },
                    ColorSpace::Linear => Error::Domain(format!(
                        "linear intensity {value} at ({row}, {col}) is negative or non-finite"
                    )),
                });
            }
        }
        Ok(Self { data, space })
    }

    pub fn linear(data: Array2<f64>) -> Result<Self> {
        Self::new(data, ColorSpace::Linear)
    }

    pub fn srgb(data: Array2<f64>) -> Result<Self> {
        Self::new(data, ColorSpace::Srgb)
    }

    pub(crate) fn from_parts(data: Array2<f64>, space: ColorSpace) -> Self {
        Self { data, space }
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn energy(&self) -> f64 {
        self.data.sum()
    }
}
