//! Optical system geometry and the image-plane layout it implies.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Colour channel of a colour-sequential display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Red,
    Green,
    Blue,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Red, Channel::Green, Channel::Blue];

    pub fn index(self) -> usize {
        match self {
            Channel::Red => 0,
            Channel::Green => 1,
            Channel::Blue => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Red => "red",
            Channel::Green => "green",
            Channel::Blue => "blue",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r" | "red" => Ok(Channel::Red),
            "g" | "green" => Ok(Channel::Green),
            "b" | "blue" => Ok(Channel::Blue),
            other => Err(Error::Config(format!("unknown channel '{other}'"))),
        }
    }
}

/// SLM sampling, Fourier-lens focal length and per-channel wavelengths.
///
/// Arrays over the SLM are `(ny, nx)`: rows run along `y`, columns along `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemGeometry {
    pub nx: usize,
    pub ny: usize,
    /// Pixel pitch along x, meters.
    pub dx: f64,
    /// Pixel pitch along y, meters.
    pub dy: f64,
    /// Fourier lens focal length, meters.
    pub focal_length: f64,
    /// Wavelengths in meters, indexed by [`Channel::index`].
    pub wavelengths: [f64; 3],
}

/// Laser wavelengths of the full-colour prototype (638 / 520 / 450 nm).
pub const PROTOTYPE_WAVELENGTHS: [f64; 3] = [638e-9, 520e-9, 450e-9];
/// FLCOS pixel pitch of the prototype.
pub const PROTOTYPE_PITCH: f64 = 8.2e-6;
/// Fourier lens focal length of the prototype.
pub const PROTOTYPE_FOCAL_LENGTH: f64 = 0.2;

impl SystemGeometry {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, focal_length: f64, wavelengths: [f64; 3]) -> Result<Self> {
        let geom = SystemGeometry {
            nx,
            ny,
            dx,
            dy,
            focal_length,
            wavelengths,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Prototype optics (8.2 um pitch, f = 200 mm, RGB lasers) at the given
    /// pixel counts.
    pub fn prototype(nx: usize, ny: usize) -> Result<Self> {
        Self::new(
            nx,
            ny,
            PROTOTYPE_PITCH,
            PROTOTYPE_PITCH,
            PROTOTYPE_FOCAL_LENGTH,
            PROTOTYPE_WAVELENGTHS,
        )
    }

    /// Smallest geometry whose sideband window holds a `rows x cols` target.
    ///
    /// `ny` is a multiple of four (the carrier sits on a frequency bin) with
    /// no prime factor above 7, and at least `2 * rows + 2` so the window of
    /// `ny / 2 - 1` rows is tall enough. `nx = cols`.
    pub fn fitted(
        rows: usize,
        cols: usize,
        dx: f64,
        dy: f64,
        focal_length: f64,
        wavelengths: [f64; 3],
    ) -> Result<Self> {
        let mut ny = (2 * rows + 2).max(4);
        ny = ny.div_ceil(4) * 4;
        while !is_7_smooth(ny) {
            ny += 4;
        }
        Self::new(cols, ny, dx, dy, focal_length, wavelengths)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::Config(format!(
                "geometry needs at least 2x2 pixels, got {}x{}",
                self.nx, self.ny
            )));
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "geometry.{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("dx", self.dx)?;
        positive("dy", self.dy)?;
        positive("focal_length", self.focal_length)?;
        for (c, &w) in self.wavelengths.iter().enumerate() {
            positive(&format!("wavelengths[{c}]"), w)?;
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn wavelength(&self, channel: Channel) -> f64 {
        self.wavelengths[channel.index()]
    }

    /// Physical size `(x, y)` of the Fourier plane, `f * lambda / d`.
    pub fn fourier_extent(&self, channel: Channel) -> (f64, f64) {
        let lf = self.focal_length * self.wavelength(channel);
        (lf / self.dx, lf / self.dy)
    }

    /// Sample pitch `(x, y)` in the Fourier plane, `lambda * f / (n * d)`.
    pub fn fourier_pitch(&self, channel: Channel) -> (f64, f64) {
        let (ex, ey) = self.fourier_extent(channel);
        (ex / self.nx as f64, ey / self.ny as f64)
    }

    /// The single-sideband passband in the DC-centred Fourier plane: every
    /// row strictly above the DC row and below the Nyquist row, full width.
    pub fn image_window(&self) -> Window {
        let half = self.ny / 2;
        Window {
            row0: half + 1,
            col0: 0,
            rows: self.ny - half - 1,
            cols: self.nx,
        }
    }
}

fn is_7_smooth(mut n: usize) -> bool {
    for p in [2, 3, 5, 7] {
        while n.is_multiple_of(p) {
            n /= p;
        }
    }
    n == 1
}

/// Axis-aligned rectangle of a 2D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Window {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// A `rows x cols` window centred inside `self`.
    pub fn centered(&self, rows: usize, cols: usize) -> Result<Window> {
        if rows > self.rows || cols > self.cols {
            return Err(Error::Config(format!(
                "{rows}x{cols} target does not fit the {}x{} image window",
                self.rows, self.cols
            )));
        }
        Ok(Window {
            row0: self.row0 + (self.rows - rows) / 2,
            col0: self.col0 + (self.cols - cols) / 2,
            rows,
            cols,
        })
    }

    /// Zero canvas of `shape` with `img` written into this window.
    pub fn embed(&self, img: ArrayView2<f64>, shape: (usize, usize)) -> Result<Array2<f64>> {
        if img.dim() != self.shape() {
            return Err(Error::shape(self.shape(), img.dim()));
        }
        if self.row0 + self.rows > shape.0 || self.col0 + self.cols > shape.1 {
            return Err(Error::Config(format!("window {self:?} exceeds grid {shape:?}")));
        }
        let mut out = Array2::zeros(shape);
        out.slice_mut(s![self.row0..self.row0 + self.rows, self.col0..self.col0 + self.cols])
            .assign(&img);
        Ok(out)
    }

    pub fn crop<T: Clone>(&self, full: ArrayView2<T>) -> Array2<T> {
        full.slice(s![self.row0..self.row0 + self.rows, self.col0..self.col0 + self.cols])
            .to_owned()
    }
}
