//! Free-space propagation between planes near the Fourier plane.
//!
//! Coherent propagation uses the angular-spectrum transfer function
//! `H_c = exp(i 2pi/lambda sqrt(1 - (lambda fx)^2 - (lambda fy)^2) z)` on the
//! propagating band (zero outside). Incoherent propagation multiplies an
//! intensity spectrum by an optical transfer function built from the
//! autocorrelation of `H_c`.
//!
//! Transfer functions are stored in FFT order (DC at `[0, 0]`) so they
//! multiply unshifted spectra directly. With [`Padding::Double`] every
//! propagation zero-pads to twice the size in each dimension, centred, and
//! crops back afterwards, which turns the circular DFT convolution into a
//! linear one over the original window.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, LazyLock, RwLock};

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::encoding;
use crate::error::{Error, Result};
use crate::fft::{fft2_inplace, fftshift, freq_index, ifft2_inplace, ifftshift};
use crate::field::{ColorSpace, ComplexField, IntensityImage};
use crate::geometry::SystemGeometry;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransferKind {
    Coherent,
    Incoherent,
}

/// Transfer function sampled on a DFT frequency grid, FFT order.
#[derive(Debug, Clone)]
pub struct TransferFunction {
    pub grid: Array2<C64>,
    /// Spatial sample pitch `(x, y)` the frequency grid derives from.
    pub pitch: (f64, f64),
    pub z: f64,
    pub wavelength: f64,
    pub kind: TransferKind,
}

/// Spatial frequencies `(fx, fy)` in cycles/meter of bin `(row, col)`.
pub fn frequency(shape: (usize, usize), pitch: (f64, f64), row: usize, col: usize) -> (f64, f64) {
    let (ny, nx) = shape;
    (
        freq_index(col, nx) as f64 / (nx as f64 * pitch.0),
        freq_index(row, ny) as f64 / (ny as f64 * pitch.1),
    )
}

/// Angular-spectrum transfer function for a `shape` grid at `pitch`.
pub fn coherent_transfer(shape: (usize, usize), pitch: (f64, f64), z: f64, wavelength: f64) -> TransferFunction {
    let k = 2.0 * PI / wavelength;
    let cutoff = 1.0 / (wavelength * wavelength);
    let grid = Array2::from_shape_fn(shape, |(r, c)| {
        let (fx, fy) = frequency(shape, pitch, r, c);
        let f2 = fx * fx + fy * fy;
        if f2 < cutoff {
            let kz = k * (1.0 - wavelength * wavelength * f2).sqrt();
            C64::from_polar(1.0, kz * z)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    TransferFunction {
        grid,
        pitch,
        z,
        wavelength,
        kind: TransferKind::Coherent,
    }
}

/// Unnormalised autocorrelation `sum_f H(f) conj(H(f - lag))` of a coherent
/// transfer function, for every signed lag representable on its grid.
///
/// Computed as `F[|F^-1[H]|^2]` on a grid padded to twice the size so the
/// correlation is linear, not circular. Nyquist lags (even sizes only) use
/// the mean of the `-n/2` and `+n/2` lags, which keeps the result Hermitian
/// on the grid.
fn autocorrelation(hc: &Array2<C64>) -> Array2<C64> {
    let (ny, nx) = hc.dim();
    let (py, px) = (2 * ny, 2 * nx);
    let mut work = Array2::zeros((py, px));
    work.slice_mut(s![0..ny, 0..nx]).assign(&fftshift(hc));
    ifft2_inplace(&mut work);
    work.mapv_inplace(|v| C64::new(v.norm_sqr(), 0.0));
    fft2_inplace(&mut work);
    // Undo the two 1/sqrt(N) factors and the extra 1/sqrt(N) of |.|^2 so the
    // result equals the direct sum.
    let scale = (py * px) as f64;
    let scale = scale.sqrt();
    let at =
        |dy: isize, dx: isize| work[[dy.rem_euclid(py as isize) as usize, dx.rem_euclid(px as isize) as usize]] * scale;
    Array2::from_shape_fn((ny, nx), |(r, c)| {
        let dy = freq_index(r, ny);
        let dx = freq_index(c, nx);
        let ys: &[isize] = if ny % 2 == 0 && dy == -(ny as isize) / 2 {
            &[dy, -dy]
        } else {
            &[dy]
        };
        let xs: &[isize] = if nx % 2 == 0 && dx == -(nx as isize) / 2 {
            &[dx, -dx]
        } else {
            &[dx]
        };
        let mut acc = C64::new(0.0, 0.0);
        for &y in ys {
            for &x in xs {
                acc += at(y, x);
            }
        }
        acc / (ys.len() * xs.len()) as f64
    })
}

/// Incoherent transfer function `H_c ⋆ H_c`, normalised to unit DC gain.
pub fn incoherent_transfer(hc: &TransferFunction) -> Result<TransferFunction> {
    if hc.kind != TransferKind::Coherent {
        return Err(Error::Domain(
            "incoherent_transfer expects a coherent transfer function".into(),
        ));
    }
    let mut grid = autocorrelation(&hc.grid);
    let dc = grid[[0, 0]].re;
    if dc <= 0.0 {
        return Err(Error::ZeroEnergy(
            "coherent transfer function has an empty passband".into(),
        ));
    }
    grid.mapv_inplace(|v| v / dc);
    Ok(TransferFunction {
        grid,
        pitch: hc.pitch,
        z: hc.z,
        wavelength: hc.wavelength,
        kind: TransferKind::Incoherent,
    })
}

/// Defocus transfer function relative to best focus: `H_i(z) / H_i(0)`.
///
/// On a sampled grid the in-focus OTF `H_i(0)` is a triangle that never
/// drops below 1/2, so the ratio is well defined, bounded by 1 in modulus,
/// and equal to 1 everywhere at `z = 0`.
pub fn defocus_transfer(shape: (usize, usize), pitch: (f64, f64), z: f64, wavelength: f64) -> Result<TransferFunction> {
    let focused = incoherent_transfer(&coherent_transfer(shape, pitch, 0.0, wavelength))?;
    let mut tf = incoherent_transfer(&coherent_transfer(shape, pitch, z, wavelength))?;
    ndarray::Zip::from(&mut tf.grid)
        .and(&focused.grid)
        .for_each(|h, &f| *h = if f.re > 0.0 { *h / f.re } else { C64::new(0.0, 0.0) });
    Ok(tf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Circular convolution on the input grid.
    None,
    /// Zero-pad to twice the size, then crop back.
    #[default]
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct TfKey {
    shape: (usize, usize),
    pitch: (u64, u64),
    z: u64,
    wavelength: u64,
    kind: TransferKind,
}

impl TfKey {
    fn new(shape: (usize, usize), pitch: (f64, f64), z: f64, wavelength: f64, kind: TransferKind) -> Self {
        TfKey {
            shape,
            pitch: (pitch.0.to_bits(), pitch.1.to_bits()),
            z: z.to_bits(),
            wavelength: wavelength.to_bits(),
            kind,
        }
    }
}

/// Intensity after incoherent propagation plus energy bookkeeping.
#[derive(Debug, Clone)]
pub struct IncoherentOutput {
    pub image: IntensityImage,
    /// Energy removed by clamping negative round-off to zero.
    pub clamped_energy: f64,
    /// Energy that landed in the padding and was cropped away.
    pub outside_energy: f64,
    /// Largest imaginary residue relative to the peak real value.
    pub imag_residue: f64,
}

/// Propagation engine with a transfer-function cache that is safe for
/// concurrent readers.
#[derive(Debug, Default)]
pub struct Propagator {
    padding: Padding,
    cache: RwLock<HashMap<TfKey, Arc<Array2<C64>>>>,
}

static DEFAULT_PROPAGATOR: LazyLock<Propagator> = LazyLock::new(|| Propagator::new(Padding::Double));

/// Process-wide propagator with [`Padding::Double`].
pub fn default_propagator() -> &'static Propagator {
    &DEFAULT_PROPAGATOR
}

fn band_covers_grid(pitch: (f64, f64), wavelength: f64) -> bool {
    let fx = 0.5 / pitch.0;
    let fy = 0.5 / pitch.1;
    fx * fx + fy * fy < 1.0 / (wavelength * wavelength)
}

impl Propagator {
    pub fn new(padding: Padding) -> Self {
        Propagator {
            padding,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    fn work_shape(&self, shape: (usize, usize)) -> (usize, usize) {
        match self.padding {
            Padding::None => shape,
            Padding::Double => (2 * shape.0, 2 * shape.1),
        }
    }

    fn cached(&self, key: TfKey, build: impl FnOnce() -> Result<Array2<C64>>) -> Result<Arc<Array2<C64>>> {
        if let Some(tf) = self.cache.read().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(tf));
        }
        let tf = Arc::new(build()?);
        let mut cache = self.cache.write().expect("cache poisoned");
        Ok(Arc::clone(cache.entry(key).or_insert(tf)))
    }

    fn coherent_grid(&self, shape: (usize, usize), pitch: (f64, f64), z: f64, wavelength: f64) -> Arc<Array2<C64>> {
        let key = TfKey::new(shape, pitch, z, wavelength, TransferKind::Coherent);
        self.cached(key, || Ok(coherent_transfer(shape, pitch, z, wavelength).grid))
            .expect("coherent transfer is infallible")
    }

    fn pad(&self, a: &Array2<C64>) -> Array2<C64> {
        match self.padding {
            Padding::None => a.clone(),
            Padding::Double => {
                let (ny, nx) = a.dim();
                let mut out = Array2::zeros((2 * ny, 2 * nx));
                out.slice_mut(s![ny / 2..ny / 2 + ny, nx / 2..nx / 2 + nx]).assign(a);
                out
            }
        }
    }

    fn crop<T: Clone>(&self, a: Array2<T>, shape: (usize, usize)) -> Array2<T> {
        match self.padding {
            Padding::None => a,
            Padding::Double => {
                let (ny, nx) = shape;
                a.slice(s![ny / 2..ny / 2 + ny, nx / 2..nx / 2 + nx]).to_owned()
            }
        }
    }

    /// Coherent propagation of a raw array by `z`; with `adjoint` the
    /// spectrum is multiplied by `conj(H_c)` instead.
    pub fn propagate_array(
        &self,
        a: &Array2<C64>,
        pitch: (f64, f64),
        wavelength: f64,
        z: f64,
        adjoint: bool,
    ) -> Array2<C64> {
        if z == 0.0 && band_covers_grid(pitch, wavelength) {
            return a.clone();
        }
        let shape = a.dim();
        let work_shape = self.work_shape(shape);
        let h = self.coherent_grid(work_shape, pitch, z, wavelength);
        let mut work = self.pad(a);
        fft2_inplace(&mut work);
        if adjoint {
            ndarray::Zip::from(&mut work).and(&*h).for_each(|v, &t| *v *= t.conj());
        } else {
            ndarray::Zip::from(&mut work).and(&*h).for_each(|v, &t| *v *= t);
        }
        ifft2_inplace(&mut work);
        self.crop(work, shape)
    }

    /// `ifft2(fft2(u) * H_c)`; energy is preserved on the propagating band
    /// except for whatever leaves the window through the padding.
    pub fn propagate_coherent(&self, u: &ComplexField, z: f64) -> ComplexField {
        u.with_data(self.propagate_array(u.data(), u.pitch(), u.wavelength(), z, false))
    }

    /// Adjoint of [`Self::propagate_coherent`].
    pub fn propagate_coherent_adjoint(&self, u: &ComplexField, z: f64) -> ComplexField {
        u.with_data(self.propagate_array(u.data(), u.pitch(), u.wavelength(), z, true))
    }

    /// Defocus of an intensity image by `z` under spatially incoherent light.
    pub fn propagate_incoherent(
        &self,
        img: &IntensityImage,
        z: f64,
        wavelength: f64,
        pitch: (f64, f64),
    ) -> Result<IncoherentOutput> {
        if img.space() != ColorSpace::Linear {
            return Err(Error::Domain("incoherent propagation needs a linear image".into()));
        }
        if z == 0.0 {
            return Ok(IncoherentOutput {
                image: img.clone(),
                clamped_energy: 0.0,
                outside_energy: 0.0,
                imag_residue: 0.0,
            });
        }
        let shape = img.shape();
        let work_shape = self.work_shape(shape);
        let key = TfKey::new(work_shape, pitch, z, wavelength, TransferKind::Incoherent);
        let h = self.cached(key, || Ok(defocus_transfer(work_shape, pitch, z, wavelength)?.grid))?;

        let complex = img.data().mapv(|v| C64::new(v, 0.0));
        let mut work = self.pad(&complex);
        fft2_inplace(&mut work);
        ndarray::Zip::from(&mut work).and(&*h).for_each(|v, &t| *v *= t);
        ifft2_inplace(&mut work);

        let peak = work.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let imag = work.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        let total: f64 = work.iter().map(|v| v.re).sum();
        let real = self.crop(work.mapv(|v| v.re), shape);
        let inside: f64 = real.sum();
        let mut clamped_energy = 0.0;
        let data = real.mapv(|v| {
            if v < 0.0 {
                clamped_energy -= v;
                0.0
            } else {
                v
            }
        });
        Ok(IncoherentOutput {
            image: IntensityImage::from_parts(data, ColorSpace::Linear),
            clamped_energy,
            outside_energy: total - inside,
            imag_residue: if peak > 0.0 { imag / peak } else { 0.0 },
        })
    }

    /// Radius (meters) holding half the energy of the incoherent defocus
    /// kernel at `z`. Zero at best focus.
    pub fn half_energy_radius(&self, shape: (usize, usize), pitch: (f64, f64), z: f64, wavelength: f64) -> Result<f64> {
        if z == 0.0 {
            return Ok(0.0);
        }
        let work_shape = self.work_shape(shape);
        let key = TfKey::new(work_shape, pitch, z, wavelength, TransferKind::Incoherent);
        let h = self.cached(key, || Ok(defocus_transfer(work_shape, pitch, z, wavelength)?.grid))?;
        let mut kernel = (*h).clone();
        ifft2_inplace(&mut kernel);
        let (ny, nx) = work_shape;
        let norm = ((ny * nx) as f64).sqrt();
        let mut samples: Vec<(f64, f64)> = kernel
            .indexed_iter()
            .map(|((r, c), v)| {
                let y = freq_index(r, ny) as f64 * pitch.1;
                let x = freq_index(c, nx) as f64 * pitch.0;
                ((x * x + y * y).sqrt(), v.re * norm)
            })
            .collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = samples.iter().map(|s| s.1).sum();
        let mut acc = 0.0;
        for (radius, w) in samples {
            acc += w;
            if acc >= 0.5 * total {
                return Ok(radius);
            }
        }
        Ok(f64::INFINITY)
    }
}

/// Coherent propagation with the default (zero-padded) propagator.
pub fn propagate_coherent(u: &ComplexField, z: f64) -> ComplexField {
    default_propagator().propagate_coherent(u, z)
}

/// Incoherent propagation with the default (zero-padded) propagator.
pub fn propagate_incoherent(
    img: &IntensityImage,
    z: f64,
    wavelength: f64,
    pitch: (f64, f64),
) -> Result<IncoherentOutput> {
    default_propagator().propagate_incoherent(img, z, wavelength, pitch)
}

/// Centred unitary FFT from the SLM plane to the Fourier plane:
/// `fftshift(fft2(u))`. The output pitch is `lambda f / (n d)`.
pub fn fourier_lens(u: &ComplexField, geom: &SystemGeometry) -> ComplexField {
    let mut data = u.data().clone();
    fft2_inplace(&mut data);
    let (ny, nx) = u.shape();
    let lf = u.wavelength() * geom.focal_length;
    let pitch = (lf / (nx as f64 * geom.dx), lf / (ny as f64 * geom.dy));
    ComplexField::from_parts(fftshift(&data), pitch, u.wavelength())
}

/// Adjoint (and inverse) of [`fourier_lens`]: `ifft2(ifftshift(v))`, back
/// on the SLM pitch.
pub fn inverse_fourier_lens(v: &ComplexField, geom: &SystemGeometry) -> ComplexField {
    let mut data = ifftshift(v.data());
    ifft2_inplace(&mut data);
    ComplexField::from_parts(data, (geom.dx, geom.dy), v.wavelength())
}

/// Operators of the forward reconstruction chain.
#[derive(Debug, Clone)]
pub enum Operator {
    /// Coherent propagation by `z` (or its adjoint).
    Propagate {
        z: f64,
        adjoint: bool,
    },
    FourierLens(SystemGeometry),
    InverseFourierLens(SystemGeometry),
    SidebandFilter,
    /// `|u|`; nonlinear.
    Magnitude,
    /// Elementwise sign of the real part; nonlinear.
    Binarize,
}

impl Operator {
    pub fn apply(&self, u: &ComplexField) -> ComplexField {
        let prop = default_propagator();
        match self {
            Operator::Propagate { z, adjoint: false } => prop.propagate_coherent(u, *z),
            Operator::Propagate { z, adjoint: true } => prop.propagate_coherent_adjoint(u, *z),
            Operator::FourierLens(g) => fourier_lens(u, g),
            Operator::InverseFourierLens(g) => inverse_fourier_lens(u, g),
            Operator::SidebandFilter => encoding::sideband_filter(u),
            Operator::Magnitude => u.with_data(u.data().mapv(|v| C64::new(v.norm(), 0.0))),
            Operator::Binarize => u.with_data(u.data().mapv(|v| C64::new(if v.re >= 0.0 { 1.0 } else { -1.0 }, 0.0))),
        }
    }

    pub fn adjoint(&self) -> Result<Operator> {
        adjoint_of(self)
    }
}

/// Conjugate-transpose of a linear operator of the reconstruction chain.
pub fn adjoint_of(op: &Operator) -> Result<Operator> {
    Ok(match op {
        Operator::Propagate { z, adjoint } => Operator::Propagate {
            z: *z,
            adjoint: !adjoint,
        },
        Operator::FourierLens(g) => Operator::InverseFourierLens(g.clone()),
        Operator::InverseFourierLens(g) => Operator::FourierLens(g.clone()),
        Operator::SidebandFilter => Operator::SidebandFilter,
        Operator::Magnitude => return Err(Error::Unsupported("magnitude is nonlinear".into())),
        Operator::Binarize => return Err(Error::Unsupported("binarization is nonlinear".into())),
    })
}
