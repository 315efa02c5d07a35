//! Single-sideband amplitude encoding and binarisation.
//!
//! A complex field `u` is written onto an amplitude-only SLM as
//! `Re[u exp(i 2pi fc y)]` with a vertical carrier at a quarter of the
//! sampling rate, `fc = 1 / (4 dy)`. In the DC-centred Fourier plane the
//! carrier shifts the spectrum of `u` up by `ny / 4` rows into the upper
//! half plane; its conjugate twin lands in the lower half. The sideband
//! filter keeps the rows strictly between the DC row and the Nyquist row,
//! at full width, which passes exactly one copy.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft2_inplace, fftshift, ifft2_inplace, ifftshift, roll_rows};
use crate::field::ComplexField;
use crate::geometry::{Channel, SystemGeometry};
use crate::C64;

/// Carrier frequency `(fx, fy)` in cycles/meter.
pub fn carrier(geom: &SystemGeometry) -> (f64, f64) {
    (0.0, 1.0 / (4.0 * geom.dy))
}

/// Whether centred row `row` of an `ny`-row Fourier plane is in the passband:
/// strictly above DC and strictly below the Nyquist row.
pub fn in_passband(row: usize, ny: usize) -> bool {
    let s = row as isize - (ny / 2) as isize;
    s >= 1 && 2 * s < ny as isize
}

/// Zeroes every row of a DC-centred spectrum outside the passband.
pub fn sideband_filter_inplace(spectrum: &mut Array2<C64>) {
    let ny = spectrum.nrows();
    for (r, mut row) in spectrum.rows_mut().into_iter().enumerate() {
        if !in_passband(r, ny) {
            row.fill(C64::new(0.0, 0.0));
        }
    }
}

/// Orthogonal projection onto the single-sideband passband. The input must
/// be DC-centred (see [`crate::fft::fftshift`]).
pub fn sideband_filter(spectrum: &ComplexField) -> ComplexField {
    let mut data = spectrum.data().clone();
    sideband_filter_inplace(&mut data);
    spectrum.with_data(data)
}

/// Continuous amplitude hologram.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeHologram {
    pub grid: Array2<f64>,
    /// Carrier `(fx, fy)` in cycles/meter.
    pub carrier: (f64, f64),
    pub seed: u64,
    pub channel: Channel,
}

fn check_carrier_rows(ny: usize) -> Result<()> {
    if !ny.is_multiple_of(4) {
        return Err(Error::Config(format!(
            "ny = {ny} must be a multiple of 4 so the carrier falls on a frequency bin"
        )));
    }
    Ok(())
}

/// `Re[u(x) exp(i 2pi fc . x)]` with the quarter-rate vertical carrier.
///
/// With `fc = 1 / (4 dy)` the carrier phase on row `r` is `r pi / 2`, so the
/// carrier is the exact sequence `1, i, -1, -i`.
pub fn ssb_encode(u: &ComplexField, geom: &SystemGeometry, seed: u64, channel: Channel) -> AmplitudeHologram {
    let turns = [
        C64::new(1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, -1.0),
    ];
    let grid = Array2::from_shape_fn(u.shape(), |(r, c)| (u.data()[[r, c]] * turns[r % 4]).re);
    AmplitudeHologram {
        grid,
        carrier: carrier(geom),
        seed,
        channel,
    }
}

/// Recovers the encoded field: sideband filter, shift down by the carrier,
/// inverse transform, and undo the factor 1/2 of the real part.
pub fn ssb_decode(h: &AmplitudeHologram, geom: &SystemGeometry, wavelength: f64) -> Result<ComplexField> {
    let (ny, _) = h.grid.dim();
    check_carrier_rows(ny)?;
    let mut spec = h.grid.mapv(|v| C64::new(v, 0.0));
    fft2_inplace(&mut spec);
    let mut spec = fftshift(&spec);
    sideband_filter_inplace(&mut spec);
    let mut base = ifftshift(&roll_rows(&spec, -((ny / 4) as isize)));
    ifft2_inplace(&mut base);
    base.mapv_inplace(|v| v * 2.0);
    ComplexField::new(base, (geom.dx, geom.dy), wavelength)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryForm {
    /// Values in {-1, +1}, used during optimisation.
    Signed,
    /// Values in {0, 1}, uploaded to the SLM.
    Device,
}

/// Binary hologram with the seed that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryHologram {
    grid: Array2<i8>,
    form: BinaryForm,
    pub seed: u64,
    pub channel: Channel,
}

impl BinaryHologram {
    pub fn new(grid: Array2<i8>, form: BinaryForm, seed: u64, channel: Channel) -> Result<Self> {
        let ok = |v: i8| match form {
            BinaryForm::Signed => v == -1 || v == 1,
            BinaryForm::Device => v == 0 || v == 1,
        };
        if let Some(((r, c), v)) = grid.indexed_iter().find(|(_, &v)| !ok(v)) {
            return Err(Error::Domain(format!(
                "value {v} at ({r}, {c}) is not in the {form:?} alphabet"
            )));
        }
        Ok(Self {
            grid,
            form,
            seed,
            channel,
        })
    }

    pub fn grid(&self) -> &Array2<i8> {
        &self.grid
    }

    pub fn form(&self) -> BinaryForm {
        self.form
    }

    pub fn shape(&self) -> (usize, usize) {
        self.grid.dim()
    }

    /// Hologram values as reals in the signed alphabet.
    pub fn signed_values(&self) -> Array2<f64> {
        match self.form {
            BinaryForm::Signed => self.grid.mapv(f64::from),
            BinaryForm::Device => self.grid.mapv(|v| 2.0 * f64::from(v) - 1.0),
        }
    }

    /// Hologram values as reals in its own alphabet.
    pub fn values(&self) -> Array2<f64> {
        self.grid.mapv(f64::from)
    }
}

/// `sign(x)` with `sign(0) = +1`.
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Hard-clipping binarisation into the signed alphabet.
pub fn binarize_forward(h: &AmplitudeHologram) -> BinaryHologram {
    BinaryHologram {
        grid: h.grid.mapv(|v| if v >= 0.0 { 1 } else { -1 }),
        form: BinaryForm::Signed,
        seed: h.seed,
        channel: h.channel,
    }
}

/// Straight-through gradient of `Htanh(x) = max(-1, min(1, x))`: passes the
/// upstream gradient where `|h| <= 1` (closed interval), zero elsewhere.
pub fn ste_backward(h: &Array2<f64>, upstream: &Array2<f64>) -> Result<Array2<f64>> {
    if h.dim() != upstream.dim() {
        return Err(Error::shape(h.dim(), upstream.dim()));
    }
    let mut out = upstream.clone();
    Zip::from(&mut out).and(h).for_each(|g, &x| {
        if x.abs() > 1.0 {
            *g = 0.0;
        }
    });
    Ok(out)
}

/// `(b + 1) / 2`.
pub fn to_device_form(b: &BinaryHologram) -> Result<BinaryHologram> {
    if b.form != BinaryForm::Signed {
        return Err(Error::Domain("to_device_form expects a signed hologram".into()));
    }
    Ok(BinaryHologram {
        grid: b.grid.mapv(|v| (v + 1) / 2),
        form: BinaryForm::Device,
        seed: b.seed,
        channel: b.channel,
    })
}

/// `2b - 1`, inverse of [`to_device_form`].
pub fn to_signed_form(b: &BinaryHologram) -> Result<BinaryHologram> {
    if b.form != BinaryForm::Device {
        return Err(Error::Domain("to_signed_form expects a device-form hologram".into()));
    }
    Ok(BinaryHologram {
        grid: b.grid.mapv(|v| 2 * v - 1),
        form: BinaryForm::Signed,
        seed: b.seed,
        channel: b.channel,
    })
}
