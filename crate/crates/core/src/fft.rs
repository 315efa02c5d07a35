//! Unitary 2D FFTs and explicit DC-centring shifts.
//!
//! Both directions scale by `1 / sqrt(nx * ny)` so `sum |u|^2` is preserved.
//! Spectra come out in standard FFT order (DC at `[0, 0]`); [`fftshift`]
//! moves DC to `[ny / 2, nx / 2]` and [`ifftshift`] undoes it. Nothing in
//! the crate shifts implicitly.

use std::sync::{Arc, LazyLock, Mutex};

use ndarray::{Array2, Axis};
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::field::ComplexField;
use crate::C64;

static PLANNER: LazyLock<Mutex<FftPlanner<f64>>> = LazyLock::new(|| Mutex::new(FftPlanner::new()));

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.lock().expect("fft planner poisoned").plan_fft(len, direction)
}

fn transform(a: &mut Array2<C64>, direction: FftDirection) {
    let (ny, nx) = a.dim();
    if !a.is_standard_layout() {
        *a = a.as_standard_layout().into_owned();
    }
    let data = a.as_slice_mut().expect("standard layout");

    let rows = plan(nx, direction);
    let mut scratch = vec![C64::default(); rows.get_inplace_scratch_len().max(1)];
    rows.process_with_scratch(data, &mut scratch);

    let cols = plan(ny, direction);
    let mut t = vec![C64::default(); ny * nx];
    transpose::transpose(data, &mut t, nx, ny);
    let mut scratch = vec![C64::default(); cols.get_inplace_scratch_len().max(1)];
    cols.process_with_scratch(&mut t, &mut scratch);
    transpose::transpose(&t, data, ny, nx);

    let norm = 1.0 / ((nx * ny) as f64).sqrt();
    data.iter_mut().for_each(|v| *v *= norm);
}

/// Forward unitary 2D DFT in place.
pub fn fft2_inplace(a: &mut Array2<C64>) {
    transform(a, FftDirection::Forward);
}

/// Inverse unitary 2D DFT in place.
pub fn ifft2_inplace(a: &mut Array2<C64>) {
    transform(a, FftDirection::Inverse);
}

pub fn fft2_array(a: &Array2<C64>) -> Array2<C64> {
    let mut out = a.clone();
    fft2_inplace(&mut out);
    out
}

pub fn ifft2_array(a: &Array2<C64>) -> Array2<C64> {
    let mut out = a.clone();
    ifft2_inplace(&mut out);
    out
}

/// Unitary forward transform of a field. Pitch and wavelength are carried
/// through unchanged; [`crate::propagation::fourier_lens`] is the operation
/// that assigns Fourier-plane sampling.
pub fn fft2(field: &ComplexField) -> ComplexField {
    field.with_data(fft2_array(field.data()))
}

pub fn ifft2(field: &ComplexField) -> ComplexField {
    field.with_data(ifft2_array(field.data()))
}

fn roll2<T: Clone>(a: &Array2<T>, shift_rows: usize, shift_cols: usize) -> Array2<T> {
    let (ny, nx) = a.dim();
    Array2::from_shape_fn((ny, nx), |(r, c)| {
        a[[(r + ny - shift_rows % ny) % ny, (c + nx - shift_cols % nx) % nx]].clone()
    })
}

/// Moves the DC sample from `[0, 0]` to `[ny / 2, nx / 2]`.
pub fn fftshift<T: Clone>(a: &Array2<T>) -> Array2<T> {
    let (ny, nx) = a.dim();
    roll2(a, ny / 2, nx / 2)
}

/// Inverse of [`fftshift`] (differs from it for odd sizes).
pub fn ifftshift<T: Clone>(a: &Array2<T>) -> Array2<T> {
    let (ny, nx) = a.dim();
    roll2(a, ny - ny / 2, nx - nx / 2)
}

/// Cyclic shift of rows by `shift` (positive moves content down).
pub fn roll_rows<T: Clone>(a: &Array2<T>, shift: isize) -> Array2<T> {
    let ny = a.len_of(Axis(0)) as isize;
    roll2(a, shift.rem_euclid(ny) as usize, 0)
}

/// Signed FFT-order frequency index of bin `k` on an `n`-point grid.
pub fn freq_index(k: usize, n: usize) -> isize {
    if k < n.div_ceil(2) {
        k as isize
    } else {
        k as isize - n as isize
    }
}
