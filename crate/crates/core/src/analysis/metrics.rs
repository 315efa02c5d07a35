//! Image-quality metrics on linear intensity arrays with peak 1.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};

fn same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(a.dim(), b.dim()));
    }
    Ok(())
}

/// `10 log10(1 / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    same_shape(a, b)?;
    if a.is_empty() {
        return Err(Error::Domain("psnr of empty images".into()));
    }
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|&x, &y| acc += (x - y) * (x - y));
    let mse = acc / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

const SSIM_TAPS: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn gaussian_taps() -> [f64; SSIM_TAPS] {
    let mut w = [0.0; SSIM_TAPS];
    let mid = (SSIM_TAPS / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.map(|v| v / sum)
}

/// Separable Gaussian filter keeping only fully covered positions.
fn filter_valid(img: ArrayView2<f64>, w: &[f64; SSIM_TAPS]) -> Array2<f64> {
    let (ny, nx) = img.dim();
    let (my, mx) = (ny + 1 - SSIM_TAPS, nx + 1 - SSIM_TAPS);
    let mut rows = Array2::<f64>::zeros((ny, mx));
    for r in 0..ny {
        for c in 0..mx {
            rows[[r, c]] = (0..SSIM_TAPS).map(|k| w[k] * img[[r, c + k]]).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((my, mx));
    for r in 0..my {
        for c in 0..mx {
            out[[r, c]] = (0..SSIM_TAPS).map(|k| w[k] * rows[[r + k, c]]).sum();
        }
    }
    out
}

/// Mean SSIM with an 11-tap Gaussian window (sigma 1.5) and dynamic
/// range 1, over every position where the window fits.
pub fn ssim(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    same_shape(a, b)?;
    let (ny, nx) = a.dim();
    if ny < SSIM_TAPS || nx < SSIM_TAPS {
        return Err(Error::Domain(format!(
            "ssim needs at least {SSIM_TAPS}x{SSIM_TAPS} pixels, got {ny}x{nx}"
        )));
    }
    let w = gaussian_taps();
    let mu_a = filter_valid(a.view(), &w);
    let mu_b = filter_valid(b.view(), &w);
    let aa = filter_valid((a * a).view(), &w);
    let bb = filter_valid((b * b).view(), &w);
    let ab = filter_valid((a * b).view(), &w);
    let mut acc = 0.0;
    for (((&ma, &mb), (&saa, &sbb)), &sab) in mu_a.iter().zip(&mu_b).zip(aa.iter().zip(&bb)).zip(&ab) {
        let va = saa - ma * ma;
        let vb = sbb - mb * mb;
        let cov = sab - ma * mb;
        acc +=
            ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    Ok(acc / mu_a.len() as f64)
}

/// Sample standard deviation over mean on the masked pixels.
pub fn speckle_contrast(img: &Array2<f64>, mask: Option<&Array2<bool>>) -> Result<f64> {
    let values: Vec<f64> = match mask {
        Some(m) => {
            same_shape_mask(img, m)?;
            img.iter().zip(m).filter(|(_, &keep)| keep).map(|(&v, _)| v).collect()
        }
        None => img.iter().copied().collect(),
    };
    if values.len() < 2 {
        return Err(Error::Domain(
            "speckle contrast needs at least two masked pixels".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::Domain("speckle contrast of a zero-mean region".into()));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt() / mean)
}

fn same_shape_mask(img: &Array2<f64>, mask: &Array2<bool>) -> Result<()> {
    if img.dim() != mask.dim() {
        return Err(Error::shape(img.dim(), mask.dim()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationAxis {
    /// Intensity varies along each row (vertical fringes).
    Columns,
    /// Intensity varies down each column (horizontal fringes).
    Rows,
}

/// `(I_max - I_min) / (I_max + I_min)` of a sinusoidal pattern of known
/// `period` (pixels), from a least-squares fit of
/// `m + p cos(2 pi x / period) + q sin(2 pi x / period)` along `axis`.
pub fn michelson_contrast(img: &Array2<f64>, period: f64, axis: ModulationAxis) -> Result<f64> {
    if period.is_nan() || period <= 2.0 {
        return Err(Error::Domain(format!(
            "michelson period must exceed 2 samples, got {period}"
        )));
    }
    if img.is_empty() {
        return Err(Error::Domain("michelson contrast of an empty image".into()));
    }
    // Normal equations of the three-term fit.
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for ((r, c), &v) in img.indexed_iter() {
        let x = match axis {
            ModulationAxis::Columns => c,
            ModulationAxis::Rows => r,
        } as f64;
        let t = 2.0 * std::f64::consts::PI * x / period;
        let basis = [1.0, t.cos(), t.sin()];
        for i in 0..3 {
            atb[i] += basis[i] * v;
            for j in 0..3 {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    let [m, p, q] = solve3(ata, atb)
        .ok_or_else(|| Error::Domain("michelson fit is singular; the image is too short for one period".into()))?;
    if m <= 0.0 {
        return Err(Error::Domain("michelson contrast of a zero-mean pattern".into()));
    }
    let amplitude = (p * p + q * q).sqrt();
    let (hi, lo) = (m + amplitude, (m - amplitude).max(0.0));
    Ok((hi - lo) / (hi + lo))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (v, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}
