//! sRGB transfer curve.
//!
//! Only the piecewise sRGB curve is modelled; there is no white point or ICC
//! handling.

use crate::error::{Error, Result};
use crate::field::{ColorSpace, IntensityImage};

const BREAK_SRGB: f64 = 0.04045;
const BREAK_LINEAR: f64 = BREAK_SRGB / 12.92;

/// sRGB-encoded value to linear intensity.
pub fn srgb_to_linear_value(v: f64) -> f64 {
    if v <= BREAK_SRGB {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Exact inverse of [`srgb_to_linear_value`] on `[0, 1]`.
pub fn linear_to_srgb_value(v: f64) -> f64 {
    if v <= BREAK_LINEAR {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_to_linear(img: &IntensityImage) -> Result<IntensityImage> {
    if img.space() != ColorSpace::Srgb {
        return Err(Error::Domain("srgb_to_linear expects an sRGB-tagged image".into()));
    }
    // Re-check range: the tag alone does not prove it for images built in-crate.
    for ((row, col), &value) in img.data().indexed_iter() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::PixelOutOfRange { row, col, value });
        }
    }
    Ok(IntensityImage::from_parts(
        img.data().mapv(srgb_to_linear_value),
        ColorSpace::Linear,
    ))
}

/// Result of [`linear_to_srgb`]; `clamped` counts pixels above 1 that were
/// clipped before encoding.
#[derive(Debug, Clone)]
pub struct SrgbEncoded {
    pub image: IntensityImage,
    pub clamped: usize,
}

pub fn linear_to_srgb(img: &IntensityImage) -> Result<SrgbEncoded> {
    if img.space() != ColorSpace::Linear {
        return Err(Error::Domain("linear_to_srgb expects a linear-tagged image".into()));
    }
    let mut clamped = 0;
    let data = img.data().mapv(|v| {
        if v > 1.0 {
            clamped += 1;
        }
        if v >= 1.0 {
            1.0
        } else {
            linear_to_srgb_value(v.max(0.0))
        }
    });
    Ok(SrgbEncoded {
        image: IntensityImage::from_parts(data, ColorSpace::Srgb),
        clamped,
    })
}

/// Power-law display encoding `v^(1/gamma)`, values clipped to `[0, 1]`.
pub fn gamma_encode_value(v: f64, gamma: f64) -> f64 {
    v.clamp(0.0, 1.0).powf(1.0 / gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        assert_eq!(srgb_to_linear_value(0.0), 0.0);
        assert_eq!(srgb_to_linear_value(1.0), 1.0);
        assert_eq!(linear_to_srgb_value(0.0), 0.0);
    }

    #[test]
    fn breakpoint_branches_nearly_agree() {
        let lower = BREAK_SRGB / 12.92;
        let upper = ((BREAK_SRGB + 0.055) / 1.055f64).powf(2.4);
        assert!((lower - upper).abs() < 1e-4);
        assert!((srgb_to_linear_value(0.04045) - 0.003131).abs() < 1e-6);
        assert!((linear_to_srgb_value(0.003131) - 0.04045).abs() < 1e-5);
    }

    #[test]
    fn out_of_range_pixel_is_named() {
        let mut a = Array2::zeros((3, 3));
        a[[2, 1]] = 1.2;
        let img = IntensityImage::from_parts(a, ColorSpace::Srgb);
        match srgb_to_linear(&img) {
            Err(Error::PixelOutOfRange { row: 2, col: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn clamp_counter() {
        let img = IntensityImage::linear(Array2::from_shape_vec((1, 3), vec![0.2, 1.5, 3.0]).unwrap()).unwrap();
        let out = linear_to_srgb(&img).unwrap();
        assert_eq!(out.clamped, 2);
        assert_eq!(out.image.data()[[0, 1]], 1.0);
    }

    proptest! {
        #[test]
        fn round_trip(v in 0.0f64..=1.0) {
            let back = linear_to_srgb_value(srgb_to_linear_value(v));
            prop_assert!((back - v).abs() < 1e-9);
        }

        #[test]
        fn monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(srgb_to_linear_value(lo) <= srgb_to_linear_value(hi));
        }
    }
}
