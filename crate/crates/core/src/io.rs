//! File formats.
//!
//! * PNG, 8 or 16 bit, for intensity images and depth maps.
//! * Raw planes: one JSON header line, then little-endian `f64` samples in
//!   row-major order. Complex fields store the real plane then the
//!   imaginary plane.
//! * PBM (P4) and packed bits for device-form binary holograms. A set bit
//!   is an "on" SLM pixel.
//! * Target stacks as a directory of raw layers plus `manifest.json`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoding::{BinaryForm, BinaryHologram};
use crate::error::{Error, Result};
use crate::field::{ColorSpace, ComplexField, IntensityImage};
use crate::geometry::Channel;
use crate::target::{TargetLayer, TargetMode, TargetStack};
use crate::C64;

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BitDepth {
    Eight,
    #[default]
    Sixteen,
}

/// Grayscale PNG (colour images are reduced to luma) scaled to `[0, 1]`
/// and tagged with `space`.
pub fn read_png(path: &Path, space: ColorSpace) -> Result<IntensityImage> {
    let img = image::open(path)?;
    IntensityImage::new(luma(&img), space)
}

fn luma(img: &DynamicImage) -> Array2<f64> {
    let gray = img.to_luma16();
    let (w, h) = gray.dimensions();
    Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
        gray.get_pixel(c as u32, r as u32)[0] as f64 / 65535.0
    })
}

/// The three colour channels of a PNG as sRGB images, indexed by
/// [`Channel::index`].
pub fn read_rgb_png(path: &Path) -> Result<[IntensityImage; 3]> {
    let rgb = image::open(path)?.to_rgb16();
    let (w, h) = rgb.dimensions();
    let plane = |k: usize| {
        IntensityImage::srgb(Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
            rgb.get_pixel(c as u32, r as u32)[k] as f64 / 65535.0
        }))
    };
    Ok([plane(0)?, plane(1)?, plane(2)?])
}

/// Depth map PNG scaled to `[0, 1]`.
pub fn read_depth_png(path: &Path) -> Result<Array2<f64>> {
    Ok(luma(&image::open(path)?))
}

/// Grayscale PNG of values clipped to `[0, 1]`.
pub fn write_png(path: &Path, data: &Array2<f64>, depth: BitDepth) -> Result<()> {
    let (h, w) = data.dim();
    let q = |v: f64, max: f64| (v.clamp(0.0, 1.0) * max).round();
    match depth {
        BitDepth::Eight => {
            let buf = ImageBuffer::<Luma<u8>, Vec<u8>>::from_fn(w as u32, h as u32, |c, r| {
                Luma([q(data[[r as usize, c as usize]], 255.0) as u8])
            });
            buf.save(path)?;
        }
        BitDepth::Sixteen => {
            let buf = ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(w as u32, h as u32, |c, r| {
                Luma([q(data[[r as usize, c as usize]], 65535.0) as u16])
            });
            buf.save(path)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawHeader {
    rows: usize,
    cols: usize,
    planes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pitch: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wavelength: Option<f64>,
}

fn write_raw(path: &Path, header: &RawHeader, planes: &[&[f64]]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for plane in planes {
        for v in plane.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_raw(path: &Path) -> Result<(RawHeader, Vec<Vec<f64>>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: RawHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| format_error(path, format!("bad header: {e}")))?;
    let count = header.rows * header.cols;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * count * header.planes {
        return Err(format_error(
            path,
            format!(
                "expected {} bytes of samples, found {}",
                8 * count * header.planes,
                bytes.len()
            ),
        ));
    }
    let planes = bytes
        .chunks_exact(8 * count)
        .map(|plane| {
            plane
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
                .collect()
        })
        .collect();
    Ok((header, planes))
}

fn contiguous(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

pub fn write_complex_field(path: &Path, field: &ComplexField) -> Result<()> {
    let (rows, cols) = field.shape();
    let re: Vec<f64> = field.data().iter().map(|v| v.re).collect();
    let im: Vec<f64> = field.data().iter().map(|v| v.im).collect();
    let header = RawHeader {
        rows,
        cols,
        planes: 2,
        pitch: Some(field.pitch()),
        wavelength: Some(field.wavelength()),
    };
    write_raw(path, &header, &[&re, &im])
}

pub fn read_complex_field(path: &Path) -> Result<ComplexField> {
    let (header, planes) = read_raw(path)?;
    let (Some(pitch), Some(wavelength)) = (header.pitch, header.wavelength) else {
        return Err(format_error(path, "complex field header needs pitch and wavelength"));
    };
    if planes.len() != 2 {
        return Err(format_error(path, format!("expected 2 planes, found {}", planes.len())));
    }
    let data: Vec<C64> = planes[0]
        .iter()
        .zip(&planes[1])
        .map(|(&re, &im)| C64::new(re, im))
        .collect();
    let data = Array2::from_shape_vec((header.rows, header.cols), data).expect("length checked");
    ComplexField::new(data, pitch, wavelength)
}

/// Single real plane.
pub fn write_real_layer(path: &Path, data: &Array2<f64>) -> Result<()> {
    let (rows, cols) = data.dim();
    let header = RawHeader {
        rows,
        cols,
        planes: 1,
        pitch: None,
        wavelength: None,
    };
    write_raw(path, &header, &[&contiguous(data)])
}

pub fn read_real_layer(path: &Path) -> Result<Array2<f64>> {
    let (header, mut planes) = read_raw(path)?;
    if planes.len() != 1 {
        return Err(format_error(path, format!("expected 1 plane, found {}", planes.len())));
    }
    Ok(Array2::from_shape_vec((header.rows, header.cols), planes.remove(0)).expect("length checked"))
}

/// Rows of device states packed MSB first, each row padded to a byte.
fn pack_rows(bits: &Array2<bool>) -> Vec<u8> {
    let (rows, cols) = bits.dim();
    let stride = cols.div_ceil(8);
    let mut out = vec![0u8; rows * stride];
    for ((r, c), &on) in bits.indexed_iter() {
        if on {
            out[r * stride + c / 8] |= 0x80 >> (c % 8);
        }
    }
    out
}

fn unpack_rows(bytes: &[u8], rows: usize, cols: usize) -> Array2<bool> {
    let stride = cols.div_ceil(8);
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        bytes[r * stride + c / 8] & (0x80 >> (c % 8)) != 0
    })
}

/// `+1` and `1` are both the "on" state.
fn device_bits(b: &BinaryHologram) -> Array2<bool> {
    b.grid().mapv(|v| v == 1)
}

/// Binary PBM (P4). Signed holograms are written in device form.
pub fn write_pbm(path: &Path, b: &BinaryHologram) -> Result<()> {
    write_pbm_bits(path, &device_bits(b))
}

pub fn write_pbm_bits(path: &Path, bits: &Array2<bool>) -> Result<()> {
    let (rows, cols) = bits.dim();
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P4\n{cols} {rows}\n")?;
    out.write_all(&pack_rows(bits))?;
    out.flush()?;
    Ok(())
}

/// Reads a P4 PBM as a device-form hologram.
pub fn read_pbm(path: &Path, seed: u64, channel: Channel) -> Result<BinaryHologram> {
    let bits = read_pbm_bits(path)?;
    BinaryHologram::new(bits.mapv(i8::from), BinaryForm::Device, seed, channel)
}

pub fn read_pbm_bits(path: &Path) -> Result<Array2<bool>> {
    let bytes = fs::read(path)?;
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 3 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_error(path, "truncated PBM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if tokens[0] != "P4" {
        return Err(format_error(path, format!("expected P4 magic, found {}", tokens[0])));
    }
    let parse = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| format_error(path, format!("bad dimension {t}")))
    };
    let (cols, rows) = (parse(&tokens[1])?, parse(&tokens[2])?);
    let need = rows * cols.div_ceil(8);
    if bytes.len() < pos + need {
        return Err(format_error(path, "truncated PBM raster"));
    }
    Ok(unpack_rows(&bytes[pos..pos + need], rows, cols))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PackedHeader {
    rows: usize,
    cols: usize,
    seed: u64,
    channel: Channel,
    bit_order: String,
}

/// JSON header line, then rows of MSB-first packed device states.
pub fn write_packed_bits(path: &Path, b: &BinaryHologram) -> Result<()> {
    let (rows, cols) = b.shape();
    let header = PackedHeader {
        rows,
        cols,
        seed: b.seed,
        channel: b.channel,
        bit_order: "msb-first, rows padded to bytes".into(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    out.write_all(&pack_rows(&device_bits(b)))?;
    out.flush()?;
    Ok(())
}

pub fn read_packed_bits(path: &Path) -> Result<BinaryHologram> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: PackedHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| format_error(path, format!("bad header: {e}")))?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != header.rows * header.cols.div_ceil(8) {
        return Err(format_error(path, "packed raster has the wrong length"));
    }
    let bits = unpack_rows(&bytes, header.rows, header.cols);
    BinaryHologram::new(bits.mapv(i8::from), BinaryForm::Device, header.seed, header.channel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackManifest {
    pub layers: usize,
    pub rows: usize,
    pub cols: usize,
    pub z: Vec<f64>,
    pub channel: Channel,
    pub mode: TargetMode,
    pub energies: Vec<f64>,
    pub files: Vec<String>,
    pub supports: Vec<String>,
}

/// Writes `layer_NNN.f64`, `support_NNN.pbm` and `manifest.json` into `dir`.
pub fn save_target_stack(dir: &Path, stack: &TargetStack) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let (rows, cols) = stack.shape();
    let mut files = Vec::new();
    let mut supports = Vec::new();
    for (n, layer) in stack.layers().iter().enumerate() {
        let name = format!("layer_{n:03}.f64");
        write_real_layer(&dir.join(&name), layer.intensity.data())?;
        files.push(name);
        let name = format!("support_{n:03}.pbm");
        write_pbm_bits(&dir.join(&name), &layer.support)?;
        supports.push(name);
    }
    let manifest = StackManifest {
        layers: stack.len(),
        rows,
        cols,
        z: stack.depths(),
        channel: stack.channel,
        mode: stack.mode,
        energies: stack.energies(),
        files,
        supports,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub fn load_target_stack(dir: &Path) -> Result<TargetStack> {
    let path = dir.join("manifest.json");
    let manifest: StackManifest =
        serde_json::from_str(&fs::read_to_string(&path)?).map_err(|e| format_error(&path, e.to_string()))?;
    if manifest.files.len() != manifest.layers
        || manifest.z.len() != manifest.layers
        || manifest.supports.len() != manifest.layers
    {
        return Err(format_error(&path, "layer count disagrees with file lists"));
    }
    let layers = manifest
        .files
        .iter()
        .zip(&manifest.supports)
        .zip(&manifest.z)
        .map(|((file, support), &z)| {
            Ok(TargetLayer {
                intensity: IntensityImage::linear(read_real_layer(&dir.join(file))?)?,
                z,
                support: read_pbm_bits(&dir.join(support))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TargetStack::new(layers, manifest.channel, manifest.mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let data = Array2::from_shape_fn((5, 7), |(r, c)| (r * 7 + c) as f64 / 34.0);
        write_png(&path, &data, BitDepth::Sixteen).unwrap();
        let back = read_png(&path, ColorSpace::Linear).unwrap();
        for (a, b) in back.data().iter().zip(&data) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
        write_png(&path, &data, BitDepth::Eight).unwrap();
        let back = read_png(&path, ColorSpace::Srgb).unwrap();
        for (a, b) in back.data().iter().zip(&data) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-9);
        }
    }

    #[test]
    fn complex_field_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.cf64");
        let data = Array2::from_shape_fn((3, 4), |(r, c)| C64::new(r as f64 * 0.1, -(c as f64) / 3.0));
        let field = ComplexField::new(data, (8e-6, 9e-6), 520e-9).unwrap();
        write_complex_field(&path, &field).unwrap();
        let back = read_complex_field(&path).unwrap();
        assert_eq!(back.data(), field.data());
        assert_eq!(back.pitch(), field.pitch());
        assert_eq!(back.wavelength(), field.wavelength());
    }

    #[test]
    fn truncated_raw_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.f64");
        write_real_layer(&path, &Array2::from_elem((2, 2), 1.0)).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_real_layer(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn pbm_and_packed_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Array2::from_shape_fn((5, 11), |(r, c)| ((r * 3 + c) % 2) as i8);
        let b = BinaryHologram::new(grid.clone(), BinaryForm::Device, 42, Channel::Blue).unwrap();
        let pbm = dir.path().join("h.pbm");
        write_pbm(&pbm, &b).unwrap();
        let back = read_pbm(&pbm, 42, Channel::Blue).unwrap();
        assert_eq!(back, b);
        let raw = dir.path().join("h.bits");
        write_packed_bits(&raw, &b).unwrap();
        assert_eq!(read_packed_bits(&raw).unwrap(), b);
        let signed = crate::encoding::to_signed_form(&b).unwrap();
        write_pbm(&pbm, &signed).unwrap();
        assert_eq!(read_pbm(&pbm, 42, Channel::Blue).unwrap(), b);
    }

    #[test]
    fn target_stack_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let imgs: Vec<_> = (1..=3)
            .map(|i| IntensityImage::linear(Array2::from_elem((4, 6), 0.1 * i as f64)).unwrap())
            .collect();
        let stack = crate::target::multiplane_to_target(&imgs, 0.015, Channel::Red).unwrap();
        save_target_stack(dir.path(), &stack).unwrap();
        let back = load_target_stack(dir.path()).unwrap();
        assert_eq!(back.depths(), stack.depths());
        assert_eq!(back.channel, stack.channel);
        for (a, b) in back.layers().iter().zip(stack.layers()) {
            assert_eq!(a.intensity.data(), b.intensity.data());
            assert_eq!(a.support, b.support);
        }
    }
}
