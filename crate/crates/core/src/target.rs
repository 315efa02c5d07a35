//! Optimisation targets: per-depth intensity stacks.
//!
//! Two constructions are supported. From RGBD input, each depth slice is
//! defocused incoherently to every layer and the contributions are summed
//! behind occlusion masks, giving a focal stack with natural blur. From a
//! list of independent images, each plane is rescaled so every layer
//! carries the mean energy.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::color::srgb_to_linear;
use crate::error::{Error, Result};
use crate::field::{ColorSpace, IntensityImage};
use crate::geometry::{Channel, SystemGeometry};
use crate::propagation::Propagator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    Multiplane,
    Rgbd,
}

#[derive(Debug, Clone)]
pub struct TargetLayer {
    pub intensity: IntensityImage,
    /// Signed offset from the Fourier plane, meters.
    pub z: f64,
    /// Pixels of the scene that sit on this layer.
    pub support: Array2<bool>,
}

#[derive(Debug, Clone)]
pub struct TargetStack {
    layers: Vec<TargetLayer>,
    pub channel: Channel,
    pub mode: TargetMode,
}

/// Relative tolerance of the equal-energy contract for multiplane stacks.
pub const ENERGY_MATCH_TOL: f64 = 1e-9;

impl TargetStack {
    pub fn new(layers: Vec<TargetLayer>, channel: Channel, mode: TargetMode) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Config("a target stack needs at least one layer".into()))?;
        let shape = first.intensity.shape();
        for l in &layers {
            if l.intensity.shape() != shape {
                return Err(Error::shape(shape, l.intensity.shape()));
            }
            if l.support.dim() != shape {
                return Err(Error::shape(shape, l.support.dim()));
            }
            if l.intensity.space() != ColorSpace::Linear {
                return Err(Error::Domain("target layers must be linear intensity".into()));
            }
        }
        let increasing = layers.windows(2).all(|w| w[1].z > w[0].z);
        let decreasing = layers.windows(2).all(|w| w[1].z < w[0].z);
        if !(increasing || decreasing) {
            return Err(Error::Config("layer depths must be strictly monotone".into()));
        }
        if mode == TargetMode::Multiplane {
            let energies: Vec<f64> = layers.iter().map(|l| l.intensity.energy()).collect();
            let mean = energies.iter().sum::<f64>() / energies.len() as f64;
            if energies.iter().any(|e| (e - mean).abs() > ENERGY_MATCH_TOL * mean) {
                return Err(Error::Config(format!("multiplane layer energies differ: {energies:?}")));
            }
        }
        Ok(Self { layers, channel, mode })
    }

    pub fn layers(&self) -> &[TargetLayer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.layers[0].intensity.shape()
    }

    pub fn depths(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.z).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.intensity.energy()).collect()
    }

    /// Same stack with every intensity multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> TargetStack {
        let layers = self
            .layers
            .iter()
            .map(|l| TargetLayer {
                intensity: IntensityImage::from_parts(l.intensity.data() * factor, ColorSpace::Linear),
                z: l.z,
                support: l.support.clone(),
            })
            .collect();
        TargetStack {
            layers,
            channel: self.channel,
            mode: self.mode,
        }
    }
}

/// Independent images to an energy-matched multiplane stack, with layers
/// `spacing` meters apart centred on the Fourier plane.
///
/// Each linearised image is scaled by `(1/N) * (sum_n E_n) / E_n`, so all
/// layers end with the mean energy and the total is unchanged.
pub fn multiplane_to_target(images: &[IntensityImage], spacing: f64, channel: Channel) -> Result<TargetStack> {
    if images.is_empty() {
        return Err(Error::Config("multiplane targets need at least one image".into()));
    }
    if !(spacing.is_finite() && spacing > 0.0) && images.len() > 1 {
        return Err(Error::Config(format!("layer spacing must be positive, got {spacing}")));
    }
    let linear = images
        .iter()
        .map(|img| match img.space() {
            ColorSpace::Srgb => srgb_to_linear(img),
            ColorSpace::Linear => Ok(img.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    let n = linear.len();
    let energies: Vec<f64> = linear.iter().map(IntensityImage::energy).collect();
    if let Some(i) = energies.iter().position(|&e| e <= 0.0) {
        return Err(Error::ZeroEnergy(format!("multiplane image {i} is all zero")));
    }
    let total: f64 = energies.iter().sum();
    let layers = linear
        .into_iter()
        .zip(&energies)
        .enumerate()
        .map(|(i, (img, &e))| {
            let scale = total / (n as f64 * e);
            let shape = img.shape();
            TargetLayer {
                intensity: IntensityImage::from_parts(img.into_data() * scale, ColorSpace::Linear),
                z: (i as f64 - (n as f64 - 1.0) / 2.0) * spacing,
                support: Array2::from_elem(shape, true),
            }
        })
        .collect();
    TargetStack::new(layers, channel, TargetMode::Multiplane)
}

/// Linear map from accommodation distance (diopters) to the signed layer
/// offset from the Fourier plane: `z = offset + meters_per_diopter * D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiopterMapping {
    pub offset: f64,
    pub meters_per_diopter: f64,
}

impl DiopterMapping {
    /// Eyepiece of focal length `f` in a 4f relay: a Fourier-plane shift
    /// `dz` appears at `dz / f^2` diopters. Centred on the middle of `range`.
    pub fn eyepiece(focal_length: f64, range: (f64, f64)) -> Self {
        let slope = focal_length * focal_length;
        DiopterMapping {
            offset: -slope * 0.5 * (range.0 + range.1),
            meters_per_diopter: slope,
        }
    }

    pub fn z(&self, diopters: f64) -> f64 {
        self.offset + self.meters_per_diopter * diopters
    }
}

/// Colour image plus normalised depth (0 = nearest, 1 = farthest).
#[derive(Debug, Clone)]
pub struct RgbdInput {
    /// sRGB intensities indexed by [`Channel::index`].
    pub rgb: [IntensityImage; 3],
    pub depth: Array2<f64>,
    /// `(near, far)` in diopters.
    pub depth_range: (f64, f64),
}

impl RgbdInput {
    pub fn new(rgb: [IntensityImage; 3], depth: Array2<f64>, depth_range: (f64, f64)) -> Result<Self> {
        for img in &rgb {
            if img.shape() != depth.dim() {
                return Err(Error::shape(depth.dim(), img.shape()));
            }
        }
        if let Some(((r, c), v)) = depth.indexed_iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("depth {v} at ({r}, {c}) is outside [0, 1]")));
        }
        if depth_range.0 == depth_range.1 || !depth_range.0.is_finite() || !depth_range.1.is_finite() {
            return Err(Error::Config(format!("degenerate depth range {depth_range:?}")));
        }
        Ok(Self {
            rgb,
            depth,
            depth_range,
        })
    }
}

/// Depth slices ordered nearest first.
#[derive(Debug, Clone)]
pub struct DepthLayers {
    /// Bin centres in diopters.
    pub diopters: Vec<f64>,
    pub z: Vec<f64>,
    /// Layer index of every pixel.
    pub labels: Array2<usize>,
}

impl DepthLayers {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Pixels assigned to layer `k`.
    pub fn support(&self, k: usize) -> Array2<bool> {
        self.labels.mapv(|l| l == k)
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.len()];
        self.labels.iter().for_each(|&l| counts[l] += 1);
        counts
    }
}

/// Splits the diopter range into `n` equal bins and assigns each pixel to
/// the bin whose centre is nearest. Empty bins are allowed.
pub fn quantize_depth(
    depth: &Array2<f64>,
    depth_range: (f64, f64),
    n: usize,
    mapping: &DiopterMapping,
) -> Result<DepthLayers> {
    if n == 0 {
        return Err(Error::Config("need at least one depth layer".into()));
    }
    if mapping.meters_per_diopter == 0.0 {
        return Err(Error::Config("diopter mapping must be strictly monotone".into()));
    }
    let (near, far) = depth_range;
    let width = (far - near) / n as f64;
    let diopters: Vec<f64> = (0..n).map(|k| near + (k as f64 + 0.5) * width).collect();
    let z = diopters.iter().map(|&d| mapping.z(d)).collect();
    let labels = depth.mapv(|d| ((d * n as f64).floor() as usize).min(n - 1));
    Ok(DepthLayers { diopters, z, labels })
}

/// How nearer scene content hides farther layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OcclusionPolicy {
    /// Hide a layer wherever any nearer layer's footprint, dilated by the
    /// half-energy radius of its defocus blur at the observed depth, lands.
    #[default]
    DilatedSupport,
    /// No occlusion.
    Transparent,
}

/// Squared Euclidean distance (meters^2) from every pixel to the nearest
/// `true` pixel, with anisotropic sample pitch `(x, y)`.
pub fn distance_transform_sq(support: &Array2<bool>, pitch: (f64, f64)) -> Array2<f64> {
    let (ny, nx) = support.dim();
    let mut d = support.mapv(|s| if s { 0.0 } else { f64::INFINITY });
    let wy = pitch.1 * pitch.1;
    let wx = pitch.0 * pitch.0;
    let mut buf = vec![0.0; ny.max(nx)];
    for c in 0..nx {
        for r in 0..ny {
            buf[r] = d[[r, c]];
        }
        let out = envelope_1d(&buf[..ny], wy);
        for r in 0..ny {
            d[[r, c]] = out[r];
        }
    }
    for r in 0..ny {
        for c in 0..nx {
            buf[c] = d[[r, c]];
        }
        let out = envelope_1d(&buf[..nx], wx);
        for c in 0..nx {
            d[[r, c]] = out[c];
        }
    }
    d
}

/// Lower envelope of parabolas `w (p - q)^2 + f(q)` over finite `f(q)`.
fn envelope_1d(f: &[f64], w: f64) -> Vec<f64> {
    let sites: Vec<usize> = (0..f.len()).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        return vec![f64::INFINITY; f.len()];
    }
    let cross = |q: usize, v: usize| {
        let (qf, vf) = (q as f64, v as f64);
        ((f[q] + w * qf * qf) - (f[v] + w * vf * vf)) / (2.0 * w * (qf - vf))
    };
    let mut hull: Vec<usize> = Vec::with_capacity(sites.len());
    let mut bounds: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    for &q in &sites {
        loop {
            match hull.last() {
                None => {
                    hull.push(q);
                    bounds.clear();
                    bounds.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&v) => {
                    let s = cross(q, v);
                    if s <= *bounds.last().unwrap() {
                        hull.pop();
                        bounds.pop();
                        if hull.is_empty() {
                            continue;
                        }
                    } else {
                        hull.push(q);
                        bounds.push(s);
                        break;
                    }
                }
            }
        }
    }
    let mut out = vec![0.0; f.len()];
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        while k + 1 < hull.len() && bounds[k + 1] < p as f64 {
            k += 1;
        }
        let q = hull[k];
        let dq = p as f64 - q as f64;
        *o = w * dq * dq + f[q];
    }
    out
}

/// Visibility mask `M_{k,n}` (true = visible) for layer `k` seen at layer
/// `n`. `distances_sq[j]` is the squared distance transform of layer `j`'s
/// footprint and `radius(j)` the blur radius of layer `j` observed at `n`.
/// Layers are ordered nearest first, so the occluders of `k` are `j < k`.
pub fn occlusion_mask(distances_sq: &[Array2<f64>], k: usize, radius: impl Fn(usize) -> f64) -> Array2<bool> {
    let shape = distances_sq.first().map(|d| d.dim()).unwrap_or((0, 0));
    let mut visible = Array2::from_elem(shape, true);
    for (j, dist) in distances_sq.iter().enumerate().take(k) {
        let r = radius(j);
        let r2 = r * r;
        Zip::from(&mut visible).and(dist).for_each(|v, &d| {
            if d <= r2 {
                *v = false;
            }
        });
    }
    visible
}

/// Options for [`rgbd_to_target`].
#[derive(Debug, Clone, Copy)]
pub struct RgbdOptions {
    pub layers: usize,
    pub mapping: DiopterMapping,
    pub occlusion: OcclusionPolicy,
}

/// Occlusion-aware incoherent focal stack of an RGBD scene for one channel:
/// `I_n = sum_k T_{|z_n - z_k|}[I restricted to x_k] * M_{k,n}`.
pub fn rgbd_to_target(
    rgbd: &RgbdInput,
    channel: Channel,
    geom: &SystemGeometry,
    opts: &RgbdOptions,
    propagator: &Propagator,
) -> Result<TargetStack> {
    let linear = srgb_to_linear(&rgbd.rgb[channel.index()])?;
    let layers = quantize_depth(&rgbd.depth, rgbd.depth_range, opts.layers, &opts.mapping)?;
    let wavelength = geom.wavelength(channel);
    let pitch = geom.fourier_pitch(channel);
    let shape = linear.shape();

    let supports: Vec<Array2<bool>> = (0..layers.len()).map(|k| layers.support(k)).collect();
    let occupied: Vec<bool> = supports.iter().map(|s| s.iter().any(|&v| v)).collect();
    let distances: Vec<Array2<f64>> = supports.iter().map(|s| distance_transform_sq(s, pitch)).collect();
    let slices: Vec<IntensityImage> = supports
        .iter()
        .map(|s| {
            let mut d = linear.data().clone();
            Zip::from(&mut d).and(s).for_each(|v, &inside| {
                if !inside {
                    *v = 0.0;
                }
            });
            IntensityImage::from_parts(d, ColorSpace::Linear)
        })
        .collect();

    let mut out = Vec::with_capacity(layers.len());
    for (&zn, support) in layers.z.iter().zip(&supports) {
        let radii = layers
            .z
            .iter()
            .map(|&zj| propagator.half_energy_radius(shape, pitch, (zn - zj).abs(), wavelength))
            .collect::<Result<Vec<f64>>>()?;
        let mut acc = Array2::<f64>::zeros(shape);
        for k in 0..layers.len() {
            if !occupied[k] {
                continue;
            }
            let dz = (zn - layers.z[k]).abs();
            let blurred = propagator.propagate_incoherent(&slices[k], dz, wavelength, pitch)?;
            let mut contribution = blurred.image.into_data();
            if opts.occlusion == OcclusionPolicy::DilatedSupport {
                let mask = occlusion_mask(&distances, k, |j| radii[j]);
                Zip::from(&mut contribution).and(&mask).for_each(|v, &m| {
                    if !m {
                        *v = 0.0;
                    }
                });
            }
            acc += &contribution;
        }
        out.push(TargetLayer {
            intensity: IntensityImage::from_parts(acc, ColorSpace::Linear),
            z: zn,
            support: support.clone(),
        });
    }
    TargetStack::new(out, channel, TargetMode::Rgbd)
}

/// Bilinear resampling to `shape` (pixel-centre aligned).
pub fn resize_bilinear(img: &Array2<f64>, shape: (usize, usize)) -> Array2<f64> {
    let (ny, nx) = img.dim();
    let (my, mx) = shape;
    let sample = |src: usize, dst: usize, i: usize| -> (usize, usize, f64) {
        let pos = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src - 1);
        (lo, hi, pos - lo as f64)
    };
    Array2::from_shape_fn(shape, |(r, c)| {
        let (r0, r1, fy) = sample(ny, my, r);
        let (c0, c1, fx) = sample(nx, mx, c);
        let top = img[[r0, c0]] * (1.0 - fx) + img[[r0, c1]] * fx;
        let bottom = img[[r1, c0]] * (1.0 - fx) + img[[r1, c1]] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Shrinks a target by `reference / wavelength` and zero-pads it back to
/// its original size, so a channel with a larger Fourier plane than the
/// reference channel shows the image at the same physical size.
pub fn match_fourier_domain(img: &Array2<f64>, wavelength: f64, reference: f64) -> Result<Array2<f64>> {
    if wavelength < reference {
        return Err(Error::Config(format!(
            "reference wavelength {reference} must be the shortest, got channel wavelength {wavelength}"
        )));
    }
    let (ny, nx) = img.dim();
    let ratio = reference / wavelength;
    let my = ((ny as f64 * ratio).round() as usize).clamp(1, ny);
    let mx = ((nx as f64 * ratio).round() as usize).clamp(1, nx);
    let small = resize_bilinear(img, (my, mx));
    let mut out = Array2::zeros((ny, nx));
    let (r0, c0) = ((ny - my) / 2, (nx - mx) / 2);
    out.slice_mut(ndarray::s![r0..r0 + my, c0..c0 + mx]).assign(&small);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PROTOTYPE_WAVELENGTHS;
    use crate::propagation::Padding;

    fn srgb(data: Array2<f64>) -> IntensityImage {
        IntensityImage::srgb(data).unwrap()
    }

    #[test]
    fn equal_energy_scaling() {
        let a = IntensityImage::linear(Array2::from_elem((4, 4), 0.1)).unwrap();
        let b = IntensityImage::linear(Array2::from_elem((4, 4), 0.3)).unwrap();
        let stack = multiplane_to_target(&[a.clone(), b], 0.015, Channel::Green).unwrap();
        let e = a.energy();
        for layer in stack.layers() {
            assert!((layer.intensity.energy() - 2.0 * e).abs() < 1e-12);
        }
    }

    #[test]
    fn single_plane_is_unchanged() {
        let img = srgb(Array2::from_shape_fn((3, 5), |(r, c)| (r * 5 + c) as f64 / 20.0));
        let stack = multiplane_to_target(std::slice::from_ref(&img), 0.015, Channel::Red).unwrap();
        let linear = srgb_to_linear(&img).unwrap();
        assert_eq!(stack.layers()[0].intensity.data(), linear.data());
        assert_eq!(stack.depths(), vec![0.0]);
    }

    #[test]
    fn five_planes_centered_on_fourier_plane() {
        let imgs: Vec<_> = (1..=5)
            .map(|i| srgb(Array2::from_elem((2, 2), i as f64 / 10.0)))
            .collect();
        let stack = multiplane_to_target(&imgs, 0.015, Channel::Blue).unwrap();
        let z = stack.depths();
        for (got, want) in z.iter().zip([-0.030, -0.015, 0.0, 0.015, 0.030]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn all_zero_plane_is_rejected() {
        let imgs = [srgb(Array2::from_elem((2, 2), 0.5)), srgb(Array2::zeros((2, 2)))];
        assert!(matches!(
            multiplane_to_target(&imgs, 0.01, Channel::Red),
            Err(Error::ZeroEnergy(_))
        ));
    }

    #[test]
    fn non_monotone_depths_are_rejected() {
        let layer = |z| TargetLayer {
            intensity: IntensityImage::linear(Array2::from_elem((2, 2), 1.0)).unwrap(),
            z,
            support: Array2::from_elem((2, 2), true),
        };
        assert!(TargetStack::new(
            vec![layer(0.0), layer(0.01), layer(0.005)],
            Channel::Red,
            TargetMode::Rgbd
        )
        .is_err());
        assert!(TargetStack::new(vec![], Channel::Red, TargetMode::Rgbd).is_err());
    }

    #[test]
    fn constant_depth_occupies_one_layer() {
        let depth = Array2::from_elem((8, 8), 0.3);
        let map = DiopterMapping::eyepiece(0.05, (4.0, 0.0));
        for n in [1, 4, 32] {
            let layers = quantize_depth(&depth, (4.0, 0.0), n, &map).unwrap();
            let counts = layers.counts();
            assert_eq!(counts.iter().filter(|&&c| c > 0).count(), 1);
            assert_eq!(counts.iter().sum::<usize>(), 64);
        }
    }

    #[test]
    fn ramp_fills_bins_evenly() {
        let (rows, cols) = (128, 16);
        let depth = Array2::from_shape_fn((rows, cols), |(r, _)| r as f64 / (rows - 1) as f64);
        let map = DiopterMapping::eyepiece(0.05, (4.0, 0.0));
        let layers = quantize_depth(&depth, (4.0, 0.0), 32, &map).unwrap();
        // Direct binning: bin k covers diopters (4 - k/8, 4 - (k+1)/8]; the
        // nearest centre is the bin that contains the value.
        let mut oracle = vec![0usize; 32];
        for &d in depth.iter() {
            let diopter = 4.0 - 4.0 * d;
            let k = (0..32)
                .min_by(|&a, &b| {
                    let ca = 4.0 - (a as f64 + 0.5) / 8.0;
                    let cb = 4.0 - (b as f64 + 0.5) / 8.0;
                    (diopter - ca).abs().total_cmp(&(diopter - cb).abs())
                })
                .unwrap();
            oracle[k] += 1;
        }
        let counts = layers.counts();
        for (got, want) in counts.iter().zip(&oracle) {
            assert!(got.abs_diff(*want) <= cols);
            assert!(got.abs_diff(rows * cols / 32) <= cols);
        }
        // Nearest first, z strictly monotone.
        assert!(layers.diopters[0] > layers.diopters[31]);
        assert!(layers.z.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let mut support = Array2::from_elem((12, 9), false);
        support[[2, 3]] = true;
        support[[9, 7]] = true;
        support[[5, 0]] = true;
        let pitch = (2.0, 3.0);
        let dt = distance_transform_sq(&support, pitch);
        for ((r, c), &d) in dt.indexed_iter() {
            let brute = support
                .indexed_iter()
                .filter(|(_, &s)| s)
                .map(|((sr, sc), _)| {
                    let dy = (r as f64 - sr as f64) * pitch.1;
                    let dx = (c as f64 - sc as f64) * pitch.0;
                    dx * dx + dy * dy
                })
                .fold(f64::INFINITY, f64::min);
            assert!((d - brute).abs() < 1e-9, "({r},{c}) {d} vs {brute}");
        }
        let empty = distance_transform_sq(&Array2::from_elem((3, 3), false), pitch);
        assert!(empty.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn nearest_layer_is_never_occluded() {
        let dist = vec![Array2::zeros((4, 4)), Array2::zeros((4, 4))];
        assert!(occlusion_mask(&dist, 0, |_| 1.0).iter().all(|&v| v));
        assert!(occlusion_mask(&dist, 1, |_| 0.0).iter().all(|&v| !v));
    }

    fn two_layer_scene() -> (RgbdInput, SystemGeometry) {
        let n = 32;
        let depth = Array2::from_shape_fn((n, n), |(r, c)| {
            if (10..18).contains(&r) && (10..18).contains(&c) {
                0.0
            } else {
                1.0
            }
        });
        // A black occluder, so whatever the back layer shows inside the
        // square can only come from the background slice.
        let gray = srgb(depth.mapv(|d| if d == 0.0 { 0.0 } else { 0.6 }));
        let rgbd = RgbdInput::new([gray.clone(), gray.clone(), gray], depth, (4.0, 0.0)).unwrap();
        let geom = SystemGeometry::new(n, 4 * n, 8.2e-6, 8.2e-6, 0.05, PROTOTYPE_WAVELENGTHS).unwrap();
        (rgbd, geom)
    }

    #[test]
    fn occluder_hides_background_blur() {
        let (rgbd, geom) = two_layer_scene();
        let opts = RgbdOptions {
            layers: 2,
            mapping: DiopterMapping::eyepiece(0.05, (4.0, 0.0)),
            occlusion: OcclusionPolicy::DilatedSupport,
        };
        let prop = Propagator::new(Padding::Double);
        let stack = rgbd_to_target(&rgbd, Channel::Green, &geom, &opts, &prop).unwrap();
        // Ray-visibility oracle: focused on the occluder, every pixel of its
        // footprint sees the (black) occluder and none of the blurred
        // background behind it.
        let front = stack.layers()[0].intensity.data();
        let footprint = &stack.layers()[0].support;
        for ((r, c), &covered) in footprint.indexed_iter() {
            if covered {
                assert_eq!(front[[r, c]], 0.0, "({r},{c}) background leaks through occluder");
            }
        }
        assert!(front[[0, 0]] > 0.1 && front[[31, 31]] > 0.1);
        let open = RgbdOptions {
            occlusion: OcclusionPolicy::Transparent,
            ..opts
        };
        let seen = rgbd_to_target(&rgbd, Channel::Green, &geom, &open, &prop).unwrap();
        assert!(seen.layers()[0].intensity.data()[[10, 10]] > 0.05);
    }

    #[test]
    fn transparent_single_layer_reduces_to_incoherent_propagation() {
        let n = 16;
        let depth = Array2::from_elem((n, n), 0.0);
        let img = srgb(Array2::from_shape_fn((n, n), |(r, c)| ((r + 2 * c) % 7) as f64 / 7.0));
        let rgbd = RgbdInput::new([img.clone(), img.clone(), img.clone()], depth, (4.0, 0.0)).unwrap();
        let geom = SystemGeometry::new(n, 4 * n, 8.2e-6, 8.2e-6, 0.05, PROTOTYPE_WAVELENGTHS).unwrap();
        let opts = RgbdOptions {
            layers: 3,
            mapping: DiopterMapping::eyepiece(0.05, (4.0, 0.0)),
            occlusion: OcclusionPolicy::Transparent,
        };
        let prop = Propagator::new(Padding::Double);
        let stack = rgbd_to_target(&rgbd, Channel::Red, &geom, &opts, &prop).unwrap();
        let linear = srgb_to_linear(&img).unwrap();
        assert_eq!(stack.layers()[0].intensity.data(), linear.data());
        let pitch = geom.fourier_pitch(Channel::Red);
        for n in 1..3 {
            let dz = (stack.layers()[n].z - stack.layers()[0].z).abs();
            let direct = prop
                .propagate_incoherent(&linear, dz, geom.wavelength(Channel::Red), pitch)
                .unwrap();
            assert_eq!(stack.layers()[n].intensity.data(), direct.image.data());
        }
    }

    #[test]
    fn fourier_domain_matching_shrinks_longer_wavelengths() {
        let img = Array2::from_elem((100, 60), 1.0);
        let red = match_fourier_domain(&img, 638e-9, 450e-9).unwrap();
        let rows = red.rows().into_iter().filter(|r| r.iter().any(|&v| v > 0.0)).count();
        assert_eq!(rows, (100.0f64 * 450.0 / 638.0).round() as usize);
        assert_eq!(match_fourier_domain(&img, 450e-9, 450e-9).unwrap(), img);
        assert!(match_fourier_domain(&img, 400e-9, 450e-9).is_err());
    }
}
