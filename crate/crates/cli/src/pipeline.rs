//! Steps shared by the commands: job loading, target construction,
//! geometry fitting and windowed reconstruction.

use std::path::Path;

use ndarray::Array2;
use tmholo::encoding::BinaryHologram;
use tmholo::geometry::{Channel, SystemGeometry, Window};
use tmholo::io;
use tmholo::multiplex::{accumulate_prefix, frame_intensities, TmSet};
use tmholo::propagation::default_propagator;
use tmholo::scenes;
use tmholo::target::{
    match_fourier_domain, multiplane_to_target, rgbd_to_target, DiopterMapping, RgbdInput, RgbdOptions, TargetLayer,
    TargetStack,
};
use tmholo::{ColorSpace, IntensityImage};

use crate::config::{JobConfig, Mode, SceneKind, SyntheticScene};
use crate::manifest::RunManifest;
use crate::{CliError, CliResult, Overrides};

impl Overrides {
    /// Writes every flag that was given into `cfg`.
    pub fn apply(&self, cfg: &mut JobConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = Some(jobs);
        }
        if let Some(channels) = &self.channel {
            cfg.channels = channels.clone();
        }
        if let Some(frames) = self.frames {
            cfg.frames = frames;
        }
        if let Some(method) = self.method {
            cfg.optimizer.method = method;
        }
        if let Some(iterations) = self.iterations {
            cfg.optimizer.iterations = iterations;
        }
        if let Some(lr) = self.learning_rate {
            cfg.optimizer.learning_rate = lr;
        }
        if let Some(output) = &self.output {
            cfg.output_dir = output.clone();
        }
    }
}

/// Loads `path`, applies flag overrides and validates the result.
pub fn load_job(path: &Path, overrides: &Overrides) -> CliResult<JobConfig> {
    let mut cfg = JobConfig::load(path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// Decoded scene inputs, before any per-channel processing.
pub enum Inputs {
    /// sRGB planes, nearest first, indexed `[plane][channel]`.
    Multiplane {
        planes: Vec<[IntensityImage; 3]>,
        spacing: f64,
    },
    Rgbd(Box<RgbdInput>),
}

impl Inputs {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Inputs::Multiplane { planes, .. } => planes[0][0].shape(),
            Inputs::Rgbd(r) => r.rgb[0].shape(),
        }
    }

    pub fn layers(&self, cfg: &JobConfig) -> usize {
        match self {
            Inputs::Multiplane { planes, .. } => planes.len(),
            Inputs::Rgbd(_) => cfg.rgbd.as_ref().map_or(0, |r| r.layers),
        }
    }
}

fn synthetic_planes(s: &SyntheticScene) -> Vec<IntensityImage> {
    let shape = (s.rows, s.cols);
    match s.scene {
        SceneKind::Natural => scenes::independent(shape, s.count, s.seed),
        SceneKind::Flat => vec![scenes::flat(shape, s.level); s.count],
        SceneKind::Sinusoid => vec![scenes::sinusoid(shape, s.period, s.floor); s.count],
    }
}

pub fn load_inputs(cfg: &JobConfig) -> CliResult<Inputs> {
    match cfg.mode {
        Mode::Multiplane => {
            let mp = cfg
                .multiplane
                .as_ref()
                .ok_or_else(|| CliError::Validation("multiplane: section missing".into()))?;
            let planes: Vec<[IntensityImage; 3]> = match &mp.synthetic {
                Some(s) => synthetic_planes(s)
                    .into_iter()
                    .map(|img| [img.clone(), img.clone(), img])
                    .collect(),
                None => mp
                    .images
                    .iter()
                    .map(|p| io::read_rgb_png(p))
                    .collect::<tmholo::Result<_>>()?,
            };
            let shape = planes[0][0].shape();
            if let Some(i) = planes.iter().position(|p| p[0].shape() != shape) {
                return Err(CliError::Validation(format!(
                    "multiplane.images[{i}]: size {:?} differs from {:?}",
                    planes[i][0].shape(),
                    shape
                )));
            }
            Ok(Inputs::Multiplane {
                planes,
                spacing: mp.spacing,
            })
        }
        Mode::Rgbd => {
            let r = cfg
                .rgbd
                .as_ref()
                .ok_or_else(|| CliError::Validation("rgbd: section missing".into()))?;
            let rgb = io::read_rgb_png(&r.color)?;
            let depth = io::read_depth_png(&r.depth)?;
            if depth.dim() != rgb[0].shape() {
                return Err(CliError::Validation(format!(
                    "rgbd.depth: size {:?} differs from the colour image {:?}",
                    depth.dim(),
                    rgb[0].shape()
                )));
            }
            let input = RgbdInput::new(rgb, depth, (r.near_diopters, r.far_diopters))
                .map_err(|e| CliError::Validation(format!("rgbd: {e}")))?;
            Ok(Inputs::Rgbd(Box::new(input)))
        }
    }
}

/// Hologram geometry for a `shape` target: fitted unless the config pins
/// `nx` or `ny`.
pub fn geometry(cfg: &JobConfig, shape: (usize, usize)) -> CliResult<SystemGeometry> {
    let g = &cfg.geometry;
    let fitted = SystemGeometry::fitted(shape.0, shape.1, g.pitch, g.pitch, g.focal_length, g.wavelengths)?;
    let geom = SystemGeometry::new(
        g.nx.unwrap_or(fitted.nx),
        g.ny.unwrap_or(fitted.ny),
        g.pitch,
        g.pitch,
        g.focal_length,
        g.wavelengths,
    )?;
    geom.image_window()
        .centered(shape.0, shape.1)
        .map_err(|e| CliError::Validation(format!("geometry: {e}")))?;
    Ok(geom)
}

/// Wavelength every channel's image size is matched to: the shortest
/// among the selected channels.
pub fn reference_wavelength(cfg: &JobConfig) -> f64 {
    cfg.channels
        .iter()
        .map(|&c| cfg.geometry.wavelengths[c.index()])
        .fold(f64::INFINITY, f64::min)
}

/// Target stack of one channel, with Fourier-domain matching applied when
/// enabled.
pub fn build_target(
    cfg: &JobConfig,
    inputs: &Inputs,
    channel: Channel,
    geom: &SystemGeometry,
) -> CliResult<TargetStack> {
    let wavelength = geom.wavelength(channel);
    let reference = reference_wavelength(cfg);
    let matching = cfg.match_fourier_domain && wavelength > reference;
    match inputs {
        Inputs::Multiplane { planes, spacing } => {
            let images = planes
                .iter()
                .map(|p| {
                    let img = &p[channel.index()];
                    if matching {
                        let data = match_fourier_domain(img.data(), wavelength, reference)?;
                        IntensityImage::new(data, ColorSpace::Srgb)
                    } else {
                        Ok(img.clone())
                    }
                })
                .collect::<tmholo::Result<Vec<_>>>()?;
            Ok(multiplane_to_target(&images, *spacing, channel)?)
        }
        Inputs::Rgbd(rgbd) => {
            let r = cfg.rgbd.as_ref().expect("rgbd inputs come from an rgbd config");
            let opts = RgbdOptions {
                layers: r.layers,
                mapping: DiopterMapping::eyepiece(r.eyepiece_focal_length, (r.near_diopters, r.far_diopters)),
                occlusion: r.occlusion,
            };
            let stack = rgbd_to_target(rgbd, channel, geom, &opts, default_propagator())?;
            if !matching {
                return Ok(stack);
            }
            let layers = stack
                .layers()
                .iter()
                .map(|l| {
                    let data = match_fourier_domain(l.intensity.data(), wavelength, reference)?;
                    let mask = match_fourier_domain(&l.support.mapv(f64::from), wavelength, reference)?;
                    Ok(TargetLayer {
                        intensity: IntensityImage::linear(data)?,
                        z: l.z,
                        support: mask.mapv(|v| v >= 0.5),
                    })
                })
                .collect::<tmholo::Result<Vec<_>>>()?;
            Ok(TargetStack::new(layers, channel, stack.mode)?)
        }
    }
}

pub fn hologram_name(channel: Channel, frame: usize) -> String {
    format!("holograms/{channel}/frame_{frame:03}.pbm")
}

pub fn target_dir_name(channel: Channel) -> String {
    format!("targets/{channel}")
}

/// Holograms and targets of one channel of a finished run.
pub struct LoadedChannel {
    pub tm: TmSet,
    pub targets: TargetStack,
}

pub fn load_channel(run_dir: &Path, manifest: &RunManifest, channel: Channel) -> CliResult<LoadedChannel> {
    let entry = manifest.channel(channel)?;
    if entry.holograms.is_empty() || entry.holograms.len() != entry.seeds.len() {
        return Err(CliError::Validation(format!(
            "{channel}: manifest lists no usable frames"
        )));
    }
    let mut holograms: Vec<BinaryHologram> = Vec::with_capacity(entry.holograms.len());
    for (name, &seed) in entry.holograms.iter().zip(&entry.seeds) {
        let path = run_dir.join(name);
        if !path.is_file() {
            return Err(CliError::Validation(format!("missing frame {}", path.display())));
        }
        holograms.push(io::read_pbm(&path, seed, channel)?);
    }
    let targets = io::load_target_stack(&run_dir.join(&entry.target_dir))?;
    Ok(LoadedChannel {
        tm: TmSet {
            holograms,
            seeds: entry.seeds.clone(),
            traces: Vec::new(),
            channel,
        },
        targets,
    })
}

/// Index of the target layer nearest to `z`.
pub fn nearest_layer(targets: &TargetStack, z: f64) -> usize {
    targets
        .depths()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - z).abs().total_cmp(&(b.1 - z).abs()))
        .map_or(0, |(n, _)| n)
}

/// Perceived intensity of the first `m` frames inside the target window at
/// each of `depths`, scaled to the energy of the nearest target layer.
///
/// `per_frame` comes from [`frame_intensities`] at the same depths.
pub fn windowed_reconstruction(
    per_frame: &[Vec<Array2<f64>>],
    m: usize,
    window: &Window,
    targets: &TargetStack,
    depths: &[f64],
) -> CliResult<Vec<Array2<f64>>> {
    let accumulated = accumulate_prefix(per_frame, m)?;
    accumulated
        .iter()
        .zip(depths)
        .map(|(img, &z)| {
            let crop = window.crop(img.data().view());
            let energy: f64 = crop.sum();
            let target = targets.layers()[nearest_layer(targets, z)].intensity.energy();
            if energy <= 0.0 {
                return Err(CliError::Runtime(anyhow::anyhow!("reconstruction at z = {z} is dark")));
            }
            Ok(crop * (target / energy))
        })
        .collect()
}

/// Per-frame intensities of a loaded channel at `depths`.
pub fn channel_frames(
    loaded: &LoadedChannel,
    geom: &SystemGeometry,
    depths: &[f64],
) -> CliResult<Vec<Vec<Array2<f64>>>> {
    Ok(frame_intensities(&loaded.tm, geom, depths, default_propagator())?)
}

pub fn target_window(geom: &SystemGeometry, shape: (usize, usize)) -> CliResult<Window> {
    Ok(geom.image_window().centered(shape.0, shape.1)?)
}

/// Runs `f` on a thread pool of `jobs` threads, or the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match jobs {
        Some(n) => {
            let pool = rayon_pool(n)?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn rayon_pool(n: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build()
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("thread pool: {e}")))
}
