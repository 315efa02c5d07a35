//! Job configuration: one JSON document per run. Paths inside it are
//! relative to the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tmholo::geometry::{Channel, PROTOTYPE_FOCAL_LENGTH, PROTOTYPE_PITCH, PROTOTYPE_WAVELENGTHS};
use tmholo::multiplex::DEFAULT_FRAMES;
use tmholo::optimizer::{Method, OptConfig, DEFAULT_LEARNING_RATE};
use tmholo::target::OcclusionPolicy;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Multiplane,
    Rgbd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub schema_version: u32,
    pub mode: Mode,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default = "all_channels")]
    pub channels: Vec<Channel>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Shrink and zero-pad longer-wavelength targets so every channel
    /// shows the same physical image size as blue.
    #[serde(default = "yes")]
    pub match_fourier_domain: bool,
    #[serde(default)]
    pub multiplane: Option<MultiplaneConfig>,
    #[serde(default)]
    pub rgbd: Option<RgbdConfig>,
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

fn all_channels() -> Vec<Channel> {
    Channel::ALL.to_vec()
}

fn default_frames() -> usize {
    DEFAULT_FRAMES
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub pitch: f64,
    pub focal_length: f64,
    pub wavelengths: [f64; 3],
    /// Grid size; fitted to the target when absent.
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            pitch: PROTOTYPE_PITCH,
            focal_length: PROTOTYPE_FOCAL_LENGTH,
            wavelengths: PROTOTYPE_WAVELENGTHS,
            nx: None,
            ny: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::Bsgd,
            learning_rate: DEFAULT_LEARNING_RATE,
            iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplaneConfig {
    /// PNG files, nearest layer first.
    #[serde(default)]
    pub images: Vec<PathBuf>,
    /// Procedural images instead of files.
    #[serde(default)]
    pub synthetic: Option<SyntheticScene>,
    /// Layer spacing, meters.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

fn default_spacing() -> f64 {
    0.015
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Natural,
    Flat,
    Sinusoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScene {
    pub scene: SceneKind,
    #[serde(default = "one")]
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub seed: u64,
    /// sRGB level of flat scenes.
    #[serde(default = "default_level")]
    pub level: f64,
    /// Fringe period of sinusoid scenes, pixels.
    #[serde(default = "default_period")]
    pub period: f64,
    /// Offset under the fringes of sinusoid scenes.
    #[serde(default)]
    pub floor: f64,
}

fn one() -> usize {
    1
}

fn default_level() -> f64 {
    0.8
}

fn default_period() -> f64 {
    16.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RgbdConfig {
    pub color: PathBuf,
    /// 8- or 16-bit depth PNG, 0 = nearest.
    pub depth: PathBuf,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_near")]
    pub near_diopters: f64,
    #[serde(default)]
    pub far_diopters: f64,
    #[serde(default = "default_eyepiece")]
    pub eyepiece_focal_length: f64,
    #[serde(default)]
    pub occlusion: OcclusionPolicy,
}

fn default_layers() -> usize {
    32
}

fn default_near() -> f64 {
    4.0
}

fn default_eyepiece() -> f64 {
    0.05
}

fn invalid(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {message}"))
}

impl JobConfig {
    /// Parses `path`, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let mut cfg: JobConfig = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| CliError::Validation(format!("{}: field `{}`: {}", path.display(), e.path(), e.inner())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(mp) = &mut self.multiplane {
            mp.images.iter_mut().for_each(fix);
        }
        if let Some(rgbd) = &mut self.rgbd {
            fix(&mut rgbd.color);
            fix(&mut rgbd.depth);
        }
    }

    pub fn opt_config(&self) -> OptConfig {
        OptConfig {
            learning_rate: self.optimizer.learning_rate,
            iterations: self.optimizer.iterations,
            seed: self.seed,
            method: self.optimizer.method,
            ..OptConfig::default()
        }
    }

    /// Field-level checks, including that every input file exists.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.channels.is_empty() {
            return Err(invalid("channels", "select at least one channel"));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if self.channels[..i].contains(c) {
                return Err(invalid("channels", format!("{c} listed twice")));
            }
        }
        if self.frames == 0 {
            return Err(invalid("frames", "must be at least 1"));
        }
        if self.jobs == Some(0) {
            return Err(invalid("jobs", "must be at least 1"));
        }
        let lr = self.optimizer.learning_rate;
        if !(lr.is_finite() && lr > 0.0) {
            return Err(invalid(
                "optimizer.learning_rate",
                format!("must be positive, got {lr}"),
            ));
        }
        if self.optimizer.iterations == 0 {
            return Err(invalid("optimizer.iterations", "must be at least 1"));
        }
        let g = &self.geometry;
        for (name, v) in [("geometry.pitch", g.pitch), ("geometry.focal_length", g.focal_length)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(w) = g.wavelengths.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(invalid("geometry.wavelengths", format!("must be positive, got {w}")));
        }
        if g.ny.is_some_and(|ny| ny % 4 != 0) {
            return Err(invalid("geometry.ny", "must be a multiple of 4"));
        }
        match self.mode {
            Mode::Multiplane => {
                let mp = self
                    .multiplane
                    .as_ref()
                    .ok_or_else(|| invalid("multiplane", "required when mode is multiplane"))?;
                match (&mp.synthetic, mp.images.is_empty()) {
                    (Some(_), false) => {
                        return Err(invalid("multiplane", "give either `images` or `synthetic`, not both"))
                    }
                    (None, true) => return Err(invalid("multiplane.images", "no images listed")),
                    _ => {}
                }
                for (i, p) in mp.images.iter().enumerate() {
                    if !p.is_file() {
                        return Err(invalid(
                            &format!("multiplane.images[{i}]"),
                            format!("{} not found", p.display()),
                        ));
                    }
                }
                if let Some(s) = &mp.synthetic {
                    if s.count == 0 || s.rows < 11 || s.cols < 11 {
                        return Err(invalid(
                            "multiplane.synthetic",
                            "need count >= 1 and at least 11x11 pixels",
                        ));
                    }
                    if !(0.0..=1.0).contains(&s.level) {
                        return Err(invalid("multiplane.synthetic.level", "must lie in [0, 1]"));
                    }
                    if s.period.is_nan() || s.period <= 2.0 || s.floor < 0.0 {
                        return Err(invalid(
                            "multiplane.synthetic",
                            "period must exceed 2 and floor be nonnegative",
                        ));
                    }
                }
                let count = mp.synthetic.as_ref().map_or(mp.images.len(), |s| s.count);
                if count > 1 && !(mp.spacing.is_finite() && mp.spacing > 0.0) {
                    return Err(invalid(
                        "multiplane.spacing",
                        format!("must be positive, got {}", mp.spacing),
                    ));
                }
            }
            Mode::Rgbd => {
                let r = self
                    .rgbd
                    .as_ref()
                    .ok_or_else(|| invalid("rgbd", "required when mode is rgbd"))?;
                if !r.color.is_file() {
                    return Err(invalid("rgbd.color", format!("{} not found", r.color.display())));
                }
                if !r.depth.is_file() {
                    return Err(invalid("rgbd.depth", format!("{} not found", r.depth.display())));
                }
                if r.layers == 0 {
                    return Err(invalid("rgbd.layers", "must be at least 1"));
                }
                if r.near_diopters == r.far_diopters {
                    return Err(invalid("rgbd", "near_diopters and far_diopters must differ"));
                }
                if r.eyepiece_focal_length.is_nan() || r.eyepiece_focal_length <= 0.0 {
                    return Err(invalid("rgbd.eyepiece_focal_length", "must be positive"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("job.json");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"schema_version": 1, "mode": "multiplane",
                "multiplane": {"synthetic": {"scene": "natural", "rows": 16, "cols": 16}}}"#,
        );
        let cfg = JobConfig::load(&p).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.frames, 24);
        assert_eq!(cfg.channels, Channel::ALL.to_vec());
        assert_eq!(cfg.output_dir, dir.path().join("run"));
        assert_eq!(cfg.optimizer.iterations, 200);
    }

    #[test]
    fn type_errors_name_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"schema_version": 1, "mode": "multiplane", "optimizer": {"learning_rate": "fast"}}"#,
        );
        let msg = JobConfig::load(&p).unwrap_err().to_string();
        assert!(msg.contains("optimizer.learning_rate"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"schema_version": 1, "mode": "rgbd", "colour": "x.png"}"#,
        );
        assert!(matches!(JobConfig::load(&p), Err(CliError::Validation(_))));
    }

    #[test]
    fn validation_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"schema_version": 1, "mode": "multiplane", "frames": 0,
                "multiplane": {"images": ["a.png"]}}"#,
        );
        let cfg = JobConfig::load(&p).unwrap();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("frames"), "{msg}");
        let cfg = JobConfig { frames: 4, ..cfg };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("multiplane.images[0]"), "{msg}");
        let cfg = JobConfig {
            schema_version: 2,
            ..cfg
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("schema_version"));
    }
}
