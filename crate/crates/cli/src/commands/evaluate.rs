//! `evaluate`: quality metrics of a run's reconstructions at the target
//! layers, for a range of frame counts.

use ndarray::{s, Array2};
use serde::Serialize;
use tmholo::analysis::{michelson_contrast, psnr, speckle_contrast, ssim, ModulationAxis};
use tmholo::geometry::Channel;

use crate::config::SceneKind;
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::pipeline;
use crate::{CliError, CliResult, EvaluateArgs};

pub const METRICS_FILE: &str = "metrics.csv";

/// Border excluded from contrast statistics, where the window edge rings.
pub const EDGE_MARGIN: usize = 8;

#[derive(Debug, Serialize)]
struct Row {
    channel: Channel,
    method: String,
    layer: usize,
    z: f64,
    m: usize,
    psnr: f64,
    ssim: f64,
    speckle_contrast: Option<f64>,
    michelson: Option<f64>,
}

/// Default frame counts: powers of two below `total`, then `total`.
pub fn default_frame_counts(total: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |m| Some(m * 2))
        .take_while(|&m| m < total)
        .collect();
    out.push(total);
    out
}

/// Central region with `margin` pixels dropped on every side, or the
/// whole image when it is too small for that.
pub fn interior(img: &Array2<f64>, margin: usize) -> Array2<f64> {
    let (ny, nx) = img.dim();
    if ny <= 2 * margin + 1 || nx <= 2 * margin + 1 {
        return img.clone();
    }
    img.slice(s![margin..ny - margin, margin..nx - margin]).to_owned()
}

pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    let mut manifest = RunManifest::load(&args.run)?;
    let channels: Vec<Channel> = match &args.channel {
        Some(c) => c.clone(),
        None => manifest.channels.iter().map(|c| c.channel).collect(),
    };
    let synthetic = manifest.config.multiplane.as_ref().and_then(|m| m.synthetic.clone());
    let flat = synthetic.as_ref().is_some_and(|s| s.scene == SceneKind::Flat);
    let period = synthetic
        .as_ref()
        .filter(|s| s.scene == SceneKind::Sinusoid)
        .map(|s| s.period);
    if args.dry_run {
        for &c in &channels {
            let total = manifest.channel(c)?.holograms.len();
            let counts = args.frames.clone().unwrap_or_else(|| default_frame_counts(total));
            println!("{c}: frame counts {counts:?}");
        }
        return Ok(());
    }

    let geom = manifest.geometry.clone();
    let method = manifest.config.optimizer.method.to_string();
    let mut rows = Vec::new();
    for &channel in &channels {
        let loaded = pipeline::load_channel(&args.run, &manifest, channel)?;
        let total = loaded.tm.len();
        let counts = args.frames.clone().unwrap_or_else(|| default_frame_counts(total));
        if let Some(&bad) = counts.iter().find(|&&m| m == 0 || m > total) {
            return Err(CliError::Validation(format!(
                "--frames: {channel} has {total} frames, asked for {bad}"
            )));
        }
        // Fourier-domain matching shrinks the fringes of longer wavelengths.
        let wavelength = geom.wavelength(channel);
        let reference = pipeline::reference_wavelength(&manifest.config);
        let period_scale = if manifest.config.match_fourier_domain && wavelength > reference {
            reference / wavelength
        } else {
            1.0
        };
        let depths = loaded.targets.depths();
        let window = pipeline::target_window(&geom, loaded.targets.shape())?;
        let per_frame = pipeline::with_jobs(args.jobs, || pipeline::channel_frames(&loaded, &geom, &depths))??;
        for &m in &counts {
            let images = pipeline::windowed_reconstruction(&per_frame, m, &window, &loaded.targets, &depths)?;
            for (n, (img, layer)) in images.iter().zip(loaded.targets.layers()).enumerate() {
                let target = layer.intensity.data();
                let inner = interior(img, EDGE_MARGIN);
                rows.push(Row {
                    channel,
                    method: method.clone(),
                    layer: n,
                    z: layer.z,
                    m,
                    psnr: psnr(img, target)?,
                    ssim: ssim(img, target)?,
                    speckle_contrast: if flat {
                        Some(speckle_contrast(&inner, None)?)
                    } else {
                        None
                    },
                    michelson: match period {
                        Some(p) => Some(michelson_contrast(&inner, p * period_scale, ModulationAxis::Columns)?),
                        None => None,
                    },
                });
            }
        }
        log::info!("{channel}: evaluated {} frame counts", counts.len());
    }

    let mut w = csv::Writer::from_path(args.run.join(METRICS_FILE))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    manifest.record(METRICS_FILE);
    manifest.record(MANIFEST_FILE);
    manifest.save(&args.run)?;
    println!("{}", args.run.join(METRICS_FILE).display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_counts_end_at_total() {
        assert_eq!(default_frame_counts(24), vec![1, 2, 4, 8, 16, 24]);
        assert_eq!(default_frame_counts(1), vec![1]);
        assert_eq!(default_frame_counts(4), vec![1, 2, 4]);
    }

    #[test]
    fn interior_drops_margin() {
        let a = Array2::from_shape_fn((20, 30), |(r, c)| (r * 30 + c) as f64);
        let i = interior(&a, 8);
        assert_eq!(i.dim(), (4, 14));
        assert_eq!(i[[0, 0]], a[[8, 8]]);
        assert_eq!(interior(&a, 10).dim(), (20, 30));
    }
}
