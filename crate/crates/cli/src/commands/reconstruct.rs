//! `reconstruct`: accumulated TM reconstructions at chosen depths, as
//! display-gamma PNGs.

use std::fs;

use tmholo::color::gamma_encode_value;
use tmholo::geometry::Channel;
use tmholo::io::{self, BitDepth};

use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::pipeline;
use crate::{CliError, CliResult, ReconstructArgs};

/// Display gamma of written images.
pub const DISPLAY_GAMMA: f64 = 2.2;

/// Parses `start:stop:step`; `stop` is included when it lies on the grid.
pub fn parse_sweep(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Validation(format!("--sweep: expected start:stop:step, got {spec:?}"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step == 0.0 {
        return Err(bad());
    }
    if (stop - start) * step < 0.0 {
        return Err(CliError::Validation("--sweep: step points away from stop".into()));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

pub fn run(args: &ReconstructArgs) -> CliResult<()> {
    let mut manifest = RunManifest::load(&args.run)?;
    let channels: Vec<Channel> = match &args.channel {
        Some(c) => c.clone(),
        None => manifest.channels.iter().map(|c| c.channel).collect(),
    };
    for &c in &channels {
        manifest.channel(c)?;
    }
    let requested = match (&args.depths, &args.sweep) {
        (Some(d), _) => Some(d.clone()),
        (None, Some(s)) => Some(parse_sweep(s)?),
        (None, None) => None,
    };
    if let Some(d) = &requested {
        if d.is_empty() || d.iter().any(|z| !z.is_finite()) {
            return Err(CliError::Validation("--depths: need finite depths".into()));
        }
    }
    if args.dry_run {
        for &c in &channels {
            let frames = args.frames.unwrap_or(manifest.channel(c)?.holograms.len());
            match &requested {
                Some(d) => println!("{c}: {frames} frames at {} depths", d.len()),
                None => println!("{c}: {frames} frames at the target layer depths"),
            }
        }
        return Ok(());
    }

    let geom = manifest.geometry.clone();
    for &channel in &channels {
        let loaded = pipeline::load_channel(&args.run, &manifest, channel)?;
        let depths = requested.clone().unwrap_or_else(|| loaded.targets.depths());
        let m = args.frames.unwrap_or(loaded.tm.len());
        if m == 0 || m > loaded.tm.len() {
            return Err(CliError::Validation(format!(
                "--frames: {channel} has {} frames, asked for {m}",
                loaded.tm.len()
            )));
        }
        let window = pipeline::target_window(&geom, loaded.targets.shape())?;
        let images = pipeline::with_jobs(args.jobs, || -> CliResult<_> {
            let per_frame = pipeline::channel_frames(&loaded, &geom, &depths)?;
            pipeline::windowed_reconstruction(&per_frame, m, &window, &loaded.targets, &depths)
        })??;

        let dir = format!("recon/{channel}");
        fs::create_dir_all(args.run.join(&dir))?;
        let index = format!("{dir}/index.csv");
        let mut w = csv::Writer::from_path(args.run.join(&index))?;
        w.write_record(["index", "z", "frames", "nearest_layer", "file"])?;
        for (i, (img, &z)) in images.iter().zip(&depths).enumerate() {
            let layer = pipeline::nearest_layer(&loaded.targets, z);
            let peak = loaded.targets.layers()[layer]
                .intensity
                .data()
                .iter()
                .copied()
                .fold(0.0, f64::max);
            let display = img.mapv(|v| gamma_encode_value(v / peak, DISPLAY_GAMMA));
            let name = format!("{dir}/recon_{i:03}_m{m:03}.png");
            io::write_png(&args.run.join(&name), &display, BitDepth::Sixteen)?;
            w.serialize((i, z, m, layer, &name))?;
            manifest.record(name);
        }
        w.flush()?;
        manifest.record(index);
        log::info!("{channel}: wrote {} reconstructions", images.len());
    }
    manifest.record(MANIFEST_FILE);
    manifest.save(&args.run)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_includes_stop() {
        let z = parse_sweep("-0.01:0.01:0.005").unwrap();
        assert_eq!(z.len(), 5);
        assert!((z[4] - 0.01).abs() < 1e-15);
        assert_eq!(parse_sweep("0:1:0.3").unwrap().len(), 4);
        assert_eq!(parse_sweep("1:0:-0.5").unwrap().len(), 3);
    }

    #[test]
    fn sweep_rejects_bad_specs() {
        assert!(parse_sweep("0:1").is_err());
        assert!(parse_sweep("0:1:0").is_err());
        assert!(parse_sweep("0:1:-1").is_err());
        assert!(parse_sweep("a:b:c").is_err());
    }
}
