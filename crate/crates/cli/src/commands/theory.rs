//! `theory`: tables and plots of the random-phasor speckle model and of
//! temporal-multiplexing contrast reduction.

use std::fs;

use serde_json::json;
use tmholo::analysis::{
    monte_carlo_contrast, overlap_ratio, speckle_cdf, speckle_pdf, theoretical_contrast, tm_contrast, SpeckleModel,
};
use tmholo::geometry::{Channel, SystemGeometry};
use tmholo::rng::derive_seed;

use crate::manifest::{write_json, OutputManifest};
use crate::pipeline;
use crate::plot::Plot;
use crate::{CliError, CliResult, Overrides, TheoryArgs};

/// Phasor count of a binary Fourier hologram's overlapping lobes.
pub const DEFAULT_PHASORS: u32 = 4;
/// Phasor counts whose intensity distributions are tabulated.
pub const PDF_PHASORS: [u32; 3] = [2, 4, 8];
/// Intensity samples per distribution, over `[0, 4 E[I]]`.
pub const PDF_SAMPLES: usize = 201;

pub fn run(args: &TheoryArgs) -> CliResult<()> {
    if args.max_r == 0 || args.frames == 0 {
        return Err(CliError::Validation("--max-r and --frames must be at least 1".into()));
    }
    if args.samples < 10_000 {
        return Err(CliError::Validation("--samples must be at least 10000".into()));
    }
    let geom = match &args.config {
        Some(path) => {
            let cfg = pipeline::load_job(path, &Overrides::default())?;
            let inputs = pipeline::load_inputs(&cfg)?;
            pipeline::geometry(&cfg, inputs.shape())?
        }
        None => SystemGeometry::prototype(1920, 1080)?,
    };
    if args.dry_run {
        println!(
            "r = 1..={}, m = 1..={}, {} Monte-Carlo samples, output {}",
            args.max_r,
            args.frames,
            args.samples,
            args.output.display()
        );
        return Ok(());
    }
    let out = &args.output;
    fs::create_dir_all(out)?;
    let mut outputs = Vec::new();

    let mut w = csv::Writer::from_path(out.join("overlap.csv"))?;
    w.write_record(["channel", "wavelength", "overlap_ratio"])?;
    for c in Channel::ALL {
        w.serialize((c, geom.wavelength(c), overlap_ratio(&geom, geom.wavelength(c))))?;
    }
    w.flush()?;
    outputs.push("overlap.csv".to_string());

    let rs: Vec<u32> = (1..=args.max_r).collect();
    let mc = pipeline::with_jobs(args.jobs, || {
        rs.iter()
            .map(|&r| monte_carlo_contrast(r, 1.0, args.samples, derive_seed(&[args.seed, u64::from(r)])))
            .collect::<tmholo::Result<Vec<f64>>>()
    })??;
    let mut w = csv::Writer::from_path(out.join("contrast_vs_r.csv"))?;
    w.write_record(["r", "theoretical_contrast", "monte_carlo_contrast"])?;
    for (&r, &c) in rs.iter().zip(&mc) {
        w.serialize((r, theoretical_contrast(r), c))?;
    }
    w.flush()?;
    outputs.push("contrast_vs_r.csv".to_string());
    Plot::new((0.0, f64::from(args.max_r)), (0.0, 1.0))
        .line(
            rs.iter().map(|&r| (f64::from(r), theoretical_contrast(r))).collect(),
            0.0,
        )
        .markers(rs.iter().zip(&mc).map(|(&r, &c)| (f64::from(r), c)).collect(), 0.5)
        .write(&out.join("contrast_vs_r.png"))?;
    outputs.push("contrast_vs_r.png".to_string());

    let c1 = theoretical_contrast(DEFAULT_PHASORS);
    let ms: Vec<u32> = (1..=args.frames).collect();
    let mut w = csv::Writer::from_path(out.join("tm_contrast.csv"))?;
    w.write_record(["m", "contrast", "reduction"])?;
    for &m in &ms {
        let cm = tm_contrast(c1, m);
        w.serialize((m, cm, c1 / cm))?;
    }
    w.flush()?;
    outputs.push("tm_contrast.csv".to_string());
    Plot::new((0.0, f64::from(args.frames)), (0.0, 1.0))
        .line(ms.iter().map(|&m| (f64::from(m), tm_contrast(c1, m))).collect(), 0.0)
        .write(&out.join("tm_contrast.png"))?;
    outputs.push("tm_contrast.png".to_string());

    let mut w = csv::Writer::from_path(out.join("speckle_pdf.csv"))?;
    w.write_record(["r", "intensity", "pdf", "cdf"])?;
    let mut plot = Plot::new((0.0, 4.0), (0.0, 1.5));
    for (k, &r) in PDF_PHASORS.iter().enumerate() {
        let model = SpeckleModel::new(r, 1.0)?;
        let mut curve = Vec::with_capacity(PDF_SAMPLES);
        for i in 0..PDF_SAMPLES {
            let intensity = 4.0 * model.mean() * i as f64 / (PDF_SAMPLES - 1) as f64;
            let pdf = speckle_pdf(intensity, &model)?;
            w.serialize((r, intensity, pdf, speckle_cdf(intensity, &model)?))?;
            curve.push((intensity, pdf));
        }
        plot = plot.line(curve, 0.3 * k as f64);
    }
    w.flush()?;
    outputs.push("speckle_pdf.csv".to_string());
    plot.write(&out.join("speckle_pdf.png"))?;
    outputs.push("speckle_pdf.png".to_string());

    outputs.push("theory.json".to_string());
    let manifest = OutputManifest {
        schema_version: crate::config::SCHEMA_VERSION,
        command: "theory".into(),
        parameters: json!({
            "max_r": args.max_r,
            "frames": args.frames,
            "samples": args.samples,
            "seed": args.seed,
            "geometry": geom,
        }),
        outputs,
    };
    write_json(&out.join("theory.json"), &manifest)?;
    println!(
        "r = {DEFAULT_PHASORS}: C = {c1:.4}; m = {}: reduction {:.3}",
        args.frames,
        c1 / tm_contrast(c1, args.frames)
    );
    Ok(())
}
