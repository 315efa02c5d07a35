//! `optimize`: targets, TM hologram sets, loss traces and the run manifest.

use std::fs;

use tmholo::io;
use tmholo::multiplex::build_tm_set;
use tmholo::optimizer::Objective;

use crate::config::JobConfig;
use crate::manifest::{ChannelRun, RunManifest, MANIFEST_FILE};
use crate::pipeline::{self, hologram_name, target_dir_name, Inputs};
use crate::{CliResult, OptimizeArgs};

pub fn run(args: &OptimizeArgs) -> CliResult<()> {
    let cfg = pipeline::load_job(&args.config, &args.overrides)?;
    let inputs = pipeline::load_inputs(&cfg)?;
    let shape = inputs.shape();
    let geom = pipeline::geometry(&cfg, shape)?;
    if args.dry_run {
        print_plan(&cfg, &inputs, &geom);
        return Ok(());
    }

    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    let mut recorded = cfg.clone();
    // Thread count does not affect results; keep it out of the record.
    recorded.jobs = None;
    let mut manifest = RunManifest {
        schema_version: crate::config::SCHEMA_VERSION,
        config: recorded,
        geometry: geom.clone(),
        target_shape: shape,
        channels: Vec::new(),
        outputs: Vec::new(),
    };
    let opt = cfg.opt_config();
    opt.validate()?;

    for &channel in &cfg.channels {
        log::info!("{channel}: building {} target layers", inputs.layers(&cfg));
        let targets = pipeline::build_target(&cfg, &inputs, channel, &geom)?;
        let target_dir = target_dir_name(channel);
        io::save_target_stack(&out.join(&target_dir), &targets)?;
        manifest.record(format!("{target_dir}/manifest.json"));
        for n in 0..targets.len() {
            manifest.record(format!("{target_dir}/layer_{n:03}.f64"));
            manifest.record(format!("{target_dir}/support_{n:03}.pbm"));
        }

        log::info!(
            "{channel}: {} x {} frames, {} iterations",
            opt.method,
            cfg.frames,
            opt.iterations
        );
        let objective = Objective::new(&targets, &geom)?;
        let tm = build_tm_set(&objective, &opt, cfg.frames, cfg.jobs)?;

        fs::create_dir_all(out.join(format!("holograms/{channel}")))?;
        let mut holograms = Vec::with_capacity(tm.len());
        for (m, h) in tm.holograms.iter().enumerate() {
            let name = hologram_name(channel, m);
            io::write_pbm(&out.join(&name), h)?;
            manifest.record(name.clone());
            holograms.push(name);
        }

        let loss_csv = format!("loss_{channel}.csv");
        let mut w = csv::Writer::from_path(out.join(&loss_csv))?;
        w.write_record(["frame", "seed", "iteration", "loss"])?;
        for (m, (trace, seed)) in tm.traces.iter().zip(&tm.seeds).enumerate() {
            let rows = trace.losses.iter().chain(std::iter::once(&trace.final_loss));
            for (k, loss) in rows.enumerate() {
                w.serialize((m, seed, k, loss))?;
            }
        }
        w.flush()?;
        manifest.record(loss_csv.clone());

        let final_losses: Vec<f64> = tm.traces.iter().map(|t| t.final_loss).collect();
        log::info!(
            "{channel}: mean final loss {:.6e}",
            final_losses.iter().sum::<f64>() / final_losses.len() as f64
        );
        manifest.channels.push(ChannelRun {
            channel,
            seeds: tm.seeds.clone(),
            holograms,
            target_dir,
            loss_csv,
            final_losses,
        });
    }
    manifest.record(MANIFEST_FILE);
    manifest.save(out)?;
    println!("{}", out.join(MANIFEST_FILE).display());
    Ok(())
}

fn print_plan(cfg: &JobConfig, inputs: &Inputs, geom: &tmholo::SystemGeometry) {
    let (rows, cols) = inputs.shape();
    println!("mode: {:?}", cfg.mode);
    println!("target: {} layers of {rows}x{cols}", inputs.layers(cfg));
    println!(
        "hologram: {}x{} pixels, pitch {:e} m, focal length {} m",
        geom.ny, geom.nx, geom.dx, geom.focal_length
    );
    let channels: Vec<String> = cfg.channels.iter().map(|c| c.to_string()).collect();
    println!("channels: {}", channels.join(","));
    println!(
        "optimizer: {} lr {:e}, {} iterations, {} frames, seed {}",
        cfg.optimizer.method, cfg.optimizer.learning_rate, cfg.optimizer.iterations, cfg.frames, cfg.seed
    );
    println!("output: {}", cfg.output_dir.display());
}
