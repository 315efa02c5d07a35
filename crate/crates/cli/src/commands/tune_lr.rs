//! `tune-lr`: final B-SGD loss of the first selected channel over a grid
//! of learning rates.

use std::fs;

use serde_json::json;
use tmholo::optimizer::{best_learning_rate, tune_learning_rate};

use crate::manifest::{write_json, OutputManifest};
use crate::pipeline;
use crate::{CliError, CliResult, TuneLrArgs};

/// Half-decade grid from 1e2 to 1e5.
pub fn default_grid() -> Vec<f64> {
    (0..7).map(|k| 10f64.powf(2.0 + 0.5 * f64::from(k))).collect()
}

pub fn run(args: &TuneLrArgs) -> CliResult<()> {
    let cfg = pipeline::load_job(&args.config, &args.overrides)?;
    let grid = args.grid.clone().unwrap_or_else(default_grid);
    if grid.is_empty() || grid.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(CliError::Validation("--grid: learning rates must be positive".into()));
    }
    let inputs = pipeline::load_inputs(&cfg)?;
    let geom = pipeline::geometry(&cfg, inputs.shape())?;
    let channel = cfg.channels[0];
    let out = cfg.output_dir.join("tune_lr");
    if args.dry_run {
        println!(
            "{channel}: {} learning rates, {} iterations, output {}",
            grid.len(),
            cfg.optimizer.iterations,
            out.display()
        );
        return Ok(());
    }
    let targets = pipeline::build_target(&cfg, &inputs, channel, &geom)?;
    let results = pipeline::with_jobs(cfg.jobs, || {
        tune_learning_rate(&targets, &geom, &grid, cfg.optimizer.iterations, cfg.seed)
    })??;

    fs::create_dir_all(&out)?;
    let mut w = csv::Writer::from_path(out.join("tune_lr.csv"))?;
    w.write_record(["learning_rate", "final_loss"])?;
    for row in &results {
        w.serialize(row)?;
    }
    w.flush()?;
    let best = best_learning_rate(&results);
    let manifest = OutputManifest {
        schema_version: crate::config::SCHEMA_VERSION,
        command: "tune-lr".into(),
        parameters: json!({
            "channel": channel,
            "iterations": cfg.optimizer.iterations,
            "seed": cfg.seed,
            "grid": grid,
            "best": best,
        }),
        outputs: vec!["tune_lr.csv".into(), "tune_lr.json".into()],
    };
    write_json(&out.join("tune_lr.json"), &manifest)?;
    match best {
        Some(alpha) => println!("best learning rate: {alpha:e}"),
        None => println!("no learning rate gave a finite loss"),
    }
    Ok(())
}
