use std::path::{Path, PathBuf};

use tmholo_cli::main_with_args;
use tmholo_cli::manifest::RunManifest;

fn job(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("job.json");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{"schema_version": 1, "mode": "multiplane", "output_dir": "run",
    "channels": ["green"], "frames": 2, "optimizer": {"iterations": 5},
    "multiplane": {"synthetic": {"scene": "flat", "count": 2, "rows": 24, "cols": 24}}}"#;

fn cli(args: &[&str]) -> i32 {
    let mut full = vec!["tmholo", "--log", "error"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn walk(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["--help"]), 0);
    assert_eq!(cli(&["frobnicate"]), 1);
    assert_eq!(
        cli(&[
            "optimize",
            "--config",
            dir.path().join("missing.json").to_str().unwrap()
        ]),
        1
    );
    let bad = job(
        dir.path(),
        r#"{"schema_version": 1, "mode": "multiplane", "frames": "many"}"#,
    );
    assert_eq!(cli(&["optimize", "--config", bad.to_str().unwrap()]), 1);
    let cfg = job(dir.path(), SMALL);
    assert_eq!(
        cli(&["optimize", "--config", cfg.to_str().unwrap(), "--frames", "0"]),
        1
    );
    // Output path occupied by a file: a runtime failure.
    let blocker = dir.path().join("blocked");
    std::fs::write(&blocker, b"x").unwrap();
    let out = blocker.join("run");
    assert_eq!(
        cli(&[
            "optimize",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out.to_str().unwrap()
        ]),
        2
    );
    assert_eq!(
        cli(&["reconstruct", "--run", dir.path().join("nowhere").to_str().unwrap()]),
        1
    );
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = job(dir.path(), SMALL);
    assert_eq!(cli(&["optimize", "--config", cfg.to_str().unwrap(), "--dry-run"]), 0);
    assert!(!dir.path().join("run").exists());
}

#[test]
fn manifest_declares_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = job(dir.path(), SMALL);
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    assert_eq!(cli(&["optimize", "--config", cfg.to_str().unwrap(), "--seed", "3"]), 0);
    assert_eq!(
        cli(&[
            "reconstruct",
            "--run",
            run_s,
            "--depths=-0.0075,0.0075",
            "--frames",
            "1"
        ]),
        0
    );
    assert_eq!(cli(&["evaluate", "--run", run_s]), 0);
    let manifest = RunManifest::load(&run).unwrap();
    let mut declared = manifest.outputs.clone();
    declared.sort();
    assert_eq!(declared, walk(&run));
    assert_eq!(manifest.config.seed, 3);
    assert_eq!(manifest.channels.len(), 1);
    assert_eq!(manifest.channels[0].holograms.len(), 2);

    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "channel,method,layer,z,m,psnr,ssim,speckle_contrast,michelson"
    );
    // Two layers at m = 1 and m = 2; flat targets report speckle contrast.
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| !r.split(',').nth(7).unwrap().is_empty()));
}

#[test]
fn rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = job(dir.path(), SMALL);
    let run = dir.path().join("run");
    assert_eq!(cli(&["optimize", "--config", cfg.to_str().unwrap()]), 0);
    let first: Vec<Vec<u8>> = walk(&run).iter().map(|f| std::fs::read(run.join(f)).unwrap()).collect();
    assert_eq!(cli(&["optimize", "--config", cfg.to_str().unwrap(), "--jobs", "2"]), 0);
    let second: Vec<Vec<u8>> = walk(&run).iter().map(|f| std::fs::read(run.join(f)).unwrap()).collect();
    assert_eq!(first, second);
}

#[test]
fn theory_emits_reference_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("theory");
    assert_eq!(
        cli(&[
            "theory",
            "--output",
            out.to_str().unwrap(),
            "--samples",
            "20000",
            "--max-r",
            "4"
        ]),
        0
    );
    let table = std::fs::read_to_string(out.join("contrast_vs_r.csv")).unwrap();
    let r1: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(r1[..3], ["1", "0.0", "0.0"]);
    let r4: Vec<f64> = table
        .lines()
        .nth(4)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((r4[1] - 0.866).abs() < 1e-3);
    let tm = std::fs::read_to_string(out.join("tm_contrast.csv")).unwrap();
    let last: Vec<f64> = tm
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last[0], 24.0);
    assert!((last[2] - 4.9).abs() < 0.01);
    for f in [
        "contrast_vs_r.png",
        "tm_contrast.png",
        "speckle_pdf.png",
        "speckle_pdf.csv",
        "overlap.csv",
        "theory.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
}
