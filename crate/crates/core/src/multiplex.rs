//! Temporal multiplexing: independently seeded holograms shown in quick
//! succession, perceived as the mean of their intensities.

use ndarray::Array2;
use rayon::prelude::*;

use crate::encoding::BinaryHologram;
use crate::error::{Error, Result};
use crate::field::{ColorSpace, IntensityImage};
use crate::geometry::{Channel, SystemGeometry};
use crate::optimizer::{
    optimize_bsgd_with, optimize_gs_with, random_hologram_with, LossTrace, Method, Objective, OptConfig,
};
use crate::propagation::Propagator;
use crate::rng::derive_seed;

/// Frames per channel at 3600 Hz binary modulation, 3 colours and 50 Hz video.
pub const DEFAULT_FRAMES: usize = 24;

#[derive(Debug, Clone)]
pub struct TmSet {
    pub holograms: Vec<BinaryHologram>,
    pub seeds: Vec<u64>,
    pub traces: Vec<LossTrace>,
    pub channel: Channel,
}

impl TmSet {
    pub fn len(&self) -> usize {
        self.holograms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holograms.is_empty()
    }
}

/// Seed of frame `m` for `channel` under `master`.
pub fn frame_seed(master: u64, channel: Channel, m: usize) -> u64 {
    derive_seed(&[master, channel.index() as u64, m as u64])
}

/// Runs the configured method once per frame with seeds from
/// [`frame_seed`] on up to `jobs` threads (all cores when `None`). The
/// result does not depend on `jobs`.
pub fn build_tm_set(objective: &Objective, cfg: &OptConfig, frames: usize, jobs: Option<usize>) -> Result<TmSet> {
    if frames == 0 {
        return Err(Error::Config("need at least one frame".into()));
    }
    let channel = objective.channel();
    let seeds: Vec<u64> = (0..frames).map(|m| frame_seed(cfg.seed, channel, m)).collect();
    let run = |seed: u64| -> Result<(BinaryHologram, LossTrace)> {
        let frame_cfg = OptConfig { seed, ..*cfg };
        match cfg.method {
            Method::Bsgd => optimize_bsgd_with(objective, &frame_cfg),
            Method::Gs => optimize_gs_with(objective, &frame_cfg),
            Method::Random => {
                let start = std::time::Instant::now();
                let b = random_hologram_with(objective, seed)?;
                let eval = objective.evaluate(&b.signed_values())?;
                let loss = eval.loss();
                let trace = LossTrace {
                    losses: vec![loss],
                    initial_loss: loss,
                    final_loss: loss,
                    final_layer_losses: eval.layer_losses,
                    wall_time: start.elapsed().as_secs_f64(),
                };
                Ok((crate::encoding::to_device_form(&b)?, trace))
            }
        }
    };
    let results: Vec<Result<(BinaryHologram, LossTrace)>> = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| seeds.par_iter().map(|&s| run(s)).collect()),
        None => seeds.par_iter().map(|&s| run(s)).collect(),
    };
    let mut holograms = Vec::with_capacity(frames);
    let mut traces = Vec::with_capacity(frames);
    for r in results {
        let (h, t) = r?;
        holograms.push(h);
        traces.push(t);
    }
    Ok(TmSet {
        holograms,
        seeds,
        traces,
        channel,
    })
}

/// Intensity `|A_n|^2` of every frame in every layer, indexed `[frame][layer]`,
/// over the full Fourier plane.
pub fn frame_intensities(
    tm: &TmSet,
    geom: &SystemGeometry,
    depths: &[f64],
    propagator: &Propagator,
) -> Result<Vec<Vec<Array2<f64>>>> {
    tm.holograms
        .par_iter()
        .map(|b| {
            let amps = crate::optimizer::reconstruct_stack(b, geom, depths, propagator)?;
            Ok(amps.into_iter().map(|a| a.mapv(|v| v * v)).collect())
        })
        .collect()
}

/// Mean of equally shaped arrays, summed in a fixed pairwise tree.
pub fn mean_intensity(frames: &[&Array2<f64>]) -> Result<Array2<f64>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Config("nothing to accumulate".into()))?;
    if let Some(bad) = frames.iter().find(|f| f.dim() != first.dim()) {
        return Err(Error::shape(first.dim(), bad.dim()));
    }
    Ok(tree_sum(frames) / frames.len() as f64)
}

fn tree_sum(frames: &[&Array2<f64>]) -> Array2<f64> {
    match frames {
        [one] => (*one).clone(),
        _ => {
            let (left, right) = frames.split_at(frames.len() / 2);
            tree_sum(left) + tree_sum(right)
        }
    }
}

/// Perceived intensity per layer: the mean over all frames of `|A_n|^2`.
pub fn accumulate(
    tm: &TmSet,
    geom: &SystemGeometry,
    depths: &[f64],
    propagator: &Propagator,
) -> Result<Vec<IntensityImage>> {
    if tm.is_empty() {
        return Err(Error::Config("empty multiplexing set".into()));
    }
    let per_frame = frame_intensities(tm, geom, depths, propagator)?;
    accumulate_prefix(&per_frame, tm.len())
}

/// Mean over the first `m` frames of precomputed per-frame intensities.
pub fn accumulate_prefix(per_frame: &[Vec<Array2<f64>>], m: usize) -> Result<Vec<IntensityImage>> {
    if m == 0 || m > per_frame.len() {
        return Err(Error::Config(format!(
            "cannot average {m} of {} frames",
            per_frame.len()
        )));
    }
    let layers = per_frame[0].len();
    (0..layers)
        .map(|n| {
            let frames: Vec<&Array2<f64>> = per_frame[..m].iter().map(|f| &f[n]).collect();
            Ok(IntensityImage::from_parts(mean_intensity(&frames)?, ColorSpace::Linear))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::IntensityImage;
    use crate::geometry::PROTOTYPE_WAVELENGTHS;
    use crate::optimizer::optimize_bsgd;
    use crate::propagation::default_propagator;
    use crate::target::multiplane_to_target;

    fn problem() -> (crate::target::TargetStack, SystemGeometry) {
        let geom = SystemGeometry::new(24, 24, 8.2e-6, 8.2e-6, 0.05, PROTOTYPE_WAVELENGTHS).unwrap();
        let img = IntensityImage::linear(Array2::from_shape_fn((8, 12), |(r, c)| {
            0.2 + ((r + c) % 3) as f64 * 0.3
        }))
        .unwrap();
        (multiplane_to_target(&[img], 0.01, Channel::Green).unwrap(), geom)
    }

    #[test]
    fn seeds_are_distinct_and_reproducible() {
        let seeds: Vec<u64> = (0..24).map(|m| frame_seed(7, Channel::Red, m)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 24);
        assert_eq!(seeds[3], frame_seed(7, Channel::Red, 3));
        assert_ne!(frame_seed(7, Channel::Red, 3), frame_seed(7, Channel::Blue, 3));
    }

    #[test]
    fn single_frame_matches_direct_call() {
        let (stack, geom) = problem();
        let objective = Objective::new(&stack, &geom).unwrap();
        let cfg = OptConfig {
            iterations: 5,
            seed: 3,
            ..OptConfig::default()
        };
        let tm = build_tm_set(&objective, &cfg, 1, Some(1)).unwrap();
        let direct = optimize_bsgd(
            &stack,
            &geom,
            &OptConfig {
                seed: frame_seed(3, Channel::Green, 0),
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(tm.holograms[0], direct.0);
        assert_eq!(tm.traces[0].losses, direct.1.losses);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let (stack, geom) = problem();
        let objective = Objective::new(&stack, &geom).unwrap();
        let cfg = OptConfig {
            iterations: 3,
            seed: 11,
            ..OptConfig::default()
        };
        let a = build_tm_set(&objective, &cfg, 4, Some(1)).unwrap();
        let b = build_tm_set(&objective, &cfg, 4, Some(3)).unwrap();
        assert_eq!(a.holograms, b.holograms);
        assert_eq!(a.seeds, b.seeds);
    }

    #[test]
    fn accumulation_is_the_frame_mean() {
        let (stack, geom) = problem();
        let objective = Objective::new(&stack, &geom).unwrap();
        let cfg = OptConfig {
            method: Method::Random,
            seed: 5,
            ..OptConfig::default()
        };
        let tm = build_tm_set(&objective, &cfg, 5, None).unwrap();
        let prop = default_propagator();
        let per_frame = frame_intensities(&tm, &geom, &[0.0], prop).unwrap();
        let acc = accumulate(&tm, &geom, &[0.0], prop).unwrap();
        let mut naive = Array2::<f64>::zeros(geom.shape());
        for f in &per_frame {
            naive += &f[0];
        }
        naive /= 5.0;
        for (x, y) in acc[0].data().iter().zip(&naive) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300));
        }
        let one = accumulate_prefix(&per_frame, 1).unwrap();
        assert_eq!(one[0].data(), &per_frame[0][0]);
        assert!(accumulate_prefix(&per_frame, 0).is_err());
        assert!(accumulate_prefix(&per_frame, 6).is_err());
    }

    #[test]
    fn zero_frames_is_rejected() {
        let (stack, geom) = problem();
        let objective = Objective::new(&stack, &geom).unwrap();
        assert!(build_tm_set(&objective, &OptConfig::default(), 0, None).is_err());
    }
}
