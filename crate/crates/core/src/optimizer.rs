//! Binary hologram optimisation.
//!
//! The forward model maps a hologram `b` in `{-1, +1}` to one amplitude
//! per target layer:
//!
//! ```text
//! V   = sideband(fftshift(fft2(b)))
//! U_n = propagate(V, z_n)
//! A_n = |U_n|
//! ```
//!
//! B-SGD keeps a continuous hologram `h`, binarises it with `sign` on the
//! way forward and passes gradients back through the hard-tanh
//! straight-through estimator. The loss is the per-layer mean squared
//! error between the energy-matched amplitude `e_n A_n` and `sqrt(I_n)`,
//! summed over layers, with `e_n` held constant within an iteration.

use std::time::Instant;

use ndarray::{Array2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{
    binarize_forward, sideband_filter_inplace, ste_backward, AmplitudeHologram, BinaryForm, BinaryHologram,
};
use crate::error::{Error, Result};
use crate::fft::{fft2_inplace, fftshift, ifft2_inplace, ifftshift};
use crate::geometry::{Channel, SystemGeometry};
use crate::propagation::{default_propagator, Propagator};
use crate::rng::{derive_seed, random_phase};
use crate::target::TargetStack;
use crate::C64;

/// Guard in the derivative of `|u|`.
pub const AMPLITUDE_EPS: f64 = 1e-12;

/// Default learning rate, from [`tune_learning_rate`] on the bundled
/// regression targets.
pub const DEFAULT_LEARNING_RATE: f64 = 1.0e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Bsgd,
    Gs,
    Random,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Bsgd => "bsgd",
            Method::Gs => "gs",
            Method::Random => "random",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bsgd" => Ok(Method::Bsgd),
            "gs" => Ok(Method::Gs),
            "random" => Ok(Method::Random),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    #[serde(default)]
    pub loss: Loss,
    #[serde(default)]
    pub method: Method,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            iterations: 200,
            seed: 0,
            loss: Loss::Mse,
            method: Method::Bsgd,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    /// Loss of the binary hologram entering each iteration.
    pub losses: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_layer_losses: Vec<f64>,
    /// Seconds.
    pub wall_time: f64,
}

/// Forward model and loss for one target stack on one geometry.
pub struct Objective<'a> {
    geom: SystemGeometry,
    channel: Channel,
    wavelength: f64,
    pitch: (f64, f64),
    depths: Vec<f64>,
    sqrt_targets: Vec<Array2<f64>>,
    target_energy: Vec<f64>,
    propagator: &'a Propagator,
}

/// Per-layer values of one forward pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub fields: Vec<Array2<C64>>,
    pub scales: Vec<f64>,
    pub layer_losses: Vec<f64>,
}

impl Evaluation {
    pub fn loss(&self) -> f64 {
        self.layer_losses.iter().sum()
    }
}

impl<'a> Objective<'a> {
    pub fn new(targets: &TargetStack, geom: &SystemGeometry) -> Result<Objective<'static>> {
        Objective::with_propagator(targets, geom, default_propagator())
    }

    pub fn with_propagator(targets: &TargetStack, geom: &SystemGeometry, propagator: &'a Propagator) -> Result<Self> {
        geom.validate()?;
        let (rows, cols) = targets.shape();
        let window = geom.image_window().centered(rows, cols)?;
        let mut sqrt_targets = Vec::with_capacity(targets.len());
        let mut target_energy = Vec::with_capacity(targets.len());
        for (n, layer) in targets.layers().iter().enumerate() {
            let energy = layer.intensity.energy();
            if energy <= 0.0 {
                return Err(Error::ZeroEnergy(format!("target layer {n} is all zero")));
            }
            let full = window.embed(layer.intensity.data().view(), geom.shape())?;
            sqrt_targets.push(full.mapv(f64::sqrt));
            target_energy.push(energy);
        }
        Ok(Objective {
            geom: geom.clone(),
            channel: targets.channel,
            wavelength: geom.wavelength(targets.channel),
            pitch: geom.fourier_pitch(targets.channel),
            depths: targets.depths(),
            sqrt_targets,
            target_energy,
            propagator,
        })
    }

    pub fn geometry(&self) -> &SystemGeometry {
        &self.geom
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn layers(&self) -> usize {
        self.depths.len()
    }

    fn pixels(&self) -> f64 {
        let (ny, nx) = self.geom.shape();
        (ny * nx) as f64
    }

    /// Complex field in every layer for a real hologram (any real values,
    /// not only `{-1, +1}`).
    pub fn fields(&self, b: &Array2<f64>) -> Result<Vec<Array2<C64>>> {
        if b.dim() != self.geom.shape() {
            return Err(Error::shape(self.geom.shape(), b.dim()));
        }
        let spectrum = filtered_spectrum(b);
        Ok(self
            .depths
            .par_iter()
            .map(|&z| {
                self.propagator
                    .propagate_array(&spectrum, self.pitch, self.wavelength, z, false)
            })
            .collect())
    }

    /// Forward pass with the scales `e_n` computed from the fields.
    pub fn evaluate(&self, b: &Array2<f64>) -> Result<Evaluation> {
        let fields = self.fields(b)?;
        let scales = fields
            .iter()
            .zip(&self.target_energy)
            .map(|(u, &t)| energy_scale_sums(u.iter().map(C64::norm_sqr).sum(), t))
            .collect::<Result<Vec<f64>>>()?;
        let layer_losses = self.layer_losses(&fields, &scales);
        Ok(Evaluation {
            fields,
            scales,
            layer_losses,
        })
    }

    /// Loss of `b` with the scales held at `scales`.
    pub fn loss_with_scales(&self, b: &Array2<f64>, scales: &[f64]) -> Result<f64> {
        let fields = self.fields(b)?;
        Ok(self.layer_losses(&fields, scales).iter().sum())
    }

    fn layer_losses(&self, fields: &[Array2<C64>], scales: &[f64]) -> Vec<f64> {
        let p = self.pixels();
        fields
            .iter()
            .zip(scales)
            .zip(&self.sqrt_targets)
            .map(|((u, &e), s)| {
                let mut acc = 0.0;
                Zip::from(u).and(s).for_each(|u, &s| {
                    let d = e * u.norm() - s;
                    acc += d * d;
                });
                acc / p
            })
            .collect()
    }

    /// Gradient of the loss with respect to a real hologram `b`, scales
    /// held constant.
    pub fn gradient(&self, eval: &Evaluation) -> Array2<f64> {
        let p = self.pixels();
        let per_layer: Vec<Array2<C64>> = eval
            .fields
            .par_iter()
            .zip(eval.scales.par_iter())
            .zip(self.sqrt_targets.par_iter())
            .zip(self.depths.par_iter())
            .map(|(((u, &e), s), &z)| {
                let mut g = Array2::<C64>::zeros(u.dim());
                Zip::from(&mut g).and(u).and(s).for_each(|g, &u, &s| {
                    let a = u.norm();
                    let dl_da = 2.0 * e * (e * a - s) / p;
                    *g = u * (dl_da / (a + AMPLITUDE_EPS));
                });
                self.propagator
                    .propagate_array(&g, self.pitch, self.wavelength, z, true)
            })
            .collect();
        let mut total = Array2::<C64>::zeros(self.geom.shape());
        for g in &per_layer {
            total += g;
        }
        sideband_filter_inplace(&mut total);
        let mut spatial = ifftshift(&total);
        ifft2_inplace(&mut spatial);
        spatial.mapv(|v| v.re)
    }

    /// Amplitude stack `A_n` for a binary hologram.
    pub fn amplitudes(&self, b: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        Ok(self.fields(b)?.iter().map(|u| u.mapv(C64::norm)).collect())
    }

    /// Superposition of back-propagated target amplitudes with random
    /// phase, single-sideband encoded. Phases of layer `n` come from
    /// `derive_seed([seed, n])`.
    pub fn initial_hologram(&self, seed: u64) -> AmplitudeHologram {
        let shape = self.geom.shape();
        let back: Vec<Array2<C64>> = self
            .sqrt_targets
            .par_iter()
            .zip(self.depths.par_iter())
            .enumerate()
            .map(|(n, (s, &z))| {
                let phase = random_phase(shape, derive_seed(&[seed, n as u64]));
                let mut field = Array2::<C64>::zeros(shape);
                Zip::from(&mut field)
                    .and(s)
                    .and(&phase)
                    .for_each(|f, &a, &p| *f = C64::from_polar(a, p));
                self.propagator
                    .propagate_array(&field, self.pitch, self.wavelength, -z, false)
            })
            .collect();
        let grid = encode_superposition(&back, shape);
        AmplitudeHologram {
            grid,
            carrier: crate::encoding::carrier(&self.geom),
            seed,
            channel: self.channel,
        }
    }

    /// One Gerchberg-Saxton style update: impose the target amplitudes,
    /// back-propagate, superpose and re-encode.
    pub fn gs_update(&self, b: &Array2<f64>) -> Result<Array2<f64>> {
        let fields = self.fields(b)?;
        let back: Vec<Array2<C64>> = fields
            .par_iter()
            .zip(self.sqrt_targets.par_iter())
            .zip(self.depths.par_iter())
            .map(|((u, s), &z)| {
                let mut imposed = Array2::<C64>::zeros(u.dim());
                Zip::from(&mut imposed).and(u).and(s).for_each(|v, &u, &s| {
                    let a = u.norm();
                    *v = if a > 0.0 { u * (s / a) } else { C64::new(s, 0.0) };
                });
                self.propagator
                    .propagate_array(&imposed, self.pitch, self.wavelength, z, true)
            })
            .collect();
        Ok(encode_superposition(&back, self.geom.shape()).mapv(crate::encoding::sign))
    }
}

/// `sideband(fftshift(fft2(b)))`.
fn filtered_spectrum(b: &Array2<f64>) -> Array2<C64> {
    let mut spectrum = b.mapv(|v| C64::new(v, 0.0));
    fft2_inplace(&mut spectrum);
    let mut spectrum = fftshift(&spectrum);
    sideband_filter_inplace(&mut spectrum);
    spectrum
}

/// Sum of Fourier-plane fields, sideband filtered and brought back to the
/// SLM plane as a real amplitude normalised to RMS 1/3.
fn encode_superposition(fields: &[Array2<C64>], shape: (usize, usize)) -> Array2<f64> {
    let mut total = Array2::<C64>::zeros(shape);
    for f in fields {
        total += f;
    }
    sideband_filter_inplace(&mut total);
    let mut spatial = ifftshift(&total);
    ifft2_inplace(&mut spatial);
    let real = spatial.mapv(|v| v.re);
    let rms = (real.iter().map(|v| v * v).sum::<f64>() / real.len() as f64).sqrt();
    if rms > 0.0 {
        real / (3.0 * rms)
    } else {
        real
    }
}

fn energy_scale_sums(reconstruction: f64, target: f64) -> Result<f64> {
    if reconstruction <= 0.0 {
        return Err(Error::ZeroEnergy("reconstruction has no energy".into()));
    }
    Ok((target / reconstruction).sqrt())
}

/// `e = sqrt(sum I / sum A^2)`.
pub fn energy_scale(amplitude: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if amplitude.dim() != target.dim() {
        return Err(Error::shape(target.dim(), amplitude.dim()));
    }
    let t: f64 = target.sum();
    if t <= 0.0 {
        return Err(Error::ZeroEnergy("target has no energy".into()));
    }
    energy_scale_sums(amplitude.iter().map(|a| a * a).sum(), t)
}

/// `sum_n mean_x (e_n A_n - sqrt(I_n))^2` with `e_n` from [`energy_scale`].
pub fn total_loss(amplitudes: &[Array2<f64>], targets: &[Array2<f64>]) -> Result<f64> {
    if amplitudes.len() != targets.len() {
        return Err(Error::Config(format!(
            "{} reconstructed layers for {} targets",
            amplitudes.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (a, t) in amplitudes.iter().zip(targets) {
        let e = energy_scale(a, t)?;
        let mut acc = 0.0;
        Zip::from(a).and(t).for_each(|&a, &t| {
            let d = e * a - t.sqrt();
            acc += d * d;
        });
        total += acc / a.len() as f64;
    }
    Ok(total)
}

/// Amplitude stack of a hologram at `depths`. Device-form holograms are
/// converted to `{-1, +1}` first.
pub fn reconstruct_stack(
    b: &BinaryHologram,
    geom: &SystemGeometry,
    depths: &[f64],
    propagator: &Propagator,
) -> Result<Vec<Array2<f64>>> {
    if b.shape() != geom.shape() {
        return Err(Error::shape(geom.shape(), b.shape()));
    }
    Ok(
        reconstruct_fields(&b.signed_values(), geom, b.channel, depths, propagator)
            .iter()
            .map(|u| u.mapv(C64::norm))
            .collect(),
    )
}

/// Complex Fourier-plane fields of an arbitrary real hologram at `depths`.
pub fn reconstruct_fields(
    values: &Array2<f64>,
    geom: &SystemGeometry,
    channel: Channel,
    depths: &[f64],
    propagator: &Propagator,
) -> Vec<Array2<C64>> {
    let spectrum = filtered_spectrum(values);
    let pitch = geom.fourier_pitch(channel);
    let wavelength = geom.wavelength(channel);
    depths
        .par_iter()
        .map(|&z| propagator.propagate_array(&spectrum, pitch, wavelength, z, false))
        .collect()
}

/// `h - alpha * dL/dh`, with the gradient through `b = sign(h)` taken by
/// the straight-through estimator. `iteration` labels a non-finite abort.
pub fn bsgd_step(
    objective: &Objective,
    h: &Array2<f64>,
    eval: &Evaluation,
    learning_rate: f64,
    iteration: usize,
) -> Result<Array2<f64>> {
    let grad_b = objective.gradient(eval);
    let grad_h = ste_backward(h, &grad_b)?;
    if grad_h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration });
    }
    Ok(h - &(grad_h * learning_rate))
}

fn signed(h: &Array2<f64>) -> Array2<f64> {
    h.mapv(crate::encoding::sign)
}

fn to_binary(b: &Array2<f64>, seed: u64, channel: Channel) -> Result<BinaryHologram> {
    BinaryHologram::new(
        b.mapv(|v| if v >= 0.0 { 1 } else { -1 }),
        BinaryForm::Signed,
        seed,
        channel,
    )
}

/// Runs the configured method.
pub fn optimize(targets: &TargetStack, geom: &SystemGeometry, cfg: &OptConfig) -> Result<(BinaryHologram, LossTrace)> {
    match cfg.method {
        Method::Bsgd => optimize_bsgd(targets, geom, cfg),
        Method::Gs => optimize_gs(targets, geom, cfg),
        Method::Random => {
            let start = Instant::now();
            let objective = Objective::new(targets, geom)?;
            let b = random_hologram_with(&objective, cfg.seed)?;
            let eval = objective.evaluate(&b.signed_values())?;
            let loss = eval.loss();
            Ok((
                crate::encoding::to_device_form(&b)?,
                LossTrace {
                    losses: vec![loss],
                    initial_loss: loss,
                    final_loss: loss,
                    final_layer_losses: eval.layer_losses,
                    wall_time: start.elapsed().as_secs_f64(),
                },
            ))
        }
    }
}

/// B-SGD. Returns the device-form hologram after `cfg.iterations` steps.
pub fn optimize_bsgd(
    targets: &TargetStack,
    geom: &SystemGeometry,
    cfg: &OptConfig,
) -> Result<(BinaryHologram, LossTrace)> {
    let objective = Objective::new(targets, geom)?;
    optimize_bsgd_with(&objective, cfg)
}

pub fn optimize_bsgd_with(objective: &Objective, cfg: &OptConfig) -> Result<(BinaryHologram, LossTrace)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut h = objective.initial_hologram(cfg.seed).grid;
    let mut losses = Vec::with_capacity(cfg.iterations);
    for k in 0..cfg.iterations {
        let eval = objective.evaluate(&signed(&h))?;
        let loss = eval.loss();
        if !loss.is_finite() {
            return Err(Error::NonFinite { iteration: k });
        }
        losses.push(loss);
        h = bsgd_step(objective, &h, &eval, cfg.learning_rate, k)?;
        log::trace!("bsgd iteration {k}: loss {loss:.6e}");
    }
    let b = signed(&h);
    let eval = objective.evaluate(&b)?;
    let trace = LossTrace {
        initial_loss: losses[0],
        final_loss: eval.loss(),
        final_layer_losses: eval.layer_losses,
        losses,
        wall_time: start.elapsed().as_secs_f64(),
    };
    let hologram = to_binary(&b, cfg.seed, objective.channel())?;
    Ok((crate::encoding::to_device_form(&hologram)?, trace))
}

/// Gerchberg-Saxton baseline from the same initialisation as B-SGD.
pub fn optimize_gs(
    targets: &TargetStack,
    geom: &SystemGeometry,
    cfg: &OptConfig,
) -> Result<(BinaryHologram, LossTrace)> {
    let objective = Objective::new(targets, geom)?;
    optimize_gs_with(&objective, cfg)
}

pub fn optimize_gs_with(objective: &Objective, cfg: &OptConfig) -> Result<(BinaryHologram, LossTrace)> {
    if cfg.iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    let start = Instant::now();
    let mut b = signed(&objective.initial_hologram(cfg.seed).grid);
    let mut losses = Vec::with_capacity(cfg.iterations);
    for k in 0..cfg.iterations {
        let loss = objective.evaluate(&b)?.loss();
        if !loss.is_finite() {
            return Err(Error::NonFinite { iteration: k });
        }
        losses.push(loss);
        b = objective.gs_update(&b)?;
    }
    let eval = objective.evaluate(&b)?;
    let trace = LossTrace {
        initial_loss: losses[0],
        final_loss: eval.loss(),
        final_layer_losses: eval.layer_losses,
        losses,
        wall_time: start.elapsed().as_secs_f64(),
    };
    let hologram = to_binary(&b, cfg.seed, objective.channel())?;
    Ok((crate::encoding::to_device_form(&hologram)?, trace))
}

/// Binarised initial hologram: the Random baseline (signed form).
pub fn random_hologram(targets: &TargetStack, geom: &SystemGeometry, seed: u64) -> Result<BinaryHologram> {
    random_hologram_with(&Objective::new(targets, geom)?, seed)
}

pub fn random_hologram_with(objective: &Objective, seed: u64) -> Result<BinaryHologram> {
    Ok(binarize_forward(&objective.initial_hologram(seed)))
}

/// Final B-SGD loss for every learning rate in `grid`, in grid order.
pub fn tune_learning_rate(
    targets: &TargetStack,
    geom: &SystemGeometry,
    grid: &[f64],
    iterations: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let objective = Objective::new(targets, geom)?;
    grid.iter()
        .map(|&alpha| {
            let cfg = OptConfig {
                learning_rate: alpha,
                iterations,
                seed,
                ..OptConfig::default()
            };
            optimize_bsgd_with(&objective, &cfg).map(|(_, trace)| (alpha, trace.final_loss))
        })
        .collect()
}

/// Learning rate with the lowest final loss.
pub fn best_learning_rate(results: &[(f64, f64)]) -> Option<f64> {
    results
        .iter()
        .filter(|(_, loss)| loss.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|&(alpha, _)| alpha)
}
