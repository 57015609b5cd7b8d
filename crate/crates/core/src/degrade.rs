//! Artifact operators over a [`CartesianStream`]: delay, reduced frame rate,
//! occlusion and Gaussian position noise.
//!
//! Every operator keeps the stream length, the `framerate` field and the
//! timestamp sequence; only payloads change. At neutral parameters each
//! operator returns its input unchanged, bit for bit.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{derive_subseed, frame_rng};
use crate::sensor_sim::{CartesianSample, CartesianStream};

/// Sub-seed tag of the occlusion operator inside [`compose`].
pub const OCCLUSION_SEED_TAG: u64 = 1;
/// Sub-seed tag of the noise operator inside [`compose`].
pub const NOISE_SEED_TAG: u64 = 2;

/// One point of the artifact grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationConfig {
    #[serde(default)]
    pub delay_frames: usize,
    #[serde(default = "one")]
    pub fps_ratio: usize,
    #[serde(default)]
    pub noise_std_m: f64,
    #[serde(default)]
    pub occlusion_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl Default for DegradationConfig {
    fn default() -> Self {
        Self { delay_frames: 0, fps_ratio: 1, noise_std_m: 0.0, occlusion_prob: 0.0, seed: 0 }
    }
}

impl DegradationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fps_ratio < 1 {
            return Err(Error::Parameter("fps_ratio must be at least 1".into()));
        }
        if !(self.noise_std_m.is_finite() && self.noise_std_m >= 0.0) {
            return Err(Error::Parameter(format!("noise_std_m must be >= 0, got {}", self.noise_std_m)));
        }
        if !(0.0..=1.0).contains(&self.occlusion_prob) {
            return Err(Error::Parameter(format!("occlusion_prob must be in [0, 1], got {}", self.occlusion_prob)));
        }
        Ok(())
    }

    /// True when no operator changes the stream.
    pub fn is_neutral(&self) -> bool {
        self.delay_frames == 0 && self.fps_ratio == 1 && self.noise_std_m == 0.0 && self.occlusion_prob == 0.0
    }

    /// True when the output does not depend on `seed`.
    pub fn is_deterministic(&self) -> bool {
        self.noise_std_m == 0.0 && self.occlusion_prob == 0.0
    }

    pub fn occlusion_seed(&self) -> u64 {
        derive_subseed(self.seed, OCCLUSION_SEED_TAG)
    }

    pub fn noise_seed(&self) -> u64 {
        derive_subseed(self.seed, NOISE_SEED_TAG)
    }
}

fn with_payloads(stream: &CartesianStream, source: impl Fn(usize) -> usize) -> CartesianStream {
    let samples = stream
        .samples
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let src = &stream.samples[source(t)];
            CartesianSample { timestamp: s.timestamp, positions: src.positions.clone(), valid: src.valid.clone() }
        })
        .collect();
    CartesianStream { framerate: stream.framerate, samples }
}

/// Frame `t` carries the payload of input frame `max(t - d, 0)`.
pub fn apply_delay(stream: &CartesianStream, delay_frames: usize) -> CartesianStream {
    if delay_frames == 0 {
        return stream.clone();
    }
    with_payloads(stream, |t| t.saturating_sub(delay_frames))
}

/// Zero-order hold: frame `t` carries input frame `floor(t / r) * r`.
pub fn apply_framerate_ratio(stream: &CartesianStream, fps_ratio: usize) -> Result<CartesianStream> {
    if fps_ratio == 0 {
        return Err(Error::Parameter("fps_ratio must be at least 1".into()));
    }
    if fps_ratio == 1 {
        return Ok(stream.clone());
    }
    Ok(with_payloads(stream, |t| (t / fps_ratio) * fps_ratio))
}

/// Each joint of each frame is independently zeroed and flagged invalid
/// with probability `occlusion_prob`.
pub fn apply_occlusion(stream: &CartesianStream, occlusion_prob: f64, seed: u64) -> Result<CartesianStream> {
    if !(0.0..=1.0).contains(&occlusion_prob) {
        return Err(Error::Parameter(format!("occlusion probability must be in [0, 1], got {occlusion_prob}")));
    }
    let mut out = stream.clone();
    if occlusion_prob == 0.0 {
        return Ok(out);
    }
    for (t, sample) in out.samples.iter_mut().enumerate() {
        let mut rng = frame_rng(seed, t);
        for j in 0..sample.positions.len() {
            if rng.random::<f64>() < occlusion_prob {
                sample.invalidate(j);
            }
        }
    }
    Ok(out)
}

/// Adds independent `N(0, σ²)` noise to every coordinate of every valid
/// joint. Invalid joints stay at zero (their variates are still drawn, so
/// the noise on a joint does not depend on other joints' validity).
pub fn apply_noise(stream: &CartesianStream, noise_std_m: f64, seed: u64) -> Result<CartesianStream> {
    if !(noise_std_m.is_finite() && noise_std_m >= 0.0) {
        return Err(Error::Parameter(format!("noise standard deviation must be >= 0, got {noise_std_m}")));
    }
    let mut out = stream.clone();
    if noise_std_m == 0.0 {
        return Ok(out);
    }
    for (t, sample) in out.samples.iter_mut().enumerate() {
        let mut rng = frame_rng(seed, t);
        for (p, valid) in sample.positions.iter_mut().zip(&sample.valid) {
            let n: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
            if *valid {
                p.x += noise_std_m * n[0];
                p.y += noise_std_m * n[1];
                p.z += noise_std_m * n[2];
            }
        }
    }
    Ok(out)
}

/// Applies every artifact in the fixed order
/// framerate → delay → occlusion → noise, with per-operator sub-seeds
/// [`DegradationConfig::occlusion_seed`] and [`DegradationConfig::noise_seed`].
pub fn compose(stream: &CartesianStream, config: &DegradationConfig) -> Result<CartesianStream> {
    config.validate()?;
    let s = apply_framerate_ratio(stream, config.fps_ratio)?;
    let s = apply_delay(&s, config.delay_frames);
    let s = apply_occlusion(&s, config.occlusion_prob, config.occlusion_seed())?;
    apply_noise(&s, config.noise_std_m, config.noise_seed())
}
