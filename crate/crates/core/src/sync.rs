//! Fusing the headset stream (master clock) with the Cartesian stream.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sensor_sim::{CartesianStream, SparseSample, SparseStream};
use crate::skeleton::Vec3;

/// Slack when comparing timestamps, absorbing `t / fps` rounding.
pub const ALIGN_EPSILON_S: f64 = 1e-9;

/// 40 past frames plus the current one.
pub const WINDOW_LENGTH: usize = 41;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CartesianPayload {
    pub positions: Vec<Vec3>,
    pub valid: Vec<bool>,
    pub source_timestamp: f64,
    /// Index of the Cartesian sample this payload came from.
    pub source_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedFrame {
    pub timestamp: f64,
    pub sparse: SparseSample,
    pub cartesian: CartesianPayload,
    /// The frame precedes every Cartesian sample and borrows the first one.
    pub stale: bool,
}

impl FusedFrame {
    /// `timestamp - source_timestamp`; negative only for `stale` frames.
    pub fn staleness(&self) -> f64 {
        self.timestamp - self.cartesian.source_timestamp
    }
}

/// Latest-available alignment: each headset sample is paired with the most
/// recent Cartesian sample whose timestamp is not later than its own.
pub fn align(sparse: &SparseStream, cartesian: &CartesianStream) -> Result<Vec<FusedFrame>> {
    if sparse.is_empty() || cartesian.is_empty() {
        return Err(Error::Structure(format!(
            "cannot align empty streams ({} headset samples, {} Cartesian samples)",
            sparse.len(),
            cartesian.len()
        )));
    }
    if cartesian.samples.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::Structure("Cartesian timestamps must be nondecreasing".into()));
    }
    let mut next = 0;
    let mut frames = Vec::with_capacity(sparse.len());
    for s in &sparse.samples {
        while next < cartesian.len() && cartesian.samples[next].timestamp <= s.timestamp + ALIGN_EPSILON_S {
            next += 1;
        }
        let (index, stale) = if next == 0 { (0, true) } else { (next - 1, false) };
        let c = &cartesian.samples[index];
        frames.push(FusedFrame {
            timestamp: s.timestamp,
            sparse: s.clone(),
            cartesian: CartesianPayload {
                positions: c.positions.clone(),
                valid: c.valid.clone(),
                source_timestamp: c.timestamp,
                source_index: index,
            },
            stale,
        });
    }
    Ok(frames)
}

/// Frame indices of the window ending at `t`; indices below zero clamp to 0.
pub fn window_indices(t: usize, length: usize) -> Vec<usize> {
    (0..length).map(|i| (t + i + 1).saturating_sub(length)).collect()
}

/// The `length` frames ending at `t`, left-padded with frame 0.
pub fn window(frames: &[FusedFrame], t: usize, length: usize) -> Vec<&FusedFrame> {
    window_indices(t, length).into_iter().map(|i| &frames[i]).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StalenessStats {
    pub mean_s: f64,
    pub max_s: f64,
    pub stale_frames: usize,
}

pub fn staleness_stats(frames: &[FusedFrame]) -> StalenessStats {
    if frames.is_empty() {
        return StalenessStats::default();
    }
    let sum: f64 = frames.iter().map(FusedFrame::staleness).sum();
    StalenessStats {
        mean_s: sum / frames.len() as f64,
        max_s: frames.iter().map(FusedFrame::staleness).fold(f64::NEG_INFINITY, f64::max),
        stale_frames: frames.iter().filter(|f| f.stale).count(),
    }
}
