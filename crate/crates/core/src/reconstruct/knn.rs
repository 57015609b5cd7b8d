//! Motion-matching baseline: distance-weighted blend of the nearest stored poses.

use serde::{Deserialize, Serialize};

use super::features::{FeatureLayout, Standardizer, TrainingSet};
use super::{Prediction, Reconstructor};
use crate::error::{Error, Result};
use crate::skeleton::{MotionClip, Pose, Rotation, Vec3};
use crate::sync::FusedFrame;

/// Added to distances before inverting them into blend weights.
pub const WEIGHT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnConfig {
    pub k: usize,
    pub layout: FeatureLayout,
    /// Keep every n-th training frame.
    pub frame_step: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 3, layout: FeatureLayout::default(), frame_step: 1 }
    }
}

/// Standardized feature database with its poses.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub standardizer: Standardizer,
    pub features: Vec<Vec<f64>>,
    pub poses: Vec<Pose>,
    pub k: usize,
}

impl KnnModel {
    /// `k` above the database size is clamped with a warning.
    pub fn build(set: &TrainingSet, k: usize) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Structure("kNN database needs at least one entry".into()));
        }
        if k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        let k = if k > set.len() {
            log::warn!("k = {k} exceeds the {} database entries; using k = {}", set.len(), set.len());
            set.len()
        } else {
            k
        };
        let standardizer = Standardizer::fit(&set.features);
        let features = set.features.iter().map(|f| standardizer.apply(f)).collect();
        Ok(Self { standardizer, features, poses: set.poses.clone(), k })
    }

    /// The `k` nearest entries as `(distance, index)`, closest first; ties go
    /// to the lower index.
    pub fn neighbors(&self, query: &[f64]) -> Result<Vec<(f64, usize)>> {
        let d = self.standardizer.mean.len();
        if query.len() != d {
            return Err(Error::Structure(format!("query has {} features, database has {d}", query.len())));
        }
        let q = self.standardizer.apply(query);
        let mut dist: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_key);
            dist.truncate(self.k);
        }
        dist.sort_by(by_key);
        Ok(dist)
    }

    pub fn query(&self, query: &[f64]) -> Result<Pose> {
        let nn = self.neighbors(query)?;
        Ok(blend(&nn, &self.poses))
    }
}

/// Inverse-distance blend of `poses[i]` for each `(distance, i)`, closest
/// first. An exact match, or a single neighbor, returns that pose verbatim.
pub fn blend(neighbors: &[(f64, usize)], poses: &[Pose]) -> Pose {
    let (d0, i0) = neighbors[0];
    if neighbors.len() == 1 || d0 == 0.0 {
        return poses[i0].clone();
    }
    let weights: Vec<f64> = neighbors.iter().map(|(d, _)| 1.0 / (d + WEIGHT_EPSILON)).collect();
    let total: f64 = weights.iter().sum();
    let reference = &poses[i0];
    let joints = reference.local_rotations.len();
    let mut root = Vec3::zeros();
    let mut acc = vec![[0.0f64; 4]; joints];
    for ((_, i), w) in neighbors.iter().zip(&weights) {
        let w = w / total;
        let pose = &poses[*i];
        root += pose.root_translation * w;
        for (j, q) in pose.local_rotations.iter().enumerate() {
            let sign = if q.dot(&reference.local_rotations[j]) < 0.0 { -w } else { w };
            for (a, c) in acc[j].iter_mut().zip(q.wxyz()) {
                *a += sign * c;
            }
        }
    }
    let local_rotations = acc
        .iter()
        .zip(&reference.local_rotations)
        .map(|(a, r)| Rotation::normalized(a[0], a[1], a[2], a[3]).unwrap_or(*r))
        .collect();
    Pose { root_translation: root, local_rotations }
}

#[derive(Debug, Clone)]
pub struct KnnReconstructor {
    config: KnnConfig,
    model: Option<KnnModel>,
}

impl KnnReconstructor {
    pub fn new(config: KnnConfig) -> Result<Self> {
        config.layout.validate()?;
        if config.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        Ok(Self { config, model: None })
    }

    pub fn model(&self) -> Option<&KnnModel> {
        self.model.as_ref()
    }
}

impl Reconstructor for KnnReconstructor {
    fn name(&self) -> &'static str {
        "knn"
    }

    fn window_length(&self) -> usize {
        self.config.layout.window_length
    }

    fn fit(&mut self, clips: &[MotionClip]) -> Result<()> {
        let set = TrainingSet::from_clips(clips, &self.config.layout, self.config.frame_step)?;
        self.model = Some(KnnModel::build(&set, self.config.k)?);
        Ok(())
    }

    fn predict(&self, window: &[&FusedFrame], _previous: Option<&Pose>) -> Result<Prediction> {
        let model = self.model.as_ref().ok_or_else(|| Error::Structure("kNN reconstructor used before fit".into()))?;
        let pose = model.query(&self.config.layout.encode(window)?)?;
        Ok(Prediction { pose, held: false })
    }
}
