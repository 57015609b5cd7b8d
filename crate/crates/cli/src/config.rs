//! Experiment configuration files (JSON).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use posebench::degrade::DegradationConfig;
use posebench::metrics::BodySubset;
use posebench::reconstruct::ReconstructorSpec;
use posebench::sensor_sim::{default_rig, CameraModel, DetectorModel};
use posebench::synth::SyntheticSpec;
use serde::{Deserialize, Serialize};

/// Where the per-joint 3D positions come from before any artifact is applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CartesianSource {
    /// Forward kinematics of the ground-truth clip.
    #[default]
    GroundTruth,
    /// Two-camera projection, synthetic detection and triangulation.
    Triangulated,
}

/// Lists of artifact levels. A neutral value (0 delay, ratio 1, zero
/// probability or noise) stands for the artifact-free condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub delay_frames: Vec<usize>,
    pub fps_ratio: Vec<usize>,
    pub occlusion_prob: Vec<f64>,
    pub noise_std_m: Vec<f64>,
}

impl GridSpec {
    /// Delays 2/4/6, ratios 2/3/4, occlusion 0.01/0.05, noise 1/2/5 cm.
    pub fn standard() -> Self {
        Self {
            delay_frames: vec![2, 4, 6],
            fps_ratio: vec![2, 3, 4],
            occlusion_prob: vec![0.01, 0.05],
            noise_std_m: vec![0.01, 0.02, 0.05],
        }
    }

    /// Only the artifact-free point.
    pub fn neutral() -> Self {
        Self { delay_frames: vec![0], fps_ratio: vec![1], occlusion_prob: vec![0.0], noise_std_m: vec![0.0] }
    }
}

/// Clips used to fit learned reconstructors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSource {
    #[serde(default)]
    pub clips: Vec<String>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Clip files or glob patterns (`.bvh` or clip `.json`), relative to the
    /// config file.
    #[serde(default)]
    pub clips: Vec<String>,
    /// Seeded synthetic clips, added after the files.
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    /// Multiplier from BVH units to meters.
    #[serde(default = "default_bvh_scale")]
    pub bvh_scale: f64,
    #[serde(default)]
    pub cartesian_source: CartesianSource,
    /// Two cameras; the built-in rig when absent.
    #[serde(default)]
    pub rig: Option<[CameraModel; 2]>,
    #[serde(default)]
    pub detector: DetectorModel,
    pub grid: GridSpec,
    /// Evaluate every combination of grid levels instead of one artifact at a time.
    #[serde(default)]
    pub full_product: bool,
    #[serde(default = "default_reconstructors")]
    pub reconstructors: Vec<ReconstructorSpec>,
    #[serde(default)]
    pub training: Option<TrainingSource>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_subsets")]
    pub subsets: Vec<BodySubset>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Reference table for delta columns.
    #[serde(default)]
    pub reference: Option<PathBuf>,
    #[serde(default = "default_reference_model")]
    pub reference_model: String,
    /// Read streams written by `simulate` instead of generating them.
    #[serde(default)]
    pub reuse_simulated: bool,
}

fn default_bvh_scale() -> f64 {
    1.0
}

fn default_reconstructors() -> Vec<ReconstructorSpec> {
    vec![ReconstructorSpec::default()]
}

fn default_subsets() -> Vec<BodySubset> {
    vec![BodySubset::Up, BodySubset::Low]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("posebench_out")
}

fn default_reference_model() -> String {
    "avatarposer".into()
}

impl ExperimentConfig {
    /// A config with the given grid and seeds and defaults elsewhere.
    pub fn new(grid: GridSpec, seeds: Vec<u64>) -> Self {
        Self {
            clips: vec![],
            synthetic: None,
            bvh_scale: default_bvh_scale(),
            cartesian_source: CartesianSource::default(),
            rig: None,
            detector: DetectorModel::default(),
            grid,
            full_product: false,
            reconstructors: default_reconstructors(),
            training: None,
            seeds,
            subsets: default_subsets(),
            output_dir: default_output_dir(),
            reference: None,
            reference_model: default_reference_model(),
            reuse_simulated: false,
        }
    }

    /// Parses JSON. Errors name the offending field path.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_slice(bytes);
        let config: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("at `{path}`: {}", e.into_inner())
        })?;
        de.end().context("trailing characters after the config object")?;
        Ok(config)
    }

    pub fn rig(&self) -> [CameraModel; 2] {
        self.rig.clone().unwrap_or_else(default_rig)
    }

    /// Whether the artifact-free stream of a clip depends on the seed.
    pub fn clean_stream_is_seeded(&self) -> bool {
        self.cartesian_source == CartesianSource::Triangulated
            && (self.detector.pixel_noise_std > 0.0 || self.detector.miss_prob > 0.0)
    }

    /// Every problem found, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let g = &self.grid;
        for (name, empty) in [
            ("grid.delay_frames", g.delay_frames.is_empty()),
            ("grid.fps_ratio", g.fps_ratio.is_empty()),
            ("grid.occlusion_prob", g.occlusion_prob.is_empty()),
            ("grid.noise_std_m", g.noise_std_m.is_empty()),
        ] {
            if empty {
                out.push(format!("{name} must list at least one level"));
            }
        }
        for (i, r) in g.fps_ratio.iter().enumerate() {
            if *r == 0 {
                out.push(format!("grid.fps_ratio[{i}] must be at least 1"));
            }
        }
        for (i, p) in g.occlusion_prob.iter().enumerate() {
            if (DegradationConfig { occlusion_prob: *p, ..Default::default() }).validate().is_err() {
                out.push(format!("grid.occlusion_prob[{i}] = {p} is not a probability"));
            }
        }
        for (i, s) in g.noise_std_m.iter().enumerate() {
            if !(s.is_finite() && *s >= 0.0) {
                out.push(format!("grid.noise_std_m[{i}] = {s} must be a finite value >= 0"));
            }
        }
        if self.seeds.is_empty() {
            out.push("seeds must list at least one seed".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            out.push("seeds contain duplicates".into());
        }
        if self.clips.is_empty() && self.synthetic.is_none() {
            out.push("no input: set `clips` and/or `synthetic`".into());
        }
        if let Some(s) = &self.synthetic {
            if s.count == 0 || !(s.duration_s > 0.0) || !(s.framerate_hz > 0.0) {
                out.push("synthetic needs count >= 1 and positive duration_s and framerate_hz".into());
            }
        }
        if !(self.bvh_scale.is_finite() && self.bvh_scale > 0.0) {
            out.push(format!("bvh_scale must be positive, got {}", self.bvh_scale));
        }
        if self.reconstructors.is_empty() {
            out.push("reconstructors must list at least one entry".into());
        }
        let names: BTreeSet<&str> = self.reconstructors.iter().map(ReconstructorSpec::name).collect();
        if names.len() != self.reconstructors.len() {
            out.push("each reconstructor kind may appear once (report rows are keyed by its name)".into());
        }
        if self.reconstructors.iter().any(ReconstructorSpec::needs_training) {
            match &self.training {
                None => out.push("learned reconstructors need a `training` source".into()),
                Some(t) if t.clips.is_empty() && t.synthetic.is_none() => out.push("training source is empty".into()),
                _ => {}
            }
        }
        if self.subsets.is_empty() {
            out.push("subsets must list at least one of Up, Low, Full".into());
        }
        let d = &self.detector;
        if !(d.pixel_noise_std.is_finite() && d.pixel_noise_std >= 0.0) {
            out.push("detector.pixel_noise_std must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&d.miss_prob) {
            out.push("detector.miss_prob must be in [0, 1]".into());
        }
        if self.cartesian_source == CartesianSource::Triangulated {
            for (i, cam) in self.rig().iter().enumerate() {
                if let Err(e) = cam.validate() {
                    out.push(format!("rig[{i}]: {e}"));
                }
            }
        }
        if self.reference_model.is_empty() {
            out.push("reference_model must not be empty".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            bail!("invalid config:\n  - {}", problems.join("\n  - "))
        }
    }
}

/// Reads and validates a config file. Relative paths inside it resolve
/// against the returned directory.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, PathBuf)> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let config = ExperimentConfig::from_json(&bytes).with_context(|| format!("config {}", path.display()))?;
    config.validate()?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

/// Expands file names and glob patterns, sorted and deduplicated.
pub fn resolve_clip_paths(patterns: &[String], base: &Path) -> Result<Vec<PathBuf>> {
    let mut out = BTreeSet::new();
    for pattern in patterns {
        let full = base.join(pattern);
        let text = full.to_str().with_context(|| format!("non-UTF-8 path {}", full.display()))?;
        if text.contains(['*', '?', '[']) {
            let mut matched = false;
            for entry in glob::glob(text).with_context(|| format!("bad glob pattern `{pattern}`"))? {
                out.insert(entry?);
                matched = true;
            }
            if !matched {
                log::warn!("pattern `{pattern}` matched no files");
            }
        } else {
            out.insert(full);
        }
    }
    Ok(out.into_iter().collect())
}
