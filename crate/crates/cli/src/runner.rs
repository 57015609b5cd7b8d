//! The `simulate` and `sweep` pipelines.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use posebench::degrade::compose;
use posebench::metrics::{build_report, MeasuredRow, MetricsReport, ReportMetadata};
use posebench::metrics::{accumulate_clip, MetricAccumulator, RotationFrame};
use posebench::mocap_io::{load_clip_json, load_reference_table, parse_bvh_with, BvhOptions};
use posebench::reconstruct::{reconstruct_clip, Reconstructor, ReconstructorSpec};
use posebench::seeding::derive_subseed;
use posebench::sensor_sim::{derive_sparse_stream, triangulated_stream, CartesianStream, SparseStream};
use posebench::skeleton::MotionClip;
use posebench::sync::align;
use posebench::synth::synthesize_corpus;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{resolve_clip_paths, CartesianSource, ExperimentConfig};
use crate::grid::{expand, GridPoint};

/// Sub-seed tags below the per-clip seed.
const DEGRADATION_TAG: u64 = 0xD;
const DETECTOR_TAG: u64 = 0xC;

pub const SIMULATE_DIR: &str = "simulate";

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
    /// Overrides the config's output directory.
    pub output_dir: Option<PathBuf>,
    /// Overrides the config's reference table.
    pub reference: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1, output_dir: None, reference: None }
    }
}

/// Something that went wrong without stopping the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub item: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub origin: String,
    /// Absent for generated clips.
    pub sha256: Option<String>,
}

#[derive(Debug, Clone)]
pub struct InputClip {
    pub clip: MotionClip,
    pub digest: InputDigest,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub cartesian_source: CartesianSource,
    pub full_product: bool,
    pub reconstructors: Vec<ReconstructorSpec>,
    pub grid_points: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub training_inputs: Vec<InputDigest>,
    pub reference: Option<InputDigest>,
    /// File name → SHA-256 of what this run wrote.
    pub outputs: BTreeMap<String, String>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
    /// Only for sweeps.
    pub report: Option<MetricsReport>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.manifest.failures.is_empty()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Seed of one clip under one run seed. Keyed by clip name so adding or
/// removing other clips leaves it unchanged.
pub fn clip_seed(seed: u64, clip_name: &str) -> u64 {
    let h = Sha256::digest(clip_name.as_bytes());
    derive_subseed(seed, u64::from_le_bytes(h[..8].try_into().expect("8 bytes")))
}

fn load_clip_file(path: &Path, bvh_scale: f64) -> Result<InputClip> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let clip = match ext.as_deref() {
        Some("bvh") => {
            let text = std::str::from_utf8(&bytes).context("BVH file is not UTF-8")?;
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("clip");
            parse_bvh_with(text, name, &BvhOptions { scale: bvh_scale })?
        }
        Some("json") => load_clip_json(&bytes)?,
        _ => bail!("unsupported clip file {} (expected .bvh or .json)", path.display()),
    };
    let digest = InputDigest { name: clip.name.clone(), origin: path.display().to_string(), sha256: Some(sha256_hex(&bytes)) };
    Ok(InputClip { clip, digest })
}

/// Loads files then synthetic clips. Unreadable files and duplicate names
/// become failures; the rest load.
pub fn load_inputs(
    patterns: &[String],
    synthetic: Option<&posebench::synth::SyntheticSpec>,
    bvh_scale: f64,
    base: &Path,
) -> Result<(Vec<InputClip>, Vec<Failure>)> {
    let mut clips = Vec::new();
    let mut failures = Vec::new();
    for path in resolve_clip_paths(patterns, base)? {
        match load_clip_file(&path, bvh_scale) {
            Ok(c) => clips.push(c),
            Err(e) => {
                log::error!("{}: {e:#}", path.display());
                failures.push(Failure { item: path.display().to_string(), message: format!("{e:#}") });
            }
        }
    }
    if let Some(spec) = synthetic {
        for clip in synthesize_corpus(spec)? {
            let digest = InputDigest { name: clip.name.clone(), origin: "synthetic".into(), sha256: None };
            clips.push(InputClip { clip, digest });
        }
    }
    let mut seen = BTreeSet::new();
    clips.retain(|c| {
        if seen.insert(c.clip.name.clone()) {
            true
        } else {
            failures.push(Failure { item: c.digest.origin.clone(), message: format!("duplicate clip name `{}`", c.clip.name) });
            false
        }
    });
    Ok((clips, failures))
}

fn config_digest(config: &ExperimentConfig) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("config serializes"))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().context("cannot start worker pool")
}

fn output_dir(config: &ExperimentConfig, base: &Path, options: &RunOptions) -> PathBuf {
    options.output_dir.clone().unwrap_or_else(|| base.join(&config.output_dir))
}

/// Seed-free streams of one clip.
struct ClipStreams {
    sparse: SparseStream,
    /// None when the artifact-free stream depends on the seed.
    clean: Option<CartesianStream>,
}

fn simulate_paths(dir: &Path, clip: &str, seed: Option<u64>) -> (PathBuf, PathBuf) {
    let d = dir.join(SIMULATE_DIR).join(clip);
    let cart = match seed {
        Some(s) => d.join(format!("cartesian_seed{s}.json")),
        None => d.join("cartesian.json"),
    };
    (d.join("sparse.json"), cart)
}

fn generate_clean(config: &ExperimentConfig, clip: &MotionClip, seed: u64) -> Result<CartesianStream> {
    Ok(match config.cartesian_source {
        CartesianSource::GroundTruth => CartesianStream::from_clip(clip),
        CartesianSource::Triangulated => {
            let s = derive_subseed(clip_seed(seed, &clip.name), DETECTOR_TAG);
            triangulated_stream(clip, &config.rig(), &config.detector, s)?
        }
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| {
        format!("missing simulate output {}; run `posebench simulate` with this config first", path.display())
    })?;
    serde_json::from_slice(&bytes).with_context(|| format!("corrupt simulate output {}", path.display()))
}

/// Streams for `seed` (ignored when the clean stream is seed-free).
fn clean_stream(config: &ExperimentConfig, dir: &Path, clip: &MotionClip, seed: u64) -> Result<CartesianStream> {
    let seeded = config.clean_stream_is_seeded();
    if config.reuse_simulated {
        read_json(&simulate_paths(dir, &clip.name, seeded.then_some(seed)).1)
    } else {
        generate_clean(config, clip, seed)
    }
}

fn clip_streams(config: &ExperimentConfig, dir: &Path, clip: &MotionClip) -> Result<ClipStreams> {
    let sparse = if config.reuse_simulated {
        read_json(&simulate_paths(dir, &clip.name, None).0)?
    } else {
        derive_sparse_stream(clip)?
    };
    let clean = if config.clean_stream_is_seeded() { None } else { Some(clean_stream(config, dir, clip, 0)?) };
    Ok(ClipStreams { sparse, clean })
}

fn write(dir: &Path, name: &str, bytes: &[u8], outputs: &mut BTreeMap<String, String>) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    outputs.insert(name.to_string(), sha256_hex(bytes));
    Ok(())
}

fn manifest(config: &ExperimentConfig, command: &'static str, inputs: &[InputClip], points: &[GridPoint]) -> RunManifest {
    RunManifest {
        tool: "posebench",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_sha256: config_digest(config),
        seeds: config.seeds.clone(),
        cartesian_source: config.cartesian_source,
        full_product: config.full_product,
        reconstructors: config.reconstructors.clone(),
        grid_points: points
            .iter()
            .map(|p| match p.level {
                Some(l) => format!("{}={l}", p.condition),
                None => p.condition.clone(),
            })
            .collect(),
        inputs: inputs.iter().map(|c| c.digest.clone()).collect(),
        training_inputs: vec![],
        reference: None,
        outputs: BTreeMap::new(),
        failures: vec![],
    }
}

/// Writes the sparse and artifact-free Cartesian streams of every clip
/// under `<out>/simulate/<clip>/`. Seed-dependent streams get one file per seed.
pub fn run_simulate(config: &ExperimentConfig, base: &Path, options: &RunOptions) -> Result<RunOutcome> {
    config.validate()?;
    let dir = output_dir(config, base, options);
    let (inputs, mut failures) = load_inputs(&config.clips, config.synthetic.as_ref(), config.bvh_scale, base)?;
    let seeded = config.clean_stream_is_seeded();
    let per_clip: Vec<Result<Vec<(String, Vec<u8>)>>> = pool(options.jobs)?.install(|| {
        inputs
            .par_iter()
            .map(|input| {
                let clip = &input.clip;
                let mut files = Vec::new();
                let (sparse_path, _) = simulate_paths(Path::new(""), &clip.name, None);
                files.push((sparse_path, serde_json::to_vec(&derive_sparse_stream(clip)?)?));
                let seeds: Vec<Option<u64>> = if seeded { config.seeds.iter().map(|s| Some(*s)).collect() } else { vec![None] };
                for seed in seeds {
                    let stream = generate_clean(config, clip, seed.unwrap_or(0))?;
                    files.push((simulate_paths(Path::new(""), &clip.name, seed).1, serde_json::to_vec(&stream)?));
                }
                Ok(files.into_iter().map(|(p, b)| (p.to_string_lossy().replace('\\', "/"), b)).collect())
            })
            .collect()
    });
    let mut m = manifest(config, "simulate", &inputs, &[]);
    for (input, result) in inputs.iter().zip(per_clip) {
        match result {
            Ok(files) => {
                for (name, bytes) in files {
                    write(&dir, &name, &bytes, &mut m.outputs)?;
                }
            }
            Err(e) => {
                log::error!("{}: {e:#}", input.clip.name);
                failures.push(Failure { item: input.clip.name.clone(), message: format!("{e:#}") });
            }
        }
    }
    m.failures = failures;
    let bytes = serde_json::to_vec_pretty(&m)?;
    fs::write(dir.join(SIMULATE_DIR).join("run_manifest.json"), bytes).context("cannot write simulate manifest")?;
    Ok(RunOutcome { output_dir: dir, manifest: m, report: None })
}

#[derive(Debug, Clone, Copy)]
struct Task {
    reconstructor: usize,
    point: usize,
    seed: u64,
    clip: usize,
}

/// Evaluates every grid point, reconstructor, seed and clip and writes
/// `report.csv`, `report.md` and `run_manifest.json`. Per-clip problems are
/// recorded as failures and the run carries on.
pub fn run_sweep(config: &ExperimentConfig, base: &Path, options: &RunOptions) -> Result<RunOutcome> {
    config.validate()?;
    let dir = output_dir(config, base, options);
    let points = expand(&config.grid, config.full_product);
    let (inputs, mut failures) = load_inputs(&config.clips, config.synthetic.as_ref(), config.bvh_scale, base)?;
    let mut m = manifest(config, "sweep", &inputs, &points);

    let reference_path = options.reference.clone().or_else(|| config.reference.as_ref().map(|p| base.join(p)));
    let reference = match &reference_path {
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("cannot read reference table {}", p.display()))?;
            m.reference = Some(InputDigest { name: "reference".into(), origin: p.display().to_string(), sha256: Some(sha256_hex(&bytes)) });
            Some(load_reference_table(&bytes).with_context(|| format!("reference table {}", p.display()))?)
        }
        None => None,
    };

    let workers = pool(options.jobs)?;
    let mut reconstructors: Vec<Box<dyn Reconstructor>> = Vec::new();
    let needs_training = config.reconstructors.iter().any(ReconstructorSpec::needs_training);
    let training: Vec<MotionClip> = match (&config.training, needs_training) {
        (Some(t), true) => {
            let (clips, train_failures) = load_inputs(&t.clips, t.synthetic.as_ref(), config.bvh_scale, base)?;
            if !train_failures.is_empty() {
                bail!("training data failed to load: {}", train_failures.iter().map(|f| format!("{}: {}", f.item, f.message)).collect::<Vec<_>>().join("; "));
            }
            m.training_inputs = clips.iter().map(|c| c.digest.clone()).collect();
            clips.into_iter().map(|c| c.clip).collect()
        }
        _ => vec![],
    };
    let skeleton = inputs.first().map(|c| c.clip.skeleton.clone()).unwrap_or_else(|| Arc::new(posebench::skeleton::Skeleton::smpl22()));
    for spec in &config.reconstructors {
        let mut r = spec.build(skeleton.clone())?;
        if spec.needs_training() {
            log::info!("fitting {} on {} clips", spec.name(), training.len());
            workers.install(|| r.fit(&training)).with_context(|| format!("fitting {}", spec.name()))?;
        }
        reconstructors.push(r);
    }

    let streams: Vec<Result<ClipStreams>> =
        workers.install(|| inputs.par_iter().map(|c| clip_streams(config, &dir, &c.clip)).collect());
    let mut usable = vec![true; inputs.len()];
    for (i, s) in streams.iter().enumerate() {
        if let Err(e) = s {
            log::error!("{}: {e:#}", inputs[i].clip.name);
            failures.push(Failure { item: inputs[i].clip.name.clone(), message: format!("{e:#}") });
            usable[i] = false;
        }
    }

    let mut tasks = Vec::new();
    for r in 0..reconstructors.len() {
        for (p, point) in points.iter().enumerate() {
            let seed_free = point.degradation.is_deterministic() && !config.clean_stream_is_seeded();
            let seeds = if seed_free { &config.seeds[..1] } else { &config.seeds[..] };
            for &seed in seeds {
                for c in (0..inputs.len()).filter(|c| usable[*c]) {
                    tasks.push(Task { reconstructor: r, point: p, seed, clip: c });
                }
            }
        }
    }
    log::info!("{} evaluations over {} grid points", tasks.len(), points.len());

    let run_task = |task: &Task| -> Result<Vec<MetricAccumulator>> {
        let clip = &inputs[task.clip].clip;
        let streams = streams[task.clip].as_ref().expect("usable clip");
        let seeded;
        let clean = match &streams.clean {
            Some(c) => c,
            None => {
                seeded = clean_stream(config, &dir, clip, task.seed)?;
                &seeded
            }
        };
        let mut degradation = points[task.point].degradation;
        degradation.seed = derive_subseed(clip_seed(task.seed, &clip.name), DEGRADATION_TAG);
        let frames = align(&streams.sparse, &compose(clean, &degradation)?)?;
        let (prediction, _) = reconstruct_clip(reconstructors[task.reconstructor].as_ref(), &frames, clip)?;
        config
            .subsets
            .iter()
            .map(|s| Ok(accumulate_clip(&prediction, clip, *s, RotationFrame::Local)?))
            .collect()
    };
    let results: Vec<Result<Vec<MetricAccumulator>>> = workers.install(|| tasks.par_iter().map(run_task).collect());

    // reduce in task order so the sums do not depend on scheduling
    let mut cells: BTreeMap<(usize, usize), Vec<MetricAccumulator>> = BTreeMap::new();
    for (task, result) in tasks.iter().zip(results) {
        match result {
            Ok(accs) => {
                let cell = cells
                    .entry((task.reconstructor, task.point))
                    .or_insert_with(|| vec![MetricAccumulator::default(); config.subsets.len()]);
                for (c, a) in cell.iter_mut().zip(&accs) {
                    c.merge(a);
                }
            }
            Err(e) => {
                let item = format!(
                    "{} / {} / {} / seed {}",
                    inputs[task.clip].clip.name,
                    m.grid_points[task.point],
                    reconstructors[task.reconstructor].name(),
                    task.seed
                );
                log::error!("{item}: {e:#}");
                failures.push(Failure { item, message: format!("{e:#}") });
            }
        }
    }

    let mut rows = Vec::new();
    for ((r, p), accs) in &cells {
        for (subset, acc) in config.subsets.iter().zip(accs) {
            rows.push(MeasuredRow {
                condition: points[*p].condition.clone(),
                level: points[*p].level,
                model: reconstructors[*r].name().to_string(),
                subset: *subset,
                metrics: acc.finish(),
            });
        }
    }
    let metadata = ReportMetadata {
        seeds: config.seeds.clone(),
        clips: inputs.iter().map(|c| c.clip.name.clone()).collect(),
        created_unix_s: None,
    };
    let report = build_report(rows, reference.as_ref(), &config.reference_model, metadata);
    for v in trend_violations(&report) {
        log::warn!("trend: {v}");
    }

    write(&dir, "report.csv", report.to_csv().as_bytes(), &mut m.outputs)?;
    write(&dir, "report.md", report.to_markdown().as_bytes(), &mut m.outputs)?;
    m.failures = failures;
    let mut unused = BTreeMap::new();
    write(&dir, "run_manifest.json", &serde_json::to_vec_pretty(&m)?, &mut unused)?;
    Ok(RunOutcome { output_dir: dir, manifest: m, report: Some(report) })
}

/// Axes on which errors are expected to grow with the level.
pub const TREND_CONDITIONS: [&str; 4] = ["delay", "fps_ratio", "occlusion", "noise"];

/// Places where MPJPE or MPJVE drops as an artifact level rises, per model
/// and subset.
pub fn trend_violations(report: &MetricsReport) -> Vec<String> {
    let mut series: BTreeMap<(&str, &str, String), Vec<(f64, f64, f64)>> = BTreeMap::new();
    for row in &report.rows {
        if let (true, Some(level)) = (TREND_CONDITIONS.contains(&row.condition.as_str()), row.level) {
            series
                .entry((row.condition.as_str(), row.model.as_str(), row.subset.to_string()))
                .or_default()
                .push((level, row.metrics.mpjpe_cm, row.metrics.mpjve_cmps));
        }
    }
    let mut out = Vec::new();
    for ((condition, model, subset), mut points) in series {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi.1 < lo.1 {
                out.push(format!("{model} {subset} {condition}: MPJPE {:.4} at {} > {:.4} at {}", lo.1, lo.0, hi.1, hi.0));
            }
            if hi.2 < lo.2 {
                out.push(format!("{model} {subset} {condition}: MPJVE {:.4} at {} > {:.4} at {}", lo.2, lo.0, hi.2, hi.0));
            }
        }
    }
    out
}
