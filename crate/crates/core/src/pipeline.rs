//! End-to-end dataset generation: skeleton, mesh, implicit fit, scan and
//! degradations, with a manifest recording every emitted file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::degrade::{self, Ball, NoiseParams, OcclusionParams, UnevenDiagnostics, UnevenParams};
use crate::error::{Error, Result};
use crate::implicit::{build_surface, FitConfig, FitStats, ImplicitSurface};
use crate::mesh::sweep_mesh;
use crate::metrics::sha256_hex;
use crate::rng::derive_seed;
use crate::scanner::{scan, NormalDiagnostics, ScanConfig};
use crate::skeleton::{generate_skeleton, parse_skel, to_skel_string, TreeParams};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "manifest.json";
pub const INDEX_NAME: &str = "index.json";
/// Environment variable holding the default batch worker count.
pub const WORKERS_ENV: &str = "TREECLOUD_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Degradation {
    Noise(NoiseParams),
    Occlusion(OcclusionParams),
    Uneven(UnevenParams),
    DensityVariants,
}

impl Degradation {
    pub fn kind(&self) -> &'static str {
        match self {
            Degradation::Noise(_) => "noise",
            Degradation::Occlusion(_) => "occlusion",
            Degradation::Uneven(_) => "uneven",
            Degradation::DensityVariants => "density",
        }
    }

    /// One of each kind with default parameters.
    pub fn all() -> Vec<Degradation> {
        vec![
            Degradation::Noise(NoiseParams::default()),
            Degradation::Occlusion(OcclusionParams::default()),
            Degradation::Uneven(UnevenParams::default()),
            Degradation::DensityVariants,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub tree: TreeParams,
    /// Polygon sides of the swept tube cross sections.
    pub mesh_sides: usize,
    pub fit: FitConfig,
    pub scan: ScanConfig,
    pub degradations: Vec<Degradation>,
    pub output_dir: PathBuf,
    /// Every stage seed is derived from this value, overriding the seeds
    /// stored in the stage parameters.
    pub master_seed: u64,
    /// Also emit an OBJ with the camera positions and support-sphere centers.
    pub dump_debug_obj: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tree: TreeParams::default(),
            mesh_sides: 16,
            fit: FitConfig::default(),
            scan: ScanConfig::default(),
            degradations: Vec::new(),
            output_dir: PathBuf::from("out"),
            master_seed: 0,
            dump_debug_obj: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }

    /// Stage label to seed, for every seeded stage of this config.
    pub fn stage_seeds(&self) -> BTreeMap<String, u64> {
        let mut seeds = BTreeMap::new();
        for label in ["skeleton".to_string(), "scan".to_string()].into_iter().chain(
            self.degradations
                .iter()
                .enumerate()
                .map(|(i, d)| degradation_label(i, d)),
        ) {
            let seed = derive_seed(self.master_seed, &label);
            seeds.insert(label, seed);
        }
        seeds
    }
}

fn degradation_label(index: usize, d: &Degradation) -> String {
    format!("{}-{index}", d.kind())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub role: String,
    /// Relative to the output directory.
    pub path: String,
    pub points: Option<usize>,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRecord {
    pub degradation: String,
    pub balls: Vec<Ball>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub fit: FitSummary,
    pub points_per_view: Vec<usize>,
    pub normal_mode: String,
    pub normals: Option<NormalDiagnostics>,
    pub uneven: BTreeMap<String, UnevenDiagnostics>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub epsilon: f64,
    pub cells: usize,
    pub leaves: usize,
    pub expanded: usize,
    pub dropped: usize,
    pub repaired: usize,
    pub deepest_leaf: u32,
}

impl FitSummary {
    fn new(surface: &ImplicitSurface) -> Self {
        let FitStats {
            leaves,
            expanded,
            dropped,
            repaired,
            deepest_leaf,
        } = surface.stats().clone();
        Self {
            epsilon: surface.epsilon(),
            cells: surface.cells().len(),
            leaves,
            expanded,
            dropped,
            repaired,
            deepest_leaf,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub seeds: BTreeMap<String, u64>,
    pub files: Vec<FileEntry>,
    pub occlusion_balls: Vec<BallRecord>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per stage; the only run-dependent field.
    pub timing: BTreeMap<String, f64>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Re-reads every listed file under `dir` and checks its digest. Returns
    /// the paths that are missing or differ.
    pub fn verify(&self, dir: impl AsRef<Path>) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| match fs::read(dir.as_ref().join(&f.path)) {
                Ok(bytes) => sha256_hex(&bytes) != f.sha256,
                Err(_) => true,
            })
            .map(|f| f.path.clone())
            .collect()
    }
}

/// Tracks emitted files so a failed run can clean up after itself.
struct Emitter {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<FileEntry>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
        })
    }

    fn emit(&mut self, role: &str, name: &str, bytes: &[u8], points: Option<usize>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::file(&path, e))?;
        self.files.push(FileEntry {
            role: role.to_string(),
            path: name.to_string(),
            points,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn emit_cloud(&mut self, role: &str, name: &str, cloud: &PointCloud) -> Result<()> {
        self.emit(role, name, &cloud.to_ply_bytes(), Some(cloud.len()))
    }

    fn discard(&self) {
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(&f.path));
        }
        let _ = fs::remove_file(self.dir.join(MANIFEST_NAME));
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

fn timed<T>(timing: &mut BTreeMap<String, f64>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| Error::stage(stage, e));
    let secs = start.elapsed().as_secs_f64();
    log::debug!("{stage}: {secs:.3}s");
    timing.insert(stage.to_string(), secs);
    out
}

/// Runs every stage and writes the dataset into `config.output_dir`. On
/// failure all files written by this run are removed.
pub fn run_pipeline(config: &PipelineConfig) -> Result<DatasetManifest> {
    let mut out = Emitter::new(&config.output_dir)?;
    match run_stages(config, &mut out) {
        Ok(m) => Ok(m),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn run_stages(config: &PipelineConfig, out: &mut Emitter) -> Result<DatasetManifest> {
    let seeds = config.stage_seeds();
    let mut timing = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut diagnostics = Diagnostics::default();
    let mut occlusion_balls = Vec::new();

    let skeleton = timed(&mut timing, "skeleton", || {
        let params = TreeParams {
            seed: seeds["skeleton"],
            ..config.tree.clone()
        };
        let text = to_skel_string(&generate_skeleton(&params)?);
        out.emit("skeleton", "skeleton.skel", text.as_bytes(), None)?;
        // Downstream stages see exactly what was written.
        parse_skel(&text)
    })?;

    let mesh = timed(&mut timing, "mesh", || {
        let mesh = sweep_mesh(&skeleton, config.mesh_sides)?;
        out.emit("mesh", "mesh.obj", mesh.to_obj_string().as_bytes(), None)?;
        Ok(mesh)
    })?;

    let surface = timed(&mut timing, "fit", || build_surface(&mesh, &config.fit))?;
    diagnostics.fit = FitSummary::new(&surface);

    let scan_cfg = ScanConfig {
        seed: seeds["scan"],
        feature_size: config.scan.feature_size.or(Some(skeleton.min_radius())),
        ..config.scan.clone()
    };
    let scanned = timed(&mut timing, "scan", || {
        let s = scan(&surface, &scan_cfg)?;
        // What the files hold is what later stages operate on.
        let clean = s.cloud.quantized();
        out.emit_cloud("clean", "clean.ply", &clean)?;
        Ok((s, clean))
    })?;
    let (scan_out, clean) = scanned;
    diagnostics.points_per_view = scan_out.per_view.clone();
    diagnostics.normal_mode = serde_json::to_value(scan_cfg.normal_mode)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    diagnostics.normals = scan_out.normal_diagnostics.clone();
    warnings.extend(scan_out.warnings.iter().cloned());

    let skeleton_bbox = skeleton.bbox();
    for (i, d) in config.degradations.iter().enumerate() {
        let label = degradation_label(i, d);
        let seed = seeds[&label];
        timed(&mut timing, &label, || {
            match d {
                Degradation::Noise(p) => {
                    let noisy = degrade::add_noise(&clean, &NoiseParams { seed, ..p.clone() })?;
                    out.emit_cloud("noise", &format!("{label}.ply"), &noisy.quantized())?;
                }
                Degradation::Occlusion(p) => {
                    let params = OcclusionParams { seed, ..p.clone() };
                    let (kept, balls) = degrade::occlude(&clean, &skeleton_bbox, &params)?;
                    if kept.is_empty() {
                        warnings.push(format!("{label}: every point was occluded"));
                    }
                    out.emit_cloud("occlusion", &format!("{label}.ply"), &kept)?;
                    occlusion_balls.push(BallRecord {
                        degradation: label.clone(),
                        balls,
                    });
                }
                Degradation::Uneven(p) => {
                    let (dense, diag) = degrade::uneven_density(&clean, &UnevenParams { seed, ..p.clone() })?;
                    if diag.inserted == 0 {
                        warnings.push(format!("{label}: no points were inserted"));
                    }
                    out.emit_cloud("uneven", &format!("{label}.ply"), &dense.quantized())?;
                    diagnostics.uneven.insert(label.clone(), diag);
                }
                Degradation::DensityVariants => {
                    for resolution in degrade::DENSITY_RESOLUTIONS {
                        let cloud = if resolution == scan_cfg.resolution {
                            clean.clone()
                        } else {
                            let cfg = ScanConfig {
                                resolution,
                                ..scan_cfg.clone()
                            };
                            scan(&surface, &cfg)?.cloud.quantized()
                        };
                        out.emit_cloud("density", &format!("{label}-r{resolution}.ply"), &cloud)?;
                    }
                }
            }
            Ok(())
        })?;
    }

    if config.dump_debug_obj {
        let text = debug_obj(&surface, &scan_out.poses);
        out.emit("debug", "debug.obj", text.as_bytes(), None)?;
    }

    let manifest = DatasetManifest {
        tool: "treecloud".into(),
        version: TOOL_VERSION.into(),
        config: config.clone(),
        seeds,
        files: out.files.clone(),
        occlusion_balls,
        diagnostics,
        warnings,
        timing,
    };
    let path = out.dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text).map_err(|e| Error::file(&path, e))?;
    Ok(manifest)
}

/// Camera positions joined to the model center by lines, followed by the
/// support-sphere centers as free vertices.
fn debug_obj(surface: &ImplicitSurface, poses: &[crate::scanner::Pose]) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("# cameras, then support-sphere centers\n");
    let center = surface.bbox().center();
    let _ = writeln!(s, "v {} {} {}", center.x, center.y, center.z);
    for (i, p) in poses.iter().enumerate() {
        let [x, y, z] = p.position;
        let _ = writeln!(s, "v {x} {y} {z}");
        let _ = writeln!(s, "l 1 {}", i + 2);
    }
    for c in surface.cells() {
        let _ = writeln!(s, "v {} {} {}", c.center.x, c.center.y, c.center.z);
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub index: usize,
    pub output_dir: PathBuf,
    pub manifest: Option<String>,
    pub error: Option<String>,
    /// Digest per emitted file, keyed by relative path.
    pub digests: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchIndex {
    pub tool: String,
    pub version: String,
    pub workers: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub models: Vec<BatchEntry>,
}

impl BatchIndex {
    pub fn all_succeeded(&self) -> bool {
        self.failed == 0
    }
}

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// `count` configs derived from `template`, each with its own master seed and
/// an output directory `model-NNNN` under the template's.
pub fn batch_configs(template: &PipelineConfig, count: usize) -> Vec<PipelineConfig> {
    (0..count)
        .map(|i| PipelineConfig {
            output_dir: template.output_dir.join(format!("model-{i:04}")),
            master_seed: derive_seed(template.master_seed, &format!("model-{i}")),
            ..template.clone()
        })
        .collect()
}

/// Runs the pipelines on a pool of `workers` threads. Failures are recorded
/// per model and do not affect the others. When `index_path` is given the
/// aggregate index is written there.
pub fn batch(configs: &[PipelineConfig], workers: usize, index_path: Option<&Path>) -> Result<BatchIndex> {
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<DatasetManifest>> = pool.install(|| configs.par_iter().map(run_pipeline).collect());

    let models: Vec<BatchEntry> = configs
        .iter()
        .zip(results)
        .enumerate()
        .map(|(index, (cfg, r))| match r {
            Ok(m) => BatchEntry {
                index,
                output_dir: cfg.output_dir.clone(),
                manifest: Some(MANIFEST_NAME.into()),
                error: None,
                digests: m.files.iter().map(|f| (f.path.clone(), f.sha256.clone())).collect(),
            },
            Err(e) => BatchEntry {
                index,
                output_dir: cfg.output_dir.clone(),
                manifest: None,
                error: Some(error_chain(&e)),
                digests: BTreeMap::new(),
            },
        })
        .collect();
    let failed = models.iter().filter(|m| m.error.is_some()).count();
    let index = BatchIndex {
        tool: "treecloud".into(),
        version: TOOL_VERSION.into(),
        workers,
        succeeded: models.len() - failed,
        failed,
        models,
    };
    if let Some(path) = index_path {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
        }
        let text = serde_json::to_string_pretty(&index)?;
        fs::write(path, text).map_err(|e| Error::file(path, e))?;
    }
    Ok(index)
}

/// The error and its sources joined by `": "`.
pub fn error_chain(e: &(dyn std::error::Error + 'static)) -> String {
    let mut s = e.to_string();
    let mut cur = e.source();
    while let Some(c) = cur {
        s.push_str(": ");
        s.push_str(&c.to_string());
        cur = c.source();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degradation_json_is_tagged() {
        let d: Vec<Degradation> =
            serde_json::from_str(r#"[{"type":"noise","s":0.5},{"type":"density-variants"}]"#).unwrap();
        assert_eq!(
            d[0],
            Degradation::Noise(NoiseParams {
                s: 0.5,
                ..NoiseParams::default()
            })
        );
        assert_eq!(d[1], Degradation::DensityVariants);
    }

    #[test]
    fn seeds_of_earlier_stages_ignore_appended_degradations() {
        let mut cfg = PipelineConfig {
            master_seed: 9,
            degradations: vec![Degradation::DensityVariants],
            ..PipelineConfig::default()
        };
        let before = cfg.stage_seeds();
        cfg.degradations.push(Degradation::Noise(NoiseParams::default()));
        let after = cfg.stage_seeds();
        for (k, v) in &before {
            assert_eq!(after[k], *v);
        }
        assert_eq!(after.len(), before.len() + 1);
    }

    #[test]
    fn batch_configs_are_distinct() {
        let cfgs = batch_configs(&PipelineConfig::default(), 3);
        assert_ne!(cfgs[0].master_seed, cfgs[1].master_seed);
        assert!(cfgs[2].output_dir.ends_with("model-0002"));
    }
}
