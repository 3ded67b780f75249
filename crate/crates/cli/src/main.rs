//! `treecloud`: generate tree point-cloud datasets with ground-truth skeletons
//! and score extracted skeletons against them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use treecloud::degrade::{
    add_noise, density_variants, occlude, uneven_density, NoiseParams, OcclusionParams, UnevenParams,
};
use treecloud::metrics::{evaluate, EvalOptions};
use treecloud::pipeline::{
    batch, batch_configs, default_workers, run_pipeline, Degradation, PipelineConfig, INDEX_NAME,
};
use treecloud::skeleton::{load_skeleton, save_skeleton, SizeClass};
use treecloud::{build_surface, generate_skeleton, scan, sweep_mesh, Aabb, FitConfig, ImplicitSurface, PointCloud};
use treecloud::{ScanConfig, TreeParams, TriangleMesh, Vec3};

#[derive(Parser)]
#[command(
    name = "treecloud",
    version,
    about = "Synthetic tree point clouds with ground-truth skeletons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a skeleton and write it as .skel.
    Skeleton(SkeletonCmd),
    /// Sweep a skeleton into a closed tube mesh (OBJ).
    Mesh(MeshCmd),
    /// Fit an implicit surface to a mesh and write the binary surface cache.
    Fit(FitCmd),
    /// Scan a fitted surface into a PLY point cloud.
    Scan(ScanCmd),
    /// Apply one degradation to a point cloud.
    #[command(subcommand)]
    Degrade(DegradeCmd),
    /// Hausdorff report of an extracted skeleton against ground truth.
    Eval(EvalCmd),
    /// Run every stage for one model.
    Pipeline(PipelineCmd),
    /// Run many models concurrently.
    Batch(BatchCmd),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Size {
    Small,
    Medium,
    Large,
}

impl From<Size> for SizeClass {
    fn from(s: Size) -> Self {
        match s {
            Size::Small => SizeClass::Small,
            Size::Medium => SizeClass::Medium,
            Size::Large => SizeClass::Large,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NormalModeArg {
    Analytic,
    PcaMst,
}

/// Skeleton parameters; unset flags keep the preset or config-file value.
#[derive(Args, Clone, Serialize, Default)]
struct TreeArgs {
    /// Size-class preset used as the base.
    #[arg(long = "size")]
    #[serde(skip_serializing)]
    size: Option<Size>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trunk_length: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trunk_radius: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    branch_levels: Option<u32>,
    /// Inclusive range, e.g. `1,2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    branches_per_node: Option<Vec<u32>>,
    /// Inclusive range in radians, e.g. `0.4,0.9`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    branch_angle: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    radius_decay: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    length_decay: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gravity: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bend: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes_per_curve: Option<u32>,
}

#[derive(Args, Clone, Serialize, Default)]
struct FitArgs {
    /// Absolute smoothing factor.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    /// Smoothing factor relative to the bounding-box diagonal.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_scale: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_depth: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_triangles_per_cell: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    planarity_tolerance: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    min_triangles_for_fit: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    quadrature_order: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    quadrature_splits: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sphere_radius_scale: Option<f64>,
}

#[derive(Args, Clone, Serialize, Default)]
struct ScanArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    resolution: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    views: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    standoff: Option<f64>,
    /// March step as a fraction of the feature size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    march_step: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    feature_size: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    hit_tolerance: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    normal_mode: Option<NormalModeArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pca_k: Option<usize>,
}

#[derive(Args)]
struct SkeletonCmd {
    /// JSON file with skeleton parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MeshCmd {
    skeleton: PathBuf,
    #[arg(long, default_value_t = 16)]
    sides: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct FitCmd {
    mesh: PathBuf,
    /// JSON file with fit parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ScanCmd {
    /// Surface cache written by `fit`.
    surface: PathBuf,
    /// JSON file with scan parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    scan: ScanArgs,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum DegradeCmd {
    /// Insert points displaced along their normals.
    Noise {
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Remove the points inside random balls.
    Occlude {
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Skeleton whose bounding box scales the ball radius; the cloud's
        /// own bounding box otherwise.
        #[arg(long)]
        skeleton: Option<PathBuf>,
        /// Write the ball list as JSON here.
        #[arg(long)]
        balls: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Insert points along local principal directions inside a region.
    Uneven {
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Region as `xmin,ymin,zmin,xmax,ymax,zmax`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        region: Option<Vec<f64>>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda1: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda2: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Rescan a surface at resolutions 50, 100 and 150.
    Density {
        /// Surface cache written by `fit`.
        surface: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        scan: ScanArgs,
        /// Output prefix; files are `<prefix>-r<resolution>.ply`.
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long = "ground-truth")]
    ground_truth: PathBuf,
    #[arg(long)]
    extracted: PathBuf,
    /// Also sample skeleton edges at this spacing.
    #[arg(long)]
    spacing: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    mesh_sides: Option<usize>,
    /// Degradations with default parameters, replacing any configured list.
    #[arg(long, value_enum, value_delimiter = ',')]
    degrade: Option<Vec<DegradeKind>>,
    /// Also write an OBJ with camera positions and support-sphere centers.
    #[arg(long)]
    dump_debug_obj: bool,
    #[command(flatten)]
    tree: TreeArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    scan: ScanArgs,
}

#[derive(Args)]
struct PipelineCmd {
    #[command(flatten)]
    args: PipelineArgs,
}

#[derive(Args)]
struct BatchCmd {
    /// Full pipeline configs, one model each. Without them, `--count` models
    /// are derived from the template options.
    configs: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Concurrent models; defaults to TREECLOUD_WORKERS or the core count.
    #[arg(long, env = "TREECLOUD_WORKERS")]
    workers: Option<usize>,
    /// Aggregate index path; `<output-dir>/index.json` by default.
    #[arg(long)]
    index: Option<PathBuf>,
    #[command(flatten)]
    args: PipelineArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum DegradeKind {
    Noise,
    Occlusion,
    Uneven,
    Density,
    All,
}

/// Overlays `top` onto `base`, recursing into objects.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, t) => *b = t,
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn layered<T: serde::de::DeserializeOwned + Serialize>(base: T, config: Option<&Path>, flags: Value) -> Result<T> {
    let mut value = serde_json::to_value(base)?;
    if let Some(path) = config {
        merge(&mut value, read_json(path)?);
    }
    merge(&mut value, flags);
    Ok(serde_json::from_value(value)?)
}

fn flags(v: impl Serialize) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// The preset named by `--size`, else by the file's `size_class`, else small.
fn tree_base(args: &TreeArgs, file: Option<&Value>) -> Result<TreeParams> {
    let class = match args.size {
        Some(s) => s.into(),
        None => match file.and_then(|v| v.get("size_class")) {
            Some(v) => serde_json::from_value(v.clone())?,
            None => SizeClass::Small,
        },
    };
    Ok(TreeParams::preset(class, 0))
}

fn pipeline_config(a: &PipelineArgs) -> Result<PipelineConfig> {
    let file = a.config.as_deref().map(read_json).transpose()?;
    let tree = tree_base(&a.tree, file.as_ref().and_then(|f| f.get("tree")))?;
    let mut value = serde_json::to_value(PipelineConfig {
        tree,
        ..PipelineConfig::default()
    })?;
    if let Some(f) = file {
        merge(&mut value, f);
    }
    let mut top = Map::new();
    top.insert("tree".into(), flags(&a.tree)?);
    top.insert("fit".into(), flags(&a.fit)?);
    top.insert("scan".into(), flags(&a.scan)?);
    if let Some(d) = &a.output_dir {
        top.insert("output_dir".into(), flags(d)?);
    }
    if let Some(s) = a.master_seed {
        top.insert("master_seed".into(), s.into());
    }
    if let Some(s) = a.mesh_sides {
        top.insert("mesh_sides".into(), s.into());
    }
    if a.dump_debug_obj {
        top.insert("dump_debug_obj".into(), true.into());
    }
    merge(&mut value, Value::Object(top));
    let mut cfg: PipelineConfig = serde_json::from_value(value).context("invalid pipeline configuration")?;
    if let Some(kinds) = &a.degrade {
        cfg.degradations = degradations(kinds);
    }
    Ok(cfg)
}

fn degradations(kinds: &[DegradeKind]) -> Vec<Degradation> {
    let mut out = Vec::new();
    for k in kinds {
        match k {
            DegradeKind::Noise => out.push(Degradation::Noise(NoiseParams::default())),
            DegradeKind::Occlusion => out.push(Degradation::Occlusion(OcclusionParams::default())),
            DegradeKind::Uneven => out.push(Degradation::Uneven(UnevenParams::default())),
            DegradeKind::Density => out.push(Degradation::DensityVariants),
            DegradeKind::All => out.extend(Degradation::all()),
        }
    }
    out
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)?).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Skeleton(c) => {
            let file = c.config.as_deref().map(read_json).transpose()?;
            let base = tree_base(&c.tree, file.as_ref())?;
            let mut top = flags(&c.tree)?;
            if let Some(seed) = c.seed {
                top["seed"] = seed.into();
            }
            let params: TreeParams = layered(base, c.config.as_deref(), top)?;
            let g = generate_skeleton(&params)?;
            save_skeleton(&g, &c.output)?;
            log::info!(
                "{} nodes, {} edges -> {}",
                g.nodes.len(),
                g.edges.len(),
                c.output.display()
            );
        }
        Command::Mesh(c) => {
            let g = load_skeleton(&c.skeleton)?;
            let mesh = sweep_mesh(&g, c.sides)?;
            mesh.save_obj(&c.output)?;
            log::info!("{} triangles -> {}", mesh.triangles.len(), c.output.display());
        }
        Command::Fit(c) => {
            let mesh = TriangleMesh::load_obj(&c.mesh)?;
            let cfg: FitConfig = layered(FitConfig::default(), c.config.as_deref(), flags(&c.fit)?)?;
            let surface = build_surface(&mesh, &cfg)?;
            surface.save(&c.output)?;
            log::info!("{} cells -> {}", surface.cells().len(), c.output.display());
        }
        Command::Scan(c) => {
            let surface = ImplicitSurface::load(&c.surface)?;
            let cfg: ScanConfig = layered(ScanConfig::default(), c.config.as_deref(), flags(&c.scan)?)?;
            let out = scan(&surface, &cfg)?;
            for w in &out.warnings {
                log::warn!("{w}");
            }
            out.cloud.write_ply(&c.output)?;
            log::info!("{} points -> {}", out.cloud.len(), c.output.display());
        }
        Command::Degrade(d) => degrade(d)?,
        Command::Eval(c) => {
            let g = load_skeleton(&c.ground_truth)?;
            let s = load_skeleton(&c.extracted)?;
            let report = evaluate(&g, &s, &EvalOptions { spacing: c.spacing })?;
            match c.output {
                Some(p) => write_json(&p, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
        Command::Pipeline(c) => {
            let cfg = pipeline_config(&c.args)?;
            let m = run_pipeline(&cfg)?;
            for w in &m.warnings {
                log::warn!("{w}");
            }
            println!("{} files written to {}", m.files.len() + 1, cfg.output_dir.display());
        }
        Command::Batch(c) => {
            let template = pipeline_config(&c.args)?;
            let configs = if c.configs.is_empty() {
                batch_configs(&template, c.count)
            } else {
                c.configs
                    .iter()
                    .map(|p| {
                        // Each file names its own output directory.
                        let args = PipelineArgs {
                            config: Some(p.clone()),
                            output_dir: None,
                            ..c.args.clone()
                        };
                        pipeline_config(&args)
                    })
                    .collect::<Result<_>>()?
            };
            let workers = c.workers.unwrap_or_else(default_workers);
            let index_path = c.index.unwrap_or_else(|| template.output_dir.join(INDEX_NAME));
            let index = batch(&configs, workers, Some(&index_path))?;
            for m in index.models.iter().filter(|m| m.error.is_some()) {
                log::error!("model {}: {}", m.index, m.error.as_deref().unwrap_or_default());
            }
            println!(
                "{} succeeded, {} failed; index at {}",
                index.succeeded,
                index.failed,
                index_path.display()
            );
            return Ok(index.all_succeeded());
        }
    }
    Ok(true)
}

fn degrade(cmd: DegradeCmd) -> Result<()> {
    match cmd {
        DegradeCmd::Noise {
            input,
            config,
            s,
            d,
            seed,
            output,
        } => {
            let cloud = PointCloud::read_ply(&input)?;
            let p: NoiseParams = layered(
                NoiseParams::default(),
                config.as_deref(),
                options([
                    ("s", s.map(Into::into)),
                    ("d", d.map(Into::into)),
                    ("seed", seed.map(Into::into)),
                ]),
            )?;
            let out = add_noise(&cloud, &p)?;
            out.write_ply(&output)?;
            log::info!("{} -> {} points", cloud.len(), out.len());
        }
        DegradeCmd::Occlude {
            input,
            config,
            n,
            lambda,
            seed,
            skeleton,
            balls,
            output,
        } => {
            let cloud = PointCloud::read_ply(&input)?;
            let p: OcclusionParams = layered(
                OcclusionParams::default(),
                config.as_deref(),
                options([
                    ("n", n.map(Into::into)),
                    ("lambda", lambda.map(Into::into)),
                    ("seed", seed.map(Into::into)),
                ]),
            )?;
            let bbox = match skeleton {
                Some(path) => load_skeleton(path)?.bbox(),
                None => cloud.bbox(),
            };
            let (out, ball_list) = occlude(&cloud, &bbox, &p)?;
            out.write_ply(&output)?;
            if let Some(path) = balls {
                write_json(&path, &ball_list)?;
            }
            log::info!("{} -> {} points", cloud.len(), out.len());
        }
        DegradeCmd::Uneven {
            input,
            config,
            region,
            r,
            lambda1,
            lambda2,
            seed,
            output,
        } => {
            let cloud = PointCloud::read_ply(&input)?;
            let region = region
                .map(|v| -> Result<Value> {
                    if v.len() != 6 {
                        bail!("--region takes six numbers");
                    }
                    let b = Aabb::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]));
                    Ok(serde_json::to_value(b)?)
                })
                .transpose()?;
            let p: UnevenParams = layered(
                UnevenParams::default(),
                config.as_deref(),
                options([
                    ("region", region),
                    ("r", r.map(Into::into)),
                    ("lambda1", lambda1.map(Into::into)),
                    ("lambda2", lambda2.map(Into::into)),
                    ("seed", seed.map(Into::into)),
                ]),
            )?;
            let (out, diag) = uneven_density(&cloud, &p)?;
            out.write_ply(&output)?;
            log::info!(
                "{} -> {} points ({} skipped, {} degenerate, {} outside the region)",
                cloud.len(),
                out.len(),
                diag.skipped,
                diag.degenerate,
                diag.escaped
            );
        }
        DegradeCmd::Density {
            surface,
            config,
            scan,
            output,
        } => {
            let surface = ImplicitSurface::load(&surface)?;
            let cfg: ScanConfig = layered(ScanConfig::default(), config.as_deref(), flags(&scan)?)?;
            for (resolution, cloud) in density_variants(&surface, &cfg)? {
                let path = PathBuf::from(format!("{}-r{resolution}.ply", output.display()));
                cloud.write_ply(&path)?;
                log::info!("resolution {resolution}: {} points -> {}", cloud.len(), path.display());
            }
        }
    }
    Ok(())
}

fn options<const N: usize>(pairs: [(&str, Option<Value>); N]) -> Value {
    Value::Object(
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect(),
    )
}

/// Lets every numeric flag take a negative value, in all subcommands.
fn accept_negative_numbers(cmd: clap::Command) -> clap::Command {
    cmd.allow_negative_numbers(true)
        .mut_subcommands(accept_negative_numbers)
}

fn parse_cli() -> Cli {
    let matches = accept_negative_numbers(Cli::command()).get_matches();
    Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(parse_cli()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
