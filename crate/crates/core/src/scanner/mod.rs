//! Virtual range scanner.
//!
//! Viewpoints sit on a Fibonacci spiral around the model's bounding sphere
//! and look at its center. Each view fires a `resolution x resolution` pinhole
//! grid of rays (one stripe per row) whose frustum just contains the bounding
//! sphere. Rays march the implicit surface with a fixed step until `f` changes
//! sign, then bisect. Views share the world frame, so merging is
//! concatenation.

mod normals;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{least_aligned_axis, Aabb, Vec3};
use crate::implicit::{ImplicitSurface, Probe};

pub use normals::{estimate_normals, orient_normals, NormalDiagnostics};

const BISECTION_ITERATIONS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalMode {
    /// Normalized gradient of the implicit function, facing the scanner.
    Analytic,
    /// PCA tangent planes oriented by propagation over a spanning tree.
    PcaMst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    /// Rays per stripe and stripes per view.
    pub resolution: u32,
    pub views: u32,
    /// Camera distance from the center as a multiple of the bounding radius.
    pub standoff: f64,
    /// March step as a fraction of `feature_size`.
    pub march_step: f64,
    /// Thinnest feature to resolve (the minimum tube radius for trees). When
    /// absent, 1% of the bounding-box diagonal.
    pub feature_size: Option<f64>,
    pub hit_tolerance: f64,
    pub normal_mode: NormalMode,
    pub pca_k: usize,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            resolution: 100,
            views: 6,
            standoff: 1.5,
            march_step: 0.25,
            feature_size: None,
            hit_tolerance: 1e-6,
            normal_mode: NormalMode::Analytic,
            pca_k: 16,
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.resolution < 2 {
            return bad("resolution must be at least 2");
        }
        if self.views < 1 {
            return bad("views must be at least 1");
        }
        if !(self.standoff > 1.0) {
            return bad("standoff must exceed 1");
        }
        if !(self.hit_tolerance > 0.0) {
            return bad("hit_tolerance must be positive");
        }
        if !(self.march_step > 0.0) {
            return bad("march_step must be positive");
        }
        if let Some(f) = self.feature_size {
            if !(f > 0.0) {
                return bad("feature_size must be positive");
            }
        }
        if self.pca_k < 3 {
            return bad("pca_k must be at least 3");
        }
        Ok(())
    }

    /// Absolute march step for a model with the given bounding box.
    pub fn step_length(&self, bbox: &Aabb) -> f64 {
        self.march_step * self.feature_size.unwrap_or(0.01 * bbox.diagonal())
    }
}

/// A camera looking at the model center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    pub forward: [f64; 3],
    pub right: [f64; 3],
    pub up: [f64; 3],
}

impl Pose {
    fn looking_at(position: Vec3, target: Vec3) -> Self {
        let forward = (target - position).normalize();
        let world_up = least_aligned_axis(&forward);
        let right = forward.cross(&world_up).normalize();
        let up = right.cross(&forward);
        Self {
            position: position.into(),
            forward: forward.into(),
            right: right.into(),
            up: up.into(),
        }
    }
}

/// Unit directions of `n` points on a Fibonacci spiral running pole to pole
/// (`z` from +1 to -1 in equal steps, golden-angle azimuths).
pub fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    if n == 1 {
        return vec![Vec3::z()];
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * i as f64 / (n - 1) as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Camera poses around the bounding sphere of `bbox`, at `standoff` times its
/// radius from the center.
pub fn viewpoints(bbox: &Aabb, views: usize, standoff: f64) -> Vec<Pose> {
    let center = bbox.center();
    let radius = 0.5 * bbox.diagonal();
    fibonacci_directions(views)
        .into_iter()
        .map(|d| Pose::looking_at(center + d * (standoff * radius), center))
        .collect()
}

/// Ray/sphere intersection parameters `(t_enter, t_exit)`.
fn ray_sphere(origin: &Vec3, dir: &Vec3, center: &Vec3, radius: f64) -> Option<(f64, f64)> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let (t0, t1) = (-b - s, -b + s);
    if t1 < 0.0 {
        None
    } else {
        Some((t0.max(0.0), t1))
    }
}

/// Finds the first crossing of the zero set along a unit-direction ray, within
/// the surface's bounding sphere. Stretches of the ray outside every support
/// sphere are skipped, and sign changes where bisection cannot reach
/// `|f| <= tolerance` (discontinuities) are ignored.
pub fn ray_cast(surface: &ImplicitSurface, origin: &Vec3, dir: &Vec3, step: f64, tolerance: f64) -> Option<Vec3> {
    let (center, radius) = surface.bounding_sphere();
    let (t_enter, t_exit) = ray_sphere(origin, dir, &center, radius * (1.0 + 1e-9))?;
    let at = |t: f64| origin + dir * t;
    let mut t = t_enter;
    let mut prev: Option<(f64, f64)> = None;
    loop {
        let x = at(t);
        let f = match surface.probe(&x) {
            Probe::Covered(f) => f,
            Probe::Uncovered { gap, .. } if gap > step => {
                prev = None;
                t += gap;
                if t > t_exit {
                    return None;
                }
                continue;
            }
            Probe::Uncovered { value, .. } => value,
        };
        if f == 0.0 {
            return Some(x);
        }
        if let Some((t_prev, f_prev)) = prev {
            if (f_prev > 0.0) != (f > 0.0) {
                if let Some(hit) = bisect(surface, origin, dir, (t_prev, f_prev), (t, f), tolerance) {
                    return Some(hit);
                }
            }
        }
        if t >= t_exit {
            return None;
        }
        prev = Some((t, f));
        t = (t + step).min(t_exit);
    }
}

fn bisect(
    surface: &ImplicitSurface,
    origin: &Vec3,
    dir: &Vec3,
    (mut lo, f_lo): (f64, f64),
    (mut hi, f_hi): (f64, f64),
    tolerance: f64,
) -> Option<Vec3> {
    let lo_positive = f_lo > 0.0;
    let mut best = if f_lo.abs() <= f_hi.abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    for _ in 0..BISECTION_ITERATIONS {
        if best.1.abs() <= tolerance {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = surface.eval(&(origin + dir * mid));
        if f_mid.abs() < best.1.abs() {
            best = (mid, f_mid);
        }
        if (f_mid > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (best.1.abs() <= tolerance).then(|| origin + dir * best.0)
}

/// One view's hits, row-major over the ray grid, with analytic normals
/// oriented toward the camera.
pub fn scan_view(surface: &ImplicitSurface, pose: &Pose, cfg: &ScanConfig) -> PointCloud {
    let res = cfg.resolution as usize;
    let origin = Vec3::from(pose.position);
    let forward = Vec3::from(pose.forward);
    let right = Vec3::from(pose.right);
    let up = Vec3::from(pose.up);
    let (center, radius) = surface.bounding_sphere();
    let distance = (center - origin).norm();
    let half_angle = (radius / distance).clamp(0.0, 1.0).asin();
    let tan_half = half_angle.tan();
    let step = cfg.step_length(&surface.bbox());

    let rows: Vec<Vec<(Vec3, Vec3)>> = (0..res)
        .into_par_iter()
        .map(|i| {
            let v = ((i as f64 + 0.5) / res as f64) * 2.0 - 1.0;
            let mut row = Vec::new();
            for j in 0..res {
                let u = ((j as f64 + 0.5) / res as f64) * 2.0 - 1.0;
                let dir = (forward + right * (u * tan_half) + up * (v * tan_half)).normalize();
                if let Some(p) = ray_cast(surface, &origin, &dir, step, cfg.hit_tolerance) {
                    let g = surface.gradient(&p);
                    let mut n = if g.norm() > 0.0 { g.normalize() } else { -dir };
                    if n.dot(&dir) > 0.0 {
                        n = -n;
                    }
                    row.push((p, n));
                }
            }
            row
        })
        .collect();

    let (points, normals) = rows.into_iter().flatten().unzip();
    PointCloud::with_normals(points, normals)
}

/// Concatenates per-view clouds in view order. All scans share the world
/// frame, so the poses only need to match the scans one to one.
pub fn merge_scans(scans: &[PointCloud], poses: &[Pose]) -> Result<PointCloud> {
    if scans.len() != poses.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scans but {} poses",
            scans.len(),
            poses.len()
        )));
    }
    Ok(PointCloud::concat(scans))
}

#[derive(Clone, Debug)]
pub struct ScanOutput {
    pub cloud: PointCloud,
    pub poses: Vec<Pose>,
    pub per_view: Vec<usize>,
    pub warnings: Vec<String>,
    pub normal_diagnostics: Option<NormalDiagnostics>,
}

/// Scans every view, merges, and attaches normals according to the mode.
pub fn scan(surface: &ImplicitSurface, cfg: &ScanConfig) -> Result<ScanOutput> {
    cfg.validate()?;
    let poses = viewpoints(&surface.bbox(), cfg.views as usize, cfg.standoff);
    let scans: Vec<PointCloud> = poses.iter().map(|p| scan_view(surface, p, cfg)).collect();
    let per_view: Vec<usize> = scans.iter().map(PointCloud::len).collect();
    let mut warnings: Vec<String> = per_view
        .iter()
        .enumerate()
        .filter(|(_, &n)| n == 0)
        .map(|(i, _)| format!("view {i} produced no points"))
        .collect();
    let mut cloud = merge_scans(&scans, &poses)?;
    let mut normal_diagnostics = None;
    if cfg.normal_mode == NormalMode::PcaMst {
        if cloud.len() >= cfg.pca_k {
            let (estimated, diag) = estimate_normals(&PointCloud::new(cloud.points.clone()), cfg.pca_k)?;
            cloud = orient_normals(&estimated, cfg.pca_k)?;
            normal_diagnostics = Some(diag);
        } else {
            warnings.push(format!(
                "{} points are too few for PCA normals with k = {}; kept analytic normals",
                cloud.len(),
                cfg.pca_k
            ));
        }
    }
    Ok(ScanOutput {
        cloud,
        poses,
        per_view,
        warnings,
        normal_diagnostics,
    })
}
