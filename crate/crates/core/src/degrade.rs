//! Controlled point-cloud degradations: noise along normals, occlusion balls,
//! locally uneven density, and scan-resolution density variants.
//!
//! All randomness comes from [`CounterRng`] keyed by the point or ball index,
//! so results depend only on the input order and the seed.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{covariance, sorted_eigen, Aabb, Vec3};
use crate::implicit::ImplicitSurface;
use crate::kdtree::KdTree;
use crate::rng::CounterRng;
use crate::scanner::{scan, ScanConfig};

/// Resolutions of the density variants.
pub const DENSITY_RESOLUTIONS: [u32; 3] = [50, 100, 150];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// Scale of the displacement along the normal.
    pub s: f64,
    /// One noise point is inserted every `d` points.
    pub d: usize,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            s: 0.01,
            d: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcclusionParams {
    /// Number of balls.
    pub n: usize,
    /// Ball radius as a fraction of the bounding-box extent norm.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for OcclusionParams {
    fn default() -> Self {
        Self {
            n: 2,
            lambda: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnevenParams {
    /// Region whose points receive extra samples. When absent a region
    /// spanning 30% of the cloud's extent per axis is placed at random.
    pub region: Option<Aabb>,
    /// Neighborhood radius for the local PCA.
    pub r: f64,
    /// Ranges for the random multiples of the first and second principal
    /// directions. When absent, `[-r/2, r/2]`.
    pub lambda1: Option<[f64; 2]>,
    pub lambda2: Option<[f64; 2]>,
    pub seed: u64,
}

impl Default for UnevenParams {
    fn default() -> Self {
        Self {
            region: None,
            r: 0.1,
            lambda1: None,
            lambda2: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Ball {
    /// Strict interior test.
    pub fn contains(&self, p: &Vec3) -> bool {
        (p - Vec3::from(self.center)).norm_squared() < self.radius * self.radius
    }
}

/// Inserts `q_i + G_i * s * n_i` for `i = 0, d, 2d, ...`, with `G_i` standard
/// normal. Originals come first, inserted points follow in index order and
/// inherit their donor's normal.
pub fn add_noise(cloud: &PointCloud, p: &NoiseParams) -> Result<PointCloud> {
    let normals = cloud.normals.as_ref().ok_or(Error::MissingNormals)?;
    if p.d < 1 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    if !(p.s >= 0.0) {
        return Err(Error::InvalidParameter("s must be non-negative".into()));
    }
    let rng = CounterRng::new(p.seed, "noise");
    let mut points = cloud.points.clone();
    let mut out_normals = normals.clone();
    for i in (0..cloud.len()).step_by(p.d) {
        let g = rng.normal(i as u64);
        points.push(cloud.points[i] + normals[i] * (g * p.s));
        out_normals.push(normals[i]);
    }
    Ok(PointCloud::with_normals(points, out_normals))
}

/// Places `n` balls centered on randomly chosen cloud points with radius
/// `lambda * |extent(bbox)|`.
pub fn occlusion_balls(cloud: &PointCloud, bbox: &Aabb, p: &OcclusionParams) -> Result<Vec<Ball>> {
    if !(p.lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    if p.n == 0 {
        return Ok(Vec::new());
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let rng = CounterRng::new(p.seed, "occlude");
    let radius = p.lambda * bbox.extent().norm();
    Ok((0..p.n)
        .map(|b| Ball {
            center: cloud.points[rng.below(b as u64, cloud.len())].into(),
            radius,
        })
        .collect())
}

/// Removes every point strictly inside any ball, preserving order.
pub fn remove_in_balls(cloud: &PointCloud, balls: &[Ball]) -> PointCloud {
    let keep: Vec<bool> = cloud
        .points
        .iter()
        .map(|p| !balls.iter().any(|b| b.contains(p)))
        .collect();
    let points = cloud
        .points
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(p, _)| *p)
        .collect();
    let normals = cloud
        .normals
        .as_ref()
        .map(|ns| ns.iter().zip(&keep).filter(|(_, &k)| k).map(|(n, _)| *n).collect());
    PointCloud { points, normals }
}

/// Simulated missing data: the survivors and the balls that carved them.
pub fn occlude(cloud: &PointCloud, bbox: &Aabb, p: &OcclusionParams) -> Result<(PointCloud, Vec<Ball>)> {
    let balls = occlusion_balls(cloud, bbox, p)?;
    Ok((remove_in_balls(cloud, &balls), balls))
}

/// A box spanning `fraction` of `bbox` on each axis at a seeded position.
pub fn random_region(bbox: &Aabb, fraction: f64, seed: u64) -> Aabb {
    let rng = CounterRng::new(seed, "uneven-region");
    let ext = bbox.extent();
    let mut lo = Vec3::zeros();
    let mut hi = Vec3::zeros();
    for k in 0..3 {
        let start = bbox.min[k] + rng.uniform(k as u64) * (1.0 - fraction) * ext[k];
        lo[k] = start;
        hi[k] = start + fraction * ext[k];
    }
    Aabb::new(lo, hi)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UnevenDiagnostics {
    pub region: Option<Aabb>,
    pub inserted: usize,
    /// Points in the region with fewer than three neighbors.
    pub skipped: usize,
    /// Neighborhoods whose second principal direction is not unique.
    pub degenerate: usize,
    /// Candidates that fell outside the region and were dropped.
    pub escaped: usize,
}

/// For every point inside `region` with at least three points (itself
/// included) within radius `r`, inserts `q + l1 * P + l2 * S`, where `P` and
/// `S` are the first and second principal directions of that neighborhood.
/// Candidates landing outside `region` are dropped, so the cloud outside the
/// region is left exactly as it was. Originals come first; inserted points
/// follow in index order and, when the cloud has normals, inherit the donor's
/// normal.
pub fn uneven_density(cloud: &PointCloud, p: &UnevenParams) -> Result<(PointCloud, UnevenDiagnostics)> {
    if !(p.r > 0.0) {
        return Err(Error::InvalidParameter("r must be positive".into()));
    }
    let region = match p.region {
        Some(r) if r.is_empty() => return Err(Error::InvalidParameter("region is empty".into())),
        Some(r) => r,
        None if cloud.is_empty() => return Ok((cloud.clone(), UnevenDiagnostics::default())),
        None => random_region(&cloud.bbox(), 0.3, p.seed),
    };
    let half = 0.5 * p.r;
    let [l1lo, l1hi] = p.lambda1.unwrap_or([-half, half]);
    let [l2lo, l2hi] = p.lambda2.unwrap_or([-half, half]);
    let rng1 = CounterRng::new(p.seed, "uneven-l1");
    let rng2 = CounterRng::new(p.seed, "uneven-l2");

    let tree = KdTree::new(&cloud.points);
    let mut diag = UnevenDiagnostics {
        region: Some(region),
        ..UnevenDiagnostics::default()
    };
    let mut points = cloud.points.clone();
    let mut normals = cloud.normals.clone();
    for (i, q) in cloud.points.iter().enumerate() {
        if !region.contains(q) {
            continue;
        }
        let nbrs = tree.within(q, p.r * p.r);
        if nbrs.len() < 3 {
            diag.skipped += 1;
            continue;
        }
        let (_, cov) = covariance(nbrs.iter().map(|&j| &cloud.points[j]));
        let (vals, vecs) = sorted_eigen(&cov);
        if (vals[1] - vals[2]).abs() <= 1e-9 * vals[0].abs().max(f64::MIN_POSITIVE) {
            diag.degenerate += 1;
        }
        let l1 = rng1.uniform_in(i as u64, l1lo, l1hi);
        let l2 = rng2.uniform_in(i as u64, l2lo, l2hi);
        let candidate = q + vecs[0] * l1 + vecs[1] * l2;
        if !region.contains(&candidate) {
            diag.escaped += 1;
            continue;
        }
        points.push(candidate);
        if let Some(ns) = normals.as_mut() {
            ns.push(ns[i]);
        }
        diag.inserted += 1;
    }
    Ok((PointCloud { points, normals }, diag))
}

/// Scans the surface at each of [`DENSITY_RESOLUTIONS`] with otherwise
/// identical settings.
pub fn density_variants(surface: &ImplicitSurface, base: &ScanConfig) -> Result<Vec<(u32, PointCloud)>> {
    DENSITY_RESOLUTIONS
        .iter()
        .map(|&resolution| {
            let cfg = ScanConfig {
                resolution,
                ..base.clone()
            };
            Ok((resolution, scan(surface, &cfg)?.cloud))
        })
        .collect()
}
