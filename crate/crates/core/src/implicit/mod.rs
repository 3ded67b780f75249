//! Smooth implicit approximation of a triangle mesh.
//!
//! Space around the mesh is covered by spheres attached to the leaves of an
//! adaptive octree. Each sphere carries a linear shape function fitted to the
//! triangles it contains, with triangle contributions weighted by
//! `w(x, t) = 1 / (|x - t|^2 + eps^2)^2` integrated over each triangle. The
//! global function blends the local fits with compactly supported quadratic
//! B-spline weights that sum to one wherever spheres overlap.
//!
//! Sign convention: with outward-facing mesh normals, `f > 0` outside.

mod cache;
mod quadrature;
mod surface;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{triangle_cross, Vec3};

pub use cache::{read_surface, write_surface, MAGIC, VERSION};
pub use quadrature::{Moments, Quadrature};
pub use surface::{build_surface, FitStats, ImplicitSurface, Probe};

/// Controls for octree construction and per-cell fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Absolute smoothing factor. When absent, `epsilon_scale` times the mesh
    /// bounding-box diagonal is used.
    pub epsilon: Option<f64>,
    pub epsilon_scale: f64,
    pub max_depth: u32,
    /// Cells holding at most this many triangles are not subdivided.
    pub max_triangles_per_cell: usize,
    /// Cells whose triangle vertices all lie within this fraction of the
    /// bounding-box diagonal of their mean plane are not subdivided. Zero
    /// disables the rule.
    pub planarity_tolerance: f64,
    pub min_triangles_for_fit: usize,
    /// Points of the base triangle rule: 1, 3 or 7.
    pub quadrature_order: u32,
    /// Maximum recursive 4-way splits per triangle during integration.
    pub quadrature_splits: u32,
    pub sphere_radius_scale: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            epsilon_scale: 0.005,
            max_depth: 8,
            max_triangles_per_cell: 0,
            planarity_tolerance: 2e-4,
            min_triangles_for_fit: 1,
            quadrature_order: 7,
            quadrature_splits: 6,
            sphere_radius_scale: 1.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self.epsilon {
            Some(e) if !(e > 0.0 && e.is_finite()) => return bad("epsilon must be positive"),
            None if !(self.epsilon_scale > 0.0 && self.epsilon_scale.is_finite()) => {
                return bad("epsilon_scale must be positive")
            }
            _ => {}
        }
        if !(1..=21).contains(&self.max_depth) {
            return bad("max_depth must lie in [1, 21]");
        }
        if !(self.planarity_tolerance >= 0.0) {
            return bad("planarity_tolerance must be non-negative");
        }
        if self.min_triangles_for_fit < 1 {
            return bad("min_triangles_for_fit must be at least 1");
        }
        if !(self.sphere_radius_scale > 0.0 && self.sphere_radius_scale.is_finite()) {
            return bad("sphere_radius_scale must be positive");
        }
        self.quadrature()?;
        Ok(())
    }

    pub fn quadrature(&self) -> Result<Quadrature> {
        Quadrature::new(self.quadrature_order, self.quadrature_splits)
            .ok_or_else(|| Error::InvalidParameter("quadrature_order must be 1, 3 or 7".into()))
    }

    /// The smoothing factor for a mesh with the given bounding-box diagonal.
    pub fn resolve_epsilon(&self, diagonal: f64) -> f64 {
        self.epsilon.unwrap_or(self.epsilon_scale * diagonal)
    }
}

/// `1 / (|x - t|^2 + eps^2)^2`
#[inline]
pub fn weight(x: &Vec3, t: &Vec3, eps: f64) -> f64 {
    let d2 = (x - t).norm_squared() + eps * eps;
    1.0 / (d2 * d2)
}

/// A fitted support sphere with linear shape function
/// `s(x) = <x, normal> - offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellFit {
    pub center: Vec3,
    pub radius: f64,
    /// Weighted average of unit triangle normals. Not renormalized.
    pub normal: Vec3,
    pub offset: f64,
}

impl CellFit {
    #[inline]
    pub fn shape(&self, x: &Vec3) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

/// Fits the shape function of one sphere to the given triangles.
///
/// The normal term is the weight-averaged unit triangle normal and the offset
/// is its inner product with the weight-averaged triangle point, both
/// weighted by `∫ w(center, t) dt` over each triangle.
pub fn fit_cell<'a>(
    center: Vec3,
    radius: f64,
    triangles: impl IntoIterator<Item = [&'a Vec3; 3]>,
    eps: f64,
    cfg: &FitConfig,
) -> Result<CellFit> {
    let quad = cfg.quadrature()?;
    let mut mass = 0.0;
    let mut normal_sum = Vec3::zeros();
    let mut point_sum = Vec3::zeros();
    let mut count = 0usize;
    for tri in triangles {
        count += 1;
        let cross = triangle_cross(tri[0], tri[1], tri[2]);
        let len = cross.norm();
        if !(len > 0.0) {
            continue;
        }
        let m = quad.integrate(&center, tri, eps);
        mass += m.mass;
        normal_sum += cross / len * m.mass;
        point_sum += m.moment;
    }
    if count < cfg.min_triangles_for_fit {
        return Err(Error::InsufficientTriangles {
            found: count,
            required: cfg.min_triangles_for_fit,
        });
    }
    if !(mass > 0.0) {
        return Err(Error::DegenerateFit);
    }
    let normal = normal_sum / mass;
    if !(normal.norm() > 1e-9) {
        return Err(Error::DegenerateFit);
    }
    let avg_point = point_sum / mass;
    Ok(CellFit {
        center,
        radius,
        normal,
        offset: avg_point.dot(&normal),
    })
}

/// Quadratic B-spline bump of the normalized distance `r / radius`; 3/4 at
/// the center, zero from the sphere boundary on. Returns value and
/// derivative with respect to `r`.
#[inline]
pub fn blend_weight(r: f64, radius: f64) -> (f64, f64) {
    let k = 1.5 / radius;
    let t = k * r;
    if t <= 0.5 {
        (0.75 - t * t, -2.0 * t * k)
    } else if t < 1.5 {
        let u = 1.5 - t;
        (0.5 * u * u, -u * k)
    } else {
        (0.0, 0.0)
    }
}
