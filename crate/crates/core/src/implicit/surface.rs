use rayon::prelude::*;

use crate::bvh::Bvh;
use crate::error::{Error, Result};
use crate::geom::{point_triangle_distance_squared, triangle_cross, triangle_overlaps_box, Aabb, Vec3};
use crate::mesh::TriangleMesh;

use super::{blend_weight, fit_cell, CellFit, FitConfig};

/// Growth factor applied to a sphere that holds too few triangles.
const EXPANSION: f64 = 1.5;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitStats {
    pub leaves: usize,
    /// Spheres that had to grow before fitting.
    pub expanded: usize,
    /// Leaves whose fit stayed degenerate even after growing.
    pub dropped: usize,
    /// Cells added afterwards to cover otherwise uncovered mesh vertices.
    pub repaired: usize,
    pub deepest_leaf: u32,
}

/// Result of [`ImplicitSurface::probe`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Probe {
    Covered(f64),
    /// Outside every sphere; `gap` is the distance to the nearest one.
    Uncovered {
        value: f64,
        gap: f64,
    },
}

/// Partition-of-unity blend of per-sphere linear fits. Immutable once built
/// and safe to share between threads.
#[derive(Clone, Debug)]
pub struct ImplicitSurface {
    cells: Vec<CellFit>,
    index: Bvh,
    bbox: Aabb,
    epsilon: f64,
    stats: FitStats,
}

struct Leaf {
    center: Vec3,
    half: f64,
}

struct Octree<'a> {
    mesh: &'a TriangleMesh,
    tri_index: &'a Bvh,
    cfg: &'a FitConfig,
    leaves: Vec<Leaf>,
    deepest: u32,
    /// Absolute planarity tolerance.
    tolerance: f64,
}

impl Octree<'_> {
    /// Largest distance of a triangle vertex from the area-weighted mean plane
    /// of the triangles reaching the cell's support sphere; infinite when
    /// their normals largely cancel.
    fn plane_deviation(&self, center: &Vec3, half: f64) -> f64 {
        let radius = self.cfg.sphere_radius_scale * 2.0 * half * 3f64.sqrt();
        let tris = triangles_in_sphere(self.mesh, self.tri_index, center, radius);
        let mut normal_sum = Vec3::zeros();
        let mut point_sum = Vec3::zeros();
        let mut area = 0.0;
        for &t in &tris {
            let [a, b, c] = self.mesh.corners(t);
            let n = triangle_cross(a, b, c);
            let ar = 0.5 * n.norm();
            normal_sum += n * 0.5;
            point_sum += (a + b + c) * (ar / 3.0);
            area += ar;
        }
        let len = normal_sum.norm();
        if !(area > 0.0) || len < 0.5 * area {
            return f64::INFINITY;
        }
        let n = normal_sum / len;
        let p = point_sum / area;
        tris.iter()
            .flat_map(|&t| self.mesh.corners(t))
            .map(|v| (v - p).dot(&n).abs())
            .fold(0.0, f64::max)
    }

    fn split(&mut self, center: Vec3, half: f64, depth: u32, tris: Vec<u32>) {
        if tris.is_empty() {
            return;
        }
        if depth >= self.cfg.max_depth
            || tris.len() <= self.cfg.max_triangles_per_cell
            || (self.tolerance > 0.0 && self.plane_deviation(&center, half) <= self.tolerance)
        {
            self.deepest = self.deepest.max(depth);
            self.leaves.push(Leaf { center, half });
            return;
        }
        let h = half * 0.5;
        // Slightly inflated test boxes so triangles on shared faces are not lost.
        let test_half = Vec3::repeat(h * (1.0 + 1e-9));
        for octant in 0..8 {
            let offset = Vec3::new(
                if octant & 1 == 0 { -h } else { h },
                if octant & 2 == 0 { -h } else { h },
                if octant & 4 == 0 { -h } else { h },
            );
            let c = center + offset;
            let inside: Vec<u32> = tris
                .iter()
                .copied()
                .filter(|&t| triangle_overlaps_box(self.mesh.corners(t as usize), &c, &test_half))
                .collect();
            self.split(c, h, depth + 1, inside);
        }
    }
}

/// Triangles with any point within `radius` of `center`, ascending.
fn triangles_in_sphere(mesh: &TriangleMesh, tri_index: &Bvh, center: &Vec3, radius: f64) -> Vec<usize> {
    let r2 = radius * radius;
    let mut out = Vec::new();
    tri_index.query(
        |b| b.distance_squared(center) <= r2,
        |t| {
            let [a, b, c] = mesh.corners(t);
            if point_triangle_distance_squared(center, a, b, c) <= r2 {
                out.push(t);
            }
        },
    );
    out.sort_unstable();
    out
}

enum Grown {
    Fit(CellFit, bool),
    Degenerate,
}

/// Fits a sphere at `center`, growing it until enough triangles are inside
/// and the fit is well defined.
fn grow_and_fit(
    mesh: &TriangleMesh,
    tri_index: &Bvh,
    center: Vec3,
    mut radius: f64,
    eps: f64,
    cfg: &FitConfig,
    reach: f64,
) -> Result<Grown> {
    let mut grew = false;
    loop {
        let tris = triangles_in_sphere(mesh, tri_index, &center, radius);
        if tris.len() >= cfg.min_triangles_for_fit {
            match fit_cell(center, radius, tris.iter().map(|&t| mesh.corners(t)), eps, cfg) {
                Ok(fit) => return Ok(Grown::Fit(fit, grew)),
                Err(Error::DegenerateFit) => {}
                Err(e) => return Err(e),
            }
        }
        if radius > reach {
            if tris.len() < cfg.min_triangles_for_fit {
                return Err(Error::InsufficientTriangles {
                    found: tris.len(),
                    required: cfg.min_triangles_for_fit,
                });
            }
            return Ok(Grown::Degenerate);
        }
        radius *= EXPANSION;
        grew = true;
    }
}

/// Builds the implicit surface of `mesh`.
pub fn build_surface(mesh: &TriangleMesh, cfg: &FitConfig) -> Result<ImplicitSurface> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    cfg.validate()?;
    mesh.validate()?;
    let bbox = mesh.bbox();
    let eps = cfg.resolve_epsilon(bbox.diagonal());

    let tri_boxes: Vec<Aabb> = (0..mesh.triangles.len())
        .map(|t| Aabb::from_points(mesh.corners(t)))
        .collect();
    let tri_index = Bvh::build(&tri_boxes);

    let root = bbox.cubified(0.01);
    let mut octree = Octree {
        mesh,
        tri_index: &tri_index,
        cfg,
        leaves: Vec::new(),
        deepest: 0,
        tolerance: cfg.planarity_tolerance * bbox.diagonal(),
    };
    octree.split(
        root.center(),
        0.5 * root.extent().x,
        0,
        (0..mesh.triangles.len() as u32).collect(),
    );
    let leaves = octree.leaves;

    // Once a sphere reaches this radius around any point of the root cube it
    // contains the whole mesh.
    let reach = 2.0 * root.diagonal();
    let grown: Vec<Grown> = leaves
        .par_iter()
        .map(|leaf| {
            let radius = cfg.sphere_radius_scale * 2.0 * leaf.half * 3f64.sqrt();
            grow_and_fit(mesh, &tri_index, leaf.center, radius, eps, cfg, reach)
        })
        .collect::<Result<_>>()?;

    let mut stats = FitStats {
        leaves: leaves.len(),
        deepest_leaf: octree.deepest,
        ..FitStats::default()
    };
    let mut cells = Vec::with_capacity(grown.len());
    for g in grown {
        match g {
            Grown::Fit(fit, grew) => {
                stats.expanded += usize::from(grew);
                cells.push(fit);
            }
            Grown::Degenerate => stats.dropped += 1,
        }
    }

    let mut surface = ImplicitSurface::from_cells(cells, bbox, eps)?;

    // Cover any vertex the leaf spheres missed with a sphere of its own.
    let smallest = 2.0 * (0.5 * root.extent().x) / f64::from(1u32 << octree.deepest.min(20)) * 3f64.sqrt();
    let mut extra = Vec::new();
    for v in &mesh.vertices {
        if surface.covers(v) || extra.iter().any(|c: &CellFit| (v - c.center).norm() < c.radius) {
            continue;
        }
        if let Grown::Fit(fit, _) = grow_and_fit(mesh, &tri_index, *v, smallest, eps, cfg, reach)? {
            extra.push(fit);
        }
    }
    if !extra.is_empty() {
        stats.repaired = extra.len();
        let mut cells = surface.cells;
        cells.extend(extra);
        surface = ImplicitSurface::from_cells(cells, bbox, eps)?;
    }
    surface.stats = stats;
    Ok(surface)
}

impl ImplicitSurface {
    pub fn from_cells(cells: Vec<CellFit>, bbox: Aabb, epsilon: f64) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvariantViolation("implicit surface has no cells".into()));
        }
        for (i, c) in cells.iter().enumerate() {
            if !(c.radius > 0.0) || !(c.normal.norm() > 0.0) {
                return Err(Error::InvariantViolation(format!(
                    "cell {i} has a non-positive radius or zero normal"
                )));
            }
        }
        let boxes: Vec<Aabb> = cells
            .iter()
            .map(|c| {
                let r = Vec3::repeat(c.radius);
                Aabb::new(c.center - r, c.center + r)
            })
            .collect();
        Ok(Self {
            index: Bvh::build(&boxes),
            cells,
            bbox,
            epsilon,
            stats: FitStats::default(),
        })
    }

    pub fn cells(&self) -> &[CellFit] {
        &self.cells
    }

    /// Bounding box of the source mesh.
    pub fn bbox(&self) -> Aabb {
        self.bbox
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn stats(&self) -> &FitStats {
        &self.stats
    }

    /// Sphere enclosing the source mesh's bounding box.
    pub fn bounding_sphere(&self) -> (Vec3, f64) {
        (self.bbox.center(), 0.5 * self.bbox.diagonal())
    }

    /// Whether `x` lies strictly inside at least one support sphere.
    pub fn covers(&self, x: &Vec3) -> bool {
        let mut hit = false;
        self.index.query_point(x, |i| {
            let c = &self.cells[i];
            hit |= (x - c.center).norm_squared() < c.radius * c.radius;
        });
        hit
    }

    /// Index of the sphere whose boundary is nearest to an uncovered `x`.
    fn nearest_cell(&self, x: &Vec3) -> usize {
        self.index
            .min_by(
                |b| b.distance_squared(x).sqrt(),
                |i| (x - self.cells[i].center).norm() - self.cells[i].radius,
            )
            .expect("surface has cells")
            .0
    }

    fn blend(&self, x: &Vec3) -> Option<f64> {
        let mut wsum = 0.0;
        let mut fsum = 0.0;
        self.index.query_point(x, |i| {
            let c = &self.cells[i];
            let r2 = (x - c.center).norm_squared();
            if r2 < c.radius * c.radius {
                let (q, _) = blend_weight(r2.sqrt(), c.radius);
                wsum += q;
                fsum += q * c.shape(x);
            }
        });
        (wsum > 0.0).then(|| fsum / wsum)
    }

    /// `f(x)`: blended shape functions of all spheres containing `x`, or the
    /// nearest sphere's shape function when none does.
    pub fn eval(&self, x: &Vec3) -> f64 {
        match self.probe(x) {
            Probe::Covered(f) => f,
            Probe::Uncovered { value, .. } => value,
        }
    }

    /// Like [`eval`](Self::eval), but also reports how far an uncovered `x`
    /// is from the nearest support sphere.
    pub fn probe(&self, x: &Vec3) -> Probe {
        if let Some(f) = self.blend(x) {
            return Probe::Covered(f);
        }
        let (i, gap) = self
            .index
            .min_by(
                |b| b.distance_squared(x).sqrt(),
                |i| (x - self.cells[i].center).norm() - self.cells[i].radius,
            )
            .expect("surface has cells");
        Probe::Uncovered {
            value: self.cells[i].shape(x),
            gap: gap.max(0.0),
        }
    }

    /// Closed-form gradient of [`eval`](Self::eval).
    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        self.eval_with_gradient(x).1
    }

    pub fn eval_with_gradient(&self, x: &Vec3) -> (f64, Vec3) {
        let mut wsum = 0.0;
        let mut fsum = 0.0;
        let mut dw = Vec3::zeros();
        let mut df = Vec3::zeros();
        self.index.query_point(x, |i| {
            let c = &self.cells[i];
            let d = x - c.center;
            let r2 = d.norm_squared();
            if r2 < c.radius * c.radius {
                let r = r2.sqrt();
                let (q, dq) = blend_weight(r, c.radius);
                let grad_q = if r > 0.0 { d * (dq / r) } else { Vec3::zeros() };
                let s = c.shape(x);
                wsum += q;
                fsum += q * s;
                dw += grad_q;
                df += grad_q * s + c.normal * q;
            }
        });
        if wsum > 0.0 {
            let f = fsum / wsum;
            (f, (df - dw * f) / wsum)
        } else {
            let c = &self.cells[self.nearest_cell(x)];
            (c.shape(x), c.normal)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_mesh() -> TriangleMesh {
        TriangleMesh {
            vertices: vec![
                Vec3::new(-1.0, -1.0, 0.0),
                Vec3::new(1.0, -1.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(-1.0, 1.0, 0.0),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    #[test]
    fn empty_mesh_rejected() {
        assert!(matches!(
            build_surface(&TriangleMesh::default(), &FitConfig::default()),
            Err(Error::EmptyMesh)
        ));
    }

    #[test]
    fn single_triangle_single_cell() {
        let mesh = TriangleMesh {
            vertices: vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            triangles: vec![[0, 1, 2]],
        };
        let cfg = FitConfig {
            max_depth: 1,
            ..FitConfig::default()
        };
        let s = build_surface(&mesh, &cfg).unwrap();
        assert_eq!(s.cells().len(), 1);
        for v in &mesh.vertices {
            assert!(s.covers(v));
            assert!(s.eval(v).abs() < 1e-12);
        }
        assert!(s.eval(&Vec3::new(0.2, 0.2, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn planar_surface_is_exact_everywhere() {
        let cfg = FitConfig {
            max_depth: 4,
            max_triangles_per_cell: 0,
            planarity_tolerance: 0.0,
            ..FitConfig::default()
        };
        let s = build_surface(&plane_mesh(), &cfg).unwrap();
        assert!(s.cells().len() > 1);
        for &(x, y) in &[(0.0, 0.0), (0.3, -0.7), (-0.99, 0.5), (0.123, 0.456)] {
            let p = Vec3::new(x, y, 0.0);
            assert!(s.eval(&p).abs() < 1e-9);
            let up = Vec3::new(x, y, 0.05);
            assert!(s.eval(&up) > 0.0);
            let g = s.gradient(&up);
            assert!(g.x.abs() < 1e-9 && g.y.abs() < 1e-9 && g.z > 0.0, "{g:?}");
        }
    }

    #[test]
    fn distant_triangles_force_expansion() {
        let mesh = TriangleMesh {
            vertices: vec![
                Vec3::zeros(),
                Vec3::new(0.1, 0.0, 0.0),
                Vec3::new(0.0, 0.1, 0.0),
                Vec3::new(5.0, 5.0, 5.0),
                Vec3::new(5.1, 5.0, 5.0),
                Vec3::new(5.0, 5.1, 5.0),
            ],
            triangles: vec![[0, 1, 2], [3, 4, 5]],
        };
        let cfg = FitConfig {
            max_depth: 2,
            max_triangles_per_cell: 1,
            min_triangles_for_fit: 2,
            ..FitConfig::default()
        };
        let s = build_surface(&mesh, &cfg).unwrap();
        assert!(s.stats().expanded > 0);
        assert!(s.cells().iter().all(|c| c.radius > (Vec3::repeat(5.0)).norm() * 0.5));
        for v in &mesh.vertices {
            assert!(s.covers(v));
        }
        // More triangles than the mesh has.
        let cfg = FitConfig {
            min_triangles_for_fit: 3,
            ..cfg
        };
        assert!(matches!(
            build_surface(&mesh, &cfg),
            Err(Error::InsufficientTriangles { .. })
        ));
    }

    #[test]
    fn exterior_queries_fall_back_to_nearest_sphere() {
        let cfg = FitConfig {
            max_depth: 3,
            ..FitConfig::default()
        };
        let s = build_surface(&plane_mesh(), &cfg).unwrap();
        let far = Vec3::new(0.0, 0.0, 50.0);
        assert!(!s.covers(&far));
        assert!(s.eval(&far) > 0.0);
        assert!(s.eval(&Vec3::new(0.0, 0.0, -50.0)) < 0.0);
    }
}
