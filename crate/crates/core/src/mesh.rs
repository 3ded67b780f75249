//! Indexed triangle meshes: tube sweeping along skeleton edges, icospheres for
//! oracle tests, and Wavefront OBJ I/O.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{any_orthogonal, rotate_between, triangle_area, Aabb, Vec3};
use crate::skeleton::SkeletonGraph;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn corners(&self, t: usize) -> [&Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [&self.vertices[a], &self.vertices[b], &self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        triangle_area(a, b, c)
    }

    /// Checks index ranges and that no triangle is degenerate.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::InvariantViolation(format!(
                    "triangle {t} has an out-of-range index"
                )));
            }
            if !(self.area(t) > 0.0) {
                return Err(Error::InvariantViolation(format!("triangle {t} is degenerate")));
            }
        }
        Ok(())
    }

    /// Geodesic sphere from a subdivided icosahedron. Subdivision level `s`
    /// gives `20 * 4^s` faces and `10 * 4^s + 2` vertices, all at `radius`.
    pub fn icosphere(subdivisions: u32, radius: f64) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
            let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
                let key = (a.min(b), a.max(b));
                *midpoint.entry(key).or_insert_with(|| {
                    vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                    vertices.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        for v in &mut vertices {
            *v *= radius;
        }
        Self {
            vertices,
            triangles: faces,
        }
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::with_capacity(self.vertices.len() * 40 + self.triangles.len() * 24);
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for [a, b, c] in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", a + 1, b + 1, c + 1);
        }
        s
    }

    /// Parses `v` and `f` records; other records are ignored. Polygonal faces
    /// are fan-triangulated and `v/vt/vn` references use the vertex index.
    pub fn parse_obj(text: &str) -> Result<Self> {
        let mut mesh = TriangleMesh::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            let mut fields = content.split_whitespace();
            let err = |message: String| Error::Parse { line, message };
            match fields.next() {
                Some("v") => {
                    let c: Vec<f64> = fields
                        .take(3)
                        .map(|s| s.parse::<f64>().map_err(|e| err(format!("bad coordinate {s:?}: {e}"))))
                        .collect::<Result<_>>()?;
                    if c.len() != 3 {
                        return Err(err("vertex needs three coordinates".into()));
                    }
                    mesh.vertices.push(Vec3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let idx: Vec<usize> = fields
                        .map(|s| {
                            let head = s.split('/').next().unwrap_or("");
                            let i: i64 = head.parse().map_err(|e| err(format!("bad index {s:?}: {e}")))?;
                            let n = mesh.vertices.len() as i64;
                            let resolved = if i < 0 { n + i } else { i - 1 };
                            if resolved < 0 || resolved >= n {
                                return Err(err(format!("index {i} out of range")));
                            }
                            Ok(resolved as usize)
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() < 3 {
                        return Err(err("face needs at least three vertices".into()));
                    }
                    for k in 1..idx.len() - 1 {
                        mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Ok(mesh)
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_obj_string()).map_err(|e| Error::file(path, e))
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse_obj(&text)
    }
}

fn push_ring(mesh: &mut TriangleMesh, center: &Vec3, u: &Vec3, v: &Vec3, radius: f64, sides: usize) -> usize {
    let start = mesh.vertices.len();
    for k in 0..sides {
        let theta = std::f64::consts::TAU * k as f64 / sides as f64;
        mesh.vertices
            .push(center + (u * theta.cos() + v * theta.sin()) * radius);
    }
    start
}

/// Sweeps a truncated-cone tube along every skeleton edge. Each edge gets its
/// own pair of `sides`-gon rings; ring orientation is carried from edge to
/// edge by minimal rotation. The root and every leaf tip are closed by a
/// triangle fan around a center vertex. Tubes overlap freely at junctions.
/// Triangles wind counter-clockwise seen from outside.
pub fn sweep_mesh(skeleton: &SkeletonGraph, sides: usize) -> Result<TriangleMesh> {
    if sides < 3 {
        return Err(Error::InvalidParameter("sweep needs at least 3 sides".into()));
    }
    let topo = skeleton.validate()?;
    let n = skeleton.nodes.len();
    let mut mesh = TriangleMesh::default();
    // Frame reference vector of the edge ending at each node.
    let mut frame: Vec<Option<(Vec3, Vec3)>> = vec![None; n];

    for &p in &topo.bfs {
        for &c in &topo.children[p] {
            let a = skeleton.nodes[p].position;
            let b = skeleton.nodes[c].position;
            let axis = b - a;
            let len = axis.norm();
            if !(len > 0.0) {
                return Err(Error::ZeroLengthEdge {
                    parent: skeleton.nodes[p].id,
                    child: skeleton.nodes[c].id,
                });
            }
            let d = axis / len;
            let u = match frame[p] {
                Some((u_in, d_in)) => {
                    let r = rotate_between(&u_in, &d_in, &d);
                    let r = r - d * r.dot(&d);
                    if r.norm() > 1e-9 {
                        r.normalize()
                    } else {
                        any_orthogonal(&d)
                    }
                }
                None => any_orthogonal(&d),
            };
            let v = d.cross(&u);
            frame[c] = Some((u, d));

            let ra = push_ring(&mut mesh, &a, &u, &v, skeleton.nodes[p].radius, sides);
            let rb = push_ring(&mut mesh, &b, &u, &v, skeleton.nodes[c].radius, sides);
            for k in 0..sides {
                let k1 = (k + 1) % sides;
                mesh.triangles.push([ra + k, ra + k1, rb + k1]);
                mesh.triangles.push([ra + k, rb + k1, rb + k]);
            }
            if p == topo.root {
                let apex = mesh.vertices.len();
                mesh.vertices.push(a);
                for k in 0..sides {
                    mesh.triangles.push([apex, ra + (k + 1) % sides, ra + k]);
                }
            }
            if topo.children[c].is_empty() {
                let apex = mesh.vertices.len();
                mesh.vertices.push(b);
                for k in 0..sides {
                    mesh.triangles.push([apex, rb + k, rb + (k + 1) % sides]);
                }
            }
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::triangle_cross;
    use crate::skeleton::{generate_skeleton, SizeClass, SkeletonNode, TreeParams};

    fn path(points: &[(Vec3, f64)]) -> SkeletonGraph {
        SkeletonGraph {
            nodes: points
                .iter()
                .enumerate()
                .map(|(id, &(position, radius))| SkeletonNode { id, position, radius })
                .collect(),
            edges: (1..points.len()).map(|i| (i - 1, i)).collect(),
            root: 0,
        }
    }

    /// Distance from `p` to the infinite line through `a` with direction `d`,
    /// via the parallelogram-area formula.
    fn line_distance(p: &Vec3, a: &Vec3, d: &Vec3) -> f64 {
        (p - a).cross(d).norm() / d.norm()
    }

    #[test]
    fn single_edge_combinatorics() {
        let g = path(&[(Vec3::zeros(), 0.3), (Vec3::new(0.2, 0.1, 1.0), 0.2)]);
        let m = sweep_mesh(&g, 8).unwrap();
        assert_eq!(m.vertices.len(), 18);
        assert_eq!(m.triangles.len(), 32);
        m.validate().unwrap();
        let a = g.nodes[0].position;
        let d = g.nodes[1].position - a;
        for k in 0..8 {
            assert!((line_distance(&m.vertices[k], &a, &d) - 0.3).abs() < 1e-12);
            assert!((line_distance(&m.vertices[8 + k], &a, &d) - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn minimal_sides() {
        let g = path(&[(Vec3::zeros(), 0.1), (Vec3::new(0.0, 0.0, 1.0), 0.1)]);
        let m = sweep_mesh(&g, 3).unwrap();
        m.validate().unwrap();
        assert!(sweep_mesh(&g, 2).is_err());
    }

    #[test]
    fn colinear_path_rings_at_radius() {
        let r = 0.25;
        let g = path(&[
            (Vec3::zeros(), r),
            (Vec3::new(0.0, 0.0, 0.7), r),
            (Vec3::new(0.0, 0.0, 1.5), r),
        ]);
        let m = sweep_mesh(&g, 12).unwrap();
        let rings = 2 * 12 * 2;
        for v in &m.vertices[..rings + 1] {
            // Skip cap centers, which lie on the axis.
            let dist = line_distance(v, &Vec3::zeros(), &Vec3::z());
            if dist > 1e-12 {
                assert!((dist - r).abs() <= 1e-9 * r, "{dist}");
            }
        }
        let off_axis = m
            .vertices
            .iter()
            .filter(|v| line_distance(v, &Vec3::zeros(), &Vec3::z()) > 1e-12)
            .count();
        assert_eq!(off_axis, rings);
    }

    #[test]
    fn zero_length_edge_rejected() {
        let g = path(&[(Vec3::zeros(), 0.1), (Vec3::zeros(), 0.1)]);
        assert!(matches!(sweep_mesh(&g, 6), Err(Error::ZeroLengthEdge { .. })));
    }

    #[test]
    fn normals_point_outward_on_a_cylinder() {
        let g = path(&[(Vec3::zeros(), 0.2), (Vec3::new(0.0, 0.0, 1.0), 0.2)]);
        let m = sweep_mesh(&g, 10).unwrap();
        let center = Vec3::new(0.0, 0.0, 0.5);
        for t in 0..m.triangles.len() {
            let [a, b, c] = m.corners(t);
            let n = triangle_cross(a, b, c);
            let centroid = (a + b + c) / 3.0;
            assert!(n.dot(&(centroid - center)) > 0.0, "triangle {t}");
        }
    }

    #[test]
    fn tree_vertex_count_formula() {
        let g = generate_skeleton(&TreeParams::preset(SizeClass::Medium, 8)).unwrap();
        let topo = g.validate().unwrap();
        let sides = 7;
        let m = sweep_mesh(&g, sides).unwrap();
        let leaves = topo.children.iter().filter(|c| c.is_empty()).count();
        let root_edges = topo.children[topo.root].len();
        assert_eq!(m.vertices.len(), g.edges.len() * 2 * sides + leaves + root_edges);
        m.validate().unwrap();
    }

    #[test]
    fn icosphere_counts() {
        let m = TriangleMesh::icosphere(2, 1.0);
        assert_eq!(m.triangles.len(), 320);
        assert_eq!(m.vertices.len(), 162);
        assert!(m.vertices.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        // Outward winding.
        for t in 0..m.triangles.len() {
            let [a, b, c] = m.corners(t);
            assert!(triangle_cross(a, b, c).dot(&(a + b + c)) > 0.0);
        }
    }

    #[test]
    fn obj_round_trip_and_polygons() {
        let m = TriangleMesh::icosphere(1, 2.0);
        let back = TriangleMesh::parse_obj(&m.to_obj_string()).unwrap();
        assert_eq!(back, m);
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n";
        let q = TriangleMesh::parse_obj(quad).unwrap();
        assert_eq!(q.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(matches!(
            TriangleMesh::parse_obj("v 0 0 0\nf 1 2 3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
