//! Small geometric primitives shared by the mesh, fitting and scanning code.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self {
            min: min.into(),
            max: max.into(),
        }
    }

    pub fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for k in 0..3 {
            out.min[k] = out.min[k].min(other.min[k]);
            out.max[k] = out.max[k].max(other.max[k]);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|k| self.min[k] > self.max[k])
    }

    pub fn lo(&self) -> Vec3 {
        Vec3::from(self.min)
    }

    pub fn hi(&self) -> Vec3 {
        Vec3::from(self.max)
    }

    pub fn center(&self) -> Vec3 {
        (self.lo() + self.hi()) * 0.5
    }

    /// The per-axis size vector.
    pub fn extent(&self) -> Vec3 {
        self.hi() - self.lo()
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    /// Inclusive containment.
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let d = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }

    /// Smallest enclosing cube sharing this box's center, inflated by `pad`
    /// (relative to the largest side).
    pub fn cubified(&self, pad: f64) -> Aabb {
        let c = self.center();
        let e = self.extent();
        let mut half = 0.5 * e.x.max(e.y).max(e.z);
        if half <= 0.0 {
            half = 1e-9;
        }
        half *= 1.0 + pad;
        let h = Vec3::repeat(half);
        Aabb::new(c - h, c + h)
    }

    /// Translates the box; used for rigid-motion checks.
    pub fn translated(&self, t: &Vec3) -> Aabb {
        Aabb::new(self.lo() + t, self.hi() + t)
    }
}

/// Triangle normal (unnormalized, magnitude = twice the area).
#[inline]
pub fn triangle_cross(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    (b - a).cross(&(c - a))
}

#[inline]
pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * triangle_cross(a, b, c).norm()
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[inline]
pub fn point_triangle_distance_squared(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    (p - closest_point_on_triangle(p, a, b, c)).norm_squared()
}

/// Separating-axis triangle/box overlap test (Akenine-Möller).
pub fn triangle_overlaps_box(tri: [&Vec3; 3], center: &Vec3, half: &Vec3) -> bool {
    let v0 = tri[0] - center;
    let v1 = tri[1] - center;
    let v2 = tri[2] - center;
    let e = [v1 - v0, v2 - v1, v0 - v2];

    // Nine cross-product axes.
    for edge in &e {
        for k in 0..3 {
            let mut axis = Vec3::zeros();
            axis[k] = 1.0;
            let a = axis.cross(edge);
            if a.norm_squared() == 0.0 {
                continue;
            }
            let p0 = a.dot(&v0);
            let p1 = a.dot(&v1);
            let p2 = a.dot(&v2);
            let r = half.x * a.x.abs() + half.y * a.y.abs() + half.z * a.z.abs();
            if p0.min(p1).min(p2) > r || p0.max(p1).max(p2) < -r {
                return false;
            }
        }
    }

    // Box face normals.
    for k in 0..3 {
        let lo = v0[k].min(v1[k]).min(v2[k]);
        let hi = v0[k].max(v1[k]).max(v2[k]);
        if lo > half[k] || hi < -half[k] {
            return false;
        }
    }

    // Triangle plane.
    let n = e[0].cross(&e[1]);
    let d = n.dot(&v0);
    let r = half.x * n.x.abs() + half.y * n.y.abs() + half.z * n.z.abs();
    d.abs() <= r
}

/// Symmetric 3x3 eigen-decomposition with eigenpairs sorted by descending
/// eigenvalue. Each eigenvector is sign-canonicalized so that its first
/// component with magnitude above `1e-12` is positive.
pub fn sorted_eigen(cov: &nalgebra::Matrix3<f64>) -> ([f64; 3], [Vec3; 3]) {
    let eig = nalgebra::SymmetricEigen::new(*cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.map(|i| eig.eigenvalues[i]);
    let vecs = order.map(|i| canonical_sign(eig.eigenvectors.column(i).into_owned().normalize()));
    (vals, vecs)
}

pub fn canonical_sign(v: Vec3) -> Vec3 {
    for k in 0..3 {
        if v[k].abs() > 1e-12 {
            return if v[k] < 0.0 { -v } else { v };
        }
    }
    v
}

/// Covariance of a point set about its mean.
pub fn covariance<'a>(points: impl IntoIterator<Item = &'a Vec3> + Clone) -> (Vec3, nalgebra::Matrix3<f64>) {
    let mut n = 0usize;
    let mut mean = Vec3::zeros();
    for p in points.clone() {
        mean += p;
        n += 1;
    }
    mean /= n.max(1) as f64;
    let mut cov = nalgebra::Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n.max(1) as f64;
    (mean, cov)
}

/// Any unit vector orthogonal to `d`, picked from the world axis least
/// aligned with it.
pub fn any_orthogonal(d: &Vec3) -> Vec3 {
    let axis = least_aligned_axis(d);
    d.cross(&axis).normalize()
}

/// The world axis with the smallest absolute dot product with `d`; ties go to
/// the lower axis index.
pub fn least_aligned_axis(d: &Vec3) -> Vec3 {
    let mut best = 0;
    for k in 1..3 {
        if d[k].abs() < d[best].abs() {
            best = k;
        }
    }
    let mut axis = Vec3::zeros();
    axis[best] = 1.0;
    axis
}

/// Rotates `v` by the minimal rotation taking unit `from` onto unit `to`.
pub fn rotate_between(v: &Vec3, from: &Vec3, to: &Vec3) -> Vec3 {
    let axis = from.cross(to);
    let s = axis.norm();
    let c = from.dot(to);
    if s < 1e-15 {
        if c > 0.0 {
            return *v;
        }
        // Antiparallel: rotate by pi about any axis orthogonal to `from`.
        let k = any_orthogonal(from);
        return 2.0 * k.dot(v) * k - v;
    }
    let k = axis / s;
    v * c + k.cross(v) * s + k * k.dot(v) * (1.0 - c)
}
