//! Integrals of the fitting weight over triangles.
//!
//! A symmetric barycentric rule is applied to each triangle, recursively
//! splitting into four wherever the triangle is large compared to its distance
//! from the weight's center (plus epsilon). The split schedule depends only
//! on geometry, so results are deterministic.

use crate::geom::{triangle_area, Vec3};

use super::weight;

/// Barycentric coordinates and weights (summing to one).
type Rule = &'static [([f64; 3], f64)];

const CENTROID: Rule = &[([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1.0)];

const THREE_POINT: Rule = &[
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

// Degree-5 Dunavant rule.
const A1: f64 = 0.059_715_871_789_770;
const B1: f64 = 0.470_142_064_105_115;
const W1: f64 = 0.132_394_152_788_506;
const A2: f64 = 0.797_426_985_353_087;
const B2: f64 = 0.101_286_507_323_456;
const W2: f64 = 0.125_939_180_544_827;

const SEVEN_POINT: Rule = &[
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([A1, B1, B1], W1),
    ([B1, A1, B1], W1),
    ([B1, B1, A1], W1),
    ([A2, B2, B2], W2),
    ([B2, A2, B2], W2),
    ([B2, B2, A2], W2),
];

/// Split while the sub-triangle's circumscribing radius exceeds this fraction
/// of `sqrt(lower_bound_distance^2 + eps^2)`.
const REFINE_RATIO: f64 = 0.5;

#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    rule: Rule,
    max_splits: u32,
}

/// Weighted moments over one triangle: `mass = ∫ w dt`, `moment = ∫ t w dt`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub moment: Vec3,
}

impl Quadrature {
    /// `points` selects the base rule (1, 3 or 7).
    pub fn new(points: u32, max_splits: u32) -> Option<Self> {
        let rule = match points {
            1 => CENTROID,
            3 => THREE_POINT,
            7 => SEVEN_POINT,
            _ => return None,
        };
        Some(Self { rule, max_splits })
    }

    pub fn integrate(&self, center: &Vec3, tri: [&Vec3; 3], eps: f64) -> Moments {
        let mut acc = Moments::default();
        self.integrate_rec(center, *tri[0], *tri[1], *tri[2], eps, 0, &mut acc);
        acc
    }

    #[allow(clippy::too_many_arguments)]
    fn integrate_rec(&self, center: &Vec3, a: Vec3, b: Vec3, c: Vec3, eps: f64, depth: u32, acc: &mut Moments) {
        if depth < self.max_splits {
            let m = (a + b + c) / 3.0;
            let rho = (a - m).norm().max((b - m).norm()).max((c - m).norm());
            let lower = ((center - m).norm() - rho).max(0.0);
            if rho > REFINE_RATIO * (lower * lower + eps * eps).sqrt() {
                let ab = (a + b) * 0.5;
                let bc = (b + c) * 0.5;
                let ca = (c + a) * 0.5;
                self.integrate_rec(center, a, ab, ca, eps, depth + 1, acc);
                self.integrate_rec(center, ab, b, bc, eps, depth + 1, acc);
                self.integrate_rec(center, ca, bc, c, eps, depth + 1, acc);
                self.integrate_rec(center, ab, bc, ca, eps, depth + 1, acc);
                return;
            }
        }
        let area = triangle_area(&a, &b, &c);
        for &([l0, l1, l2], wq) in self.rule {
            let t = a * l0 + b * l1 + c * l2;
            let w = weight(center, &t, eps) * wq * area;
            acc.mass += w;
            acc.moment += t * w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials() {
        // With a huge epsilon the weight is nearly constant, so mass ≈ area/eps^4.
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(2.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        for points in [1, 3, 7] {
            let q = Quadrature::new(points, 0).unwrap();
            let m = q.integrate(&Vec3::zeros(), [&a, &b, &c], 1e6);
            let scaled = m.mass * 1e24;
            assert!((scaled - 1.0).abs() < 1e-9, "{points}: {scaled}");
            let centroid = m.moment / m.mass;
            assert!((centroid - Vec3::new(2.0 / 3.0, 1.0 / 3.0, 0.0)).norm() < 1e-9);
        }
        assert!(Quadrature::new(5, 0).is_none());
    }

    #[test]
    fn seven_point_weights_sum_to_one() {
        let s: f64 = SEVEN_POINT.iter().map(|r| r.1).sum();
        assert!((s - 1.0).abs() < 1e-12);
        for (l, _) in SEVEN_POINT {
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
