//! Hausdorff comparison of an extracted skeleton against ground truth.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::kdtree::{dist2, KdTree};
use crate::skeleton::{to_skel_string, SkeletonGraph};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SampleSource {
    VerticesOnly,
    EdgeSampled { spacing: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonPointSet {
    pub points: Vec<Vec3>,
    pub source: SampleSource,
}

impl SkeletonPointSet {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(Self {
            points,
            source: SampleSource::VerticesOnly,
        })
    }
}

/// `max_{a in A} min_{b in B} |a - b|`.
pub fn directed_hausdorff(a: &SkeletonPointSet, b: &SkeletonPointSet) -> Result<f64> {
    directed_hausdorff_points(&a.points, &b.points)
}

pub fn directed_hausdorff_points(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let tree = KdTree::new(b);
    let worst = a
        .iter()
        .map(|p| tree.nearest(p).map_or(f64::INFINITY, |(_, d2)| d2))
        .fold(0.0, f64::max);
    Ok(worst.sqrt())
}

/// Quadratic reference implementation of [`directed_hausdorff_points`].
pub fn directed_hausdorff_brute(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let worst = a
        .iter()
        .map(|p| b.iter().map(|q| dist2(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(worst.sqrt())
}

pub fn hausdorff(g: &SkeletonPointSet, s: &SkeletonPointSet) -> Result<f64> {
    Ok(directed_hausdorff(g, s)?.max(directed_hausdorff(s, g)?))
}

/// Skeleton vertices followed by `n - 1` evenly spaced interior points per
/// edge of length `L`, with `n` the fewest segments no longer than `spacing`. With `spacing = None` only vertices are
/// returned.
pub fn sample_skeleton(skeleton: &SkeletonGraph, spacing: Option<f64>) -> Result<SkeletonPointSet> {
    let mut points: Vec<Vec3> = skeleton.nodes.iter().map(|n| n.position).collect();
    let Some(spacing) = spacing else {
        return SkeletonPointSet::new(points);
    };
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter("spacing must be positive".into()));
    }
    let index = skeleton.index_map();
    for &(a, b) in &skeleton.edges {
        let (Some(&ia), Some(&ib)) = (index.get(&a), index.get(&b)) else {
            return Err(Error::InvariantViolation(format!(
                "edge ({a}, {b}) references a missing node"
            )));
        };
        let pa = points[ia];
        let pb = points[ib];
        let len = (pb - pa).norm();
        let mut segments = (len / spacing).ceil().max(1.0) as usize;
        // Division can round an exact multiple up by one.
        while segments > 1 && len / (segments - 1) as f64 <= spacing {
            segments -= 1;
        }
        for k in 1..segments {
            let t = k as f64 / segments as f64;
            points.push(pa + (pb - pa) * t);
        }
    }
    let mut set = SkeletonPointSet::new(points)?;
    set.source = SampleSource::EdgeSampled { spacing };
    Ok(set)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Sample edges at this spacing instead of comparing vertices only.
    pub spacing: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Digests {
    pub ground_truth: String,
    pub extracted: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub hd: f64,
    pub hd_directed_gs: f64,
    pub hd_directed_sg: f64,
    /// `hd` divided by the ground truth's bounding-box diagonal.
    pub hd_normalized: f64,
    pub normalized_by: String,
    pub mode: String,
    pub spacing: Option<f64>,
    pub digests: Digests,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn evaluate(g: &SkeletonGraph, s: &SkeletonGraph, options: &EvalOptions) -> Result<EvalReport> {
    let gs = sample_skeleton(g, options.spacing)?;
    let ss = sample_skeleton(s, options.spacing)?;
    let hd_directed_gs = directed_hausdorff(&gs, &ss)?;
    let hd_directed_sg = directed_hausdorff(&ss, &gs)?;
    let hd = hd_directed_gs.max(hd_directed_sg);
    let diag = g.bbox().diagonal();
    Ok(EvalReport {
        hd,
        hd_directed_gs,
        hd_directed_sg,
        hd_normalized: if diag > 0.0 { hd / diag } else { 0.0 },
        normalized_by: "ground-truth-bbox-diagonal".into(),
        mode: match gs.source {
            SampleSource::VerticesOnly => "vertices-only".into(),
            SampleSource::EdgeSampled { .. } => "edge-sampled".into(),
        },
        spacing: options.spacing,
        digests: Digests {
            ground_truth: sha256_hex(to_skel_string(g).as_bytes()),
            extracted: sha256_hex(to_skel_string(s).as_bytes()),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::SkeletonNode;

    fn set(pts: &[[f64; 3]]) -> SkeletonPointSet {
        SkeletonPointSet::new(pts.iter().map(|&p| Vec3::from(p)).collect()).unwrap()
    }

    #[test]
    fn hand_computed_distances() {
        let a = set(&[[0.0, 0.0, 0.0]]);
        let b = set(&[[1.0, 0.0, 0.0]]);
        assert_eq!(directed_hausdorff(&a, &b).unwrap(), 1.0);
        let a = set(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let b = set(&[[0.0, 0.0, 0.0]]);
        assert_eq!(directed_hausdorff(&a, &b).unwrap(), 2.0);
        assert_eq!(directed_hausdorff(&b, &a).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn empty_sets_rejected() {
        assert!(matches!(SkeletonPointSet::new(vec![]), Err(Error::EmptySet)));
        assert!(matches!(
            directed_hausdorff_points(&[], &[Vec3::zeros()]),
            Err(Error::EmptySet)
        ));
    }

    fn segment(len: f64) -> SkeletonGraph {
        SkeletonGraph {
            nodes: vec![
                SkeletonNode {
                    id: 0,
                    position: Vec3::zeros(),
                    radius: 0.1,
                },
                SkeletonNode {
                    id: 1,
                    position: Vec3::new(0.0, 0.0, len),
                    radius: 0.1,
                },
            ],
            edges: vec![(0, 1)],
            root: 0,
        }
    }

    #[test]
    fn edge_sampling_counts() {
        let g = segment(1.0);
        let s = sample_skeleton(&g, Some(0.25)).unwrap();
        assert_eq!(s.points.len(), 5);
        assert_eq!(sample_skeleton(&g, Some(2.0)).unwrap().points.len(), 2);
        assert_eq!(sample_skeleton(&g, None).unwrap().points.len(), 2);
    }

    #[test]
    fn translated_report() {
        let g = segment(1.0);
        let mut s = g.clone();
        for n in &mut s.nodes {
            n.position += Vec3::new(0.3, 0.4, 0.0);
        }
        let r = evaluate(&g, &s, &EvalOptions::default()).unwrap();
        assert!((r.hd - 0.5).abs() < 1e-12);
        assert!((r.hd_normalized - 0.5).abs() < 1e-12);
        assert_eq!(r.mode, "vertices-only");
        assert_eq!(r.digests.ground_truth.len(), 64);
    }
}
