//! PCA normal estimation and spanning-tree orientation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{covariance, sorted_eigen, Vec3};
use crate::kdtree::KdTree;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalDiagnostics {
    /// Points whose neighborhood covariance has a repeated smallest
    /// eigenvalue, so the normal is not unique.
    pub degenerate: usize,
}

/// Per point, the eigenvector of least variance of its `k` nearest neighbors
/// (the point itself included). Signs are left unresolved.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<(PointCloud, NormalDiagnostics)> {
    if k < 3 {
        return Err(Error::InvalidParameter("k must be at least 3".into()));
    }
    if cloud.len() < k {
        return Err(Error::TooFewPoints {
            have: cloud.len(),
            need: k,
        });
    }
    let tree = KdTree::new(&cloud.points);
    let mut diag = NormalDiagnostics::default();
    let normals: Vec<Vec3> = cloud
        .points
        .iter()
        .map(|p| {
            let nbrs = tree.knn(p, k);
            let (_, cov) = covariance(nbrs.iter().map(|&(i, _)| &cloud.points[i]));
            let (vals, vecs) = sorted_eigen(&cov);
            let scale = vals[0].abs().max(f64::MIN_POSITIVE);
            if (vals[1] - vals[2]).abs() <= 1e-9 * scale {
                diag.degenerate += 1;
            }
            vecs[2]
        })
        .collect();
    Ok((PointCloud::with_normals(cloud.points.clone(), normals), diag))
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

/// Orients normals consistently by propagation over a Euclidean minimum
/// spanning tree of the `k`-nearest-neighbor graph. Each connected component
/// is seeded at its highest point, whose normal is made to face `+z`.
pub fn orient_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    let normals = cloud.normals.as_ref().ok_or(Error::MissingNormals)?;
    let n = cloud.len();
    let mut out = normals.clone();
    if n < 2 {
        return Ok(cloud.clone());
    }
    let tree = KdTree::new(&cloud.points);
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * k);
    for (i, p) in cloud.points.iter().enumerate() {
        for (j, d2) in tree.knn(p, k + 1) {
            if j != i {
                edges.push((d2, i.min(j), i.max(j)));
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    edges.dedup_by(|a, b| a.1 == b.1 && a.2 == b.2);

    let mut dsu = DisjointSet::new(n);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(_, a, b) in &edges {
        if dsu.union(a, b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }

    // Seed per component: highest z, lowest index on ties.
    let mut seed_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let root = dsu.find(i);
        match seed_of[root] {
            Some(s) if cloud.points[s].z >= cloud.points[i].z => {}
            _ => seed_of[root] = Some(i),
        }
    }
    let centroid = cloud.points.iter().sum::<Vec3>() / n as f64;

    let mut visited = vec![false; n];
    for seed in seed_of.into_iter().flatten() {
        let reference = if out[seed].z.abs() > 1e-6 {
            Vec3::z()
        } else {
            cloud.points[seed] - centroid
        };
        if out[seed].dot(&reference) < 0.0 {
            out[seed] = -out[seed];
        }
        visited[seed] = true;
        let mut queue = VecDeque::from([seed]);
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !visited[j] {
                    visited[j] = true;
                    if out[j].dot(&out[i]) < 0.0 {
                        out[j] = -out[j];
                    }
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(PointCloud::with_normals(cloud.points.clone(), out))
}
