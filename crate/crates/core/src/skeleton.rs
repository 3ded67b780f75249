//! Ground-truth curve skeletons: procedural generation, gravity bending and
//! the `.skel` text format.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{any_orthogonal, Aabb, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonNode {
    pub id: usize,
    pub position: Vec3,
    pub radius: f64,
}

/// A rooted tree of skeleton nodes. Edges are stored as `(parent id, child id)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonGraph {
    pub nodes: Vec<SkeletonNode>,
    pub edges: Vec<(usize, usize)>,
    pub root: usize,
}

/// Index-based adjacency derived from a validated graph.
#[derive(Clone, Debug)]
pub struct Topology {
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub root: usize,
    /// Node indices in breadth-first order from the root.
    pub bfs: Vec<usize>,
}

impl SkeletonGraph {
    pub fn index_map(&self) -> HashMap<usize, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(self.nodes.iter().map(|n| &n.position))
    }

    pub fn min_radius(&self) -> f64 {
        self.nodes.iter().map(|n| n.radius).fold(f64::INFINITY, f64::min)
    }

    /// Checks every structural and geometric invariant and returns the
    /// index-based topology on success.
    pub fn validate(&self) -> Result<Topology> {
        let bad = |msg: String| Err(Error::InvariantViolation(msg));
        if self.nodes.is_empty() {
            return bad("skeleton has no nodes".into());
        }
        let index = self.index_map();
        if index.len() != self.nodes.len() {
            return bad("node ids are not unique".into());
        }
        for n in &self.nodes {
            if !(n.radius > 0.0) || !n.radius.is_finite() {
                return bad(format!("radius must be positive (node {} has {})", n.id, n.radius));
            }
            if !n.position.iter().all(|c| c.is_finite()) {
                return bad(format!("position of node {} is not finite", n.id));
            }
        }
        let Some(&root) = index.get(&self.root) else {
            return bad(format!("root {} is not a node", self.root));
        };
        if self.edges.len() + 1 != self.nodes.len() {
            return bad(format!(
                "graph must be acyclic and connected: {} nodes but {} edges",
                self.nodes.len(),
                self.edges.len()
            ));
        }
        let n = self.nodes.len();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in &self.edges {
            let (Some(&pi), Some(&ci)) = (index.get(&p), index.get(&c)) else {
                return bad(format!("edge {p} -> {c} references an unknown node"));
            };
            if ci == root {
                return bad(format!("root {} has a parent", self.root));
            }
            if parent[ci].is_some() {
                return bad(format!("node {c} has more than one parent"));
            }
            parent[ci] = Some(pi);
            children[pi].push(ci);
        }
        let mut bfs = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(i) = queue.pop_front() {
            bfs.push(i);
            for &c in &children[i] {
                if seen[c] {
                    return bad("graph must be acyclic".into());
                }
                seen[c] = true;
                queue.push_back(c);
            }
        }
        if bfs.len() != n {
            return bad("graph must be acyclic and connected: some nodes are unreachable from the root".into());
        }
        for &(p, c) in &self.edges {
            let (rp, rc) = (self.nodes[index[&p]].radius, self.nodes[index[&c]].radius);
            if rc > rp {
                return bad(format!(
                    "radius must be non-increasing from root to leaf (edge {p} -> {c})"
                ));
            }
        }
        Ok(Topology {
            parent,
            children,
            root,
            bfs,
        })
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub size_class: SizeClass,
    pub trunk_length: f64,
    pub trunk_radius: f64,
    pub branch_levels: u32,
    /// Inclusive range of children spawned per eligible node.
    pub branches_per_node: [u32; 2],
    /// Inclusive range of branching angles, radians from the parent direction.
    pub branch_angle: [f64; 2],
    pub radius_decay: f64,
    pub length_decay: f64,
    pub gravity: f64,
    /// Maximum per-step angular perturbation of the growth direction, radians.
    pub bend: f64,
    pub nodes_per_curve: u32,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self::preset(SizeClass::Small, 0)
    }
}

impl TreeParams {
    /// Declared presets per size class; complexity grows with the class.
    pub fn preset(size_class: SizeClass, seed: u64) -> Self {
        let base = Self {
            size_class,
            trunk_length: 2.0,
            trunk_radius: 0.1,
            branch_levels: 1,
            branches_per_node: [1, 2],
            branch_angle: [0.45, 0.9],
            radius_decay: 0.7,
            length_decay: 0.6,
            gravity: 0.15,
            bend: 0.12,
            nodes_per_curve: 4,
            seed,
        };
        match size_class {
            SizeClass::Small => base,
            SizeClass::Medium => Self {
                branch_levels: 2,
                branches_per_node: [0, 2],
                trunk_length: 2.5,
                trunk_radius: 0.12,
                ..base
            },
            SizeClass::Large => Self {
                branch_levels: 4,
                branches_per_node: [0, 1],
                nodes_per_curve: 5,
                trunk_length: 3.0,
                trunk_radius: 0.16,
                radius_decay: 0.75,
                length_decay: 0.7,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.trunk_length > 0.0 && self.trunk_length.is_finite()) {
            return bad("trunk_length must be positive");
        }
        if !(self.trunk_radius > 0.0 && self.trunk_radius.is_finite()) {
            return bad("trunk_radius must be positive");
        }
        if self.branches_per_node[0] > self.branches_per_node[1] {
            return bad("branches_per_node range is empty");
        }
        if !(self.branch_angle[0] <= self.branch_angle[1]) {
            return bad("branch_angle range is empty");
        }
        if !(self.radius_decay > 0.0 && self.radius_decay < 1.0) {
            return bad("radius_decay must lie in (0, 1)");
        }
        if !(self.length_decay > 0.0 && self.length_decay < 1.0) {
            return bad("length_decay must lie in (0, 1)");
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return bad("gravity must be non-negative");
        }
        if !self.bend.is_finite() {
            return bad("bend must be finite");
        }
        if self.nodes_per_curve < 2 {
            return bad("nodes_per_curve must be at least 2");
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct Curve {
    /// Node indices; the first entry is the attachment node.
    nodes: Vec<usize>,
    length: f64,
}

/// Rotates `dir` away from itself by `angle`, around an azimuth measured from
/// a deterministic reference perpendicular.
fn deflect(dir: &Vec3, angle: f64, azimuth: f64) -> Vec3 {
    let u = any_orthogonal(dir);
    let v = dir.cross(&u);
    let side = u * azimuth.cos() + v * azimuth.sin();
    (dir * angle.cos() + side * angle.sin()).normalize()
}

struct Builder<'a> {
    params: &'a TreeParams,
    rng: ChaCha8Rng,
    nodes: Vec<SkeletonNode>,
    edges: Vec<(usize, usize)>,
}

impl Builder<'_> {
    fn push_node(&mut self, position: Vec3, radius: f64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(SkeletonNode { id, position, radius });
        id
    }

    fn perturb(&mut self, dir: Vec3) -> Vec3 {
        let bend = self.params.bend.abs();
        if bend == 0.0 {
            return dir;
        }
        let angle = self.rng.random_range(0.0..=bend);
        let azimuth = self.rng.random_range(0.0..std::f64::consts::TAU);
        deflect(&dir, angle, azimuth)
    }

    /// Grows `nodes_per_curve - 1` new nodes from `base`, tapering the radius
    /// linearly from `start_radius` to `start_radius * radius_decay`.
    fn grow_curve(&mut self, base: usize, mut dir: Vec3, length: f64, start_radius: f64) -> Curve {
        let n = self.params.nodes_per_curve as usize;
        let step = length / (n - 1) as f64;
        let decay = self.params.radius_decay;
        let mut ids = vec![base];
        let mut pos = self.nodes[base].position;
        for j in 1..n {
            dir = self.perturb(dir);
            pos += dir * step;
            let t = j as f64 / (n - 1) as f64;
            let radius = start_radius * (1.0 - (1.0 - decay) * t);
            let id = self.push_node(pos, radius);
            self.edges.push((*ids.last().unwrap(), id));
            ids.push(id);
        }
        Curve { nodes: ids, length }
    }
}

/// Generates a ground-truth skeleton. Identical parameters (including the
/// seed) give bit-identical output.
pub fn generate_skeleton(params: &TreeParams) -> Result<SkeletonGraph> {
    params.validate()?;
    let mut b = Builder {
        params,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        nodes: Vec::new(),
        edges: Vec::new(),
    };

    let root = b.push_node(Vec3::zeros(), params.trunk_radius);
    let trunk = b.grow_curve(root, Vec3::z(), params.trunk_length, params.trunk_radius);

    let mut level = vec![trunk];
    for _ in 0..params.branch_levels {
        let mut next = Vec::new();
        for curve in &level {
            for w in 1..curve.nodes.len() {
                let node = curve.nodes[w];
                let prev = curve.nodes[w - 1];
                let incoming = (b.nodes[node].position - b.nodes[prev].position).normalize();
                let [kmin, kmax] = params.branches_per_node;
                let k = b.rng.random_range(kmin..=kmax);
                for _ in 0..k {
                    let [amin, amax] = params.branch_angle;
                    let angle = if amin == amax {
                        amin
                    } else {
                        b.rng.random_range(amin..=amax)
                    };
                    let azimuth = b.rng.random_range(0.0..std::f64::consts::TAU);
                    let dir = deflect(&incoming, angle, azimuth);
                    let radius = b.nodes[node].radius * params.radius_decay;
                    let child = b.grow_curve(node, dir, curve.length * params.length_decay, radius);
                    next.push(child);
                }
            }
        }
        level = next;
    }

    let graph = SkeletonGraph {
        nodes: b.nodes,
        edges: b.edges,
        root,
    };
    apply_gravity(&graph, params.gravity)
}

/// The trunk is the chain from the root that always follows the child with
/// the smallest id. Generated skeletons number the trunk first.
fn trunk_mask(graph: &SkeletonGraph, topo: &Topology) -> Vec<bool> {
    let mut mask = vec![false; graph.nodes.len()];
    let mut cur = topo.root;
    mask[cur] = true;
    while let Some(&next) = topo.children[cur].iter().min_by_key(|&&c| graph.nodes[c].id) {
        mask[next] = true;
        cur = next;
    }
    mask
}

/// Bends every non-trunk segment toward `-z`: each direction `d` becomes
/// `normalize(d + gravity * (0, 0, -1))`, integrated from the root so that
/// topology, radii and segment lengths are preserved.
pub fn apply_gravity(graph: &SkeletonGraph, gravity: f64) -> Result<SkeletonGraph> {
    if !(gravity >= 0.0) {
        return Err(Error::InvalidParameter("gravity must be non-negative".into()));
    }
    let topo = graph.validate()?;
    if gravity == 0.0 {
        return Ok(graph.clone());
    }
    let trunk = trunk_mask(graph, &topo);
    let pull = Vec3::new(0.0, 0.0, -gravity);
    let mut out = graph.clone();
    for &i in topo.bfs.iter().skip(1) {
        let p = topo.parent[i].expect("non-root node has a parent");
        let offset = graph.nodes[i].position - graph.nodes[p].position;
        let moved = if trunk[i] {
            offset
        } else {
            let len = offset.norm();
            let dir = offset / len;
            (dir + pull).normalize() * len
        };
        out.nodes[i].position = out.nodes[p].position + moved;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

/// Formats like C's `%.9g`.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

pub fn to_skel_string(graph: &SkeletonGraph) -> String {
    let mut s = String::new();
    s.push_str("# treecloud skeleton\n");
    for n in &graph.nodes {
        let _ = writeln!(
            s,
            "v {} {} {} {} {}",
            n.id,
            fmt_g9(n.position.x),
            fmt_g9(n.position.y),
            fmt_g9(n.position.z),
            fmt_g9(n.radius)
        );
    }
    for &(p, c) in &graph.edges {
        let _ = writeln!(s, "e {p} {c}");
    }
    let _ = writeln!(s, "root {}", graph.root);
    s
}

pub fn parse_skel(text: &str) -> Result<SkeletonGraph> {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut root = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line, message };
        let fields: Vec<&str> = content.split_whitespace().collect();
        let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad integer {s:?}: {e}")));
        let float = |s: &str| s.parse::<f64>().map_err(|e| err(format!("bad number {s:?}: {e}")));
        match fields[0] {
            "v" if fields.len() == 6 => nodes.push(SkeletonNode {
                id: int(fields[1])?,
                position: Vec3::new(float(fields[2])?, float(fields[3])?, float(fields[4])?),
                radius: float(fields[5])?,
            }),
            "e" if fields.len() == 3 => edges.push((int(fields[1])?, int(fields[2])?)),
            "root" if fields.len() == 2 => {
                if root.replace(int(fields[1])?).is_some() {
                    return Err(err("duplicate root record".into()));
                }
            }
            tag => return Err(err(format!("unexpected record {tag:?} with {} fields", fields.len()))),
        }
    }
    let root = root.ok_or(Error::Parse {
        line: text.lines().count(),
        message: "missing root record".into(),
    })?;
    let graph = SkeletonGraph { nodes, edges, root };
    graph.validate()?;
    Ok(graph)
}

pub fn save_skeleton(graph: &SkeletonGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_skel_string(graph)).map_err(|e| Error::file(path, e))
}

pub fn load_skeleton(path: impl AsRef<Path>) -> Result<SkeletonGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_skel(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(levels: u32, k: [u32; 2], npc: u32, seed: u64) -> TreeParams {
        TreeParams {
            branch_levels: levels,
            branches_per_node: k,
            nodes_per_curve: npc,
            seed,
            ..TreeParams::default()
        }
    }

    /// Independent recursive count: a curve contributes `npc - 1` new nodes,
    /// each of which roots `k` curves one level deeper.
    fn count_nodes(levels_left: u32, k: u64, npc: u64) -> u64 {
        let own = npc - 1;
        if levels_left == 0 {
            own
        } else {
            own + own * k * count_nodes(levels_left - 1, k, npc)
        }
    }

    #[test]
    fn no_branching_gives_a_path() {
        let g = generate_skeleton(&params(0, [2, 3], 5, 9)).unwrap();
        let topo = g.validate().unwrap();
        assert_eq!(g.nodes.len(), 5);
        assert_eq!(g.edges.len(), 4);
        assert!(topo.children.iter().all(|c| c.len() <= 1));
        for &(p, c) in &g.edges {
            assert!(g.nodes[c].radius <= g.nodes[p].radius);
        }
    }

    #[test]
    fn straight_trunk_without_perturbation() {
        let mut p = params(0, [1, 1], 6, 1);
        p.gravity = 0.0;
        p.bend = 0.0;
        let g = generate_skeleton(&p).unwrap();
        for n in &g.nodes {
            assert_eq!(n.position.x, 0.0);
            assert_eq!(n.position.y, 0.0);
            assert!(n.position.z >= 0.0);
        }
        assert!((g.nodes.last().unwrap().position.z - p.trunk_length).abs() < 1e-12);
    }

    #[test]
    fn binary_expansion_count_matches_recursive_counter() {
        let g = generate_skeleton(&params(2, [2, 2], 3, 42)).unwrap();
        let expected = 1 + count_nodes(2, 2, 3);
        assert_eq!(expected, 43);
        assert_eq!(g.nodes.len() as u64, expected);
        g.validate().unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let p = TreeParams::preset(SizeClass::Medium, 1234);
        let a = to_skel_string(&generate_skeleton(&p).unwrap());
        let b = to_skel_string(&generate_skeleton(&p).unwrap());
        assert_eq!(a, b);
        let c = to_skel_string(&generate_skeleton(&TreeParams { seed: 1235, ..p }).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = [
            TreeParams {
                radius_decay: 1.0,
                ..TreeParams::default()
            },
            TreeParams {
                nodes_per_curve: 1,
                ..TreeParams::default()
            },
            TreeParams {
                branches_per_node: [3, 2],
                ..TreeParams::default()
            },
        ];
        for p in &bad {
            assert!(matches!(generate_skeleton(p), Err(Error::InvalidParameter(_))));
        }
    }

    fn two_edge_branch() -> SkeletonGraph {
        // Trunk 0 -> 1 -> 2 along z, branch 1 -> 3 along +x.
        SkeletonGraph {
            nodes: vec![
                SkeletonNode {
                    id: 0,
                    position: Vec3::zeros(),
                    radius: 1.0,
                },
                SkeletonNode {
                    id: 1,
                    position: Vec3::new(0.0, 0.0, 1.0),
                    radius: 0.5,
                },
                SkeletonNode {
                    id: 2,
                    position: Vec3::new(0.0, 0.0, 2.0),
                    radius: 0.25,
                },
                SkeletonNode {
                    id: 3,
                    position: Vec3::new(1.0, 0.0, 1.0),
                    radius: 0.25,
                },
            ],
            edges: vec![(0, 1), (1, 2), (1, 3)],
            root: 0,
        }
    }

    #[test]
    fn gravity_zero_is_identity() {
        let g = generate_skeleton(&TreeParams {
            gravity: 0.0,
            ..TreeParams::preset(SizeClass::Small, 3)
        })
        .unwrap();
        assert_eq!(apply_gravity(&g, 0.0).unwrap(), g);
    }

    #[test]
    fn gravity_one_on_horizontal_branch() {
        let g = apply_gravity(&two_edge_branch(), 1.0).unwrap();
        let d = g.nodes[3].position - g.nodes[1].position;
        let expect = Vec3::new(1.0, 0.0, -1.0) / 2f64.sqrt();
        assert!((d - expect).norm() < 1e-12);
        // Trunk untouched.
        assert_eq!(g.nodes[2].position, Vec3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn gravity_monotone_pull() {
        let base = two_edge_branch();
        let down = Vec3::new(0.0, 0.0, -1.0);
        let mut last = f64::NEG_INFINITY;
        for g in [0.0, 0.1, 0.5, 1.0, 3.0, 10.0, 100.0] {
            let out = apply_gravity(&base, g).unwrap();
            let d = (out.nodes[3].position - out.nodes[1].position).normalize();
            let dot = d.dot(&down);
            assert!(dot > last);
            last = dot;
        }
        assert!(last > 0.9999);
    }

    #[test]
    fn gravity_preserves_segment_lengths() {
        let g = generate_skeleton(&TreeParams {
            gravity: 0.0,
            ..TreeParams::preset(SizeClass::Medium, 77)
        })
        .unwrap();
        let bent = apply_gravity(&g, 0.8).unwrap();
        let idx = g.index_map();
        for &(p, c) in &g.edges {
            let l0 = (g.nodes[idx[&c]].position - g.nodes[idx[&p]].position).norm();
            let l1 = (bent.nodes[idx[&c]].position - bent.nodes[idx[&p]].position).norm();
            assert!(((l1 - l0) / l0).abs() <= 1e-12);
            assert_eq!(g.nodes[idx[&c]].radius, bent.nodes[idx[&c]].radius);
        }
        assert_eq!(g.edges, bent.edges);
    }

    #[test]
    fn g9_formatting() {
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(1.0), "1");
        assert_eq!(fmt_g9(-2.5), "-2.5");
        assert_eq!(fmt_g9(0.1), "0.1");
        assert_eq!(fmt_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_g9(123456789.0), "123456789");
        assert_eq!(fmt_g9(1.0e10), "1e+10");
        assert_eq!(fmt_g9(1.5e-7), "1.5e-07");
        assert_eq!(fmt_g9(0.000123456789123), "0.000123456789");
    }

    #[test]
    fn skel_round_trip() {
        let g = generate_skeleton(&TreeParams::preset(SizeClass::Medium, 5)).unwrap();
        let text = to_skel_string(&g);
        let back = parse_skel(&text).unwrap();
        assert_eq!(back.edges, g.edges);
        assert_eq!(back.root, g.root);
        for (a, b) in g.nodes.iter().zip(&back.nodes) {
            assert_eq!(a.id, b.id);
            assert!((a.position - b.position).norm() <= 1e-8 * (1.0 + a.position.norm()));
            assert!((a.radius - b.radius).abs() <= 1e-8 * a.radius);
        }
        assert_eq!(to_skel_string(&back), text);
    }

    #[test]
    fn cycle_is_rejected() {
        let text = "v 1 0 0 0 1\nv 2 0 0 1 1\ne 1 2\ne 2 1\nroot 1\n";
        match parse_skel(text) {
            Err(Error::InvariantViolation(m)) => assert!(m.contains("acyclic"), "{m}"),
            other => panic!("expected invariant violation, got {other:?}"),
        }
    }

    #[test]
    fn zero_radius_is_rejected() {
        let text = "v 0 0 0 0 0\nroot 0\n";
        match parse_skel(text) {
            Err(Error::InvariantViolation(m)) => assert!(m.contains("radius"), "{m}"),
            other => panic!("expected invariant violation, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "# header\nv 0 0 0 0 1\nv 1 0 0 zz 1\n";
        match parse_skel(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn increasing_radius_is_rejected() {
        let text = "v 0 0 0 0 1\nv 1 0 0 1 2\ne 0 1\nroot 0\n";
        assert!(matches!(parse_skel(text), Err(Error::InvariantViolation(_))));
    }
}
