//! Invariants over randomized inputs.

use nalgebra::{Rotation3, Unit};
use proptest::prelude::*;

use treecloud::cloud::{parse_ply, PointCloud};
use treecloud::degrade::{
    add_noise, occlude, remove_in_balls, uneven_density, Ball, NoiseParams, OcclusionParams, UnevenParams,
};
use treecloud::geom::{Aabb, Vec3};
use treecloud::implicit::{build_surface, weight, FitConfig};
use treecloud::kdtree::{dist2, KdTree};
use treecloud::mesh::{sweep_mesh, TriangleMesh};
use treecloud::metrics::{directed_hausdorff_brute, directed_hausdorff_points, hausdorff, SkeletonPointSet};
use treecloud::skeleton::{apply_gravity, generate_skeleton, parse_skel, to_skel_string, SizeClass, TreeParams};

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn points(max: usize) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec(vec3(1.0), 1..max)
}

fn unit() -> impl Strategy<Value = Vec3> {
    vec3(1.0)
        .prop_filter("non-zero", |v| v.norm() > 1e-3)
        .prop_map(|v| v.normalize())
}

fn cloud_with_normals(max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec((vec3(1.0), unit()), 1..max).prop_map(|v| {
        let (p, n) = v.into_iter().unzip();
        PointCloud::with_normals(p, n)
    })
}

fn tree_params() -> impl Strategy<Value = TreeParams> {
    (
        prop_oneof![Just(SizeClass::Small), Just(SizeClass::Medium), Just(SizeClass::Large)],
        0u32..3,
        0u32..3,
        2u32..6,
        0.0f64..1.5,
        0.0f64..0.4,
        any::<u64>(),
    )
        .prop_map(|(class, levels, kmax, npc, gravity, bend, seed)| TreeParams {
            branch_levels: levels,
            branches_per_node: [0, kmax],
            nodes_per_curve: npc,
            gravity,
            bend,
            ..TreeParams::preset(class, seed)
        })
}

fn rigid_motion() -> impl Strategy<Value = (Rotation3<f64>, Vec3)> {
    (unit(), -3.0f64..3.0, vec3(5.0))
        .prop_map(|(axis, angle, t)| (Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle), t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_is_positive_and_decreasing(x in vec3(2.0), t in vec3(2.0), u in vec3(2.0), eps in 1e-3f64..1.0) {
        let (near, far) = if (x - t).norm() < (x - u).norm() { (t, u) } else { (u, t) };
        prop_assume!((x - near).norm() < (x - far).norm());
        let (wn, wf) = (weight(&x, &near, eps), weight(&x, &far, eps));
        prop_assert!(wn > wf && wf > 0.0);
    }

    #[test]
    fn generated_skeletons_are_trees(p in tree_params()) {
        let g = generate_skeleton(&p).unwrap();
        let topo = g.validate().unwrap();
        prop_assert_eq!(g.edges.len(), g.nodes.len() - 1);
        prop_assert_eq!(topo.bfs.len(), g.nodes.len());
        for &(a, b) in &g.edges {
            let idx = g.index_map();
            prop_assert!(g.nodes[idx[&b]].radius <= g.nodes[idx[&a]].radius);
        }
        let text = to_skel_string(&g);
        prop_assert_eq!(&text, &to_skel_string(&generate_skeleton(&p).unwrap()));
        let back = parse_skel(&text).unwrap();
        prop_assert_eq!(to_skel_string(&back), text);
        prop_assert_eq!(back.edges, g.edges);
    }

    #[test]
    fn gravity_keeps_segment_lengths(p in tree_params(), gravity in 0.0f64..20.0) {
        let g = generate_skeleton(&TreeParams { gravity: 0.0, ..p }).unwrap();
        let bent = apply_gravity(&g, gravity).unwrap();
        let idx = g.index_map();
        for &(a, b) in &g.edges {
            let l0 = (g.nodes[idx[&b]].position - g.nodes[idx[&a]].position).norm();
            let l1 = (bent.nodes[idx[&b]].position - bent.nodes[idx[&a]].position).norm();
            prop_assert!(((l1 - l0) / l0).abs() <= 1e-12);
        }
    }

    #[test]
    fn sweep_vertex_count_and_ring_radii(p in tree_params(), sides in 3usize..12) {
        let g = generate_skeleton(&p).unwrap();
        let mesh = sweep_mesh(&g, sides).unwrap();
        let topo = g.validate().unwrap();
        let leaves = topo.children.iter().filter(|c| c.is_empty()).count();
        let root_edges = topo.children[topo.root].len();
        prop_assert_eq!(mesh.vertices.len(), g.edges.len() * 2 * sides + leaves + root_edges);
        mesh.validate().unwrap();
        for t in 0..mesh.triangles.len() {
            prop_assert!(mesh.area(t) > 0.0);
        }
        // Rings are emitted per edge in breadth-first order, followed by an apex at the root and leaves.
        let mut at = 0;
        for &p in &topo.bfs {
            for &c in &topo.children[p] {
                let (pa, pb) = (g.nodes[p].position, g.nodes[c].position);
                let axis = (pb - pa).normalize();
                for (k, v) in mesh.vertices[at..at + 2 * sides].iter().enumerate() {
                    let (origin, r) = if k < sides { (pa, g.nodes[p].radius) } else { (pb, g.nodes[c].radius) };
                    let d = v - origin;
                    prop_assert!(d.dot(&axis).abs() <= 1e-9 * r);
                    prop_assert!((d.norm() - r).abs() <= 1e-9 * r, "{} vs {}", d.norm(), r);
                }
                at += 2 * sides;
                if p == topo.root {
                    prop_assert_eq!(mesh.vertices[at], pa);
                    at += 1;
                }
                if topo.children[c].is_empty() {
                    prop_assert_eq!(mesh.vertices[at], pb);
                    at += 1;
                }
            }
        }
        prop_assert_eq!(at, mesh.vertices.len());
    }

    #[test]
    fn shared_plane_fits_reproduce_the_plane(n in unit(), offset in -0.5f64..0.5) {
        // A square patch of the plane <x, n> = offset, split into many triangles.
        let u = treecloud::geom::any_orthogonal(&n);
        let v = n.cross(&u);
        let base = n * offset;
        let k = 4;
        let mut vertices = Vec::new();
        for i in 0..=k {
            for j in 0..=k {
                vertices.push(base + u * (i as f64 / k as f64 - 0.5) + v * (j as f64 / k as f64 - 0.5));
            }
        }
        let mut triangles = Vec::new();
        for i in 0..k {
            for j in 0..k {
                let a = i * (k + 1) + j;
                triangles.push([a, a + k + 1, a + 1]);
                triangles.push([a + 1, a + k + 1, a + k + 2]);
            }
        }
        let mesh = TriangleMesh { vertices, triangles };
        let s = build_surface(&mesh, &FitConfig { max_depth: 3, planarity_tolerance: 0.0, ..FitConfig::default() }).unwrap();
        for p in &mesh.vertices {
            prop_assert!(s.covers(p));
            prop_assert!(s.eval(p).abs() <= 1e-12);
            let g = s.gradient(p);
            prop_assert!(g.normalize().cross(&n).norm() <= 1e-9);
        }
    }

    #[test]
    fn noise_is_a_superset_along_normal_lines(c in cloud_with_normals(200), d in 1usize..20, s in 0.0f64..0.5, seed in any::<u64>()) {
        let out = add_noise(&c, &NoiseParams { s, d, seed }).unwrap();
        let inserted = c.len().div_ceil(d);
        prop_assert_eq!(out.len(), c.len() + inserted);
        prop_assert_eq!(&out.points[..c.len()], &c.points[..]);
        let normals = c.normals.as_ref().unwrap();
        for k in 0..inserted {
            let donor = k * d;
            let off = out.points[c.len() + k] - c.points[donor];
            prop_assert!((off - normals[donor] * off.dot(&normals[donor])).norm() <= 1e-9);
        }
    }

    #[test]
    fn occlusion_is_a_subset_and_idempotent(c in cloud_with_normals(300), n in 0usize..4, lambda in 0.01f64..0.5, seed in any::<u64>()) {
        let (kept, balls) = occlude(&c, &c.bbox(), &OcclusionParams { n, lambda, seed }).unwrap();
        let mut j = 0;
        for p in &c.points {
            if j < kept.len() && kept.points[j] == *p {
                j += 1;
            }
        }
        prop_assert_eq!(j, kept.len(), "output is an ordered subset of the input");
        for p in &kept.points {
            for b in &balls {
                prop_assert!((p - Vec3::from(b.center)).norm() >= b.radius);
            }
        }
        prop_assert_eq!(remove_in_balls(&kept, &balls), kept.clone());
        if n == 0 {
            prop_assert_eq!(kept, c);
        }
    }

    #[test]
    fn uneven_density_leaves_the_outside_alone(c in cloud_with_normals(300), lo in vec3(1.0), size in 0.1f64..1.5, r in 0.05f64..0.6, seed in any::<u64>()) {
        let region = Aabb::new(lo, lo + Vec3::repeat(size));
        let (out, diag) = uneven_density(&c, &UnevenParams { region: Some(region), r, seed, ..UnevenParams::default() }).unwrap();
        prop_assert_eq!(out.len(), c.len() + diag.inserted);
        prop_assert_eq!(&out.points[..c.len()], &c.points[..]);
        let inside = c.points.iter().filter(|p| region.contains(p)).count();
        prop_assert_eq!(diag.inserted + diag.skipped + diag.escaped, inside);
        let outside = |c: &PointCloud| c.points.iter().filter(|p| !region.contains(p)).copied().collect::<Vec<_>>();
        prop_assert_eq!(outside(&out), outside(&c));
    }

    #[test]
    fn noise_and_occlusion_commute_with_rigid_motion(c in cloud_with_normals(200), (rot, t) in rigid_motion(), seed in any::<u64>()) {
        let moved = PointCloud::with_normals(
            c.points.iter().map(|p| rot * p + t).collect(),
            c.normals.as_ref().unwrap().iter().map(|n| rot * n).collect(),
        );
        let p = NoiseParams { s: 0.1, d: 3, seed };
        let a = add_noise(&moved, &p).unwrap();
        let b = add_noise(&c, &p).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            prop_assert!((x - (rot * y + t)).norm() <= 1e-9);
        }

        let bbox = c.bbox();
        let op = OcclusionParams { n: 3, lambda: 0.2, seed };
        let (kept, balls) = occlude(&c, &bbox, &op).unwrap();
        let moved_balls: Vec<Ball> = balls
            .iter()
            .map(|b| Ball { center: (rot * Vec3::from(b.center) + t).into(), radius: b.radius })
            .collect();
        let kept_moved = remove_in_balls(&moved, &moved_balls);
        prop_assert_eq!(kept_moved.len(), kept.len());
        for (x, y) in kept_moved.points.iter().zip(&kept.points) {
            prop_assert!((x - (rot * y + t)).norm() <= 1e-9);
        }
        // With the same seed the balls are centered on the same donors.
        let (_, direct) = occlude(&moved, &bbox, &op).unwrap();
        for (x, y) in direct.iter().zip(&moved_balls) {
            prop_assert!((Vec3::from(x.center) - Vec3::from(y.center)).norm() <= 1e-9);
        }
    }

    #[test]
    fn uneven_density_commutes_with_translation(c in cloud_with_normals(200), t in vec3(5.0), seed in any::<u64>()) {
        let region = Aabb::new(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let p = UnevenParams { region: Some(region), r: 0.4, seed, ..UnevenParams::default() };
        let (a, _) = uneven_density(&c, &p).unwrap();
        let moved = PointCloud::new(c.points.iter().map(|q| q + t).collect());
        let (b, _) = uneven_density(&moved, &UnevenParams { region: Some(region.translated(&t)), ..p }).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.points.iter().zip(&b.points) {
            prop_assert!((x + t - y).norm() <= 1e-9);
        }
    }

    #[test]
    fn hausdorff_index_equals_brute_force(a in points(500), b in points(500)) {
        prop_assert_eq!(directed_hausdorff_points(&a, &b).unwrap(), directed_hausdorff_brute(&a, &b).unwrap());
    }

    #[test]
    fn hausdorff_metric_axioms(a in points(60), b in points(60), c in points(60)) {
        let (sa, sb, sc) = (
            SkeletonPointSet::new(a).unwrap(),
            SkeletonPointSet::new(b).unwrap(),
            SkeletonPointSet::new(c).unwrap(),
        );
        prop_assert_eq!(hausdorff(&sa, &sa).unwrap(), 0.0);
        prop_assert_eq!(hausdorff(&sa, &sb).unwrap(), hausdorff(&sb, &sa).unwrap());
        let ac = hausdorff(&sa, &sc).unwrap();
        let ab_bc = hausdorff(&sa, &sb).unwrap() + hausdorff(&sb, &sc).unwrap();
        prop_assert!(ac <= ab_bc * (1.0 + 1e-12));
    }

    #[test]
    fn far_points_never_shrink_the_directed_distance(a in points(100), b in points(100), far in vec3(1.0)) {
        let before = directed_hausdorff_points(&a, &b).unwrap();
        let mut grown = a.clone();
        grown.push(far * 10.0 + Vec3::repeat(20.0));
        prop_assert!(directed_hausdorff_points(&grown, &b).unwrap() >= before);
    }

    #[test]
    fn hausdorff_is_rigid_invariant(a in points(100), b in points(100), (rot, t) in rigid_motion()) {
        let sa = SkeletonPointSet::new(a.clone()).unwrap();
        let sb = SkeletonPointSet::new(b.clone()).unwrap();
        let ta = SkeletonPointSet::new(a.iter().map(|p| rot * p + t).collect()).unwrap();
        let tb = SkeletonPointSet::new(b.iter().map(|p| rot * p + t).collect()).unwrap();
        prop_assert!((hausdorff(&sa, &sb).unwrap() - hausdorff(&ta, &tb).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn kdtree_knn_equals_brute_force(pts in points(300), q in vec3(1.5), k in 1usize..20) {
        let tree = KdTree::new(&pts);
        let got = tree.knn(&q, k);
        let mut all: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, dist2(p, &q))).collect();
        all.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        all.truncate(k);
        prop_assert_eq!(got, all);
    }

    #[test]
    fn ply_round_trip_is_exact_at_single_precision(c in cloud_with_normals(200)) {
        let bytes = c.to_ply_bytes();
        let back = parse_ply(bytes.as_slice()).unwrap();
        prop_assert_eq!(back, c.quantized());
    }
}
