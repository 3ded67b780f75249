//! Synthetic tree point clouds with exact ground-truth curve skeletons.
//!
//! The pipeline generates a skeleton, sweeps it into a closed mesh, fits a
//! blended implicit surface to the mesh, scans that surface from virtual
//! viewpoints and applies controlled degradations. [`metrics`] scores an
//! extracted skeleton against the ground truth.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvh;
pub mod cloud;
pub mod degrade;
pub mod error;
pub mod geom;
pub mod implicit;
pub mod kdtree;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod scanner;
pub mod skeleton;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use geom::{Aabb, Vec3};
pub use implicit::{build_surface, FitConfig, ImplicitSurface};
pub use mesh::{sweep_mesh, TriangleMesh};
pub use scanner::{scan, ScanConfig};
pub use skeleton::{generate_skeleton, SkeletonGraph, TreeParams};
