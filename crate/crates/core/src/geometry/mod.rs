//! Geometry kernel used by insertion and simulation prep.

mod aabb;
mod decimate;
mod decompose;
mod distance;
mod hull;
mod ransac;
mod weld;

pub use aabb::{aabb_overlap, Aabb};
pub use decimate::{decimate_quadric, Decimated, MIN_DECIMATABLE_FACES};
pub use decompose::{convex_decompose, point_in_hull, Decomposition, DecompositionParams};
pub use distance::{point_triangle_distance, signed_distance_to_hull};
pub use hull::{quickhull, ConvexPiece};
pub use ransac::{ransac_plane, PlaneOrientation, PlaneSurface, RansacParams, SurfaceConstraint};
pub use weld::{merge_weld, Welded};

pub type Point = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("no plane found: {0}")]
    NoPlaneFound(String),
}
