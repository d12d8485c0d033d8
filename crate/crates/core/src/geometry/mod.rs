//! Point clouds, rigid poses, scenes of parts, distances and alignment.

mod align;
mod cloud;
mod distance;
mod kdtree;
mod pose;
mod scene;

pub use align::{
    align_or_translate, centroid_align, icp_align, icp_align_traced, kabsch_align, IcpOutcome,
    RigidAlignment,
};
pub use cloud::PointCloud;
pub(crate) use cloud::{centroid, dist2};
pub use distance::{chamfer, nearest_neighbors, one_sided_chamfer};
pub use kdtree::KdTree;
pub use pose::{apply_pose, compose, geodesic_rotation_distance, Pose};
pub use scene::{Part, Scene, DEFAULT_MAX_PARTS};
