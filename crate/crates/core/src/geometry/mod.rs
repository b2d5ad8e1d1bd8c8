//! Meshes, coordinate frames, mass properties and object trajectories.

mod bvh;
pub mod inertia;
pub mod mesh;
pub mod npcs;
pub mod procedural;
pub mod trajectory;

pub use inertia::{mass_properties, Inertia};
pub use mesh::{closest_point_on_triangle, SurfaceHit, SurfaceSection, TriMesh};
pub use npcs::{npcs_denormalize_point, npcs_frame, npcs_normalize, npcs_normalize_with, NpcsScaling, PartFrame};
pub use procedural::{box_mesh, icosphere, make_scene, voxel_mesh, SceneKind, SceneParams};
pub use trajectory::{bezier_object_trajectory, eased, keyframe_pose, GoalKeyframe, PartKeyframe, RevoluteAxis};
