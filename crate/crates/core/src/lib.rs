//! Progressive outpainting of an object around a camera schedule, with voxel
//! space carving deciding which pixels of each new view are still unseen.
//!
//! The building blocks are usable on their own: pinhole [`geometry`], signed
//! distance [`scene`]s, vote-based [`carving`] into a [`voxel`] grid, foreground
//! [`warping`] between views, camera [`schedule`]s, and the pseudo-ground-truth
//! [`dataset`]. [`pipeline::run`] ties them together through pluggable
//! [`stages`].

pub mod carving;
pub mod dataset;
pub mod geometry;
pub mod mesh;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod raster;
pub mod scene;
pub mod schedule;
pub mod stages;
pub mod voxel;
pub mod warping;

pub use carving::{carve, carve_with_depth_maps, hull_silhouette, CarveView};
pub use dataset::{PseudoDataset, ViewRecord};
pub use geometry::{Camera, CameraPose, Intrinsics, Ray};
pub use mesh::{extract_mesh, Mesh};
pub use pipeline::{run, PipelineConfig, PipelineError, RunReport, Source};
pub use raster::{DepthMap, MaskImage, NormalMap, RgbImage};
pub use scene::{AnalyticSurface, SdfScene, Surface};
pub use schedule::CameraSchedule;
pub use voxel::{VoxelGrid, VoxelSurface};
