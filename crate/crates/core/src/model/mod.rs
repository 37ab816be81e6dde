//! Object model library: mesh loading, surface sampling and crop generation.

pub mod cache;
pub mod crops;
pub mod mesh;
pub mod sampling;

pub use crops::{build_object_model, generate_crops, CropParams, ModelCrop, ObjectModel};
pub use mesh::{load_mesh, MeshModel};
pub use sampling::{sample_surface, voxel_downsample};
