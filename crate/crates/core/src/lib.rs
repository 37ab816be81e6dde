//! Pose estimation for known rigid objects in segmented depth data.
//!
//! Object models are cropped to their visible front faces from many
//! viewpoints. At acquisition time every crop is registered against the
//! segmented scene cloud with ICP and the hypotheses are ranked by a
//! unique-correspondence alignment score; once a hypothesis scores high
//! enough the object is tracked frame to frame with ICP fused through an
//! error-state Kalman filter.

pub mod alignment;
pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod kdtree;
pub mod model;
pub mod pipeline;
pub mod raycast;
pub mod registration;
pub mod scene;
pub mod sequence;

pub use error::{Error, Result};
pub use geometry::{Point3, PointCloud, PoseError, RigidTransform};
