//! Synthetic scenes with ground truth, noise models and evaluation.

pub mod mask;
pub mod metrics;
pub mod render;
pub mod run;
pub mod spec;
pub mod suite;

use std::collections::BTreeMap;

pub use mask::{corrupt_mask, iou, iou_of_projection, mask_quality, MaskQuality};
pub use metrics::{metric_comparison, metric_context, MetricContext, MetricRow};
pub use render::{render_scene, RenderedFrame, TruthPose};
pub use run::{run_benchmark, run_scene, summarize, BenchOptions, BenchReport, BenchSummary, EvaluationRecord};
pub use spec::{look_at, on_table, NoiseModel, ObjectPlacement, SceneSpec, TablePlane};
pub use suite::{default_suite, symmetric_scene, SuiteParams};

use crate::error::{Error, Result};
use crate::model::mesh::shapes;
use crate::model::{build_object_model, CropParams, MeshModel, ObjectModel};
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::scene::CameraIntrinsics;

/// Class ids and names of the procedural objects used by the default suite.
pub const BUILTIN_OBJECTS: [(u8, &str); 4] = [(1, "corner_post"), (2, "step_block"), (3, "jug"), (4, "bracket")];

/// Procedural meshes by name: the four suite objects plus `cylinder` and `cube`.
pub fn builtin_mesh(name: &str, class_id: u8) -> Option<MeshModel> {
    Some(match name {
        "corner_post" => shapes::corner_post(class_id),
        "step_block" => shapes::step_block(class_id),
        "jug" => shapes::jug(class_id),
        "bracket" => shapes::bracket(class_id),
        "cylinder" => shapes::cylinder(0.04, 0.14, 32, class_id)
            .transformed(&crate::RigidTransform::from_translation(0.0, 0.0, 0.07)),
        "cube" => shapes::cuboid(0.1, 0.1, 0.1, class_id)
            .transformed(&crate::RigidTransform::from_translation(0.0, 0.0, 0.05)),
        _ => return None,
    })
}

/// Meshes for rendering plus crop models for the pipeline, keyed by class.
#[derive(Clone, Debug, Default)]
pub struct ObjectLibrary {
    pub meshes: BTreeMap<u8, MeshModel>,
    pub models: BTreeMap<u8, ObjectModel>,
}

impl ObjectLibrary {
    pub fn insert(&mut self, mesh: MeshModel, model: ObjectModel) -> Result<()> {
        if mesh.class_id != model.class_id {
            return Err(Error::InvalidArgument(format!(
                "mesh class {} does not match model class {}",
                mesh.class_id, model.class_id
            )));
        }
        self.meshes.insert(mesh.class_id, mesh);
        self.models.insert(model.class_id, model);
        Ok(())
    }

    pub fn build(meshes: Vec<MeshModel>, params: &CropParams) -> Result<Self> {
        let mut lib = Self::default();
        for mesh in meshes {
            let model = build_object_model(&mesh, params)?;
            lib.insert(mesh, model)?;
        }
        Ok(lib)
    }

    /// The four suite objects with their crops.
    pub fn builtin(params: &CropParams) -> Result<Self> {
        let meshes = BUILTIN_OBJECTS
            .iter()
            .map(|&(c, n)| builtin_mesh(n, c).expect("builtin name"))
            .collect();
        Self::build(meshes, params)
    }

    pub fn pipeline(&self, cfg: PipelineConfig, intrinsics: CameraIntrinsics) -> Result<Pipeline> {
        let mut p = Pipeline::new(cfg, intrinsics)?;
        for m in self.models.values() {
            p.add_object(m.clone())?;
        }
        Ok(p)
    }
}
