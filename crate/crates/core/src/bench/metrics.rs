//! Side-by-side comparison of registration quality measures.

use nalgebra::Vector3;

use super::mask::iou_of_projection;
use super::render::RenderedFrame;
use crate::alignment::alignment_score_transformed;
use crate::error::{Error, Result};
use crate::geometry::{pose_error, PoseError, RigidTransform};
use crate::kdtree::KdTree;
use crate::model::{ModelCrop, ObjectModel};
use crate::pipeline::{acquire_with_tree, PipelineConfig};
use crate::registration::fitness_score;
use crate::scene::{depth_to_cloud, extract_object_cloud, median_position, CameraIntrinsics, LabelImage};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub crop_id: usize,
    pub pose: RigidTransform,
    pub alignment_score: f64,
    /// Mean squared correspondence distance within the ICP gate, m².
    pub fitness: f64,
    pub iou: f64,
    pub error: PoseError,
    /// Angle between the estimated and true model `symmetry_axis`, degrees,
    /// ignoring the axis direction. Equals the geodesic error when no axis
    /// is given.
    pub symmetric_angle: f64,
}

impl MetricRow {
    pub fn csv_header() -> &'static str {
        "crop_id,alignment_score,fitness,iou,position_error,geodesic_angle,symmetric_angle"
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.6},{:.6e},{:.6},{:.6},{:.4},{:.4}",
            self.crop_id,
            self.alignment_score,
            self.fitness,
            self.iou,
            self.error.position_error,
            self.error.geodesic_angle,
            self.symmetric_angle
        )
    }
}

/// Inputs shared by every row of one comparison.
pub struct MetricContext<'a> {
    pub scene: KdTree,
    pub mask: &'a LabelImage,
    pub intrinsics: &'a CameraIntrinsics,
    pub class_id: u8,
    pub model: &'a ObjectModel,
    pub truth: RigidTransform,
    pub symmetry_axis: Option<Vector3<f64>>,
    pub cfg: &'a PipelineConfig,
    /// Footprint splat size for IOU, meters.
    pub splat: f64,
}

impl MetricContext<'_> {
    pub fn row(&self, crop: &ModelCrop, pose: &RigidTransform) -> Result<MetricRow> {
        let score = alignment_score_transformed(&crop.points, pose, &self.scene, self.cfg.tau)?;
        let fitness = fitness_score(&crop.points, &self.scene, pose, self.cfg.max_correspondence_distance);
        let iou = iou_of_projection(pose, &self.model.cloud, self.intrinsics, self.mask, self.class_id, self.splat);
        let error = pose_error(pose, &self.truth);
        let symmetric_angle = match self.symmetry_axis {
            Some(a) => {
                let e = pose.rotation() * a;
                let t = self.truth.rotation() * a;
                let c = e.normalize().dot(&t.normalize()).abs().min(1.0);
                c.acos().to_degrees()
            }
            None => error.geodesic_angle,
        };
        Ok(MetricRow {
            crop_id: crop.crop_id,
            pose: *pose,
            alignment_score: score.value,
            fitness,
            iou,
            error,
            symmetric_angle,
        })
    }
}

/// Builds the context for `class_id` in a rendered frame.
pub fn metric_context<'a>(
    frame: &'a RenderedFrame,
    intrinsics: &'a CameraIntrinsics,
    class_id: u8,
    model: &'a ObjectModel,
    cfg: &'a PipelineConfig,
    symmetry_axis: Option<Vector3<f64>>,
) -> Result<MetricContext<'a>> {
    let truth = frame
        .truth(class_id)
        .ok_or_else(|| Error::InvalidArgument(format!("class {class_id} not in frame")))?
        .pose;
    let organized = depth_to_cloud(&frame.depth, intrinsics)?;
    let object = extract_object_cloud(&organized, &frame.labels, class_id)?;
    Ok(MetricContext {
        scene: KdTree::build(&object.points)?,
        mask: &frame.labels,
        intrinsics,
        class_id,
        model,
        truth,
        symmetry_axis,
        cfg,
        splat: 0.006,
    })
}

/// One row per acquisition hypothesis, in ranking order (best score first).
pub fn metric_comparison(ctx: &MetricContext) -> Result<Vec<MetricRow>> {
    let median = median_position(&crate::PointCloud::new(ctx.scene.points().to_vec())?)?;
    let acq = acquire_with_tree(&ctx.scene, &median, &ctx.model.crops, ctx.cfg, false)?;
    acq.hypotheses
        .iter()
        .map(|h| {
            let crop = ctx
                .model
                .crops
                .iter()
                .find(|c| c.crop_id == h.crop_id)
                .expect("hypothesis crop exists");
            ctx.row(crop, &h.refined_transform)
        })
        .collect()
}
