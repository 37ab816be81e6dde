//! Per-object acquisition/tracking state machine.

pub mod config;
pub mod kalman;
pub mod report;

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{UnitQuaternion, Vector3};
use rayon::prelude::*;

pub use config::PipelineConfig;
pub use kalman::{kalman_predict, kalman_update, CameraOdometry, Mode, TrackState};
pub use report::{FrameReport, ObjectReport, Status};

use crate::alignment::{alignment_score_transformed, AlignmentScore};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, RigidTransform};
use crate::kdtree::KdTree;
use crate::model::{ModelCrop, ObjectModel};
use crate::registration::{icp_with_tree, IcpParams, IcpResult};
use crate::scene::{
    depth_to_cloud, extract_object_cloud, median_position, CameraIntrinsics, DepthImage, LabelImage,
    SegmentedObjectCloud,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub crop_id: usize,
    pub initial_transform: RigidTransform,
    pub refined_transform: RigidTransform,
    pub score: AlignmentScore,
    /// `None` when registration failed; the score is then zero.
    pub icp: Option<IcpResult>,
}

/// All hypotheses of one acquisition, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct Acquisition {
    pub hypotheses: Vec<Hypothesis>,
}

impl Acquisition {
    pub fn best(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }

    pub fn accepted(&self, epsilon: f64) -> bool {
        self.best().score.value >= epsilon
    }
}

/// Initial pose placing `crop` so that its rendering camera looks along the
/// ray through `median`, with its centroid at `median`.
pub fn initial_transform(crop: &ModelCrop, median: &Point3) -> RigidTransform {
    let align = UnitQuaternion::rotation_between(&Vector3::z(), &median.coords).unwrap_or_else(UnitQuaternion::identity);
    let rotation = align * crop.view.rotation();
    let centroid = crop.points.centroid().unwrap_or_else(Point3::origin);
    RigidTransform::new(rotation, median.coords - rotation * centroid.coords)
}

fn evaluate(crop: &ModelCrop, init: RigidTransform, scene: &KdTree, icp: &IcpParams, tau: f64) -> Result<Hypothesis> {
    match icp_with_tree(&crop.points, scene, &init, icp) {
        Ok(r) => Ok(Hypothesis {
            crop_id: crop.crop_id,
            initial_transform: init,
            refined_transform: r.transform,
            score: alignment_score_transformed(&crop.points, &r.transform, scene, tau)?,
            icp: Some(r),
        }),
        Err(e @ (Error::NoCorrespondences { .. } | Error::Degenerate(_))) => {
            log::debug!("crop {} failed: {e}", crop.crop_id);
            Ok(Hypothesis {
                crop_id: crop.crop_id,
                initial_transform: init,
                refined_transform: init,
                score: AlignmentScore::zero(crop.points.len()),
                icp: None,
            })
        }
        Err(e) => Err(e),
    }
}

fn rank(mut hypotheses: Vec<Hypothesis>) -> Result<Acquisition> {
    if hypotheses.is_empty() {
        return Err(Error::InvalidArgument("acquisition needs at least one crop".into()));
    }
    if hypotheses.iter().all(|h| h.icp.is_none()) {
        return Err(Error::NoCorrespondences { max_distance: f64::NAN });
    }
    hypotheses.sort_by(|a, b| b.score.value.total_cmp(&a.score.value).then(a.crop_id.cmp(&b.crop_id)));
    Ok(Acquisition { hypotheses })
}

/// Multi-hypothesis search against an already indexed scene cloud. Runs on
/// the current rayon pool when `parallel` is set.
pub fn acquire_with_tree(
    scene: &KdTree,
    median: &Point3,
    crops: &[ModelCrop],
    cfg: &PipelineConfig,
    parallel: bool,
) -> Result<Acquisition> {
    let icp = cfg.acquisition_icp();
    let crops = &crops[..crops.len().min(cfg.n_crops)];
    let run = |c: &ModelCrop| evaluate(c, initial_transform(c, median), scene, &icp, cfg.tau);
    let hyps: Result<Vec<_>> = if parallel {
        crops.par_iter().map(run).collect()
    } else {
        crops.iter().map(run).collect()
    };
    rank(hyps?)
}

/// Registers every crop against `object`, using `cfg.workers` threads.
/// The caller switches to tracking iff [`Acquisition::accepted`].
pub fn acquire(object: &SegmentedObjectCloud, crops: &[ModelCrop], cfg: &PipelineConfig) -> Result<Acquisition> {
    if crops.is_empty() {
        return Err(Error::InvalidArgument("acquisition needs at least one crop".into()));
    }
    let median = median_position(&object.points)?;
    let tree = KdTree::build(&object.points)?;
    if cfg.workers <= 1 {
        return acquire_with_tree(&tree, &median, crops, cfg, false);
    }
    let pool = build_pool(cfg.workers)?;
    pool.install(|| acquire_with_tree(&tree, &median, crops, cfg, true))
}

pub fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Scene points inside the axis-aligned box of `model` at `pose`, inflated by `margin`.
pub fn prune_to_model_box(scene: &PointCloud, model: &PointCloud, pose: &RigidTransform, margin: f64) -> PointCloud {
    let moved = pose.apply_cloud(model);
    match moved.bounds() {
        Some((lo, hi)) => {
            let m = Vector3::repeat(margin);
            scene.crop_box(&(lo - m), &(hi + m))
        }
        None => PointCloud::empty(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackOutcome {
    pub measured: Option<RigidTransform>,
    pub score: f64,
    pub updated: bool,
}

/// One tracking frame: predict, prune, register from the prediction, score,
/// and fuse when the score clears `theta`. `object` is `None` when the class
/// is not visible in this frame.
pub fn track_step(
    state: &TrackState,
    object: Option<&SegmentedObjectCloud>,
    odom: &CameraOdometry,
    crop: &ModelCrop,
    model_cloud: &PointCloud,
    cfg: &PipelineConfig,
) -> (TrackState, TrackOutcome) {
    let predicted = kalman_predict(state, odom, cfg);
    let measured = object.and_then(|o| {
        let pruned = prune_to_model_box(&o.points, model_cloud, &predicted.pose, cfg.bbox_margin);
        if pruned.len() < 3 {
            return None;
        }
        let tree = KdTree::build(&pruned).ok()?;
        let r = icp_with_tree(&crop.points, &tree, &predicted.pose, &cfg.tracking_icp()).ok()?;
        let s = alignment_score_transformed(&crop.points, &r.transform, &tree, cfg.tau).ok()?;
        Some((r.transform, s))
    });
    let score = measured.as_ref().map_or(0.0, |(_, s)| s.value);
    let mut next = match &measured {
        Some((pose, s)) if s.value >= cfg.theta => kalman_update(&predicted, pose, s, cfg),
        _ => TrackState { last_score: score, ..predicted },
    };
    let updated = score >= cfg.theta;
    if !updated && next.position_variance() > cfg.max_position_variance {
        next.mode = Mode::Acquisition;
    }
    (
        next,
        TrackOutcome {
            measured: measured.map(|(p, _)| p),
            score,
            updated,
        },
    )
}

/// One sensor frame.
#[derive(Clone, Debug)]
pub struct Frame {
    pub depth: DepthImage,
    pub labels: LabelImage,
    pub odometry: CameraOdometry,
}

/// Registry of known objects plus their per-object filter state.
pub struct Pipeline {
    cfg: PipelineConfig,
    intrinsics: CameraIntrinsics,
    models: BTreeMap<u8, ObjectModel>,
    states: BTreeMap<u8, TrackState>,
    frame_index: usize,
    pool: Option<rayon::ThreadPool>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, intrinsics: CameraIntrinsics) -> Result<Self> {
        cfg.validate()?;
        intrinsics.validate()?;
        let pool = if cfg.workers > 1 { Some(build_pool(cfg.workers)?) } else { None };
        Ok(Self {
            cfg,
            intrinsics,
            models: BTreeMap::new(),
            states: BTreeMap::new(),
            frame_index: 0,
            pool,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn add_object(&mut self, model: ObjectModel) -> Result<()> {
        if model.crops.is_empty() {
            return Err(Error::InvalidArgument(format!("class {} has no crops", model.class_id)));
        }
        if model.class_id == 0 {
            return Err(Error::InvalidArgument("class 0 is reserved for background".into()));
        }
        self.states.remove(&model.class_id);
        self.models.insert(model.class_id, model);
        Ok(())
    }

    pub fn state(&self, class_id: u8) -> Option<&TrackState> {
        self.states.get(&class_id)
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn reset(&mut self) {
        self.states.clear();
        self.frame_index = 0;
    }

    pub fn process_frame(&mut self, frame: &Frame) -> Result<FrameReport> {
        let t0 = Instant::now();
        let organized = depth_to_cloud(&frame.depth, &self.intrinsics)?;
        if (frame.labels.width, frame.labels.height) != (organized.width, organized.height) {
            return Err(Error::DimensionMismatch {
                expected: (organized.width, organized.height),
                actual: (frame.labels.width, frame.labels.height),
            });
        }
        let present = frame.labels.classes();
        let convert_ms = ms(t0);

        let parallel = self.pool.is_some();
        let jobs: Vec<(u8, &ObjectModel, Option<&TrackState>)> = self
            .models
            .iter()
            .map(|(&c, m)| (c, m, self.states.get(&c)))
            .collect();
        let run = |&(class_id, model, prior): &(u8, &ObjectModel, Option<&TrackState>)| {
            let t = Instant::now();
            let segment = present
                .contains(&class_id)
                .then(|| extract_object_cloud(&organized, &frame.labels, class_id));
            let seg_ms = convert_ms + ms(t);
            let (state, report) = process_object(class_id, model, prior, segment, &frame.odometry, &self.cfg, parallel);
            (class_id, state, report.map(|mut r| {
                r.ms_segment = seg_ms;
                r
            }))
        };
        let results: Vec<_> = match &self.pool {
            Some(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
            None => jobs.iter().map(run).collect(),
        };

        let mut objects = Vec::new();
        for (class_id, state, report) in results {
            match state {
                Some(s) => {
                    self.states.insert(class_id, s);
                }
                None => {
                    self.states.remove(&class_id);
                }
            }
            objects.extend(report);
        }
        let report = FrameReport { frame: self.frame_index, objects };
        self.frame_index += 1;
        Ok(report)
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn process_object(
    class_id: u8,
    model: &ObjectModel,
    prior: Option<&TrackState>,
    segment: Option<Result<SegmentedObjectCloud>>,
    odom: &CameraOdometry,
    cfg: &PipelineConfig,
    parallel: bool,
) -> (Option<TrackState>, Option<ObjectReport>) {
    let crop_of = |id: usize| model.crops.iter().find(|c| c.crop_id == id);
    let mut report = ObjectReport::new(class_id);

    if let Some(state) = prior.filter(|s| s.mode == Mode::Tracking) {
        let crop = state.active_crop.and_then(crop_of).unwrap_or(&model.crops[0]);
        let t = Instant::now();
        let object = match &segment {
            Some(Ok(o)) => Some(o),
            _ => None,
        };
        let (next, outcome) = track_step(state, object, odom, crop, &model.cloud, cfg);
        report.ms_track = ms(t);
        report.mode = next.mode;
        report.crop_id = next.active_crop;
        report.pose = Some(next.pose);
        report.score = outcome.score;
        report.position_variance = Some(next.position_variance());
        report.status = if outcome.updated {
            Status::Tracked
        } else if next.mode == Mode::Acquisition {
            Status::Lost
        } else if object.is_none() {
            Status::Occluded
        } else {
            Status::Rejected
        };
        return (Some(next), Some(report));
    }

    // acquisition mode: keep any stale estimate current for the warm start
    let predicted = prior.map(|s| kalman_predict(s, odom, cfg));
    let object = match segment {
        None => return (predicted, None),
        Some(Err(e)) => {
            report.status = Status::Error(e.to_string());
            return (predicted, Some(report));
        }
        Some(Ok(o)) => o,
    };
    let t = Instant::now();
    let acquired = acquire_object(&object, model, predicted.as_ref(), cfg, parallel);
    report.ms_acquire = ms(t);
    match acquired {
        Ok(best) => {
            report.pose = Some(best.refined_transform);
            report.score = best.score.value;
            report.crop_id = Some(best.crop_id);
            if best.score.value >= cfg.epsilon {
                let s = TrackState::start(best.refined_transform, best.crop_id, best.score.value, cfg);
                report.mode = Mode::Tracking;
                report.position_variance = Some(s.position_variance());
                report.status = Status::Acquired;
                (Some(s), Some(report))
            } else {
                report.status = Status::BelowThreshold;
                report.position_variance = predicted.as_ref().map(TrackState::position_variance);
                (predicted, Some(report))
            }
        }
        Err(e) => {
            report.status = Status::Error(e.to_string());
            (predicted, Some(report))
        }
    }
}

/// Warm start from the last active crop at the predicted pose, then the full
/// multi-hypothesis search if that does not clear `epsilon`.
fn acquire_object(
    object: &SegmentedObjectCloud,
    model: &ObjectModel,
    predicted: Option<&TrackState>,
    cfg: &PipelineConfig,
    parallel: bool,
) -> Result<Hypothesis> {
    let tree = KdTree::build(&object.points)?;
    if let Some(state) = predicted {
        if let Some(crop) = state.active_crop.and_then(|id| model.crops.iter().find(|c| c.crop_id == id)) {
            let h = evaluate(crop, state.pose, &tree, &cfg.acquisition_icp(), cfg.tau)?;
            if h.icp.is_some() && h.score.value >= cfg.epsilon {
                return Ok(h);
            }
        }
    }
    let median = median_position(&object.points)?;
    let acq = acquire_with_tree(&tree, &median, &model.crops, cfg, parallel)?;
    Ok(acq.hypotheses.into_iter().next().expect("ranked hypotheses are non-empty"))
}
