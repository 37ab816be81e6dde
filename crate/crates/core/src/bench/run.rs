use std::fmt::Write as _;

use rayon::prelude::*;

use super::mask::corrupt_mask;
use super::render::render_scene;
use super::spec::SceneSpec;
use super::ObjectLibrary;
use crate::error::{Error, Result};
use crate::geometry::{pose_error, PoseError, RigidTransform};
use crate::pipeline::{build_pool, Frame, Mode, PipelineConfig};

/// One (frame, object) instance compared against ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationRecord {
    pub scene: String,
    pub frame: usize,
    pub class_id: u8,
    pub estimate: Option<RigidTransform>,
    pub truth: RigidTransform,
    pub error: Option<PoseError>,
    pub success: bool,
    pub mode: Mode,
    pub status: String,
    pub score: f64,
    pub visibility: f64,
    /// Precision and recall of the mask given to the pipeline.
    pub mask_precision: f64,
    pub mask_recall: f64,
    pub ms_segment: f64,
    pub ms_acquire: f64,
    pub ms_track: f64,
}

impl EvaluationRecord {
    pub fn csv_header() -> &'static str {
        "scene,frame,class_id,mode,status,score,visibility,mask_precision,mask_recall,success,position_error,geodesic_angle,qw,qx,qy,qz,tx,ty,tz,ms_segment,ms_acquire,ms_track"
    }

    pub fn to_csv(&self) -> String {
        let (pe, ga) = self
            .error
            .map_or(("nan".to_string(), "nan".to_string()), |e| {
                (format!("{:.6}", e.position_error), format!("{:.4}", e.geodesic_angle))
            });
        let pose = self.estimate.map_or(vec!["nan".to_string(); 7], |p| {
            p.to_seven().iter().map(|v| format!("{v:.6}")).collect()
        });
        format!(
            "{},{},{},{},{},{:.6},{:.4},{:.4},{:.4},{},{pe},{ga},{},{:.3},{:.3},{:.3}",
            self.scene,
            self.frame,
            self.class_id,
            self.mode.as_str(),
            self.status,
            self.score,
            self.visibility,
            self.mask_precision,
            self.mask_recall,
            self.success as u8,
            pose.join(","),
            self.ms_segment,
            self.ms_acquire,
            self.ms_track
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchOptions {
    /// Instances less visible than this are recorded but not scored.
    pub min_visibility: f64,
    pub workers: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { min_visibility: 0.5, workers: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSummary {
    pub instances: usize,
    pub scored: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub median_position_error: f64,
    pub median_angle_error: f64,
    pub p90_position_error: f64,
    pub p90_angle_error: f64,
    pub mean_mask_precision: f64,
    pub mean_mask_recall: f64,
    pub acquisition_frames: usize,
    pub mean_ms_acquire: f64,
    pub tracking_frames: usize,
    pub mean_ms_track: f64,
}

impl BenchSummary {
    /// `key=value` lines. Timing keys start with `ms_`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "instances={}", self.instances);
        let _ = writeln!(s, "scored={}", self.scored);
        let _ = writeln!(s, "successes={}", self.successes);
        let _ = writeln!(s, "success_rate={:.4}", self.success_rate);
        let _ = writeln!(s, "median_position_error_m={:.6}", self.median_position_error);
        let _ = writeln!(s, "median_angle_error_deg={:.4}", self.median_angle_error);
        let _ = writeln!(s, "p90_position_error_m={:.6}", self.p90_position_error);
        let _ = writeln!(s, "p90_angle_error_deg={:.4}", self.p90_angle_error);
        let _ = writeln!(s, "mean_mask_precision={:.4}", self.mean_mask_precision);
        let _ = writeln!(s, "mean_mask_recall={:.4}", self.mean_mask_recall);
        let _ = writeln!(s, "acquisition_frames={}", self.acquisition_frames);
        let _ = writeln!(s, "tracking_frames={}", self.tracking_frames);
        let _ = writeln!(s, "ms_acquire_mean={:.3}", self.mean_ms_acquire);
        let _ = writeln!(s, "ms_track_mean={:.3}", self.mean_ms_track);
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    /// Sorted by scene, frame, class.
    pub records: Vec<EvaluationRecord>,
    pub summary: BenchSummary,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(EvaluationRecord::csv_header());
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.to_csv());
            s.push('\n');
        }
        s
    }
}

/// Nearest-rank percentile of an ascending slice.
pub(crate) fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let n = sorted.len();
    if q == 0.5 && n.is_multiple_of(2) {
        return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn summarize(records: &[EvaluationRecord], min_visibility: f64) -> BenchSummary {
    let scored: Vec<&EvaluationRecord> = records.iter().filter(|r| r.visibility >= min_visibility).collect();
    let successes = scored.iter().filter(|r| r.success).count();
    let mut pos: Vec<f64> = scored
        .iter()
        .map(|r| r.error.map_or(f64::INFINITY, |e| e.position_error))
        .collect();
    let mut ang: Vec<f64> = scored
        .iter()
        .map(|r| r.error.map_or(f64::INFINITY, |e| e.geodesic_angle))
        .collect();
    pos.sort_by(f64::total_cmp);
    ang.sort_by(f64::total_cmp);
    let mean = |v: Vec<f64>| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let acq: Vec<f64> = records.iter().filter(|r| r.ms_acquire > 0.0).map(|r| r.ms_acquire).collect();
    let trk: Vec<f64> = records.iter().filter(|r| r.ms_track > 0.0).map(|r| r.ms_track).collect();
    BenchSummary {
        instances: records.len(),
        scored: scored.len(),
        successes,
        success_rate: if scored.is_empty() { 0.0 } else { successes as f64 / scored.len() as f64 },
        median_position_error: percentile(&pos, 0.5),
        median_angle_error: percentile(&ang, 0.5),
        p90_position_error: percentile(&pos, 0.9),
        p90_angle_error: percentile(&ang, 0.9),
        mean_mask_precision: mean(scored.iter().map(|r| r.mask_precision).collect()),
        mean_mask_recall: mean(scored.iter().map(|r| r.mask_recall).collect()),
        acquisition_frames: acq.len(),
        mean_ms_acquire: mean(acq),
        tracking_frames: trk.len(),
        mean_ms_track: mean(trk),
    }
}

/// Runs the full pipeline over every frame of one scene.
pub fn run_scene(spec: &SceneSpec, library: &ObjectLibrary, cfg: &PipelineConfig) -> Result<Vec<EvaluationRecord>> {
    spec.validate()?;
    let mut cfg = cfg.clone();
    cfg.workers = 1;
    let mut pipeline = library.pipeline(cfg, spec.intrinsics)?;
    let mut records = Vec::new();
    for f in 0..spec.frames {
        let rendered = render_scene(spec, &library.meshes, f)?;
        let (labels, quality) = if spec.noise.has_mask_corruption() {
            corrupt_mask(&rendered.labels, &spec.noise, spec.seed ^ (f as u64).wrapping_mul(0x2545_F491_4F6C_DD1D))
        } else {
            (rendered.labels.clone(), Vec::new())
        };
        let frame = Frame { depth: rendered.depth, labels, odometry: rendered.odometry };
        let report = match pipeline.process_frame(&frame) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("scene {} frame {f}: {e}", spec.name);
                None
            }
        };
        for truth in &rendered.truths {
            if truth.visible_pixels == 0 {
                continue;
            }
            let obj = report.as_ref().and_then(|r| r.object(truth.class_id));
            let estimate = obj.and_then(|o| o.pose);
            let error = estimate.map(|e| pose_error(&e, &truth.pose));
            let q = quality.iter().find(|q| q.class_id == truth.class_id);
            records.push(EvaluationRecord {
                scene: spec.name.clone(),
                frame: f,
                class_id: truth.class_id,
                estimate,
                truth: truth.pose,
                error,
                success: error.is_some_and(|e| e.is_success()),
                mode: obj.map_or(Mode::Acquisition, |o| o.mode),
                status: obj.map_or("missing".to_string(), |o| o.status.to_string()),
                score: obj.map_or(0.0, |o| o.score),
                visibility: truth.visibility(),
                mask_precision: q.map_or(1.0, |q| q.precision),
                mask_recall: q.map_or(1.0, |q| q.recall),
                ms_segment: obj.map_or(0.0, |o| o.ms_segment),
                ms_acquire: obj.map_or(0.0, |o| o.ms_acquire),
                ms_track: obj.map_or(0.0, |o| o.ms_track),
            });
        }
    }
    Ok(records)
}

/// Evaluates every scene (concurrently when `options.workers > 1`) and
/// aggregates. Scene failures are logged and skipped.
pub fn run_benchmark(
    specs: &[SceneSpec],
    library: &ObjectLibrary,
    cfg: &PipelineConfig,
    options: &BenchOptions,
) -> Result<BenchReport> {
    if specs.is_empty() {
        return Err(Error::Config("benchmark needs at least one scene".into()));
    }
    cfg.validate()?;
    let run = |s: &SceneSpec| match run_scene(s, library, cfg) {
        Ok(r) => r,
        Err(e) => {
            log::error!("scene {}: {e}", s.name);
            Vec::new()
        }
    };
    let per_scene: Vec<Vec<EvaluationRecord>> = if options.workers > 1 {
        build_pool(options.workers)?.install(|| specs.par_iter().map(run).collect())
    } else {
        specs.iter().map(run).collect()
    };
    let mut records: Vec<EvaluationRecord> = per_scene.into_iter().flatten().collect();
    records.sort_by(|a, b| (&a.scene, a.frame, a.class_id).cmp(&(&b.scene, b.frame, b.class_id)));
    let summary = summarize(&records, options.min_visibility);
    Ok(BenchReport { records, summary })
}
