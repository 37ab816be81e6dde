//! Ray-cast depth and label rendering of a [`SceneSpec`].

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::spec::SceneSpec;
use crate::error::{Error, Result};
use crate::geometry::{Point3, RigidTransform};
use crate::model::MeshModel;
use crate::pipeline::CameraOdometry;
use crate::raycast::Bvh;
use crate::scene::{DepthImage, LabelImage};

/// RNG streams, so that enabling one noise source leaves the others unchanged.
pub(crate) const STREAM_DEPTH: u64 = 0;
pub(crate) const STREAM_ODOMETRY: u64 = 1;
pub(crate) const STREAM_MASK: u64 = 2;

pub(crate) fn rng_for(seed: u64, frame: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthPose {
    pub class_id: u8,
    /// Model to camera frame.
    pub pose: RigidTransform,
    /// Pixels labelled with this class in the rendered frame.
    pub visible_pixels: usize,
    /// Pixels the object would cover with nothing in front of it.
    pub unoccluded_pixels: usize,
}

impl TruthPose {
    pub fn visibility(&self) -> f64 {
        if self.unoccluded_pixels == 0 {
            0.0
        } else {
            self.visible_pixels as f64 / self.unoccluded_pixels as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct RenderedFrame {
    pub frame: usize,
    pub depth: DepthImage,
    /// Exact labels; see [`super::corrupt_mask`] for the noisy variant.
    pub labels: LabelImage,
    pub odometry: CameraOdometry,
    /// Rendered (not hidden) objects in ascending class order.
    pub truths: Vec<TruthPose>,
}

impl RenderedFrame {
    pub fn truth(&self, class_id: u8) -> Option<&TruthPose> {
        self.truths.iter().find(|t| t.class_id == class_id)
    }
}

struct PlacedObject {
    class_id: u8,
    pose: RigidTransform,
    bvh: Bvh,
    /// Inclusive pixel rectangle (u0, v0, u1, v1).
    rect: (usize, usize, usize, usize),
}

fn pixel_rect(spec: &SceneSpec, vertices: impl Iterator<Item = Point3>) -> (usize, usize, usize, usize) {
    let k = &spec.intrinsics;
    let full = (0, 0, k.width - 1, k.height - 1);
    let (mut lo, mut hi) = ((f64::MAX, f64::MAX), (f64::MIN, f64::MIN));
    for p in vertices {
        if p.z <= 1e-6 {
            return full;
        }
        let (u, v) = k.project(&p);
        lo = (lo.0.min(u), lo.1.min(v));
        hi = (hi.0.max(u), hi.1.max(v));
    }
    let clamp = |x: f64, n: usize| (x.max(0.0).min((n - 1) as f64)) as usize;
    if hi.0 < -1.0 || hi.1 < -1.0 || lo.0 > k.width as f64 || lo.1 > k.height as f64 {
        return (1, 1, 0, 0);
    }
    (
        clamp(lo.0.floor() - 1.0, k.width),
        clamp(lo.1.floor() - 1.0, k.height),
        clamp(hi.0.ceil() + 1.0, k.width),
        clamp(hi.1.ceil() + 1.0, k.height),
    )
}

fn contains(rect: &(usize, usize, usize, usize), u: usize, v: usize) -> bool {
    u >= rect.0 && u <= rect.2 && v >= rect.1 && v <= rect.3
}

/// Renders frame `frame` of `spec`. Deterministic per `(spec.seed, frame)`.
pub fn render_scene(spec: &SceneSpec, meshes: &BTreeMap<u8, MeshModel>, frame: usize) -> Result<RenderedFrame> {
    let k = spec.intrinsics;
    let cam = spec.camera_at(frame);
    let world_to_cam = cam.inverse();

    let mut placed = Vec::new();
    for o in spec.objects.iter().filter(|o| !o.is_hidden(frame)) {
        let mesh = meshes
            .get(&o.class_id)
            .ok_or_else(|| Error::Config(format!("no mesh for class {}", o.class_id)))?;
        let pose = world_to_cam.compose(&o.pose);
        let rect = pixel_rect(spec, mesh.vertices.iter().map(|v| pose.apply(v)));
        placed.push(PlacedObject {
            class_id: o.class_id,
            pose,
            bvh: Bvh::new(mesh.world_triangles(&pose, o.class_id as u32)),
            rect,
        });
    }

    // table plane in the camera frame: n·x = offset
    let table = spec.table.map(|t| {
        let n = world_to_cam.rotation() * Vector3::z();
        let p = world_to_cam.apply(&Point3::new(0.0, 0.0, t.height));
        (n, n.dot(&p.coords), t.half_size)
    });

    let n_obj = placed.len();
    // per row: depth, labels, unoccluded counts
    let rows: Vec<(Vec<f32>, Vec<u8>, Vec<usize>)> = (0..k.height)
        .into_par_iter()
        .map(|v| {
            let mut depth = vec![0f32; k.width];
            let mut labels = vec![0u8; k.width];
            let mut alone = vec![0usize; n_obj];
            let origin = Point3::origin();
            for u in 0..k.width {
                let dir = Vector3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
                let mut best = f64::INFINITY;
                let mut label = 0u8;
                if let Some((n, off, half)) = table {
                    let denom = n.dot(&dir);
                    if denom.abs() > 1e-12 {
                        let t = off / denom;
                        if t > 0.0 {
                            let w = cam.apply(&Point3::from(dir * t));
                            if w.x.abs() <= half && w.y.abs() <= half {
                                best = t;
                            }
                        }
                    }
                }
                for (i, o) in placed.iter().enumerate() {
                    if !contains(&o.rect, u, v) {
                        continue;
                    }
                    if let Some(hit) = o.bvh.cast(&origin, &dir, f64::INFINITY) {
                        alone[i] += 1;
                        if hit.distance < best {
                            best = hit.distance;
                            label = o.class_id;
                        }
                    }
                }
                if best.is_finite() {
                    depth[u] = best as f32;
                    labels[u] = label;
                }
            }
            (depth, labels, alone)
        })
        .collect();

    let mut depth = DepthImage::invalid(k.width, k.height);
    let mut labels = LabelImage::background(k.width, k.height);
    let mut unoccluded = vec![0usize; n_obj];
    for (v, (d, l, a)) in rows.into_iter().enumerate() {
        depth.data[v * k.width..(v + 1) * k.width].copy_from_slice(&d);
        labels.data[v * k.width..(v + 1) * k.width].copy_from_slice(&l);
        for (acc, x) in unoccluded.iter_mut().zip(a) {
            *acc += x;
        }
    }

    apply_depth_noise(spec, frame, &mut depth, &labels);

    let truths = placed
        .iter()
        .zip(&unoccluded)
        .map(|(o, &n)| TruthPose {
            class_id: o.class_id,
            pose: o.pose,
            visible_pixels: labels.data.iter().filter(|&&l| l == o.class_id).count(),
            unoccluded_pixels: n,
        })
        .collect::<Vec<_>>();
    if truths.iter().all(|t| t.visible_pixels == 0) && !spec.objects.is_empty() {
        log::warn!("scene {} frame {frame}: no object visible", spec.name);
    }
    let mut truths = truths;
    truths.sort_by_key(|t| t.class_id);

    Ok(RenderedFrame {
        frame,
        depth,
        labels,
        odometry: odometry(spec, frame),
        truths,
    })
}

fn apply_depth_noise(spec: &SceneSpec, frame: usize, depth: &mut DepthImage, labels: &LabelImage) {
    let noise = &spec.noise;
    let k = &spec.intrinsics;
    if noise.deformation_amplitude > 0.0 {
        let w = 2.0 * std::f64::consts::PI / noise.deformation_wavelength;
        for v in 0..k.height {
            for u in 0..k.width {
                let i = v * k.width + u;
                let d = depth.data[i] as f64;
                if labels.data[i] == 0 || !(d > 0.0) {
                    continue;
                }
                let x = (u as f64 - k.cx) * d / k.fx;
                let y = (v as f64 - k.cy) * d / k.fy;
                depth.data[i] = (d + noise.deformation_amplitude * (w * x).sin() * (w * y).sin()) as f32;
            }
        }
    }
    if noise.depth_sigma > 0.0 {
        let mut rng = rng_for(spec.seed, frame, STREAM_DEPTH);
        let normal = Normal::new(0.0, noise.depth_sigma).expect("validated sigma");
        for d in depth.data.iter_mut().filter(|d| **d > 0.0) {
            *d = (*d as f64 + normal.sample(&mut rng)).max(1e-4) as f32;
        }
    }
}

/// Odometry reported for `frame`: identity for the first frame, otherwise
/// the per-frame camera motion perturbed by the odometry noise.
pub fn odometry(spec: &SceneSpec, frame: usize) -> CameraOdometry {
    if frame == 0 {
        return CameraOdometry::stationary(spec.dt);
    }
    let n = &spec.noise;
    let mut motion = spec.camera_motion;
    if n.odometry_translation_sigma > 0.0 || n.odometry_rotation_sigma_deg > 0.0 {
        let mut rng = rng_for(spec.seed, frame, STREAM_ODOMETRY);
        let mut draw = |s: f64| if s > 0.0 { Normal::new(0.0, s).unwrap().sample(&mut rng) } else { 0.0 };
        let dt = Vector3::new(
            draw(n.odometry_translation_sigma),
            draw(n.odometry_translation_sigma),
            draw(n.odometry_translation_sigma),
        );
        let s = n.odometry_rotation_sigma_deg.to_radians();
        let dr = Vector3::new(draw(s), draw(s), draw(s));
        motion = motion.compose(&RigidTransform::new(nalgebra::UnitQuaternion::from_scaled_axis(dr), dt));
    }
    CameraOdometry { motion, dt: spec.dt }
}
