//! Generated scene collections.
//!
//! Each scene places a few of the built-in objects upright on a table in
//! front of a VGA camera 0.8 to 1.2 m away, looking down at 30° to 60°, with
//! world up pointing up in the image. The camera drifts by a small constant
//! motion every frame so the first frame exercises acquisition and the rest
//! exercise tracking. Every (frame, object) pair is one benchmark instance.

use nalgebra::{UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{look_at, on_table, NoiseModel, ObjectPlacement, SceneSpec, TablePlane};
use super::BUILTIN_OBJECTS;
use crate::geometry::RigidTransform;
use crate::scene::CameraIntrinsics;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteParams {
    pub name: String,
    pub scenes: usize,
    pub objects_per_scene: usize,
    pub frames: usize,
    pub seed: u64,
    pub noise: NoiseModel,
    pub classes: Vec<u8>,
}

impl Default for SuiteParams {
    /// 60 scenes × 3 objects × 3 frames = 540 instances.
    fn default() -> Self {
        Self {
            name: "suite".into(),
            scenes: 60,
            objects_per_scene: 3,
            frames: 3,
            seed: 2024,
            noise: NoiseModel::default(),
            classes: BUILTIN_OBJECTS.iter().map(|(c, _)| *c).collect(),
        }
    }
}

const PLACEMENT_RADIUS: f64 = 0.2;
const MIN_SEPARATION: f64 = 0.2;
const TARGET_HEIGHT: f64 = 0.06;

fn scene(params: &SuiteParams, index: usize) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index as u64 + 1);

    let dist = rng.random_range(0.8..1.2);
    let elev = rng.random_range(30f64..60.0).to_radians();
    let azim = rng.random_range(0f64..360.0).to_radians();
    let target = Vector3::new(0.0, 0.0, TARGET_HEIGHT);
    let eye = target + dist * Vector3::new(elev.cos() * azim.cos(), elev.cos() * azim.sin(), elev.sin());

    let mut classes = params.classes.clone();
    classes.shuffle(&mut rng);
    classes.truncate(params.objects_per_scene);
    classes.sort_unstable();

    let mut spots: Vec<(f64, f64)> = Vec::new();
    let mut objects = Vec::new();
    for &class_id in &classes {
        let (x, y) = loop {
            let r = PLACEMENT_RADIUS * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let p = (r * a.cos(), r * a.sin());
            if spots.iter().all(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() >= MIN_SEPARATION) {
                break p;
            }
        };
        spots.push((x, y));
        let yaw = rng.random_range(0.0..360.0);
        objects.push(ObjectPlacement { class_id, pose: on_table(x, y, 0.0, yaw), hidden: vec![] });
    }

    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let angle = rng.random_range(0.0..0.5f64).to_radians();
    let shift = Vector3::new(
        rng.random_range(-0.005..0.005),
        rng.random_range(-0.005..0.005),
        rng.random_range(-0.005..0.005),
    );
    let camera_motion = RigidTransform::new(
        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle),
        shift,
    );

    SceneSpec {
        name: format!("{}_{index:04}", params.name),
        intrinsics: CameraIntrinsics::vga(),
        camera_pose: look_at(&eye, &target),
        camera_motion,
        frames: params.frames,
        dt: 1.0 / 30.0,
        table: Some(TablePlane { height: 0.0, half_size: 0.6 }),
        objects,
        noise: params.noise,
        seed: params.seed.wrapping_add(index as u64),
    }
}

pub fn default_suite(params: &SuiteParams) -> Vec<SceneSpec> {
    (0..params.scenes).map(|i| scene(params, i)).collect()
}

/// Class id of the cylinder in [`symmetric_scene`].
pub const SYMMETRIC_CLASS: u8 = 9;

/// A single upright cylinder (see [`super::builtin_mesh`]) on a table, seen
/// from 0.9 m at 35° elevation. Noise-free depth.
pub fn symmetric_scene() -> SceneSpec {
    let target = Vector3::new(0.0, 0.0, 0.07);
    let elev = 35f64.to_radians();
    let eye = target + 0.9 * Vector3::new(elev.cos(), 0.0, elev.sin());
    SceneSpec {
        name: "symmetric".into(),
        intrinsics: CameraIntrinsics::vga(),
        camera_pose: look_at(&eye, &target),
        camera_motion: RigidTransform::identity(),
        frames: 1,
        dt: 1.0 / 30.0,
        table: Some(TablePlane { height: 0.0, half_size: 0.6 }),
        objects: vec![ObjectPlacement { class_id: SYMMETRIC_CLASS, pose: on_table(0.0, 0.0, 0.0, 20.0), hidden: vec![] }],
        noise: NoiseModel::none(),
        seed: 0,
    }
}
