use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};

use crate::config::{ConfigFile, Section};
use crate::error::{Error, Result};
use crate::geometry::RigidTransform;
use crate::model::crops::view_rotation;
use crate::scene::CameraIntrinsics;

/// Sensor and segmentation corruption applied to rendered frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    /// Per-pixel Gaussian depth noise, meters.
    pub depth_sigma: f64,
    /// Square structuring-element radius, pixels.
    pub mask_dilate: usize,
    pub mask_erode: usize,
    pub mask_flip_rate: f64,
    /// Peak of the smooth depth bias added on object surfaces, meters.
    pub deformation_amplitude: f64,
    /// Spatial period of that bias, meters.
    pub deformation_wavelength: f64,
    pub odometry_translation_sigma: f64,
    pub odometry_rotation_sigma_deg: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            depth_sigma: 0.0,
            mask_dilate: 0,
            mask_erode: 0,
            mask_flip_rate: 0.0,
            deformation_amplitude: 0.0,
            deformation_wavelength: 0.1,
            odometry_translation_sigma: 0.0,
            odometry_rotation_sigma_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.depth_sigma,
            self.mask_flip_rate,
            self.deformation_amplitude,
            self.odometry_translation_sigma,
            self.odometry_rotation_sigma_deg,
        ];
        if vals.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || self.mask_flip_rate > 1.0 {
            return Err(Error::Config(format!("invalid noise model {self:?}")));
        }
        if !(self.deformation_wavelength > 0.0) {
            return Err(Error::Config("deformation_wavelength must be positive".into()));
        }
        Ok(())
    }

    pub fn has_mask_corruption(&self) -> bool {
        self.mask_dilate > 0 || self.mask_erode > 0 || self.mask_flip_rate > 0.0
    }

    fn from_section(s: &Section, d: NoiseModel) -> Result<Self> {
        let n = Self {
            depth_sigma: s.parse_or("depth_sigma", d.depth_sigma)?,
            mask_dilate: s.parse_or("mask_dilate", d.mask_dilate)?,
            mask_erode: s.parse_or("mask_erode", d.mask_erode)?,
            mask_flip_rate: s.parse_or("mask_flip_rate", d.mask_flip_rate)?,
            deformation_amplitude: s.parse_or("deformation_amplitude", d.deformation_amplitude)?,
            deformation_wavelength: s.parse_or("deformation_wavelength", d.deformation_wavelength)?,
            odometry_translation_sigma: s.parse_or("odometry_translation_sigma", d.odometry_translation_sigma)?,
            odometry_rotation_sigma_deg: s.parse_or("odometry_rotation_sigma_deg", d.odometry_rotation_sigma_deg)?,
        };
        n.validate()?;
        Ok(n)
    }
}

impl Default for NoiseModel {
    /// 2 mm depth noise, clean masks, exact odometry.
    fn default() -> Self {
        Self { depth_sigma: 0.002, ..Self::none() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectPlacement {
    pub class_id: u8,
    /// Model frame to world frame.
    pub pose: RigidTransform,
    /// Half-open frame ranges during which the object is not rendered.
    pub hidden: Vec<(usize, usize)>,
}

impl ObjectPlacement {
    pub fn is_hidden(&self, frame: usize) -> bool {
        self.hidden.iter().any(|&(a, b)| frame >= a && frame < b)
    }
}

/// Horizontal square support surface at `z = height` in the world frame.
/// Rendered as background.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TablePlane {
    pub height: f64,
    pub half_size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    /// Camera to world at frame 0. Camera axes: x right, y down, z forward.
    pub camera_pose: RigidTransform,
    /// Motion applied every frame, expressed in the previous camera frame.
    pub camera_motion: RigidTransform,
    pub frames: usize,
    pub dt: f64,
    pub table: Option<TablePlane>,
    pub objects: Vec<ObjectPlacement>,
    pub noise: NoiseModel,
    pub seed: u64,
}

/// Camera at `eye` looking at `target` with world +z up in the image.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>) -> RigidTransform {
    let world_to_cam = view_rotation(&(eye - target));
    RigidTransform::from_rotation_matrix(&world_to_cam.transpose(), *eye)
}

/// Pose of a z-up model standing on a horizontal plane at `height`, rotated by
/// `yaw_deg` about the vertical.
pub fn on_table(x: f64, y: f64, height: f64, yaw_deg: f64) -> RigidTransform {
    RigidTransform::new(
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw_deg.to_radians()),
        Vector3::new(x, y, height),
    )
}

impl SceneSpec {
    /// Camera to world at `frame`.
    pub fn camera_at(&self, frame: usize) -> RigidTransform {
        (0..frame).fold(self.camera_pose, |t, _| t.compose(&self.camera_motion))
    }

    /// Ground-truth object pose in the camera frame of `frame`.
    pub fn truth(&self, placement: &ObjectPlacement, frame: usize) -> RigidTransform {
        self.camera_at(frame).inverse().compose(&placement.pose)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.noise.validate()?;
        if self.frames == 0 {
            return Err(Error::Config(format!("scene {}: frames must be at least 1", self.name)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("scene {}: dt must be positive", self.name)));
        }
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.objects {
            if o.class_id == 0 || !seen.insert(o.class_id) {
                return Err(Error::Config(format!(
                    "scene {}: class ids must be nonzero and unique, got {}",
                    self.name, o.class_id
                )));
            }
            if self.truth(o, 0).translation().z <= 0.0 {
                return Err(Error::Config(format!(
                    "scene {}: class {} is behind the camera",
                    self.name, o.class_id
                )));
            }
        }
        Ok(())
    }

    /// Parses a scene file:
    ///
    /// ```text
    /// name = desk
    /// frames = 5
    /// seed = 3
    /// camera_eye = 0.6 0 0.6
    /// camera_target = 0 0 0.05
    /// camera_motion = 1 0 0 0 0.01 0 0
    /// table = 0 0.75
    /// [intrinsics]
    /// fx = 525 ...
    /// [noise]
    /// depth_sigma = 0.002
    /// [object]
    /// class = 1
    /// on_table = 0.1 0.05 30
    /// hidden = 2 4
    /// ```
    ///
    /// `pose = qw qx qy qz tx ty tz` may replace `on_table`; `camera_pose`
    /// may replace `camera_eye`/`camera_target`.
    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let root = cfg.root();
        let intrinsics = match cfg.section("intrinsics") {
            Some(_) => CameraIntrinsics::from_config(cfg)?,
            None => CameraIntrinsics::vga(),
        };
        let table = match root.floats("table")? {
            None => None,
            Some(v) if v.len() == 2 => Some(TablePlane { height: v[0], half_size: v[1] }),
            Some(_) => return Err(Error::Config("table = <height> <half_size>".into())),
        };
        let camera_pose = match root.floats("camera_pose")? {
            Some(v) => RigidTransform::from_seven(&v)?,
            None => {
                let vec3 = |k: &str| -> Result<Vector3<f64>> {
                    match root.floats(k)? {
                        Some(v) if v.len() == 3 => Ok(Vector3::new(v[0], v[1], v[2])),
                        _ => Err(Error::Config(format!("{k} needs 3 numbers"))),
                    }
                };
                look_at(&vec3("camera_eye")?, &vec3("camera_target")?)
            }
        };
        let camera_motion = match root.floats("camera_motion")? {
            Some(v) => RigidTransform::from_seven(&v)?,
            None => RigidTransform::identity(),
        };
        let noise = match cfg.section("noise") {
            Some(s) => NoiseModel::from_section(s, NoiseModel::default())?,
            None => NoiseModel::default(),
        };
        let table_height = table.map_or(0.0, |t| t.height);
        let mut objects = Vec::new();
        for s in cfg.sections_named("object") {
            let class_id: u8 = s.require("class")?;
            let pose = match (s.floats("pose")?, s.floats("on_table")?) {
                (Some(v), _) => RigidTransform::from_seven(&v)?,
                (None, Some(v)) if v.len() == 3 => on_table(v[0], v[1], table_height, v[2]),
                _ => {
                    return Err(Error::Config(format!(
                        "object section at line {} needs pose or on_table = x y yaw_deg",
                        s.line
                    )))
                }
            };
            let hidden = match s.floats("hidden")? {
                None => Vec::new(),
                Some(v) if v.len() % 2 == 0 => v.chunks(2).map(|c| (c[0] as usize, c[1] as usize)).collect(),
                Some(_) => return Err(Error::Config("hidden needs start/end pairs".into())),
            };
            objects.push(ObjectPlacement { class_id, pose, hidden });
        }
        let spec = Self {
            name: root.get("name").unwrap_or("scene").to_string(),
            intrinsics,
            camera_pose,
            camera_motion,
            frames: root.parse_or("frames", 1)?,
            dt: root.parse_or("dt", 1.0 / 30.0)?,
            table,
            objects,
            noise,
            seed: root.parse_or("seed", 0)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_config(&ConfigFile::load(path)?)
    }

    /// Inverse of [`SceneSpec::from_config`] (poses written explicitly).
    pub fn to_config_text(&self) -> String {
        let seven = |t: &RigidTransform| {
            t.to_seven().iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
        };
        let mut s = format!(
            "name = {}\nframes = {}\ndt = {:?}\nseed = {}\ncamera_pose = {}\ncamera_motion = {}\n",
            self.name,
            self.frames,
            self.dt,
            self.seed,
            seven(&self.camera_pose),
            seven(&self.camera_motion)
        );
        if let Some(t) = self.table {
            s.push_str(&format!("table = {:?} {:?}\n", t.height, t.half_size));
        }
        s.push_str("[intrinsics]\n");
        s.push_str(&self.intrinsics.to_config_text());
        let n = &self.noise;
        s.push_str(&format!(
            "[noise]\ndepth_sigma = {:?}\nmask_dilate = {}\nmask_erode = {}\nmask_flip_rate = {:?}\ndeformation_amplitude = {:?}\ndeformation_wavelength = {:?}\nodometry_translation_sigma = {:?}\nodometry_rotation_sigma_deg = {:?}\n",
            n.depth_sigma,
            n.mask_dilate,
            n.mask_erode,
            n.mask_flip_rate,
            n.deformation_amplitude,
            n.deformation_wavelength,
            n.odometry_translation_sigma,
            n.odometry_rotation_sigma_deg
        ));
        for o in &self.objects {
            s.push_str(&format!("[object]\nclass = {}\npose = {}\n", o.class_id, seven(&o.pose)));
            if !o.hidden.is_empty() {
                let h: Vec<String> = o.hidden.iter().map(|(a, b)| format!("{a} {b}")).collect();
                s.push_str(&format!("hidden = {}\n", h.join(" ")));
            }
        }
        s
    }
}
