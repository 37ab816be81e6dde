//! Front-face model crops rendered from viewpoints spread over the sphere.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::mesh::MeshModel;
use super::sampling::{sample_surface_tagged, voxel_downsample_with_membership};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, RigidTransform};
use crate::raycast::Bvh;

/// Camera distance from the model centroid, in bounding-sphere radii.
pub const CAMERA_DISTANCE_RADII: f64 = 4.0;
/// Occlusion slack along each visibility ray, meters.
pub const VISIBILITY_OFFSET_M: f64 = 1e-6;

pub const DEFAULT_VIEWS: usize = 30;
pub const DEFAULT_SAMPLES: usize = 20_000;
pub const DEFAULT_LEAF_M: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropParams {
    pub n_views: usize,
    pub sample_count: usize,
    pub leaf: f64,
    pub seed: u64,
}

impl Default for CropParams {
    fn default() -> Self {
        Self {
            n_views: DEFAULT_VIEWS,
            sample_count: DEFAULT_SAMPLES,
            leaf: DEFAULT_LEAF_M,
            seed: 0,
        }
    }
}

/// The subset of a model's downsampled cloud visible from one viewpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCrop {
    pub crop_id: usize,
    pub source_class: u8,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    /// Model frame; fixed storage order (ascending voxel key).
    pub points: PointCloud,
    /// Model frame to rendering-camera frame (z forward, y down).
    pub view: RigidTransform,
}

/// A model ready for registration: full downsampled cloud plus its crops.
#[derive(Clone, Debug)]
pub struct ObjectModel {
    pub class_id: u8,
    pub cloud: PointCloud,
    pub crops: Vec<ModelCrop>,
}

/// Unit direction from the model toward the camera for view `i` of `n`
/// (Fibonacci spiral, z up).
pub fn fibonacci_direction(i: usize, n: usize) -> Vector3<f64> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = golden * i as f64;
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

pub fn direction_from_angles(azimuth_deg: f64, elevation_deg: f64) -> Vector3<f64> {
    let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

fn angles_of(dir: &Vector3<f64>) -> (f64, f64) {
    (
        dir.y.atan2(dir.x).to_degrees(),
        dir.z.clamp(-1.0, 1.0).asin().to_degrees(),
    )
}

/// Rotation taking model coordinates into a camera that looks along `-dir`
/// with model +z pointing up in the image.
pub fn view_rotation(dir: &Vector3<f64>) -> Matrix3<f64> {
    let forward = -dir.normalize();
    let mut up = Vector3::z();
    if forward.cross(&up).norm() < 1e-6 {
        up = Vector3::y();
    }
    let y = -(up - forward * up.dot(&forward)).normalize();
    let x = y.cross(&forward);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), forward.transpose()])
}

/// Sampled model with per-voxel visibility bookkeeping.
pub struct CropSource {
    pub class_id: u8,
    pub cloud: PointCloud,
    samples: Vec<Point3>,
    normals: Vec<Vector3<f64>>,
    membership: Vec<usize>,
    voxel_sizes: Vec<usize>,
    bvh: Bvh,
    centroid: Point3,
    radius: f64,
}

impl CropSource {
    pub fn new(mesh: &MeshModel, sample_count: usize, leaf: f64, seed: u64) -> Result<Self> {
        let samples = sample_surface_tagged(mesh, sample_count, seed)?;
        let (cloud, membership) = voxel_downsample_with_membership(&samples.points, leaf)?;
        let mut voxel_sizes = vec![0usize; cloud.len()];
        for &m in &membership {
            voxel_sizes[m] += 1;
        }
        let tri_normals: Vec<Vector3<f64>> = (0..mesh.triangles.len())
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                (b - a).cross(&(c - a))
            })
            .collect();
        let normals = samples.triangles.iter().map(|&t| tri_normals[t]).collect();
        let centroid = cloud.centroid().ok_or(Error::EmptyMesh)?;
        let radius = mesh
            .vertices
            .iter()
            .map(|v| (v - centroid).norm())
            .fold(0.0, f64::max);
        Ok(Self {
            class_id: mesh.class_id,
            cloud,
            samples: samples.points,
            normals,
            membership,
            voxel_sizes,
            bvh: Bvh::new(mesh.world_triangles(&RigidTransform::identity(), 0)),
            centroid,
            radius,
        })
    }

    pub fn camera_position(&self, dir: &Vector3<f64>) -> Point3 {
        self.centroid + dir.normalize() * (CAMERA_DISTANCE_RADII * self.radius)
    }

    /// Crop seen from direction `dir` (model → camera). A voxel is kept when at
    /// least half of its surface samples face the camera and are unoccluded.
    pub fn crop(&self, crop_id: usize, dir: &Vector3<f64>) -> Result<ModelCrop> {
        let dir = dir.normalize();
        let cam = self.camera_position(&dir);
        let mut visible = vec![0usize; self.cloud.len()];
        for ((p, n), &voxel) in self.samples.iter().zip(&self.normals).zip(&self.membership) {
            let to_cam = cam - p;
            if n.dot(&to_cam) <= 0.0 {
                continue;
            }
            let ray = p - cam;
            let len = ray.norm();
            let t_max = 1.0 - VISIBILITY_OFFSET_M / len;
            if self.bvh.cast(&cam, &ray, t_max).is_none() {
                visible[voxel] += 1;
            }
        }
        let points: Vec<Point3> = visible
            .iter()
            .zip(&self.voxel_sizes)
            .zip(self.cloud.points())
            .filter(|((&v, &n), _)| 2 * v >= n && v > 0)
            .map(|(_, p)| *p)
            .collect();
        if points.is_empty() {
            return Err(Error::EmptyCrop(crop_id));
        }
        let r = view_rotation(&dir);
        let view = RigidTransform::from_rotation_matrix(&r, -(r * cam.coords));
        let (azimuth_deg, elevation_deg) = angles_of(&dir);
        Ok(ModelCrop {
            crop_id,
            source_class: self.class_id,
            azimuth_deg,
            elevation_deg,
            points: PointCloud { points },
            view,
        })
    }
}

/// `n_views` crops from Fibonacci-sphere viewpoints, ordered by crop id.
/// Viewpoints are evaluated in parallel; output is schedule-independent.
pub fn generate_crops(mesh: &MeshModel, n_views: usize, sample_count: usize, leaf: f64, seed: u64) -> Result<Vec<ModelCrop>> {
    Ok(build_object_model(mesh, &CropParams { n_views, sample_count, leaf, seed })?.crops)
}

pub fn build_object_model(mesh: &MeshModel, params: &CropParams) -> Result<ObjectModel> {
    if params.n_views == 0 {
        return Err(Error::InvalidArgument("n_views must be at least 1".into()));
    }
    let source = CropSource::new(mesh, params.sample_count, params.leaf, params.seed)?;
    let crops = (0..params.n_views)
        .into_par_iter()
        .map(|i| source.crop(i, &fibonacci_direction(i, params.n_views)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ObjectModel {
        class_id: mesh.class_id,
        cloud: source.cloud,
        crops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mesh::shapes;
    use std::collections::HashSet;

    fn key(p: &Point3) -> [u64; 3] {
        [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
    }

    #[test]
    fn thirty_crops_subset_of_cloud() {
        let mesh = shapes::corner_post(1);
        let model = build_object_model(&mesh, &CropParams { sample_count: 8000, ..Default::default() }).unwrap();
        assert_eq!(model.crops.len(), 30);
        let all: HashSet<[u64; 3]> = model.cloud.points().iter().map(key).collect();
        for (i, c) in model.crops.iter().enumerate() {
            assert_eq!(c.crop_id, i);
            assert!(!c.points.is_empty());
            assert!(c.points.points().iter().all(|p| all.contains(&key(p))));
        }
    }

    #[test]
    fn sphere_crop_matches_visible_cap() {
        // from distance d·R the visible cap covers (1 - 1/d)/2 of the sphere
        let mesh = shapes::sphere(0.1, 24, 48, 1);
        let src = CropSource::new(&mesh, 30_000, 0.005, 1).unwrap();
        let expected = (1.0 - 1.0 / CAMERA_DISTANCE_RADII) / 2.0;
        for i in [0, 7, 15, 29] {
            let crop = src.crop(i, &fibonacci_direction(i, 30)).unwrap();
            let frac = crop.points.len() as f64 / src.cloud.len() as f64;
            assert!((frac - expected).abs() <= 0.1 * expected, "view {i}: {frac} vs {expected}");
        }
    }

    #[test]
    fn one_sided_plate() {
        let mesh = shapes::plate(0.2, 1);
        let src = CropSource::new(&mesh, 5000, 0.005, 1).unwrap();
        let front = src.crop(0, &Vector3::z()).unwrap();
        assert!(front.points.len() as f64 >= 0.99 * src.cloud.len() as f64);
        assert!(matches!(src.crop(1, &-Vector3::z()), Err(Error::EmptyCrop(1))));
        assert!(matches!(src.crop(2, &Vector3::x()), Err(Error::EmptyCrop(2))));
    }

    #[test]
    fn dense_views_cover_convex_mesh() {
        let mesh = shapes::cuboid(0.12, 0.08, 0.05, 1);
        let src = CropSource::new(&mesh, 10_000, 0.005, 3).unwrap();
        let mut covered = HashSet::new();
        for i in 0..200 {
            for p in src.crop(i, &fibonacci_direction(i, 200)).unwrap().points.points() {
                covered.insert(key(p));
            }
        }
        assert!(covered.len() as f64 >= 0.95 * src.cloud.len() as f64);
    }

    #[test]
    fn deterministic_and_ordered() {
        let mesh = shapes::jug(2);
        let a = generate_crops(&mesh, 6, 4000, 0.005, 9).unwrap();
        let b = generate_crops(&mesh, 6, 4000, 0.005, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn view_rotation_is_proper_and_looks_at_model() {
        for i in 0..30 {
            let d = fibonacci_direction(i, 30);
            let r = view_rotation(&d);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            // direction toward the camera maps to -z
            assert!((r * d - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
            // model up maps to image up (negative y) whenever not looking straight down
            let up = r * Vector3::z();
            assert!(up.y <= 1e-12);
            let (az, el) = angles_of(&d);
            assert!((direction_from_angles(az, el) - d).norm() < 1e-12);
        }
    }
}
