use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mesh::MeshModel;
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// Surface samples with the index of the triangle each came from.
#[derive(Clone, Debug)]
pub struct SurfaceSamples {
    pub points: Vec<Point3>,
    pub triangles: Vec<usize>,
}

/// Area-weighted uniform samples over the mesh surface, deterministic per seed.
pub fn sample_surface(mesh: &MeshModel, point_count: usize, seed: u64) -> Result<PointCloud> {
    Ok(PointCloud {
        points: sample_surface_tagged(mesh, point_count, seed)?.points,
    })
}

pub fn sample_surface_tagged(mesh: &MeshModel, point_count: usize, seed: u64) -> Result<SurfaceSamples> {
    if point_count == 0 {
        return Err(Error::InvalidArgument("point_count must be positive".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for i in 0..mesh.triangles.len() {
        total += mesh.area(i);
        cumulative.push(total);
    }
    if mesh.triangles.is_empty() || total <= 0.0 {
        return Err(Error::EmptyMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(point_count);
    let mut triangles = Vec::with_capacity(point_count);
    for _ in 0..point_count {
        let u: f64 = rng.random::<f64>() * total;
        let tri = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        let [a, b, c] = mesh.triangle(tri);
        let r1 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        let p = a.coords * (1.0 - r1) + b.coords * (r1 * (1.0 - r2)) + c.coords * (r1 * r2);
        points.push(Point3::from(p));
        triangles.push(tri);
    }
    Ok(SurfaceSamples { points, triangles })
}

pub(crate) type VoxelKey = (i64, i64, i64);

pub(crate) fn voxel_key(p: &Point3, leaf: f64) -> VoxelKey {
    (
        (p.x / leaf).floor() as i64,
        (p.y / leaf).floor() as i64,
        (p.z / leaf).floor() as i64,
    )
}

/// One centroid per occupied `leaf`-sized voxel, ordered by ascending voxel key.
pub fn voxel_downsample(cloud: &PointCloud, leaf: f64) -> Result<PointCloud> {
    Ok(voxel_downsample_with_membership(cloud.points(), leaf)?.0)
}

/// Also returns, for every input point, the index of its output voxel.
pub(crate) fn voxel_downsample_with_membership(points: &[Point3], leaf: f64) -> Result<(PointCloud, Vec<usize>)> {
    if !(leaf > 0.0) {
        return Err(Error::InvalidArgument(format!("voxel leaf must be positive, got {leaf}")));
    }
    let mut bins: BTreeMap<VoxelKey, (Vector3<f64>, usize)> = BTreeMap::new();
    for p in points {
        let e = bins.entry(voxel_key(p, leaf)).or_insert((Vector3::zeros(), 0));
        e.0 += p.coords;
        e.1 += 1;
    }
    let slot: BTreeMap<VoxelKey, usize> = bins.keys().enumerate().map(|(i, k)| (*k, i)).collect();
    let membership = points.iter().map(|p| slot[&voxel_key(p, leaf)]).collect();
    let out = bins
        .values()
        .map(|(sum, n)| Point3::from(sum / *n as f64))
        .collect();
    Ok((PointCloud { points: out }, membership))
}
