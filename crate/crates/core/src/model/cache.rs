//! On-disk crop cache: one binary PLY per crop plus a text manifest.
//!
//! ```text
//! key=<sha256 of mesh geometry and crop parameters>
//! class_id=1
//! n_views=30
//! sample_count=20000
//! leaf=0.005
//! seed=0
//! model model.ply <sha256>
//! crop <id> <azimuth_deg> <elevation_deg> <points> <file> <sha256> <qw qx qy qz tx ty tz>
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::crops::{build_object_model, CropParams, ModelCrop, ObjectModel};
use super::mesh::{read_cloud_ply, write_cloud_ply, MeshModel};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform};

pub const MANIFEST: &str = "manifest.txt";

/// Content hash of the mesh geometry and crop parameters.
pub fn cache_key(mesh: &MeshModel, params: &CropParams) -> String {
    let mut h = Sha256::new();
    h.update(b"segpose-crops-v1");
    h.update([mesh.class_id]);
    h.update((mesh.vertices.len() as u64).to_le_bytes());
    for v in &mesh.vertices {
        for c in [v.x, v.y, v.z] {
            h.update(c.to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        for i in t {
            h.update(i.to_le_bytes());
        }
    }
    h.update((params.n_views as u64).to_le_bytes());
    h.update((params.sample_count as u64).to_le_bytes());
    h.update(params.leaf.to_le_bytes());
    h.update(params.seed.to_le_bytes());
    hex::encode(h.finalize())
}

fn cloud_bytes(cloud: &PointCloud) -> Vec<u8> {
    let mut buf = Vec::new();
    write_cloud_ply(cloud, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Writes the model cloud, every crop and the manifest into `dir`.
pub fn write_cache(dir: &Path, key: &str, params: &CropParams, model: &ObjectModel) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = format!(
        "key={key}\nclass_id={}\nn_views={}\nsample_count={}\nleaf={:?}\nseed={}\n",
        model.class_id, params.n_views, params.sample_count, params.leaf, params.seed
    );
    let hash = write_file(&dir.join("model.ply"), &cloud_bytes(&model.cloud))?;
    manifest.push_str(&format!("model model.ply {hash}\n"));
    for crop in &model.crops {
        let name = format!("crop_{:03}.ply", crop.crop_id);
        let hash = write_file(&dir.join(&name), &cloud_bytes(&crop.points))?;
        let v = crop.view.to_seven();
        manifest.push_str(&format!(
            "crop {} {:?} {:?} {} {} {} {:?} {:?} {:?} {:?} {:?} {:?} {:?}\n",
            crop.crop_id,
            crop.azimuth_deg,
            crop.elevation_deg,
            crop.points.len(),
            name,
            hash,
            v[0], v[1], v[2], v[3], v[4], v[5], v[6]
        ));
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

/// Key recorded in an existing manifest, if any.
pub fn cached_key(dir: &Path) -> Option<String> {
    let text = fs::read_to_string(dir.join(MANIFEST)).ok()?;
    text.lines()
        .find_map(|l| l.strip_prefix("key="))
        .map(str::to_string)
}

fn read_verified(dir: &Path, name: &str, hash: &str) -> Result<PointCloud> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if hex::encode(Sha256::digest(&bytes)) != hash {
        return Err(Error::parse(path.display().to_string(), "content hash mismatch"));
    }
    read_cloud_ply(&path)
}

pub fn read_cache(dir: &Path) -> Result<ObjectModel> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let ctx = path.display().to_string();
    let bad = |m: &str| Error::parse(ctx.clone(), m.to_string());
    let mut class_id = None;
    let mut cloud = None;
    let mut crops = Vec::new();
    for line in text.lines() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [kv] if kv.starts_with("class_id=") => {
                class_id = Some(kv[9..].parse::<u8>().map_err(|_| bad("bad class_id"))?);
            }
            ["model", name, hash] => cloud = Some(read_verified(dir, name, hash)?),
            ["crop", id, az, el, n, name, hash, rest @ ..] => {
                let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
                let pose: Vec<f64> = rest.iter().map(|s| num(s)).collect::<Result<_>>()?;
                let points = read_verified(dir, name, hash)?;
                if points.len().to_string() != *n {
                    return Err(bad("crop point count mismatch"));
                }
                crops.push(ModelCrop {
                    crop_id: id.parse().map_err(|_| bad("bad crop id"))?,
                    source_class: 0,
                    azimuth_deg: num(az)?,
                    elevation_deg: num(el)?,
                    points,
                    view: RigidTransform::from_seven(&pose)?,
                });
            }
            _ => {}
        }
    }
    let class_id = class_id.ok_or_else(|| bad("missing class_id"))?;
    for c in &mut crops {
        c.source_class = class_id;
    }
    crops.sort_by_key(|c| c.crop_id);
    Ok(ObjectModel {
        class_id,
        cloud: cloud.ok_or_else(|| bad("missing model line"))?,
        crops,
    })
}

/// Loads crops from `dir` when its key matches, otherwise builds and writes them.
pub fn load_or_build(mesh: &MeshModel, params: &CropParams, dir: &Path) -> Result<ObjectModel> {
    let key = cache_key(mesh, params);
    if cached_key(dir).as_deref() == Some(key.as_str()) {
        if let Ok(model) = read_cache(dir) {
            return Ok(model);
        }
    }
    let model = build_object_model(mesh, params)?;
    write_cache(dir, &key, params, &model)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mesh::shapes;

    #[test]
    fn round_trip_and_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::bracket(4);
        let params = CropParams { n_views: 5, sample_count: 3000, ..Default::default() };
        let built = load_or_build(&mesh, &params, dir.path()).unwrap();
        let manifest1 = fs::read(dir.path().join(MANIFEST)).unwrap();
        let loaded = read_cache(dir.path()).unwrap();
        assert_eq!(loaded.cloud, built.cloud);
        assert_eq!(loaded.crops, built.crops);
        // rebuild from scratch writes identical bytes
        let key = cache_key(&mesh, &params);
        write_cache(dir.path(), &key, &params, &build_object_model(&mesh, &params).unwrap()).unwrap();
        assert_eq!(fs::read(dir.path().join(MANIFEST)).unwrap(), manifest1);
    }

    #[test]
    fn key_depends_on_params() {
        let mesh = shapes::bracket(4);
        let a = cache_key(&mesh, &CropParams::default());
        let b = cache_key(&mesh, &CropParams { seed: 1, ..Default::default() });
        assert_ne!(a, b);
    }

    #[test]
    fn tampered_crop_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::cuboid(0.1, 0.1, 0.1, 1);
        let params = CropParams { n_views: 2, sample_count: 1000, ..Default::default() };
        load_or_build(&mesh, &params, dir.path()).unwrap();
        fs::write(dir.path().join("crop_001.ply"), b"ply\n").unwrap();
        assert!(read_cache(dir.path()).is_err());
    }
}
