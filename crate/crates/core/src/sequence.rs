//! Frame sequence directories.
//!
//! ```text
//! intrinsics.txt         fx/fy/cx/cy/width/height
//! odometry.txt           one line per frame: [dt] qw qx qy qz tx ty tz
//! depth_000000.png       16-bit millimeters (or depth_000000.tif, float meters)
//! labels_000000.png      8-bit class ids
//! truth.txt              optional: frame class qw qx qy qz tx ty tz
//! ```
//!
//! Odometry line `i` is the pose of camera `i` in camera `i - 1`; the first
//! line is ignored for motion but may carry `dt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::bench::{render_scene, ObjectLibrary, SceneSpec};
use crate::error::{Error, Result};
use crate::geometry::RigidTransform;
use crate::pipeline::{CameraOdometry, Frame};
use crate::scene::{CameraIntrinsics, DepthImage, LabelImage};

pub const INTRINSICS_FILE: &str = "intrinsics.txt";
pub const ODOMETRY_FILE: &str = "odometry.txt";
pub const TRUTH_FILE: &str = "truth.txt";

pub fn depth_name(i: usize) -> String {
    format!("depth_{i:06}.png")
}

pub fn labels_name(i: usize) -> String {
    format!("labels_{i:06}.png")
}

#[derive(Clone, Debug)]
pub struct FrameSequence {
    pub dir: PathBuf,
    pub intrinsics: CameraIntrinsics,
    pub odometry: Vec<CameraOdometry>,
    depth_paths: Vec<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_odometry(text: &str, default_dt: f64, ctx: &str) -> Result<Vec<CameraOdometry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(format!("{ctx}:{}", n + 1), e.to_string()))?;
        let (dt, seven) = match vals.len() {
            7 => (default_dt, &vals[..]),
            8 => (vals[0], &vals[1..]),
            k => return Err(Error::parse(format!("{ctx}:{}", n + 1), format!("expected 7 or 8 numbers, got {k}"))),
        };
        if !(dt > 0.0) {
            return Err(Error::parse(format!("{ctx}:{}", n + 1), format!("dt must be positive, got {dt}")));
        }
        out.push(CameraOdometry { motion: RigidTransform::from_seven(seven)?, dt });
    }
    Ok(out)
}

impl FrameSequence {
    /// Indexes `dir`. Frames are numbered consecutively from 0 up to the first
    /// missing depth image.
    pub fn open(dir: &Path, default_dt: f64) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
        }
        let intrinsics = CameraIntrinsics::load(&dir.join(INTRINSICS_FILE))?;
        let mut depth_paths = Vec::new();
        loop {
            let i = depth_paths.len();
            let png = dir.join(depth_name(i));
            let tif = dir.join(format!("depth_{i:06}.tif"));
            if png.is_file() {
                depth_paths.push(png);
            } else if tif.is_file() {
                depth_paths.push(tif);
            } else {
                break;
            }
        }
        let odom_path = dir.join(ODOMETRY_FILE);
        let odometry = if odom_path.is_file() {
            parse_odometry(&read(&odom_path)?, default_dt, &odom_path.display().to_string())?
        } else {
            Vec::new()
        };
        if !odometry.is_empty() && odometry.len() < depth_paths.len() {
            return Err(Error::parse(
                odom_path.display().to_string(),
                format!("{} odometry lines for {} frames", odometry.len(), depth_paths.len()),
            ));
        }
        let odometry = if odometry.is_empty() {
            vec![CameraOdometry::stationary(default_dt); depth_paths.len()]
        } else {
            odometry
        };
        Ok(Self { dir: dir.to_path_buf(), intrinsics, odometry, depth_paths })
    }

    pub fn len(&self) -> usize {
        self.depth_paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth_paths.is_empty()
    }

    pub fn load_frame(&self, i: usize) -> Result<Frame> {
        let depth = DepthImage::load(&self.depth_paths[i])?;
        let labels = LabelImage::load(&self.dir.join(labels_name(i)))?;
        let mut odometry = self.odometry[i];
        if i == 0 {
            odometry.motion = RigidTransform::identity();
        }
        Ok(Frame { depth, labels, odometry })
    }

    /// Ground truth, if present: (frame, class, pose) triples.
    pub fn truth(&self) -> Result<Vec<(usize, u8, RigidTransform)>> {
        let path = self.dir.join(TRUTH_FILE);
        if !path.is_file() {
            return Ok(Vec::new());
        }
        let ctx = path.display().to_string();
        let mut out = Vec::new();
        for (n, line) in read(&path)?.lines().enumerate() {
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.is_empty() || tok[0].starts_with('#') {
                continue;
            }
            let bad = || Error::parse(format!("{ctx}:{}", n + 1), "expected frame class and 7 pose numbers");
            if tok.len() != 9 {
                return Err(bad());
            }
            let vals = tok[2..].iter().map(|s| s.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|_| bad())?;
            out.push((
                tok[0].parse().map_err(|_| bad())?,
                tok[1].parse().map_err(|_| bad())?,
                RigidTransform::from_seven(&vals)?,
            ));
        }
        Ok(out)
    }
}

/// Renders every frame of `spec` into `dir` in the sequence layout.
/// Depth is quantized to millimeters by the PNG encoding.
pub fn write_sequence(dir: &Path, spec: &SceneSpec, library: &ObjectLibrary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write(INTRINSICS_FILE, &spec.intrinsics.to_config_text())?;
    let mut odom = String::new();
    let mut truth = String::new();
    for f in 0..spec.frames {
        let r = render_scene(spec, &library.meshes, f)?;
        r.depth.save_png_mm(&dir.join(depth_name(f)))?;
        r.labels.save_png(&dir.join(labels_name(f)))?;
        let m = r.odometry.motion.to_seven();
        let _ = writeln!(
            odom,
            "{:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?}",
            r.odometry.dt, m[0], m[1], m[2], m[3], m[4], m[5], m[6]
        );
        for t in &r.truths {
            let p = t.pose.to_seven();
            let _ = writeln!(
                truth,
                "{f} {} {:?} {:?} {:?} {:?} {:?} {:?} {:?}",
                t.class_id, p[0], p[1], p[2], p[3], p[4], p[5], p[6]
            );
        }
    }
    write(ODOMETRY_FILE, &odom)?;
    write(TRUTH_FILE, &truth)
}
