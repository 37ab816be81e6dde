//! Depth + label images to per-object camera-frame point clouds.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// Pinhole intrinsics, pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid intrinsics {self:?}")))
        }
    }

    /// 640×480 with a 525 px focal length.
    pub fn vga() -> Self {
        Self { fx: 525.0, fy: 525.0, cx: 319.5, cy: 239.5, width: 640, height: 480 }
    }

    pub fn back_project(&self, u: usize, v: usize, depth: f64) -> Point3 {
        Point3::new(
            (u as f64 - self.cx) * depth / self.fx,
            (v as f64 - self.cy) * depth / self.fy,
            depth,
        )
    }

    /// Continuous image coordinates of a camera-frame point (z > 0).
    pub fn project(&self, p: &Point3) -> (f64, f64) {
        (p.x * self.fx / p.z + self.cx, p.y * self.fy / p.z + self.cy)
    }

    /// Pixel containing the projection, if inside the image. Pixel `u`
    /// covers `[u - 0.5, u + 0.5)`.
    pub fn pixel_of(&self, p: &Point3) -> Option<(usize, usize)> {
        if !(p.z > 0.0) {
            return None;
        }
        let (u, v) = self.project(p);
        let (u, v) = ((u + 0.5).floor(), (v + 0.5).floor());
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }

    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let s = cfg.section("intrinsics").unwrap_or(cfg.root());
        Self::new(
            s.require("fx")?,
            s.require("fy")?,
            s.require("cx")?,
            s.require("cy")?,
            s.require("width")?,
            s.require("height")?,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_config(&ConfigFile::load(path)?)
    }

    pub fn to_config_text(&self) -> String {
        format!(
            "fx = {:?}\nfy = {:?}\ncx = {:?}\ncy = {:?}\nwidth = {}\nheight = {}\n",
            self.fx, self.fy, self.cx, self.cy, self.width, self.height
        )
    }
}

/// Row-major depth in meters; `0` or NaN marks an invalid pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }

    pub fn is_valid(d: f32) -> bool {
        d.is_finite() && d > 0.0
    }

    /// 16-bit PNG in millimeters, or 32-bit float TIFF in meters.
    pub fn load(path: &Path) -> Result<Self> {
        let is_tiff = matches!(
            path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
            Some("tif" | "tiff")
        );
        if is_tiff {
            return load_tiff_f32(path);
        }
        let img = image::open(path).map_err(|e| image_err(path, e))?;
        let img = match img {
            image::DynamicImage::ImageLuma16(b) => b,
            other => {
                return Err(Error::Image {
                    path: path.into(),
                    message: format!("expected 16-bit grayscale depth, got {:?}", other.color()),
                })
            }
        };
        let (w, h) = img.dimensions();
        Ok(Self {
            width: w as usize,
            height: h as usize,
            data: img.into_raw().into_iter().map(|mm| mm as f32 / 1000.0).collect(),
        })
    }

    /// Writes millimeter depth as 16-bit PNG; invalid and out-of-range pixels become 0.
    pub fn save_png_mm(&self, path: &Path) -> Result<()> {
        let raw: Vec<u16> = self
            .data
            .iter()
            .map(|&d| {
                if Self::is_valid(d) {
                    (d as f64 * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16
                } else {
                    0
                }
            })
            .collect();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw).expect("buffer size");
        buf.save(path).map_err(|e| image_err(path, e))
    }

    pub fn save_tiff(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = tiff::encoder::TiffEncoder::new(BufWriter::new(file)).map_err(|e| tiff_err(path, e))?;
        enc.write_image::<tiff::encoder::colortype::Gray32Float>(self.width as u32, self.height as u32, &self.data)
            .map_err(|e| tiff_err(path, e))
    }
}

fn image_err(path: &Path, e: image::ImageError) -> Error {
    Error::Image { path: path.into(), message: e.to_string() }
}

fn tiff_err(path: &Path, e: tiff::TiffError) -> Error {
    Error::Image { path: path.into(), message: e.to_string() }
}

fn load_tiff_f32(path: &Path) -> Result<DepthImage> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = tiff::decoder::Decoder::new(std::io::BufReader::new(file)).map_err(|e| tiff_err(path, e))?;
    let (w, h) = dec.dimensions().map_err(|e| tiff_err(path, e))?;
    match dec.read_image().map_err(|e| tiff_err(path, e))? {
        tiff::decoder::DecodingResult::F32(data) if data.len() == (w * h) as usize => Ok(DepthImage {
            width: w as usize,
            height: h as usize,
            data,
        }),
        _ => Err(Error::Image {
            path: path.into(),
            message: "expected single-channel 32-bit float TIFF".into(),
        }),
    }
}

/// Row-major class labels; `0` is background.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl LabelImage {
    pub fn background(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height] }
    }

    pub fn get(&self, u: usize, v: usize) -> u8 {
        self.data[v * self.width + u]
    }

    /// Distinct non-background labels, ascending.
    pub fn classes(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &l in &self.data {
            seen[l as usize] = true;
        }
        (1..=255u8).filter(|&c| seen[c as usize]).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| image_err(path, e))?;
        let img = match img {
            image::DynamicImage::ImageLuma8(b) => b,
            other => {
                return Err(Error::Image {
                    path: path.into(),
                    message: format!("expected 8-bit grayscale labels, got {:?}", other.color()),
                })
            }
        };
        let (w, h) = img.dimensions();
        Ok(Self { width: w as usize, height: h as usize, data: img.into_raw() })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, self.data.clone()).expect("buffer size");
        buf.save(path).map_err(|e| image_err(path, e))
    }
}

/// Valid back-projected points with the row-major pixel index each came from.
#[derive(Clone, Debug, PartialEq)]
pub struct OrganizedCloud {
    pub width: usize,
    pub height: usize,
    pub cloud: PointCloud,
    pub pixels: Vec<usize>,
}

pub fn depth_to_cloud(depth: &DepthImage, k: &CameraIntrinsics) -> Result<OrganizedCloud> {
    if (depth.width, depth.height) != (k.width, k.height) {
        return Err(Error::DimensionMismatch {
            expected: (k.width, k.height),
            actual: (depth.width, depth.height),
        });
    }
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let d = depth.get(u, v);
            if DepthImage::is_valid(d) {
                points.push(k.back_project(u, v, d as f64));
                pixels.push(v * depth.width + u);
            }
        }
    }
    Ok(OrganizedCloud {
        width: depth.width,
        height: depth.height,
        cloud: PointCloud { points },
        pixels,
    })
}

/// The scene cloud of one segmented object.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentedObjectCloud {
    pub class_id: u8,
    pub points: PointCloud,
    pub pixels: Vec<usize>,
}

pub fn extract_object_cloud(cloud: &OrganizedCloud, labels: &LabelImage, class_id: u8) -> Result<SegmentedObjectCloud> {
    if (cloud.width, cloud.height) != (labels.width, labels.height) {
        return Err(Error::DimensionMismatch {
            expected: (cloud.width, cloud.height),
            actual: (labels.width, labels.height),
        });
    }
    let (points, pixels): (Vec<Point3>, Vec<usize>) = cloud
        .cloud
        .points()
        .iter()
        .zip(&cloud.pixels)
        .filter(|(_, &px)| labels.data[px] == class_id)
        .map(|(p, &px)| (*p, px))
        .unzip();
    if points.is_empty() {
        return Err(Error::EmptySegment(class_id));
    }
    Ok(SegmentedObjectCloud {
        class_id,
        points: PointCloud { points },
        pixels,
    })
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Component-wise median; even counts take the midpoint of the middle pair.
pub fn median_position(cloud: &PointCloud) -> Result<Point3> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut buf: Vec<f64> = Vec::with_capacity(cloud.len());
    let mut axis = |a: usize| {
        buf.clear();
        buf.extend(cloud.points().iter().map(|p| p[a]));
        median_of(&mut buf)
    };
    Ok(Point3::new(axis(0), axis(1), axis(2)))
}
