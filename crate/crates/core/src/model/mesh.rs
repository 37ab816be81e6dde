//! Indexed triangle meshes: PLY/OBJ input, PLY output, and a few procedural
//! shapes used by tests and the synthetic benchmark.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;


use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, RigidTransform};
use crate::raycast::Triangle;

const MAX_EXTENT_M: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct MeshModel {
    pub vertices: Vec<Point3>,
    /// Counter-clockwise seen from outside.
    pub triangles: Vec<[u32; 3]>,
    pub class_id: u8,
}

impl MeshModel {
    /// Validates indices, drops zero-area triangles and checks units.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>, class_id: u8) -> Result<Self> {
        if let Some(i) = vertices
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::parse("mesh", format!("vertex {i} is not finite")));
        }
        for (i, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v as usize >= vertices.len()) {
                return Err(Error::parse(
                    "mesh",
                    format!("triangle {i} references vertex out of range ({} vertices)", vertices.len()),
                ));
            }
        }
        let triangles: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                (b - a).cross(&(c - a)).norm() > 0.0
            })
            .collect();
        let mesh = Self {
            vertices,
            triangles,
            class_id,
        };
        if let Some((lo, hi)) = mesh.bounds() {
            let extent = (hi - lo).max();
            if extent > MAX_EXTENT_M {
                return Err(Error::UnitSanity { extent });
            }
        }
        Ok(mesh)
    }

    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        PointCloud::new(self.vertices.clone()).ok()?.bounds()
    }

    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        self.triangles[i].map(|v| self.vertices[v as usize])
    }

    pub fn area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Triangles in world coordinates after `pose`, tagged with `tag`.
    pub fn world_triangles(&self, pose: &RigidTransform, tag: u32) -> Vec<Triangle> {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i).map(|p| pose.apply(&p));
                Triangle { a, b, c, tag }
            })
            .collect()
    }

    pub fn transformed(&self, pose: &RigidTransform) -> MeshModel {
        MeshModel {
            vertices: self.vertices.iter().map(|p| pose.apply(p)).collect(),
            triangles: self.triangles.clone(),
            class_id: self.class_id,
        }
    }

    /// Concatenates meshes (used to build composite shapes).
    pub fn merge(parts: &[MeshModel], class_id: u8) -> MeshModel {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for part in parts {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&part.vertices);
            triangles.extend(part.triangles.iter().map(|t| t.map(|v| v + base)));
        }
        MeshModel {
            vertices,
            triangles,
            class_id,
        }
    }
}

pub fn load_mesh(path: &Path, class_id: u8) -> Result<MeshModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    let ctx = path.display().to_string();
    let (vertices, triangles) = match ext.as_deref() {
        Some("obj") => parse_obj(&bytes, &ctx)?,
        Some("ply") => parse_ply(&bytes, &ctx)?,
        _ if bytes.starts_with(b"ply") => parse_ply(&bytes, &ctx)?,
        _ => parse_obj(&bytes, &ctx)?,
    };
    MeshModel::new(vertices, triangles, class_id).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(ctx, message),
        other => other,
    })
}

fn parse_obj(bytes: &[u8], ctx: &str) -> Result<(Vec<Point3>, Vec<[u32; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in BufReader::new(bytes).lines().enumerate() {
        let line = line.map_err(|e| Error::parse(ctx, e.to_string()))?;
        let mut it = line.split_whitespace();
        let err = |m: String| Error::parse(format!("{ctx}:{}", lineno + 1), m);
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs 3 coordinates".into()));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = it
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|e| err(format!("{tok:?}: {e}")))?;
                        // negative indices are relative to the end
                        let abs = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        u32::try_from(abs).map_err(|_| err(format!("face index {i} out of range")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(err(format!("only triangles are supported, got {} vertices", idx.len())));
                }
                triangles.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], fmt: PlyFormat) -> f64 {
        macro_rules! num {
            ($t:ty) => {{
                let arr = b[..std::mem::size_of::<$t>()].try_into().unwrap();
                (if fmt == PlyFormat::BinaryBe { <$t>::from_be_bytes(arr) } else { <$t>::from_le_bytes(arr) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16),
            Scalar::U16 => num!(u16),
            Scalar::I32 => num!(i32),
            Scalar::U32 => num!(u32),
            Scalar::F32 => num!(f32),
            Scalar::F64 => num!(f64),
        }
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct PlyHeader {
    format: PlyFormat,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_ply_header(bytes: &[u8], ctx: &str) -> Result<PlyHeader> {
    let err = |m: &str| Error::parse(ctx, m.to_string());
    let mut pos = 0;
    let mut next_line = || -> Result<String> {
        let rest = &bytes[pos..];
        let end = rest.iter().position(|&c| c == b'\n').ok_or_else(|| err("truncated header"))?;
        pos += end + 1;
        Ok(String::from_utf8_lossy(&rest[..end]).trim().to_string())
    };
    if next_line()? != "ply" {
        return Err(err("missing 'ply' magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line()?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLe,
                    "binary_big_endian" => PlyFormat::BinaryBe,
                    _ => return Err(err("unknown PLY format")),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| err("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", c, t, name] => {
                let el = elements.last_mut().ok_or_else(|| err("property before element"))?;
                let c = Scalar::parse(c).ok_or_else(|| err("bad list count type"))?;
                let t = Scalar::parse(t).ok_or_else(|| err("bad list item type"))?;
                el.props.push(Property::List(name.to_string(), c, t));
            }
            ["property", t, name] => {
                let el = elements.last_mut().ok_or_else(|| err("property before element"))?;
                let t = Scalar::parse(t).ok_or_else(|| err("bad property type"))?;
                el.props.push(Property::Scalar(name.to_string(), t));
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    Ok(PlyHeader {
        format: format.ok_or_else(|| err("missing format line"))?,
        elements,
        body_offset: pos,
    })
}

/// Reads the numeric values of one element instance.
trait ValueSource {
    fn scalar(&mut self, t: Scalar) -> Option<f64>;
}

struct AsciiSource<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl ValueSource for AsciiSource<'_> {
    fn scalar(&mut self, _t: Scalar) -> Option<f64> {
        self.tokens.next()?.parse().ok()
    }
}

struct BinarySource<'a> {
    bytes: &'a [u8],
    pos: usize,
    fmt: PlyFormat,
}

impl ValueSource for BinarySource<'_> {
    fn scalar(&mut self, t: Scalar) -> Option<f64> {
        let b = self.bytes.get(self.pos..self.pos + t.size())?;
        self.pos += t.size();
        Some(t.decode(b, self.fmt))
    }
}

fn parse_ply(bytes: &[u8], ctx: &str) -> Result<(Vec<Point3>, Vec<[u32; 3]>)> {
    let header = parse_ply_header(bytes, ctx)?;
    let body = &bytes[header.body_offset..];
    let text;
    let mut ascii;
    let mut binary;
    let src: &mut dyn ValueSource = if header.format == PlyFormat::Ascii {
        text = String::from_utf8_lossy(body);
        ascii = AsciiSource {
            tokens: text.split_ascii_whitespace(),
        };
        &mut ascii
    } else {
        binary = BinarySource {
            bytes: body,
            pos: 0,
            fmt: header.format,
        };
        &mut binary
    };
    let truncated = || Error::parse(ctx, "truncated or malformed PLY body");

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for el in &header.elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            let mut face: Option<Vec<f64>> = None;
            for prop in &el.props {
                match prop {
                    Property::Scalar(name, t) => {
                        let v = src.scalar(*t).ok_or_else(truncated)?;
                        match name.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            _ => {}
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = src.scalar(*ct).ok_or_else(truncated)? as usize;
                        let items = (0..n)
                            .map(|_| src.scalar(*it).ok_or_else(truncated))
                            .collect::<Result<Vec<f64>>>()?;
                        if name == "vertex_indices" || name == "vertex_index" {
                            face = Some(items);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => vertices.push(Point3::new(xyz[0], xyz[1], xyz[2])),
                "face" => {
                    let f = face.ok_or_else(|| Error::parse(ctx, "face without vertex_indices"))?;
                    if f.len() != 3 {
                        return Err(Error::parse(ctx, format!("only triangles are supported, got {}-gon", f.len())));
                    }
                    if f.iter().any(|&i| i < 0.0 || i.fract() != 0.0) {
                        return Err(Error::parse(ctx, "negative or fractional face index"));
                    }
                    triangles.push([f[0] as u32, f[1] as u32, f[2] as u32]);
                }
                _ => {}
            }
        }
    }
    Ok((vertices, triangles))
}

/// Writes an ASCII PLY with full `double` precision.
pub fn write_mesh_ply(mesh: &MeshModel, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", mesh.vertices.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    out.push_str(&format!("element face {}\n", mesh.triangles.len()));
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for v in &mesh.vertices {
        out.push_str(&format!("{:?} {:?} {:?}\n", v.x, v.y, v.z));
    }
    for t in &mesh.triangles {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Binary little-endian PLY of a point cloud, `double` coordinates.
pub fn write_cloud_ply<W: Write>(cloud: &PointCloud, mut w: W) -> std::io::Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    )?;
    for p in cloud.points() {
        for c in [p.x, p.y, p.z] {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_cloud_ply(path: &Path) -> Result<PointCloud> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let (vertices, _) = parse_ply(&bytes, &path.display().to_string())?;
    PointCloud::new(vertices)
}

/// Procedural closed meshes with outward-facing winding.
pub mod shapes {
    use super::*;

    /// Axis-aligned box centered at the origin.
    pub fn cuboid(sx: f64, sy: f64, sz: f64, class_id: u8) -> MeshModel {
        let (hx, hy, hz) = (sx / 2.0, sy / 2.0, sz / 2.0);
        let vertices = vec![
            Point3::new(-hx, -hy, -hz),
            Point3::new(hx, -hy, -hz),
            Point3::new(hx, hy, -hz),
            Point3::new(-hx, hy, -hz),
            Point3::new(-hx, -hy, hz),
            Point3::new(hx, -hy, hz),
            Point3::new(hx, hy, hz),
            Point3::new(-hx, hy, hz),
        ];
        let triangles = vec![
            [0, 2, 1], [0, 3, 2], // -z
            [4, 5, 6], [4, 6, 7], // +z
            [0, 1, 5], [0, 5, 4], // -y
            [2, 3, 7], [2, 7, 6], // +y
            [1, 2, 6], [1, 6, 5], // +x
            [3, 0, 4], [3, 4, 7], // -x
        ];
        MeshModel { vertices, triangles, class_id }
    }

    /// Closed cylinder along z, centered at the origin.
    pub fn cylinder(radius: f64, height: f64, segments: usize, class_id: u8) -> MeshModel {
        frustum(radius, radius, height, segments, class_id)
    }

    /// Closed truncated cone along z: `r0` at `-h/2`, `r1` at `+h/2`.
    pub fn frustum(r0: f64, r1: f64, height: f64, segments: usize, class_id: u8) -> MeshModel {
        let n = segments.max(3);
        let h = height / 2.0;
        let mut vertices = Vec::with_capacity(2 * n + 2);
        for i in 0..n {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            vertices.push(Point3::new(r0 * a.cos(), r0 * a.sin(), -h));
        }
        for i in 0..n {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            vertices.push(Point3::new(r1 * a.cos(), r1 * a.sin(), h));
        }
        let bottom = vertices.len() as u32;
        vertices.push(Point3::new(0.0, 0.0, -h));
        let top = vertices.len() as u32;
        vertices.push(Point3::new(0.0, 0.0, h));
        let n32 = n as u32;
        let mut triangles = Vec::with_capacity(4 * n);
        for i in 0..n32 {
            let j = (i + 1) % n32;
            triangles.push([i, j, n32 + j]);
            triangles.push([i, n32 + j, n32 + i]);
            triangles.push([bottom, j, i]);
            triangles.push([top, n32 + i, n32 + j]);
        }
        MeshModel { vertices, triangles, class_id }
    }

    /// UV sphere centered at the origin.
    pub fn sphere(radius: f64, rings: usize, segments: usize, class_id: u8) -> MeshModel {
        let (rings, segments) = (rings.max(2), segments.max(3));
        let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
        for r in 1..rings {
            let phi = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let th = std::f64::consts::TAU * s as f64 / segments as f64;
                vertices.push(Point3::new(
                    radius * phi.sin() * th.cos(),
                    radius * phi.sin() * th.sin(),
                    radius * phi.cos(),
                ));
            }
        }
        vertices.push(Point3::new(0.0, 0.0, -radius));
        let south = (vertices.len() - 1) as u32;
        let seg = segments as u32;
        let ring = |r: u32, s: u32| 1 + r * seg + (s % seg);
        let mut triangles = Vec::new();
        for s in 0..seg {
            triangles.push([0, ring(0, s), ring(0, s + 1)]);
        }
        for r in 0..(rings as u32 - 2) {
            for s in 0..seg {
                let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s), ring(r + 1, s + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        let last = rings as u32 - 2;
        for s in 0..seg {
            triangles.push([south, ring(last, s + 1), ring(last, s)]);
        }
        MeshModel { vertices, triangles, class_id }
    }

    /// Single-sided square in the z = 0 plane, front face toward +z.
    pub fn plate(size: f64, class_id: u8) -> MeshModel {
        let h = size / 2.0;
        MeshModel {
            vertices: vec![
                Point3::new(-h, -h, 0.0),
                Point3::new(h, -h, 0.0),
                Point3::new(h, h, 0.0),
                Point3::new(-h, h, 0.0),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            class_id,
        }
    }

    fn offset(mesh: MeshModel, x: f64, y: f64, z: f64) -> MeshModel {
        mesh.transformed(&RigidTransform::from_translation(x, y, z))
    }

    /// Base slab with a post standing on one corner; no rotational symmetry.
    /// Origin at the bottom-face center of the slab.
    pub fn corner_post(class_id: u8) -> MeshModel {
        let base = offset(cuboid(0.14, 0.09, 0.04, class_id), 0.0, 0.0, 0.02);
        let post = offset(cuboid(0.035, 0.035, 0.08, class_id), 0.045, 0.02, 0.08);
        MeshModel::merge(&[base, post], class_id)
    }

    /// Two stacked, offset boxes.
    pub fn step_block(class_id: u8) -> MeshModel {
        let low = offset(cuboid(0.15, 0.07, 0.05, class_id), 0.0, 0.0, 0.025);
        let high = offset(cuboid(0.07, 0.07, 0.06, class_id), -0.04, 0.0, 0.08);
        let nub = offset(cuboid(0.03, 0.03, 0.03, class_id), 0.05, -0.045, 0.015);
        MeshModel::merge(&[low, high, nub], class_id)
    }

    /// Bottle: body cylinder with an off-axis handle block and a neck.
    pub fn jug(class_id: u8) -> MeshModel {
        let body = offset(cylinder(0.045, 0.14, 24, class_id), 0.0, 0.0, 0.07);
        let neck = offset(frustum(0.03, 0.015, 0.05, 16, class_id), 0.0, 0.0, 0.165);
        let handle = offset(cuboid(0.035, 0.02, 0.09, class_id), 0.06, 0.0, 0.08);
        MeshModel::merge(&[body, neck, handle], class_id)
    }

    /// L-shaped bracket: two slabs at a right angle, plus a gusset block.
    pub fn bracket(class_id: u8) -> MeshModel {
        let floor = offset(cuboid(0.12, 0.08, 0.025, class_id), 0.0, 0.0, 0.0125);
        let wall = offset(cuboid(0.025, 0.08, 0.09, class_id), -0.0475, 0.0, 0.07);
        let gusset = offset(cuboid(0.04, 0.02, 0.035, class_id), -0.015, 0.03, 0.0425);
        MeshModel::merge(&[floor, wall, gusset], class_id)
    }
}
