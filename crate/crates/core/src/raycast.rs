//! Ray/triangle intersection over a bounding-volume hierarchy.
//!
//! Shared by crop visibility and synthetic depth rendering.

use nalgebra::Vector3;

use crate::geometry::Point3;

#[derive(Clone, Copy, Debug)]
pub struct Triangle {
    pub a: Point3,
    pub b: Point3,
    pub c: Point3,
    /// Caller-defined tag, e.g. an object label.
    pub tag: u32,
}

impl Triangle {
    pub fn normal(&self) -> Vector3<f64> {
        (self.b - self.a).cross(&(self.c - self.a))
    }

    fn centroid(&self) -> Point3 {
        Point3::from((self.a.coords + self.b.coords + self.c.coords) / 3.0)
    }

    /// Möller–Trumbore; two-sided. Returns the ray parameter of the hit.
    #[inline]
    fn intersect(&self, origin: &Point3, dir: &Vector3<f64>) -> Option<f64> {
        let e1 = self.b - self.a;
        let e2 = self.c - self.a;
        let p = dir.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-18 {
            return None;
        }
        let inv = 1.0 / det;
        let s = origin - self.a;
        let u = s.dot(&p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = dir.dot(&q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = e2.dot(&q) * inv;
        (t > 0.0).then_some(t)
    }
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Vector3<f64>,
    hi: Vector3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Vector3::repeat(f64::INFINITY),
            hi: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3) {
        self.lo = self.lo.inf(&p.coords);
        self.hi = self.hi.sup(&p.coords);
    }

    /// Slab test; entry distance if the ray meets the box before `t_max`.
    #[inline]
    fn hit(&self, origin: &Point3, inv_dir: &Vector3<f64>, t_max: f64) -> Option<f64> {
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.lo[a] - origin[a]) * inv_dir[a];
            let mut far = (self.hi[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0·inf is treated as "no constraint"
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
enum BvhNode {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl BvhNode {
    fn bounds(&self) -> &Aabb {
        match self {
            BvhNode::Leaf { bounds, .. } | BvhNode::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub triangle: usize,
    pub tag: u32,
}

/// Immutable triangle BVH with median splits.
#[derive(Clone, Debug)]
pub struct Bvh {
    triangles: Vec<Triangle>,
    nodes: Vec<BvhNode>,
}

const BVH_LEAF: usize = 4;

impl Bvh {
    pub fn new(mut triangles: Vec<Triangle>) -> Self {
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            let n = triangles.len();
            build(&mut triangles, 0, n, &mut nodes);
        }
        Self { triangles, nodes }
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Closest hit along `origin + t·dir` with `0 < t < t_max`.
    /// `dir` need not be normalized; distances are in units of `|dir|`.
    pub fn cast(&self, origin: &Point3, dir: &Vector3<f64>, t_max: f64) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<RayHit> = None;
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds().hit(origin, &inv, limit).is_none() {
                continue;
            }
            match *node {
                BvhNode::Leaf { start, end, .. } => {
                    for i in start..end {
                        if let Some(t) = self.triangles[i].intersect(origin, dir) {
                            let closer = match best {
                                None => t < limit,
                                Some(b) => t < b.distance || (t == b.distance && i < b.triangle),
                            };
                            if closer {
                                limit = t;
                                best = Some(RayHit {
                                    distance: t,
                                    triangle: i,
                                    tag: self.triangles[i].tag,
                                });
                            }
                        }
                    }
                }
                BvhNode::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().hit(origin, &inv, limit);
                    let dr = self.nodes[right].bounds().hit(origin, &inv, limit);
                    match (dl, dr) {
                        (Some(a), Some(b)) if a <= b => {
                            stack.push(right);
                            stack.push(left);
                        }
                        (Some(_), Some(_)) => {
                            stack.push(left);
                            stack.push(right);
                        }
                        (Some(_), None) => stack.push(left),
                        (None, Some(_)) => stack.push(right),
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }
}

fn build(tris: &mut [Triangle], offset: usize, end: usize, nodes: &mut Vec<BvhNode>) -> usize {
    let slice = &mut tris[offset..end];
    let mut bounds = Aabb::empty();
    let mut centroids = Aabb::empty();
    for t in slice.iter() {
        bounds.grow(&t.a);
        bounds.grow(&t.b);
        bounds.grow(&t.c);
        centroids.grow(&t.centroid());
    }
    let id = nodes.len();
    if slice.len() <= BVH_LEAF {
        nodes.push(BvhNode::Leaf {
            bounds,
            start: offset,
            end,
        });
        return id;
    }
    let extent = centroids.hi - centroids.lo;
    let axis = extent.imax();
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| a.centroid()[axis].total_cmp(&b.centroid()[axis]));
    nodes.push(BvhNode::Leaf {
        bounds,
        start: 0,
        end: 0,
    });
    let left = build(tris, offset, offset + mid, nodes);
    let right = build(tris, offset + mid, end, nodes);
    nodes[id] = BvhNode::Inner {
        bounds,
        left,
        right,
    };
    id
}
