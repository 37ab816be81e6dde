//! Static 3D kd-tree for exact nearest-neighbor and radius queries.
//!
//! Distances are Euclidean. Radius queries are inclusive, results are sorted
//! by `(distance, index)`, and nearest-neighbor ties go to the lowest source
//! index, so every query agrees exactly with a linear scan.

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    /// Source indices, permuted so each leaf owns a contiguous range.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// A query hit: source index and Euclidean distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[inline]
fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_points(cloud.points())
    }

    pub fn from_points(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        let mut order = std::mem::take(&mut tree.order);
        tree.build_node(&mut order, 0);
        tree.order = order;
        Ok(tree)
    }

    fn build_node(&mut self, order: &mut [usize], offset: usize) -> usize {
        let id = self.nodes.len();
        if order.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start: offset,
                end: offset + order.len(),
            });
            return id;
        }
        let axis = self.widest_axis(order);
        let mid = order.len() / 2;
        let pts = &self.points;
        order.select_nth_unstable_by(mid, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let value = pts[order[mid]][axis];
        self.nodes.push(Node::Split {
            axis,
            value,
            left: 0,
            right: 0,
        });
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.build_node(lo, offset);
        let right = self.build_node(hi, offset + mid);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn widest_axis(&self, order: &[usize]) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in order {
            let p = &self.points[i];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Source indices in leaf order; a permutation of `0..len()`.
    pub fn indices(&self) -> &[usize] {
        &self.order
    }

    pub fn nearest(&self, query: &Point3) -> Neighbor {
        let (index, d2) = self
            .nearest_within_sq(query, f64::INFINITY)
            .expect("tree is non-empty");
        Neighbor {
            index,
            distance: d2.sqrt(),
        }
    }

    /// Nearest point no farther than `max_distance`, if any.
    pub fn nearest_within(&self, query: &Point3, max_distance: f64) -> Option<Neighbor> {
        self.nearest_within_sq(query, max_distance * max_distance)
            .map(|(index, d2)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
    }

    /// Returns `(index, squared distance)`.
    pub(crate) fn nearest_within_sq(&self, query: &Point3, max_d2: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut bound = max_d2;
        self.nearest_rec(0, query, &mut best, &mut bound);
        best
    }

    fn nearest_rec(&self, node: usize, q: &Point3, best: &mut Option<(usize, f64)>, bound: &mut f64) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2(&self.points[i], q);
                    if d2 > *bound {
                        continue;
                    }
                    let better = match *best {
                        None => true,
                        Some((bi, bd)) => d2 < bd || (d2 == bd && i < bi),
                    };
                    if better {
                        *best = Some((i, d2));
                        *bound = d2;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best, bound);
                if diff * diff <= *bound {
                    self.nearest_rec(far, q, best, bound);
                }
            }
        }
    }

    /// All points with distance `<= radius`, ascending by distance then index.
    pub fn radius_search(&self, query: &Point3, radius: f64) -> Vec<Neighbor> {
        let mut hits = Vec::new();
        self.radius_search_raw(query, radius, &mut hits);
        hits.into_iter()
            .map(|(index, d2)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect()
    }

    /// Sorted `(index, squared distance)` hits written into `out` (cleared first).
    pub(crate) fn radius_search_raw(&self, query: &Point3, radius: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        self.radius_rec(0, query, radius, out);
        out.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    }

    // Inclusion is decided on sqrt(d²) so that a hit at distance `d` is
    // always found again by a search of radius `d`.
    fn radius_rec(&self, node: usize, q: &Point3, r: f64, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2(&self.points[i], q);
                    if d2.sqrt() <= r {
                        out.push((i, d2));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, q, r, out);
                if diff.abs() <= r {
                    self.radius_rec(far, q, r, out);
                }
            }
        }
    }
}

/// Linear-scan reference queries, used as test oracles.
#[doc(hidden)]
pub mod brute {
    use super::{dist2, Neighbor};
    use crate::geometry::Point3;

    pub fn nearest(points: &[Point3], q: &Point3) -> Neighbor {
        let mut best = (0usize, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d2 = dist2(p, q);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        Neighbor {
            index: best.0,
            distance: best.1.sqrt(),
        }
    }

    pub fn radius(points: &[Point3], q: &Point3, r: f64) -> Vec<Neighbor> {
        let mut hits: Vec<(usize, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dist2(p, q)))
            .filter(|&(_, d2)| d2.sqrt() <= r)
            .collect();
        hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        hits.into_iter()
            .map(|(index, d2)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn empty_cloud_rejected() {
        assert!(matches!(KdTree::from_points(&[]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn single_point() {
        let t = KdTree::from_points(&[Point3::new(1.0, 2.0, 3.0)]).unwrap();
        assert_eq!(t.len(), 1);
        let n = t.nearest(&Point3::new(1.0, 2.0, 3.0));
        assert_eq!((n.index, n.distance), (0, 0.0));
    }

    #[test]
    fn every_index_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = KdTree::from_points(&random_points(&mut rng, 1000)).unwrap();
        let mut idx = t.indices().to_vec();
        idx.sort_unstable();
        assert_eq!(idx, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn two_point_nearest() {
        let t = KdTree::from_points(&[Point3::origin(), Point3::new(1.0, 0.0, 0.0)]).unwrap();
        let n = t.nearest(&Point3::new(0.1, 0.0, 0.0));
        assert_eq!(n.index, 0);
        assert!((n.distance - 0.1).abs() < 1e-15);
    }

    #[test]
    fn radius_edge_cases() {
        let pts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 2.0, 0.0)];
        let t = KdTree::from_points(&pts).unwrap();
        assert!(t.radius_search(&Point3::new(5.0, 5.0, 5.0), 0.1).is_empty());
        let hits = t.radius_search(&Point3::origin(), 0.5);
        assert_eq!(hits, vec![Neighbor { index: 0, distance: 0.0 }]);
        // inclusive boundary
        assert_eq!(t.radius_search(&Point3::origin(), 1.0).len(), 2);
    }

    #[test]
    fn duplicate_points_tie_to_lowest_index() {
        let p = Point3::new(0.3, 0.3, 0.3);
        let pts: Vec<Point3> = (0..40).map(|_| p).collect();
        let t = KdTree::from_points(&pts).unwrap();
        assert_eq!(t.nearest(&Point3::origin()).index, 0);
        let hits = t.radius_search(&p, 0.1);
        assert_eq!(hits.iter().map(|h| h.index).collect::<Vec<_>>(), (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn matches_linear_scan_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts = random_points(&mut rng, 2000);
        let t = KdTree::from_points(&pts).unwrap();
        for q in random_points(&mut rng, 10_000) {
            assert_eq!(t.nearest(&q), brute::nearest(&pts, &q));
        }
    }

    #[test]
    fn matches_linear_scan_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = random_points(&mut rng, 1000);
        let t = KdTree::from_points(&pts).unwrap();
        for q in random_points(&mut rng, 1000) {
            let r = rng.random_range(0.01..0.4);
            assert_eq!(t.radius_search(&q, r), brute::radius(&pts, &q, r));
        }
    }

    proptest! {
        #[test]
        fn radius_equals_bruteforce(
            pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..300),
            q in prop::array::uniform3(-1.2f64..1.2),
            r in 0.001f64..1.0,
        ) {
            let pts: Vec<Point3> = pts.into_iter().map(Point3::from).collect();
            let q = Point3::from(q);
            let t = KdTree::from_points(&pts).unwrap();
            prop_assert_eq!(t.radius_search(&q, r), brute::radius(&pts, &q, r));
            let n = t.nearest(&q);
            prop_assert_eq!(n, brute::nearest(&pts, &q));
            let within = t.radius_search(&q, n.distance);
            prop_assert!(within.iter().any(|h| h.index == n.index));
            prop_assert!(within.iter().all(|h| h.distance >= n.distance));
        }

        #[test]
        fn grid_points_with_ties(nx in 1usize..8, q in prop::array::uniform3(-0.5f64..3.5)) {
            // integer lattice: many exact ties on split planes
            let mut pts = Vec::new();
            for i in 0..nx { for j in 0..4 { for k in 0..3 {
                pts.push(Point3::new(i as f64, j as f64, k as f64));
            }}}
            let q = Point3::from(q).map(|c| c.round());
            let t = KdTree::from_points(&pts).unwrap();
            prop_assert_eq!(t.nearest(&q), brute::nearest(&pts, &q));
            prop_assert_eq!(t.radius_search(&q, 1.0), brute::radius(&pts, &q, 1.0));
        }
    }
}
