//! Point-to-point ICP with a closed-form SVD alignment step.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, RigidTransform};
use crate::kdtree::KdTree;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Correspondences farther than this (meters) are ignored.
    pub max_correspondence_distance: f64,
    /// Convergence threshold on the incremental translation, meters.
    pub translation_epsilon: f64,
    /// Convergence threshold on the incremental rotation, degrees.
    pub rotation_epsilon: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            max_correspondence_distance: 0.05,
            translation_epsilon: 1e-4,
            rotation_epsilon: 0.05,
        }
    }
}

impl IcpParams {
    pub fn with_iterations(self, max_iterations: usize) -> Self {
        Self {
            max_iterations,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.max_correspondence_distance > 0.0
            && self.translation_epsilon > 0.0
            && self.rotation_epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("ICP parameters must be positive: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcpResult {
    pub transform: RigidTransform,
    /// Mean squared distance over the final inlier correspondences, m².
    pub fitness: f64,
    pub iterations: usize,
    pub converged: bool,
    pub inlier_count: usize,
    /// Truncated objective per iteration: mean over all source points of
    /// `min(d², max_correspondence_distance²)`. Non-increasing.
    pub objective_history: Vec<f64>,
}

/// Least-squares rigid transform taking `source[i]` onto `target[i]`.
///
/// Uses centroid subtraction and an SVD of the cross-covariance, with the
/// reflection case corrected so the rotation is always proper.
pub fn best_rigid_transform(source: &[Point3], target: &[Point3]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::InvalidArgument(format!(
            "correspondence lists differ in length: {} vs {}",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::Degenerate("fewer than 3 correspondences"));
    }
    let n = source.len() as f64;
    let cs = source.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let ct = target.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;

    let mut h = Matrix3::zeros();
    let mut spread_s = Matrix3::zeros();
    let mut spread_t = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        let ds = s.coords - cs;
        let dt = t.coords - ct;
        h += ds * dt.transpose();
        spread_s += ds * ds.transpose();
        spread_t += dt * dt.transpose();
    }
    check_spread(&spread_s)?;
    check_spread(&spread_t)?;

    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Degenerate("SVD did not converge")),
    };
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let r = v * correction * u.transpose();
    let t = ct - r * cs;
    Ok(RigidTransform::from_rotation_matrix(&r, t))
}

/// Rejects coincident or collinear point sets via the scatter matrix spectrum.
fn check_spread(scatter: &Matrix3<f64>) -> Result<()> {
    let mut eig: Vec<f64> = scatter.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    if eig[0] <= 1e-24 {
        return Err(Error::Degenerate("points are coincident"));
    }
    if eig[1] <= eig[0] * 1e-12 {
        return Err(Error::Degenerate("points are collinear"));
    }
    Ok(())
}

/// Registers `source` onto the points indexed by `target`, starting from `init`.
pub fn icp_with_tree(
    source: &PointCloud,
    target: &KdTree,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<IcpResult> {
    params.validate()?;
    if source.len() < 3 {
        return Err(Error::InvalidArgument("ICP source needs at least 3 points".into()));
    }
    let max_d2 = params.max_correspondence_distance * params.max_correspondence_distance;
    let mut transform = *init;
    let mut history = Vec::with_capacity(params.max_iterations + 1);
    let mut moved = Vec::with_capacity(source.len());
    let mut matched = Vec::with_capacity(source.len());
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iterations {
        let stats = correspond(source, target, &transform, max_d2, &mut moved, &mut matched);
        history.push(stats.truncated_mean);
        if stats.inliers == 0 {
            return Err(Error::NoCorrespondences {
                max_distance: params.max_correspondence_distance,
            });
        }
        let step = best_rigid_transform(&moved, &matched)?;
        transform = step.compose(&transform);
        iterations += 1;
        if step.translation().norm() < params.translation_epsilon
            && step.angle_deg() < params.rotation_epsilon
        {
            converged = true;
            break;
        }
    }

    let stats = correspond(source, target, &transform, max_d2, &mut moved, &mut matched);
    history.push(stats.truncated_mean);
    if stats.inliers == 0 {
        return Err(Error::NoCorrespondences {
            max_distance: params.max_correspondence_distance,
        });
    }
    Ok(IcpResult {
        transform,
        fitness: stats.inlier_sum / stats.inliers as f64,
        iterations,
        converged,
        inlier_count: stats.inliers,
        objective_history: history,
    })
}

/// Builds a tree over `target` and runs [`icp_with_tree`].
pub fn icp(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<IcpResult> {
    let tree = KdTree::build(target)?;
    icp_with_tree(source, &tree, init, params)
}

struct CorrespondenceStats {
    inliers: usize,
    inlier_sum: f64,
    truncated_mean: f64,
}

fn correspond(
    source: &PointCloud,
    target: &KdTree,
    transform: &RigidTransform,
    max_d2: f64,
    moved: &mut Vec<Point3>,
    matched: &mut Vec<Point3>,
) -> CorrespondenceStats {
    moved.clear();
    matched.clear();
    let mut inlier_sum = 0.0;
    let mut truncated = 0.0;
    for p in source.points() {
        let q = transform.apply(p);
        match target.nearest_within_sq(&q, max_d2) {
            Some((i, d2)) => {
                moved.push(q);
                matched.push(target.points()[i]);
                inlier_sum += d2;
                truncated += d2;
            }
            None => truncated += max_d2,
        }
    }
    CorrespondenceStats {
        inliers: moved.len(),
        inlier_sum,
        truncated_mean: truncated / source.len() as f64,
    }
}

/// Mean squared nearest-neighbor distance of the transformed source over
/// correspondences within `max_dist`; `+inf` when there are none.
pub fn fitness_score(
    source: &PointCloud,
    target_tree: &KdTree,
    transform: &RigidTransform,
    max_dist: f64,
) -> f64 {
    let max_d2 = max_dist * max_dist;
    let (sum, count) = source
        .points()
        .iter()
        .filter_map(|p| target_tree.nearest_within_sq(&transform.apply(p), max_d2))
        .fold((0.0, 0usize), |(s, c), (_, d2)| (s + d2, c + 1));
    if count == 0 {
        f64::INFINITY
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pose_error;
    use crate::kdtree::brute;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blob(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-0.15..0.15),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.05..0.05),
                )
            })
            .collect()
    }

    #[test]
    fn identical_sets_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = blob(&mut rng, 50);
        let t = best_rigid_transform(&pts, &pts).unwrap();
        assert!(t.translation().norm() < 1e-9);
        assert!(t.angle_deg() < 1e-6);
    }

    #[test]
    fn recovers_known_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let pts = blob(&mut rng, 30);
            let axis = Vector3::new(rng.random(), rng.random(), rng.random::<f64>() + 0.1);
            let r = RigidTransform::from_axis_angle_deg(axis, rng.random_range(-170.0..170.0));
            let truth = RigidTransform::new(*r.rotation(), Vector3::new(0.3, -0.2, 1.0));
            let moved: Vec<Point3> = pts.iter().map(|p| truth.apply(p)).collect();
            let est = best_rigid_transform(&pts, &moved).unwrap();
            let e = pose_error(&est, &truth);
            assert!(e.position_error < 1e-9, "{e:?}");
            for (p, q) in pts.iter().zip(&moved) {
                assert!((est.apply(p) - q).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn reflection_is_sign_corrected() {
        // target is a mirror image of source across the xy plane
        let src = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.1),
            Point3::new(0.0, 1.0, 0.2),
            Point3::new(0.3, 0.4, 1.0),
        ];
        let dst: Vec<Point3> = src.iter().map(|p| Point3::new(p.x, p.y, -p.z)).collect();
        let t = best_rigid_transform(&src, &dst).unwrap();
        assert!((t.rotation_matrix().determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<Point3> = (0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(best_rigid_transform(&line, &line), Err(Error::Degenerate(_))));
        let same = vec![Point3::new(1.0, 1.0, 1.0); 4];
        assert!(matches!(best_rigid_transform(&same, &same), Err(Error::Degenerate(_))));
        assert!(best_rigid_transform(&line[..2], &line[..2]).is_err());
    }

    #[test]
    fn icp_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cloud = PointCloud::new(blob(&mut rng, 200)).unwrap();
        let res = icp(&cloud, &cloud, &RigidTransform::identity(), &IcpParams::default()).unwrap();
        assert!(res.converged);
        assert!(res.fitness < 1e-20);
        assert!(res.transform.translation().norm() < 1e-12);
    }

    #[test]
    fn icp_recovers_small_displacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cloud = PointCloud::new(blob(&mut rng, 800)).unwrap();
        let r = RigidTransform::from_axis_angle_deg(Vector3::new(0.2, 1.0, 0.3), 10.0);
        let truth = RigidTransform::new(*r.rotation(), Vector3::new(0.02, 0.0, 0.0));
        let target = truth.apply_cloud(&cloud);
        let params = IcpParams {
            max_iterations: 200,
            max_correspondence_distance: 1.0,
            translation_epsilon: 1e-8,
            rotation_epsilon: 1e-6,
        };
        let res = icp(&cloud, &target, &RigidTransform::identity(), &params).unwrap();
        let e = pose_error(&res.transform, &truth);
        assert!(e.position_error < 1e-4 && e.geodesic_angle < 0.1, "{e:?}");
        for w in res.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn icp_disjoint_clouds_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cloud = PointCloud::new(blob(&mut rng, 50)).unwrap();
        let far = RigidTransform::from_translation(10.0, 0.0, 0.0).apply_cloud(&cloud);
        let err = icp(&cloud, &far, &RigidTransform::identity(), &IcpParams::default()).unwrap_err();
        assert!(matches!(err, Error::NoCorrespondences { .. }));
    }

    #[test]
    fn icp_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cloud = PointCloud::new(blob(&mut rng, 300)).unwrap();
        let target = RigidTransform::from_axis_angle_deg(Vector3::z(), 5.0).apply_cloud(&cloud);
        let a = icp(&cloud, &target, &RigidTransform::identity(), &IcpParams::default()).unwrap();
        let b = icp(&cloud, &target, &RigidTransform::identity(), &IcpParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fitness_cases() {
        let a = PointCloud::new(vec![Point3::origin()]).unwrap();
        let b = PointCloud::new(vec![Point3::new(0.01, 0.0, 0.0)]).unwrap();
        let tree = KdTree::build(&b).unwrap();
        let f = fitness_score(&a, &tree, &RigidTransform::identity(), 0.05);
        assert!((f - 1e-4).abs() < 1e-15);
        assert_eq!(fitness_score(&a, &tree, &RigidTransform::identity(), 0.001), f64::INFINITY);
        let same = KdTree::build(&a).unwrap();
        assert_eq!(fitness_score(&a, &same, &RigidTransform::identity(), 0.05), 0.0);
    }

    #[test]
    fn fitness_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = blob(&mut rng, 500);
        let noise = Normal::new(0.0, 0.002).unwrap();
        let noisy: Vec<Point3> = pts
            .iter()
            .map(|p| p + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let tree = KdTree::from_points(&pts).unwrap();
        let src = PointCloud::new(noisy.clone()).unwrap();
        let f = fitness_score(&src, &tree, &RigidTransform::identity(), 1.0);
        let oracle = noisy
            .iter()
            .map(|q| brute::nearest(&pts, q).distance.powi(2))
            .sum::<f64>()
            / noisy.len() as f64;
        assert!((f - oracle).abs() < 1e-15, "{f} vs {oracle}");
    }
}
