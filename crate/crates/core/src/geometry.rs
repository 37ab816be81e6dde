//! Rigid-body transforms, point clouds and pose-error metrics.

use std::fmt;

use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// An element of SE(3): unit quaternion rotation followed by a translation in meters.
///
/// The quaternion is kept in the `w >= 0` hemisphere so equal rotations compare
/// and serialize identically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let q = q.into_inner();
    let q = if q.w < 0.0 { -q } else { q };
    UnitQuaternion::new_normalize(q)
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: canonical(rotation),
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::new(x, y, z))
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Rotation of `angle_deg` degrees about `axis` (need not be normalized).
    pub fn from_axis_angle_deg(axis: Vector3<f64>, angle_deg: f64) -> Self {
        let q = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle_deg.to_radians());
        Self::from_rotation(q)
    }

    pub fn from_rotation_matrix(r: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let rot = Rotation3::from_matrix_unchecked(*r);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    /// Parses `qw qx qy qz tx ty tz`.
    pub fn from_seven(v: &[f64]) -> Result<Self> {
        if v.len() != 7 || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "expected 7 finite numbers, got {v:?}"
            )));
        }
        let q = Quaternion::new(v[0], v[1], v[2], v[3]);
        if q.norm() < 1e-12 {
            return Err(Error::InvalidArgument("zero quaternion".into()));
        }
        Ok(Self::new(
            UnitQuaternion::new_normalize(q),
            Vector3::new(v[4], v[5], v[6]),
        ))
    }

    /// Builds a transform from a row-major homogeneous 4x4 matrix.
    ///
    /// The upper-left block must be a proper rotation within 1e-6.
    pub fn from_matrix_row_major(m: &[f64]) -> Result<Self> {
        if m.len() != 16 || m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "expected 16 finite numbers for a 4x4 matrix".into(),
            ));
        }
        let r = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        if ortho > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(
                "4x4 matrix rotation block is not a proper rotation".into(),
            ));
        }
        if m[12].abs() > 1e-9 || m[13].abs() > 1e-9 || m[14].abs() > 1e-9 || (m[15] - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidArgument(
                "4x4 matrix last row must be 0 0 0 1".into(),
            ));
        }
        Ok(Self::from_rotation_matrix(&r, Vector3::new(m[3], m[7], m[11])))
    }

    /// Parses either 7 numbers (quaternion + translation) or 16 numbers (row-major 4x4).
    pub fn parse(text: &str) -> Result<Self> {
        let values = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse("transform", format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match values.len() {
            7 => Self::from_seven(&values),
            16 => Self::from_matrix_row_major(&values),
            n => Err(Error::parse(
                "transform",
                format!("expected 7 or 16 numbers, got {n}"),
            )),
        }
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// `[qw, qx, qy, qz, tx, ty, tz]`
    pub fn to_seven(&self) -> [f64; 7] {
        let q = self.rotation.quaternion();
        let t = &self.translation;
        [q.w, q.i, q.j, q.k, t.x, t.y, t.z]
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform::new(inv, -(inv * self.translation))
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|p| self.apply(p)).collect(),
        }
    }

    /// Rotation angle in degrees, in `[0, 180]`.
    pub fn angle_deg(&self) -> f64 {
        quaternion_angle(&self.rotation).to_degrees()
    }
}

impl fmt::Display for RigidTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_seven();
        write!(
            f,
            "{} {} {} {} {} {} {}",
            v[0], v[1], v[2], v[3], v[4], v[5], v[6]
        )
    }
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

pub fn apply_transform(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    t.apply_cloud(cloud)
}

/// Angle of a unit quaternion's rotation in radians, using the numerically
/// stable `2·atan2(|v|, |w|)` form.
fn quaternion_angle(q: &UnitQuaternion<f64>) -> f64 {
    let q = q.quaternion();
    2.0 * q.vector().norm().atan2(q.w.abs())
}

/// An unordered set of finite 3D points in meters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub(crate) points: Vec<Point3>,
}

impl PointCloud {
    /// Fails if any coordinate is NaN or infinite.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        }))
    }

    /// Points within the closed box `[lo, hi]`, original order kept.
    pub fn crop_box(&self, lo: &Point3, hi: &Point3) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .filter(|p| {
                    p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z
                })
                .copied()
                .collect(),
        }
    }
}

impl FromIterator<Point3> for PointCloud {
    /// Collects without validation; callers must supply finite points.
    fn from_iter<I: IntoIterator<Item = Point3>>(iter: I) -> Self {
        let points: Vec<Point3> = iter.into_iter().collect();
        debug_assert!(points.iter().all(|p| p.coords.iter().all(|c| c.is_finite())));
        Self { points }
    }
}

/// Translational and rotational disagreement between two poses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseError {
    /// Euclidean distance between translations, meters.
    pub position_error: f64,
    /// Angle of the relative rotation, degrees in `[0, 180]`.
    pub geodesic_angle: f64,
    /// Angle between the two orientations' rotation axes, degrees in `[0, 180]`.
    /// Zero when either orientation is (numerically) the identity.
    pub axis_error: f64,
    /// Absolute difference of the two orientations' rotation angles, degrees.
    pub angle_error: f64,
}

impl PoseError {
    /// The 5 cm / 15° success rule.
    pub fn is_success(&self) -> bool {
        self.position_error <= SUCCESS_POSITION_M && self.geodesic_angle <= SUCCESS_ANGLE_DEG
    }
}

pub const SUCCESS_POSITION_M: f64 = 0.05;
pub const SUCCESS_ANGLE_DEG: f64 = 15.0;

pub fn pose_error(estimate: &RigidTransform, truth: &RigidTransform) -> PoseError {
    let position_error = (estimate.translation - truth.translation).norm();
    let relative = truth.rotation.inverse() * estimate.rotation;
    let geodesic_angle = quaternion_angle(&relative).to_degrees().clamp(0.0, 180.0);

    let (axis_e, angle_e) = axis_angle(&estimate.rotation);
    let (axis_t, angle_t) = axis_angle(&truth.rotation);
    let axis_error = match (axis_e, axis_t) {
        (Some(a), Some(b)) => a.dot(&b).clamp(-1.0, 1.0).acos().to_degrees(),
        _ => 0.0,
    };
    PoseError {
        position_error,
        geodesic_angle,
        axis_error,
        angle_error: (angle_e - angle_t).abs().to_degrees(),
    }
}

fn axis_angle(q: &UnitQuaternion<f64>) -> (Option<Vector3<f64>>, f64) {
    let angle = quaternion_angle(q);
    let v = q.quaternion().vector().into_owned();
    let n = v.norm();
    if angle < 1e-9 || n < 1e-12 {
        return (None, angle);
    }
    let sign = if q.quaternion().w < 0.0 { -1.0 } else { 1.0 };
    (Some(v * (sign / n)), angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let t = RigidTransform::from_axis_angle_deg(axis, rng.random_range(-180.0..180.0));
        RigidTransform::new(
            *t.rotation(),
            Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ),
        )
    }

    fn random_point(rng: &mut ChaCha8Rng) -> Point3 {
        Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    fn assert_close(a: &RigidTransform, b: &RigidTransform, tol: f64) {
        let (va, vb) = (a.to_seven(), b.to_seven());
        for i in 0..7 {
            assert!((va[i] - vb[i]).abs() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn identity_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_transform(&mut rng);
        assert_close(&compose(&RigidTransform::identity(), &t), &t, 1e-12);
        assert_close(&compose(&t, &invert(&t)), &RigidTransform::identity(), 1e-9);
    }

    #[test]
    fn compose_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_transform(&mut rng);
        let b = random_transform(&mut rng);
        let ab = compose(&a, &b);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let p = random_point(&mut rng);
            worst = worst.max((ab.apply(&p) - a.apply(&b.apply(&p))).norm());
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn invert_cases() {
        assert_close(&invert(&RigidTransform::identity()), &RigidTransform::identity(), 0.0);
        let t = invert(&RigidTransform::from_translation(1.0, 2.0, 3.0));
        assert_eq!(*t.translation(), Vector3::new(-1.0, -2.0, -3.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let t = random_transform(&mut rng);
            assert_close(&invert(&invert(&t)), &t, 1e-9);
        }
    }

    #[test]
    fn apply_cases() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)]).unwrap();
        let moved = apply_transform(&RigidTransform::from_translation(0.0, 0.0, 1.0), &cloud);
        assert_eq!(moved.points()[0], Point3::new(0.0, 0.0, 1.0));
        let rz = RigidTransform::from_axis_angle_deg(Vector3::z(), 90.0);
        let p = rz.apply(&Point3::new(1.0, 0.0, 0.0));
        assert!((p - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        let same = apply_transform(&RigidTransform::identity(), &cloud);
        assert_eq!(same, cloud);
    }

    #[test]
    fn quaternion_canonical_hemisphere() {
        let q = UnitQuaternion::new_normalize(Quaternion::new(-0.5, 0.5, 0.5, 0.5));
        let t = RigidTransform::from_rotation(q);
        assert!(t.to_seven()[0] >= 0.0);
        assert!((t.rotation().quaternion().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pose_error_cases() {
        let e = pose_error(&RigidTransform::identity(), &RigidTransform::identity());
        assert_eq!(e.position_error, 0.0);
        assert_eq!(e.geodesic_angle, 0.0);
        let rx = RigidTransform::from_axis_angle_deg(Vector3::x(), 10.0);
        let e = pose_error(&rx, &RigidTransform::identity());
        assert!((e.geodesic_angle - 10.0).abs() < 1e-9);
        assert_eq!(e.position_error, 0.0);
        assert!((e.angle_error - 10.0).abs() < 1e-9);
    }

    #[test]
    fn geodesic_matches_quaternion_acos() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let a = random_transform(&mut rng);
            let b = random_transform(&mut rng);
            let rel = a.rotation().inverse() * b.rotation();
            let oracle = 2.0 * rel.quaternion().w.abs().min(1.0).acos();
            let e = pose_error(&b, &a);
            assert!((e.geodesic_angle - oracle.to_degrees()).abs() < 1e-6);
            let back = pose_error(&a, &b);
            assert!((e.geodesic_angle - back.geodesic_angle).abs() < 1e-9);
            assert!(e.axis_error >= 0.0 && e.axis_error <= 180.0 + 1e-9);
        }
    }

    #[test]
    fn axis_error_between_distinct_axes() {
        let a = RigidTransform::from_axis_angle_deg(Vector3::x(), 30.0);
        let b = RigidTransform::from_axis_angle_deg(Vector3::y(), 30.0);
        let e = pose_error(&a, &b);
        assert!((e.axis_error - 90.0).abs() < 1e-9);
        assert!(e.angle_error.abs() < 1e-9);
    }

    #[test]
    fn parse_seven_and_matrix() {
        let t = RigidTransform::parse("1 0 0 0 0.1 0.2 0.3").unwrap();
        assert_eq!(*t.translation(), Vector3::new(0.1, 0.2, 0.3));
        let m = RigidTransform::parse("0 -1 0 1  1 0 0 2  0 0 1 3  0 0 0 1").unwrap();
        let p = m.apply(&Point3::new(1.0, 0.0, 0.0));
        assert!((p - Point3::new(1.0, 3.0, 3.0)).norm() < 1e-12);
        assert!(RigidTransform::parse("1 2 3").is_err());
        assert!(RigidTransform::parse("2 0 0 0 0 0 0  1 0 0 0  0 0 1 0  0 0 0 1").is_err());
    }

    #[test]
    fn cloud_rejects_nan() {
        assert!(PointCloud::new(vec![Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_transform() -> impl Strategy<Value = RigidTransform> {
            (
                prop::array::uniform3(-1.0f64..1.0),
                -180.0f64..180.0,
                prop::array::uniform3(-5.0f64..5.0),
            )
                .prop_filter("axis", |(a, _, _)| Vector3::from(*a).norm() > 1e-3)
                .prop_map(|(a, ang, t)| {
                    let r = RigidTransform::from_axis_angle_deg(Vector3::from(a), ang);
                    RigidTransform::new(*r.rotation(), Vector3::from(t))
                })
        }

        proptest! {
            #[test]
            fn associative(a in arb_transform(), b in arb_transform(), c in arb_transform()) {
                let l = a.compose(&b).compose(&c);
                let r = a.compose(&b.compose(&c));
                let (vl, vr) = (l.to_seven(), r.to_seven());
                for i in 0..7 { prop_assert!((vl[i] - vr[i]).abs() < 1e-9); }
            }

            #[test]
            fn rigidity(t in arb_transform(), pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 2..20)) {
                let cloud = PointCloud::new(pts.iter().map(|p| Point3::from(*p)).collect()).unwrap();
                let moved = t.apply_cloud(&cloud);
                prop_assert_eq!(moved.len(), cloud.len());
                for i in 0..cloud.len() {
                    for j in 0..cloud.len() {
                        let d0 = (cloud.points()[i] - cloud.points()[j]).norm();
                        let d1 = (moved.points()[i] - moved.points()[j]).norm();
                        prop_assert!((d0 - d1).abs() < 1e-9);
                    }
                }
            }

            #[test]
            fn self_error_zero(t in arb_transform()) {
                let e = pose_error(&t, &t);
                prop_assert!(e.position_error == 0.0);
                prop_assert!(e.geodesic_angle < 1e-6);
            }
        }
    }
}
