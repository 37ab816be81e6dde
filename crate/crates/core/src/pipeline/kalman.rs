//! Error-state Kalman filter over an object's camera-frame pose and velocities.
//!
//! Error state (12): position (3), orientation as a left tangent perturbation
//! `R = Exp(δθ)·R̂` (3), linear velocity (3), angular velocity (3). The
//! process model is constant velocity; camera odometry re-expresses the state
//! in the new camera frame.

use nalgebra::{Matrix3, SMatrix, SVector, UnitQuaternion, Vector3};

use super::config::{PipelineConfig, MIN_NOISE_SCORE};
use crate::alignment::AlignmentScore;
use crate::geometry::RigidTransform;

pub type Cov12 = SMatrix<f64, 12, 12>;
type Mat6x12 = SMatrix<f64, 6, 12>;
type Mat6 = SMatrix<f64, 6, 6>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Acquisition,
    Tracking,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Acquisition => "acquisition",
            Mode::Tracking => "tracking",
        }
    }
}

/// Relative camera motion between consecutive frames: the pose of the new
/// camera frame expressed in the previous one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraOdometry {
    pub motion: RigidTransform,
    pub dt: f64,
}

impl CameraOdometry {
    pub fn stationary(dt: f64) -> Self {
        Self { motion: RigidTransform::identity(), dt }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackState {
    /// Object pose in the current camera frame.
    pub pose: RigidTransform,
    /// m/s, camera frame.
    pub linear_velocity: Vector3<f64>,
    /// rad/s, camera frame.
    pub angular_velocity: Vector3<f64>,
    pub covariance: Cov12,
    pub mode: Mode,
    pub active_crop: Option<usize>,
    pub last_score: f64,
}

impl TrackState {
    /// A fresh track at `pose` whose pose uncertainty equals the measurement
    /// noise implied by `score`.
    pub fn start(pose: RigidTransform, crop_id: usize, score: f64, cfg: &PipelineConfig) -> Self {
        let mut cov = Cov12::zeros();
        cov.fixed_view_mut::<6, 6>(0, 0).copy_from(&measurement_covariance(score, cfg));
        let sv = cfg.initial_sigma.velocity.powi(2);
        let sw = cfg.initial_sigma.angular_velocity.powi(2);
        for i in 0..3 {
            cov[(6 + i, 6 + i)] = sv;
            cov[(9 + i, 9 + i)] = sw;
        }
        Self {
            pose,
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            covariance: cov,
            mode: Mode::Tracking,
            active_crop: Some(crop_id),
            last_score: score,
        }
    }

    /// Trace of the 3×3 position block, m².
    pub fn position_variance(&self) -> f64 {
        self.covariance.fixed_view::<3, 3>(0, 0).trace()
    }
}

/// `R₀ / max(score, floor)²` over the pose block.
pub fn measurement_covariance(score: f64, cfg: &PipelineConfig) -> Mat6 {
    let scale = 1.0 / score.max(MIN_NOISE_SCORE).powi(2);
    let sp = cfg.measurement_noise.position.powi(2) * scale;
    let so = cfg.measurement_noise.orientation.powi(2) * scale;
    Mat6::from_diagonal(&SVector::<f64, 6>::new(sp, sp, sp, so, so, so))
}

fn exp_so3(v: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*v)
}

fn block_diag_rot(r: &Matrix3<f64>) -> Cov12 {
    let mut g = Cov12::zeros();
    for b in 0..4 {
        g.fixed_view_mut::<3, 3>(3 * b, 3 * b).copy_from(r);
    }
    g
}

fn symmetrize(p: &Cov12) -> Cov12 {
    (p + p.transpose()) * 0.5
}

/// Constant-velocity prediction followed by the change to the new camera frame.
pub fn kalman_predict(state: &TrackState, odom: &CameraOdometry, cfg: &PipelineConfig) -> TrackState {
    let dt = odom.dt;
    let step_rot = exp_so3(&(state.angular_velocity * dt));
    let moved = RigidTransform::new(
        step_rot * state.pose.rotation(),
        state.pose.translation() + state.linear_velocity * dt,
    );
    let to_new = odom.motion.inverse();
    let r_new = to_new.rotation_matrix();

    let mut f = Cov12::identity();
    for i in 0..3 {
        f[(i, 6 + i)] = dt;
        f[(3 + i, 9 + i)] = dt;
    }
    f.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&step_rot.to_rotation_matrix().into_inner());
    let f = block_diag_rot(&r_new) * f;

    let pn = &cfg.process_noise;
    let mut q = Cov12::zeros();
    for i in 0..3 {
        q[(i, i)] = pn.position * dt;
        q[(3 + i, 3 + i)] = pn.orientation * dt;
        q[(6 + i, 6 + i)] = pn.velocity * dt;
        q[(9 + i, 9 + i)] = pn.angular_velocity * dt;
    }
    TrackState {
        pose: to_new.compose(&moved),
        linear_velocity: r_new * state.linear_velocity,
        angular_velocity: r_new * state.angular_velocity,
        covariance: symmetrize(&(f * state.covariance * f.transpose() + q)),
        ..state.clone()
    }
}

/// Fuses a registered pose. The caller is responsible for gating on `theta`.
pub fn kalman_update(
    state: &TrackState,
    measured: &RigidTransform,
    score: &AlignmentScore,
    cfg: &PipelineConfig,
) -> TrackState {
    let mut h = Mat6x12::zeros();
    h.fixed_view_mut::<6, 6>(0, 0).copy_from(&Mat6::identity());
    let r = measurement_covariance(score.value, cfg);

    let dp = measured.translation() - state.pose.translation();
    let dtheta = (measured.rotation() * state.pose.rotation().inverse()).scaled_axis();
    let y = SVector::<f64, 6>::new(dp.x, dp.y, dp.z, dtheta.x, dtheta.y, dtheta.z);

    let p = &state.covariance;
    let s = h * p * h.transpose() + r;
    let s_inv = s
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| s.try_inverse().unwrap_or_else(Mat6::zeros));
    let k = p * h.transpose() * s_inv;
    let dx = k * y;

    let ikh = Cov12::identity() - k * h;
    let cov = symmetrize(&(ikh * p * ikh.transpose() + k * r * k.transpose()));

    let d_pos = Vector3::new(dx[0], dx[1], dx[2]);
    let d_rot = Vector3::new(dx[3], dx[4], dx[5]);
    TrackState {
        pose: RigidTransform::new(
            exp_so3(&d_rot) * state.pose.rotation(),
            state.pose.translation() + d_pos,
        ),
        linear_velocity: state.linear_velocity + Vector3::new(dx[6], dx[7], dx[8]),
        angular_velocity: state.angular_velocity + Vector3::new(dx[9], dx[10], dx[11]),
        covariance: cov,
        last_score: score.value,
        ..state.clone()
    }
}

/// Trace of the position covariance after `steps` predictions with interval
/// `dt` and no updates, in closed form.
///
/// The traces of the position, position/velocity and velocity blocks are
/// invariant under the frame rotations applied by odometry, so only their
/// initial values and the process noise enter.
pub fn predicted_position_variance(covariance: &Cov12, cfg: &PipelineConfig, dt: f64, steps: usize) -> f64 {
    let a0 = covariance.fixed_view::<3, 3>(0, 0).trace();
    let b0 = covariance.fixed_view::<3, 3>(0, 6).trace();
    let c0 = covariance.fixed_view::<3, 3>(6, 6).trace();
    let qp = 3.0 * cfg.process_noise.position * dt;
    let qv = 3.0 * cfg.process_noise.velocity * dt;
    let k = steps as f64;
    // c_j = c0 + j·qv ; b_j = b0 + dt·Σ_{i<j} c_i ; a_k = a0 + Σ_{j<k} (2dt·b_j + dt²·c_j + qp)
    let sum_c = k * c0 + qv * k * (k - 1.0) / 2.0;
    let sum_b = k * b0 + dt * (c0 * k * (k - 1.0) / 2.0 + qv * k * (k - 1.0) * (k - 2.0) / 6.0);
    a0 + 2.0 * dt * sum_b + dt * dt * sum_c + k * qp
}

/// First number of prediction-only steps after which the position variance
/// exceeds `cfg.max_position_variance`.
pub fn steps_until_variance_limit(covariance: &Cov12, cfg: &PipelineConfig, dt: f64) -> Option<usize> {
    (0..1_000_000).find(|&k| predicted_position_variance(covariance, cfg, dt, k) > cfg.max_position_variance)
}
