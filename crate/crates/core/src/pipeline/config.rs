use crate::alignment::{DEFAULT_EPSILON, DEFAULT_TAU};
use crate::config::{ConfigFile, Section};
use crate::error::{Error, Result};
use crate::model::crops::DEFAULT_VIEWS;
use crate::registration::IcpParams;

/// Tunables of the acquisition/tracking state machine.
///
/// Noise densities are per second; they are multiplied by the frame interval
/// during prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Alignment-score match radius, meters.
    pub tau: f64,
    /// Best hypothesis score needed to enter tracking.
    pub epsilon: f64,
    /// Tracking measurements scoring below this are rejected.
    pub theta: f64,
    pub n_crops: usize,
    pub acquisition_icp_iterations: usize,
    pub tracking_icp_iterations: usize,
    pub max_correspondence_distance: f64,
    pub translation_epsilon: f64,
    /// Degrees.
    pub rotation_epsilon: f64,
    /// Inflation of the model bounding box used to prune the scene, meters.
    pub bbox_margin: f64,
    /// Limit on the trace of the position covariance, m².
    pub max_position_variance: f64,
    /// Default frame interval when odometry omits it, seconds.
    pub frame_dt: f64,
    pub process_noise: ProcessNoise,
    pub measurement_noise: MeasurementNoise,
    pub initial_sigma: InitialSigma,
    pub workers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessNoise {
    /// m²/s
    pub position: f64,
    /// rad²/s
    pub orientation: f64,
    /// (m/s)²/s
    pub velocity: f64,
    /// (rad/s)²/s
    pub angular_velocity: f64,
}

/// Standard deviations of a perfect-score measurement; scaled by `1/score`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementNoise {
    /// m
    pub position: f64,
    /// rad
    pub orientation: f64,
}

/// Velocity uncertainty assigned when tracking starts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialSigma {
    /// m/s
    pub velocity: f64,
    /// rad/s
    pub angular_velocity: f64,
}

/// Scores are floored here before scaling the measurement noise.
pub const MIN_NOISE_SCORE: f64 = 0.05;

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            epsilon: DEFAULT_EPSILON,
            theta: 0.55,
            n_crops: DEFAULT_VIEWS,
            acquisition_icp_iterations: 10,
            tracking_icp_iterations: 50,
            max_correspondence_distance: 0.05,
            translation_epsilon: 1e-4,
            rotation_epsilon: 0.05,
            bbox_margin: 0.02,
            max_position_variance: 0.0025,
            frame_dt: 1.0 / 30.0,
            process_noise: ProcessNoise {
                position: 1e-4,
                orientation: 1e-2,
                velocity: 1e-3,
                angular_velocity: 1e-2,
            },
            measurement_noise: MeasurementNoise {
                position: 0.005,
                orientation: 2f64.to_radians(),
            },
            initial_sigma: InitialSigma {
                velocity: 0.05,
                angular_velocity: 0.1,
            },
            workers: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("bbox_margin", self.bbox_margin),
            ("max_position_variance", self.max_position_variance),
            ("frame_dt", self.frame_dt),
            ("max_correspondence_distance", self.max_correspondence_distance),
            ("translation_epsilon", self.translation_epsilon),
            ("rotation_epsilon", self.rotation_epsilon),
            ("measurement_position_sigma", self.measurement_noise.position),
            ("measurement_orientation_sigma", self.measurement_noise.orientation),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            self.process_noise.position,
            self.process_noise.orientation,
            self.process_noise.velocity,
            self.process_noise.angular_velocity,
            self.initial_sigma.velocity,
            self.initial_sigma.angular_velocity,
        ];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("noise parameters must be non-negative".into()));
        }
        if !(0.0 < self.theta && self.theta < self.epsilon && self.epsilon <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 < theta < epsilon <= 1, got theta={} epsilon={}",
                self.theta, self.epsilon
            )));
        }
        if self.n_crops == 0 || self.acquisition_icp_iterations == 0 || self.tracking_icp_iterations == 0 {
            return Err(Error::Config("crop and iteration counts must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn acquisition_icp(&self) -> IcpParams {
        self.icp(self.acquisition_icp_iterations)
    }

    pub fn tracking_icp(&self) -> IcpParams {
        self.icp(self.tracking_icp_iterations)
    }

    fn icp(&self, max_iterations: usize) -> IcpParams {
        IcpParams {
            max_iterations,
            max_correspondence_distance: self.max_correspondence_distance,
            translation_epsilon: self.translation_epsilon,
            rotation_epsilon: self.rotation_epsilon,
        }
    }

    /// Reads keys from the `[pipeline]` section (or the root section).
    /// Missing keys keep their defaults.
    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let s = cfg.section("pipeline").unwrap_or(cfg.root());
        Self::from_section(s)
    }

    pub fn from_section(s: &Section) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            tau: s.parse_or("tau", d.tau)?,
            epsilon: s.parse_or("epsilon", d.epsilon)?,
            theta: s.parse_or("theta", d.theta)?,
            n_crops: s.parse_or("n_crops", d.n_crops)?,
            acquisition_icp_iterations: s.parse_or("acquisition_icp_iterations", d.acquisition_icp_iterations)?,
            tracking_icp_iterations: s.parse_or("tracking_icp_iterations", d.tracking_icp_iterations)?,
            max_correspondence_distance: s.parse_or("max_correspondence_distance", d.max_correspondence_distance)?,
            translation_epsilon: s.parse_or("translation_epsilon", d.translation_epsilon)?,
            rotation_epsilon: s.parse_or("rotation_epsilon", d.rotation_epsilon)?,
            bbox_margin: s.parse_or("bbox_margin", d.bbox_margin)?,
            max_position_variance: s.parse_or("max_position_variance", d.max_position_variance)?,
            frame_dt: s.parse_or("frame_dt", d.frame_dt)?,
            process_noise: ProcessNoise {
                position: s.parse_or("process_position", d.process_noise.position)?,
                orientation: s.parse_or("process_orientation", d.process_noise.orientation)?,
                velocity: s.parse_or("process_velocity", d.process_noise.velocity)?,
                angular_velocity: s.parse_or("process_angular_velocity", d.process_noise.angular_velocity)?,
            },
            measurement_noise: MeasurementNoise {
                position: s.parse_or("measurement_position_sigma", d.measurement_noise.position)?,
                orientation: s
                    .parse_opt::<f64>("measurement_orientation_sigma_deg")?
                    .map(f64::to_radians)
                    .unwrap_or(d.measurement_noise.orientation),
            },
            initial_sigma: InitialSigma {
                velocity: s.parse_or("initial_velocity_sigma", d.initial_sigma.velocity)?,
                angular_velocity: s.parse_or("initial_angular_velocity_sigma", d.initial_sigma.angular_velocity)?,
            },
            workers: s.parse_or("workers", d.workers)?,
        };
        c.validate()?;
        Ok(c)
    }
}
