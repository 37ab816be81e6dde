//! Line-delimited per-object frame reports.
//!
//! ```text
//! frame=12 class=2 mode=tracking status=tracked crop=7 pose=qw,qx,qy,qz,tx,ty,tz score=0.912000 pos_var=1.250000e-5 ms_segment=1.203 ms_acquire=0.000 ms_track=8.411
//! ```
//!
//! The `ms_*` fields are the only ones that vary between identical runs.

use std::fmt;
use std::str::FromStr;

use super::kalman::Mode;
use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    /// Acquisition cleared `epsilon`; tracking starts.
    Acquired,
    /// Acquisition ran but the best hypothesis scored below `epsilon`.
    BelowThreshold,
    /// Tracking measurement fused.
    Tracked,
    /// Tracking measurement scored below `theta`.
    Rejected,
    /// Tracked class absent from the mask; prediction only.
    Occluded,
    /// Tracking gave up; the object is back in acquisition.
    Lost,
    Error(String),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Acquired => f.write_str("acquired"),
            Status::BelowThreshold => f.write_str("below_threshold"),
            Status::Tracked => f.write_str("tracked"),
            Status::Rejected => f.write_str("rejected"),
            Status::Occluded => f.write_str("occluded"),
            Status::Lost => f.write_str("lost"),
            Status::Error(m) => {
                let m: String = m.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
                write!(f, "error:{m}")
            }
        }
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "acquired" => Status::Acquired,
            "below_threshold" => Status::BelowThreshold,
            "tracked" => Status::Tracked,
            "rejected" => Status::Rejected,
            "occluded" => Status::Occluded,
            "lost" => Status::Lost,
            _ => match s.strip_prefix("error:") {
                Some(m) => Status::Error(m.to_string()),
                None => return Err(Error::parse("status", format!("unknown status {s:?}"))),
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectReport {
    pub class_id: u8,
    /// Mode after this frame.
    pub mode: Mode,
    pub status: Status,
    pub crop_id: Option<usize>,
    pub pose: Option<RigidTransform>,
    pub score: f64,
    pub position_variance: Option<f64>,
    pub ms_segment: f64,
    pub ms_acquire: f64,
    pub ms_track: f64,
}

impl ObjectReport {
    pub fn new(class_id: u8) -> Self {
        Self {
            class_id,
            mode: Mode::Acquisition,
            status: Status::BelowThreshold,
            crop_id: None,
            pose: None,
            score: 0.0,
            position_variance: None,
            ms_segment: 0.0,
            ms_acquire: 0.0,
            ms_track: 0.0,
        }
    }

    pub fn to_line(&self, frame: usize) -> String {
        let crop = self.crop_id.map_or("none".to_string(), |c| c.to_string());
        let pose = self.pose.map_or("none".to_string(), |p| {
            p.to_seven().iter().map(|v| format!("{v:.9}")).collect::<Vec<_>>().join(",")
        });
        let var = self.position_variance.map_or("none".to_string(), |v| format!("{v:.6e}"));
        format!(
            "frame={frame} class={} mode={} status={} crop={crop} pose={pose} score={:.6} pos_var={var} ms_segment={:.3} ms_acquire={:.3} ms_track={:.3}",
            self.class_id,
            self.mode.as_str(),
            self.status,
            self.score,
            self.ms_segment,
            self.ms_acquire,
            self.ms_track
        )
    }

    /// Parses one report line; returns the frame index and the report.
    pub fn parse_line(line: &str) -> Result<(usize, Self)> {
        let bad = |m: String| Error::parse("report line", m);
        let mut frame = None;
        let mut r = ObjectReport::new(0);
        let mut class = None;
        for tok in line.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| bad(format!("token {tok:?}")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("{k}={v}")));
            match k {
                "frame" => frame = Some(v.parse().map_err(|_| bad(format!("frame={v}")))?),
                "class" => class = Some(v.parse::<u8>().map_err(|_| bad(format!("class={v}")))?),
                "mode" => {
                    r.mode = match v {
                        "acquisition" => Mode::Acquisition,
                        "tracking" => Mode::Tracking,
                        _ => return Err(bad(format!("mode={v}"))),
                    }
                }
                "status" => r.status = v.parse()?,
                "crop" if v != "none" => r.crop_id = Some(v.parse().map_err(|_| bad(format!("crop={v}")))?),
                "pose" if v != "none" => {
                    let vals = v.split(',').map(num).collect::<Result<Vec<_>>>()?;
                    r.pose = Some(RigidTransform::from_seven(&vals)?);
                }
                "score" => r.score = num(v)?,
                "pos_var" if v != "none" => r.position_variance = Some(num(v)?),
                "ms_segment" => r.ms_segment = num(v)?,
                "ms_acquire" => r.ms_acquire = num(v)?,
                "ms_track" => r.ms_track = num(v)?,
                _ => {}
            }
        }
        r.class_id = class.ok_or_else(|| bad("missing class".into()))?;
        Ok((frame.ok_or_else(|| bad("missing frame".into()))?, r))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameReport {
    pub frame: usize,
    /// Ascending class id.
    pub objects: Vec<ObjectReport>,
}

impl FrameReport {
    pub fn lines(&self) -> impl Iterator<Item = String> + '_ {
        self.objects.iter().map(|o| o.to_line(self.frame))
    }

    pub fn object(&self, class_id: u8) -> Option<&ObjectReport> {
        self.objects.iter().find(|o| o.class_id == class_id)
    }
}

/// Drops the timing fields so runs can be compared byte for byte.
pub fn strip_timing(line: &str) -> String {
    line.split_whitespace()
        .filter(|t| !t.starts_with("ms_"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let mut r = ObjectReport::new(3);
        r.mode = Mode::Tracking;
        r.status = Status::Tracked;
        r.crop_id = Some(7);
        r.pose = Some(RigidTransform::from_translation(0.1, -0.2, 1.0));
        r.score = 0.875;
        r.position_variance = Some(1.5e-5);
        r.ms_track = 4.25;
        let line = r.to_line(12);
        let (f, back) = ObjectReport::parse_line(&line).unwrap();
        assert_eq!(f, 12);
        assert_eq!(back, r);
        assert_eq!(back.to_line(12), line);
        assert!(!strip_timing(&line).contains("ms_"));
    }

    #[test]
    fn error_status_has_no_spaces() {
        let mut r = ObjectReport::new(1);
        r.status = Status::Error("empty segment for class 1".into());
        let line = r.to_line(0);
        assert!(line.contains("status=error:empty_segment_for_class_1"));
        assert!(ObjectReport::parse_line(&line).is_ok());
    }
}
