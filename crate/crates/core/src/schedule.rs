//! Camera schedules around the object.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CameraPose;

/// Azimuths of the default equatorial schedule, in visiting order.
pub const DEFAULT_AZIMUTHS: [f64; 8] = [0.0, 45.0, -45.0, 90.0, -90.0, 135.0, -135.0, 180.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule is empty")]
    Empty,
    #[error("schedule must start at polar 90°, azimuth 0°; got ({0}°, {1}°)")]
    BadInitialPose(f64, f64),
    #[error("pose {0} duplicates pose {1}")]
    DuplicatePose(usize, usize),
    #[error("prefix index {index} out of range for a schedule of {len} poses")]
    PrefixOutOfRange { index: usize, len: usize },
    #[error("schedule json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CameraPose>", into = "Vec<CameraPose>")]
pub struct CameraSchedule {
    poses: Vec<CameraPose>,
}

impl TryFrom<Vec<CameraPose>> for CameraSchedule {
    type Error = ScheduleError;

    fn try_from(poses: Vec<CameraPose>) -> Result<Self, Self::Error> {
        CameraSchedule::new(poses)
    }
}

impl From<CameraSchedule> for Vec<CameraPose> {
    fn from(s: CameraSchedule) -> Self {
        s.poses
    }
}

impl CameraSchedule {
    pub fn new(poses: Vec<CameraPose>) -> Result<Self, ScheduleError> {
        let first = poses.first().ok_or(ScheduleError::Empty)?;
        if first.polar_deg != 90.0 || first.azimuth_deg != 0.0 {
            return Err(ScheduleError::BadInitialPose(
                first.polar_deg,
                first.azimuth_deg,
            ));
        }
        for i in 1..poses.len() {
            if let Some(j) = poses[..i].iter().position(|p| *p == poses[i]) {
                return Err(ScheduleError::DuplicatePose(i, j));
            }
        }
        Ok(Self { poses })
    }

    /// Equatorial schedule widening by 45° on alternating sides.
    pub fn default_schedule() -> Self {
        let poses = DEFAULT_AZIMUTHS
            .iter()
            .map(|&a| CameraPose::new(90.0, a).expect("default poses are valid"))
            .collect();
        Self { poses }
    }

    /// Equatorial schedule from a list of azimuths (the first must be 0°).
    pub fn from_azimuths(azimuths: &[f64]) -> Result<Self, ScheduleError> {
        let poses = azimuths
            .iter()
            .map(|&a| CameraPose::new(90.0, a).map_err(|e| ScheduleError::Json(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(poses)
    }

    pub fn from_json(text: &str) -> Result<Self, ScheduleError> {
        serde_json::from_str(text).map_err(|e| ScheduleError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.poses).expect("poses serialize")
    }

    pub fn poses(&self) -> &[CameraPose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Index of the last pose.
    pub fn last_index(&self) -> usize {
        self.poses.len() - 1
    }

    /// Poses `0..=index`.
    pub fn prefix(&self, index: usize) -> Result<CameraSchedule, ScheduleError> {
        if index >= self.poses.len() {
            return Err(ScheduleError::PrefixOutOfRange {
                index,
                len: self.poses.len(),
            });
        }
        Ok(Self {
            poses: self.poses[..=index].to_vec(),
        })
    }
}

pub fn default_schedule() -> CameraSchedule {
    CameraSchedule::default_schedule()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalThresholds {
    /// Below this the outpainting region barely extends past the seen boundary.
    pub min_deg: f64,
    /// Above this the outpainting region dwarfs the seen object.
    pub max_deg: f64,
}

impl Default for IntervalThresholds {
    fn default() -> Self {
        Self {
            min_deg: 20.0,
            max_deg: 90.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalIssue {
    TooGranular,
    TooCoarse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalWarning {
    /// Index of the pose being moved to.
    pub index: usize,
    /// Index of the nearest previously visited pose.
    pub nearest: usize,
    pub angle_deg: f64,
    pub issue: IntervalIssue,
}

impl std::fmt::Display for IntervalWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let what = match self.issue {
            IntervalIssue::TooGranular => "too granular",
            IntervalIssue::TooCoarse => "too coarse",
        };
        write!(
            f,
            "pose {}: {:.1}° from nearest visited pose {} ({what})",
            self.index, self.angle_deg, self.nearest
        )
    }
}

/// Warns when a pose is very close to, or very far from, everything visited so far.
///
/// Each pose `i ≥ 1` is compared against its nearest neighbour among poses `0..i`
/// (the views its outpainting mask is warped from), by great-circle angle.
pub fn check_intervals(
    schedule: &CameraSchedule,
    thresholds: &IntervalThresholds,
) -> Vec<IntervalWarning> {
    let poses = schedule.poses();
    let mut out = Vec::new();
    for i in 1..poses.len() {
        let (nearest, angle) = poses[..i]
            .iter()
            .enumerate()
            .map(|(j, p)| (j, poses[i].angular_distance_deg(p)))
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            );
        let issue = if angle < thresholds.min_deg {
            Some(IntervalIssue::TooGranular)
        } else if angle > thresholds.max_deg {
            Some(IntervalIssue::TooCoarse)
        } else {
            None
        };
        if let Some(issue) = issue {
            out.push(IntervalWarning {
                index: i,
                nearest,
                angle_deg: angle,
                issue,
            });
        }
    }
    out
}
