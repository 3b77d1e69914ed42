//! Timestamped pose sequences and their metadata.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::Pose;

pub const TRACK_FORMAT_VERSION: u32 = 1;
pub const KEYPOINT_SCHEMA: &str = "coco17";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("track has no frames")]
    Empty,
    #[error("frame {index}: timestamp {t} must be finite and non-negative")]
    BadTimestamp { index: usize, t: f64 },
    #[error("frame {index}: timestamp {t} does not follow {prev}")]
    NonMonotonic { index: usize, t: f64, prev: f64 },
    #[error("frame {index}: pose is {got_w}x{got_h}, track is {want_w}x{want_h}")]
    FrameSizeMismatch {
        index: usize,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("invalid metadata: {0}")]
    Meta(String),
}

/// Visual feedback condition.
///
/// * C1: trainer video + user video
/// * C2: trainer video + user video with skeleton
/// * C3: trainer video + user skeleton
/// * C4: trainer video with skeleton + user skeleton
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Self::C1, Self::C2, Self::C3, Self::C4];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::C3 => "C3",
            Self::C4 => "C4",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown condition `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackKind {
    Trainer,
    UserSession,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackMeta {
    pub format_version: u32,
    pub kind: TrackKind,
    pub frame_width: u32,
    pub frame_height: u32,
    pub nominal_fps: f64,
    pub source_uri: String,
    pub created_at: String,
    pub keypoint_schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

impl TrackMeta {
    pub fn new(kind: TrackKind, frame_width: u32, frame_height: u32, nominal_fps: f64) -> Self {
        Self {
            format_version: TRACK_FORMAT_VERSION,
            kind,
            frame_width,
            frame_height,
            nominal_fps,
            source_uri: String::new(),
            created_at: "1970-01-01T00:00:00Z".to_owned(),
            keypoint_schema: KEYPOINT_SCHEMA.to_owned(),
            condition: None,
        }
    }

    pub fn validate(&self) -> Result<(), TrackError> {
        if self.format_version != TRACK_FORMAT_VERSION {
            return Err(TrackError::Meta(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err(TrackError::Meta("frame dimensions must be positive".into()));
        }
        if !(self.nominal_fps.is_finite() && self.nominal_fps > 0.0) {
            return Err(TrackError::Meta("nominal_fps must be positive".into()));
        }
        if self.keypoint_schema != KEYPOINT_SCHEMA {
            return Err(TrackError::Meta(format!(
                "unsupported keypoint_schema `{}`",
                self.keypoint_schema
            )));
        }
        if self.kind == TrackKind::Trainer && self.condition.is_some() {
            return Err(TrackError::Meta("trainer tracks carry no condition".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackFrame {
    pub t: f64,
    pub pose: Pose,
}

/// A non-empty, strictly time-ordered sequence of poses.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    meta: TrackMeta,
    frames: Vec<TrackFrame>,
}

impl Track {
    pub fn new(meta: TrackMeta, frames: Vec<TrackFrame>) -> Result<Self, TrackError> {
        meta.validate()?;
        if frames.is_empty() {
            return Err(TrackError::Empty);
        }
        let mut prev: Option<f64> = None;
        for (index, frame) in frames.iter().enumerate() {
            let t = frame.t;
            if !(t.is_finite() && t >= 0.0) {
                return Err(TrackError::BadTimestamp { index, t });
            }
            if let Some(prev) = prev {
                if t <= prev {
                    return Err(TrackError::NonMonotonic { index, t, prev });
                }
            }
            let (w, h) = (frame.pose.frame_width(), frame.pose.frame_height());
            if (w, h) != (meta.frame_width, meta.frame_height) {
                return Err(TrackError::FrameSizeMismatch {
                    index,
                    got_w: w,
                    got_h: h,
                    want_w: meta.frame_width,
                    want_h: meta.frame_height,
                });
            }
            prev = Some(t);
        }
        Ok(Self { meta, frames })
    }

    pub fn meta(&self) -> &TrackMeta {
        &self.meta
    }

    pub fn frames(&self) -> &[TrackFrame] {
        &self.frames
    }

    /// Timestamp of the last frame.
    pub fn duration(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t)
    }

    pub fn into_parts(self) -> (TrackMeta, Vec<TrackFrame>) {
        (self.meta, self.frames)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Keypoint, KEYPOINT_COUNT};

    fn pose(w: u32, h: u32) -> Pose {
        Pose::new([Keypoint::new(0.5, 0.5, 1.0); KEYPOINT_COUNT], w, h).unwrap()
    }

    fn meta() -> TrackMeta {
        TrackMeta::new(TrackKind::Trainer, 640, 360, 30.0)
    }

    #[test]
    fn rejects_empty_and_unordered() {
        assert_eq!(Track::new(meta(), vec![]), Err(TrackError::Empty));
        let frames = vec![
            TrackFrame {
                t: 0.0,
                pose: pose(640, 360),
            },
            TrackFrame {
                t: 0.0,
                pose: pose(640, 360),
            },
        ];
        assert!(matches!(
            Track::new(meta(), frames),
            Err(TrackError::NonMonotonic { index: 1, .. })
        ));
        let frames = vec![TrackFrame {
            t: -1.0,
            pose: pose(640, 360),
        }];
        assert!(matches!(
            Track::new(meta(), frames),
            Err(TrackError::BadTimestamp { index: 0, .. })
        ));
    }

    #[test]
    fn rejects_bad_meta_and_mismatched_frames() {
        let mut m = meta();
        m.format_version = 2;
        assert!(Track::new(
            m,
            vec![TrackFrame {
                t: 0.0,
                pose: pose(640, 360)
            }]
        )
        .is_err());
        let frames = vec![TrackFrame {
            t: 0.0,
            pose: pose(320, 180),
        }];
        assert!(matches!(
            Track::new(meta(), frames),
            Err(TrackError::FrameSizeMismatch { .. })
        ));
    }

    #[test]
    fn duration_is_last_timestamp() {
        let frames = vec![
            TrackFrame {
                t: 0.5,
                pose: pose(640, 360),
            },
            TrackFrame {
                t: 2.0,
                pose: pose(640, 360),
            },
        ];
        assert_eq!(Track::new(meta(), frames).unwrap().duration(), 2.0);
    }

    #[test]
    fn condition_labels() {
        for c in Condition::ALL {
            assert_eq!(c.as_str().parse::<Condition>().unwrap(), c);
        }
        assert!("C5".parse::<Condition>().is_err());
    }
}
