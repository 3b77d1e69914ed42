//! Movement-guidance scoring: compare a user's 2D pose stream with a
//! pre-extracted trainer track and analyse within-subject study results.
//!
//! * [`pose`]: keypoints, the ten-segment table and the angular error metric
//! * [`session`]: playback clock, alignment, smoothing, per-trial scoring
//! * [`persistence`]: `.poses.jsonl` tracks and the score report CSV
//! * [`protocol`]: newline-delimited JSON live scoring service
//! * [`analysis`]: Latin squares, repeated-measures ANOVA, Tukey HSD, TLX,
//!   rank sums

pub mod analysis;
pub mod persistence;
pub mod pose;
pub mod protocol;
pub mod session;
pub mod track;

pub use pose::{
    angle_diff, frame_error, mirror_pose, segment_angle, FrameScore, Keypoint, KeypointName,
    MetricConfig, PerSegment, Pose, PoseError, Segment,
};
pub use session::{
    align, best_offset, score_tracks, smooth, FrameOutcome, Session, SessionConfig, SessionError,
    TrialSummary,
};
pub use track::{Condition, Track, TrackError, TrackFrame, TrackKind, TrackMeta};
