//! Aligning a live or recorded user stream with the trainer track and scoring
//! it frame by frame.
//!
//! A [`Session`] is single-writer: one caller feeds playback events and frames
//! in order. The trainer track is never modified.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{frame_error, FrameScore, MetricConfig, PerSegment, Pose, SEGMENT_COUNT};
use crate::track::{Condition, Track, TrackFrame};

pub const DEFAULT_ALIGN_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("clock went backwards: wall clock {wall_clock} is before reference {reference}")]
    ClockWentBackwards { wall_clock: f64, reference: f64 },
    #[error("capture time {t} precedes previous frame at {prev}")]
    CaptureTimeBackwards { t: f64, prev: f64 },
    #[error("empty trial: no scored frames")]
    EmptyTrial,
    #[error("no overlap: no offset in the search range yields a scored frame")]
    NoOverlap,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid offset search: {0}")]
    InvalidSearch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub condition: Condition,
    pub metric: MetricConfig,
    pub align_tolerance: f64,
    pub smoothing_alpha: f64,
    pub show_error_live: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            condition: Condition::C1,
            metric: MetricConfig::default(),
            align_tolerance: DEFAULT_ALIGN_TOLERANCE,
            smoothing_alpha: 1.0,
            show_error_live: false,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        self.metric
            .validate()
            .map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        if !(self.align_tolerance.is_finite() && self.align_tolerance > 0.0) {
            return Err(SessionError::InvalidConfig(format!(
                "align_tolerance {} must be positive",
                self.align_tolerance
            )));
        }
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha <= 1.0) {
            return Err(SessionError::InvalidConfig(format!(
                "smoothing_alpha {} outside (0, 1]",
                self.smoothing_alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaybackState {
    Playing,
    Paused,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Playback {
    pub state: PlaybackState,
    /// Trainer position at the reference wall clock.
    pub position: f64,
    pub reference_clock: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredFrame {
    pub user_t: f64,
    pub trainer_t: f64,
    pub score: FrameScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnscoredReason {
    NoTrainerFrame,
    NoValidSegments,
}

impl UnscoredReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoTrainerFrame => "no_trainer_frame",
            Self::NoValidSegments => "no_valid_segments",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameOutcome {
    Scored(ScoredFrame),
    Unscored { user_t: f64, reason: UnscoredReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub mean_error: f64,
    pub frame_count: usize,
    pub unscored_count: usize,
    /// Mean per segment over the frames where it was valid.
    pub per_segment_means: PerSegment<Option<f64>>,
    pub duration: f64,
}

impl TrialSummary {
    /// Equal-weight mean over scored frames.
    pub fn from_scores(
        scores: &[ScoredFrame],
        unscored_count: usize,
        duration: f64,
    ) -> Result<Self, SessionError> {
        let means: Vec<f64> = scores.iter().filter_map(|s| s.score.mean_error).collect();
        if means.is_empty() {
            return Err(SessionError::EmptyTrial);
        }
        let mut sums = [0.0; SEGMENT_COUNT];
        let mut counts = [0usize; SEGMENT_COUNT];
        for s in scores {
            for (i, e) in s.score.per_segment.0.iter().enumerate() {
                if let Some(e) = e {
                    sums[i] += e;
                    counts[i] += 1;
                }
            }
        }
        let mut per_segment = [None; SEGMENT_COUNT];
        for i in 0..SEGMENT_COUNT {
            if counts[i] > 0 {
                per_segment[i] = Some(sums[i] / counts[i] as f64);
            }
        }
        Ok(Self {
            mean_error: means.iter().sum::<f64>() / means.len() as f64,
            frame_count: scores.len(),
            unscored_count,
            per_segment_means: PerSegment(per_segment),
            duration,
        })
    }
}

/// Nearest trainer frame to `position` within `tolerance`; ties go to the
/// earlier frame.
pub fn align(trainer: &Track, position: f64, tolerance: f64) -> Option<&TrackFrame> {
    let frames = trainer.frames();
    let idx = frames.partition_point(|f| f.t < position);
    let before = idx.checked_sub(1).map(|i| &frames[i]);
    let after = frames.get(idx);
    let nearest = match (before, after) {
        (Some(b), Some(a)) => {
            if (position - b.t) <= (a.t - position) {
                b
            } else {
                a
            }
        }
        (Some(b), None) => b,
        (None, Some(a)) => a,
        (None, None) => return None,
    };
    ((nearest.t - position).abs() <= tolerance).then_some(nearest)
}

/// Exponential moving average of keypoint coordinates. Scores come from
/// `next`.
pub fn smooth(prev: Option<&Pose>, next: &Pose, alpha: f64) -> Pose {
    let Some(prev) = prev else {
        return next.clone();
    };
    if alpha == 1.0 {
        return next.clone();
    }
    let old = prev.keypoints();
    next.map_keypoints(|name, kp| {
        let p = old[name.index()];
        crate::pose::Keypoint {
            x: alpha * kp.x + (1.0 - alpha) * p.x,
            y: alpha * kp.y + (1.0 - alpha) * p.y,
            score: kp.score,
        }
    })
    .expect("convex combination of finite coordinates stays valid")
}

#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    trainer: Track,
    playback: Playback,
    smoothed_user: Option<Pose>,
    scores: Vec<ScoredFrame>,
    unscored_count: usize,
    recording: Vec<TrackFrame>,
}

impl Session {
    /// New session, paused at position 0.
    pub fn new(config: SessionConfig, trainer: Track) -> Result<Self, SessionError> {
        config.validate()?;
        Ok(Self {
            config,
            trainer,
            playback: Playback {
                state: PlaybackState::Paused,
                position: 0.0,
                reference_clock: 0.0,
            },
            smoothed_user: None,
            scores: Vec::new(),
            unscored_count: 0,
            recording: Vec::new(),
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: SessionConfig) -> Result<(), SessionError> {
        config.validate()?;
        self.config = config;
        Ok(())
    }

    pub fn trainer(&self) -> &Track {
        &self.trainer
    }

    pub fn playback(&self) -> Playback {
        self.playback
    }

    pub fn scores(&self) -> &[ScoredFrame] {
        &self.scores
    }

    pub fn unscored_count(&self) -> usize {
        self.unscored_count
    }

    /// Raw user frames processed in the current trial, unsmoothed.
    pub fn recording(&self) -> &[TrackFrame] {
        &self.recording
    }

    fn clamp_position(&self, position: f64) -> f64 {
        position.clamp(0.0, self.trainer.duration())
    }

    pub fn play(&mut self, position: f64, wall_clock: f64) {
        self.playback = Playback {
            state: PlaybackState::Playing,
            position: self.clamp_position(position),
            reference_clock: wall_clock,
        };
    }

    pub fn pause(&mut self, position: f64, wall_clock: f64) {
        self.playback = Playback {
            state: PlaybackState::Paused,
            position: self.clamp_position(position),
            reference_clock: wall_clock,
        };
    }

    /// Moves the playback anchor without changing play/pause state.
    pub fn seek(&mut self, position: f64, wall_clock: f64) {
        self.playback.position = self.clamp_position(position);
        self.playback.reference_clock = wall_clock;
    }

    fn unclamped_position(&self, wall_clock: f64) -> Result<f64, SessionError> {
        let pb = self.playback;
        match pb.state {
            PlaybackState::Paused => Ok(pb.position),
            PlaybackState::Playing => {
                if wall_clock < pb.reference_clock {
                    return Err(SessionError::ClockWentBackwards {
                        wall_clock,
                        reference: pb.reference_clock,
                    });
                }
                Ok(pb.position + (wall_clock - pb.reference_clock))
            }
        }
    }

    /// Trainer playback position at `wall_clock`, clamped to the track.
    pub fn playback_position(&self, wall_clock: f64) -> Result<f64, SessionError> {
        Ok(self.clamp_position(self.unclamped_position(wall_clock)?))
    }

    /// Records, smooths and scores one user frame against the trainer frame
    /// at the current playback position.
    ///
    /// Alignment uses the unclamped position, so frames arriving after the
    /// trainer track has ended (beyond the tolerance) go unscored.
    pub fn process_frame(
        &mut self,
        user_frame: TrackFrame,
        wall_clock: f64,
    ) -> Result<FrameOutcome, SessionError> {
        let position = self.unclamped_position(wall_clock)?;
        if let Some(prev) = self.recording.last() {
            if user_frame.t < prev.t {
                return Err(SessionError::CaptureTimeBackwards {
                    t: user_frame.t,
                    prev: prev.t,
                });
            }
        }

        let user_t = user_frame.t;
        let smoothed = smooth(
            self.smoothed_user.as_ref(),
            &user_frame.pose,
            self.config.smoothing_alpha,
        );
        self.recording.push(user_frame);

        let outcome = match align(&self.trainer, position, self.config.align_tolerance) {
            None => FrameOutcome::Unscored {
                user_t,
                reason: UnscoredReason::NoTrainerFrame,
            },
            Some(trainer_frame) => {
                let score = frame_error(&trainer_frame.pose, &smoothed, &self.config.metric);
                if score.valid_count == 0 {
                    FrameOutcome::Unscored {
                        user_t,
                        reason: UnscoredReason::NoValidSegments,
                    }
                } else {
                    FrameOutcome::Scored(ScoredFrame {
                        user_t,
                        trainer_t: trainer_frame.t,
                        score,
                    })
                }
            }
        };
        self.smoothed_user = Some(smoothed);

        match outcome {
            FrameOutcome::Scored(s) => self.scores.push(s),
            FrameOutcome::Unscored { .. } => self.unscored_count += 1,
        }
        Ok(outcome)
    }

    pub fn trial_summary(&self) -> Result<TrialSummary, SessionError> {
        let duration = match (self.recording.first(), self.recording.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        };
        TrialSummary::from_scores(&self.scores, self.unscored_count, duration)
    }

    /// Clears per-trial state; keeps trainer, config and playback.
    pub fn reset_trial(&mut self) {
        self.smoothed_user = None;
        self.scores.clear();
        self.unscored_count = 0;
        self.recording.clear();
    }
}

/// Scores a recorded user track against the trainer, comparing each user frame
/// at `t` with the trainer frame nearest `t - offset`.
pub fn score_tracks(
    trainer: &Track,
    user: &Track,
    offset: f64,
    cfg: &MetricConfig,
    tolerance: f64,
) -> Result<TrialSummary, SessionError> {
    let mut scores = Vec::new();
    let mut unscored = 0;
    for frame in user.frames() {
        let scored = align(trainer, frame.t - offset, tolerance).and_then(|tf| {
            let score = frame_error(&tf.pose, &frame.pose, cfg);
            (score.valid_count > 0).then_some(ScoredFrame {
                user_t: frame.t,
                trainer_t: tf.t,
                score,
            })
        });
        match scored {
            Some(s) => scores.push(s),
            None => unscored += 1,
        }
    }
    let frames = user.frames();
    let duration = frames[frames.len() - 1].t - frames[0].t;
    TrialSummary::from_scores(&scores, unscored, duration)
}

/// Exhaustive grid search for the user lag that minimizes mean error. Ties
/// resolve to the smallest offset.
pub fn best_offset(
    trainer: &Track,
    user: &Track,
    search_min: f64,
    search_max: f64,
    step: f64,
    cfg: &MetricConfig,
) -> Result<(f64, f64), SessionError> {
    if !(search_min.is_finite() && search_max.is_finite() && search_min <= search_max) {
        return Err(SessionError::InvalidSearch(format!(
            "range [{search_min}, {search_max}] is empty"
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(SessionError::InvalidSearch(format!(
            "step {step} must be positive"
        )));
    }
    let steps = ((search_max - search_min) / step + 1e-9).floor() as usize;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=steps {
        let offset = search_min + i as f64 * step;
        match score_tracks(trainer, user, offset, cfg, DEFAULT_ALIGN_TOLERANCE) {
            Ok(summary) => {
                if best.is_none_or(|(_, e)| summary.mean_error < e) {
                    best = Some((offset, summary.mean_error));
                }
            }
            Err(SessionError::EmptyTrial) => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or(SessionError::NoOverlap)
}
