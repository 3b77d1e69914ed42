//! Skeleton data model and the ten-segment angular error metric.
//!
//! Coordinates are normalized to the frame (`x` by width, `y` by height) with
//! `y` growing downward. Segment orientations are compared as undirected
//! angles modulo 2π, so the per-segment error always lies in `[0, π]`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("unknown keypoint name `{0}`")]
    UnknownKeypoint(String),
    #[error("keypoint `{0}` is missing")]
    MissingKeypoint(KeypointName),
    #[error("keypoint `{0}` appears more than once")]
    DuplicateKeypoint(KeypointName),
    #[error("keypoint `{name}` has score {score} outside [0, 1]")]
    ScoreOutOfRange { name: KeypointName, score: f64 },
    #[error("keypoint `{0}` has a non-finite coordinate")]
    NonFinite(KeypointName),
    #[error("frame size {width}x{height} must be positive")]
    InvalidFrameSize { width: u32, height: u32 },
    #[error("expected {expected} keypoints, got {got}")]
    WrongKeypointCount { expected: usize, got: usize },
    #[error("confidence threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

/// The 17 canonical keypoints, in the estimator's output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeypointName {
    Nose,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

pub const KEYPOINT_COUNT: usize = 17;

impl KeypointName {
    pub const ALL: [KeypointName; KEYPOINT_COUNT] = [
        Self::Nose,
        Self::LeftEye,
        Self::RightEye,
        Self::LeftEar,
        Self::RightEar,
        Self::LeftShoulder,
        Self::RightShoulder,
        Self::LeftElbow,
        Self::RightElbow,
        Self::LeftWrist,
        Self::RightWrist,
        Self::LeftHip,
        Self::RightHip,
        Self::LeftKnee,
        Self::RightKnee,
        Self::LeftAnkle,
        Self::RightAnkle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Nose => "nose",
            Self::LeftEye => "left_eye",
            Self::RightEye => "right_eye",
            Self::LeftEar => "left_ear",
            Self::RightEar => "right_ear",
            Self::LeftShoulder => "left_shoulder",
            Self::RightShoulder => "right_shoulder",
            Self::LeftElbow => "left_elbow",
            Self::RightElbow => "right_elbow",
            Self::LeftWrist => "left_wrist",
            Self::RightWrist => "right_wrist",
            Self::LeftHip => "left_hip",
            Self::RightHip => "right_hip",
            Self::LeftKnee => "left_knee",
            Self::RightKnee => "right_knee",
            Self::LeftAnkle => "left_ankle",
            Self::RightAnkle => "right_ankle",
        }
    }

    /// The keypoint occupying this one's place after a horizontal flip.
    pub fn mirrored(self) -> Self {
        match self {
            Self::Nose => Self::Nose,
            Self::LeftEye => Self::RightEye,
            Self::RightEye => Self::LeftEye,
            Self::LeftEar => Self::RightEar,
            Self::RightEar => Self::LeftEar,
            Self::LeftShoulder => Self::RightShoulder,
            Self::RightShoulder => Self::LeftShoulder,
            Self::LeftElbow => Self::RightElbow,
            Self::RightElbow => Self::LeftElbow,
            Self::LeftWrist => Self::RightWrist,
            Self::RightWrist => Self::LeftWrist,
            Self::LeftHip => Self::RightHip,
            Self::RightHip => Self::LeftHip,
            Self::LeftKnee => Self::RightKnee,
            Self::RightKnee => Self::LeftKnee,
            Self::LeftAnkle => Self::RightAnkle,
            Self::RightAnkle => Self::LeftAnkle,
        }
    }

    pub fn is_head(self) -> bool {
        matches!(
            self,
            Self::Nose | Self::LeftEye | Self::RightEye | Self::LeftEar | Self::RightEar
        )
    }
}

impl fmt::Display for KeypointName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KeypointName {
    type Err = PoseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PoseError::UnknownKeypoint(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

impl Keypoint {
    pub const fn new(x: f64, y: f64, score: f64) -> Self {
        Self { x, y, score }
    }
}

/// One person's 17 keypoints at one instant, plus the frame size they were
/// measured in.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    keypoints: [Keypoint; KEYPOINT_COUNT],
    frame_width: u32,
    frame_height: u32,
}

impl Pose {
    /// Builds a pose from keypoints given in canonical order.
    pub fn new(
        keypoints: [Keypoint; KEYPOINT_COUNT],
        frame_width: u32,
        frame_height: u32,
    ) -> Result<Self, PoseError> {
        if frame_width == 0 || frame_height == 0 {
            return Err(PoseError::InvalidFrameSize {
                width: frame_width,
                height: frame_height,
            });
        }
        for (name, kp) in KeypointName::ALL.iter().zip(keypoints.iter()) {
            if !kp.x.is_finite() || !kp.y.is_finite() {
                return Err(PoseError::NonFinite(*name));
            }
            if !(0.0..=1.0).contains(&kp.score) {
                return Err(PoseError::ScoreOutOfRange {
                    name: *name,
                    score: kp.score,
                });
            }
        }
        Ok(Self {
            keypoints,
            frame_width,
            frame_height,
        })
    }

    /// Builds a pose from named keypoints in any order. Every canonical name
    /// must appear exactly once.
    pub fn from_named<I>(points: I, frame_width: u32, frame_height: u32) -> Result<Self, PoseError>
    where
        I: IntoIterator<Item = (KeypointName, Keypoint)>,
    {
        let mut slots: [Option<Keypoint>; KEYPOINT_COUNT] = [None; KEYPOINT_COUNT];
        for (name, kp) in points {
            let slot = &mut slots[name.index()];
            if slot.is_some() {
                return Err(PoseError::DuplicateKeypoint(name));
            }
            *slot = Some(kp);
        }
        let mut keypoints = [Keypoint::new(0.0, 0.0, 0.0); KEYPOINT_COUNT];
        for (name, slot) in KeypointName::ALL.iter().zip(slots) {
            keypoints[name.index()] = slot.ok_or(PoseError::MissingKeypoint(*name))?;
        }
        Self::new(keypoints, frame_width, frame_height)
    }

    pub fn keypoints(&self) -> &[Keypoint; KEYPOINT_COUNT] {
        &self.keypoints
    }

    pub fn iter(&self) -> impl Iterator<Item = (KeypointName, &Keypoint)> + '_ {
        KeypointName::ALL.iter().copied().zip(self.keypoints.iter())
    }

    pub fn frame_width(&self) -> u32 {
        self.frame_width
    }

    pub fn frame_height(&self) -> u32 {
        self.frame_height
    }

    /// Returns a copy with `f` applied to every keypoint. Fails if the result
    /// breaks a pose invariant.
    pub fn map_keypoints<F>(&self, mut f: F) -> Result<Self, PoseError>
    where
        F: FnMut(KeypointName, Keypoint) -> Keypoint,
    {
        let mut keypoints = self.keypoints;
        for (name, kp) in KeypointName::ALL.iter().zip(keypoints.iter_mut()) {
            *kp = f(*name, *kp);
        }
        Self::new(keypoints, self.frame_width, self.frame_height)
    }
}

impl Index<KeypointName> for Pose {
    type Output = Keypoint;

    fn index(&self, name: KeypointName) -> &Keypoint {
        &self.keypoints[name.index()]
    }
}

/// The ten body segments whose orientations are compared. The head is not
/// part of the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    ShoulderLine,
    HipLine,
    UpperArmL,
    UpperArmR,
    LowerArmL,
    LowerArmR,
    UpperLegL,
    UpperLegR,
    LowerLegL,
    LowerLegR,
}

pub const SEGMENT_COUNT: usize = 10;

impl Segment {
    pub const ALL: [Segment; SEGMENT_COUNT] = [
        Self::ShoulderLine,
        Self::HipLine,
        Self::UpperArmL,
        Self::UpperArmR,
        Self::LowerArmL,
        Self::LowerArmR,
        Self::UpperLegL,
        Self::UpperLegR,
        Self::LowerLegL,
        Self::LowerLegR,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ShoulderLine => "shoulder_line",
            Self::HipLine => "hip_line",
            Self::UpperArmL => "upper_arm_l",
            Self::UpperArmR => "upper_arm_r",
            Self::LowerArmL => "lower_arm_l",
            Self::LowerArmR => "lower_arm_r",
            Self::UpperLegL => "upper_leg_l",
            Self::UpperLegR => "upper_leg_r",
            Self::LowerLegL => "lower_leg_l",
            Self::LowerLegR => "lower_leg_r",
        }
    }

    /// Ordered (from, to) keypoints.
    pub fn endpoints(self) -> (KeypointName, KeypointName) {
        use KeypointName::*;
        match self {
            Self::ShoulderLine => (LeftShoulder, RightShoulder),
            Self::HipLine => (LeftHip, RightHip),
            Self::UpperArmL => (LeftShoulder, LeftElbow),
            Self::UpperArmR => (RightShoulder, RightElbow),
            Self::LowerArmL => (LeftElbow, LeftWrist),
            Self::LowerArmR => (RightElbow, RightWrist),
            Self::UpperLegL => (LeftHip, LeftKnee),
            Self::UpperLegR => (RightHip, RightKnee),
            Self::LowerLegL => (LeftKnee, LeftAnkle),
            Self::LowerLegR => (RightKnee, RightAnkle),
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Segment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|seg| seg.as_str() == s)
            .ok_or_else(|| format!("unknown segment `{s}`"))
    }
}

/// One value per segment, serialized as a map keyed by segment id in table
/// order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerSegment<T>(pub [T; SEGMENT_COUNT]);

impl<T: Copy> PerSegment<T> {
    pub fn iter(&self) -> impl Iterator<Item = (Segment, T)> + '_ {
        Segment::ALL.iter().copied().zip(self.0.iter().copied())
    }
}

impl<T> Index<Segment> for PerSegment<T> {
    type Output = T;

    fn index(&self, seg: Segment) -> &T {
        &self.0[seg.index()]
    }
}

impl<T: Serialize> Serialize for PerSegment<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(SEGMENT_COUNT))?;
        for (seg, v) in Segment::ALL.iter().zip(self.0.iter()) {
            map.serialize_entry(seg.as_str(), v)?;
        }
        map.end()
    }
}

impl<'de, T> Deserialize<'de> for PerSegment<Option<T>>
where
    T: Deserialize<'de> + Copy,
{
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SegVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de> + Copy> Visitor<'de> for SegVisitor<T> {
            type Value = PerSegment<Option<T>>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from segment id to value")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut out = [None; SEGMENT_COUNT];
                while let Some((key, value)) = access.next_entry::<String, Option<T>>()? {
                    let seg: Segment = key.parse().map_err(serde::de::Error::custom)?;
                    out[seg.index()] = value;
                }
                Ok(PerSegment(out))
            }
        }

        deserializer.deserialize_map(SegVisitor(std::marker::PhantomData))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub confidence_threshold: f64,
    pub mirror_user: bool,
    pub aspect_correct: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.3,
            mirror_user: true,
            aspect_correct: true,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), PoseError> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(PoseError::InvalidThreshold(self.confidence_threshold));
        }
        Ok(())
    }
}

/// Angular errors for one aligned trainer/user frame pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    /// Error in radians per segment, `None` where the segment was excluded.
    pub per_segment: PerSegment<Option<f64>>,
    pub valid_count: usize,
    /// Mean over the valid segments; `None` iff `valid_count == 0`.
    pub mean_error: Option<f64>,
}

/// Orientation of `segment` in `(-π, π]`, or `None` when its endpoints
/// coincide.
pub fn segment_angle(pose: &Pose, segment: Segment, aspect_correct: bool) -> Option<f64> {
    let (from, to) = segment.endpoints();
    let (a, b) = (pose[from], pose[to]);
    let (mut dx, mut dy) = (b.x - a.x, b.y - a.y);
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    if aspect_correct {
        dx *= f64::from(pose.frame_width);
        dy *= f64::from(pose.frame_height);
    }
    let angle = dy.atan2(dx);
    // atan2 yields -π for (negative, -0.0); fold onto the half-open range.
    Some(if angle <= -PI { PI } else { angle })
}

/// Smallest absolute difference between two orientations, in `[0, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d).clamp(0.0, PI)
}

/// Horizontal flip: `x -> 1 - x` and left/right keypoint labels swapped.
pub fn mirror_pose(pose: &Pose) -> Pose {
    let mut keypoints = pose.keypoints;
    for name in KeypointName::ALL {
        let src = pose[name.mirrored()];
        keypoints[name.index()] = Keypoint::new(1.0 - src.x, src.y, src.score);
    }
    Pose {
        keypoints,
        frame_width: pose.frame_width,
        frame_height: pose.frame_height,
    }
}

/// Compares a user pose against a trainer pose segment by segment.
///
/// A segment counts only when both of its endpoints clear the confidence
/// threshold in both poses and both orientations are defined.
pub fn frame_error(trainer: &Pose, user: &Pose, cfg: &MetricConfig) -> FrameScore {
    let mirrored;
    let user = if cfg.mirror_user {
        mirrored = mirror_pose(user);
        &mirrored
    } else {
        user
    };

    let confident = |pose: &Pose, seg: Segment| {
        let (a, b) = seg.endpoints();
        pose[a].score >= cfg.confidence_threshold && pose[b].score >= cfg.confidence_threshold
    };

    let mut per_segment = [None; SEGMENT_COUNT];
    let mut sum = 0.0;
    let mut valid_count = 0;
    for seg in Segment::ALL {
        if !confident(trainer, seg) || !confident(user, seg) {
            continue;
        }
        let (Some(t), Some(u)) = (
            segment_angle(trainer, seg, cfg.aspect_correct),
            segment_angle(user, seg, cfg.aspect_correct),
        ) else {
            continue;
        };
        let err = angle_diff(t, u);
        per_segment[seg.index()] = Some(err);
        sum += err;
        valid_count += 1;
    }

    FrameScore {
        per_segment: PerSegment(per_segment),
        valid_count,
        mean_error: (valid_count > 0).then(|| sum / valid_count as f64),
    }
}
