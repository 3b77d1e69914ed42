//! Synthetic fixtures shared by the benchmarks.

use poseguide_core::{Keypoint, Pose, Track, TrackFrame, TrackKind, TrackMeta};

pub const WIDTH: u32 = 640;
pub const HEIGHT: u32 = 360;
pub const FPS: f64 = 30.0;

/// A figure whose keypoints each drift on their own sinusoid.
pub fn moving_pose(t: f64) -> Pose {
    let kps = std::array::from_fn(|k| {
        let kf = k as f64;
        Keypoint::new(
            0.35 + 0.018 * kf + 0.03 * ((0.9 + 0.1 * kf) * t).sin(),
            0.1 + 0.045 * kf + 0.02 * ((1.3 + 0.07 * kf) * t).cos(),
            0.9,
        )
    });
    Pose::new(kps, WIDTH, HEIGHT).expect("finite coordinates")
}

pub fn trainer_track(seconds: f64) -> Track {
    let n = (seconds * FPS) as usize;
    let frames = (0..=n)
        .map(|i| {
            let t = i as f64 / FPS;
            TrackFrame {
                t,
                pose: moving_pose(t),
            }
        })
        .collect();
    Track::new(
        TrackMeta::new(TrackKind::Trainer, WIDTH, HEIGHT, FPS),
        frames,
    )
    .expect("valid track")
}

/// Deterministic n × k table with a mild condition effect.
pub fn study_table(n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..k)
                .map(|j| 0.15 + 0.01 * j as f64 + 0.02 * ((i * 7 + j * 3) % 11) as f64 / 11.0)
                .collect()
        })
        .collect()
}
