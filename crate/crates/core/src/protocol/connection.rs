//! Per-connection protocol state machine driving a [`Session`].

use std::path::Path;

use crate::persistence::{pose_from_records, read_track_file, ScoreReportRow};
use crate::session::{FrameOutcome, Session, SessionConfig, SessionError, TrialSummary};
use crate::track::{Condition, Track, TrackFrame, TrackKind, TrackMeta};

use super::message::{ClientMessage, ErrorCode, ServerMessage, PROTOCOL_VERSION};

pub const DEFAULT_PARTICIPANT: &str = "anonymous";

/// A trial closed by `end_trial`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedTrial {
    pub participant: String,
    pub condition: Condition,
    pub summary: TrialSummary,
    /// Raw user frames of the trial.
    pub recording: Option<Track>,
}

impl CompletedTrial {
    pub fn report_row(&self) -> ScoreReportRow {
        ScoreReportRow::from_summary(&self.participant, self.condition, &self.summary)
    }
}

#[derive(Debug)]
pub struct Connection {
    frame_size: Option<(u32, u32)>,
    config: SessionConfig,
    participant: Option<String>,
    session: Option<Session>,
    trials: Vec<CompletedTrial>,
}

impl Default for Connection {
    fn default() -> Self {
        Self::new()
    }
}

impl Connection {
    pub fn new() -> Self {
        Self {
            frame_size: None,
            config: SessionConfig::default(),
            participant: None,
            session: None,
            trials: Vec::new(),
        }
    }

    /// Connection with a trainer already loaded, as if `load_trainer` had been
    /// received right after `hello`.
    pub fn with_trainer(trainer: Track) -> Self {
        let mut conn = Self::new();
        conn.session =
            Some(Session::new(conn.config, trainer).expect("default session config is valid"));
        conn
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    pub fn completed_trials(&self) -> &[CompletedTrial] {
        &self.trials
    }

    pub fn report_rows(&self) -> Vec<ScoreReportRow> {
        self.trials.iter().map(CompletedTrial::report_row).collect()
    }

    /// Applies one message. Always returns at least one server message.
    pub fn handle(&mut self, msg: &ClientMessage, wall_clock: f64) -> Vec<ServerMessage> {
        match self.dispatch(msg, wall_clock) {
            Ok(out) => out,
            Err(e) => vec![e],
        }
    }

    // The error is itself the reply, so it is not boxed.
    #[allow(clippy::result_large_err)]
    fn dispatch(
        &mut self,
        msg: &ClientMessage,
        wall_clock: f64,
    ) -> Result<Vec<ServerMessage>, ServerMessage> {
        let order = |detail: &str| ServerMessage::error(ErrorCode::ProtocolOrder, detail);

        if let ClientMessage::Hello {
            protocol_version,
            frame_width,
            frame_height,
        } = msg
        {
            if self.frame_size.is_some() {
                return Err(order("hello already received"));
            }
            if *protocol_version != PROTOCOL_VERSION {
                return Err(ServerMessage::error(
                    ErrorCode::UnsupportedVersion,
                    format!("protocol_version {protocol_version} not supported, expected {PROTOCOL_VERSION}"),
                ));
            }
            if *frame_width == 0 || *frame_height == 0 {
                return Err(ServerMessage::error(
                    ErrorCode::BadMessage,
                    "frame dimensions must be positive",
                ));
            }
            self.frame_size = Some((*frame_width, *frame_height));
            return Ok(vec![ServerMessage::Welcome {
                protocol_version: PROTOCOL_VERSION,
            }]);
        }

        let Some((frame_width, frame_height)) = self.frame_size else {
            return Err(order("first message must be hello"));
        };

        match msg {
            ClientMessage::Hello { .. } => unreachable!("handled above"),
            ClientMessage::Configure {
                config,
                participant,
            } => {
                config
                    .validate()
                    .map_err(|e| ServerMessage::error(ErrorCode::BadConfig, e.to_string()))?;
                self.config = *config;
                if participant.is_some() {
                    self.participant.clone_from(participant);
                }
                if let Some(session) = &mut self.session {
                    session
                        .set_config(*config)
                        .map_err(|e| ServerMessage::error(ErrorCode::BadConfig, e.to_string()))?;
                }
                Ok(vec![ServerMessage::ack("configure")])
            }
            ClientMessage::LoadTrainer { track, path } => {
                let bad = |detail: String| ServerMessage::error(ErrorCode::BadTrack, detail);
                let trainer = match (track, path) {
                    (Some(inline), None) => inline
                        .as_ref()
                        .clone()
                        .into_track()
                        .map_err(|e| bad(e.to_string()))?,
                    (None, Some(path)) => {
                        read_track_file(Path::new(path)).map_err(|e| bad(format!("{path}: {e}")))?
                    }
                    _ => {
                        return Err(ServerMessage::error(
                            ErrorCode::BadMessage,
                            "load_trainer needs exactly one of `track` or `path`",
                        ))
                    }
                };
                self.session = Some(
                    Session::new(self.config, trainer)
                        .map_err(|e| ServerMessage::error(ErrorCode::BadConfig, e.to_string()))?,
                );
                Ok(vec![ServerMessage::ack("load_trainer")])
            }
            ClientMessage::Play { position }
            | ClientMessage::Pause { position }
            | ClientMessage::Seek { position } => {
                if !position.is_finite() {
                    return Err(ServerMessage::error(
                        ErrorCode::BadMessage,
                        "position must be finite",
                    ));
                }
                let session = self
                    .session
                    .as_mut()
                    .ok_or_else(|| order("playback control before load_trainer"))?;
                match msg {
                    ClientMessage::Play { .. } => session.play(*position, wall_clock),
                    ClientMessage::Pause { .. } => session.pause(*position, wall_clock),
                    _ => session.seek(*position, wall_clock),
                }
                Ok(vec![ServerMessage::ack(msg.type_name())])
            }
            ClientMessage::Frame {
                t_capture,
                keypoints,
            } => {
                let session = self
                    .session
                    .as_mut()
                    .ok_or_else(|| order("frame before load_trainer"))?;
                if !(t_capture.is_finite() && *t_capture >= 0.0) {
                    return Err(ServerMessage::error(
                        ErrorCode::BadMessage,
                        "t_capture must be finite and non-negative",
                    ));
                }
                let pose = pose_from_records(keypoints, frame_width, frame_height)
                    .map_err(|e| ServerMessage::error(ErrorCode::BadMessage, e.to_string()))?;
                let outcome = session
                    .process_frame(
                        TrackFrame {
                            t: *t_capture,
                            pose,
                        },
                        wall_clock,
                    )
                    .map_err(session_error)?;
                let reply = match outcome {
                    FrameOutcome::Scored(s) if session.config().show_error_live => {
                        ServerMessage::Score {
                            user_t: s.user_t,
                            trainer_t: s.trainer_t,
                            per_segment: s.score.per_segment,
                            mean: s.score.mean_error.expect("scored frames have a mean"),
                            valid_count: s.score.valid_count,
                        }
                    }
                    FrameOutcome::Scored(s) => ServerMessage::Scored { user_t: s.user_t },
                    FrameOutcome::Unscored { user_t, reason } => ServerMessage::Unscored {
                        user_t,
                        reason: reason.as_str().to_owned(),
                    },
                };
                Ok(vec![reply])
            }
            ClientMessage::EndTrial => {
                let session = self
                    .session
                    .as_mut()
                    .ok_or_else(|| order("end_trial before load_trainer"))?;
                let summary = session.trial_summary();
                let recording = recording_track(session, frame_width, frame_height);
                session.reset_trial();
                let summary = summary.map_err(session_error)?;
                self.trials.push(CompletedTrial {
                    participant: self
                        .participant
                        .clone()
                        .unwrap_or_else(|| DEFAULT_PARTICIPANT.to_owned()),
                    condition: self.config.condition,
                    summary,
                    recording,
                });
                Ok(vec![ServerMessage::Summary(summary)])
            }
        }
    }
}

fn session_error(e: SessionError) -> ServerMessage {
    let code = match e {
        SessionError::ClockWentBackwards { .. } | SessionError::CaptureTimeBackwards { .. } => {
            ErrorCode::Clock
        }
        SessionError::EmptyTrial => ErrorCode::EmptyTrial,
        SessionError::InvalidConfig(_) => ErrorCode::BadConfig,
        SessionError::NoOverlap | SessionError::InvalidSearch(_) => ErrorCode::BadMessage,
    };
    ServerMessage::error(code, e.to_string())
}

/// The trial's raw frames as a user-session track. Frames sharing a capture
/// timestamp collapse to the first one, since tracks are strictly ordered.
fn recording_track(session: &Session, frame_width: u32, frame_height: u32) -> Option<Track> {
    let mut frames: Vec<TrackFrame> = Vec::new();
    for f in session.recording() {
        if frames.last().is_none_or(|last| f.t > last.t) {
            frames.push(f.clone());
        }
    }
    let fps = match (frames.first(), frames.last()) {
        (Some(a), Some(b)) if frames.len() > 1 && b.t > a.t => {
            (frames.len() - 1) as f64 / (b.t - a.t)
        }
        _ => 30.0,
    };
    let mut meta = TrackMeta::new(TrackKind::UserSession, frame_width, frame_height, fps);
    meta.condition = Some(session.config().condition);
    meta.source_uri = "camera".to_owned();
    Track::new(meta, frames).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::{pose_to_records, InlineTrack};
    use crate::pose::{Keypoint, Pose, KEYPOINT_COUNT};

    fn pose() -> Pose {
        let kps: [Keypoint; KEYPOINT_COUNT] =
            std::array::from_fn(|i| Keypoint::new(0.3 + 0.02 * i as f64, 0.05 * i as f64, 1.0));
        Pose::new(kps, 640, 360).unwrap()
    }

    fn trainer() -> Track {
        let frames = (0..30)
            .map(|i| TrackFrame {
                t: i as f64 / 30.0,
                pose: pose(),
            })
            .collect();
        Track::new(TrackMeta::new(TrackKind::Trainer, 640, 360, 30.0), frames).unwrap()
    }

    fn hello() -> ClientMessage {
        ClientMessage::Hello {
            protocol_version: 1,
            frame_width: 640,
            frame_height: 360,
        }
    }

    fn frame(t: f64) -> ClientMessage {
        ClientMessage::Frame {
            t_capture: t,
            keypoints: pose_to_records(&pose()),
        }
    }

    fn code(out: &[ServerMessage]) -> &str {
        match out {
            [ServerMessage::Error { code, .. }] => code,
            other => panic!("expected one error, got {other:?}"),
        }
    }

    fn load() -> ClientMessage {
        ClientMessage::LoadTrainer {
            track: Some(Box::new(InlineTrack::from(&trainer()))),
            path: None,
        }
    }

    #[test]
    fn hello_must_come_first_and_once() {
        let mut c = Connection::new();
        assert_eq!(
            code(&c.handle(&ClientMessage::EndTrial, 0.0)),
            "protocol_order"
        );
        assert_eq!(
            c.handle(&hello(), 0.0),
            vec![ServerMessage::Welcome {
                protocol_version: 1
            }]
        );
        assert_eq!(code(&c.handle(&hello(), 0.0)), "protocol_order");
    }

    #[test]
    fn unsupported_version() {
        let mut c = Connection::new();
        let msg = ClientMessage::Hello {
            protocol_version: 9,
            frame_width: 640,
            frame_height: 360,
        };
        assert_eq!(code(&c.handle(&msg, 0.0)), "unsupported_version");
        assert!(matches!(
            c.handle(&hello(), 0.0)[0],
            ServerMessage::Welcome { .. }
        ));
    }

    #[test]
    fn frame_before_load_trainer() {
        let mut c = Connection::new();
        c.handle(&hello(), 0.0);
        assert_eq!(code(&c.handle(&frame(0.0), 0.0)), "protocol_order");
        assert_eq!(
            code(&c.handle(&ClientMessage::Play { position: 0.0 }, 0.0)),
            "protocol_order"
        );
    }

    #[test]
    fn empty_trial() {
        let mut c = Connection::new();
        c.handle(&hello(), 0.0);
        c.handle(&load(), 0.0);
        assert_eq!(
            code(&c.handle(&ClientMessage::EndTrial, 0.0)),
            "empty_trial"
        );
    }

    #[test]
    fn scores_hidden_unless_live_display() {
        let mut c = Connection::new();
        c.handle(&hello(), 0.0);
        c.handle(&load(), 0.0);
        let cfg = ClientMessage::Configure {
            config: SessionConfig {
                metric: crate::pose::MetricConfig {
                    mirror_user: false,
                    ..Default::default()
                },
                ..SessionConfig::default()
            },
            participant: Some("P3".into()),
        };
        assert_eq!(c.handle(&cfg, 0.0), vec![ServerMessage::ack("configure")]);
        assert_eq!(
            c.handle(&ClientMessage::Play { position: 0.0 }, 1.0),
            vec![ServerMessage::ack("play")]
        );
        assert_eq!(
            c.handle(&frame(0.0), 1.1),
            vec![ServerMessage::Scored { user_t: 0.0 }]
        );

        let mut live = SessionConfig::default();
        live.show_error_live = true;
        live.metric.mirror_user = false;
        c.handle(
            &ClientMessage::Configure {
                config: live,
                participant: None,
            },
            1.2,
        );
        let out = c.handle(&frame(0.1), 1.2);
        assert!(
            matches!(out[0], ServerMessage::Score { mean, valid_count: 10, .. } if mean == 0.0)
        );

        // past the end of the trainer track
        assert!(
            matches!(&c.handle(&frame(5.0), 5.0)[0], ServerMessage::Unscored { reason, .. } if reason == "no_trainer_frame")
        );
        assert_eq!(code(&c.handle(&frame(6.0), 0.5)), "clock");

        let out = c.handle(&ClientMessage::EndTrial, 6.0);
        let [ServerMessage::Summary(s)] = out.as_slice() else {
            panic!("{out:?}")
        };
        assert_eq!(s.frame_count, 2);
        assert_eq!(s.unscored_count, 1);
        assert_eq!(s.mean_error, 0.0);
        let rows = c.report_rows();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].participant, "P3");
        let rec = c.completed_trials()[0].recording.as_ref().unwrap();
        assert_eq!(rec.frames().len(), 3);
        assert_eq!(rec.meta().kind, TrackKind::UserSession);

        // a new trial starts empty
        assert_eq!(
            code(&c.handle(&ClientMessage::EndTrial, 7.0)),
            "empty_trial"
        );
    }

    #[test]
    fn bad_payloads() {
        let mut c = Connection::with_trainer(trainer());
        c.handle(&hello(), 0.0);
        let short = ClientMessage::Frame {
            t_capture: 0.0,
            keypoints: pose_to_records(&pose())[1..].to_vec(),
        };
        assert_eq!(code(&c.handle(&short, 0.0)), "bad_message");
        let both = ClientMessage::LoadTrainer {
            track: None,
            path: None,
        };
        assert_eq!(code(&c.handle(&both, 0.0)), "bad_message");
        let missing = ClientMessage::LoadTrainer {
            track: None,
            path: Some("/nonexistent/x.poses.jsonl".into()),
        };
        assert_eq!(code(&c.handle(&missing, 0.0)), "bad_track");
        let mut cfg = SessionConfig::default();
        cfg.smoothing_alpha = 2.0;
        assert_eq!(
            code(&c.handle(
                &ClientMessage::Configure {
                    config: cfg,
                    participant: None
                },
                0.0
            )),
            "bad_config"
        );
        // preloaded trainer accepts frames straight away
        assert!(matches!(
            c.handle(&frame(0.0), 0.0)[0],
            ServerMessage::Scored { .. }
        ));
    }
}
