use serde::{Deserialize, Serialize};

use crate::persistence::{InlineTrack, KeypointRecord};
use crate::pose::PerSegment;
use crate::session::{SessionConfig, TrialSummary};

pub const PROTOCOL_VERSION: u32 = 1;

/// Messages a UI sends to the scoring service, one JSON object per line,
/// discriminated by `"type"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        protocol_version: u32,
        frame_width: u32,
        frame_height: u32,
    },
    Configure {
        #[serde(flatten)]
        config: SessionConfig,
        /// Participant id used in score report rows.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        participant: Option<String>,
    },
    LoadTrainer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        track: Option<Box<InlineTrack>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
    },
    Play {
        position: f64,
    },
    Pause {
        position: f64,
    },
    Seek {
        position: f64,
    },
    Frame {
        t_capture: f64,
        keypoints: Vec<KeypointRecord>,
    },
    EndTrial,
}

impl ClientMessage {
    pub const TYPES: [&'static str; 8] = [
        "hello",
        "configure",
        "load_trainer",
        "play",
        "pause",
        "seek",
        "frame",
        "end_trial",
    ];

    pub fn type_name(&self) -> &'static str {
        match self {
            Self::Hello { .. } => "hello",
            Self::Configure { .. } => "configure",
            Self::LoadTrainer { .. } => "load_trainer",
            Self::Play { .. } => "play",
            Self::Pause { .. } => "pause",
            Self::Seek { .. } => "seek",
            Self::Frame { .. } => "frame",
            Self::EndTrial => "end_trial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    BadMessage,
    UnknownType,
    ProtocolOrder,
    UnsupportedVersion,
    BadConfig,
    BadTrack,
    Clock,
    EmptyTrial,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BadMessage => "bad_message",
            Self::UnknownType => "unknown_type",
            Self::ProtocolOrder => "protocol_order",
            Self::UnsupportedVersion => "unsupported_version",
            Self::BadConfig => "bad_config",
            Self::BadTrack => "bad_track",
            Self::Clock => "clock",
            Self::EmptyTrial => "empty_trial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Welcome {
        protocol_version: u32,
    },
    Ack {
        of: String,
    },
    Score {
        user_t: f64,
        trainer_t: f64,
        per_segment: PerSegment<Option<f64>>,
        mean: f64,
        valid_count: usize,
    },
    /// Sent instead of `score` while live error display is off.
    Scored {
        user_t: f64,
    },
    Unscored {
        user_t: f64,
        reason: String,
    },
    Summary(TrialSummary),
    Error {
        code: String,
        detail: String,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self::Error {
            code: code.as_str().to_owned(),
            detail: detail.into(),
        }
    }

    pub fn ack(of: &str) -> Self {
        Self::Ack { of: of.to_owned() }
    }

    /// Single-line JSON encoding, without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// A message that could not be decoded; the connection stays open.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeError {
    pub code: ErrorCode,
    pub detail: String,
}

impl From<DecodeError> for ServerMessage {
    fn from(e: DecodeError) -> Self {
        ServerMessage::error(e.code, e.detail)
    }
}

/// Parses one line of client input.
pub fn decode_client(line: &str) -> Result<ClientMessage, DecodeError> {
    let bad = |detail: String| DecodeError {
        code: ErrorCode::BadMessage,
        detail,
    };
    let value: serde_json::Value = serde_json::from_str(line.trim_end_matches(['\r', '\n']))
        .map_err(|e| bad(e.to_string()))?;
    let ty = value
        .get("type")
        .ok_or_else(|| bad("missing `type` field".into()))?
        .as_str()
        .ok_or_else(|| bad("`type` must be a string".into()))?;
    if !ClientMessage::TYPES.contains(&ty) {
        return Err(DecodeError {
            code: ErrorCode::UnknownType,
            detail: format!("unknown message type `{ty}`"),
        });
    }
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

pub fn encode_client(msg: &ClientMessage) -> String {
    serde_json::to_string(msg).expect("client messages always serialize")
}
