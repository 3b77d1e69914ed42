use poseguide_core::persistence::{export_report, load_report, pose_to_records, InlineTrack};
use poseguide_core::protocol::{
    decode_client, encode_client, read_session_log, replay, ClientMessage, Connection, ErrorCode,
    ServerMessage, SessionLogWriter,
};
use poseguide_core::{Keypoint, Pose, SessionConfig, Track, TrackFrame, TrackKind, TrackMeta};

fn pose(shift: f64) -> Pose {
    Pose::new(
        std::array::from_fn(|k| {
            Keypoint::new(0.2 + 0.035 * k as f64, 0.1 + 0.05 * k as f64 + shift, 1.0)
        }),
        320,
        240,
    )
    .unwrap()
}

fn trainer() -> Track {
    let frames = (0..30)
        .map(|i| TrackFrame {
            t: i as f64 * 0.1,
            pose: pose(0.002 * i as f64),
        })
        .collect();
    Track::new(TrackMeta::new(TrackKind::Trainer, 320, 240, 10.0), frames).unwrap()
}

fn hello() -> ClientMessage {
    ClientMessage::Hello {
        protocol_version: 1,
        frame_width: 320,
        frame_height: 240,
    }
}

fn frame(t: f64) -> ClientMessage {
    ClientMessage::Frame {
        t_capture: t,
        keypoints: pose_to_records(&pose(0.0)),
    }
}

fn error_code(replies: &[ServerMessage]) -> Option<&str> {
    match replies {
        [ServerMessage::Error { code, .. }] => Some(code.as_str()),
        _ => None,
    }
}

#[test]
fn messages_before_hello_or_trainer_are_rejected() {
    let mut conn = Connection::new();
    assert_eq!(
        error_code(&conn.handle(&frame(0.0), 0.0)),
        Some(ErrorCode::ProtocolOrder.as_str())
    );
    assert!(matches!(
        conn.handle(&hello(), 0.0)[..],
        [ServerMessage::Welcome { .. }]
    ));
    assert_eq!(
        error_code(&conn.handle(&hello(), 0.0)),
        Some(ErrorCode::ProtocolOrder.as_str())
    );
    assert_eq!(
        error_code(&conn.handle(&frame(0.0), 0.0)),
        Some(ErrorCode::ProtocolOrder.as_str())
    );
    assert_eq!(
        error_code(&conn.handle(&ClientMessage::EndTrial, 0.0)),
        Some(ErrorCode::ProtocolOrder.as_str())
    );
}

#[test]
fn empty_trial_and_backwards_clock_are_reported() {
    let mut conn = Connection::with_trainer(trainer());
    conn.handle(&hello(), 0.0);
    assert_eq!(
        error_code(&conn.handle(&ClientMessage::EndTrial, 0.0)),
        Some(ErrorCode::EmptyTrial.as_str())
    );
    conn.handle(&ClientMessage::Play { position: 0.0 }, 5.0);
    assert_eq!(
        error_code(&conn.handle(&frame(0.0), 4.0)),
        Some(ErrorCode::Clock.as_str())
    );
    assert!(matches!(
        conn.handle(&frame(0.1), 5.1)[..],
        [ServerMessage::Scored { .. }]
    ));
    assert_eq!(
        error_code(&conn.handle(&frame(0.05), 5.2)),
        Some(ErrorCode::Clock.as_str())
    );
}

#[test]
fn frames_past_the_trainer_end_go_unscored() {
    let mut conn = Connection::with_trainer(trainer());
    conn.handle(&hello(), 0.0);
    conn.handle(&ClientMessage::Play { position: 2.8 }, 0.0);
    assert!(matches!(
        conn.handle(&frame(0.0), 0.0)[..],
        [ServerMessage::Scored { .. }]
    ));
    let late = conn.handle(&frame(1.0), 1.0);
    assert!(
        matches!(&late[..], [ServerMessage::Unscored { reason, .. }] if reason == "no_trainer_frame"),
        "{late:?}"
    );
}

#[test]
fn unknown_types_and_bad_json_get_distinct_codes() {
    assert_eq!(
        decode_client(r#"{"type":"jump"}"#).unwrap_err().code,
        ErrorCode::UnknownType
    );
    assert_eq!(decode_client("{").unwrap_err().code, ErrorCode::BadMessage);
    assert_eq!(
        decode_client(r#"{"type":"seek"}"#).unwrap_err().code,
        ErrorCode::BadMessage
    );
    let line = encode_client(&frame(0.5));
    assert_eq!(decode_client(&line).unwrap(), frame(0.5));
}

#[test]
fn logged_session_replays_to_the_same_report() {
    let t = trainer();
    let script = vec![
        (0.0, hello()),
        (
            0.0,
            ClientMessage::Configure {
                config: SessionConfig::default(),
                participant: Some("P07".into()),
            },
        ),
        (
            0.0,
            ClientMessage::LoadTrainer {
                track: Some(Box::new(InlineTrack::from(&t))),
                path: None,
            },
        ),
        (0.0, ClientMessage::Play { position: 0.0 }),
        (0.1, frame(0.1)),
        (0.2, frame(0.2)),
        (0.3, frame(0.3)),
        (0.4, ClientMessage::EndTrial),
    ];
    let mut conn = Connection::new();
    let mut log = Vec::new();
    let mut writer = SessionLogWriter::new(&mut log, None).unwrap();
    let mut live = Vec::new();
    for (clock, msg) in &script {
        live.push(conn.handle(msg, *clock));
        writer.append(*clock, msg).unwrap();
    }
    drop(writer);

    let parsed = read_session_log(log.as_slice()).unwrap();
    let out = replay(&parsed);
    assert_eq!(out.responses, live);

    let (mut a, mut b) = (Vec::new(), Vec::new());
    export_report(&conn.report_rows(), &mut a).unwrap();
    export_report(&out.report_rows(), &mut b).unwrap();
    assert_eq!(a, b);
    let rows = load_report(a.as_slice()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].participant, "P07");
    assert_eq!(rows[0].frames_scored, 3);
}
