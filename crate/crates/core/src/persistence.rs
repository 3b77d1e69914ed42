//! File formats: `.poses.jsonl` pose tracks and the per-trial score report
//! CSV.
//!
//! A track file is UTF-8, one JSON record per line. Line 1 is the
//! [`TrackMeta`]; every following line is a frame:
//!
//! ```text
//! {"t":0.033,"keypoints":[["nose",0.5,0.1,0.98],["left_eye",...],...]}
//! ```
//!
//! Keypoints are written in canonical order; readers accept any order but
//! require each of the 17 names exactly once. Numbers use the shortest
//! decimal form that round-trips.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{Keypoint, KeypointName, PerSegment, Pose, PoseError, Segment, SEGMENT_COUNT};
use crate::session::TrialSummary;
use crate::track::{Condition, Track, TrackError, TrackFrame, TrackMeta, TRACK_FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed record: {detail}")]
    Malformed { line: usize, detail: String },
    #[error("line {line}: unsupported format_version {version}")]
    UnsupportedVersion { line: usize, version: String },
    #[error("line {line}: schema error: {detail}")]
    Schema { line: usize, detail: String },
    #[error("line {line}: timestamp {t} does not follow previous timestamp {prev}")]
    NonMonotonic { line: usize, t: f64, prev: f64 },
    #[error("track file has no frames")]
    NoFrames,
    #[error("track file is empty")]
    Empty,
    #[error("report has no rows")]
    EmptyReport,
    #[error("report row {row}: {detail}")]
    BadRow { row: usize, detail: String },
    #[error(transparent)]
    Track(#[from] TrackError),
}

impl PersistError {
    /// 1-based line (or CSV row) the error points at, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Malformed { line, .. }
            | Self::UnsupportedVersion { line, .. }
            | Self::Schema { line, .. }
            | Self::NonMonotonic { line, .. } => Some(*line),
            Self::BadRow { row, .. } => Some(*row),
            _ => None,
        }
    }
}

/// `[name, x, y, score]`, the on-disk and on-wire keypoint encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointRecord(pub String, pub f64, pub f64, pub f64);

pub fn pose_to_records(pose: &Pose) -> Vec<KeypointRecord> {
    pose.iter()
        .map(|(name, kp)| KeypointRecord(name.as_str().to_owned(), kp.x, kp.y, kp.score))
        .collect()
}

pub fn pose_from_records(
    records: &[KeypointRecord],
    frame_width: u32,
    frame_height: u32,
) -> Result<Pose, PoseError> {
    if records.len() != crate::pose::KEYPOINT_COUNT {
        return Err(PoseError::WrongKeypointCount {
            expected: crate::pose::KEYPOINT_COUNT,
            got: records.len(),
        });
    }
    let named = records
        .iter()
        .map(|KeypointRecord(name, x, y, score)| {
            Ok((name.parse::<KeypointName>()?, Keypoint::new(*x, *y, *score)))
        })
        .collect::<Result<Vec<_>, PoseError>>()?;
    Pose::from_named(named, frame_width, frame_height)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    t: f64,
    keypoints: Vec<KeypointRecord>,
}

/// JSON form of a whole track, used where a track travels as one value
/// (e.g. inline in a protocol message).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineTrack {
    pub meta: TrackMeta,
    pub frames: Vec<InlineFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineFrame {
    pub t: f64,
    pub keypoints: Vec<KeypointRecord>,
}

impl From<&Track> for InlineTrack {
    fn from(track: &Track) -> Self {
        Self {
            meta: track.meta().clone(),
            frames: track
                .frames()
                .iter()
                .map(|f| InlineFrame {
                    t: f.t,
                    keypoints: pose_to_records(&f.pose),
                })
                .collect(),
        }
    }
}

impl InlineTrack {
    pub fn into_track(self) -> Result<Track, PersistError> {
        let (w, h) = (self.meta.frame_width, self.meta.frame_height);
        if self.meta.format_version != TRACK_FORMAT_VERSION {
            return Err(PersistError::UnsupportedVersion {
                line: 1,
                version: self.meta.format_version.to_string(),
            });
        }
        let frames = self
            .frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                pose_from_records(&f.keypoints, w, h)
                    .map(|pose| TrackFrame { t: f.t, pose })
                    .map_err(|e| PersistError::Schema {
                        line: i + 2,
                        detail: e.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Track::new(self.meta, frames)?)
    }
}

fn json_line<T: Serialize, W: Write>(value: &T, out: &mut W) -> Result<(), PersistError> {
    serde_json::to_writer(&mut *out, value).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes a track as newline-delimited JSON. Output is deterministic.
pub fn write_track<W: Write>(track: &Track, out: W) -> Result<(), PersistError> {
    let mut out = BufWriter::new(out);
    json_line(track.meta(), &mut out)?;
    for frame in track.frames() {
        let rec = FrameRecord {
            t: frame.t,
            keypoints: pose_to_records(&frame.pose),
        };
        json_line(&rec, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses and validates a track. Errors carry the 1-based line number.
pub fn read_track<R: BufRead>(input: R) -> Result<Track, PersistError> {
    let mut lines = input.lines();
    let first = lines.next().ok_or(PersistError::Empty)??;
    let meta = parse_meta(&first)?;
    meta.validate().map_err(|e| PersistError::Schema {
        line: 1,
        detail: e.to_string(),
    })?;

    let mut frames: Vec<TrackFrame> = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let rec: FrameRecord =
            serde_json::from_str(&line).map_err(|e| PersistError::Malformed {
                line: lineno,
                detail: e.to_string(),
            })?;
        if !(rec.t.is_finite() && rec.t >= 0.0) {
            return Err(PersistError::Schema {
                line: lineno,
                detail: format!("timestamp {} must be finite and non-negative", rec.t),
            });
        }
        if let Some(prev) = frames.last() {
            if rec.t <= prev.t {
                return Err(PersistError::NonMonotonic {
                    line: lineno,
                    t: rec.t,
                    prev: prev.t,
                });
            }
        }
        let pose = pose_from_records(&rec.keypoints, meta.frame_width, meta.frame_height).map_err(
            |e| PersistError::Schema {
                line: lineno,
                detail: e.to_string(),
            },
        )?;
        frames.push(TrackFrame { t: rec.t, pose });
    }
    if frames.is_empty() {
        return Err(PersistError::NoFrames);
    }
    Ok(Track::new(meta, frames)?)
}

fn parse_meta(line: &str) -> Result<TrackMeta, PersistError> {
    let malformed = |e: serde_json::Error| PersistError::Malformed {
        line: 1,
        detail: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(line).map_err(malformed)?;
    match value.get("format_version") {
        Some(v) if v.as_u64() == Some(u64::from(TRACK_FORMAT_VERSION)) => {}
        Some(v) => {
            return Err(PersistError::UnsupportedVersion {
                line: 1,
                version: v.to_string(),
            })
        }
        None => {
            return Err(PersistError::Schema {
                line: 1,
                detail: "missing format_version".into(),
            })
        }
    }
    serde_json::from_value(value).map_err(malformed)
}

pub fn write_track_file(track: &Track, path: &Path) -> Result<(), PersistError> {
    write_track(track, File::create(path)?)
}

pub fn read_track_file(path: &Path) -> Result<Track, PersistError> {
    read_track(BufReader::new(File::open(path)?))
}

pub const TLX_SUBSCALES: [&str; 6] = [
    "mental",
    "physical",
    "temporal",
    "performance",
    "effort",
    "frustration",
];

/// Column names of the score report, in order.
pub fn report_header() -> Vec<String> {
    let mut cols: Vec<String> = [
        "participant",
        "condition",
        "mean_error_rad",
        "frames_scored",
        "frames_unscored",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend(Segment::ALL.iter().map(|s| s.as_str().to_owned()));
    cols.extend(TLX_SUBSCALES.iter().map(|s| format!("tlx_{s}")));
    cols
}

/// One trial of one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReportRow {
    pub participant: String,
    pub condition: Condition,
    pub mean_error: f64,
    pub frames_scored: usize,
    pub frames_unscored: usize,
    pub per_segment: PerSegment<Option<f64>>,
    /// Raw TLX subscales in [`TLX_SUBSCALES`] order.
    pub tlx: [Option<f64>; 6],
}

impl ScoreReportRow {
    pub fn from_summary(participant: &str, condition: Condition, summary: &TrialSummary) -> Self {
        Self {
            participant: participant.to_owned(),
            condition,
            mean_error: summary.mean_error,
            frames_scored: summary.frame_count,
            frames_unscored: summary.unscored_count,
            per_segment: summary.per_segment_means,
            tlx: [None; 6],
        }
    }

    /// Looks up a numeric column by its header name.
    pub fn measure(&self, column: &str) -> Option<f64> {
        match column {
            "mean_error_rad" => Some(self.mean_error),
            "frames_scored" => Some(self.frames_scored as f64),
            "frames_unscored" => Some(self.frames_unscored as f64),
            _ => {
                if let Ok(seg) = column.parse::<Segment>() {
                    return self.per_segment[seg];
                }
                let sub = column.strip_prefix("tlx_")?;
                let i = TLX_SUBSCALES.iter().position(|s| *s == sub)?;
                self.tlx[i]
            }
        }
    }

    fn validate(&self, row: usize) -> Result<(), PersistError> {
        let bad = |detail: String| PersistError::BadRow { row, detail };
        let in_range = |v: f64| v.is_finite() && (0.0..=std::f64::consts::PI).contains(&v);
        if !in_range(self.mean_error) {
            return Err(bad(format!(
                "mean_error_rad {} outside [0, pi]",
                self.mean_error
            )));
        }
        for (seg, v) in self.per_segment.iter() {
            if let Some(v) = v {
                if !in_range(v) {
                    return Err(bad(format!("{seg} {v} outside [0, pi]")));
                }
            }
        }
        if self.tlx.iter().flatten().any(|v| !v.is_finite()) {
            return Err(bad("non-finite TLX value".into()));
        }
        Ok(())
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the report CSV: header line, then one line per row in input
/// order.
pub fn export_report<W: Write>(rows: &[ScoreReportRow], out: W) -> Result<(), PersistError> {
    if rows.is_empty() {
        return Err(PersistError::EmptyReport);
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(report_header()).map_err(csv_io)?;
    for (i, row) in rows.iter().enumerate() {
        row.validate(i + 1)?;
        let mut rec = vec![
            row.participant.clone(),
            row.condition.to_string(),
            row.mean_error.to_string(),
            row.frames_scored.to_string(),
            row.frames_unscored.to_string(),
        ];
        rec.extend(row.per_segment.0.iter().map(|v| opt_cell(*v)));
        rec.extend(row.tlx.iter().map(|v| opt_cell(*v)));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> PersistError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => PersistError::Io(e),
        other => PersistError::Io(io::Error::other(format!("{other:?}"))),
    }
}

/// Loads a report written by [`export_report`] (or any CSV with the same
/// header). Row numbers in errors count the header as line 1.
pub fn load_report<R: Read>(input: R) -> Result<Vec<ScoreReportRow>, PersistError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| PersistError::Malformed {
            line: 1,
            detail: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != report_header() {
        return Err(PersistError::Schema {
            line: 1,
            detail: format!("unexpected header, want `{}`", report_header().join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| PersistError::Malformed {
            line,
            detail: e.to_string(),
        })?;
        let bad = |detail: String| PersistError::BadRow { row: line, detail };
        let num = |idx: usize| -> Result<Option<f64>, PersistError> {
            let cell = rec.get(idx).unwrap_or("");
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<f64>()
                .map(Some)
                .map_err(|_| bad(format!("column {} is not a number: `{cell}`", idx + 1)))
        };
        let count = |idx: usize| -> Result<usize, PersistError> {
            rec.get(idx)
                .unwrap_or("")
                .parse::<usize>()
                .map_err(|_| bad(format!("column {} is not a count", idx + 1)))
        };
        let condition: Condition = rec.get(1).unwrap_or("").parse().map_err(bad)?;
        let mean_error = num(2)?.ok_or_else(|| bad("mean_error_rad is empty".into()))?;
        let mut per_segment = [None; SEGMENT_COUNT];
        for (k, slot) in per_segment.iter_mut().enumerate() {
            *slot = num(5 + k)?;
        }
        let mut tlx = [None; 6];
        for (k, slot) in tlx.iter_mut().enumerate() {
            *slot = num(5 + SEGMENT_COUNT + k)?;
        }
        let row = ScoreReportRow {
            participant: rec.get(0).unwrap_or("").to_owned(),
            condition,
            mean_error,
            frames_scored: count(3)?,
            frames_unscored: count(4)?,
            per_segment: PerSegment(per_segment),
            tlx,
        };
        row.validate(line)?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::KEYPOINT_COUNT;
    use crate::track::TrackKind;

    fn sample_track(n: usize) -> Track {
        let frames = (0..n)
            .map(|i| {
                let kps: [Keypoint; KEYPOINT_COUNT] = std::array::from_fn(|k| {
                    Keypoint::new(0.1 + 0.01 * k as f64, 0.2 + 0.003 * i as f64, 0.9)
                });
                TrackFrame {
                    t: i as f64 / 30.0,
                    pose: Pose::new(kps, 640, 360).unwrap(),
                }
            })
            .collect();
        let mut meta = TrackMeta::new(TrackKind::Trainer, 640, 360, 30.0);
        meta.source_uri = "https://example.com/tutorial.mp4".into();
        Track::new(meta, frames).unwrap()
    }

    fn to_string(track: &Track) -> String {
        let mut buf = Vec::new();
        write_track(track, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn two_frames_three_lines() {
        let text = to_string(&sample_track(2));
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(r#"{"format_version":1,"kind":"trainer","frame_width":640"#));
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with(r#"{"t":0.0,"keypoints":[["nose",0.1,0.2,0.9]"#));
    }

    #[test]
    fn round_trip_is_exact() {
        let track = sample_track(5);
        let text = to_string(&track);
        let back = read_track(text.as_bytes()).unwrap();
        assert_eq!(back, track);
        assert_eq!(to_string(&back), text);
    }

    #[test]
    fn rejects_duplicate_timestamp_with_line() {
        let text = to_string(&sample_track(3));
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = lines[2];
        let err = read_track(lines.join("\n").as_bytes()).unwrap_err();
        assert!(
            matches!(err, PersistError::NonMonotonic { line: 4, .. }),
            "{err}"
        );
        assert!(err.to_string().starts_with("line 4:"));
    }

    #[test]
    fn rejects_sixteen_keypoints() {
        let text = to_string(&sample_track(1));
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        lines[1] = lines[1].replacen(r#"["nose",0.1,0.2,0.9],"#, "", 1);
        let err = read_track(lines.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, PersistError::Schema { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_version_and_garbage() {
        let text =
            to_string(&sample_track(1)).replace(r#""format_version":1"#, r#""format_version":2"#);
        assert!(matches!(
            read_track(text.as_bytes()).unwrap_err(),
            PersistError::UnsupportedVersion { line: 1, .. }
        ));
        let text = to_string(&sample_track(2)) + "not json\n";
        assert!(matches!(
            read_track(text.as_bytes()).unwrap_err(),
            PersistError::Malformed { line: 4, .. }
        ));
        let meta_only = to_string(&sample_track(1))
            .lines()
            .next()
            .unwrap()
            .to_owned();
        assert!(matches!(
            read_track(meta_only.as_bytes()).unwrap_err(),
            PersistError::NoFrames
        ));
        assert!(matches!(
            read_track(&b""[..]).unwrap_err(),
            PersistError::Empty
        ));
    }

    #[test]
    fn inline_track_round_trip() {
        let track = sample_track(3);
        let json = serde_json::to_string(&InlineTrack::from(&track)).unwrap();
        let back: InlineTrack = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_track().unwrap(), track);
    }

    fn row(p: &str, c: Condition) -> ScoreReportRow {
        let mut per = [None; SEGMENT_COUNT];
        per[0] = Some(0.1);
        per[9] = Some(0.25);
        ScoreReportRow {
            participant: p.into(),
            condition: c,
            mean_error: 0.175,
            frames_scored: 1700,
            frames_unscored: 3,
            per_segment: PerSegment(per),
            tlx: [
                Some(5.0),
                Some(2.5),
                None,
                Some(10.0),
                Some(0.0),
                Some(20.0),
            ],
        }
    }

    #[test]
    fn report_layout() {
        let mut buf = Vec::new();
        export_report(&[row("P1", Condition::C2)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "participant,condition,mean_error_rad,frames_scored,frames_unscored,\
             shoulder_line,hip_line,upper_arm_l,upper_arm_r,lower_arm_l,lower_arm_r,\
             upper_leg_l,upper_leg_r,lower_leg_l,lower_leg_r,\
             tlx_mental,tlx_physical,tlx_temporal,tlx_performance,tlx_effort,tlx_frustration"
        );
        assert_eq!(
            lines[1],
            "P1,C2,0.175,1700,3,0.1,,,,,,,,,0.25,5,2.5,,10,0,20"
        );
    }

    #[test]
    fn report_round_trip_and_errors() {
        let rows: Vec<_> = (1..=12)
            .flat_map(|p| Condition::ALL.map(|c| row(&format!("P{p}"), c)))
            .collect();
        let mut buf = Vec::new();
        export_report(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 49);
        assert_eq!(load_report(buf.as_slice()).unwrap(), rows);

        assert!(matches!(
            export_report(&[], Vec::new()),
            Err(PersistError::EmptyReport)
        ));
        let mut bad = row("P1", Condition::C1);
        bad.mean_error = 4.0;
        assert!(export_report(&[bad], Vec::new()).is_err());

        let text = String::from_utf8(buf).unwrap().replacen("C3", "C9", 1);
        assert!(matches!(
            load_report(text.as_bytes()),
            Err(PersistError::BadRow { row: 4, .. })
        ));
    }

    #[test]
    fn participant_with_comma_is_quoted() {
        let mut buf = Vec::new();
        export_report(&[row("Doe, J", Condition::C1)], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("\"Doe, J\",C1"));
        assert_eq!(
            load_report(buf.as_slice()).unwrap()[0].participant,
            "Doe, J"
        );
    }

    #[test]
    fn measure_lookup() {
        let r = row("P1", Condition::C1);
        assert_eq!(r.measure("mean_error_rad"), Some(0.175));
        assert_eq!(r.measure("lower_leg_r"), Some(0.25));
        assert_eq!(r.measure("tlx_physical"), Some(2.5));
        assert_eq!(r.measure("tlx_temporal"), None);
        assert_eq!(r.measure("nonsense"), None);
    }
}
