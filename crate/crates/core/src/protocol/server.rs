//! Line-oriented TCP front end: one thread and one [`Connection`] per client.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::persistence::{export_report, write_track_file, PersistError};
use crate::track::Track;

use super::connection::Connection;
use super::log::{inline_trainer, SessionLogWriter};
use super::message::{decode_client, ServerMessage};

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Trainer loaded into every new connection.
    pub trainer: Option<Track>,
    /// Where session logs, trial recordings and reports are written.
    pub record_dir: Option<PathBuf>,
}

/// Writes `<stem>.session.jsonl` as messages arrive, and after every
/// completed trial `<stem>.csv` plus `<stem>-trial<N>.poses.jsonl`.
pub struct Recorder {
    dir: PathBuf,
    stem: String,
    log: SessionLogWriter<BufWriter<File>>,
    trials_written: usize,
}

impl Recorder {
    pub fn create(dir: &Path, stem: &str, preloaded: Option<&Track>) -> Result<Self, PersistError> {
        std::fs::create_dir_all(dir)?;
        let file = File::create(dir.join(format!("{stem}.session.jsonl")))?;
        Ok(Self {
            dir: dir.to_owned(),
            stem: stem.to_owned(),
            log: SessionLogWriter::new(BufWriter::new(file), preloaded)?,
            trials_written: 0,
        })
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.join(format!("{}.session.jsonl", self.stem))
    }

    pub fn report_path(&self) -> PathBuf {
        self.dir.join(format!("{}.csv", self.stem))
    }

    fn after_message(
        &mut self,
        wall_clock: f64,
        message: &super::message::ClientMessage,
        conn: &Connection,
    ) -> Result<(), PersistError> {
        self.log
            .append(wall_clock, &inline_trainer(message, conn))?;
        let trials = conn.completed_trials();
        if trials.len() == self.trials_written {
            return Ok(());
        }
        for (i, trial) in trials.iter().enumerate().skip(self.trials_written) {
            if let Some(rec) = &trial.recording {
                let (mut meta, frames) = rec.clone().into_parts();
                meta.created_at = utc_timestamp();
                let rec = Track::new(meta, frames)?;
                let path = self
                    .dir
                    .join(format!("{}-trial{}.poses.jsonl", self.stem, i + 1));
                write_track_file(&rec, &path)?;
            }
        }
        self.trials_written = trials.len();
        export_report(&conn.report_rows(), File::create(self.report_path())?)
    }
}

/// Serves one client: reads lines, answers each with one or more lines.
/// Undecodable lines get an error reply and the connection stays open.
pub fn run_connection<R, W, C>(
    input: R,
    mut output: W,
    mut conn: Connection,
    mut clock: C,
    mut recorder: Option<Recorder>,
) -> io::Result<Connection>
where
    R: BufRead,
    W: Write,
    C: FnMut() -> f64,
{
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wall_clock = clock();
        let replies = match decode_client(&line) {
            Ok(msg) => {
                let replies = conn.handle(&msg, wall_clock);
                if let Some(rec) = recorder.as_mut() {
                    if let Err(e) = rec.after_message(wall_clock, &msg, &conn) {
                        log::error!("recording failed, disabling recorder: {e}");
                        recorder = None;
                    }
                }
                replies
            }
            Err(e) => vec![ServerMessage::from(e)],
        };
        for reply in replies {
            output.write_all(reply.encode().as_bytes())?;
            output.write_all(b"\n")?;
        }
        output.flush()?;
    }
    Ok(conn)
}

fn handle_stream(stream: TcpStream, options: &ServerOptions, stem: &str) -> io::Result<()> {
    let peer = stream.peer_addr().ok();
    log::info!("connection {stem} from {peer:?}");
    let reader = BufReader::new(stream.try_clone()?);
    let conn = match &options.trainer {
        Some(t) => Connection::with_trainer(t.clone()),
        None => Connection::new(),
    };
    let recorder = match &options.record_dir {
        Some(dir) => match Recorder::create(dir, stem, options.trainer.as_ref()) {
            Ok(r) => Some(r),
            Err(e) => {
                log::error!("cannot record {stem}: {e}");
                None
            }
        },
        None => None,
    };
    let start = Instant::now();
    run_connection(
        reader,
        stream,
        conn,
        || start.elapsed().as_secs_f64(),
        recorder,
    )?;
    log::info!("connection {stem} closed");
    Ok(())
}

/// Accepts connections until the listener fails.
pub fn serve(listener: TcpListener, options: ServerOptions) -> io::Result<()> {
    let options = Arc::new(options);
    let epoch_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    for (n, stream) in listener.incoming().enumerate() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let options = Arc::clone(&options);
        let stem = format!("session-{epoch_ms}-{}", n + 1);
        thread::spawn(move || {
            if let Err(e) = handle_stream(stream, &options, &stem) {
                log::warn!("connection {stem}: {e}");
            }
        });
    }
    Ok(())
}

fn utc_timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
