//! `poseguide`: offline scoring, the live scoring service, session replay,
//! counterbalancing and study analysis.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
//! Every failure prints `error[<code>]: <detail>` on stderr.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poseguide_core::analysis::{
    latin_square, load_rankings, rank_sum, report, rm_anova, tlx_by_condition, tukey_hsd,
    AnalysisError, StudyTable, DEFAULT_TLX_SCALE_MAX,
};
use poseguide_core::persistence::{
    export_report, load_report, read_track_file, PersistError, ScoreReportRow,
};
use poseguide_core::protocol::{
    read_session_log_file, replay, serve, ServerMessage, ServerOptions,
};
use poseguide_core::session::DEFAULT_ALIGN_TOLERANCE;
use poseguide_core::{
    best_offset, score_tracks, Condition, MetricConfig, SessionError, Track, TrackKind,
};

const AUTO_OFFSET_MIN: f64 = 0.0;
const AUTO_OFFSET_MAX: f64 = 2.0;
const AUTO_OFFSET_STEP: f64 = 1.0 / 30.0;

#[derive(Parser)]
#[command(
    name = "poseguide",
    version,
    about = "Pose-guided training: scoring and study analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a recorded user track against a trainer track.
    Score(ScoreArgs),
    /// Run the live scoring service.
    Serve(ServeArgs),
    /// Re-score a recorded session log.
    Replay(ReplayArgs),
    /// Print a counterbalanced condition ordering as CSV.
    LatinSquare(LatinArgs),
    /// Study statistics over exported reports.
    #[command(subcommand)]
    Analyze(Analyze),
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    trainer: PathBuf,
    #[arg(long)]
    user: PathBuf,
    /// User lag in seconds, or `auto` to search [0, 2] s.
    #[arg(long, default_value = "0")]
    offset: String,
    #[arg(long, default_value_t = 0.3)]
    threshold: f64,
    /// Compare the user pose as recorded instead of mirrored.
    #[arg(long)]
    no_mirror: bool,
    #[arg(long, default_value = "anonymous")]
    participant: String,
    /// Condition for the report row when the user track carries none.
    #[arg(long, default_value = "C1")]
    condition: Condition,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    listen: String,
    /// Trainer preloaded into every connection.
    #[arg(long)]
    trainer: Option<PathBuf>,
    /// Directory for session logs, trial recordings and reports.
    #[arg(long)]
    record_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    session: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LatinArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    replicates: usize,
}

#[derive(Subcommand)]
enum Analyze {
    /// Repeated-measures ANOVA and Tukey HSD on one report column.
    Anova {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "mean_error_rad")]
        measure: String,
    },
    /// Mean raw TLX per condition.
    Tlx {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TLX_SCALE_MAX)]
        scale_max: f64,
    },
    /// Preference rank sums from a participant,condition,rank CSV.
    Ranks {
        #[arg(long)]
        input: PathBuf,
    },
}

struct Failure {
    exit: u8,
    code: &'static str,
    detail: String,
}

impl Failure {
    fn usage(detail: impl Into<String>) -> Self {
        Self {
            exit: 1,
            code: "usage",
            detail: detail.into(),
        }
    }

    fn data(code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            exit: 2,
            code,
            detail: detail.into(),
        }
    }

    fn runtime(code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            exit: 3,
            code,
            detail: detail.into(),
        }
    }

    /// File problems are data errors unless the file could not be opened or
    /// written at all.
    fn persist(code: &'static str, path: &Path, e: PersistError) -> Self {
        match e {
            PersistError::Io(e) => Self::runtime("io", format!("{}: {e}", path.display())),
            e => Self::data(code, format!("{}: {e}", path.display())),
        }
    }

    fn analysis(path: &Path, e: AnalysisError) -> Self {
        Self::data("analysis", format!("{}: {e}", path.display()))
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprint!("error[usage]: {e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Score(args) => score(args),
        Command::Serve(args) => serve_cmd(args),
        Command::Replay(args) => replay_cmd(args),
        Command::LatinSquare(args) => latin(args),
        Command::Analyze(Analyze::Anova { input, measure }) => anova(&input, &measure),
        Command::Analyze(Analyze::Tlx { input, scale_max }) => tlx(&input, scale_max),
        Command::Analyze(Analyze::Ranks { input }) => ranks(&input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.detail);
            ExitCode::from(f.exit)
        }
    }
}

fn print(text: &str) -> CmdResult {
    io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| Failure::runtime("io", format!("stdout: {e}")))
}

fn write_report(rows: &[ScoreReportRow], path: &Path) -> CmdResult {
    let file = File::create(path)
        .map_err(|e| Failure::runtime("io", format!("{}: {e}", path.display())))?;
    export_report(rows, file).map_err(|e| Failure::persist("bad_report", path, e))
}

fn read_track(path: &Path) -> Result<Track, Failure> {
    read_track_file(path).map_err(|e| Failure::persist("bad_track", path, e))
}

fn session_failure(e: SessionError) -> Failure {
    let code = match e {
        SessionError::EmptyTrial => "empty_trial",
        SessionError::NoOverlap => "no_overlap",
        _ => "bad_input",
    };
    Failure::data(code, e.to_string())
}

fn score(args: ScoreArgs) -> CmdResult {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(Failure::usage(format!(
            "--threshold {} outside [0, 1]",
            args.threshold
        )));
    }
    let trainer = read_track(&args.trainer)?;
    let user = read_track(&args.user)?;
    // Only live recordings are camera views; a trainer-kind file on the user
    // side is compared as recorded.
    let cfg = MetricConfig {
        confidence_threshold: args.threshold,
        mirror_user: !args.no_mirror && user.meta().kind == TrackKind::UserSession,
        aspect_correct: true,
    };
    let (offset, auto) = if args.offset == "auto" {
        let (o, _) = best_offset(
            &trainer,
            &user,
            AUTO_OFFSET_MIN,
            AUTO_OFFSET_MAX,
            AUTO_OFFSET_STEP,
            &cfg,
        )
        .map_err(session_failure)?;
        (o, true)
    } else {
        let o: f64 = args
            .offset
            .parse()
            .ok()
            .filter(|o: &f64| o.is_finite())
            .ok_or_else(|| {
                Failure::usage(format!(
                    "--offset `{}` is neither `auto` nor seconds",
                    args.offset
                ))
            })?;
        (o, false)
    };
    let summary = score_tracks(&trainer, &user, offset, &cfg, DEFAULT_ALIGN_TOLERANCE)
        .map_err(session_failure)?;

    let condition = user.meta().condition.unwrap_or(args.condition);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "offset = {offset} s{}",
        if auto { " (auto)" } else { "" }
    );
    let _ = writeln!(out, "mirror_user = {}", cfg.mirror_user);
    let _ = writeln!(out, "mean_error_rad = {}", summary.mean_error);
    let _ = writeln!(out, "frames_scored = {}", summary.frame_count);
    let _ = writeln!(out, "frames_unscored = {}", summary.unscored_count);
    for (seg, m) in summary.per_segment_means.iter() {
        match m {
            Some(m) => _ = writeln!(out, "{} = {m}", seg.as_str()),
            None => _ = writeln!(out, "{} = -", seg.as_str()),
        }
    }
    print(&out)?;
    if let Some(path) = &args.out {
        write_report(
            &[ScoreReportRow::from_summary(
                &args.participant,
                condition,
                &summary,
            )],
            path,
        )?;
    }
    Ok(())
}

fn serve_cmd(args: ServeArgs) -> CmdResult {
    let trainer = args.trainer.as_deref().map(read_track).transpose()?;
    let listener = TcpListener::bind(&args.listen)
        .map_err(|e| Failure::runtime("bind", format!("{}: {e}", args.listen)))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Failure::runtime("bind", e.to_string()))?;
    // Printed on stdout so callers binding port 0 learn the real port.
    print(&format!("listening on {addr}\n"))?;
    io::stdout().flush().ok();
    log::info!("serving on {addr}");
    serve(
        listener,
        ServerOptions {
            trainer,
            record_dir: args.record_dir,
        },
    )
    .map_err(|e| Failure::runtime("io", e.to_string()))
}

fn replay_cmd(args: ReplayArgs) -> CmdResult {
    let log = read_session_log_file(&args.session)
        .map_err(|e| Failure::persist("bad_session_log", &args.session, e))?;
    let out = replay(&log);
    let mut text = String::new();
    for msg in out.responses.iter().flatten() {
        if let ServerMessage::Summary(_) = msg {
            let _ = writeln!(text, "{}", msg.encode());
        }
    }
    print(&text)?;
    if let Some(path) = &args.out {
        write_report(&out.report_rows(), path)?;
    }
    Ok(())
}

fn latin(args: LatinArgs) -> CmdResult {
    let rows = latin_square(args.k, args.replicates).map_err(|e| Failure::usage(e.to_string()))?;
    let mut out = String::from("row");
    for p in 1..=args.k {
        let _ = write!(out, ",position_{p}");
    }
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let _ = write!(out, "{}", i + 1);
        for c in row {
            let _ = write!(out, ",C{}", c + 1);
        }
        out.push('\n');
    }
    print(&out)
}

fn load_rows(input: &Path) -> Result<Vec<ScoreReportRow>, Failure> {
    let file = File::open(input)
        .map_err(|e| Failure::runtime("io", format!("{}: {e}", input.display())))?;
    load_report(file).map_err(|e| Failure::persist("bad_report", input, e))
}

fn anova(input: &Path, measure: &str) -> CmdResult {
    let rows = load_rows(input)?;
    let table = StudyTable::from_report(&rows, measure).map_err(|e| Failure::analysis(input, e))?;
    let res = rm_anova(&table).map_err(|e| Failure::analysis(input, e))?;
    let tukey = tukey_hsd(&table, &res, 0.05).map_err(|e| Failure::analysis(input, e))?;
    let mut out = report::anova_text(&table, measure, &res);
    out.push('\n');
    out.push_str(&report::tukey_csv(&table, &tukey));
    print(&out)
}

fn tlx(input: &Path, scale_max: f64) -> CmdResult {
    if !(scale_max.is_finite() && scale_max > 0.0) {
        return Err(Failure::usage(format!(
            "--scale-max {scale_max} must be positive"
        )));
    }
    let rows = load_rows(input)?;
    let by_condition =
        tlx_by_condition(&rows, scale_max).map_err(|e| Failure::analysis(input, e))?;
    if by_condition.is_empty() {
        return Err(Failure::data(
            "analysis",
            format!("{}: no rows carry all six TLX subscales", input.display()),
        ));
    }
    let mut out = String::from("condition,tlx_overall,responses\n");
    for (c, mean, n) in by_condition {
        let _ = writeln!(out, "{c},{mean:.2},{n}");
    }
    print(&out)
}

fn ranks(input: &Path) -> CmdResult {
    let file = File::open(input)
        .map_err(|e| Failure::runtime("io", format!("{}: {e}", input.display())))?;
    let rankings = load_rankings(file).map_err(|e| Failure::analysis(input, e))?;
    let sums = rank_sum(&rankings.ranks).map_err(|e| Failure::analysis(input, e))?;
    print(&report::ranks_csv(&rankings.conditions, &sums))
}
