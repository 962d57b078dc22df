//! `isol` command line: validate frameworks, score answer files offline,
//! run the HTTP service and write demo fixtures.
//!
//! Exit codes: 0 success, 1 invalid framework or incomplete answers in
//! strict mode, 2 unreadable/unparseable input or startup failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, RwLock};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::canonical;
use crate::reporting::{self, fmt2, fmt_percent, Export, ExportFormat, HistogramSeries, Level, SummaryReport};
use crate::scoring::{self, AggregateResult, AnswerSet, Mode, ScoringError};
use crate::service::{self, ServiceConfig};
use crate::sessions::Store;
use crate::taxonomy::{self, builtin_iso27001, FrameworkDefinition, FrameworkError};

/// Environment variables overriding flags share this prefix.
pub const ENV_PREFIX: &str = "ISOL_";

#[derive(Debug, Parser)]
#[command(name = "isol", version, about = "ISO 27001 six-domain readiness assessment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a framework file; prints one line per violation.
    Validate {
        framework_file: PathBuf,
    },
    /// Score an answers file offline and print the summary.
    Score(ScoreArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Write the built-in framework and sample answer files to a directory.
    Demo {
        #[arg(long, default_value = "demo")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    pub answers_file: PathBuf,
    /// Framework file, or `builtin` for the ISO 27001 framework.
    #[arg(long, default_value = "builtin")]
    pub framework: String,
    #[arg(long, value_enum, default_value = "strict")]
    pub mode: ModeArg,
    #[arg(long, env = "ISOL_FORMAT", default_value = "text-table")]
    pub format: ExportFormat,
    /// Also print the histogram series.
    #[arg(long)]
    pub histogram: bool,
    #[arg(long, default_value = "domains")]
    pub level: Level,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Strict,
    Provisional,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Strict => Mode::Strict,
            ModeArg::Provisional => Mode::Provisional,
        }
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "ISOL_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "ISOL_PORT", default_value_t = 8080,
          value_parser = clap::value_parser!(u16).range(1..))]
    pub port: u16,
    #[arg(long, env = "ISOL_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
    /// Extra framework files to serve next to the built-in one.
    #[arg(long = "framework", env = "ISOL_FRAMEWORKS", value_delimiter = ',')]
    pub framework_paths: Vec<PathBuf>,
    /// Allowed CORS origin (default: any).
    #[arg(long, env = "ISOL_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
}

/// Resolved runtime configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub data_dir: PathBuf,
    pub port: u16,
    pub framework_paths: Vec<PathBuf>,
    pub output_format: ExportFormat,
}

impl ServeArgs {
    pub fn config(&self) -> CliConfig {
        CliConfig {
            data_dir: self.data_dir.clone(),
            port: self.port,
            framework_paths: self.framework_paths.clone(),
            output_format: ExportFormat::Json,
        }
    }
}

/// Exit status with a message already printed.
struct Exit(u8);

/// Run with explicit output streams; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 2;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    let result = match cli.command {
        Command::Validate { framework_file } => cmd_validate(&framework_file, out, err),
        Command::Score(args) => cmd_score(&args, out, err),
        Command::Serve(args) => cmd_serve(&args, out, err),
        Command::Demo { out: dir } => cmd_demo(&dir, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(Exit(code)) => code,
    }
}

pub fn main_exit_code() -> ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    ExitCode::from(run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock()))
}

fn fail(err: &mut dyn Write, code: u8, msg: impl std::fmt::Display) -> Exit {
    let _ = writeln!(err, "error: {msg}");
    Exit(code)
}

fn read_file(path: &Path, err: &mut dyn Write) -> Result<String, Exit> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(|e| fail(err, 2, format!("{e:#}")))
}

fn cmd_validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Exit> {
    let source = read_file(path, err)?;
    match taxonomy::parse_framework(&source) {
        Ok(def) => {
            let s = def.summary();
            let _ = writeln!(
                out,
                "ok: {} v{} ({} domains, {} controls, {} assessment issues)",
                s.id, s.version, s.domain_count, s.control_count, s.leaf_count
            );
            Ok(())
        }
        Err(FrameworkError::Invalid(violations)) => {
            for v in &violations {
                let _ = writeln!(out, "{v}");
            }
            Err(Exit(1))
        }
        Err(e @ FrameworkError::Syntax { .. }) => {
            Err(fail(err, 2, format!("{}: {e}", path.display())))
        }
    }
}

fn load_framework(spec: &str, err: &mut dyn Write) -> Result<FrameworkDefinition, Exit> {
    if spec == "builtin" {
        return Ok(builtin_iso27001());
    }
    let path = Path::new(spec);
    let source = read_file(path, err)?;
    taxonomy::parse_framework(&source).map_err(|e| fail(err, 2, format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    result: &'a AggregateResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a SummaryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    histogram: Option<&'a HistogramSeries>,
}

fn cmd_score(args: &ScoreArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Exit> {
    let def = load_framework(&args.framework, err)?;
    let source = read_file(&args.answers_file, err)?;
    let answers = AnswerSet::parse(&source)
        .map_err(|e| fail(err, 2, format!("{}: {e}", args.answers_file.display())))?;
    let result = match scoring::aggregate(&def, &answers, args.mode.into()) {
        Ok(r) => r,
        Err(ScoringError::Incomplete { missing }) => {
            let _ = writeln!(err, "error: {} leaf/leaves unanswered:", missing.len());
            for id in &missing {
                let _ = writeln!(err, "  {id}");
            }
            return Err(Exit(1));
        }
        Err(e) => return Err(fail(err, 2, e)),
    };

    let strict = result.mode == Mode::Strict;
    let summary = strict.then(|| reporting::summarize(&result)).transpose();
    let series = (strict && (args.histogram || args.format == ExportFormat::Csv))
        .then(|| reporting::histogram(&result, args.level))
        .transpose();
    let (summary, series) = match (summary, series) {
        (Ok(s), Ok(h)) => (s, h),
        (Err(e), _) | (_, Err(e)) => return Err(fail(err, 2, e)),
    };

    let doc = match args.format {
        ExportFormat::Json => {
            let mut s = canonical::to_string_pretty(&ScoreOutput {
                result: &result,
                summary: summary.as_ref(),
                histogram: series.as_ref().filter(|_| args.histogram),
            });
            s.push('\n');
            s
        }
        ExportFormat::Csv => match &series {
            Some(series) => series.export(ExportFormat::Csv),
            None => result.export(ExportFormat::Csv),
        },
        ExportFormat::TextTable => {
            let mut s = text_report(&def, &result, summary.as_ref());
            if let Some(series) = series.as_ref().filter(|_| args.histogram) {
                s.push('\n');
                s.push_str(&reporting::text_bars(series));
            }
            s
        }
    };
    let _ = out.write_all(doc.as_bytes());
    Ok(())
}

fn text_report(def: &FrameworkDefinition, result: &AggregateResult, summary: Option<&SummaryReport>) -> String {
    let mut lines = vec![
        format!("framework: {} ({})", def.id, def.name),
        format!(
            "mode: {}, coverage {}% ({}/{} assessment issues)",
            match result.mode {
                Mode::Strict => "strict",
                Mode::Provisional => "provisional",
            },
            fmt_percent(result.root.coverage * 100.0),
            result.answered_count,
            result.total_leaves
        ),
    ];
    let max = result.scale.max_f64();
    match result.overall() {
        Some(a) => {
            let percent = scoring::to_percent(a, &result.scale).expect("aggregate stays in range");
            let predicate = scoring::predicate_of(a, &result.scale).expect("aggregate stays in range");
            lines.push(format!(
                "overall: {} / {}% / {}",
                fmt2(a),
                fmt_percent(percent),
                predicate
            ));
        }
        None => lines.push("overall: no result (nothing answered)".to_owned()),
    }
    lines.push(String::from("domains:"));
    for d in result.domains() {
        match d.achievement {
            Some(a) => {
                let (sa, sp) = reporting::display_pair(a, max);
                lines.push(format!("  {} {} (priority {})", d.node_id, sa, sp));
            }
            None => lines.push(format!("  {} unanswered", d.node_id)),
        }
    }
    if let Some(s) = summary {
        lines.push(format!("strongest: {}", s.strongest_domains.join(", ")));
        lines.push(format!("weakest: {}", s.weakest_domains.join(", ")));
        lines.push(format!("advice: {}", s.advice));
    }
    let mut s = lines.join("\n");
    s.push('\n');
    s
}

/// Built-in framework plus any given framework files.
pub fn load_frameworks(paths: &[PathBuf]) -> Result<Vec<FrameworkDefinition>> {
    let mut defs = vec![builtin_iso27001()];
    for path in paths {
        let source = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let def = taxonomy::parse_framework(&source)
            .with_context(|| format!("invalid framework {}", path.display()))?;
        defs.push(def);
    }
    Ok(defs)
}

/// Framework files dropped into `<data_dir>/frameworks/`.
fn data_dir_frameworks(data_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = data_dir.join("frameworks");
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

fn cmd_serve(args: &ServeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Exit> {
    let config = args.config();
    let mut paths = config.framework_paths.clone();
    paths.extend(data_dir_frameworks(&config.data_dir).map_err(|e| fail(err, 2, format!("{e:#}")))?);
    let frameworks = load_frameworks(&paths).map_err(|e| fail(err, 2, format!("{e:#}")))?;
    let store = Store::open(&config.data_dir, frameworks).map_err(|e| fail(err, 2, e))?;
    tracing::info!(events = store.event_count(), "replayed event log");

    let runtime = tokio::runtime::Runtime::new().map_err(|e| fail(err, 2, e))?;
    let addr = format!("{}:{}", args.host, config.port);
    let listener = runtime
        .block_on(tokio::net::TcpListener::bind(&addr))
        .map_err(|e| fail(err, 2, format!("cannot bind {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| fail(err, 2, e))?;
    let _ = writeln!(out, "listening on http://{local}");
    let _ = out.flush();

    let app = service::router(
        Arc::new(RwLock::new(store)),
        &ServiceConfig {
            cors_origin: args.cors_origin.clone(),
        },
    );
    runtime
        .block_on(async {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
        })
        .map_err(|e| fail(err, 2, e))
}

/// Answer file grading each control's issues with one grade per control.
pub fn answers_by_control(def: &FrameworkDefinition, grades: &[(&str, i64)]) -> AnswerSet {
    let mut set = AnswerSet::new(&def.id);
    for (control_id, grade) in grades {
        if let Some(control) = def.find_node(control_id) {
            for leaf in control.leaves() {
                set.insert(leaf.id.clone(), *grade);
            }
        }
    }
    set
}

/// Control-level grades of the worked six-domain example.
pub const EXAMPLE_CONTROL_GRADES: &[(&str, i64)] = &[
    ("policy.5.1.1", 4),
    ("tools_technology.12.2.1", 3),
    ("tools_technology.12.2.2", 3),
    ("tools_technology.12.2.3", 3),
    ("tools_technology.12.2.4", 3),
    ("tools_technology.12.6.1", 3),
    ("organization.6.1.3", 4),
    ("culture.13.2.1", 2),
    ("culture.13.2.2", 3),
    ("culture.13.2.3", 4),
    ("culture.14.1.1", 3),
    ("culture.14.1.2", 3),
    ("culture.14.1.3", 3),
    ("culture.14.1.4", 3),
    ("culture.14.1.5", 3),
    ("stakeholder.8.2.1", 2),
    ("stakeholder.8.2.2", 2),
    ("stakeholder.8.2.3", 2),
    ("knowledge.15.1.2", 2),
    ("knowledge.15.1.3", 3),
    ("knowledge.15.1.4", 2),
];

fn cmd_demo(dir: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Exit> {
    let def = builtin_iso27001();
    let files = [
        ("iso27001.json", def.to_document()),
        (
            "answers-example.json",
            pretty(&answers_by_control(&def, EXAMPLE_CONTROL_GRADES)),
        ),
        ("answers-all-4.json", pretty(&AnswerSet::uniform(&def, 4))),
    ];
    std::fs::create_dir_all(dir)
        .map_err(|e| fail(err, 2, format!("cannot create {}: {e}", dir.display())))?;
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)
            .map_err(|e| fail(err, 2, format!("cannot write {}: {e}", path.display())))?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(())
}

fn pretty(answers: &AnswerSet) -> String {
    let mut s = serde_json::to_string_pretty(answers).expect("answers serialize");
    s.push('\n');
    s
}
