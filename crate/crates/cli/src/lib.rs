//! Command-line front end: pair checks, composition, canonical views, the
//! replay oracle and formatting of protocol files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use protocompose::canonical::canonicalize;
use protocompose::corpus::{load_context, load_protocol, render_table, Corpus, CorpusError};
use protocompose::dsl::{parse_protocol_file, serialize_protocol};
use protocompose::engine::{
    analyze_pair, compose, compose_sequences, ProtocolSequence, SequenceError,
};
use protocompose::model::{Context, ProtocolModel};
use protocompose::oracle::{enumerate_replays, find_replay, OracleBounds, OracleError};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExitStatus {
    pub code: i32,
}

impl ExitStatus {
    pub const OK: ExitStatus = ExitStatus { code: 0 };
    /// Not composable, or a replay was found.
    pub const NO: ExitStatus = ExitStatus { code: 1 };
    pub const INPUT_ERROR: ExitStatus = ExitStatus { code: 2 };
    pub const BOUND_EXCEEDED: ExitStatus = ExitStatus { code: 3 };

    fn verdict(ok: bool) -> Self {
        if ok {
            Self::OK
        } else {
            Self::NO
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "protocompose",
    version,
    about = "Compose security protocol models and check them for cross-protocol replays"
)]
struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze a protocol pair, or every pair of a corpus with --table.
    Check {
        #[arg(required_unless_present = "table", requires = "p2")]
        p1: Option<PathBuf>,
        p2: Option<PathBuf>,
        #[arg(long)]
        ctx: Option<PathBuf>,
        /// Corpus directory holding table.toml.
        #[arg(long, conflicts_with_all = ["p1", "p2", "ctx"])]
        table: Option<PathBuf>,
    },
    /// Compose p1 followed by p2 and write the result.
    Compose {
        p1: PathBuf,
        p2: PathBuf,
        #[arg(long)]
        ctx: Option<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Compose two protocol sequences.
    ComposeSeq {
        #[arg(long, num_args = 1.., required = true)]
        seq1: Vec<PathBuf>,
        #[arg(long, num_args = 0..)]
        seq2: Vec<PathBuf>,
        #[arg(long)]
        ctx: Option<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Print the classified canonical chains of a protocol.
    Canon {
        p: PathBuf,
        #[arg(long)]
        ctx: Option<PathBuf>,
    },
    /// Search for a replay between two protocols.
    Oracle {
        p1: PathBuf,
        p2: PathBuf,
        #[arg(long)]
        ctx: Option<PathBuf>,
        /// Intruder constructor depth.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// List every distinct (origin, target) replay instead of one trace.
        #[arg(long)]
        all: bool,
    },
    /// Parse a protocol and print it in canonical layout.
    Fmt { p: PathBuf },
}

enum Failure {
    Input(String),
    Bound(String),
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::BoundExceeded { .. } => Failure::Bound(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

fn context(path: Option<&Path>) -> Result<Context, Failure> {
    path.map_or_else(|| Ok(Context::new()), |p| Ok(load_context(p)?))
}

fn emit(out: &mut dyn Write, output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
        }
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Input(e.to_string())),
    }
}

fn check_pair(
    json: bool,
    p1: &Path,
    p2: &Path,
    ctx: Option<&Path>,
    out: &mut dyn Write,
) -> Result<ExitStatus, Failure> {
    let (x1, x2) = (load_protocol(p1)?, load_protocol(p2)?);
    let report =
        analyze_pair(&x1, &x2, &context(ctx)?).map_err(|e| Failure::Input(e.to_string()))?;
    let text = if json {
        report.to_json() + "\n"
    } else {
        report.to_text()
    };
    emit(out, None, &text)?;
    Ok(ExitStatus::verdict(report.overall.is_yes()))
}

fn check_table(json: bool, dir: &Path, out: &mut dyn Write) -> Result<ExitStatus, Failure> {
    let corpus = Corpus::load(dir)?;
    let rows = corpus.run()?;
    let text = if json {
        let reports: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                let mut v: serde_json::Value =
                    serde_json::from_str(&r.report.to_json()).expect("report is JSON");
                v["expected"] =
                    serde_json::json!({ "pe": r.row.pe, "pc": r.row.pc, "anchor": r.row.anchor });
                v
            })
            .collect();
        serde_json::to_string_pretty(&reports).expect("table serializes") + "\n"
    } else {
        render_table(&rows)
    };
    emit(out, None, &text)?;
    Ok(ExitStatus::verdict(
        rows.iter().filter(|r| r.row.anchor).all(|r| r.matches()),
    ))
}

fn compose_cmd(
    p1: &Path,
    p2: &Path,
    ctx: Option<&Path>,
    output: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<ExitStatus, Failure> {
    let (x1, x2) = (load_protocol(p1)?, load_protocol(p2)?);
    let composed = compose(&x1, &x2, &context(ctx)?);
    if composed.is_empty() {
        let _ = writeln!(
            err,
            "{} and {} do not compose in this order",
            x1.name, x2.name
        );
        return Ok(ExitStatus::NO);
    }
    emit(out, output, &serialize_protocol(&composed))?;
    Ok(ExitStatus::OK)
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<ProtocolModel>, Failure> {
    paths.iter().map(|p| Ok(load_protocol(p)?)).collect()
}

fn compose_seq(
    seq1: &[PathBuf],
    seq2: &[PathBuf],
    ctx: Option<&Path>,
    output: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<ExitStatus, Failure> {
    let ctx = context(ctx)?;
    let s1 = ProtocolSequence::new(load_all(seq1)?, ctx.clone());
    let s2 = ProtocolSequence::new(load_all(seq2)?, ctx);
    match compose_sequences(&s1, &s2) {
        Ok(model) => {
            emit(out, output, &serialize_protocol(&model))?;
            Ok(ExitStatus::OK)
        }
        Err(SequenceError::Canon(e)) => Err(Failure::Input(e.to_string())),
        Err(e) => {
            let _ = writeln!(err, "{e}");
            Ok(ExitStatus::NO)
        }
    }
}

fn canon_cmd(
    json: bool,
    p: &Path,
    ctx: Option<&Path>,
    out: &mut dyn Write,
) -> Result<ExitStatus, Failure> {
    let x = load_protocol(p)?;
    let c = canonicalize(&x, &context(ctx)?).map_err(|e| Failure::Input(e.to_string()))?;
    let text = if json {
        let mut lines = Vec::new();
        for part in &c.participants {
            for chain in part.chains() {
                for (i, node) in chain.nodes.iter().enumerate() {
                    lines.push(serde_json::json!({
                        "classifier": chain.classifier.to_string(),
                        "participant": part.part,
                        "node": i,
                        "sign": node.sign.to_string(),
                        "term": node.term.to_string(),
                    }));
                }
            }
        }
        serde_json::to_string_pretty(&serde_json::json!({ "protocol": c.name, "nodes": lines }))
            .expect("canon serializes")
            + "\n"
    } else {
        c.to_string()
    };
    emit(out, None, &text)?;
    Ok(ExitStatus::OK)
}

fn oracle_cmd(
    json: bool,
    p1: &Path,
    p2: &Path,
    ctx: Option<&Path>,
    depth: usize,
    all: bool,
    out: &mut dyn Write,
) -> Result<ExitStatus, Failure> {
    let (x1, x2) = (load_protocol(p1)?, load_protocol(p2)?);
    let ctx = context(ctx)?;
    let bounds = OracleBounds {
        intruder_depth: depth,
        ..OracleBounds::default()
    };
    if all {
        let found = enumerate_replays(&x1, &x2, &ctx, &bounds)?;
        let text = if json {
            serde_json::to_string_pretty(&found).expect("replays serialize") + "\n"
        } else {
            let mut s = format!("{} distinct replays\n", found.len());
            for r in &found {
                let _ = writeln!(s, "  {} -> {}", r.origin, r.target);
            }
            s
        };
        emit(out, None, &text)?;
        return Ok(ExitStatus::verdict(found.is_empty()));
    }
    let trace = find_replay(&x1, &x2, &ctx, &bounds)?;
    let text = match (&trace, json) {
        (Some(t), true) => t.to_json() + "\n",
        (Some(t), false) => t.to_string(),
        (None, true) => "null\n".to_owned(),
        (None, false) => "no replay within bounds\n".to_owned(),
    };
    emit(out, None, &text)?;
    Ok(ExitStatus::verdict(trace.is_none()))
}

fn fmt_cmd(p: &Path, out: &mut dyn Write) -> Result<ExitStatus, Failure> {
    let text = protocompose::corpus::read_file(p)?;
    let model = parse_protocol_file(&text, p).map_err(|e| Failure::Input(e.to_string()))?;
    emit(out, None, &serialize_protocol(&model))?;
    Ok(ExitStatus::OK)
}

/// Runs the command line `argv` (program name first), writing reports to
/// `out` and diagnostics to `err`.
pub fn run_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
                ExitStatus::INPUT_ERROR
            } else {
                let _ = out.write_all(rendered.as_bytes());
                ExitStatus::OK
            };
        }
    };
    let json = cli.json;
    let result = match &cli.command {
        Command::Check { p1, p2, ctx, table } => match (table, p1, p2) {
            (Some(dir), ..) => check_table(json, dir, out),
            (None, Some(p1), Some(p2)) => check_pair(json, p1, p2, ctx.as_deref(), out),
            _ => Err(Failure::Input(
                "check needs two protocols or --table".into(),
            )),
        },
        Command::Compose {
            p1,
            p2,
            ctx,
            output,
        } => compose_cmd(p1, p2, ctx.as_deref(), output.as_deref(), out, err),
        Command::ComposeSeq {
            seq1,
            seq2,
            ctx,
            output,
        } => compose_seq(seq1, seq2, ctx.as_deref(), output.as_deref(), out, err),
        Command::Canon { p, ctx } => canon_cmd(json, p, ctx.as_deref(), out),
        Command::Oracle {
            p1,
            p2,
            ctx,
            depth,
            all,
        } => oracle_cmd(json, p1, p2, ctx.as_deref(), *depth, *all, out),
        Command::Fmt { p } => fmt_cmd(p, out),
    };
    match result {
        Ok(status) => status,
        Err(Failure::Input(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            ExitStatus::INPUT_ERROR
        }
        Err(Failure::Bound(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            ExitStatus::BOUND_EXCEEDED
        }
    }
}

/// Runs against the process's standard streams.
pub fn run(argv: &[String]) -> ExitStatus {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Convenience for tests: captured standard output and error.
pub fn run_captured(argv: &[&str]) -> (ExitStatus, String, String) {
    let argv: Vec<String> = argv.iter().map(|s| s.to_string()).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let status = run_with(&argv, &mut out, &mut err);
    (
        status,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}
