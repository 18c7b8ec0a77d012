//! `bpdmn` command-line tool.
//!
//! Exit codes: 0 ok, 1 model error, 2 I/O or parse error, 3 deadlock,
//! 4 step limit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bpdmn::codegen::{to_bpel, to_xpdl, CodegenError};
use bpdmn::expr::Value;
use bpdmn::format::{self, ParseOptions, Parsed, FILE_EXTENSION};
use bpdmn::patterns::{analyze, capability_matrix, render_matrix};
use bpdmn::render::{to_dot, RenderOptions};
use bpdmn::simulator::{self, Behaviors, Policy, Status, DEFAULT_MAX_STEPS};
use bpdmn::validator::{has_errors, validate, Diagnostic, Severity};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

const OK: u8 = 0;
const MODEL_ERROR: u8 = 1;
const IO_ERROR: u8 = 2;
const DEADLOCK: u8 = 3;
const STEP_LIMIT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "bpdmn",
    version,
    about = "Validate, translate, analyze and simulate BPDMN models"
)]
struct Cli {
    /// Emit line-delimited JSON records instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Treat unknown document keys as warnings.
    #[arg(long, global = true)]
    lenient: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model against the validation rules.
    Validate {
        path: PathBuf,
        /// Fail on warnings too.
        #[arg(long)]
        strict: bool,
    },
    /// Generate a BPEL or XPDL document.
    Translate {
        path: PathBuf,
        #[arg(long, value_enum)]
        to: Target,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Execute a model and print its trace.
    Simulate {
        path: PathBuf,
        /// Named scenario from the behaviors section.
        #[arg(long)]
        scenario: Option<String>,
        /// Start input as `object.variable=value`; repeatable.
        #[arg(long = "input", value_name = "PATH=VALUE")]
        inputs: Vec<String>,
        /// Behaviors file; defaults to the model's own section or a
        /// `<name>.behaviors.json` sidecar.
        #[arg(long)]
        behaviors: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u64,
        #[arg(long, value_enum, default_value_t = PolicyArg::SmallestId)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the capability matrix or the pattern instances in a model.
    Patterns {
        path: Option<PathBuf>,
        #[arg(long, conflicts_with = "path")]
        matrix: bool,
    },
    /// Write a Graphviz dot graph of the model.
    Render {
        path: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Leave data objects out of the graph.
        #[arg(long)]
        hide_data: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Bpel,
    Xpdl,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    SmallestId,
    Random,
}

/// A failure that ends the command with a message and an exit code.
struct Fail(u8, String);

type CmdResult = Result<u8, Fail>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { path, strict } => cmd_validate(&cli, path, *strict),
        Command::Translate { path, to, out } => cmd_translate(&cli, path, *to, out.as_deref()),
        Command::Simulate {
            path,
            scenario,
            inputs,
            behaviors,
            max_steps,
            policy,
            seed,
        } => {
            let policy = match policy {
                PolicyArg::SmallestId => Policy::SmallestId,
                PolicyArg::Random => Policy::Random { seed: *seed },
            };
            cmd_simulate(
                &cli,
                path,
                scenario.as_deref(),
                inputs,
                behaviors.as_deref(),
                *max_steps,
                policy,
            )
        }
        Command::Patterns { path, matrix } => cmd_patterns(&cli, path.as_deref(), *matrix),
        Command::Render {
            path,
            out,
            hide_data,
        } => cmd_render(&cli, path, out.as_deref(), *hide_data),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("bpdmn: {msg}");
            ExitCode::from(code)
        }
    }
}

/// `travel` also finds `travel.bpdmn.json`.
fn resolve(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    let mut with_ext = path.as_os_str().to_owned();
    with_ext.push(FILE_EXTENSION);
    let candidate = PathBuf::from(with_ext);
    if candidate.exists() {
        candidate
    } else {
        path.to_path_buf()
    }
}

fn load(cli: &Cli, path: &Path) -> Result<(PathBuf, Parsed), Fail> {
    let path = resolve(path);
    let text = fs::read_to_string(&path)
        .map_err(|e| Fail(IO_ERROR, format!("{}: {e}", path.display())))?;
    let parsed = format::parse_document(
        &text,
        ParseOptions {
            lenient: cli.lenient,
        },
    )
    .map_err(|e| Fail(IO_ERROR, format!("{}:{e}", path.display())))?;
    for w in &parsed.warnings {
        eprintln!("{}:{w}", path.display());
    }
    Ok((path, parsed))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Fail> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Fail(IO_ERROR, format!("{}: {e}", p.display()))),
        None => match io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Fail(IO_ERROR, e.to_string())),
            _ => Ok(()),
        },
    }
}

fn print_diagnostics(
    cli: &Cli,
    path: &Path,
    parsed: &Parsed,
    diags: &[Diagnostic],
) -> Result<(), Fail> {
    let mut out = String::new();
    for d in diags {
        let span = parsed.spans.get(&d.element);
        if cli.json {
            writeln!(
                out,
                "{}",
                json!({
                    "rule": d.rule,
                    "severity": d.severity,
                    "element": d.element,
                    "message": d.message,
                    "line": span.map(|s| s.line),
                    "column": span.map(|s| s.column),
                })
            )
        } else {
            match span {
                Some(s) => writeln!(out, "{}:{s}: {d}", path.display()),
                None => writeln!(out, "{}: {d}", path.display()),
            }
        }
        .expect("writing to a String");
    }
    write_output(None, &out)
}

fn cmd_validate(cli: &Cli, path: &Path, strict: bool) -> CmdResult {
    let (path, parsed) = load(cli, path)?;
    let diags = validate(&parsed.document.diagram);
    print_diagnostics(cli, &path, &parsed, &diags)?;
    let warned = diags.iter().any(|d| d.severity == Severity::Warning);
    if has_errors(&diags) || (strict && warned) {
        Ok(MODEL_ERROR)
    } else {
        Ok(OK)
    }
}

fn cmd_translate(cli: &Cli, path: &Path, to: Target, out: Option<&Path>) -> CmdResult {
    let (path, parsed) = load(cli, path)?;
    let d = &parsed.document.diagram;
    let result = match to {
        Target::Bpel => to_bpel(d),
        Target::Xpdl => to_xpdl(d),
    };
    match result {
        Ok(output) => {
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            write_output(out, &output.text)?;
            Ok(OK)
        }
        Err(CodegenError::Invalid(diags)) => {
            print_diagnostics(cli, &path, &parsed, &diags)?;
            Ok(MODEL_ERROR)
        }
    }
}

/// Reads `true`, `false`, numbers and JSON strings; anything else is a
/// plain string.
fn parse_value(s: &str) -> Value {
    match serde_json::from_str::<serde_json::Value>(s) {
        Ok(serde_json::Value::Bool(b)) => Value::Bool(b),
        Ok(serde_json::Value::Number(n)) => n.as_f64().map_or(Value::Str(s.into()), Value::Num),
        Ok(serde_json::Value::String(t)) => Value::Str(t),
        _ => Value::Str(s.to_string()),
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let stem = name.strip_suffix(FILE_EXTENSION).unwrap_or(name);
    path.with_file_name(format!("{stem}.behaviors.json"))
}

fn load_behaviors(
    path: &Path,
    parsed: &Parsed,
    explicit: Option<&Path>,
) -> Result<Behaviors, Fail> {
    let read = |p: &Path| -> Result<Behaviors, Fail> {
        let text =
            fs::read_to_string(p).map_err(|e| Fail(IO_ERROR, format!("{}: {e}", p.display())))?;
        format::parse_behaviors(&text).map_err(|e| Fail(IO_ERROR, format!("{}:{e}", p.display())))
    };
    if let Some(p) = explicit {
        return read(p);
    }
    if let Some(b) = &parsed.document.behaviors {
        return Ok(b.clone());
    }
    let side = sidecar(path);
    if side.exists() {
        return read(&side);
    }
    Ok(Behaviors::default())
}

fn cmd_simulate(
    cli: &Cli,
    path: &Path,
    scenario: Option<&str>,
    raw_inputs: &[String],
    behaviors: Option<&Path>,
    max_steps: u64,
    policy: Policy,
) -> CmdResult {
    let (path, parsed) = load(cli, path)?;
    let d = &parsed.document.diagram;
    let diags = validate(d);
    if has_errors(&diags) {
        print_diagnostics(cli, &path, &parsed, &diags)?;
        return Ok(MODEL_ERROR);
    }
    let behaviors = load_behaviors(&path, &parsed, behaviors)?;

    let mut inputs: BTreeMap<String, Value> = BTreeMap::new();
    let chosen = match scenario {
        Some(name) => Some(
            behaviors
                .scenario(name)
                .ok_or_else(|| Fail(MODEL_ERROR, format!("unknown scenario `{name}`")))?,
        ),
        None if raw_inputs.is_empty() => behaviors.scenarios.first(),
        None => None,
    };
    if let Some(s) = chosen {
        inputs.extend(s.inputs.iter().cloned());
    }
    for raw in raw_inputs {
        let (k, v) = raw
            .split_once('=')
            .ok_or_else(|| Fail(IO_ERROR, format!("--input `{raw}` is not PATH=VALUE")))?;
        inputs.insert(k.to_string(), parse_value(v));
    }

    let run = simulator::run(d, &behaviors, &inputs, max_steps, policy)
        .map_err(|e| Fail(MODEL_ERROR, e.to_string()))?;
    let mut out = String::new();
    if cli.json {
        out.push_str(&run.trace.to_json_lines());
        out.push_str(&format!(
            "{}\n",
            json!({"status": run.status, "steps": run.state.step_count})
        ));
    } else {
        out.push_str(&run.trace.to_text());
        out.push_str(&format!(
            "status: {} after {} steps\n",
            run.status, run.state.step_count
        ));
    }
    write_output(None, &out)?;
    Ok(match run.status {
        Status::Completed => OK,
        Status::Deadlocked => DEADLOCK,
        Status::StepLimit => STEP_LIMIT,
    })
}

fn cmd_patterns(cli: &Cli, path: Option<&Path>, matrix: bool) -> CmdResult {
    let path = match (path, matrix) {
        (_, true) | (None, false) => {
            let mut out = String::new();
            if cli.json {
                for row in capability_matrix() {
                    out.push_str(&format!(
                        "{}\n",
                        json!({
                            "pattern": row.pattern,
                            "name": row.pattern.name(),
                            "bpmn": row.bpmn,
                            "bpdmn": row.bpdmn,
                        })
                    ));
                }
            } else {
                out = render_matrix();
            }
            write_output(None, &out)?;
            return Ok(OK);
        }
        (Some(p), false) => p,
    };
    let (path, parsed) = load(cli, path)?;
    match analyze(&parsed.document.diagram) {
        Ok(report) => {
            let mut out = String::new();
            if cli.json {
                for p in report.detected() {
                    for inst in report.get(p) {
                        out.push_str(&format!("{}\n", json!({"pattern": p, "instance": inst})));
                    }
                }
            } else {
                out = report.render();
            }
            write_output(None, &out)?;
            Ok(OK)
        }
        Err(invalid) => {
            print_diagnostics(cli, &path, &parsed, &invalid.0)?;
            Ok(MODEL_ERROR)
        }
    }
}

fn cmd_render(cli: &Cli, path: &Path, out: Option<&Path>, hide_data: bool) -> CmdResult {
    let (_, parsed) = load(cli, path)?;
    let dot = to_dot(&parsed.document.diagram, RenderOptions { hide_data });
    write_output(out, &dot)?;
    Ok(OK)
}
