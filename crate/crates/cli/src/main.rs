use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mbtgen::emit::{self, ActionScript, GenerationReport, ReportFormat, ScriptFormat};
use mbtgen::explorer::DEFAULT_GLOBAL_CAP;
use mbtgen::io::{self, ControlDefinition, ModelDocument};
use mbtgen::model::{self, SystemModel, Violation};
use mbtgen::{ExplorationBound, ExploreError, ExploreOptions, ReceivePolicy, Semantics};

const EXIT_INVALID: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_OVERWRITE: u8 = 4;
const EXIT_VERIFY: u8 = 5;

/// Generate test cases from composed view state machines.
#[derive(Parser)]
#[command(name = "mbtgen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model and list its violations.
    Validate(Common),
    /// Explore the model and write one script per test case plus reports.
    Generate(Generate),
    /// Write the PROMELA rendering of the model to model.pml.
    EmitPromela(Emit),
}

#[derive(Args)]
struct Common {
    /// Model file (.xml, or .json for the JSON mirror).
    #[arg(long)]
    model: PathBuf,
    /// Directory holding the views' controls files [default: <model dir>/controls].
    #[arg(long)]
    controls_dir: Option<PathBuf>,
}

#[derive(Args)]
struct Bounds {
    /// Labelled transitions allowed per device.
    #[arg(long, default_value_t = 8)]
    max_transitions: usize,
    /// Stop with exit code 3 after this many search nodes.
    #[arg(long, default_value_t = DEFAULT_GLOBAL_CAP)]
    global_cap: u64,
}

#[derive(Args)]
struct Emit {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    bounds: Bounds,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Strict,
    Relaxed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Uiauto,
    Promela,
}

#[derive(Args)]
struct Generate {
    #[command(flatten)]
    emit: Emit,
    #[arg(long, value_enum, default_value = "strict")]
    policy: Policy,
    /// Keep one representative per class of reorderings of independent steps.
    #[arg(long)]
    reduce: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "json")]
    format: Vec<Format>,
    /// Only emit traces in which every device finished.
    #[arg(long)]
    require_all_finished: bool,
    /// Also emit every prefix cut short by the bound.
    #[arg(long)]
    emit_truncated: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Replay every script against the model after writing it.
    #[arg(long)]
    verify: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(c) => validate(&c),
        Command::Generate(g) => generate(&g),
        Command::EmitPromela(e) => emit_promela(&e),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("mbtgen: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn load_document(common: &Common) -> Outcome<ModelDocument> {
    let text = read(&common.model)?;
    io::parse_model_file(&common.model, &text)
        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", common.model.display())))
}

fn load_controls(common: &Common, doc: &ModelDocument) -> Outcome<BTreeMap<String, ControlDefinition>> {
    let dir = match &common.controls_dir {
        Some(d) => d.clone(),
        None => common.model.parent().unwrap_or_else(|| Path::new(".")).join("controls"),
    };
    let mut out = BTreeMap::new();
    for (view, path) in io::controls_paths(doc, &dir) {
        let text = read(&path)?;
        let c = io::parse_controls(&text).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
        out.insert(view, c);
    }
    Ok(out)
}

/// Where a violation points to in the document, when it names transitions.
fn location(model: &SystemModel, v: &Violation) -> String {
    let Violation::Determinism {
        machine, state, event, ..
    } = v
    else {
        return String::new();
    };
    let ids: Vec<String> = model
        .machine(machine)
        .into_iter()
        .flat_map(|m| &m.transitions)
        .filter(|t| &t.source == state && &t.event.name == event)
        .filter_map(|t| t.origin.as_ref())
        .map(|o| format!("{}:{}", o.view, o.id))
        .collect();
    if ids.is_empty() {
        String::new()
    } else {
        format!(" at transitions {}", ids.join(", "))
    }
}

fn print_violations(model: &SystemModel, violations: &[Violation]) {
    for v in violations {
        say!("{v}{}", location(model, v));
    }
}

/// Lowers, validates and binds; prints violations and fails with exit 1 on errors.
fn load_model(common: &Common) -> Outcome<SystemModel> {
    let doc = load_document(common)?;
    let mut model = io::lower_structure(&doc).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
    let violations = model::validate_system(&model);
    if model::errors(&violations).next().is_some() {
        print_violations(&model, &violations);
        let n = model::errors(&violations).count();
        return Err(Failure::new(
            EXIT_INVALID,
            format!("model is invalid ({n} violation(s))"),
        ));
    }
    let controls = load_controls(common, &doc)?;
    io::bind_controls(&doc, &mut model, &controls).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
    for v in violations.iter().filter(|v| v.is_warning()) {
        eprintln!("{v}");
    }
    Ok(model)
}

fn validate(common: &Common) -> Outcome<()> {
    load_model(common)?;
    say!("{}: ok", common.model.display());
    Ok(())
}

fn bound(b: &Bounds) -> Outcome<ExplorationBound> {
    ExplorationBound::new(b.max_transitions).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))
}

fn refuse_existing(paths: &[PathBuf]) -> Outcome<()> {
    if let Some(p) = paths.iter().find(|p| p.exists()) {
        return Err(Failure::new(
            EXIT_OVERWRITE,
            format!("{} exists; pass --force to overwrite", p.display()),
        ));
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Outcome<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", dir.display())))
}

fn emit_promela(e: &Emit) -> Outcome<()> {
    let model = load_model(&e.common)?;
    let bound = bound(&e.bounds)?;
    let path = e.out.join("model.pml");
    if !e.force {
        refuse_existing(std::slice::from_ref(&path))?;
    }
    create_dir(&e.out)?;
    write(&path, &emit::emit_promela(&model, &bound))?;
    say!("{}", path.display());
    Ok(())
}

/// Earlier test_NNNN files in `dir`.
fn old_scripts(dir: &Path) -> Vec<PathBuf> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut out: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("test_") && (n.ends_with(".json") || n.ends_with(".java")))
        })
        .collect();
    out.sort();
    out
}

fn generate(g: &Generate) -> Outcome<()> {
    let e = &g.emit;
    let model = load_model(&e.common)?;
    let mut bound = bound(&e.bounds)?;
    bound.require_all_finished = g.require_all_finished;
    bound.emit_truncated = g.emit_truncated;
    let policy = match g.policy {
        Policy::Strict => ReceivePolicy::Strict,
        Policy::Relaxed => ReceivePolicy::Relaxed,
    };
    let opts = ExploreOptions::new(bound)
        .with_policy(policy)
        .with_reduction(g.reduce)
        .with_jobs(g.jobs.max(1))
        .with_global_cap(e.bounds.global_cap);

    let mut fixed = vec![e.out.join("report.csv"), e.out.join("report.json")];
    if g.format.contains(&Format::Promela) {
        fixed.push(e.out.join("model.pml"));
    }
    let old = old_scripts(&e.out);
    if !e.force {
        refuse_existing(&fixed)?;
        refuse_existing(&old)?;
    }

    let sem = Semantics::new(&model).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
    let started = Instant::now();
    let result = match mbtgen::explore_multi(&sem, &opts) {
        Ok(r) => r,
        Err(ExploreError::CapExceeded { cap }) => {
            return Err(Failure::new(
                EXIT_CAP,
                format!("global cap of {cap} search nodes reached; nothing written"),
            ))
        }
        Err(err) => return Err(Failure::new(EXIT_INVALID, err.to_string())),
    };
    let elapsed = started.elapsed().as_secs_f64();

    let mut scripts = Vec::with_capacity(result.test_cases.len());
    for tc in &result.test_cases {
        let s = ActionScript::build(tc, &model, bound.max_transitions_per_device, policy)
            .map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
        scripts.push(s);
    }

    create_dir(&e.out)?;
    for p in &old {
        fs::remove_file(p).map_err(|err| Failure::new(EXIT_IO, format!("{}: {err}", p.display())))?;
    }
    let width = result.test_cases.len().to_string().len().max(4);
    for (i, (tc, script)) in result.test_cases.iter().zip(&scripts).enumerate() {
        let stem = format!("test_{:0width$}", i + 1);
        if g.format.contains(&Format::Json) {
            let text = script.to_json().map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
            write(&e.out.join(format!("{stem}.json")), &text)?;
        }
        if g.format.contains(&Format::Uiauto) {
            let text = emit::emit_script(
                tc,
                &model,
                bound.max_transitions_per_device,
                policy,
                ScriptFormat::UiAuto,
            )
            .map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
            write(&e.out.join(format!("{stem}.java")), &text)?;
        }
    }
    if g.format.contains(&Format::Promela) {
        write(&e.out.join("model.pml"), &emit::emit_promela(&model, &bound))?;
    }

    let devices = model.devices.iter().map(|d| d.id.clone()).collect();
    let report = GenerationReport::from_result(devices, bound.max_transitions_per_device, &result, elapsed);
    for (name, format) in [("report.csv", ReportFormat::Csv), ("report.json", ReportFormat::Json)] {
        let text = emit::emit_report(&report, format).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
        write(&e.out.join(name), &text)?;
    }

    if g.verify {
        verify(&model, &e.out, &scripts, g.format.contains(&Format::Json), width)?;
    }
    let table = emit::emit_report(&report, ReportFormat::Text).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    say!("{}", table.trim_end());
    say!("wrote {} test case(s) to {}", scripts.len(), e.out.display());
    Ok(())
}

/// Replays every script; reads them back from disk when they were written as JSON.
fn verify(model: &SystemModel, out: &Path, scripts: &[ActionScript], on_disk: bool, width: usize) -> Outcome<()> {
    for (i, built) in scripts.iter().enumerate() {
        let name = format!("test_{:0width$}.json", i + 1);
        let script = if on_disk {
            let text = read(&out.join(&name))?;
            ActionScript::from_json(&text).map_err(|e| Failure::new(EXIT_VERIFY, format!("{name}: {e}")))?
        } else {
            built.clone()
        };
        mbtgen::replay::replay(model, &script).map_err(|e| Failure::new(EXIT_VERIFY, format!("{name}: {e}")))?;
    }
    say!("verified {} script(s)", scripts.len());
    Ok(())
}
