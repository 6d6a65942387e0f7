use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cstar_desk_cli::doc::{JobDocument, Options, Report, Status};
use cstar_desk_cli::{run_document, verify};

/// Directory for reports when `--out` is absent.
const OUT_DIR_ENV: &str = "CSTAR_DESK_OUT_DIR";

#[derive(Parser)]
#[command(name = "cstar-desk", version, about = "Finite-stage C*-algebra computations driven by JSON-lines job documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Uniform grid size for sampled functions (2..=65537).
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Number of stages to build or the stage cap (1..=64).
    #[arg(long, global = true)]
    stages: Option<usize>,
    /// Tolerance, decimal or rational.
    #[arg(long, global = true)]
    tol: Option<String>,
    /// Search bounds as key=value pairs: max_len, depth, dense_depth, max_g, node_budget.
    #[arg(long, global = true)]
    bounds: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report path; CSV goes next to it with a .csv extension.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

/// Input document path; stdin when absent or `-`.
#[derive(Args)]
struct Input {
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// *-polynomials and codes of matrix tuples.
    Nc { verb: NcVerb, #[command(flatten)] input: Input },
    /// UHF sequences.
    Uhf { verb: UhfVerb, #[command(flatten)] input: Input },
    /// Bi-embeddability of the sequence algebras.
    Af { verb: AfVerb, #[command(flatten)] input: Input },
    /// Order-unit maps, grid systems and stage simplexes.
    Simplex { verb: SimplexVerb, #[command(flatten)] input: Input },
    /// The AI-algebra stage recursion.
    Ai { verb: AiVerb, #[command(flatten)] input: Input },
    /// Approximate intertwining of matrix towers.
    Intertwine { verb: IntertwineVerb, #[command(flatten)] input: Input },
    /// Runs a document that names its own verb.
    Run { #[command(flatten)] input: Input },
    /// Runs the randomized property suites.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum NcVerb {
    Eval,
    Xicode,
    Gns,
}

#[derive(Clone, Copy, ValueEnum)]
enum UhfVerb {
    Iso,
    Embed,
    K0,
}

#[derive(Clone, Copy, ValueEnum)]
enum AfVerb {
    Biembed,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimplexVerb {
    Convert,
    Stage,
    Factor,
    Ppu,
}

#[derive(Clone, Copy, ValueEnum)]
enum AiVerb {
    Sigma,
    Approx,
    Build,
    K0,
    Cert,
    Tracecheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntertwineVerb {
    Run,
    Limit,
}

fn name<V: ValueEnum>(v: V) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_owned()
}

fn read_input(input: &Input) -> std::io::Result<String> {
    match input.input.as_deref() {
        None => read_stdin(),
        Some(p) if p == Path::new("-") => read_stdin(),
        Some(p) => std::fs::read_to_string(p),
    }
}

fn read_stdin() -> std::io::Result<String> {
    let mut s = String::new();
    std::io::stdin().read_to_string(&mut s)?;
    Ok(s)
}

/// Parses the document and runs it; `verb` is `None` for `run`.
fn job(verb: Option<String>, input: &Input, flags: &Options) -> Report {
    let label = verb.clone().unwrap_or_else(|| "run".into());
    let text = match read_input(input) {
        Ok(t) => t,
        Err(e) => return Report::failed(&label, Status::ParseError, format!("cannot read input: {e}")),
    };
    let doc = match JobDocument::parse(&text) {
        Ok(d) => d,
        Err(e) => return Report::failed(&label, Status::ParseError, e.to_string()),
    };
    let verb = match (verb, doc.verb.clone()) {
        (Some(v), Some(d)) if v != d => {
            return Report::failed(&v, Status::ParseError, format!("document is for `{d}`, not `{v}`"));
        }
        (Some(v), _) | (None, Some(v)) => v,
        (None, None) => return Report::failed(&label, Status::ParseError, "document names no verb".into()),
    };
    run_document(&verb, &doc, flags)
}

fn write(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)
}

fn emit(report: &Report, out: Option<PathBuf>) -> std::io::Result<()> {
    let target = out.or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(|dir| PathBuf::from(dir).join(format!("{}.jsonl", report.verb.replace(' ', "-"))))
    });
    match target {
        None => {
            print!("{}", report.to_text(true));
            Ok(())
        }
        Some(path) => {
            write(&path, &report.to_text(false))?;
            if let Some(csv) = &report.csv {
                write(&path.with_extension("csv"), csv)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let f = cli.flags;
    let flags = Options { grid: f.grid, stages: f.stages, tol: f.tol, bounds: f.bounds, seed: f.seed };
    let report = match &cli.command {
        Command::Nc { verb, input } => job(Some(format!("nc {}", name(*verb))), input, &flags),
        Command::Uhf { verb, input } => job(Some(format!("uhf {}", name(*verb))), input, &flags),
        Command::Af { verb, input } => job(Some(format!("af {}", name(*verb))), input, &flags),
        Command::Simplex { verb, input } => job(Some(format!("simplex {}", name(*verb))), input, &flags),
        Command::Ai { verb, input } => job(Some(format!("ai {}", name(*verb))), input, &flags),
        Command::Intertwine { verb, input } => job(Some(format!("intertwine {}", name(*verb))), input, &flags),
        Command::Run { input } => job(None, input, &flags),
        Command::Verify => match flags.validate() {
            Ok(()) => verify(&flags),
            Err(e) => Report::failed("verify", Status::ParseError, e.to_string()),
        },
    };
    if let Err(e) = emit(&report, f.out) {
        eprintln!("cstar-desk: cannot write the report: {e}");
        return ExitCode::from(2);
    }
    if let Some(m) = &report.message {
        eprintln!("cstar-desk: {}: {m}", report.status.name());
    }
    ExitCode::from(report.exit_code() as u8)
}
