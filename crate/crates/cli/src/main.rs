use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Parser, Subcommand};

use imp_core::ast::Ast;
use imp_core::checks::lint;
use imp_core::error::Error;
use imp_core::interp::{Interpreter, RuntimeEnv};
use imp_core::parse::parse_program;
use imp_core::source::{encode_program, parse_source};
use imp_core::subst::freshen;
use imp_core::systemf::{elaborate_checked, run_pipeline};
use imp_core::typecheck::Checker;
use imp_core::Program;

/// Typecheck, elaborate and run programs in the implicit calculus.
#[derive(Parser)]
#[command(name = "imp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print resolution steps.
    #[arg(long, global = true)]
    trace: bool,
    /// Evaluate System F terms with the small-step reducer.
    #[arg(long, global = true)]
    smallstep: bool,
    /// Print the parsed program as JSON instead of running the command.
    #[arg(long, global = true)]
    json: bool,
    /// Make `lint` exit with status 4 when it reports anything.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Typecheck and print the type.
    Check { file: PathBuf },
    /// Print the elaborated System F term and its type.
    Elab { file: PathBuf },
    /// Elaborate and evaluate.
    Run { file: PathBuf },
    /// Evaluate with the direct operational semantics.
    Interp { file: PathBuf },
    /// Run both evaluators and compare the results.
    Diff { file: PathBuf },
    /// Encode a source program and evaluate it.
    SrcRun { file: PathBuf },
    /// Print the encoding of a source program.
    SrcElab { file: PathBuf },
    /// Report coherence, termination and overlap diagnostics.
    Lint { file: PathBuf },
}

// A closed pipe on stdout is not an error worth reporting.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

const TYPE_ERROR: u8 = 1;
const PARSE_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;
const LINT_FINDINGS: u8 = 4;

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Parse(_) => PARSE_ERROR,
        Error::Type(_) => TYPE_ERROR,
        Error::Runtime(_) => RUNTIME_ERROR,
    }
}

fn report(e: &Error) -> u8 {
    match e {
        Error::Parse(p) => eprintln!("error[{}]: {p}", p.code()),
        e => eprintln!("{e}"),
    }
    exit_for(e)
}

fn load(path: &Path) -> anyhow::Result<Result<Ast, Error>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Ok(serde_json::from_str(&text).with_context(|| format!("{} is not a program dump", path.display()))?),
        Some("src") => parse_source(&text).map(Ast::Source).map_err(Error::from),
        _ => parse_program(&text).map(Ast::Core).map_err(Error::from),
    })
}

/// The λ⇒ program for a file, encoding source programs first.
fn core(ast: Ast) -> Result<Program, Error> {
    match ast {
        Ast::Core(p) => Ok(p),
        Ast::Source(s) => Ok(encode_program(&s)?.program),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(PARSE_ERROR)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let file = match &cli.command {
        Command::Check { file }
        | Command::Elab { file }
        | Command::Run { file }
        | Command::Interp { file }
        | Command::Diff { file }
        | Command::SrcRun { file }
        | Command::SrcElab { file }
        | Command::Lint { file } => file,
    };
    let ast = match load(file)? {
        Ok(ast) => ast,
        Err(e) => return Ok(report(&e)),
    };
    if cli.json {
        out!("{}", serde_json::to_string_pretty(&ast)?);
        return Ok(0);
    }
    let wants_source = matches!(cli.command, Command::SrcRun { .. } | Command::SrcElab { .. });
    if wants_source && !matches!(ast, Ast::Source(_)) {
        bail!("{} is not a source program", file.display());
    }
    Ok(match command(cli, ast) {
        Ok(code) => code,
        Err(e) => report(&e),
    })
}

fn command(cli: &Cli, ast: Ast) -> Result<u8, Error> {
    match &cli.command {
        Command::Check { .. } => {
            let typed = Checker::check_program(&core(ast)?)?;
            out!("{}", typed.ty);
            if cli.trace {
                for q in &typed.queries {
                    eprintln!("{}:", q.location);
                    eprint!("{}", q.trace.render());
                }
            }
        }
        Command::Elab { .. } => {
            let (_, fty, term) = elaborate_checked(&core(ast)?)?;
            out!("{term}");
            out!(": {fty}");
        }
        Command::Run { .. } | Command::SrcRun { .. } => {
            let out = run_pipeline(&core(ast)?, cli.smallstep)?;
            out!("{}", out.value);
        }
        Command::Interp { .. } => {
            let v = interpret(&core(ast)?, cli.trace)?;
            out!("{v}");
        }
        Command::Diff { .. } => {
            let p = core(ast)?;
            let elaborated = run_pipeline(&p, cli.smallstep)?.value.to_string();
            let direct = interpret(&p, cli.trace)?;
            if elaborated == direct {
                out!("agree: {elaborated}");
            } else {
                out!("disagree: run gives {elaborated}, interp gives {direct}");
                return Ok(RUNTIME_ERROR);
            }
        }
        Command::SrcElab { .. } => {
            let Ast::Source(s) = ast else { unreachable!() };
            let enc = encode_program(&s)?;
            out!("{}", enc.program);
            out!(": {}", enc.ty);
        }
        Command::Lint { .. } => {
            let findings = lint(&core(ast)?)?;
            for f in &findings {
                out!("{f}");
            }
            if cli.strict && !findings.is_empty() {
                return Ok(LINT_FINDINGS);
            }
        }
    }
    Ok(0)
}

fn interpret(p: &Program, trace: bool) -> Result<String, Error> {
    Checker::check_program(p)?;
    let p = freshen(p);
    let mut it = if trace { Interpreter::with_trace() } else { Interpreter::new() };
    let result = it.eval(&RuntimeEnv::new(), &p.body);
    for line in it.trace() {
        eprintln!("{line}");
    }
    Ok(result?.to_string())
}
