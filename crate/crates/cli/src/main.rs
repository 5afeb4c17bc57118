mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use hqb::assert::{check_equiv, check_triple, AssertError, HoareTriple, Sidecar, Verdict, DEFAULT_PRECISION};
use hqb::cases;
use hqb::hps::Hps;
use hqb::lang::{compile_str, pretty, qasm, typecheck, LangError, TypedProg};
use hqb::rewrite::Strategy;
use hqb::semantics::{exec, ExecContext, NormalizePolicy};

use report::RunReport;

const PARSE: u8 = 1;
const TYPE: u8 = 2;
const RUNTIME: u8 = 3;
const INCONCLUSIVE: u8 = 4;
const ASSERTION: u8 = 5;

#[derive(Parser)]
#[command(name = "hqb", version, about = "Hybrid path-sum symbolic execution for hybrid quantum programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Normalize {
    Off,
    Gate,
    Stmt,
}

impl From<Normalize> for NormalizePolicy {
    fn from(n: Normalize) -> NormalizePolicy {
        match n {
            Normalize::Off => NormalizePolicy::Off,
            Normalize::Gate => NormalizePolicy::AfterGate,
            Normalize::Stmt => NormalizePolicy::AfterStatement,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct ExecOpts {
    /// Rewrite budget per normalization.
    #[arg(long, default_value_t = Strategy::default().fuel)]
    fuel: usize,
    #[arg(long, value_enum, default_value = "stmt")]
    normalize: Normalize,
}

impl ExecOpts {
    fn context(&self) -> ExecContext {
        let mut ctx = ExecContext::with_policy(self.normalize.into());
        ctx.fuel = self.fuel;
        ctx
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a program symbolically and print the final path-sum.
    Run {
        file: PathBuf,
        /// Initial path-sum (JSON).
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        opts: ExecOpts,
        /// Write the report as JSON (`-` for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check a program against an assertion file.
    Check {
        file: PathBuf,
        #[arg(long = "assert")]
        assertion: PathBuf,
        /// Initial path-sum (JSON), overriding the assertion file's `pre`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        opts: ExecOpts,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Decide whether two unitary programs are equivalent.
    Equiv {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        opts: ExecOpts,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a case-study suite and print one report row per case.
    Bench {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 1)]
        scale: u32,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Translate OpenQASM 2.0 into native syntax.
    QasmImport {
        file: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Translate a native program into OpenQASM 2.0.
    QasmExport {
        file: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

impl From<LangError> for Failure {
    fn from(e: LangError) -> Failure {
        let code = match e {
            LangError::Parse(_) => PARSE,
            LangError::Type(_) => TYPE,
        };
        fail(code, e.to_string())
    }
}

impl From<AssertError> for Failure {
    fn from(e: AssertError) -> Failure {
        let code = match e {
            AssertError::Exec(_) => RUNTIME,
            _ => INCONCLUSIVE,
        };
        fail(code, e.to_string())
    }
}

fn precision() -> Result<u32, Failure> {
    match std::env::var("HQB_PRECISION") {
        Ok(s) => match s.trim().parse::<u32>() {
            Ok(p) if (8..=4096).contains(&p) => Ok(p),
            _ => Err(fail(PARSE, format!("HQB_PRECISION must be an integer in 8..=4096, got `{s}`"))),
        },
        Err(_) => Ok(DEFAULT_PRECISION),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(PARSE, format!("{}: {e}", path.display())))
}

/// Writes to stdout, ignoring a closed pipe.
fn say(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", text.trim_end());
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) if p != Path::new("-") => std::fs::write(p, text).map_err(|e| fail(RUNTIME, format!("{}: {e}", p.display()))),
        _ => {
            say(text);
            Ok(())
        }
    }
}

fn is_qasm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("qasm"))
}

fn load(path: &Path) -> Result<TypedProg, Failure> {
    let src = read(path)?;
    if is_qasm(path) {
        let p = qasm::import(&src).map_err(|e| fail(PARSE, e.to_string()))?;
        return typecheck(p).map_err(|e| fail(TYPE, format!("type error: {e}")));
    }
    Ok(compile_str(&src)?)
}

fn load_hps(path: &Path) -> Result<Hps, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| fail(PARSE, format!("{}: {e}", path.display())))
}

fn name_of(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn verdict_code(v: &Verdict) -> u8 {
    match v {
        Verdict::Holds => 0,
        Verdict::Fails(_) => ASSERTION,
        Verdict::Inconclusive(_) => INCONCLUSIVE,
    }
}

/// Prints the state and report, or writes them as JSON.
fn emit(state: &Hps, r: &RunReport, json_out: Option<&Path>) -> Result<(), Failure> {
    match json_out {
        Some(p) => {
            let v = json!({ "report": r.to_json(), "state": state.to_json() });
            let text = serde_json::to_string_pretty(&v).expect("serializable");
            if p != Path::new("-") {
                say(&format!("state: {state}\n{}", r.text()));
            }
            write_out(Some(p), &text)
        }
        None => {
            say(&format!("state: {state}\n{}", r.text()));
            Ok(())
        }
    }
}

fn run_cmd(file: &Path, input: Option<&Path>, opts: &ExecOpts, json_out: Option<&Path>) -> Result<u8, Failure> {
    let t = load(file)?;
    let pre = match input {
        Some(p) => load_hps(p)?,
        None => Hps::empty(),
    };
    let mut ctx = opts.context();
    let start = Instant::now();
    let h = exec(&t, &pre, &mut ctx).map_err(|e| fail(RUNTIME, e.to_string()))?;
    let r = RunReport::new(&name_of(file), &t.program, &h, std::mem::take(&mut ctx.trace), start.elapsed().as_secs_f64());
    emit(&h, &r, json_out)?;
    if r.rewrites.fuel_exhausted {
        eprintln!("normalization ran out of fuel");
        return Ok(INCONCLUSIVE);
    }
    Ok(0)
}

fn check_cmd(file: &Path, assertion: &Path, input: Option<&Path>, opts: &ExecOpts, json_out: Option<&Path>) -> Result<u8, Failure> {
    let prec = precision()?;
    let t = load(file)?;
    let v: serde_json::Value = serde_json::from_str(&read(assertion)?).map_err(|e| fail(PARSE, format!("{}: {e}", assertion.display())))?;
    let side = Sidecar::from_json(&v, prec).map_err(|e| fail(PARSE, format!("{}: {e}", assertion.display())))?;
    let pre = match input {
        Some(p) => load_hps(p)?,
        None => side.pre,
    };
    let triple = HoareTriple { pre, prog: t, post: side.post };
    let mut ctx = opts.context();
    let tr = check_triple(&triple, &mut ctx, prec)?;
    let mut rewrites = tr.exec_trace.clone();
    rewrites.extend(tr.check.trace.clone());
    let mut r = RunReport::new(&name_of(file), &triple.prog.program, &tr.result, rewrites, tr.exec_seconds + tr.check_seconds);
    let code = verdict_code(&tr.check.verdict);
    r.verdict = Some(tr.check);
    emit(&tr.result, &r, json_out)?;
    Ok(code)
}

fn equiv_cmd(a: &Path, b: &Path, opts: &ExecOpts, json_out: Option<&Path>) -> Result<u8, Failure> {
    let (pa, pb) = (load(a)?, load(b)?);
    let m = cases::miter(&pa.program, &pb.program).map_err(|e| fail(TYPE, e))?;
    let target = cases::identity_target(&m);
    let t = typecheck(m).map_err(|e| fail(TYPE, format!("type error: {e}")))?;
    let mut ctx = opts.context();
    let start = Instant::now();
    let h = exec(&t, &Hps::empty(), &mut ctx).map_err(|e| fail(RUNTIME, e.to_string()))?;
    let (verdict, trace) = check_equiv(&h, &target, &ctx.strategy());
    let mut rewrites = std::mem::take(&mut ctx.trace);
    rewrites.extend(trace.clone());
    let mut r = RunReport::new(&format!("{} ; {}^-1", name_of(a), name_of(b)), &t.program, &h, rewrites, start.elapsed().as_secs_f64());
    let code = verdict_code(&verdict);
    let line = match &verdict {
        Verdict::Holds => "equivalent".to_string(),
        Verdict::Fails(d) => format!("not equivalent: {d}"),
        Verdict::Inconclusive(d) => format!("inconclusive: {d}"),
    };
    if json_out == Some(Path::new("-")) {
        eprintln!("{line}");
    } else {
        say(&line);
    }
    r.verdict = Some(hqb::assert::Checked::leaf(verdict, trace));
    emit(&h, &r, json_out)?;
    Ok(code)
}

fn bench_cmd(suite: &str, scale: u32, format: Format, out: Option<&Path>) -> Result<u8, Failure> {
    let prec = precision()?;
    let specs = cases::suite(suite, scale).map_err(|e| fail(PARSE, format!("{e} (suites: {})", cases::SUITES.join(", "))))?;
    let mut reports = Vec::new();
    let mut code = 0;
    for c in &specs {
        let mut ctx = ExecContext::new();
        let tr = c.check(&mut ctx, prec)?;
        if !c.reproduced(&tr) {
            code = ASSERTION;
        }
        let mut rewrites = tr.exec_trace.clone();
        rewrites.extend(tr.check.trace.clone());
        let mut r = RunReport::new(&c.label(), &c.program.program, &tr.result, rewrites, tr.exec_seconds + tr.check_seconds);
        r.verdict = Some(tr.check);
        reports.push(r);
    }
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&reports.iter().map(|r| r.to_json()).collect::<Vec<_>>()).expect("serializable"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(RunReport::CSV_HEADER).map_err(|e| fail(RUNTIME, e.to_string()))?;
            for r in &reports {
                w.write_record(r.csv_row()).map_err(|e| fail(RUNTIME, e.to_string()))?;
            }
            String::from_utf8(w.into_inner().map_err(|e| fail(RUNTIME, e.to_string()))?).expect("utf-8")
        }
    };
    write_out(out, &text)?;
    Ok(code)
}

fn qasm_import_cmd(file: &Path, out: Option<&Path>) -> Result<u8, Failure> {
    let p = qasm::import(&read(file)?).map_err(|e| fail(PARSE, e.to_string()))?;
    let t = typecheck(p).map_err(|e| fail(TYPE, format!("type error: {e}")))?;
    write_out(out, &pretty::to_hqb(&t.program))?;
    Ok(0)
}

fn qasm_export_cmd(file: &Path, out: Option<&Path>) -> Result<u8, Failure> {
    let t = load(file)?;
    let text = qasm::export(&t.program).map_err(|e| fail(RUNTIME, e.to_string()))?;
    write_out(out, &text)?;
    Ok(0)
}

fn dispatch(cmd: &Cmd) -> Result<u8, Failure> {
    match cmd {
        Cmd::Run { file, input, opts, json } => run_cmd(file, input.as_deref(), opts, json.as_deref()),
        Cmd::Check { file, assertion, input, opts, json } => check_cmd(file, assertion, input.as_deref(), opts, json.as_deref()),
        Cmd::Equiv { a, b, opts, json } => equiv_cmd(a, b, opts, json.as_deref()),
        Cmd::Bench { suite, scale, format, out } => bench_cmd(suite, *scale, *format, out.as_deref()),
        Cmd::QasmImport { file, out } => qasm_import_cmd(file, out.as_deref()),
        Cmd::QasmExport { file, out } => qasm_export_cmd(file, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
