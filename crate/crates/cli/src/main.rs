//! `lqo`: batch front-end for generating LQO models, reducing them and inspecting the results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use lqo_core::diagnostics::{self, ErrorEvaluator, SweepRecord};
use lqo_core::io;
use lqo_core::models::ModelSpec;
use lqo_core::reducers::{self, BasisPolicy, Method, ReductionConfig};
use lqo_core::{Error, FrequencyBand, LqoSystem, RomSystem};

#[derive(Parser)]
#[command(
    name = "lqo",
    version,
    about = "Model order reduction for linear systems with quadratic outputs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a built-in benchmark model as a manifest plus Matrix Market files.
    Generate(GenerateArgs),
    /// Reduce a model and write the reduced model and a run report.
    Reduce(ReduceArgs),
    /// Evaluate full and reduced frequency responses on a grid and write CSV.
    Sweep(SweepArgs),
    /// H2 or band-limited H2 norm of a model, or of its error against a reduced model.
    Norm(NormArgs),
    /// First-order optimality residuals of a reduced model.
    Residuals(ResidualArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Illustrative,
    Advdiff,
    Fss,
}

#[derive(Args)]
struct GenerateArgs {
    model: Builtin,
    #[arg(long)]
    out: PathBuf,
    /// Base name of the written files (defaults to the model name).
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = 300)]
    nodes: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1000)]
    modes: usize,
    #[arg(long, default_value_t = 1)]
    inputs: usize,
    #[arg(long, default_value_t = 2)]
    outputs: usize,
    /// Number of states entering each quadratic output, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "20,40")]
    quad_counts: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    method: String,
    #[arg(long)]
    order: usize,
    /// Frequency band as LO:HI in rad/s.
    #[arg(long)]
    band: Option<String>,
    #[arg(long, default_value_t = 16)]
    nv: usize,
    #[arg(long, default_value_t = 30)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    eig_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the exact band logarithm instead of the bandpass approximation.
    #[arg(long)]
    exact_logm: bool,
    /// Compute optimality residuals after the run.
    #[arg(long)]
    diagnostics: bool,
    /// Fail when an iterate's Gramian loses rank instead of completing the basis.
    #[arg(long)]
    strict_rank: bool,
    /// Initial reduced model manifest for the iterative methods.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "rom")]
    name: String,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    rom: PathBuf,
    /// START:STOP:POINTS[:log|:lin], default spacing log.
    #[arg(long, default_value = "1e-1:1e2:200:log")]
    grid: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "sweep")]
    name: String,
}

#[derive(Args)]
struct NormArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    rom: Option<PathBuf>,
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ResidualArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    rom: PathBuf,
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code: 2 usage, 3 numerical, 4 I/O.
#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "usage",
            message: msg.into(),
        }
    }

    fn io(e: Error) -> Self {
        Failure {
            code: 4,
            kind: "io",
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::InvalidInput(_) | Error::Dimension(_) => Failure::usage(e.to_string()),
            Error::Io(_) | Error::Parse(_) => Failure::io(e),
            _ => Failure {
                code: 3,
                kind: "numerical",
                message: e.to_string(),
            },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::io(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn parse_band(s: &str) -> CliResult<FrequencyBand> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Failure::usage(format!("band '{s}' is not of the form LO:HI")))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Failure::usage(format!("band bound '{t}' is not a number")))
    };
    Ok(FrequencyBand::new(num(lo)?, num(hi)?)?)
}

fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || {
        Failure::usage(format!(
            "grid '{s}' is not of the form START:STOP:POINTS[:log|:lin]"
        ))
    };
    if parts.len() != 3 && parts.len() != 4 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].parse().map_err(|_| bad())?;
    let points: usize = parts[2].parse().map_err(|_| bad())?;
    let log = match parts.get(3).copied().unwrap_or("log") {
        "log" => true,
        "lin" => false,
        _ => return Err(bad()),
    };
    if points == 0 || !(start > 0.0 && stop >= start && stop.is_finite()) {
        return Err(Failure::usage(
            "grid needs 0 < START <= STOP and at least one point",
        ));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let t = |i: usize| i as f64 / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                stop
            } else if log {
                10f64.powf(start.log10() + t(i) * (stop.log10() - start.log10()))
            } else {
                start + t(i) * (stop - start)
            }
        })
        .collect())
}

fn with_path(p: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let mut f = Failure::io(e);
        f.message = format!("{}: {}", p.display(), f.message);
        f
    }
}

fn load_model(p: &Path) -> CliResult<LqoSystem> {
    io::load_model(p).map_err(with_path(p))
}

fn load_rom(p: &Path) -> CliResult<RomSystem> {
    io::load_rom(p).map_err(with_path(p))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn emit(value: &impl Serialize, out: Option<&Path>, file: &str) -> CliResult<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join(file), value)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    let spec = match a.model {
        Builtin::Illustrative => ModelSpec::Illustrative,
        Builtin::Advdiff => ModelSpec::Advdiff {
            nodes: a.nodes,
            alpha: a.alpha,
            beta: a.beta,
        },
        Builtin::Fss => ModelSpec::Fss {
            modes: a.modes,
            inputs: a.inputs,
            outputs: a.outputs,
            quad_counts: a.quad_counts,
            seed: a.seed,
        },
    };
    let sys = spec.build()?;
    let name = a.name.unwrap_or_else(|| spec.name());
    let path = io::save_model(&a.out, &name, &sys).map_err(Failure::io)?;
    println!(
        "{}",
        json!({ "manifest": path, "n": sys.n(), "m": sys.inputs(), "p": sys.outputs() })
    );
    Ok(())
}

fn cmd_reduce(a: ReduceArgs) -> CliResult<()> {
    let method: Method = a.method.parse()?;
    let band = a.band.as_deref().map(parse_band).transpose()?;
    if method.needs_band() && band.is_none() {
        return Err(Failure::usage(format!(
            "method {method} requires --band LO:HI"
        )));
    }
    let sys = load_model(&a.model)?;
    let mut cfg = ReductionConfig::new(method, a.order);
    cfg.band = band;
    cfg.nv = a.nv;
    cfg.max_iters = a.max_iters;
    cfg.eig_tol = a.eig_tol;
    cfg.seed = a.seed;
    cfg.exact_logm = a.exact_logm;
    cfg.diagnostics = a.diagnostics;
    cfg.basis = if a.strict_rank {
        BasisPolicy::Strict
    } else {
        BasisPolicy::Complete
    };
    if let Some(p) = &a.init {
        cfg.initial_rom = Some(load_rom(p)?);
    }
    fs::create_dir_all(&a.out)?;
    let res = match reducers::reduce(&sys, &cfg) {
        Ok(r) => r,
        Err(e) => {
            let f = Failure::from(e);
            write_json(
                &a.out.join(format!("{}_error.json", a.name)),
                &error_json(&f),
            )?;
            return Err(f);
        }
    };
    let manifest = io::save_rom(&a.out, &a.name, &res.rom).map_err(Failure::io)?;
    let report = res.report();
    write_json(&a.out.join(format!("{}_report.json", a.name)), &report)?;
    if let Some(r) = &report.residuals {
        write_json(&a.out.join(format!("{}_residuals.json", a.name)), r)?;
    }
    println!(
        "{}",
        json!({
            "manifest": manifest,
            "method": method,
            "order": res.rom.order(),
            "iterations": res.iterations,
            "converged": res.converged,
        })
    );
    Ok(())
}

fn channel_names(sys: &LqoSystem) -> Vec<String> {
    let (m, p, q) = (sys.inputs(), sys.outputs(), sys.m().len());
    let mut names = Vec::new();
    for i in 1..=p {
        for j in 1..=m {
            names.push(format!("g1_y{i}_u{j}"));
        }
    }
    for i in 1..=q {
        for j in 1..=m {
            for l in 1..=m {
                names.push(format!("g2_y{i}_u{j}u{l}"));
            }
        }
    }
    names
}

/// One row per frequency: `nu`, then `|G|`, `|G_k|`, relative error for every channel.
fn sweep_csv(names: &[String], records: &[SweepRecord]) -> String {
    let mut s = String::from("nu");
    for n in names {
        write!(s, ",{n}_full,{n}_rom,{n}_relerr").unwrap();
    }
    s.push('\n');
    for r in records {
        write!(s, "{:e}", r.nu).unwrap();
        for c in r.linear.iter().chain(&r.quadratic) {
            write!(s, ",{:e},{:e},{:e}", c.full, c.rom, c.relerr).unwrap();
        }
        s.push('\n');
    }
    s
}

fn cmd_sweep(a: SweepArgs) -> CliResult<()> {
    let grid = parse_grid(&a.grid)?;
    let sys = load_model(&a.model)?;
    let rom = load_rom(&a.rom)?;
    let records = diagnostics::sweep(&sys, &rom, &grid)?;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join(format!("{}.csv", a.name));
    fs::write(&path, sweep_csv(&channel_names(&sys), &records))?;
    let failures: Vec<_> = records
        .iter()
        .filter_map(|r| {
            r.failure
                .as_ref()
                .map(|f| json!({ "nu": r.nu, "error": f }))
        })
        .collect();
    println!(
        "{}",
        json!({ "csv": path, "rows": records.len(), "failures": failures })
    );
    Ok(())
}

fn evaluator(
    sys: &LqoSystem,
    band: Option<&str>,
) -> CliResult<(ErrorEvaluator, Option<FrequencyBand>)> {
    let band = band.map(parse_band).transpose()?;
    let ev = match &band {
        Some(b) => ErrorEvaluator::limited(sys, b)?,
        None => ErrorEvaluator::unlimited(sys)?,
    };
    Ok((ev, band))
}

fn band_json(band: Option<FrequencyBand>) -> serde_json::Value {
    band.map_or(serde_json::Value::Null, |b| json!([b.omega1(), b.omega2()]))
}

fn cmd_norm(a: NormArgs) -> CliResult<()> {
    let sys = load_model(&a.model)?;
    let rom = a.rom.as_deref().map(load_rom).transpose()?;
    let (ev, band) = evaluator(&sys, a.band.as_deref())?;
    let mut out = json!({ "band": band_json(band), "norm": ev.norm()? });
    if let Some(r) = &rom {
        out["error"] = json!(ev.error(r)?);
        out["relative_error"] = json!(ev.relative_error(r)?);
    }
    emit(&out, a.out.as_deref(), "norm.json")
}

fn cmd_residuals(a: ResidualArgs) -> CliResult<()> {
    let sys = load_model(&a.model)?;
    let rom = load_rom(&a.rom)?;
    let (ev, _) = evaluator(&sys, a.band.as_deref())?;
    let report = diagnostics::optimality_residuals_with(&ev, &rom, true)?;
    emit(&report, a.out.as_deref(), "residuals.json")
}

fn error_json(f: &Failure) -> serde_json::Value {
    json!({ "error": { "code": f.code, "kind": f.kind, "message": f.message } })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Norm(a) => cmd_norm(a),
        Command::Residuals(a) => cmd_residuals(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", error_json(&f));
            ExitCode::from(f.code)
        }
    }
}
