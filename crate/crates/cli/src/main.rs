//! `cocycle`: batch front-end for validating couplings, solving for
//! primitives, holonomy reports, path chains and the grid gluing pipelines.
//!
//! Exit status: 0 on success, 1 when the input is well formed but no answer
//! exists (violation, obstruction, curl, uncovered path), 2 on unreadable or
//! malformed input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use cocycle::gluing::{glue_functions_with_base, poincare_reconstruct, tile_cover, ScalarField, DEFAULT_TILE};
use cocycle::io;
use cocycle::path_chain::{build_chain, chain_sum, GeomCover, Polyline};
use cocycle::{holonomy, solve_primitive, validate_compatibility, Coupling, Cover, Error, DEFAULT_TOLERANCE};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "cocycle", version, about = "Primitives and holonomy of couplings on covers")]
struct Cli {
    /// Absolute tolerance; overrides the tolerance stored in a coupling file.
    #[arg(long, global = true, allow_hyphen_values = true)]
    tol: Option<f64>,

    /// Normalization set: the primitive is zero there.
    #[arg(long, global = true)]
    base: Option<String>,

    /// Print a single-line JSON envelope with status and result to stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Write the result (JSON report or CSV field) to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Require both orientations of every pair in coupling files.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check antisymmetry and triple additivity of a coupling.
    Validate { cover: PathBuf, coupling: PathBuf },
    /// Build a primitive, or report the cycles that obstruct one.
    Solve { cover: PathBuf, coupling: PathBuf },
    /// Holonomy of every fundamental cycle.
    Holonomy { cover: PathBuf, coupling: PathBuf },
    /// Chain of charts along a polyline and its coupling sum.
    Chain {
        charts: PathBuf,
        polyline: PathBuf,
        coupling: PathBuf,
        /// Chart holding the start point (default: first chart of the chain).
        #[arg(long)]
        start: Option<String>,
        /// Chart holding the end point (default: last chart of the chain).
        #[arg(long)]
        end: Option<String>,
    },
    /// Glue sampled functions that agree up to constants on overlaps.
    Glue { family: PathBuf },
    /// Reconstruct a potential from a sampled gradient field.
    Poincare {
        header: PathBuf,
        gx: PathBuf,
        gy: PathBuf,
        /// Tile size k of the 2k x 2k rectangle cover.
        #[arg(long, default_value_t = DEFAULT_TILE)]
        tile: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Solve { .. } => "solve",
            Command::Holonomy { .. } => "holonomy",
            Command::Chain { .. } => "chain",
            Command::Glue { .. } => "glue",
            Command::Poincare { .. } => "poincare",
        }
    }
}

/// What a command produced: a JSON document, or a grid written as CSV.
enum Artifact {
    Json(Value),
    Field(ScalarField),
}

impl Artifact {
    fn to_text(&self) -> anyhow::Result<String> {
        Ok(match self {
            Artifact::Json(v) => io::to_json(v, true)? + "\n",
            Artifact::Field(f) => io::scalar_field_csv(f),
        })
    }

    fn to_value(&self) -> Value {
        match self {
            Artifact::Json(v) => v.clone(),
            Artifact::Field(f) => {
                let rows: Vec<Value> = f.values().chunks(f.width()).map(|r| json!(r)).collect();
                json!({ "width": f.width(), "height": f.height(), "values": rows })
            }
        }
    }
}

struct Outcome {
    status: &'static str,
    code: u8,
    artifact: Artifact,
}

impl Outcome {
    fn ok(artifact: Artifact) -> Self {
        Outcome {
            status: "ok",
            code: 0,
            artifact,
        }
    }
}

/// Either a finished outcome or an operational error (exit 2).
type Run = anyhow::Result<Outcome>;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse<T>(path: &Path, f: impl FnOnce(&str) -> cocycle::Result<T>) -> anyhow::Result<T> {
    f(&read(path)?).with_context(|| format!("invalid input {}", path.display()))
}

fn load_cover(path: &Path) -> anyhow::Result<Cover> {
    parse(path, |s| Ok(serde_json::from_str::<Cover>(s)?))
}

fn load_coupling(path: &Path, strict: bool) -> anyhow::Result<Coupling> {
    parse(path, |s| io::parse_coupling(s, strict))
}

/// Domain failures become an exit-1 outcome carrying their report; anything
/// else is an operational error.
fn domain_failure(err: Error) -> Run {
    if !err.is_domain_failure() {
        return Err(err.into());
    }
    let (status, artifact) = match &err {
        Error::Obstructed(rep) => ("obstructed", io::holonomy_json(rep)),
        Error::Incompatible(rep) => ("incompatible", io::violations_json(rep)),
        _ => ("failed", json!({ "error": err.to_string() })),
    };
    Ok(Outcome {
        status,
        code: 1,
        artifact: Artifact::Json(artifact),
    })
}

fn finish<T>(result: cocycle::Result<T>, ok: impl FnOnce(T) -> Artifact) -> Run {
    match result {
        Ok(x) => Ok(Outcome::ok(ok(x))),
        Err(e) => domain_failure(e),
    }
}

fn run(cli: &Cli) -> Run {
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(anyhow!("--tol must be a positive finite number, got {t}"));
        }
    }
    let base = cli.base.as_deref();
    let coupling_tol = |d: &Coupling| cli.tol.unwrap_or(d.tolerance);
    match &cli.command {
        Command::Validate { cover, coupling } => {
            let (cover, d) = (load_cover(cover)?, load_coupling(coupling, cli.strict)?);
            let report = validate_compatibility(&cover, &d, coupling_tol(&d))?;
            let clean = report.is_clean();
            Ok(Outcome {
                status: if clean { "ok" } else { "incompatible" },
                code: if clean { 0 } else { 1 },
                artifact: Artifact::Json(io::violations_json(&report)),
            })
        }
        Command::Solve { cover, coupling } => {
            let (cover, d) = (load_cover(cover)?, load_coupling(coupling, cli.strict)?);
            finish(solve_primitive(&cover, &d, base, coupling_tol(&d)), |p| {
                Artifact::Json(io::primitive_json(&p))
            })
        }
        Command::Holonomy { cover, coupling } => {
            let (cover, d) = (load_cover(cover)?, load_coupling(coupling, cli.strict)?);
            let report = holonomy(&cover, &d)?;
            Ok(Outcome::ok(Artifact::Json(io::holonomy_json(&report))))
        }
        Command::Chain {
            charts,
            polyline,
            coupling,
            start,
            end,
        } => {
            let geom: GeomCover = parse(charts, |s| Ok(serde_json::from_str(s)?))?;
            let path: Polyline = parse(polyline, |s| Ok(serde_json::from_str(s)?))?;
            let d = load_coupling(coupling, cli.strict)?;
            let chain = match build_chain(&geom, &path) {
                Ok(c) => c,
                Err(e) => return domain_failure(e),
            };
            let start = start.clone().unwrap_or_else(|| chain.charts[0].clone());
            let end = end
                .clone()
                .unwrap_or_else(|| chain.charts[chain.charts.len() - 1].clone());
            for (id, t) in [(&start, 0.0), (&end, 1.0)] {
                if !geom.region(id)?.contains(path.point(t)) {
                    return Err(Error::EndpointOutsideChart(id.clone(), t).into());
                }
            }
            let sum = chain_sum(&d, &chain, &start, &end);
            finish(sum, |s| Artifact::Json(io::chain_json(&chain, &start, &end, s)))
        }
        Command::Glue { family } => {
            let family = parse(family, io::parse_family)?;
            let tol = cli.tol.unwrap_or(DEFAULT_TOLERANCE);
            finish(glue_functions_with_base(&family, tol, base), Artifact::Field)
        }
        Command::Poincare { header, gx, gy, tile } => {
            let header = parse(header, io::parse_header)?;
            let (domain, g) = io::parse_vector_field(&header, &read(gx)?, &read(gy)?)
                .with_context(|| format!("invalid field {} / {}", gx.display(), gy.display()))?;
            let tiles = tile_cover(&domain, *tile)?;
            let tol = cli.tol.unwrap_or(DEFAULT_TOLERANCE);
            finish(poincare_reconstruct(&domain, &g, &tiles, tol, base), Artifact::Field)
        }
    }
}

/// Caps the global rayon pool at `COCYCLE_THREADS` when set.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("COCYCLE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("COCYCLE_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn emit(cli: &Cli, outcome: &Outcome) -> anyhow::Result<()> {
    if let Some(path) = &cli.out {
        fs::write(path, outcome.artifact.to_text()?).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if cli.json {
        let envelope = json!({
            "command": cli.command.name(),
            "status": outcome.status,
            "exit": outcome.code,
            "result": outcome.artifact.to_value(),
        });
        println!("{}", io::to_json(&envelope, false)?);
    } else if cli.out.is_none() {
        print!("{}", outcome.artifact.to_text()?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads()
        .and_then(|()| run(&cli))
        .and_then(|o| emit(&cli, &o).map(|()| o.code));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            let message = format!("{err:#}");
            if cli.json {
                let envelope = json!({
                    "command": cli.command.name(),
                    "status": "error",
                    "exit": 2,
                    "error": message,
                });
                println!("{}", io::to_json(&envelope, false).unwrap_or_default());
            }
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
