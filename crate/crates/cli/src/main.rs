//! `diracres states|counting|scattering|det|verify --config <file> --out <dir> [--threads N]`
//!
//! Exit codes: 0 on success, 1 when a computation fails or a verification
//! criterion does not pass, 2 for a malformed configuration or potential.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use diracres::error::Error;
use diracres::fixtures;
use diracres::fredholm::{self, DetOptions};
use diracres::io::{self, RunMetadata};
use diracres::jost::JostOptions;
use diracres::potential::Potential;
use diracres::scattering;
use diracres::states::{self, FinderOptions};
use diracres::verify::{self, SuiteOptions, Verdict};
use rayon::prelude::*;
use serde::Serialize;

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "diracres", version, about = "Resonances and scattering data of half-line Dirac operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, resonances, virtual states and antibound states in a rectangle.
    States(Args),
    /// Resonance counts in lower half-disks against 2rγ/π.
    Counting(Args),
    /// S-matrix, scattering phase and Ω on a real grid.
    Scattering(Args),
    /// Modified Fredholm determinant on a complex grid.
    Det(Args),
    /// The acceptance suite; fails unless every selected criterion passes.
    Verify(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; the output does not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Config(ConfigError),
    Compute(Error),
    Criteria(usize),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidPotential(_) | Error::Json(_) => Failure::Config(ConfigError(e.to_string())),
            e => Failure::Compute(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (Command::States(args)
    | Command::Counting(args)
    | Command::Scattering(args)
    | Command::Det(args)
    | Command::Verify(args)) = &cli.command;
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = RunConfig::load(&args.config).map_err(Failure::from).and_then(|cfg| match &cli.command {
        Command::States(a) => cmd_states(&cfg, &a.out),
        Command::Counting(a) => cmd_counting(&cfg, &a.out),
        Command::Scattering(a) => cmd_scattering(&cfg, &a.out),
        Command::Det(a) => cmd_det(&cfg, &a.out),
        Command::Verify(a) => cmd_verify(&cfg, &a.out),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Criteria(n)) => {
            eprintln!("{n} criteria failed");
            ExitCode::from(1)
        }
    }
}

fn jost_options(cfg: &RunConfig) -> JostOptions {
    JostOptions::with_tol(cfg.tolerance)
}

fn metadata(pot: &Potential, cfg: &RunConfig) -> RunMetadata {
    RunMetadata::new(pot).tolerance("jost", cfg.tolerance)
}

fn json(value: &impl Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Compute(e.into()))
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    metadata: &'a RunMetadata,
    #[serde(flatten)]
    body: T,
}

fn cmd_states(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let pot = cfg.potential(None)?;
    let region = cfg.region()?;
    let opts = FinderOptions {
        jost: jost_options(cfg),
        ..FinderOptions::default()
    };
    let found = states::find_states(&pot, &region, &opts)?;
    let meta = metadata(&pot, cfg).region(region);
    if cfg.format.csv() {
        io::write(out, "states.csv", &io::states_csv(&found)?)?;
    }
    if cfg.format.json() {
        io::write(out, "states.json", &io::states_json(&found, &meta)?)?;
    }
    for (class, n) in io::class_summary(&found) {
        println!("{class}: {n}");
    }
    Ok(())
}

fn cmd_counting(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let pot = cfg.potential(None)?;
    let radii = cfg.radii.clone().ok_or_else(|| ConfigError("counting needs radii".into()))?;
    let opts = FinderOptions {
        jost: jost_options(cfg),
        ..FinderOptions::default()
    };
    let report = states::counting_report(&pot, &radii, cfg.delta, &opts)?;
    if cfg.format.csv() {
        io::write(out, "counting.csv", &io::counting_csv(&report)?)?;
    }
    if cfg.format.json() {
        let meta = metadata(&pot, cfg);
        io::write(out, "counting.json", &json(&Document { metadata: &meta, body: &report })?)?;
    }
    for ((r, n), p) in report.radii.iter().zip(&report.counts).zip(&report.predicted) {
        println!("r = {r}: {n} resonances, 2rγ/π = {p:.3}");
    }
    Ok(())
}

fn cmd_scattering(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let pot = cfg.potential(None)?;
    let trace = scattering::scattering_phase(&cfg.real_grid()?, &pot, &jost_options(cfg))?;
    if cfg.format.csv() {
        io::write(out, "scattering.csv", &io::phase_csv(&trace)?)?;
    }
    if cfg.format.json() {
        let meta = metadata(&pot, cfg);
        io::write(out, "scattering.json", &json(&Document { metadata: &meta, body: &trace })?)?;
    }
    println!("{} points", trace.lambda.len());
    Ok(())
}

#[derive(Serialize)]
struct DetBody<'a> {
    evaluations: &'a [fredholm::DetEvaluation],
}

fn cmd_det(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let pot = cfg.potential(None)?;
    let opts = DetOptions::with_nodes(cfg.nodes);
    let rows = cfg
        .complex_grid()?
        .par_iter()
        .map(|&z| fredholm::det2(z, &pot, &opts))
        .collect::<Result<Vec<_>, Error>>()?;
    if cfg.format.csv() {
        io::write(out, "det.csv", &io::det_csv(&rows)?)?;
    }
    if cfg.format.json() {
        let meta = metadata(&pot, cfg);
        io::write(
            out,
            "det.json",
            &json(&Document {
                metadata: &meta,
                body: DetBody { evaluations: &rows },
            })?,
        )?;
    }
    println!("{} points", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct VerifyBody<'a> {
    passed: usize,
    failed: usize,
    verdicts: &'a [Verdict],
}

fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let pot = cfg.potential(Some(fixtures::step_q))?;
    if let Some(c) = &cfg.criteria {
        if let Some(bad) = c.iter().find(|id| !verify::CRITERIA.iter().any(|(i, _)| i == *id)) {
            return Err(ConfigError(format!("no criterion {bad}")).into());
        }
    }
    let opts = SuiteOptions {
        potential: pot.clone(),
        only: cfg.criteria.clone(),
    };
    let verdicts = verify::run_suite(&opts);
    for v in &verdicts {
        println!("{}", v.line());
    }
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    let body = VerifyBody {
        passed: verdicts.len() - failed,
        failed,
        verdicts: &verdicts,
    };
    let meta = metadata(&pot, cfg);
    if cfg.format.json() {
        io::write(out, "verify.json", &json(&Document { metadata: &meta, body })?)?;
    }
    if cfg.format.csv() {
        io::write(out, "verify.csv", &verify_csv(&verdicts))?;
    }
    if failed > 0 {
        return Err(Failure::Criteria(failed));
    }
    Ok(())
}

fn verify_csv(verdicts: &[Verdict]) -> String {
    let mut s = String::from("criterion,title,passed,margin\n");
    for v in verdicts {
        s.push_str(&format!("{},\"{}\",{},{}\n", v.id, v.title, v.passed, io::num(v.margin)));
    }
    s
}
