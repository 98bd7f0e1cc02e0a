//! `helmdd`: runs the experiment sweeps described by a TOML config and
//! writes CSV tables plus a `manifest.json` into the output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Kind};
use experiments::Method;
use output::{Manifest, Status};

#[derive(Parser)]
#[command(
    name = "helmdd",
    version,
    about = "Helmholtz overlapping Schwarz experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Impedance map norms rho and gamma (kind impmap_table).
    Impmap(Common),
    /// Composite impedance map norms (kind zeta_table).
    Zeta(Common),
    /// Fixed-point ORAS iteration counts (strip, checkerboard or metis kinds).
    Iterate(Common),
    /// ORAS-preconditioned GMRES counts (strip, checkerboard or metis kinds).
    Gmres(Common),
    /// Nilpotency of the 1-d error propagation operator (kind oned_verify).
    Oned(Common),
    /// Monomial counts and expansion identity (kind algebra_verify).
    Algebra(Common),
    /// Plane-wave convergence of the finite element solver (kind fem_convergence).
    Femcheck(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep points with more degrees of freedom are skipped.
    #[arg(long, default_value_t = 500_000)]
    max_dofs: usize,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common, &'static [Kind]) {
        use Kind::*;
        const ITER: &[Kind] = &[StripIterate, CheckerboardIterate, MetisIterate];
        match self {
            Command::Impmap(c) => ("impmap", c, &[ImpmapTable]),
            Command::Zeta(c) => ("zeta", c, &[ZetaTable]),
            Command::Iterate(c) => ("iterate", c, ITER),
            Command::Gmres(c) => ("gmres", c, ITER),
            Command::Oned(c) => ("oned", c, &[OnedVerify]),
            Command::Algebra(c) => ("algebra", c, &[AlgebraVerify]),
            Command::Femcheck(c) => ("femcheck", c, &[FemConvergence]),
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let start = Instant::now();
    let (name, args, kinds) = cli.command.parts();
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if !kinds.contains(&cfg.kind) {
        let allowed: Vec<String> = kinds.iter().map(Kind::to_string).collect();
        bail!(
            "kind: {} cannot be run by `helmdd {name}` (expected {})",
            cfg.kind,
            allowed.join(" or ")
        );
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let Some(dir) = args.out.clone().or_else(|| cfg.out_dir.clone()) else {
        bail!("no output directory: pass --out or set output.dir in the config");
    };
    std::fs::create_dir_all(&dir)?;

    let method = if name == "gmres" {
        Method::Gmres
    } else {
        Method::FixedPoint
    };
    let outcome = experiments::run(&cfg, method, args.max_dofs);
    // a closed pipe on stdout must not abort the run
    let mut out = std::io::stdout().lock();
    macro_rules! say {
        ($($t:tt)*) => { let _ = writeln!(out, $($t)*); };
    }
    match &outcome.table {
        Some(t) => {
            say!("helmdd {name}: mirrors table {t}");
        }
        None => {
            say!("helmdd {name}: {}", cfg.kind);
        }
    }
    for r in &outcome.runs {
        let status = match r.status {
            Status::Ok => "ok",
            Status::Skipped => "skipped",
            Status::Failed => "FAILED",
        };
        match &r.message {
            Some(m) => {
                say!("  {}: {status} ({m})", r.label);
            }
            None => {
                say!("  {}: {status}", r.label);
            }
        }
    }
    let mut outputs = Vec::new();
    for t in &outcome.tables {
        t.write(&dir)?;
        outputs.push(t.file.clone());
    }
    let failed = outcome
        .runs
        .iter()
        .filter(|r| r.status == Status::Failed)
        .count();
    let skipped = outcome
        .runs
        .iter()
        .filter(|r| r.status == Status::Skipped)
        .count();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command: name.into(),
        kind: cfg.kind.to_string(),
        config: args.config.display().to_string(),
        seed: cfg.seed,
        max_dofs: args.max_dofs,
        prng: "ChaCha8 seeded from u64 (rand_chacha)",
        table: outcome.table,
        outputs,
        runs: outcome.runs,
        failed,
        skipped,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    manifest.write(&dir)?;
    say!(
        "wrote {} table(s) and manifest.json to {}",
        manifest.outputs.len(),
        dir.display()
    );
    Ok(failed == 0)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some sweep points failed; see manifest.json");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
