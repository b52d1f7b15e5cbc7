//! `eqg`: batch front end for the elliptic quantum group checks.

mod commands;
mod config;
mod report;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eqg_core::C64;

use config::{parse_complex, parse_complex_list, ComplexList, ConfigFile, RunConfig};
use report::{Failure, Report};
use suites::Suite;

#[derive(Parser)]
#[command(name = "eqg", version, about = "Numerical checks for the elliptic quantum group E(tau, eta)(sl2)")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

/// Parameters shared by all subcommands. Flags override values from `--config`.
#[derive(Args)]
struct Common {
    /// JSON file with run parameters (keys: tau, eta, p, N, n, m, lambdas, z, c, w, w2, lambda, tol, seed, output).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every sampled quantity.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Tolerance for every asserted residual (default: per-check values).
    #[arg(long, global = true, env = "EQG_TOL")]
    tol: Option<f64>,

    /// Modular parameter, e.g. `0.1+1.0i` or `0.1,1.0`.
    #[arg(long, global = true, value_parser = parse_complex)]
    tau: Option<C64>,

    /// Anisotropy; must equal 1/2N when N is given.
    #[arg(long, global = true, value_parser = parse_complex)]
    eta: Option<C64>,

    /// Step of the difference equations.
    #[arg(long, global = true, value_parser = parse_complex)]
    p: Option<C64>,

    /// Root-of-unity order.
    #[arg(long = "N", global = true)]
    level: Option<i64>,

    /// Number of sites.
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Level of the weight subspace.
    #[arg(long, global = true)]
    m: Option<usize>,

    /// Highest weights, separated by `;`.
    #[arg(long, global = true, value_parser = parse_complex_list)]
    lambdas: Option<ComplexList>,

    /// Inhomogeneities (for `rmatrix`: the spectral parameter), separated by `;`.
    #[arg(long, global = true, value_parser = parse_complex_list)]
    z: Option<ComplexList>,

    /// Exponent of the Bethe prefactor `e^{c lambda}`.
    #[arg(long, global = true, value_parser = parse_complex)]
    c: Option<C64>,

    /// Spectral parameter of the transfer matrix.
    #[arg(long, global = true, value_parser = parse_complex)]
    w: Option<C64>,

    /// Second spectral parameter for commutator checks.
    #[arg(long, global = true, value_parser = parse_complex)]
    w2: Option<C64>,

    /// Dynamical variable.
    #[arg(long, global = true, value_parser = parse_complex)]
    lambda: Option<C64>,

    /// Write the JSON report here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run identity suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Print one weight block of the dynamical R-matrix.
    Rmatrix,
    /// Solve the Bethe ansatz equations.
    Bethe,
    /// Spectrum of the restricted transfer matrix.
    IrfSpectrum {
        /// Also solve the Bethe equations and match their eigenvalues.
        #[arg(long)]
        bethe: bool,
    },
    /// Forced and unforced entries of antisymmetrised Bethe eigenfunctions.
    VanishingReport,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(ConfigFile::load(path)?);
        }
        let complex = |slot: &mut C64, v: Option<C64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        complex(&mut cfg.tau, self.tau);
        complex(&mut cfg.p, self.p);
        complex(&mut cfg.c, self.c);
        complex(&mut cfg.w, self.w);
        complex(&mut cfg.w2, self.w2);
        complex(&mut cfg.lambda, self.lambda);
        cfg.eta = self.eta.or(cfg.eta);
        cfg.level = self.level.or(cfg.level);
        cfg.n = self.n.or(cfg.n);
        cfg.m = self.m.or(cfg.m);
        cfg.lambdas = self.lambdas.clone().map(|l| l.0).or(cfg.lambdas);
        cfg.z = self.z.clone().map(|l| l.0).or(cfg.z);
        cfg.tol = self.tol.or(cfg.tol);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.output = self.output.clone().or(cfg.output);
        cfg.params()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<(Report, RunConfig), Failure> {
    let cfg = cli.common.resolve()?;
    let report = match &cli.command {
        Command::Verify { suite } => commands::verify(&cfg, *suite)?,
        Command::Rmatrix => commands::rmatrix_block(&cfg)?,
        Command::Bethe => commands::bethe_roots(&cfg)?,
        Command::IrfSpectrum { bethe } => commands::irf_spectrum(&cfg, *bethe)?,
        Command::VanishingReport => commands::vanishing_report(&cfg)?,
    };
    Ok((report, cfg))
}

fn emit(json: &serde_json::Value, output: Option<&PathBuf>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(json).expect("reports serialise") + "\n";
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::config(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((report, cfg)) => match emit(&report.to_json(), cfg.output.as_ref()) {
            Ok(()) => ExitCode::from(report.exit_code()),
            Err(failure) => {
                eprintln!("{failure}");
                ExitCode::from(failure.exit)
            }
        },
        Err(failure) => {
            eprintln!("{failure}");
            println!("{}", serde_json::to_string_pretty(&failure.to_json()).expect("errors serialise"));
            ExitCode::from(failure.exit)
        }
    }
}
