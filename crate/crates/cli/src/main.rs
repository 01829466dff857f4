use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phasescan_core::{
    build_s, build_s0, chern_fhs_with, emit, gamma_crossings, run_scan, Error, FhsOptions, OutputKind, ScanSpec, ScatterParams,
};

/// Chern phase diagrams and band-crossing loci of figure-eight quantum graphs.
#[derive(Parser)]
#[command(name = "phasescan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a parameter plane and write the phase diagram.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Flux-torus grid per cell; overrides scan.grid.
        #[arg(long)]
        grid: Option<usize>,
        /// Worker threads.
        #[arg(long, env = "PHASESCAN_JOBS")]
        jobs: Option<usize>,
        /// Comma-separated subset of csv, json, ppm; overrides scan.formats.
        #[arg(long, value_delimiter = ',')]
        formats: Vec<OutputKind>,
    },
    /// Print the γ values where bands cross, as TSV.
    Crossings {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the four band Chern numbers at the configured parameters.
    Chern {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 80)]
        phi_grid: usize,
    },
}

/// Every failure exits with 1; only a partial scan uses 2.
struct Failure(String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, out, grid, jobs, formats } => run(&config, &out, grid, jobs, formats),
        Command::Crossings { config } => crossings(&config),
        Command::Chern { config, phi_grid } => chern(&config, phi_grid),
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn read_config(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn run(config: &Path, out: &Path, grid: Option<usize>, jobs: Option<usize>, formats: Vec<OutputKind>) -> Result<ExitCode, Failure> {
    let mut spec = ScanSpec::parse(&read_config(config)?)?;
    if let Some(n) = grid {
        spec.grid_n = n;
    }
    if !formats.is_empty() {
        spec.outputs = formats;
    }
    spec.validate()?;
    if jobs == Some(0) {
        return Err(Failure("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build().map_err(|e| Failure(e.to_string()))?;
    let grid = pool.install(|| run_scan(&spec))?;
    for kind in &spec.outputs {
        for path in emit(&grid, *kind, out)? {
            println!("wrote {}", path.display());
        }
    }
    let summary = grid.summary();
    println!("{summary}");
    Ok(if summary.is_partial() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn crossings(config: &Path) -> Result<ExitCode, Failure> {
    let p = ScatterParams::parse(&read_config(config)?)?;
    let sols = gamma_crossings(&build_s0(&p))?;
    let mut w = io::stdout().lock();
    writeln!(w, "gamma\tbranch\tk\tphi1\tphi2\tsign")?;
    for s in &sols {
        let sign = s.sign.map_or("NA".to_string(), |v| format!("{v:+}"));
        for (k, flux) in [(s.k, s.flux_a), (s.k + std::f64::consts::PI, s.flux_b)] {
            let k = phasescan_core::wrap_pi(k);
            writeln!(w, "{:.12}\t{}\t{:.12}\t{:.12}\t{:.12}\t{sign}", s.gamma, s.branch.index(), k, flux.phi1, flux.phi2)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn chern(config: &Path, phi_grid: usize) -> Result<ExitCode, Failure> {
    let p = ScatterParams::parse(&read_config(config)?)?;
    let c = chern_fhs_with(&build_s(&p), &FhsOptions::new(phi_grid))?;
    println!("{}\t{}\t{}\t{}", c.c[0], c.c[1], c.c[2], c.c[3]);
    if !c.converged {
        eprintln!("warning: not stable under grid doubling from {phi_grid}");
    }
    Ok(ExitCode::SUCCESS)
}
