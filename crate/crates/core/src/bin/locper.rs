use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use locper_core::cell::{build_cell_table, read_cell_table, write_cell_table};
use locper_core::coeff::validate_coefficient;
use locper_core::config::ExperimentConfig;
use locper_core::grid::TorusGrid;
use locper_core::harness::{emit_report, run_sweep, ErrorCurve, ReportPaths};
use locper_core::homogenize::effective_matrix;
use locper_core::Error;

#[derive(Parser)]
#[command(name = "locper", version, about = "Resolvent approximation experiments for locally periodic operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output] dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed for power-iteration start vectors (overrides [solver] seed)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problems on the slow grid and write them to <out>/cells.bin
    Cells {
        #[command(flatten)]
        common: Common,
        /// Print the summary of an existing table instead of building one
        #[arg(long)]
        inspect: Option<PathBuf>,
    },
    /// Write the effective matrix at every slow sample to <out>/effective.csv
    Effective {
        #[command(flatten)]
        common: Common,
    },
    /// Run the ε-sweep and write convergence.csv, timings.csv, summary.txt and loglog.dat
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Check ellipticity, Lipschitz, periodicity and symmetry claims by sampling
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

enum Failure {
    Validation(String),
    Solver(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation_failure() {
            Failure::Validation(e.to_string())
        } else if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path, Failure> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Failure::Other(format!("{}: {e}", cfg.output_dir.display())))?;
    Ok(&cfg.output_dir)
}

fn print_cells(t: &locper_core::cell::CellSolutions) {
    println!(
        "cells: d = {}, n_x = {}, n_y = {}, scheme = {}",
        t.dim(),
        t.slow.n,
        t.cell.n,
        t.scheme.name()
    );
    println!("max residual {:.3e}, max |mean| {:.3e}", t.max_residual, t.max_mean);
    println!("x-Lipschitz of N: primal {:.4e}, adjoint {:.4e}", t.lipschitz[0], t.lipschitz[1]);
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Cells { common, inspect } => {
            if let Some(path) = inspect {
                print_cells(&read_cell_table(&path)?);
                return Ok(());
            }
            let cfg = load(&common)?;
            let field = cfg.field()?;
            let d = field.dim();
            let scheme = cfg.cell_scheme.unwrap_or_else(|| field.preferred_scheme());
            let t = build_cell_table(
                &field,
                TorusGrid::new(d, cfg.n_x)?,
                TorusGrid::new(d, cfg.n_y)?,
                scheme,
                cfg.solver_options(),
            )?;
            let path = out_dir(&cfg)?.join("cells.bin");
            write_cell_table(&t, &path)?;
            print_cells(&t);
            println!("wrote {}", path.display());
        }
        Command::Effective { common } => {
            let cfg = load(&common)?;
            let field = cfg.field()?;
            let d = field.dim();
            let scheme = cfg.cell_scheme.unwrap_or_else(|| field.preferred_scheme());
            let t = build_cell_table(
                &field,
                TorusGrid::new(d, cfg.n_x)?,
                TorusGrid::new(d, cfg.n_y)?,
                scheme,
                cfg.solver_options(),
            )?;
            let hom = effective_matrix(&t, &field)?;
            let path = out_dir(&cfg)?.join("effective.csv");
            hom.write_csv(&path)?;
            let n = hom.a0.len() as f64;
            let mut mean = [[0.0; 2]; 2];
            for a in &hom.a0 {
                for i in 0..d {
                    for j in 0..d {
                        mean[i][j] += a[i][j] / n;
                    }
                }
            }
            for row in mean.iter().take(d) {
                let cols: Vec<String> = row.iter().take(d).map(|v| format!("{v:.10}")).collect();
                println!("mean a0: [{}]", cols.join(", "));
            }
            println!("adjoint defect |(a^T)^0 - (a^0)^T| = {:.3e}", hom.adjoint_defect());
            println!("wrote {}", path.display());
        }
        Command::Sweep { common } => {
            let cfg = load(&common)?;
            let paths = ReportPaths::in_dir(out_dir(&cfg)?);
            match run_sweep(&cfg) {
                Ok(report) => {
                    emit_report(&report, &paths)?;
                    print!("{}", report.summary());
                    if !report.floor {
                        for c in ErrorCurve::ALL {
                            if let Ok(f) = report.fit(c) {
                                println!("slope {} = {:.4}", c.name(), f.slope);
                            }
                        }
                    }
                }
                Err(failure) => {
                    emit_report(&failure.partial, &paths)?;
                    eprintln!("partial results written to {}", cfg.output_dir.display());
                    return Err(failure.error.into());
                }
            }
        }
        Command::Validate { common, samples } => {
            let cfg = load(&common)?;
            let field = cfg.field()?;
            let r = validate_coefficient(&field, samples)?;
            println!(
                "samples {}: lambda measured {:.6} (claimed {:.6}), Lipschitz measured {:.6} (claimed {:.6})",
                r.n_samples, r.measured_lambda, r.claimed_lambda, r.measured_lipschitz, r.claimed_lipschitz
            );
            println!("periodicity defect {:.3e}, asymmetry {:.3e}", r.periodicity_defect, r.asymmetry);
            if !r.passed() {
                return Err(Failure::Validation(r.diagnostic()));
            }
            println!("{}", r.diagnostic());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("validation failure: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
