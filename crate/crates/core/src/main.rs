use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sh_bdf3::energy::discrete_energy;
use sh_bdf3::harness::{convergence_csv, convergence_summary};
use sh_bdf3::io::{self, parse_config, read_snapshot, RunConfig, RunError};
use sh_bdf3::verify;

const EXIT_USAGE: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "sh-bdf3", version, about = "BDF3 Swift-Hohenberg solver on periodic boxes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Simulate {
        config: PathBuf,
        /// Continue from a checkpoint written by an earlier run of the same config.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the manufactured-solution convergence study selected in the config.
    Converge { config: PathBuf },
    /// Check the DOC kernel identities and discrete operator identities.
    Verify,
    /// Recompute the discrete energy of stored snapshots.
    Energy {
        #[arg(required = true)]
        snapshots: Vec<PathBuf>,
        /// Also write a plain-text export next to each snapshot.
        #[arg(long)]
        export: bool,
    },
}

fn load_config(path: &PathBuf) -> Result<RunConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_USAGE)
    })?;
    parse_config(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_USAGE)
    })
}

fn run_failure(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_solver_failure() { EXIT_SOLVER } else { EXIT_USAGE })
}

fn simulate(config: PathBuf, resume: Option<PathBuf>) -> Result<(), ExitCode> {
    let cfg = load_config(&config)?;
    let summary = io::run_config(&cfg, resume.as_deref()).map_err(run_failure)?;
    let out = &summary.outcome;
    if let Some(last) = out.records.last() {
        println!(
            "level {} (t = {}): E = {:.10e}, E_mod = {:.10e}",
            last.level, last.time, last.energy, last.modified_energy
        );
    }
    if !out.guard.solvability_ok || !out.guard.energy_ok {
        eprintln!(
            "warning: tau = {} exceeds the step guard (solvability tau <= {:.4e}, energy tau <= {:.4e})",
            cfg.tau, out.guard.tau_solvability, out.guard.tau_energy
        );
    }
    if !cfg.forcing && !out.monitor.increases.is_empty() {
        eprintln!("warning: modified energy increased at {} levels", out.monitor.increases.len());
    }
    if !out.monitor.bound_violations.is_empty() {
        eprintln!("warning: norm bound violated at {} levels", out.monitor.bound_violations.len());
    }
    println!("energy log: {}", summary.energy_csv.display());
    for p in &summary.snapshots {
        println!("snapshot: {}", p.display());
    }
    Ok(())
}

fn converge(config: PathBuf) -> Result<(), ExitCode> {
    let cfg = load_config(&config)?;
    let rows = io::run_study(&cfg).map_err(run_failure)?;
    print!("{}", convergence_summary(&rows));
    std::fs::create_dir_all(&cfg.output_dir)
        .and_then(|_| std::fs::write(cfg.output_dir.join("convergence.csv"), convergence_csv(&rows)))
        .map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        })
}

fn energy(snapshots: Vec<PathBuf>, export: bool) -> Result<(), ExitCode> {
    println!("file,level,time,E");
    for path in snapshots {
        let (header, field) = read_snapshot(&path).map_err(|e| {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::from(EXIT_USAGE)
        })?;
        let e = discrete_energy(&field, &header.params());
        println!("{},{},{:.16e},{:.16e}", path.display(), header.level, header.time, e);
        if export {
            std::fs::write(path.with_extension("txt"), io::export_text(&field)).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_USAGE)
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate { config, resume } => simulate(config, resume),
        Command::Converge { config } => converge(config),
        Command::Verify => {
            let checks = verify::run_all();
            print!("{}", verify::format_table(&checks));
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(ExitCode::from(EXIT_VERIFY))
            }
        }
        Command::Energy { snapshots, export } => energy(snapshots, export),
    };
    result.err().unwrap_or(ExitCode::SUCCESS)
}
