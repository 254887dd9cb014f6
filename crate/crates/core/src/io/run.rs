//! Config-driven runs: energy log, periodic snapshots and checkpoints, resume.

use std::path::{Path, PathBuf};

use thiserror::Error;

use super::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError};
use super::config::{IcSelector, RunConfig};
use super::csv::{truncate_energy_csv, EnergyCsvWriter};
use super::snapshot::{read_snapshot, write_snapshot, SnapshotError, SnapshotHeader};
use crate::energy::EnergyRecord;
use crate::harness::{
    run_spatial_study, run_temporal_study, ConvergenceRow, HarnessError, ManufacturedForcing,
    StudyParams,
};
use crate::io::config::StudyKind;
use crate::solver::{
    InitialCondition, Observer, Simulation, SimulationError, SimulationOutcome, SimulationSetup,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("initial condition: {0}")]
    InitialSnapshot(#[source] SnapshotError),
    #[error("initial snapshot grid does not match the configuration")]
    InitialGrid,
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Failures of the numerical method itself, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Self::Simulation(SimulationError::Solver { .. }) => true,
            Self::Harness(HarnessError::Run { source, .. }) => {
                matches!(source, SimulationError::Solver { .. })
            }
            _ => false,
        }
    }
}

pub fn setup_from_config(cfg: &RunConfig) -> Result<SimulationSetup, RunError> {
    let spec = cfg.grid();
    let initial = match &cfg.ic {
        IcSelector::Zero => InitialCondition::Zero,
        IcSelector::Example1 => InitialCondition::Example1,
        IcSelector::Example2 => InitialCondition::Example2,
        IcSelector::Random => InitialCondition::Random {
            amplitude: cfg.amplitude,
            seed: cfg.seed,
        },
        IcSelector::File(path) => {
            let (_, field) = read_snapshot(path).map_err(RunError::InitialSnapshot)?;
            if field.spec() != &spec {
                return Err(RunError::InitialGrid);
            }
            InitialCondition::Field(field)
        }
    };
    let params = cfg.params();
    Ok(SimulationSetup {
        spec,
        tau: cfg.tau,
        steps: cfg.steps,
        params,
        initial,
        forcing: if cfg.forcing {
            Some(Box::new(ManufacturedForcing::new(params)))
        } else {
            None
        },
        solve: cfg.solve_config(),
        sign_mode: cfg.sign_mode,
    })
}

pub fn energy_csv_path(dir: &Path) -> PathBuf {
    dir.join("energy.csv")
}

pub fn snapshot_path(dir: &Path, level: usize) -> PathBuf {
    dir.join(format!("snap_{level:08}.bin"))
}

pub fn checkpoint_path(dir: &Path, level: usize) -> PathBuf {
    dir.join(format!("ckpt_{level:08}.bin"))
}

struct FileObserver {
    dir: PathBuf,
    csv: EnergyCsvWriter,
    digest: String,
    snapshot_every: usize,
    checkpoint_every: usize,
    snapshots: Vec<PathBuf>,
    checkpoints: Vec<PathBuf>,
}

impl FileObserver {
    fn write_files(&mut self, sim: &Simulation, rec: &EnergyRecord) -> Result<(), String> {
        self.csv.write(rec).map_err(|e| e.to_string())?;
        let level = rec.level;
        let last = sim.is_finished();
        if (self.snapshot_every > 0 && level % self.snapshot_every == 0) || last {
            let s = sim.setup();
            let header = SnapshotHeader::new(&s.spec, s.tau, level, &s.params);
            let path = snapshot_path(&self.dir, level);
            write_snapshot(&path, &header, sim.history().newest()).map_err(|e| e.to_string())?;
            self.snapshots.push(path);
        }
        if self.checkpoint_every > 0 && level % self.checkpoint_every == 0 {
            let path = checkpoint_path(&self.dir, level);
            write_checkpoint(&path, &Checkpoint::capture(sim, self.digest.clone()))
                .map_err(|e| e.to_string())?;
            self.checkpoints.push(path);
        }
        Ok(())
    }
}

impl Observer for FileObserver {
    fn on_level(&mut self, sim: &Simulation, rec: &EnergyRecord) -> Result<(), String> {
        self.write_files(sim, rec)
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub outcome: SimulationOutcome,
    pub energy_csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    /// Level the run started from (0 for a fresh run).
    pub start_level: usize,
}

/// Runs `cfg`, writing artifacts to `cfg.output_dir`, optionally resuming from a checkpoint.
pub fn run_config(cfg: &RunConfig, resume: Option<&Path>) -> Result<RunSummary, RunError> {
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let setup = setup_from_config(cfg)?;
    let csv_path = energy_csv_path(&dir);
    let (sim, csv, start_level) = match resume {
        None => (Simulation::new(setup)?, EnergyCsvWriter::create(&csv_path)?, 0),
        Some(path) => {
            let ck = read_checkpoint(path)?;
            ck.check_against(cfg)?;
            let level = ck.level();
            truncate_energy_csv(&csv_path, level)?;
            let sim = Simulation::resume(setup, ck.history, ck.startup, ck.e0)?;
            (sim, EnergyCsvWriter::append(&csv_path)?, level)
        }
    };
    let mut obs = FileObserver {
        dir,
        csv,
        digest: cfg.digest(),
        snapshot_every: cfg.snapshot_every,
        checkpoint_every: cfg.checkpoint_every,
        snapshots: Vec::new(),
        checkpoints: Vec::new(),
    };
    let outcome = sim.run(&mut obs)?;
    Ok(RunSummary {
        outcome,
        energy_csv: csv_path,
        snapshots: obs.snapshots,
        checkpoints: obs.checkpoints,
        start_level,
    })
}

/// Runs the convergence study selected by `cfg.study`.
pub fn run_study(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>, RunError> {
    let study = StudyParams {
        dim: cfg.dim,
        params: cfg.params(),
        solve: cfg.solve_config(),
        sign_mode: cfg.sign_mode,
        forcing: Default::default(),
    };
    Ok(match cfg.study {
        StudyKind::Temporal => {
            run_temporal_study(&cfg.study_steps, cfg.points, cfg.final_time(), &study)?
        }
        StudyKind::Spatial => {
            run_spatial_study(&cfg.study_points, cfg.steps, cfg.final_time(), &study)?
        }
    })
}
