//! Time-loop driver: startup level, the two startup steps, then BDF3 steps,
//! with an energy record after every accepted level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{check_step_constraints, SolveConfig, SolverError, StepGuard, StepReport, StepSolver};
use crate::bdf::{initial_level, BdfError, SignMode, Startup, TimeHistory};
use crate::energy::{discrete_energy, energy_record, DissipationMonitor, EnergyRecord};
use crate::grid::{GridError, GridField, GridSpec, ModelParams};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("solver failed at level {level}: {source}")]
    Solver {
        level: usize,
        #[source]
        source: SolverError,
    },
    #[error("invalid initial condition: {0}")]
    InitialCondition(String),
    #[error(transparent)]
    Bdf(#[from] BdfError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("output failed at level {level}: {message}")]
    Observer { level: usize, message: String },
}

/// Source term added to the right-hand side of the equation.
pub trait Forcing: Send + Sync {
    fn eval(&self, spec: &GridSpec, t: f64) -> GridField;
}

/// Initial data `phi0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Zero,
    /// `prod_a sin(2 x_a)`.
    Example1,
    /// `0.1 + 0.02 cos(pi x/100) sin(pi y/100) + 0.05 sin(pi x/20) cos(pi y/20)`, 2D only.
    Example2,
    /// Independent uniform draws in `[-amplitude, amplitude]` from ChaCha8 seeded with `seed`.
    Random { amplitude: f64, seed: u64 },
    Field(GridField),
}

impl InitialCondition {
    pub fn build(&self, spec: GridSpec) -> Result<GridField, SimulationError> {
        use std::f64::consts::PI;
        Ok(match self {
            Self::Zero => GridField::zeros(spec),
            Self::Example1 => {
                GridField::from_fn(spec, |x| x.iter().map(|&xi| (2.0 * xi).sin()).product())
            }
            Self::Example2 => {
                if spec.dim() != 2 {
                    return Err(SimulationError::InitialCondition(
                        "example2 is a 2D initial condition".into(),
                    ));
                }
                GridField::from_fn(spec, |x| {
                    0.1 + 0.02 * (PI * x[0] / 100.0).cos() * (PI * x[1] / 100.0).sin()
                        + 0.05 * (PI * x[0] / 20.0).sin() * (PI * x[1] / 20.0).cos()
                })
            }
            Self::Random { amplitude, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let a = *amplitude;
                let vals = (0..spec.len()).map(|_| rng.gen_range(-a..=a)).collect();
                GridField::new(spec, vals)?
            }
            Self::Field(f) => {
                if f.spec() != &spec {
                    return Err(SimulationError::InitialCondition(
                        "initial field lives on a different grid".into(),
                    ));
                }
                f.clone()
            }
        })
    }
}

/// Everything needed to start a run.
pub struct SimulationSetup {
    pub spec: GridSpec,
    pub tau: f64,
    pub steps: usize,
    pub params: ModelParams,
    pub initial: InitialCondition,
    pub forcing: Option<Box<dyn Forcing>>,
    pub solve: SolveConfig,
    pub sign_mode: SignMode,
}

impl std::fmt::Debug for SimulationSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimulationSetup")
            .field("spec", &self.spec)
            .field("tau", &self.tau)
            .field("steps", &self.steps)
            .field("params", &self.params)
            .field("forcing", &self.forcing.is_some())
            .field("solve", &self.solve)
            .field("sign_mode", &self.sign_mode)
            .finish()
    }
}

/// Hook called after every accepted level (including level 0).
pub trait Observer {
    fn on_level(&mut self, sim: &Simulation, record: &EnergyRecord) -> Result<(), String>;
}

impl Observer for () {
    fn on_level(&mut self, _: &Simulation, _: &EnergyRecord) -> Result<(), String> {
        Ok(())
    }
}

/// A run in progress.
pub struct Simulation {
    setup: SimulationSetup,
    hist: TimeHistory,
    startup: Option<Startup>,
    solver: StepSolver,
    e0: f64,
    guard: StepGuard,
    monitor: DissipationMonitor,
    last_report: StepReport,
    fresh: bool,
}

impl Simulation {
    pub fn new(setup: SimulationSetup) -> Result<Self, SimulationError> {
        let phi0 = setup.initial.build(setup.spec)?;
        let forcing0 = setup.forcing.as_ref().map(|f| f.eval(&setup.spec, 0.0));
        let (u0, startup) = initial_level(
            &phi0,
            setup.tau,
            &setup.params,
            setup.sign_mode,
            forcing0.as_ref(),
        )?;
        let e0 = discrete_energy(&u0, &setup.params);
        let hist = TimeHistory::new(u0, setup.tau)?;
        let mut sim = Self::assemble(setup, hist, Some(startup), e0);
        sim.fresh = true;
        Ok(sim)
    }

    /// Continues from a stored history. `startup` is required when `hist.n() == 0`.
    pub fn resume(
        setup: SimulationSetup,
        hist: TimeHistory,
        startup: Option<Startup>,
        e0: f64,
    ) -> Result<Self, SimulationError> {
        if hist.newest().spec() != &setup.spec {
            return Err(GridError::SpecMismatch.into());
        }
        if hist.n() == 0 && startup.is_none() {
            return Err(BdfError::MissingStartup.into());
        }
        let mut sim = Self::assemble(setup, hist, startup, e0);
        let rec = energy_record(&sim.hist, &sim.setup.params, e0)?;
        sim.monitor = DissipationMonitor::resume(rec.modified_energy);
        Ok(sim)
    }

    fn assemble(setup: SimulationSetup, hist: TimeHistory, startup: Option<Startup>, e0: f64) -> Self {
        let solver = StepSolver::new(setup.spec, setup.solve);
        let guard = check_step_constraints(setup.tau, &setup.params);
        Self {
            setup,
            hist,
            startup,
            solver,
            e0,
            guard,
            monitor: DissipationMonitor::new(),
            last_report: StepReport::default(),
            fresh: false,
        }
    }

    pub fn setup(&self) -> &SimulationSetup {
        &self.setup
    }

    pub fn history(&self) -> &TimeHistory {
        &self.hist
    }

    pub fn startup(&self) -> Option<&Startup> {
        self.startup.as_ref()
    }

    /// Energy of the level-0 field.
    pub fn initial_energy(&self) -> f64 {
        self.e0
    }

    pub fn guard(&self) -> &StepGuard {
        &self.guard
    }

    pub fn monitor(&self) -> &DissipationMonitor {
        &self.monitor
    }

    pub fn last_report(&self) -> &StepReport {
        &self.last_report
    }

    pub fn level(&self) -> usize {
        self.hist.n()
    }

    pub fn time(&self) -> f64 {
        self.hist.n() as f64 * self.setup.tau
    }

    pub fn is_finished(&self) -> bool {
        self.hist.n() >= self.setup.steps
    }

    /// Record of the current newest level.
    pub fn current_record(&self) -> Result<EnergyRecord, SimulationError> {
        let mut rec = energy_record(&self.hist, &self.setup.params, self.e0)?;
        rec.newton_iters = self.last_report.newton_iters;
        rec.residual = self.last_report.final_residual_l2;
        Ok(rec)
    }

    /// Advances one level.
    pub fn step(&mut self) -> Result<EnergyRecord, SimulationError> {
        let level = self.hist.n() + 1;
        let t = level as f64 * self.setup.tau;
        let forcing = self.setup.forcing.as_ref().map(|f| f.eval(&self.setup.spec, t));
        let (next, mut report) = self
            .solver
            .solve(
                &self.hist,
                level,
                self.startup.as_ref(),
                &self.setup.params,
                forcing.as_ref(),
            )
            .map_err(|source| SimulationError::Solver { level, source })?;
        report.guard_flags.solvability_violated = !self.guard.solvability_ok;
        report.guard_flags.energy_violated = !self.guard.energy_ok;
        self.hist.push(next)?;
        self.last_report = report;
        let rec = self.current_record()?;
        self.monitor.observe(&rec);
        Ok(rec)
    }

    /// Runs to the configured step count, calling `observer` after each level.
    pub fn run(mut self, observer: &mut dyn Observer) -> Result<SimulationOutcome, SimulationError> {
        let mut records = Vec::with_capacity(self.setup.steps + 1);
        let mut reports = Vec::with_capacity(self.setup.steps);
        if self.fresh {
            self.fresh = false;
            let rec = self.current_record()?;
            self.monitor.observe(&rec);
            observer
                .on_level(&self, &rec)
                .map_err(|message| SimulationError::Observer { level: 0, message })?;
            records.push(rec);
        }
        while !self.is_finished() {
            let rec = self.step()?;
            observer.on_level(&self, &rec).map_err(|message| SimulationError::Observer {
                level: rec.level,
                message,
            })?;
            records.push(rec);
            reports.push(self.last_report.clone());
        }
        Ok(SimulationOutcome {
            records,
            reports,
            final_field: self.hist.newest().clone(),
            monitor: self.monitor,
            guard: self.guard,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    /// One record per level produced by this run.
    pub records: Vec<EnergyRecord>,
    /// One report per solved step.
    pub reports: Vec<StepReport>,
    pub final_field: GridField,
    pub monitor: DissipationMonitor,
    pub guard: StepGuard,
}

/// Builds and runs a simulation in one call.
pub fn run_simulation(
    setup: SimulationSetup,
    observer: &mut dyn Observer,
) -> Result<SimulationOutcome, SimulationError> {
    Simulation::new(setup)?.run(observer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_stays_zero() {
        let spec = GridSpec::new(2, 10.0, 8).unwrap();
        let setup = SimulationSetup {
            spec,
            tau: 0.1,
            steps: 5,
            params: ModelParams::new(0.5, 0.25),
            initial: InitialCondition::Zero,
            forcing: None,
            solve: SolveConfig::default(),
            sign_mode: SignMode::Corrected,
        };
        let out = run_simulation(setup, &mut ()).unwrap();
        assert_eq!(out.records.len(), 6);
        assert!(out.final_field.values().iter().all(|&v| v == 0.0));
        assert!(out
            .records
            .iter()
            .all(|r| r.energy == 0.0 && r.modified_energy == 0.0));
    }

    #[test]
    fn random_initial_data_is_seeded() {
        let spec = GridSpec::new(3, 4.0, 5).unwrap();
        let ic = InitialCondition::Random {
            amplitude: 0.01,
            seed: 42,
        };
        let a = ic.build(spec).unwrap();
        let b = ic.build(spec).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|v| v.abs() <= 0.01));
        let c = InitialCondition::Random {
            amplitude: 0.01,
            seed: 43,
        }
        .build(spec)
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn example2_rejects_3d() {
        let spec = GridSpec::new(3, 100.0, 4).unwrap();
        assert!(InitialCondition::Example2.build(spec).is_err());
    }
}
