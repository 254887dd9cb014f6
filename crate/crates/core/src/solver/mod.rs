//! The implicit step: Newton iteration on the nonlinear level equation with
//! linear solves built on the Fourier inverse of `b0 + (1 + Delta_h)^2`.

mod fourier;
pub mod simulation;

pub use fourier::FourierOperator;
pub use simulation::{
    run_simulation, Forcing, InitialCondition, Observer, Simulation, SimulationError,
    SimulationOutcome, SimulationSetup,
};

use thiserror::Error;

use crate::bdf::{lagged_rhs, BdfError, BdfKernels, Startup, TimeHistory};
use crate::grid::{
    norm_l2_slice, shifted_squared, shifted_squared_into, GridError, GridField, GridSpec,
    ModelParams,
};

/// Roundoff allowance for residual evaluation, in units of
/// `eps_mach * ||operator|| * ||w||`. The biharmonic stencil loses this much
/// relative accuracy on fine grids.
const ROUNDOFF_FACTOR: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearMode {
    /// Stationary iteration with the mean-coefficient Fourier inverse; a direct
    /// solve when the Jacobian is spatially constant.
    FourierDirect,
    /// Conjugate gradients preconditioned by the mean-coefficient Fourier inverse.
    #[default]
    Iterative,
}

impl std::str::FromStr for LinearMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fourier_direct" => Ok(Self::FourierDirect),
            "iterative" => Ok(Self::Iterative),
            other => Err(format!("unknown linear_mode '{other}'")),
        }
    }
}

impl std::fmt::Display for LinearMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FourierDirect => "fourier_direct",
            Self::Iterative => "iterative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    /// Target for the `L^2` norm of the nonlinear residual.
    pub abs_tol: f64,
    pub max_newton_iters: usize,
    pub max_inner_iters: usize,
    pub linear_mode: LinearMode,
    /// Relative reduction requested from each inner linear solve.
    pub inner_rel_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_newton_iters: 50,
            max_inner_iters: 500,
            linear_mode: LinearMode::Iterative,
            inner_rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GuardFlags {
    pub solvability_violated: bool,
    pub energy_violated: bool,
    /// Newton stopped at the residual roundoff floor instead of `abs_tol`.
    pub convergence_violated: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    /// Residual evaluations, including the final converged one.
    pub newton_iters: usize,
    pub linear_iters: usize,
    pub final_residual_l2: f64,
    /// Tolerance the step was accepted against: `abs_tol`, or the roundoff floor if larger.
    pub tolerance: f64,
    pub residual_history: Vec<f64>,
    pub guard_flags: GuardFlags,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("Newton did not converge at level {level}: residual {residual:e} after {iters} iterations")]
    NonConvergence {
        level: usize,
        residual: f64,
        iters: usize,
        best: Box<GridField>,
        report: StepReport,
    },
    #[error("linear solve broke down: {0}")]
    LinearBreakdown(String),
    #[error(transparent)]
    Bdf(#[from] BdfError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `lead * w - rhs_g + (1 + Delta_h)^2 w + f(w) - forcing`.
pub fn residual(
    candidate: &GridField,
    rhs_g: &GridField,
    lead_weight: f64,
    params: &ModelParams,
    forcing: Option<&GridField>,
) -> Result<GridField, GridError> {
    candidate.check_same(rhs_g)?;
    if let Some(src) = forcing {
        candidate.check_same(src)?;
    }
    let mut out = shifted_squared(candidate);
    let w = candidate.values();
    let g = rhs_g.values();
    for (i, o) in out.values_mut().iter_mut().enumerate() {
        *o += lead_weight * w[i] - g[i] + params.f(w[i]);
    }
    if let Some(src) = forcing {
        out.axpy(-1.0, src)?;
    }
    Ok(out)
}

/// Step-size thresholds from the solvability and energy-stability theorems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGuard {
    pub tau: f64,
    /// `3 / (2 (g^2 + eps))`; the step must be strictly below it.
    pub tau_solvability: f64,
    /// `1 / (2 g^2 + 3 eps / 2)`.
    pub tau_energy: f64,
    /// Thresholds from `b0^(n) > g^2 + eps` for levels 1, 2 and `>= 3`.
    pub tau_solvability_per_level: [f64; 3],
    pub solvability_ok: bool,
    pub energy_ok: bool,
}

pub fn check_step_constraints(tau: f64, params: &ModelParams) -> StepGuard {
    let s = params.g * params.g + params.eps;
    let e = 2.0 * params.g * params.g + 1.5 * params.eps;
    let over = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    let tau_solvability = over(3.0, 2.0 * s);
    let tau_energy = over(1.0, e);
    StepGuard {
        tau,
        tau_solvability,
        tau_energy,
        tau_solvability_per_level: [over(2.0, s), over(1.5, s), over(11.0 / 6.0, s)],
        solvability_ok: tau < tau_solvability,
        energy_ok: tau <= tau_energy,
    }
}

/// Owns the Fourier plans and work arrays for repeated implicit steps on one grid.
#[derive(Debug)]
pub struct StepSolver {
    op: FourierOperator,
    cfg: SolveConfig,
    scratch: Vec<f64>,
}

impl StepSolver {
    pub fn new(spec: GridSpec, cfg: SolveConfig) -> Self {
        Self {
            op: FourierOperator::new(spec),
            cfg,
            scratch: vec![0.0; spec.len()],
        }
    }

    pub fn config(&self) -> &SolveConfig {
        &self.cfg
    }

    pub fn fourier(&mut self) -> &mut FourierOperator {
        &mut self.op
    }

    /// Solves the level equation `Pi_n(w) = forcing` for `w = u^level`.
    pub fn solve(
        &mut self,
        hist: &TimeHistory,
        level: usize,
        startup: Option<&Startup>,
        params: &ModelParams,
        forcing: Option<&GridField>,
    ) -> Result<(GridField, StepReport), SolverError> {
        let rhs_g = lagged_rhs(hist, level, startup)?;
        let lead = BdfKernels::new(hist.tau())?.lead_weight(level);
        let guess = initial_guess(hist);
        self.solve_level(level, guess, &rhs_g, lead, params, forcing)
    }

    /// Newton iteration on `residual(w, rhs_g, lead, ..) = 0` from `guess`.
    pub fn solve_level(
        &mut self,
        level: usize,
        guess: GridField,
        rhs_g: &GridField,
        lead: f64,
        params: &ModelParams,
        forcing: Option<&GridField>,
    ) -> Result<(GridField, StepReport), SolverError> {
        let spec = *guess.spec();
        let mut w = guess;
        let mut report = StepReport::default();
        let op_norm = lead + self.op.symbol_max();
        let mut best: Option<(f64, GridField)> = None;

        for it in 0..=self.cfg.max_newton_iters {
            let r = residual(&w, rhs_g, lead, params, forcing)?;
            let rn = norm_l2_slice(&spec, r.values());
            report.newton_iters = it + 1;
            report.residual_history.push(rn);
            report.final_residual_l2 = rn;

            let jac_max = w.values().iter().fold(0.0_f64, |m, &u| m.max(params.df(u).abs()));
            let w_norm = norm_l2_slice(&spec, w.values());
            let floor = ROUNDOFF_FACTOR * f64::EPSILON * (op_norm + jac_max) * w_norm;
            let tol = self.cfg.abs_tol.max(floor);
            report.tolerance = tol;
            if rn <= tol {
                report.guard_flags.convergence_violated = rn > self.cfg.abs_tol;
                return Ok((w, report));
            }
            if best.as_ref().map_or(true, |(b, _)| rn < *b) {
                best = Some((rn, w.clone()));
            }
            if it == self.cfg.max_newton_iters {
                break;
            }

            let jac: Vec<f64> = w.values().iter().map(|&u| params.df(u)).collect();
            let mut rhs = r.into_values();
            rhs.iter_mut().for_each(|v| *v = -*v);
            let (delta, iters) = self.solve_linear(lead, &jac, &rhs)?;
            report.linear_iters += iters;
            for (x, d) in w.values_mut().iter_mut().zip(&delta) {
                *x += d;
            }
        }

        let (residual, best) = best.expect("at least one non-converged iterate");
        Err(SolverError::NonConvergence {
            level,
            residual,
            iters: report.newton_iters,
            best: Box::new(best),
            report,
        })
    }

    /// Solves `(lead I + (1 + Delta_h)^2 + diag(jac)) x = rhs`; returns `x` and the iteration count.
    pub fn solve_linear(
        &mut self,
        lead: f64,
        jac: &[f64],
        rhs: &[f64],
    ) -> Result<(Vec<f64>, usize), SolverError> {
        match self.cfg.linear_mode {
            LinearMode::Iterative => self.pcg(lead, jac, rhs),
            LinearMode::FourierDirect => self.split_iteration(lead, jac, rhs),
        }
    }

    /// Applies the full Newton operator via the stencil.
    pub fn apply_linear(&mut self, lead: f64, jac: &[f64], x: &[f64], out: &mut [f64]) {
        let spec = *self.op.spec();
        shifted_squared_into(&spec, x, &mut self.scratch, out);
        for i in 0..x.len() {
            out[i] += (lead + jac[i]) * x[i];
        }
    }

    fn mean_shift(&self, lead: f64, jac: &[f64]) -> Result<f64, SolverError> {
        let spec = self.op.spec();
        let mean = crate::grid::pairwise_sum(jac.len(), &|i| jac[i]) / jac.len() as f64;
        let shift = lead + mean;
        if self.op.min_shifted_symbol(shift) <= 0.0 {
            return Err(SolverError::LinearBreakdown(format!(
                "mean-coefficient operator is not positive definite (shift {shift:e}, M = {})",
                spec.points()
            )));
        }
        Ok(shift)
    }

    fn pcg(&mut self, lead: f64, jac: &[f64], b: &[f64]) -> Result<(Vec<f64>, usize), SolverError> {
        let n = b.len();
        let shift = self.mean_shift(lead, jac)?;
        let dot = |a: &[f64], c: &[f64]| crate::grid::pairwise_sum(a.len(), &|i| a[i] * c[i]);

        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let b_norm = dot(b, b).sqrt();
        if b_norm == 0.0 {
            return Ok((x, 0));
        }
        let target = self.cfg.inner_rel_tol * b_norm;
        let mut z = vec![0.0; n];
        self.op.solve_shifted(shift, &r, &mut z).expect("shift checked");
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];

        for it in 1..=self.cfg.max_inner_iters {
            self.apply_linear(lead, jac, &p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(SolverError::LinearBreakdown(format!(
                    "Newton matrix is not positive definite (p.Ap = {pap:e})"
                )));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if dot(&r, &r).sqrt() <= target {
                return Ok((x, it));
            }
            self.op.solve_shifted(shift, &r, &mut z).expect("shift checked");
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(SolverError::LinearBreakdown(format!(
            "conjugate gradients did not reach the requested reduction in {} iterations",
            self.cfg.max_inner_iters
        )))
    }

    fn split_iteration(
        &mut self,
        lead: f64,
        jac: &[f64],
        b: &[f64],
    ) -> Result<(Vec<f64>, usize), SolverError> {
        let n = b.len();
        let shift = self.mean_shift(lead, jac)?;
        let mean = shift - lead;
        let dev: Vec<f64> = jac.iter().map(|&j| j - mean).collect();
        let constant = dev.iter().all(|&d| d == 0.0);

        let mut x = vec![0.0; n];
        self.op.solve_shifted(shift, b, &mut x).expect("shift checked");
        if constant {
            return Ok((x, 1));
        }
        let l2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut rhs = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut last_update = f64::INFINITY;
        for it in 2..=self.cfg.max_inner_iters {
            for i in 0..n {
                rhs[i] = b[i] - dev[i] * x[i];
            }
            self.op.solve_shifted(shift, &rhs, &mut next).expect("shift checked");
            let update: f64 = l2(&next
                .iter()
                .zip(&x)
                .map(|(a, c)| a - c)
                .collect::<Vec<_>>());
            std::mem::swap(&mut x, &mut next);
            if update <= self.cfg.inner_rel_tol * l2(&x) {
                return Ok((x, it));
            }
            if it > 4 && update > last_update {
                return Err(SolverError::LinearBreakdown(
                    "mean-coefficient splitting iteration diverges; use the iterative linear mode"
                        .into(),
                ));
            }
            last_update = update;
        }
        Err(SolverError::LinearBreakdown(format!(
            "splitting iteration did not converge in {} iterations",
            self.cfg.max_inner_iters
        )))
    }
}

/// Cubic extrapolation `3 u^n - 3 u^{n-1} + u^{n-2}` when three levels are stored,
/// otherwise the newest level.
pub fn initial_guess(hist: &TimeHistory) -> GridField {
    match (hist.level(0), hist.level(1), hist.level(2)) {
        (Some(a), Some(b), Some(c)) => {
            let (a, b, c) = (a.values(), b.values(), c.values());
            let vals = (0..a.len()).map(|i| 3.0 * a[i] - 3.0 * b[i] + c[i]).collect();
            GridField::new(*hist.newest().spec(), vals).expect("same spec")
        }
        _ => hist.newest().clone(),
    }
}

/// One-shot convenience wrapper around [`StepSolver::solve`].
pub fn newton_step_solve(
    hist: &TimeHistory,
    level: usize,
    startup: Option<&Startup>,
    cfg: SolveConfig,
    params: &ModelParams,
    forcing: Option<&GridField>,
) -> Result<(GridField, StepReport), SolverError> {
    let mut solver = StepSolver::new(*hist.newest().spec(), cfg);
    let (w, mut report) = solver.solve(hist, level, startup, params, forcing)?;
    let guard = check_step_constraints(hist.tau(), params);
    report.guard_flags.solvability_violated = !guard.solvability_ok;
    report.guard_flags.energy_violated = !guard.energy_ok;
    Ok((w, report))
}
