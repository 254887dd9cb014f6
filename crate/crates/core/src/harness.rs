//! Manufactured-solution convergence studies.
//!
//! The reference solution is `u = cos(t) prod_a sin(2 x_a)` on `(0, 2 pi)^dim`.
//! The compensating source is built from the continuous operators, so the
//! measured error mixes the `O(tau^3)` temporal and `O(h^2)` spatial parts.

use std::fmt::Write as _;

use thiserror::Error;

use crate::bdf::SignMode;
use crate::grid::{laplacian_symbol_1d, norm, GridError, GridField, GridSpec, ModelParams, Norm};
use crate::solver::simulation::Forcing;
use crate::solver::{run_simulation, InitialCondition, SimulationError, SimulationSetup, SolveConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("orders need positive errors, got {0:e} and {1:e}")]
    NonPositiveError(f64, f64),
    #[error("study inputs must be strictly increasing")]
    NotIncreasing,
    #[error("run with N = {steps}, M = {points} failed: {source}")]
    Run {
        steps: usize,
        points: usize,
        #[source]
        source: SimulationError,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Manufactured solution at a point.
pub fn exact_solution(point: &[f64], t: f64) -> f64 {
    t.cos() * point.iter().map(|&x| (2.0 * x).sin()).product::<f64>()
}

/// `u_t + (1 + Delta)^2 u + f(u)` for the manufactured solution, using `Delta u = -4 dim u`.
pub fn manufactured_forcing(point: &[f64], t: f64, params: &ModelParams) -> f64 {
    let mode: f64 = point.iter().map(|&x| (2.0 * x).sin()).product();
    let shift = 1.0 - 4.0 * point.len() as f64;
    let u = t.cos() * mode;
    (-t.sin() + shift * shift * t.cos()) * mode + params.f(u)
}

/// How the linear part of the manufactured source is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForcingKind {
    /// Continuous operators, as in [`manufactured_forcing`].
    #[default]
    Continuous,
    /// Grid symbol `(1 + lambda_h)^2` of the sampled mode in place of `(1 - 4 dim)^2`.
    /// The sampled solution then solves the semi-discrete problem exactly, so the
    /// measured error is purely temporal. Diagnostic only.
    GridConsistent,
}

/// Source term for the manufactured solution on `(0, 2 pi)^dim`.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedForcing {
    pub params: ModelParams,
    pub kind: ForcingKind,
}

impl ManufacturedForcing {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            kind: ForcingKind::Continuous,
        }
    }
}

impl Forcing for ManufacturedForcing {
    fn eval(&self, spec: &GridSpec, t: f64) -> GridField {
        match self.kind {
            ForcingKind::Continuous => {
                GridField::from_fn(*spec, |x| manufactured_forcing(x, t, &self.params))
            }
            ForcingKind::GridConsistent => {
                let m = spec.points();
                let per_axis = laplacian_symbol_1d(2, m, 2.0 * std::f64::consts::PI / m as f64);
                let shift = 1.0 + spec.dim() as f64 * per_axis;
                GridField::from_fn(*spec, |x| {
                    let mode: f64 = x.iter().map(|&xi| (2.0 * xi).sin()).product();
                    let u = t.cos() * mode;
                    (-t.sin() + shift * shift * t.cos()) * mode + self.params.f(u)
                })
            }
        }
    }
}

/// `log2(e_coarse / e_fine)`.
pub fn estimate_order(e_coarse: f64, e_fine: f64) -> Result<f64, HarnessError> {
    if !(e_coarse > 0.0 && e_fine > 0.0) {
        return Err(HarnessError::NonPositiveError(e_coarse, e_fine));
    }
    Ok((e_coarse / e_fine).log2())
}

/// Order between two refinements whose resolution ratio is `refinement`.
fn order_for_ratio(e_coarse: f64, e_fine: f64, refinement: f64) -> Result<f64, HarnessError> {
    Ok(estimate_order(e_coarse, e_fine)? / refinement.log2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub tau: f64,
    pub points: usize,
    pub error_l2: f64,
    pub order: Option<f64>,
}

/// Fills `order` from consecutive rows, given each row's resolution measure.
pub fn assign_orders(
    rows: &mut [ConvergenceRow],
    resolution: impl Fn(&ConvergenceRow) -> f64,
) -> Result<(), HarnessError> {
    for i in 1..rows.len() {
        let ratio = resolution(&rows[i]) / resolution(&rows[i - 1]);
        rows[i].order = Some(order_for_ratio(rows[i - 1].error_l2, rows[i].error_l2, ratio)?);
    }
    Ok(())
}

/// Shared inputs of a study.
#[derive(Debug, Clone, Copy)]
pub struct StudyParams {
    pub dim: usize,
    pub params: ModelParams,
    pub solve: SolveConfig,
    pub sign_mode: SignMode,
    pub forcing: ForcingKind,
}

impl StudyParams {
    pub fn new(params: ModelParams) -> Self {
        Self {
            dim: 2,
            params,
            solve: SolveConfig::default(),
            sign_mode: SignMode::Corrected,
            forcing: ForcingKind::Continuous,
        }
    }
}

/// `L^2` error at `t = steps * tau` of one forced run through the production solver.
pub fn manufactured_error(
    points: usize,
    steps: usize,
    final_time: f64,
    study: &StudyParams,
) -> Result<f64, HarnessError> {
    let spec = GridSpec::new(study.dim, 2.0 * std::f64::consts::PI, points)?;
    let tau = final_time / steps as f64;
    let setup = SimulationSetup {
        spec,
        tau,
        steps,
        params: study.params,
        initial: InitialCondition::Example1,
        forcing: Some(Box::new(ManufacturedForcing {
            params: study.params,
            kind: study.forcing,
        })),
        solve: study.solve,
        sign_mode: study.sign_mode,
    };
    let out = run_simulation(setup, &mut ()).map_err(|source| HarnessError::Run {
        steps,
        points,
        source,
    })?;
    let t = steps as f64 * tau;
    let exact = GridField::from_fn(spec, |x| exact_solution(x, t));
    let diff = out.final_field.zip_map(&exact, |a, b| a - b)?;
    Ok(norm(&diff, Norm::L2))
}

fn strictly_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Final-time errors for each step count at a fixed grid.
pub fn run_temporal_study(
    steps: &[usize],
    points: usize,
    final_time: f64,
    study: &StudyParams,
) -> Result<Vec<ConvergenceRow>, HarnessError> {
    if !strictly_increasing(steps) {
        return Err(HarnessError::NotIncreasing);
    }
    let mut rows = steps
        .iter()
        .map(|&n| {
            Ok(ConvergenceRow {
                steps: n,
                tau: final_time / n as f64,
                points,
                error_l2: manufactured_error(points, n, final_time, study)?,
                order: None,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    assign_orders(&mut rows, |r| r.steps as f64)?;
    Ok(rows)
}

/// Final-time errors for each grid at a fixed (small) step.
pub fn run_spatial_study(
    points: &[usize],
    steps: usize,
    final_time: f64,
    study: &StudyParams,
) -> Result<Vec<ConvergenceRow>, HarnessError> {
    if !strictly_increasing(points) {
        return Err(HarnessError::NotIncreasing);
    }
    let mut rows = points
        .iter()
        .map(|&m| {
            Ok(ConvergenceRow {
                steps,
                tau: final_time / steps as f64,
                points: m,
                error_l2: manufactured_error(m, steps, final_time, study)?,
                order: None,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    assign_orders(&mut rows, |r| r.points as f64)?;
    Ok(rows)
}

pub const CONVERGENCE_CSV_HEADER: &str = "N,tau,M,error_l2,order";

/// CSV with columns `N,tau,M,error_l2,order`; the first row's order is empty.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(CONVERGENCE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let order = r.order.map(|o| format!("{o:.16e}")).unwrap_or_default();
        let _ = writeln!(out, "{},{:.16e},{},{:.16e},{}", r.steps, r.tau, r.points, r.error_l2, order);
    }
    out
}

/// Fixed-width table for terminals.
pub fn convergence_summary(rows: &[ConvergenceRow]) -> String {
    let mut out = format!("{:>6} {:>12} {:>6} {:>12} {:>7}\n", "N", "tau", "M", "e", "order");
    for r in rows {
        let order = r.order.map(|o| format!("{o:.2}")).unwrap_or_else(|| "*".into());
        let _ = writeln!(
            out,
            "{:>6} {:>12.5e} {:>6} {:>12.4e} {:>7}",
            r.steps, r.tau, r.points, r.error_l2, order
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn forcing_examples() {
        let p = ModelParams::new(1.0, 0.25);
        for &t in &[0.0, 0.4, 3.0] {
            assert_eq!(manufactured_forcing(&[0.0, 1.3], t, &p), 0.0);
        }
        let q = [PI / 4.0, PI / 4.0];
        assert!((manufactured_forcing(&q, PI / 2.0, &p) + 1.0).abs() < 1e-14);
        // 49 + 1 - g - eps
        assert!((manufactured_forcing(&q, 0.0, &p) - 48.75).abs() < 1e-12);
    }

    #[test]
    fn grid_consistent_forcing_tends_to_continuous() {
        let p = ModelParams::new(1.0, 0.25);
        let mut gaps = Vec::new();
        for m in [32usize, 64, 128] {
            let spec = GridSpec::new(2, 2.0 * PI, m).unwrap();
            let cont = ManufacturedForcing::new(p).eval(&spec, 0.7);
            let disc = ManufacturedForcing { params: p, kind: ForcingKind::GridConsistent }.eval(&spec, 0.7);
            let diff = cont.zip_map(&disc, |a, b| a - b).unwrap();
            gaps.push(norm(&diff, Norm::L2));
        }
        assert!((estimate_order(gaps[0], gaps[1]).unwrap() - 2.0).abs() < 0.05);
        assert!((estimate_order(gaps[1], gaps[2]).unwrap() - 2.0).abs() < 0.05);
    }

    #[test]
    fn exact_solution_examples() {
        let q = [PI / 4.0, PI / 4.0];
        assert!(exact_solution(&[0.3, 1.1], PI / 2.0).abs() < 1e-16);
        assert!((exact_solution(&q, 0.0) - 1.0).abs() < 1e-15);
        assert!((exact_solution(&q, 10.0) + 0.8390715290764524).abs() < 1e-12);
    }

    #[test]
    fn order_estimates() {
        assert!((estimate_order(5.699e-2, 7.321e-3).unwrap() - 2.96).abs() < 5e-3);
        assert_eq!(estimate_order(8.0, 1.0).unwrap(), 3.0);
        assert_eq!(estimate_order(1.0, 1.0).unwrap(), 0.0);
        assert!(estimate_order(0.0, 1.0).is_err());
        assert!(estimate_order(1.0, -1.0).is_err());
    }

    #[test]
    fn synthetic_orders() {
        let mut rows: Vec<ConvergenceRow> = [10usize, 20, 40, 80]
            .iter()
            .map(|&n| ConvergenceRow {
                steps: n,
                tau: 10.0 / n as f64,
                points: 64,
                error_l2: 3.0 / (n as f64).powi(3),
                order: None,
            })
            .collect();
        assign_orders(&mut rows, |r| r.steps as f64).unwrap();
        assert!(rows[0].order.is_none());
        assert!(rows[1..].iter().all(|r| (r.order.unwrap() - 3.0).abs() < 1e-12));

        let mut rows: Vec<ConvergenceRow> = [16usize, 32, 64]
            .iter()
            .map(|&m| ConvergenceRow {
                steps: 1000,
                tau: 1e-3,
                points: m,
                error_l2: 1.0 / (m * m) as f64,
                order: None,
            })
            .collect();
        assign_orders(&mut rows, |r| r.points as f64).unwrap();
        assert!(rows[1..].iter().all(|r| (r.order.unwrap() - 2.0).abs() < 1e-12));
    }

    #[test]
    fn csv_layout() {
        let rows = [
            ConvergenceRow { steps: 10, tau: 1.0, points: 8, error_l2: 0.5, order: None },
            ConvergenceRow { steps: 20, tau: 0.5, points: 8, error_l2: 0.0625, order: Some(3.0) },
        ];
        let csv = convergence_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "N,tau,M,error_l2,order");
        assert_eq!(lines[1], "10,1.0000000000000000e0,8,5.0000000000000000e-1,");
        assert!(lines[2].ends_with(",3.0000000000000000e0"));
    }

    #[test]
    fn rejects_unsorted_inputs() {
        let s = StudyParams::new(ModelParams::new(1.0, 0.25));
        assert!(matches!(run_temporal_study(&[20, 10], 8, 1.0, &s), Err(HarnessError::NotIncreasing)));
    }
}
