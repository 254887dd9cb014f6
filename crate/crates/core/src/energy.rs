//! Discrete energy, modified energy and the a-priori `L^2`-type bound that
//! the energy law implies.

use crate::bdf::{BdfError, TimeHistory};
use crate::grid::{inner, norm, one_plus_laplacian, pairwise_sum, GridField, ModelParams, Norm};

/// Per-level diagnostics written to the energy log.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub level: usize,
    pub time: f64,
    pub energy: f64,
    pub modified_energy: f64,
    pub l2: f64,
    pub l4: f64,
    pub linf: f64,
    pub bound_lhs: f64,
    pub bound_rhs: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

/// `E[u] = 1/2 ||(1 + Delta_h) u||^2 + 1/4 ||u||_4^4 - g/3 <u^2, u> - eps/2 ||u||^2`.
pub fn discrete_energy(u: &GridField, params: &ModelParams) -> f64 {
    let shifted = one_plus_laplacian(u);
    let spec = u.spec();
    let vals = u.values();
    let quad = norm(&shifted, Norm::L2).powi(2);
    let l2sq = norm(u, Norm::L2).powi(2);
    let quartic = spec.cell_volume() * pairwise_sum(vals.len(), &|i| (vals[i] * vals[i]).powi(2));
    let cubic = spec.cell_volume() * pairwise_sum(vals.len(), &|i| vals[i] * vals[i] * vals[i]);
    0.5 * quad + 0.25 * quartic - params.g / 3.0 * cubic - 0.5 * params.eps * l2sq
}

/// Modified energy of the newest level in `hist`: `E` plus the backward-difference
/// terms `3/(4 tau) ||nabla u^n||^2 + 1/(6 tau) ||nabla u^{n-1}||^2` (whichever exist).
pub fn modified_energy(hist: &TimeHistory, params: &ModelParams) -> Result<f64, BdfError> {
    let tau = hist.tau();
    let level = hist.n();
    let mut e = discrete_energy(hist.newest(), params);
    let needed = level.min(2) + 1;
    if hist.stored() < needed {
        return Err(BdfError::InsufficientHistory {
            level,
            needed,
            available: hist.stored(),
        });
    }
    if level >= 1 {
        let d = hist.backward_difference(0).expect("checked above");
        e += 3.0 / (4.0 * tau) * inner(&d, &d)?;
    }
    if level >= 2 {
        let d = hist.backward_difference(1).expect("checked above");
        e += 1.0 / (6.0 * tau) * inner(&d, &d)?;
    }
    Ok(e)
}

/// Both sides of `(||(1 + Delta_h) u|| + ||u||)^2 <= 4 E[u^0] + 9/7 (1 + eps + g^2)^2 |Omega_h|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinfBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn linf_bound_check(u: &GridField, e0: f64, params: &ModelParams) -> LinfBound {
    let a = norm(&one_plus_laplacian(u), Norm::L2);
    let b = norm(u, Norm::L2);
    let lhs = (a + b) * (a + b);
    let k = 1.0 + params.eps + params.g * params.g;
    let rhs = 4.0 * e0 + 9.0 / 7.0 * k * k * u.spec().volume();
    LinfBound {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9 * (1.0 + rhs.abs()),
    }
}

/// Fills the field-derived columns of a record for the newest level of `hist`.
pub fn energy_record(
    hist: &TimeHistory,
    params: &ModelParams,
    e0: f64,
) -> Result<EnergyRecord, BdfError> {
    let u = hist.newest();
    let bound = linf_bound_check(u, e0, params);
    Ok(EnergyRecord {
        level: hist.n(),
        time: hist.n() as f64 * hist.tau(),
        energy: discrete_energy(u, params),
        modified_energy: modified_energy(hist, params)?,
        l2: norm(u, Norm::L2),
        l4: norm(u, Norm::L4),
        linf: norm(u, Norm::Inf),
        bound_lhs: bound.lhs,
        bound_rhs: bound.rhs,
        newton_iters: 0,
        residual: 0.0,
    })
}

/// Tracks the modified energy across accepted levels.
#[derive(Debug, Clone, Default)]
pub struct DissipationMonitor {
    last: Option<f64>,
    /// `(level, increase)` for every level whose modified energy went up beyond tolerance.
    pub increases: Vec<(usize, f64)>,
    /// Levels where `E > E_mod`.
    pub ordering_violations: Vec<usize>,
    /// Levels where the bound check failed.
    pub bound_violations: Vec<usize>,
}

impl DissipationMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resumes monitoring with the modified energy of an already-accepted level.
    pub fn resume(last_modified_energy: f64) -> Self {
        Self {
            last: Some(last_modified_energy),
            ..Self::default()
        }
    }

    pub fn observe(&mut self, rec: &EnergyRecord) {
        let tol = 1e-10 * (1.0 + rec.modified_energy.abs());
        if let Some(prev) = self.last {
            if rec.modified_energy > prev + tol {
                self.increases.push((rec.level, rec.modified_energy - prev));
            }
        }
        if rec.energy > rec.modified_energy + tol {
            self.ordering_violations.push(rec.level);
        }
        if rec.bound_lhs > rec.bound_rhs + 1e-9 * (1.0 + rec.bound_rhs.abs()) {
            self.bound_violations.push(rec.level);
        }
        self.last = Some(rec.modified_energy);
    }

    pub fn is_dissipative(&self) -> bool {
        self.increases.is_empty() && self.ordering_violations.is_empty()
    }
}
