//! BDF3 convolution kernels, startup weights and the rolling solution history.
//!
//! Levels 1 and 2 use the trapezoid-type and BDF2 startup formulas; from
//! level 3 on the three-weight BDF3 convolution applies. The history keeps
//! only the three newest levels because the kernels vanish beyond lag 2.

use std::collections::VecDeque;

use thiserror::Error;

use crate::grid::{f_eval, shifted_squared, GridError, GridField, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BdfError {
    #[error("tau must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("level {level} needs {needed} stored levels, history has {available}")]
    InsufficientHistory {
        level: usize,
        needed: usize,
        available: usize,
    },
    #[error("requested level {requested}, but the next level after the history is {expected}")]
    LevelMismatch { requested: usize, expected: usize },
    #[error("level 1 needs the startup pair (phi0, phi1)")]
    MissingStartup,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// BDF3 weights `b0, b1, b2` and the leading weights of the two startup steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdfKernels {
    pub tau: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    /// Leading weight `2 / tau` of level 1.
    pub b0_first: f64,
    /// Leading weight `3 / (2 tau)` of level 2.
    pub b0_second: f64,
}

impl BdfKernels {
    pub fn new(tau: f64) -> Result<Self, BdfError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(BdfError::NonPositiveStep(tau));
        }
        Ok(Self {
            tau,
            b0: 11.0 / (6.0 * tau),
            b1: -7.0 / (6.0 * tau),
            b2: 1.0 / (3.0 * tau),
            b0_first: 2.0 / tau,
            b0_second: 3.0 / (2.0 * tau),
        })
    }

    /// Coefficient of the unknown level in `D3` at `level` (>= 1).
    pub fn lead_weight(&self, level: usize) -> f64 {
        match level {
            0 => panic!("level 0 is the initial datum, not a time step"),
            1 => self.b0_first,
            2 => self.b0_second,
            _ => self.b0,
        }
    }

    /// BDF3 kernel `b_j`; zero for `j >= 3`.
    pub fn b(&self, j: usize) -> f64 {
        match j {
            0 => self.b0,
            1 => self.b1,
            2 => self.b2,
            _ => 0.0,
        }
    }
}

pub fn make_kernels(tau: f64) -> Result<BdfKernels, BdfError> {
    BdfKernels::new(tau)
}

/// Sign convention for the startup correction `phi1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignMode {
    /// `phi1` is the discrete time derivative at `t = 0`.
    #[default]
    Corrected,
    /// `phi1 = f(phi0) + (1 + Delta_h)^2 phi0` as literally printed.
    PaperLiteral,
}

impl std::str::FromStr for SignMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corrected" => Ok(Self::Corrected),
            "paper_literal" => Ok(Self::PaperLiteral),
            other => Err(format!("unknown sign_mode '{other}'")),
        }
    }
}

impl std::fmt::Display for SignMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Corrected => "corrected",
            Self::PaperLiteral => "paper_literal",
        })
    }
}

/// The initial datum `phi0` and startup correction `phi1`, needed by the level-1 step.
#[derive(Debug, Clone, PartialEq)]
pub struct Startup {
    pub phi0: GridField,
    pub phi1: GridField,
}

/// Builds `u0 = phi0 + (tau / 2) phi1` and `phi1`.
///
/// `forcing0` is the source term at `t = 0`; it only enters the corrected
/// sign mode, where `phi1 = forcing0 - f(phi0) - (1 + Delta_h)^2 phi0`.
pub fn initial_level(
    phi0: &GridField,
    tau: f64,
    params: &ModelParams,
    sign_mode: SignMode,
    forcing0: Option<&GridField>,
) -> Result<(GridField, Startup), BdfError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(BdfError::NonPositiveStep(tau));
    }
    let mut phi1 = f_eval(phi0, params);
    phi1.axpy(1.0, &shifted_squared(phi0))?;
    if sign_mode == SignMode::Corrected {
        phi1.scale(-1.0);
        if let Some(src) = forcing0 {
            phi1.axpy(1.0, src)?;
        }
    }
    let mut u0 = phi0.clone();
    u0.axpy(0.5 * tau, &phi1)?;
    Ok((
        u0,
        Startup {
            phi0: phi0.clone(),
            phi1,
        },
    ))
}

/// The newest (at most three) accepted levels, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeHistory {
    tau: f64,
    n: usize,
    levels: VecDeque<GridField>,
}

impl TimeHistory {
    /// History holding only the level-0 field.
    pub fn new(u0: GridField, tau: f64) -> Result<Self, BdfError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(BdfError::NonPositiveStep(tau));
        }
        Ok(Self {
            tau,
            n: 0,
            levels: VecDeque::from([u0]),
        })
    }

    /// Rebuilds a history at level `n` from its stored levels (newest first).
    pub fn from_levels(tau: f64, n: usize, levels: Vec<GridField>) -> Result<Self, BdfError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(BdfError::NonPositiveStep(tau));
        }
        let expected = (n + 1).min(3);
        if levels.len() != expected {
            return Err(BdfError::InsufficientHistory {
                level: n,
                needed: expected,
                available: levels.len(),
            });
        }
        for l in &levels[1..] {
            levels[0].check_same(l)?;
        }
        Ok(Self {
            tau,
            n,
            levels: levels.into(),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Index of the newest accepted level.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `lag = 0` is `u^n`, `lag = 1` is `u^{n-1}`, and so on.
    pub fn level(&self, lag: usize) -> Option<&GridField> {
        self.levels.get(lag)
    }

    pub fn newest(&self) -> &GridField {
        &self.levels[0]
    }

    pub fn levels(&self) -> impl Iterator<Item = &GridField> {
        self.levels.iter()
    }

    pub fn stored(&self) -> usize {
        self.levels.len()
    }

    /// Accepts `u^{n+1}` and evicts anything older than `u^{n-1}`.
    pub fn push(&mut self, next: GridField) -> Result<(), BdfError> {
        self.newest().check_same(&next)?;
        self.levels.push_front(next);
        self.levels.truncate(3);
        self.n += 1;
        Ok(())
    }

    /// `nabla u^{n - lag} = u^{n - lag} - u^{n - lag - 1}`, if both are stored.
    pub fn backward_difference(&self, lag: usize) -> Option<GridField> {
        let a = self.levels.get(lag)?;
        let b = self.levels.get(lag + 1)?;
        a.zip_map(b, |x, y| x - y).ok()
    }

    fn require(&self, level: usize) -> Result<(), BdfError> {
        if level != self.n + 1 {
            return Err(BdfError::LevelMismatch {
                requested: level,
                expected: self.n + 1,
            });
        }
        let needed = level.min(3);
        if self.levels.len() < needed {
            return Err(BdfError::InsufficientHistory {
                level,
                needed,
                available: self.levels.len(),
            });
        }
        Ok(())
    }
}

/// Applies the time-difference operator `D3` of `level` to `candidate` as the new level.
pub fn d3_apply(hist: &TimeHistory, candidate: &GridField, level: usize) -> Result<GridField, BdfError> {
    hist.require(level)?;
    let tau = hist.tau;
    let u = |lag: usize| hist.levels[lag].values();
    let c = candidate.values();
    hist.newest().check_same(candidate)?;
    let values: Vec<f64> = match level {
        1 => {
            let u0 = u(0);
            (0..c.len()).map(|i| 2.0 * (c[i] - u0[i]) / tau).collect()
        }
        2 => {
            let (u1, u0) = (u(0), u(1));
            (0..c.len())
                .map(|i| (3.0 * (c[i] - u1[i]) - (u1[i] - u0[i])) / (2.0 * tau))
                .collect()
        }
        _ => {
            let (a, b, d) = (u(0), u(1), u(2));
            (0..c.len())
                .map(|i| {
                    (11.0 * (c[i] - a[i]) - 7.0 * (a[i] - b[i]) + 2.0 * (b[i] - d[i])) / (6.0 * tau)
                })
                .collect()
        }
    };
    Ok(GridField::new(*candidate.spec(), values)?)
}

/// The part of `D3` at `level` that does not involve the unknown, so that
/// `d3_apply(hist, w, level) = lead_weight(level) * w - lagged_rhs(hist, level, ..)`.
pub fn lagged_rhs(
    hist: &TimeHistory,
    level: usize,
    startup: Option<&Startup>,
) -> Result<GridField, BdfError> {
    hist.require(level)?;
    let k = BdfKernels::new(hist.tau)?;
    let tau = hist.tau;
    let spec = *hist.newest().spec();
    let values: Vec<f64> = match level {
        1 => {
            let s = startup.ok_or(BdfError::MissingStartup)?;
            hist.newest().check_same(&s.phi0)?;
            let (p0, p1) = (s.phi0.values(), s.phi1.values());
            (0..p0.len()).map(|i| 2.0 / tau * p0[i] + p1[i]).collect()
        }
        2 => {
            let (u1, u0) = (hist.levels[0].values(), hist.levels[1].values());
            (0..u1.len())
                .map(|i| k.b0_second * u1[i] + (u1[i] - u0[i]) / (2.0 * tau))
                .collect()
        }
        _ => {
            let (a, b, d) = (
                hist.levels[0].values(),
                hist.levels[1].values(),
                hist.levels[2].values(),
            );
            (0..a.len())
                .map(|i| k.b0 * a[i] - k.b1 * (a[i] - b[i]) - k.b2 * (b[i] - d[i]))
                .collect()
        }
    };
    Ok(GridField::new(spec, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn spec() -> GridSpec {
        GridSpec::new(2, 1.0, 4).unwrap()
    }

    fn c(v: f64) -> GridField {
        GridField::constant(spec(), v)
    }

    fn hist_of(values: &[f64], tau: f64) -> TimeHistory {
        // values oldest first
        let mut h = TimeHistory::new(c(values[0]), tau).unwrap();
        for &v in &values[1..] {
            h.push(c(v)).unwrap();
        }
        h
    }

    #[test]
    fn kernel_values() {
        let k = make_kernels(1.0).unwrap();
        assert_eq!((k.b0, k.b1, k.b2), (11.0 / 6.0, -7.0 / 6.0, 1.0 / 3.0));
        let k6 = make_kernels(6.0).unwrap();
        assert!((k6.b0 - 11.0 / 36.0).abs() < 1e-16);
        assert!((k6.b1 + 7.0 / 36.0).abs() < 1e-16);
        assert!((k6.b2 - 1.0 / 18.0).abs() < 1e-16);
        for &tau in &[1e-3, 0.1, 0.37, 1.0, 10.0] {
            let k = make_kernels(tau).unwrap();
            assert!(((k.b0 + k.b1 + k.b2) * tau - 1.0).abs() < 1e-15);
            assert_eq!(k.b0_first, 2.0 / tau);
            assert_eq!(k.b0_second, 1.5 / tau);
        }
        assert_eq!(make_kernels(0.0), Err(BdfError::NonPositiveStep(0.0)));
        assert!(make_kernels(-2.0).is_err());
    }

    #[test]
    fn initial_level_constant_data() {
        let p = ModelParams::new(1.0, 0.25);
        for mode in [SignMode::Corrected, SignMode::PaperLiteral] {
            let (u0, s) = initial_level(&c(0.0), 0.3, &p, mode, None).unwrap();
            assert!(u0.values().iter().chain(s.phi1.values()).all(|&v| v == 0.0));
        }
        let tau = 0.4;
        let (u0, s) = initial_level(&c(1.0), tau, &p, SignMode::Corrected, None).unwrap();
        assert!(s.phi1.values().iter().all(|&v| (v + 0.75).abs() < 1e-14));
        assert!(u0.values().iter().all(|&v| (v - (1.0 - 0.375 * tau)).abs() < 1e-14));
        let (u0, s) = initial_level(&c(1.0), tau, &p, SignMode::PaperLiteral, None).unwrap();
        assert!(s.phi1.values().iter().all(|&v| (v - 0.75).abs() < 1e-14));
        assert!(u0.values().iter().all(|&v| (v - (1.0 + 0.375 * tau)).abs() < 1e-14));
    }

    #[test]
    fn history_eviction() {
        let h = hist_of(&[0.0, 1.0, 2.0, 3.0, 4.0], 0.5);
        assert_eq!(h.n(), 4);
        assert_eq!(h.stored(), 3);
        assert_eq!(h.newest().values()[0], 4.0);
        assert_eq!(h.level(2).unwrap().values()[0], 2.0);
        assert_eq!(hist_of(&[0.0, 1.0], 0.5).stored(), 2);
    }

    #[test]
    fn d3_of_constant_history_is_zero() {
        for n in 0..4 {
            let vals = vec![1.25; n + 1];
            let h = hist_of(&vals, 0.2);
            let d = d3_apply(&h, &c(1.25), n + 1).unwrap();
            assert!(d.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn d3_leading_weights() {
        let tau = 0.3;
        let delta = 0.7;
        let h = hist_of(&[2.0, 2.0, 2.0], tau);
        let d = d3_apply(&h, &c(2.0 + delta), 3).unwrap();
        assert!(d.values().iter().all(|&v| (v - 11.0 / (6.0 * tau) * delta).abs() < 1e-13));
        let h = hist_of(&[2.0], tau);
        let d = d3_apply(&h, &c(2.0 + delta), 1).unwrap();
        assert!(d.values().iter().all(|&v| (v - 2.0 / tau * delta).abs() < 1e-13));
    }

    #[test]
    fn d3_errors() {
        let h = hist_of(&[0.0], 1.0);
        assert!(matches!(
            d3_apply(&h, &c(0.0), 2),
            Err(BdfError::LevelMismatch { requested: 2, expected: 1 })
        ));
        assert!(matches!(lagged_rhs(&h, 1, None), Err(BdfError::MissingStartup)));
    }

    #[test]
    fn lagged_rhs_constant_history() {
        let tau = 0.25;
        let h = hist_of(&[1.5, 1.5, 1.5, 1.5], tau);
        let g = lagged_rhs(&h, 4, None).unwrap();
        assert!(g.values().iter().all(|&v| (v - 11.0 / (6.0 * tau) * 1.5).abs() < 1e-13));
        let h = hist_of(&[1.5, 1.5], tau);
        let g = lagged_rhs(&h, 2, None).unwrap();
        assert!(g.values().iter().all(|&v| (v - 1.5 / tau * 1.5).abs() < 1e-13));
        let s = Startup {
            phi0: c(0.0),
            phi1: c(0.0),
        };
        let h = hist_of(&[0.0], tau);
        assert!(lagged_rhs(&h, 1, Some(&s)).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bdf3_exact_on_linear_in_time() {
        let tau = 0.1;
        let h = hist_of(&[0.0, 0.1, 0.2, 0.3], tau);
        let d = d3_apply(&h, &c(0.4), 4).unwrap();
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-13));
        // t^3: BDF3 is exact on cubics, derivative 3 t^2 at the new level
        let t: Vec<f64> = (0..5).map(|k| 0.7 + k as f64 * tau).collect();
        let h = hist_of(&t[..4].iter().map(|x| x.powi(3)).collect::<Vec<_>>(), tau);
        let d = d3_apply(&h, &c(t[4].powi(3)), 4).unwrap();
        let exact = 3.0 * t[4] * t[4];
        assert!(d.values().iter().all(|&v| ((v - exact) / exact).abs() < 1e-10));
    }
}
