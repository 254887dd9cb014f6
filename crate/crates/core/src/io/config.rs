//! `key = value` run configuration.
//!
//! Required keys: `dim`, `L`, `M`, `tau`, `steps`, `eps`, `g`, `ic`.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `ic` | | `zero`, `example1`, `example2`, `random` or `file:<snapshot path>` |
//! | `amplitude` | `0.01` | half-width of the uniform draws for `ic = random` |
//! | `seed` | `0` | ChaCha8 seed for `ic = random` |
//! | `forcing` | `off` | `on` adds the manufactured source of the convergence harness |
//! | `abs_tol` | `1e-10` | Newton residual target |
//! | `max_newton_iters` | `50` | |
//! | `max_inner_iters` | `500` | linear iterations per Newton step |
//! | `linear_mode` | `iterative` | `iterative` or `fourier_direct` |
//! | `sign_mode` | `corrected` | `corrected` or `paper_literal` |
//! | `snapshot_every` | `0` | levels between snapshots, `0` disables |
//! | `checkpoint_every` | `0` | levels between checkpoints, `0` disables |
//! | `output_dir` | `out` | |
//! | `study` | `temporal` | `temporal` or `spatial`, read by `converge` |
//! | `study_steps` | `10,20,40,80` | step counts of a temporal study at `T = tau * steps` |
//! | `study_points` | `16,32,64` | grid sizes of a spatial study with `steps` steps |

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bdf::SignMode;
use crate::grid::{GridSpec, ModelParams};
use crate::solver::{LinearMode, SolveConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum IcSelector {
    Zero,
    Example1,
    Example2,
    Random,
    File(PathBuf),
}

impl FromStr for IcSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "zero" => Self::Zero,
            "example1" => Self::Example1,
            "example2" => Self::Example2,
            "random" => Self::Random,
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Self::File(PathBuf::from(p)),
                _ => return Err(format!("unknown initial condition '{s}'")),
            },
        })
    }
}

impl std::fmt::Display for IcSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Zero => f.write_str("zero"),
            Self::Example1 => f.write_str("example1"),
            Self::Example2 => f.write_str("example2"),
            Self::Random => f.write_str("random"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StudyKind {
    #[default]
    Temporal,
    Spatial,
}

impl FromStr for StudyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temporal" => Ok(Self::Temporal),
            "spatial" => Ok(Self::Spatial),
            other => Err(format!("unknown study '{other}'")),
        }
    }
}

impl std::fmt::Display for StudyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Temporal => "temporal",
            Self::Spatial => "spatial",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub length: f64,
    pub points: usize,
    pub tau: f64,
    pub steps: usize,
    pub eps: f64,
    pub g: f64,
    pub ic: IcSelector,
    pub amplitude: f64,
    pub seed: u64,
    pub forcing: bool,
    pub abs_tol: f64,
    pub max_newton_iters: usize,
    pub max_inner_iters: usize,
    pub linear_mode: LinearMode,
    pub sign_mode: SignMode,
    pub snapshot_every: usize,
    pub checkpoint_every: usize,
    pub output_dir: PathBuf,
    pub study: StudyKind,
    pub study_steps: Vec<usize>,
    pub study_points: Vec<usize>,
}

impl RunConfig {
    /// Config with every optional key at its default.
    pub fn with_required(
        dim: usize,
        length: f64,
        points: usize,
        tau: f64,
        steps: usize,
        eps: f64,
        g: f64,
        ic: IcSelector,
    ) -> Self {
        let solve = SolveConfig::default();
        Self {
            dim,
            length,
            points,
            tau,
            steps,
            eps,
            g,
            ic,
            amplitude: 0.01,
            seed: 0,
            forcing: false,
            abs_tol: solve.abs_tol,
            max_newton_iters: solve.max_newton_iters,
            max_inner_iters: solve.max_inner_iters,
            linear_mode: solve.linear_mode,
            sign_mode: SignMode::Corrected,
            snapshot_every: 0,
            checkpoint_every: 0,
            output_dir: PathBuf::from("out"),
            study: StudyKind::Temporal,
            study_steps: vec![10, 20, 40, 80],
            study_points: vec![16, 32, 64],
        }
    }

    pub fn final_time(&self) -> f64 {
        self.tau * self.steps as f64
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.dim, self.length, self.points).expect("validated config")
    }

    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.g, self.eps)
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            abs_tol: self.abs_tol,
            max_newton_iters: self.max_newton_iters,
            max_inner_iters: self.max_inner_iters,
            linear_mode: self.linear_mode,
            ..SolveConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        fn positive(name: &str, v: f64) -> Result<(), String> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive"))
            }
        }
        if !(2..=3).contains(&self.dim) {
            return Err("dim must be 2 or 3".into());
        }
        positive("L", self.length)?;
        positive("tau", self.tau)?;
        positive("abs_tol", self.abs_tol)?;
        if self.points < 4 {
            return Err("M must be at least 4".into());
        }
        if self.steps == 0 {
            return Err("steps must be positive".into());
        }
        for (name, v) in [("eps", self.eps), ("g", self.g)] {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("{name} must be nonnegative"));
            }
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err("amplitude must be nonnegative".into());
        }
        if self.max_newton_iters == 0 || self.max_inner_iters == 0 {
            return Err("iteration limits must be positive".into());
        }
        if self.ic == IcSelector::Example2 && self.dim != 2 {
            return Err("ic = example2 needs dim = 2".into());
        }
        let increasing = |v: &[usize]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.study_steps) || self.study_steps[0] == 0 {
            return Err("study_steps must be a strictly increasing list of positive counts".into());
        }
        if !increasing(&self.study_points) || self.study_points[0] < 4 {
            return Err("study_points must be a strictly increasing list of sizes >= 4".into());
        }
        Ok(())
    }

    /// SHA-256 over the keys that determine the trajectory.
    pub fn digest(&self) -> String {
        let mut text = String::new();
        let _ = writeln!(text, "dim={}", self.dim);
        let _ = writeln!(text, "L={}", self.length);
        let _ = writeln!(text, "M={}", self.points);
        let _ = writeln!(text, "tau={}", self.tau);
        let _ = writeln!(text, "eps={}", self.eps);
        let _ = writeln!(text, "g={}", self.g);
        let _ = writeln!(text, "ic={}", self.ic);
        let _ = writeln!(text, "amplitude={}", self.amplitude);
        let _ = writeln!(text, "seed={}", self.seed);
        let _ = writeln!(text, "forcing={}", self.forcing);
        let _ = writeln!(text, "abs_tol={}", self.abs_tol);
        let _ = writeln!(text, "max_newton_iters={}", self.max_newton_iters);
        let _ = writeln!(text, "max_inner_iters={}", self.max_inner_iters);
        let _ = writeln!(text, "linear_mode={}", self.linear_mode);
        let _ = writeln!(text, "sign_mode={}", self.sign_mode);
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Canonical text form; `parse_config(&print_config(c)) == Ok(c)` for valid configs.
pub fn print_config(c: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dim = {}", c.dim);
    let _ = writeln!(s, "L = {:?}", c.length);
    let _ = writeln!(s, "M = {}", c.points);
    let _ = writeln!(s, "tau = {:?}", c.tau);
    let _ = writeln!(s, "steps = {}", c.steps);
    let _ = writeln!(s, "eps = {:?}", c.eps);
    let _ = writeln!(s, "g = {:?}", c.g);
    let _ = writeln!(s, "ic = {}", c.ic);
    let _ = writeln!(s, "amplitude = {:?}", c.amplitude);
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "forcing = {}", if c.forcing { "on" } else { "off" });
    let _ = writeln!(s, "abs_tol = {:?}", c.abs_tol);
    let _ = writeln!(s, "max_newton_iters = {}", c.max_newton_iters);
    let _ = writeln!(s, "max_inner_iters = {}", c.max_inner_iters);
    let _ = writeln!(s, "linear_mode = {}", c.linear_mode);
    let _ = writeln!(s, "sign_mode = {}", c.sign_mode);
    let _ = writeln!(s, "snapshot_every = {}", c.snapshot_every);
    let _ = writeln!(s, "checkpoint_every = {}", c.checkpoint_every);
    let _ = writeln!(s, "output_dir = {}", c.output_dir.display());
    let _ = writeln!(s, "study = {}", c.study);
    let _ = writeln!(s, "study_steps = {}", join(&c.study_steps));
    let _ = writeln!(s, "study_points = {}", join(&c.study_points));
    s
}

const REQUIRED: [&str; 8] = ["dim", "L", "M", "tau", "steps", "eps", "g", "ic"];

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str, what: &str) -> Result<T, ConfigError> {
    raw.parse().map_err(|_| ConfigError::Line {
        line,
        message: format!("{key}: expected {what}, got '{raw}'"),
    })
}

fn parse_list(line: usize, key: &str, raw: &str) -> Result<Vec<usize>, ConfigError> {
    raw.split(',')
        .map(|p| parse_value(line, key, p.trim(), "a comma-separated list of integers"))
        .collect()
}

fn parse_switch(line: usize, key: &str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(ConfigError::Line {
            line,
            message: format!("{key}: expected on/off, got '{raw}'"),
        }),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut c = RunConfig::with_required(0, 0.0, 0, 0.0, 0, 0.0, 0.0, IcSelector::Zero);
    let mut seen: HashSet<String> = HashSet::new();
    let mut last_line = 0;
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Line {
            line,
            message: format!("expected 'key = value', got '{content}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            let message = if key == "ic" {
                "multiple initial-condition selectors".to_string()
            } else {
                format!("duplicate key '{key}'")
            };
            return Err(ConfigError::Line { line, message });
        }
        let bad = |message: String| ConfigError::Line { line, message };
        match key {
            "dim" => c.dim = parse_value(line, key, value, "an integer")?,
            "L" => c.length = parse_value(line, key, value, "a number")?,
            "M" => c.points = parse_value(line, key, value, "an integer")?,
            "tau" => c.tau = parse_value(line, key, value, "a number")?,
            "steps" => c.steps = parse_value(line, key, value, "an integer")?,
            "eps" => c.eps = parse_value(line, key, value, "a number")?,
            "g" => c.g = parse_value(line, key, value, "a number")?,
            "ic" => c.ic = value.parse().map_err(bad)?,
            "amplitude" => c.amplitude = parse_value(line, key, value, "a number")?,
            "seed" => c.seed = parse_value(line, key, value, "an unsigned integer")?,
            "forcing" => c.forcing = parse_switch(line, key, value)?,
            "abs_tol" => c.abs_tol = parse_value(line, key, value, "a number")?,
            "max_newton_iters" => c.max_newton_iters = parse_value(line, key, value, "an integer")?,
            "max_inner_iters" => c.max_inner_iters = parse_value(line, key, value, "an integer")?,
            "linear_mode" => c.linear_mode = value.parse().map_err(bad)?,
            "sign_mode" => c.sign_mode = value.parse().map_err(bad)?,
            "snapshot_every" => c.snapshot_every = parse_value(line, key, value, "an integer")?,
            "checkpoint_every" => c.checkpoint_every = parse_value(line, key, value, "an integer")?,
            "output_dir" => c.output_dir = PathBuf::from(value),
            "study" => c.study = value.parse().map_err(bad)?,
            "study_steps" => c.study_steps = parse_list(line, key, value)?,
            "study_points" => c.study_points = parse_list(line, key, value)?,
            _ => return Err(bad(format!("unknown key '{key}'"))),
        }
        if let Err(message) = check_single(&c, key) {
            return Err(ConfigError::Line { line, message });
        }
    }
    if let Some(k) = REQUIRED.iter().find(|k| !seen.contains(**k)) {
        return Err(ConfigError::Missing(k));
    }
    c.validate().map_err(|message| ConfigError::Line {
        line: last_line,
        message,
    })?;
    Ok(c)
}

/// Per-key checks that can be reported against the offending line.
fn check_single(c: &RunConfig, key: &str) -> Result<(), String> {
    let pos = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(format!("{name} must be positive"))
        }
    };
    match key {
        "tau" => pos("tau", c.tau),
        "L" => pos("L", c.length),
        "abs_tol" => pos("abs_tol", c.abs_tol),
        "dim" if !(2..=3).contains(&c.dim) => Err("dim must be 2 or 3".into()),
        "M" if c.points < 4 => Err("M must be at least 4".into()),
        "steps" if c.steps == 0 => Err("steps must be positive".into()),
        "eps" | "g" => {
            let v = if key == "eps" { c.eps } else { c.g };
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(format!("{key} must be nonnegative"))
            }
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = "\
# Example 1, scaled grid
dim = 2
L = 6.283185307179586
M = 1024
tau = 0.125
steps = 80
eps = 0.25
g = 1
ic = example1
forcing = on
";

    #[test]
    fn minimal_example_accepted() {
        let c = parse_config(EXAMPLE1).unwrap();
        assert_eq!(c.points, 1024);
        assert_eq!(c.ic, IcSelector::Example1);
        assert!(c.forcing);
        assert_eq!(c.final_time(), 10.0);
        assert_eq!(c.amplitude, 0.01);
    }

    #[test]
    fn negative_tau_rejected() {
        let text = EXAMPLE1.replace("tau = 0.125", "tau = -1");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(
            err,
            ConfigError::Line {
                line: 5,
                message: "tau must be positive".into()
            }
        );
        assert!(err.to_string().contains("tau must be positive"));
    }

    #[test]
    fn two_selectors_rejected() {
        let text = format!("{EXAMPLE1}ic = random\n");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("multiple initial-condition selectors"), "{err}");
        assert!(err.starts_with("line 11"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_config(&EXAMPLE1.replace("M = 1024", "M = lots")).unwrap_err();
        assert!(matches!(err, ConfigError::Line { line: 4, .. }));
        let err = parse_config(&format!("{EXAMPLE1}colour = blue\n")).unwrap_err();
        assert!(err.to_string().contains("unknown key"));
        let err = parse_config(&EXAMPLE1.replace("g = 1\n", "")).unwrap_err();
        assert_eq!(err, ConfigError::Missing("g"));
    }

    #[test]
    fn file_selector_and_roundtrip() {
        let text = EXAMPLE1.replace("ic = example1", "ic = file:data/u0.snap");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.ic, IcSelector::File(PathBuf::from("data/u0.snap")));
        assert_eq!(parse_config(&print_config(&c)).unwrap(), c);
    }

    #[test]
    fn digest_tracks_physics_only() {
        let a = parse_config(EXAMPLE1).unwrap();
        let mut b = a.clone();
        b.steps = 800;
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest(), b.digest());
        b.tau = 0.0625;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
