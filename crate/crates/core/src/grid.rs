//! Periodic uniform grids, scalar fields sampled on them, and the
//! second-order finite-difference operators used by the scheme.
//!
//! A [`GridSpec`] describes the box `(0, L)^dim` split into `M` cells per
//! axis. Fields store the `M^dim` node samples in row-major order (last axis
//! fastest); periodicity lives in the index arithmetic, so there are no ghost
//! layers.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("points per axis must be at least 4, got {0}")]
    TooFewPoints(usize),
    #[error("box length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("field has {got} values, grid expects {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("field contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    SpecMismatch,
    #[error("unsupported norm exponent {0}; expected 2, 4 or inf")]
    UnsupportedNorm(String),
}

/// Descriptor of the periodic box `(0, L)^dim` with `M` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    length: f64,
    points: usize,
    spacing: f64,
}

impl GridSpec {
    pub fn new(dim: usize, length: f64, points: usize) -> Result<Self, GridError> {
        if !(dim == 2 || dim == 3) {
            return Err(GridError::BadDimension(dim));
        }
        if points < 4 {
            return Err(GridError::TooFewPoints(points));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(GridError::BadLength(length));
        }
        Ok(Self {
            dim,
            length,
            points,
            spacing: length / points as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Box side length `L`.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Nodes per axis `M`.
    pub fn points(&self) -> usize {
        self.points
    }

    /// Mesh size `h = L / M`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total node count `M^dim`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^dim` of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// `|Omega_h| = L^dim`, the weighted node count.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Linear-index stride of each axis.
    pub fn strides(&self) -> Vec<usize> {
        (0..self.dim)
            .map(|a| self.points.pow((self.dim - 1 - a) as u32))
            .collect()
    }

    /// Multi-index of a linear node index.
    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = index % self.points;
            index /= self.points;
        }
        idx
    }

    /// Physical coordinates of a linear node index.
    pub fn coords(&self, index: usize) -> Vec<f64> {
        self.multi_index(index)
            .into_iter()
            .map(|i| i as f64 * self.spacing)
            .collect()
    }
}

/// Scalar field sampled on the nodes of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != spec.len() {
            return Err(GridError::WrongLength {
                expected: spec.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Self {
            spec,
            values: vec![c; spec.len()],
        }
    }

    /// Samples `f` at every node's coordinates.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.coords(i))).collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise map into a new field on the same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, GridError> {
        self.check_same(other)?;
        Ok(Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) -> Result<(), GridError> {
        self.check_same(x)?;
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn check_same(&self, other: &Self) -> Result<(), GridError> {
        if self.spec == other.spec {
            Ok(())
        } else {
            Err(GridError::SpecMismatch)
        }
    }

    /// Cyclic shift by `offset` nodes along `axis`: output at `i` takes the input at `i - offset`.
    pub fn shifted(&self, axis: usize, offset: usize) -> Self {
        let m = self.spec.points;
        let stride = self.spec.strides()[axis];
        let mut out = vec![0.0; self.values.len()];
        for (i, &v) in self.values.iter().enumerate() {
            let coord = (i / stride) % m;
            let target = i - coord * stride + ((coord + offset) % m) * stride;
            out[target] = v;
        }
        Self {
            spec: self.spec,
            values: out,
        }
    }
}

/// Parameters of the nonlinearity `f(u) = u^3 - g u^2 - eps u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub g: f64,
    pub eps: f64,
    /// When false the `u^3` term is dropped. Only verification runs turn this off.
    pub cubic: bool,
}

impl ModelParams {
    pub fn new(g: f64, eps: f64) -> Self {
        Self { g, eps, cubic: true }
    }

    /// Same parameters with the cubic term removed, leaving a linear model when `g = 0`.
    pub fn without_cubic(self) -> Self {
        Self {
            cubic: false,
            ..self
        }
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        let cubic = if self.cubic { u * u * u } else { 0.0 };
        cubic - self.g * u * u - self.eps * u
    }

    /// `f'(u)`.
    #[inline]
    pub fn df(&self, u: f64) -> f64 {
        let cubic = if self.cubic { 3.0 * u * u } else { 0.0 };
        cubic - 2.0 * self.g * u - self.eps
    }
}

/// Which discrete `L^q` norm to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    L4,
    Inf,
}

impl std::str::FromStr for Norm {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "2" => Ok(Norm::L2),
            "4" => Ok(Norm::L4),
            "inf" | "Inf" | "infinity" => Ok(Norm::Inf),
            other => Err(GridError::UnsupportedNorm(other.to_string())),
        }
    }
}

const PAIRWISE_LEAF: usize = 64;

/// Cascade summation of `term(i)` over `0..n` with a fixed reduction tree.
pub fn pairwise_sum(n: usize, term: &impl Fn(usize) -> f64) -> f64 {
    fn rec(lo: usize, hi: usize, term: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= PAIRWISE_LEAF {
            let mut s = 0.0;
            for i in lo..hi {
                s += term(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    rec(0, n, term)
}

/// Discrete Laplacian with the `(2 dim + 1)`-point periodic stencil.
pub fn laplacian(f: &GridField) -> GridField {
    let mut out = vec![0.0; f.values.len()];
    laplacian_into(&f.spec, &f.values, &mut out);
    GridField {
        spec: f.spec,
        values: out,
    }
}

/// Writes `Delta_h v` into `out`. Both slices have `spec.len()` entries.
pub fn laplacian_into(spec: &GridSpec, v: &[f64], out: &mut [f64]) {
    let m = spec.points;
    let inv_h2 = 1.0 / (spec.spacing * spec.spacing);
    match spec.dim {
        2 => {
            for i in 0..m {
                let ip = if i + 1 == m { 0 } else { i + 1 };
                let im = if i == 0 { m - 1 } else { i - 1 };
                let row = &v[i * m..(i + 1) * m];
                let row_p = &v[ip * m..(ip + 1) * m];
                let row_m = &v[im * m..(im + 1) * m];
                let dst = &mut out[i * m..(i + 1) * m];
                for j in 0..m {
                    let jp = if j + 1 == m { 0 } else { j + 1 };
                    let jm = if j == 0 { m - 1 } else { j - 1 };
                    let c = row[j];
                    dst[j] = ((row_p[j] - c) - (c - row_m[j]) + (row[jp] - c) - (c - row[jm]))
                        * inv_h2;
                }
            }
        }
        3 => {
            let plane = m * m;
            for i in 0..m {
                let ip = if i + 1 == m { 0 } else { i + 1 };
                let im = if i == 0 { m - 1 } else { i - 1 };
                for j in 0..m {
                    let jp = if j + 1 == m { 0 } else { j + 1 };
                    let jm = if j == 0 { m - 1 } else { j - 1 };
                    let base = i * plane + j * m;
                    for k in 0..m {
                        let kp = if k + 1 == m { 0 } else { k + 1 };
                        let km = if k == 0 { m - 1 } else { k - 1 };
                        let c = v[base + k];
                        let sx = (v[ip * plane + j * m + k] - c) - (c - v[im * plane + j * m + k]);
                        let sy = (v[i * plane + jp * m + k] - c) - (c - v[i * plane + jm * m + k]);
                        let sz = (v[base + kp] - c) - (c - v[base + km]);
                        out[base + k] = (sx + sy + sz) * inv_h2;
                    }
                }
            }
        }
        _ => unreachable!("GridSpec enforces dim in {{2, 3}}"),
    }
}

/// `(I + Delta_h) f`
pub fn one_plus_laplacian(f: &GridField) -> GridField {
    let mut out = laplacian(f);
    for (o, &v) in out.values.iter_mut().zip(&f.values) {
        *o += v;
    }
    out
}

/// `(I + Delta_h)^2 f`, as two successive applications of `I + Delta_h`.
pub fn shifted_squared(f: &GridField) -> GridField {
    one_plus_laplacian(&one_plus_laplacian(f))
}

/// In-place variant of [`shifted_squared`] using `scratch` as work space.
pub fn shifted_squared_into(spec: &GridSpec, v: &[f64], scratch: &mut [f64], out: &mut [f64]) {
    laplacian_into(spec, v, scratch);
    for (s, &x) in scratch.iter_mut().zip(v) {
        *s += x;
    }
    laplacian_into(spec, scratch, out);
    for (o, &s) in out.iter_mut().zip(scratch.iter()) {
        *o += s;
    }
}

/// Discrete inner product `h^dim * sum v w`.
pub fn inner(v: &GridField, w: &GridField) -> Result<f64, GridError> {
    v.check_same(w)?;
    Ok(inner_slices(&v.spec, &v.values, &w.values))
}

pub(crate) fn inner_slices(spec: &GridSpec, v: &[f64], w: &[f64]) -> f64 {
    spec.cell_volume() * pairwise_sum(v.len(), &|i| v[i] * w[i])
}

pub(crate) fn norm_l2_slice(spec: &GridSpec, v: &[f64]) -> f64 {
    inner_slices(spec, v, v).sqrt()
}

/// Discrete `L^2`, `L^4` or max norm.
pub fn norm(v: &GridField, q: Norm) -> f64 {
    let vals = &v.values;
    match q {
        Norm::L2 => inner_slices(&v.spec, vals, vals).sqrt(),
        Norm::L4 => {
            let s = v.spec.cell_volume()
                * pairwise_sum(vals.len(), &|i| {
                    let x2 = vals[i] * vals[i];
                    x2 * x2
                });
            s.sqrt().sqrt()
        }
        Norm::Inf => vals.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
    }
}

/// Forward differences `(v(x + h e_a) - v(x)) / h` along each axis, stored at
/// the node they start from.
pub fn gradient(v: &GridField) -> Vec<GridField> {
    let spec = v.spec;
    let m = spec.points;
    let inv_h = 1.0 / spec.spacing;
    spec.strides()
        .into_iter()
        .map(|stride| {
            let values = (0..spec.len())
                .map(|i| {
                    let coord = (i / stride) % m;
                    let next = if coord + 1 == m { i - coord * stride } else { i + stride };
                    (v.values[next] - v.values[i]) * inv_h
                })
                .collect();
            GridField { spec, values }
        })
        .collect()
}

/// Pointwise nonlinearity `u^3 - g u^2 - eps u`.
pub fn f_eval(v: &GridField, params: &ModelParams) -> GridField {
    v.map(|u| params.f(u))
}

/// Discrete Laplacian eigenvalue of the 1D wavenumber `k` on an `m`-point axis.
pub fn laplacian_symbol_1d(k: usize, m: usize, h: f64) -> f64 {
    let s = (std::f64::consts::PI * k as f64 / m as f64).sin();
    -4.0 * s * s / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec2(m: usize, l: f64) -> GridSpec {
        GridSpec::new(2, l, m).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert_eq!(GridSpec::new(1, 1.0, 8), Err(GridError::BadDimension(1)));
        assert_eq!(GridSpec::new(2, 1.0, 3), Err(GridError::TooFewPoints(3)));
        assert!(GridSpec::new(2, -1.0, 8).is_err());
        let s = spec2(8, 1.0);
        assert!(GridField::new(s, vec![0.0; 63]).is_err());
        let mut vals = vec![0.0; 64];
        vals[5] = f64::NAN;
        assert_eq!(GridField::new(s, vals), Err(GridError::NonFinite(5)));
    }

    #[test]
    fn spacing_times_points_is_length() {
        for &(l, m) in &[(2.0 * PI, 1024), (100.0, 128), (48.0, 48), (1.0, 7)] {
            let s = spec2(m, l);
            assert!((s.spacing() * m as f64 - l).abs() <= l * f64::EPSILON);
        }
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let f = GridField::constant(spec2(8, 3.0), 2.5);
        assert!(laplacian(&f).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_impulse_response() {
        let s = spec2(8, 2.0);
        let mut vals = vec![0.0; 64];
        vals[3 * 8 + 4] = 1.0;
        let out = laplacian(&GridField::new(s, vals).unwrap());
        let ih2 = 1.0 / (s.spacing() * s.spacing());
        for (i, &v) in out.values().iter().enumerate() {
            let expected = match i {
                28 => -4.0 * ih2,
                20 | 36 | 27 | 29 => ih2,
                _ => 0.0,
            };
            assert!((v - expected).abs() < 1e-12 * ih2, "node {i}: {v} vs {expected}");
        }
    }

    #[test]
    fn laplacian_eigenmode_sin2x_sin2y() {
        for &m in &[8, 16, 32] {
            let s = spec2(m, 2.0 * PI);
            let h = s.spacing();
            let f = GridField::from_fn(s, |x| (2.0 * x[0]).sin() * (2.0 * x[1]).sin());
            let lam = -8.0 * h.sin().powi(2) / (h * h);
            let lap = laplacian(&f);
            let sq = shifted_squared(&f);
            for i in 0..s.len() {
                assert!((lap.values()[i] - lam * f.values()[i]).abs() < 1e-12 * lam.abs());
                let mu = (1.0 + lam).powi(2);
                assert!((sq.values()[i] - mu * f.values()[i]).abs() < 1e-12 * mu);
            }
        }
    }

    #[test]
    fn shifted_squared_trivial_cases() {
        let s = spec2(8, 1.0);
        let c = shifted_squared(&GridField::constant(s, 1.7));
        assert!(c.values().iter().all(|&v| (v - 1.7).abs() < 1e-12));
        let z = shifted_squared(&GridField::zeros(s));
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inner_of_ones_is_volume() {
        let s = spec2(10, 1.0);
        let one = GridField::constant(s, 1.0);
        assert!((inner(&one, &one).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inner_of_mode_is_pi_squared() {
        // Brute force: plain double loop over nodes
        for &m in &[4, 6, 8, 12] {
            let s = spec2(m, 2.0 * PI);
            let v = GridField::from_fn(s, |x| (2.0 * x[0]).sin() * (2.0 * x[1]).sin());
            let h = s.spacing();
            let mut brute = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let a = (2.0 * i as f64 * h).sin() * (2.0 * j as f64 * h).sin();
                    brute += a * a;
                }
            }
            brute *= h * h;
            let ip = inner(&v, &v).unwrap();
            assert!((ip - brute).abs() < 1e-12 * brute.max(1.0));
            if m > 4 {
                // m = 4 samples sin(2x) only at its zeros
                assert!((ip - PI * PI).abs() < 1e-12 * PI * PI, "m={m}: {ip}");
            }
        }
    }

    #[test]
    fn inner_spec_mismatch() {
        let a = GridField::zeros(spec2(8, 1.0));
        let b = GridField::zeros(spec2(8, 2.0));
        assert_eq!(inner(&a, &b), Err(GridError::SpecMismatch));
    }

    #[test]
    fn norms_of_constants() {
        for &dim in &[2usize, 3] {
            let l = 1.5;
            let s = GridSpec::new(dim, l, 6).unwrap();
            let v = GridField::constant(s, -2.0);
            let d = dim as f64;
            assert!((norm(&v, Norm::L2) - 2.0 * l.powf(d / 2.0)).abs() < 1e-13);
            assert!((norm(&v, Norm::L4) - 2.0 * l.powf(d / 4.0)).abs() < 1e-13);
            assert_eq!(norm(&v, Norm::Inf), 2.0);
            let z = GridField::zeros(s);
            for q in [Norm::L2, Norm::L4, Norm::Inf] {
                assert_eq!(norm(&z, q), 0.0);
            }
        }
    }

    #[test]
    fn max_norm_picks_largest_magnitude() {
        let s = spec2(4, 1.0);
        let mut vals = vec![0.0; 16];
        vals[1] = 1.0;
        vals[7] = -3.0;
        vals[11] = 2.0;
        assert_eq!(norm(&GridField::new(s, vals).unwrap(), Norm::Inf), 3.0);
    }

    #[test]
    fn norm_parsing() {
        assert_eq!("2".parse::<Norm>(), Ok(Norm::L2));
        assert_eq!("inf".parse::<Norm>(), Ok(Norm::Inf));
        assert!(matches!("3".parse::<Norm>(), Err(GridError::UnsupportedNorm(_))));
    }

    #[test]
    fn gradient_of_sine() {
        let s = spec2(16, 2.0 * PI);
        let h = s.spacing();
        let v = GridField::from_fn(s, |x| (2.0 * x[0]).sin());
        let grad = gradient(&v);
        for i in 0..s.len() {
            let x = s.coords(i)[0];
            let expected = 2.0 * h.sin() / h * (2.0 * x + h).cos();
            assert!((grad[0].values()[i] - expected).abs() < 1e-12);
            assert!(grad[1].values()[i].abs() < 1e-12);
        }
        let c = gradient(&GridField::constant(s, 4.0));
        assert!(c.iter().all(|g| g.values().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn nonlinearity_values() {
        let s = spec2(4, 1.0);
        let p = ModelParams::new(1.0, 0.25);
        assert!(f_eval(&GridField::zeros(s), &p).values().iter().all(|&v| v == 0.0));
        let one = f_eval(&GridField::constant(s, 1.0), &p);
        assert!(one.values().iter().all(|&v| (v + 0.25).abs() < 1e-15));
        let two = f_eval(&GridField::constant(s, 2.0), &ModelParams::new(0.5, 0.1));
        assert!(two.values().iter().all(|&v| (v - 5.8).abs() < 1e-14));
    }

    #[test]
    fn shift_moves_values() {
        let s = spec2(4, 1.0);
        let v = GridField::new(s, (0..16).map(|i| i as f64).collect()).unwrap();
        let sh = v.shifted(1, 1);
        assert_eq!(sh.values()[1], 0.0);
        assert_eq!(sh.values()[0], 3.0);
        let sh0 = v.shifted(0, 1);
        assert_eq!(sh0.values()[4], 0.0);
        assert_eq!(sh0.values()[0], 12.0);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let n = 10_000;
        let s = pairwise_sum(n, &|i| i as f64);
        assert_eq!(s, (n * (n - 1) / 2) as f64);
    }
}
