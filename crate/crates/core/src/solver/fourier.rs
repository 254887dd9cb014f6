//! Exact inversion of the constant-coefficient operator `shift * I + (1 + Delta_h)^2`
//! in the discrete Fourier basis of a periodic grid.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{laplacian_symbol_1d, GridSpec};

/// Columns gathered per pass when transforming a strided axis.
const GATHER_BLOCK: usize = 16;

/// FFT plans and the Fourier symbol of `(1 + Delta_h)^2` for one grid.
pub struct FourierOperator {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbol: Vec<f64>,
    buffer: Vec<Complex64>,
    lines: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for FourierOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierOperator").field("spec", &self.spec).finish()
    }
}

impl FourierOperator {
    pub fn new(spec: GridSpec) -> Self {
        let m = spec.points();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());

        let h = spec.spacing();
        let lam1: Vec<f64> = (0..m).map(|k| laplacian_symbol_1d(k, m, h)).collect();
        let symbol = (0..spec.len())
            .map(|i| {
                let lam: f64 = spec.multi_index(i).iter().map(|&k| lam1[k]).sum();
                (1.0 + lam) * (1.0 + lam)
            })
            .collect();

        Self {
            spec,
            forward,
            inverse,
            symbol,
            buffer: vec![Complex64::default(); spec.len()],
            lines: vec![Complex64::default(); GATHER_BLOCK * m],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Symbol `(1 + lambda_h(k))^2`, indexed like the grid nodes by wavenumber.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Largest symbol value; bounds the operator norm of `(1 + Delta_h)^2`.
    pub fn symbol_max(&self) -> f64 {
        let h = self.spec.spacing();
        let lam_min = -4.0 * self.spec.dim() as f64 / (h * h);
        (1.0 + lam_min) * (1.0 + lam_min)
    }

    /// Smallest value of `shift + symbol` over all wavenumbers.
    pub fn min_shifted_symbol(&self, shift: f64) -> f64 {
        self.symbol.iter().fold(f64::INFINITY, |m, &s| m.min(shift + s))
    }

    /// Solves `(shift * I + (1 + Delta_h)^2) x = rhs`. Returns `None` if some
    /// mode of the operator is not positive.
    pub fn solve_shifted(&mut self, shift: f64, rhs: &[f64], out: &mut [f64]) -> Option<()> {
        if self.min_shifted_symbol(shift) <= 0.0 {
            return None;
        }
        self.multiply_by(|s| 1.0 / (shift + s), rhs, out);
        Some(())
    }

    /// Applies `shift * I + (1 + Delta_h)^2` spectrally.
    pub fn apply_shifted(&mut self, shift: f64, x: &[f64], out: &mut [f64]) {
        self.multiply_by(|s| shift + s, x, out);
    }

    fn multiply_by(&mut self, mult: impl Fn(f64) -> f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.buffer.len());
        for (b, &v) in self.buffer.iter_mut().zip(x) {
            *b = Complex64::new(v, 0.0);
        }
        self.transform(true);
        for (b, &s) in self.buffer.iter_mut().zip(&self.symbol) {
            *b *= mult(s);
        }
        self.transform(false);
        let norm = 1.0 / self.spec.len() as f64;
        for (o, b) in out.iter_mut().zip(&self.buffer) {
            *o = b.re * norm;
        }
    }

    fn transform(&mut self, forward: bool) {
        let fft = if forward {
            Arc::clone(&self.forward)
        } else {
            Arc::clone(&self.inverse)
        };
        let m = self.spec.points();
        for stride in self.spec.strides() {
            if stride == 1 {
                fft.process_with_scratch(&mut self.buffer, &mut self.scratch);
                continue;
            }
            let block_len = stride * m;
            for outer in (0..self.buffer.len()).step_by(block_len) {
                let mut inner = 0;
                while inner < stride {
                    let width = GATHER_BLOCK.min(stride - inner);
                    for p in 0..m {
                        let row = outer + p * stride + inner;
                        for b in 0..width {
                            self.lines[b * m + p] = self.buffer[row + b];
                        }
                    }
                    fft.process_with_scratch(&mut self.lines[..width * m], &mut self.scratch);
                    for p in 0..m {
                        let row = outer + p * stride + inner;
                        for b in 0..width {
                            self.buffer[row + b] = self.lines[b * m + p];
                        }
                    }
                    inner += width;
                }
            }
        }
    }
}
