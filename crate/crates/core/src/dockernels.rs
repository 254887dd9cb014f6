//! Discrete orthogonal convolution (DOC) kernels of the BDF3 weights and the
//! quadratic-form identities behind the stability and convergence analysis.
//!
//! The DOC kernels `theta_j` invert the BDF3 convolution:
//! `sum_{j=k}^{n} theta_{n-j} b_{j-k} = delta_{nk}`. With only three nonzero
//! weights this collapses to the recursion `11 theta_j - 7 theta_{j-1} + 2 theta_{j-2} = 0`
//! seeded by `theta_0 = 6 tau / 11` and `theta_1 = 42 tau / 121`. The recursion is
//! the production path; the complex closed form exists to cross-check it.

use twofloat::TwoFloat;

use crate::bdf::BdfKernels;

/// `theta_0 ..= theta_m` for one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct DocKernelSeq {
    pub tau: f64,
    pub theta: Vec<f64>,
}

impl DocKernelSeq {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Largest relative defect of the three-term recursion.
    pub fn recursion_defect(&self) -> f64 {
        self.theta
            .windows(3)
            .map(|w| {
                let d = 11.0 * w[2] - 7.0 * w[1] + 2.0 * w[0];
                d.abs() / (11.0 * w[2].abs() + 7.0 * w[1].abs() + 2.0 * w[0].abs())
            })
            .fold(0.0, f64::max)
    }
}

/// `theta_j` for `j <= m`, as `tau` times the unit-step kernels.
pub fn doc_recursive(m: usize, tau: f64) -> DocKernelSeq {
    let mut unit = Vec::with_capacity(m + 1);
    unit.push(6.0 / 11.0);
    if m >= 1 {
        unit.push(42.0 / 121.0);
    }
    for j in 2..=m {
        let next = (7.0 * unit[j - 1] - 2.0 * unit[j - 2]) / 11.0;
        unit.push(next);
    }
    DocKernelSeq {
        tau,
        theta: unit.into_iter().map(|t| t * tau).collect(),
    }
}

/// Complex number in double-double precision.
#[derive(Clone, Copy)]
struct DdComplex {
    re: TwoFloat,
    im: TwoFloat,
}

impl DdComplex {
    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn powu(self, mut e: usize) -> Self {
        let one = TwoFloat::from(1.0);
        let mut acc = Self { re: one, im: TwoFloat::from(0.0) };
        let mut base = self;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            e >>= 1;
        }
        acc
    }

    fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }
}

/// Closed form `theta_j = (6 tau / 11) 2 Re[c q^j]` with
/// `c = (39 + 7 sqrt(39) i) / 78` and `q = (7 - sqrt(39) i) / 22`.
/// Returns `(real part, imaginary residue)`.
///
/// `theta_j` passes close to zero for some `j`, so the powers are taken in
/// double-double arithmetic to keep the relative error near machine precision.
pub fn doc_explicit_complex(j: usize, tau: f64) -> (f64, f64) {
    let s39 = TwoFloat::from(39.0).sqrt();
    let coef = DdComplex {
        re: TwoFloat::from(0.5),
        im: s39 * 7.0 / 78.0,
    };
    let root = DdComplex {
        re: TwoFloat::from(7.0) / 22.0,
        im: -s39 / 22.0,
    };
    let p = root.powu(j);
    let a = coef.mul(p);
    let b = coef.conj().mul(p.conj());
    let scale = TwoFloat::from(6.0 * tau) / 11.0;
    let re = (a.re + b.re) * scale;
    let im = (a.im + b.im) * scale;
    (re.into(), im.into())
}

pub fn doc_explicit(j: usize, tau: f64) -> f64 {
    doc_explicit_complex(j, tau).0
}

/// Max over `d = 0..=d_max` of `|sum_{i=0}^{d} theta_{d-i} b_i - delta_{d0}|`.
pub fn verify_orthogonality(d_max: usize, tau: f64) -> f64 {
    let theta = doc_recursive(d_max, tau).theta;
    let k = BdfKernels::new(tau).expect("tau > 0");
    (0..=d_max)
        .map(|d| {
            let s: f64 = (0..=d.min(2)).map(|i| theta[d - i] * k.b(i)).sum();
            let target = if d == 0 { 1.0 } else { 0.0 };
            (s - target).abs()
        })
        .fold(0.0, f64::max)
}

/// Worst slacks of the kernel bounds; negative slack means a violated bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSlack {
    /// `min_j (1 - |theta_j| / ((2/11)^{j/2} tau))`.
    pub pointwise: f64,
    /// `22 tau / 9 - sum_j |theta_j|`.
    pub sum: f64,
}

impl BoundSlack {
    pub fn holds(&self) -> bool {
        self.pointwise >= 0.0 && self.sum >= 0.0
    }
}

/// Checks both kernel bounds for `j <= m`.
///
/// The pointwise bound is checked on `theta_j / ((2/11)^{j/2} tau)`, generated by
/// the rescaled recursion `phi_j = 3.5 sqrt(2/11) phi_{j-1} - phi_{j-2}`, since
/// both sides underflow long before `j = 1000`.
pub fn doc_bounds_check(m: usize, tau: f64) -> BoundSlack {
    let r = (2.0f64 / 11.0).sqrt();
    let mut prev: f64 = 6.0 / 11.0;
    let mut pointwise = 1.0 - prev;
    if m >= 1 {
        let mut cur = 42.0 / 121.0 / r;
        pointwise = pointwise.min(1.0 - cur.abs());
        for _ in 2..=m {
            let next = 3.5 * r * cur - prev;
            prev = cur;
            cur = next;
            pointwise = pointwise.min(1.0 - cur.abs());
        }
    }
    let total: f64 = doc_recursive(m, tau).theta.iter().map(|t| t.abs()).sum();
    BoundSlack {
        pointwise,
        sum: 22.0 * tau / 9.0 - total,
    }
}

/// Lower-triangular Toeplitz quadratic form `sum_k w_k sum_{j<=k} kernel(k-j) w_j`.
fn toeplitz_form(w: &[f64], kernel: impl Fn(usize) -> f64) -> f64 {
    w.iter()
        .enumerate()
        .map(|(k, &wk)| wk * (0..=k).map(|j| kernel(k - j) * w[j]).sum::<f64>())
        .sum()
}

/// `2 sum_k w_k sum_{j<=k} b_{k-j} w_j` for a sequence `w_3, ..., w_n`.
pub fn quadratic_form_b(w: &[f64], tau: f64) -> f64 {
    let k = BdfKernels::new(tau).expect("tau > 0");
    2.0 * toeplitz_form(w, |d| k.b(d))
}

/// `sum_k w_k sum_{j<=k} theta_{k-j} w_j` for a sequence `w_3, ..., w_n`.
pub fn doc_positive_definiteness(w: &[f64], tau: f64) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    let theta = doc_recursive(w.len() - 1, tau).theta;
    toeplitz_form(w, |d| theta[d])
}

/// Both sides of the telescoping decomposition of `6 tau w_n sum_j b_{n-j} w_j`
/// for the window `[w_{n-2}, w_{n-1}, w_n]`.
pub fn decomposition_identity_check(window: [f64; 3], tau: f64) -> (f64, f64) {
    let k = BdfKernels::new(tau).expect("tau > 0");
    let [w2, w1, w0] = window;
    let lhs = 6.0 * tau * w0 * (k.b0 * w0 + k.b1 * w1 + k.b2 * w2);
    let rhs = 4.5 * (w0 * w0 + 2.0 / 9.0 * w1 * w1) - 4.5 * (w1 * w1 + 2.0 / 9.0 * w2 * w2)
        + 2.0 * w0 * w0
        + (w0 + w2) * (w0 + w2)
        + 3.5 * (w0 - w1) * (w0 - w1);
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_and_third_kernel() {
        for &tau in &[1e-3, 0.37, 1.0, 10.0] {
            let s = doc_recursive(2, tau);
            assert!((s.theta[0] - 6.0 * tau / 11.0).abs() <= 1e-16 * tau);
            assert!((s.theta[1] - 42.0 * tau / 121.0).abs() <= 1e-16 * tau);
            assert!((s.theta[2] - 162.0 * tau / 1331.0).abs() < 1e-15 * tau);
        }
        assert_eq!(doc_recursive(0, 1.0).theta.len(), 1);
    }

    #[test]
    fn explicit_seeds() {
        let tau = 2.5;
        let (t0, i0) = doc_explicit_complex(0, tau);
        let (t1, i1) = doc_explicit_complex(1, tau);
        assert!((t0 - 6.0 * tau / 11.0).abs() < 1e-15 * tau);
        assert!((t1 - 42.0 * tau / 121.0).abs() < 1e-15 * tau);
        assert!(i0.abs() <= 1e-14 * tau && i1.abs() <= 1e-14 * tau);
    }

    #[test]
    fn explicit_matches_recursion_to_fifty() {
        let tau = 0.8;
        let rec = doc_recursive(50, tau);
        for j in 0..=50 {
            let (e, im) = doc_explicit_complex(j, tau);
            let r = rec.theta[j];
            assert!((e - r).abs() <= 1e-13 * r.abs().max(1e-300), "j={j}: {e} vs {r}");
            assert!(im.abs() <= 1e-14 * tau);
        }
    }

    #[test]
    fn orthogonality_first_offsets() {
        let k = BdfKernels::new(1.0).unwrap();
        let th = doc_recursive(1, 1.0).theta;
        assert!((th[0] * k.b0 - 1.0).abs() < 1e-15);
        assert!((th[1] * k.b0 + th[0] * k.b1).abs() < 1e-15);
        assert!(verify_orthogonality(200, 0.3) <= 1e-13);
    }

    #[test]
    fn bounds_small_indices() {
        let tau = 1.0;
        let s = doc_bounds_check(0, tau);
        assert!((s.pointwise - 5.0 / 11.0).abs() < 1e-15);
        assert!((s.sum - (22.0 / 9.0 - 6.0 / 11.0)).abs() < 1e-15);
        let s = doc_bounds_check(1, tau);
        assert!((s.pointwise - (1.0 - 42.0 / 121.0 / (2.0f64 / 11.0).sqrt())).abs() < 1e-15);
        let rec = doc_recursive(40, 0.37).theta;
        let direct = (0..=40)
            .map(|j| 1.0 - rec[j].abs() / ((2.0f64 / 11.0).powf(j as f64 / 2.0) * 0.37))
            .fold(f64::INFINITY, f64::min);
        assert!((doc_bounds_check(40, 0.37).pointwise - direct).abs() < 1e-12);
        assert!(doc_bounds_check(1000, 0.37).holds());
    }

    #[test]
    fn quadratic_forms_trivial_cases() {
        assert_eq!(quadratic_form_b(&[0.0; 5], 1.0), 0.0);
        assert!((quadratic_form_b(&[1.0], 1.0) - 11.0 / 3.0).abs() < 1e-15);
        assert_eq!(doc_positive_definiteness(&[0.0; 5], 1.0), 0.0);
        assert!((doc_positive_definiteness(&[1.0], 1.0) - 6.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn decomposition_examples() {
        let (l, r) = decomposition_identity_check([0.0, 0.0, 1.0], 1.0);
        assert!((l - 11.0).abs() < 1e-14 && (r - 11.0).abs() < 1e-14);
        let (l, r) = decomposition_identity_check([1.0, 1.0, 1.0], 0.2);
        assert!((l - 6.0).abs() < 1e-14 && (r - 6.0).abs() < 1e-14);
    }
}
