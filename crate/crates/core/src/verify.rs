//! Self-checks behind the `verify` subcommand: DOC kernel identities and
//! discrete operator identities on random data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dockernels::{
    decomposition_identity_check, doc_bounds_check, doc_explicit_complex, doc_positive_definiteness,
    doc_recursive, quadratic_form_b, verify_orthogonality,
};
use crate::grid::{
    gradient, inner, laplacian, laplacian_symbol_1d, norm, shifted_squared, GridField, GridSpec, Norm,
};

const SEED: u64 = 20_240_917;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

pub const TAUS: [f64; 3] = [1e-3, 1.0, 10.0];

/// Kernel recursion, closed form, orthogonality, decay bounds and scaling.
pub fn doc_kernel_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for &tau in &TAUS {
        let rec = doc_recursive(200, tau);
        let mut rel = 0.0f64;
        let mut imag = 0.0f64;
        for (j, &r) in rec.theta.iter().enumerate() {
            let (e, im) = doc_explicit_complex(j, tau);
            rel = rel.max((e - r).abs() / r.abs());
            imag = imag.max(im.abs() / tau);
        }
        out.push(Check::at_most(format!("recursive vs explicit, tau={tau:e}"), rel, 1e-12));
        out.push(Check::at_most(format!("explicit imaginary residue / tau, tau={tau:e}"), imag, 1e-14));
        out.push(Check::at_most(
            format!("orthogonality deviation, tau={tau:e}"),
            verify_orthogonality(200, tau),
            1e-13,
        ));
        let slack = doc_bounds_check(1000, tau);
        out.push(Check::at_least(format!("pointwise bound slack, tau={tau:e}"), slack.pointwise, 0.0));
        out.push(Check::at_least(format!("sum bound slack, tau={tau:e}"), slack.sum, 0.0));
        let unit = doc_recursive(200, 1.0);
        let scale = rec
            .theta
            .iter()
            .zip(&unit.theta)
            .map(|(a, b)| (a - tau * b).abs() / a.abs())
            .fold(0.0, f64::max);
        out.push(Check::at_most(format!("linear scaling in tau, tau={tau:e}"), scale, 1e-15));
    }
    out
}

/// Worst normalized values of both quadratic forms over random sequences, and the
/// worst relative mismatch of the telescoping decomposition over random triples.
pub fn positivity_checks(samples: usize) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_b = f64::INFINITY;
    let mut worst_doc = f64::INFINITY;
    for _ in 0..samples {
        let len = rng.gen_range(1..=50);
        let tau = TAUS[rng.gen_range(0..TAUS.len())];
        let w: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let sq: f64 = w.iter().map(|x| x * x).sum();
        worst_b = worst_b.min(quadratic_form_b(&w, tau) * tau / sq);
        worst_doc = worst_doc.min(doc_positive_definiteness(&w, tau) / (tau * sq));
    }
    let mut worst_decomp = 0.0f64;
    for _ in 0..samples {
        let tau = TAUS[rng.gen_range(0..TAUS.len())];
        let w = [
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ];
        let (lhs, rhs) = decomposition_identity_check(w, tau);
        let scale = w.iter().map(|x| x * x).sum::<f64>();
        worst_decomp = worst_decomp.max((lhs - rhs).abs() / scale.max(lhs.abs()));
    }
    vec![
        Check::at_least("BDF3 quadratic form / (sum w^2 / tau)", worst_b, -1e-12),
        Check::at_least("DOC quadratic form / (tau sum w^2)", worst_doc, -1e-12),
        Check::at_most("decomposition identity relative mismatch", worst_decomp, 1e-13),
    ]
}

/// Maximum relative defects of the summation-by-parts identity
/// `<Delta_h u, v> = -sum_a <D_a u, D_a v>`, the symmetry of `(1 + Delta_h)^2`, and
/// the self-adjointness of `Delta_h`, over `fields` random pairs per grid.
pub fn operator_identity_defects(spec: GridSpec, fields: usize, seed: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = |spec: GridSpec| {
        let vals = (0..spec.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        GridField::new(spec, vals).expect("finite")
    };
    let (mut green, mut adjoint, mut lap_sym) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..fields {
        let u = random(spec);
        let v = random(spec);
        let lu = laplacian(&u);
        let lv = laplacian(&v);
        let lhs = inner(&lu, &v).expect("same grid");
        let rhs: f64 = -gradient(&u)
            .iter()
            .zip(gradient(&v).iter())
            .map(|(a, b)| inner(a, b).expect("same grid"))
            .sum::<f64>();
        let scale = norm(&lu, Norm::L2) * norm(&v, Norm::L2);
        green = green.max((lhs - rhs).abs() / scale);
        let su = shifted_squared(&u);
        let sv = shifted_squared(&v);
        let a = inner(&su, &v).expect("same grid");
        let b = inner(&u, &sv).expect("same grid");
        let scale = norm(&su, Norm::L2) * norm(&v, Norm::L2);
        adjoint = adjoint.max((a - b).abs() / scale);
        let a = inner(&lu, &v).expect("same grid");
        let b = inner(&u, &lv).expect("same grid");
        let scale = norm(&lu, Norm::L2) * norm(&v, Norm::L2) + norm(&u, Norm::L2) * norm(&lv, Norm::L2);
        lap_sym = lap_sym.max((a - b).abs() / scale);
    }
    (green, adjoint, lap_sym)
}

/// Largest relative defect of `Delta_h e_k = lambda_h(k) e_k` over all products of
/// 1D cosine modes on a grid.
pub fn eigenmode_defect(spec: GridSpec) -> f64 {
    let m = spec.points();
    let h = spec.spacing();
    let dim = spec.dim();
    let two_pi_over_l = 2.0 * std::f64::consts::PI / spec.length();
    let mut worst = 0.0f64;
    let mut k = vec![0usize; dim];
    loop {
        let mode = GridField::from_fn(spec, |x| {
            x.iter()
                .zip(&k)
                .map(|(&xi, &ki)| (two_pi_over_l * ki as f64 * xi).cos())
                .product()
        });
        let lambda: f64 = k.iter().map(|&ki| laplacian_symbol_1d(ki, m, h)).sum();
        let lm = laplacian(&mode);
        let scale = norm(&mode, Norm::L2) * lambda.abs().max(1.0);
        let diff = lm.zip_map(&mode, |a, b| a - lambda * b).expect("same grid");
        worst = worst.max(norm(&diff, Norm::L2) / scale);
        let mut a = 0;
        loop {
            if a == dim {
                return worst;
            }
            k[a] += 1;
            if k[a] < m {
                break;
            }
            k[a] = 0;
            a += 1;
        }
    }
}

pub fn operator_checks(fields: usize) -> Vec<Check> {
    let mut out = Vec::new();
    for dim in [2usize, 3] {
        for m in [8usize, 16] {
            let spec = GridSpec::new(dim, 2.0 + dim as f64 + m as f64 / 8.0, m).expect("valid grid");
            let (green, adjoint, lap) = operator_identity_defects(spec, fields, SEED + (10 * dim + m) as u64);
            out.push(Check::at_most(format!("Green's formula, dim={dim}, M={m}"), green, 1e-12));
            out.push(Check::at_most(format!("(1+Delta_h)^2 adjoint, dim={dim}, M={m}"), adjoint, 1e-12));
            out.push(Check::at_most(format!("Delta_h symmetric, dim={dim}, M={m}"), lap, 1e-12));
            out.push(Check::at_most(
                format!("eigenmode symbol, dim={dim}, M={m}"),
                eigenmode_defect(spec),
                1e-12,
            ));
        }
    }
    out
}

/// Every check run by `verify`.
pub fn run_all() -> Vec<Check> {
    let mut out = doc_kernel_checks();
    out.extend(positivity_checks(1000));
    out.extend(operator_checks(100));
    out
}

pub fn format_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for c in checks {
        s.push_str(&format!(
            "{:<4}  {:<width$}  {:>12.4e}  (limit {:.1e})\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold,
        ));
    }
    s
}
