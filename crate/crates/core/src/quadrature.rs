//! Gauss rules from the three-term recurrence of the orthogonal polynomials.
//!
//! Nodes are the eigenvalues of the symmetric Jacobi matrix (Golub-Welsch),
//! polished by Newton steps on the recurrence. Weights come from the
//! Christoffel function `1 / sum_k p_k(x)^2` of the orthonormal polynomials,
//! which keeps them positive with good relative accuracy far into the tails.
//! All weights are normalized to the unit-mass measure, so no Gamma-function
//! prefactors are ever formed.

use nalgebra::DMatrix;

/// Nodes and unit-sum weights of an `n`-point Gauss rule whose Jacobi matrix
/// has diagonal `diag` (length `n`) and off-diagonal `off` (length `n`, the
/// last entry being `b_n`, used only for Newton polishing).
fn gauss_from_jacobi(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    debug_assert_eq!(off.len(), n);
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = diag[i];
        if i + 1 < n {
            jacobi[(i, i + 1)] = off[i];
            jacobi[(i + 1, i)] = off[i];
        }
    }
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp, _) = orthonormal_eval(diag, off, *x);
            if dp == 0.0 || !dp.is_finite() {
                break;
            }
            let step = p / dp;
            *x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| 1.0 / orthonormal_eval(diag, off, x).2)
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// Evaluates `(p_n(x), p_n'(x), sum_{k<n} p_k(x)^2)` for the orthonormal
/// family defined by the recurrence coefficients.
fn orthonormal_eval(diag: &[f64], off: &[f64], x: f64) -> (f64, f64, f64) {
    let n = diag.len();
    let (mut p_prev, mut p) = (0.0, 1.0);
    let (mut dp_prev, mut dp) = (0.0, 0.0);
    let mut christoffel = 0.0;
    for k in 0..n {
        christoffel += p * p;
        let b_prev = if k == 0 { 0.0 } else { off[k - 1] };
        let p_next = ((x - diag[k]) * p - b_prev * p_prev) / off[k];
        let dp_next = (p + (x - diag[k]) * dp - b_prev * dp_prev) / off[k];
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp, christoffel)
}

/// Gauss-Hermite rule for the weight `e^{-t^2}`, normalized to unit mass.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..=n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let (mut nodes, weights) = gauss_from_jacobi(&diag, &off);
    // enforce exact antisymmetry of the nodes
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let r = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -r;
        nodes[j] = r;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Generalized Gauss-Laguerre rule for the weight `t^alpha e^{-t}` on
/// `[0, inf)`, normalized to unit mass. Requires `alpha > -1`.
pub fn gauss_laguerre(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
    let off: Vec<f64> = (1..=n)
        .map(|k| (k as f64 * (k as f64 + alpha)).sqrt())
        .collect();
    gauss_from_jacobi(&diag, &off)
}

/// Gauss-Legendre rule on `[-1, 1]`, normalized to unit mass.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..=n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (mut nodes, weights) = gauss_from_jacobi(&diag, &off);
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let r = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -r;
        nodes[j] = r;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}
