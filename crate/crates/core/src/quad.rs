//! Quadrature rules shared by the transform and solver modules: cached
//! Gauss-Legendre / Gauss-Hermite nodes and an adaptive integrator for
//! smooth-between-breakpoints integrands.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug)]
pub(crate) struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Family {
    Legendre,
    Hermite,
}

fn cache() -> &'static Mutex<BTreeMap<(Family, usize), Arc<Rule>>> {
    static CACHE: OnceLock<Mutex<BTreeMap<(Family, usize), Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(BTreeMap::new()))
}

/// Gauss-Legendre rule on [-1, 1].
pub(crate) fn legendre_rule(n: usize) -> Arc<Rule> {
    assert!(n >= 2, "Legendre rule needs at least 2 nodes");
    let mut guard = cache().lock().unwrap();
    guard
        .entry((Family::Legendre, n))
        .or_insert_with(|| Arc::new(compute_legendre(n)))
        .clone()
}

/// Gauss-Hermite rule for the weight exp(-x^2) (physicists' convention,
/// weights sum to sqrt(pi)).
pub(crate) fn hermite_rule(n: usize) -> Arc<Rule> {
    assert!(n >= 2, "Hermite rule needs at least 2 nodes");
    let mut guard = cache().lock().unwrap();
    guard
        .entry((Family::Hermite, n))
        .or_insert_with(|| Arc::new(compute_hermite(n)))
        .clone()
}

fn compute_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// Golub-Welsch: nodes are the eigenvalues of the symmetric tridiagonal
/// Jacobi matrix with off-diagonals sqrt(j/2); weights come from the first
/// eigenvector components. Robust at every order in range, unlike the
/// asymptotic-initial-guess Newton iteration.
fn compute_hermite(n: usize) -> Rule {
    let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        let off = ((i as f64 + 1.0) / 2.0).sqrt();
        jacobi[(i, i + 1)] = off;
        jacobi[(i + 1, i)] = off;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let first = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], sqrt_pi * first * first)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Fixed 15-point Gauss-Legendre estimate on [a, b].
pub(crate) fn gl15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let rule = legendre_rule(15);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Adaptive bisection built on GL15, for integrands that are smooth except
/// possibly for mild (integrable-derivative) endpoint behaviour. The error
/// control compares a parent panel against its two children.
pub(crate) fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol_abs: f64,
    tol_rel: f64,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gl15(f, a, b);
    adapt(f, a, b, whole, tol_abs, tol_rel, 52)
}

fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol_abs: f64,
    tol_rel: f64,
    depth: usize,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gl15(f, a, mid);
    let right = gl15(f, mid, b);
    let refined = left + right;
    let err = (refined - whole).abs();
    if depth == 0 || err <= tol_abs.max(tol_rel * refined.abs()) || mid <= a || mid >= b {
        return refined;
    }
    adapt(f, a, mid, left, 0.5 * tol_abs, tol_rel, depth - 1)
        + adapt(f, mid, b, right, 0.5 * tol_abs, tol_rel, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        // 8 nodes are exact up to degree 15.
        let rule = legendre_rule(8);
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
            acc += w * x.powi(14);
        }
        assert!((acc - 2.0 / 15.0).abs() < 1e-14);
        let wsum: f64 = rule.weights.iter().sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        for &n in &[5usize, 21, 64, 96, 200] {
            let rule = hermite_rule(n);
            let sqrt_pi = std::f64::consts::PI.sqrt();
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - sqrt_pi).abs() < 1e-12 * sqrt_pi, "order {n}");
            // second moment of exp(-x^2) is sqrt(pi)/2
            let m2: f64 = rule
                .nodes
                .iter()
                .zip(rule.weights.iter())
                .map(|(x, w)| w * x * x)
                .sum();
            assert!((m2 - sqrt_pi / 2.0).abs() < 1e-10, "order {n}");
        }
    }

    #[test]
    fn adaptive_handles_sqrt_cusp() {
        // integral of 1/(2 sqrt(x)) over [0,1] = 1
        let v = integrate_adaptive(&|x: f64| 0.5 / x.abs().sqrt(), 1e-300, 1.0, 1e-12, 1e-12);
        assert!((v - 1.0).abs() < 1e-9, "got {v}");
    }
}
