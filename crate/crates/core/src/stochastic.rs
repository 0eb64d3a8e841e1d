//! Reproducible Brownian path generation, Euler-Maruyama forward
//! simulation, quadratic variation, kernel local-time estimation, and the
//! Gaussian conditional-expectation oracle.
//!
//! All randomness is counter-based: path `k` draws from a substream keyed by
//! `(seed, k)` only, so a path's trajectory is invariant to the total path
//! count and to worker scheduling.

use crate::error::{Error, Result};
use crate::quad::{hermite_rule, legendre_rule};
use ndarray::{Array2, Axis};
use ndarray::parallel::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Uniform grid on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::Domain("need at least one time step".into()));
        }
        Ok(Self { t_end, n_steps })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.t_end
        } else {
            k as f64 * self.dt()
        }
    }
}

/// SplitMix64 finalizer; decorrelates consecutive counters.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Substream rule: path `k` of master seed `s` is seeded by
/// `splitmix64(s ^ splitmix64(k + 1))`.
pub fn path_seed(seed: u64, path: usize) -> u64 {
    splitmix64(seed ^ splitmix64(path as u64 + 1))
}

/// A shared time grid plus per-path N(0, dt) increments.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
    increments: Array2<f64>,
}

/// Draws `n_paths` independent Brownian increment rows. Deterministic given
/// `(grid, n_paths, seed)`.
pub fn sample_brownian(grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(Error::Domain("need at least one path".into()));
    }
    let sqrt_dt = grid.dt().sqrt();
    let mut increments = Array2::zeros((n_paths, grid.n_steps()));
    increments
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(k, mut row)| {
            let mut rng = StdRng::seed_from_u64(path_seed(seed, k));
            for v in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = sqrt_dt * z;
            }
        });
    Ok(PathEnsemble {
        grid: *grid,
        n_paths,
        seed,
        increments,
    })
}

impl PathEnsemble {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn increments(&self) -> &Array2<f64> {
        &self.increments
    }

    /// Brownian states `W`: `n_paths x (n_steps + 1)`, starting at zero.
    pub fn brownian_states(&self) -> Array2<f64> {
        let n = self.grid.n_steps();
        let mut w = Array2::zeros((self.n_paths, n + 1));
        for (j, inc) in self.increments.axis_iter(Axis(0)).enumerate() {
            let mut acc = 0.0;
            for (k, dw) in inc.iter().enumerate() {
                acc += dw;
                w[(j, k + 1)] = acc;
            }
        }
        w
    }
}

/// Drift/diffusion coefficient with a declared Lipschitz constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coefficient {
    Const(f64),
    /// `slope * x + intercept`
    Linear { slope: f64, intercept: f64 },
}

impl Coefficient {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Const(c) => *c,
            Coefficient::Linear { slope, intercept } => slope * x + intercept,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Coefficient::Const(_) => 0.0,
            Coefficient::Linear { slope, .. } => slope.abs(),
        }
    }
}

/// Euler-Maruyama paths of `dX = b(X) dt + sigma(X) dW` driven by a shared
/// ensemble. Before `t0` the state is held at `x0`.
#[derive(Clone, Debug)]
pub struct ForwardPaths {
    grid: TimeGrid,
    pub states: Array2<f64>,
    pub x0: f64,
    pub t0: f64,
    start_index: usize,
}

impl ForwardPaths {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }
}

pub fn euler_forward(
    b: Coefficient,
    sigma: Coefficient,
    t0: f64,
    x0: f64,
    ensemble: &PathEnsemble,
) -> Result<ForwardPaths> {
    let grid = *ensemble.grid();
    let dt = grid.dt();
    let start = (t0 / dt).round() as i64;
    if start < 0 || start as usize > grid.n_steps() || (t0 - start as f64 * dt).abs() > 1e-9 * dt.max(1.0)
    {
        return Err(Error::Domain(format!(
            "start time {t0} does not lie on the grid"
        )));
    }
    let start = start as usize;
    let n = grid.n_steps();
    let mut states = Array2::zeros((ensemble.n_paths(), n + 1));
    let blowup = std::sync::Mutex::new(None::<(usize, usize)>);
    states
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(j, mut row)| {
            let inc = ensemble.increments().row(j);
            let mut x = x0;
            for k in 0..=n {
                row[k] = x;
                if k >= start && k < n {
                    x += b.eval(x) * dt + sigma.eval(x) * inc[k];
                    if !x.is_finite() {
                        let mut guard = blowup.lock().unwrap();
                        if guard.is_none() {
                            *guard = Some((j, k));
                        }
                        return;
                    }
                } else if k < n {
                    // state frozen before the start index
                }
            }
        });
    if let Some((path, step)) = blowup.into_inner().unwrap() {
        return Err(Error::SimulationBlowup { path, step });
    }
    Ok(ForwardPaths {
        grid,
        states,
        x0,
        t0,
        start_index: start,
    })
}

/// Left-point quadratic variation `<Y>_t = sum_{t_k < t} |Z_k|^2 dt`,
/// cumulative over the grid nodes.
pub fn quadratic_variation(z_path: &[f64], grid: &TimeGrid) -> Vec<f64> {
    let dt = grid.dt();
    let mut out = Vec::with_capacity(z_path.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for &z in z_path {
        acc += z * z * dt;
        out.push(acc);
    }
    out
}

/// Kernel occupation-density estimate of the local time at `level`:
/// `(1 / 2 eps) * sum 1_{|Y_k - level| < eps} |Z_k|^2 dt`.
pub fn local_time(
    y_path: &[f64],
    z_path: &[f64],
    grid: &TimeGrid,
    level: f64,
    bandwidth: f64,
) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::Domain("bandwidth must be positive".into()));
    }
    let dt = grid.dt();
    let mut acc = 0.0;
    for (k, &z) in z_path.iter().enumerate() {
        if (y_path[k] - level).abs() < bandwidth {
            acc += z * z * dt;
        }
    }
    Ok(acc / (2.0 * bandwidth))
}

/// Default kernel bandwidth: twice the mean absolute increment, clamped to
/// `[dt^0.6, 1]`. At Euler resolution this balances kernel bias against
/// variance.
pub fn default_bandwidth(y_paths: &Array2<f64>, grid: &TimeGrid) -> f64 {
    let n_steps = y_paths.ncols() - 1;
    let mut acc = 0.0;
    let mut count = 0usize;
    for row in y_paths.axis_iter(Axis(0)) {
        for k in 0..n_steps {
            acc += (row[k + 1] - row[k]).abs();
            count += 1;
        }
    }
    let mean = if count == 0 { 0.0 } else { acc / count as f64 };
    (2.0 * mean).clamp(grid.dt().powf(0.6), 1.0)
}

/// A function under a Gaussian expectation, together with the points where
/// it fails to be smooth. Splitting the integral there keeps Gauss rules
/// spectrally accurate.
pub trait Integrand: Sync {
    fn value(&self, x: f64) -> f64;
    fn kinks(&self) -> &[f64] {
        &[]
    }
}

/// A smooth closure.
pub struct Smooth<F: Fn(f64) -> f64 + Sync>(pub F);

impl<F: Fn(f64) -> f64 + Sync> Integrand for Smooth<F> {
    fn value(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// A closure with declared kink locations.
pub struct WithKinks<F: Fn(f64) -> f64 + Sync> {
    pub f: F,
    pub kinks: Vec<f64>,
}

impl<F: Fn(f64) -> f64 + Sync> Integrand for WithKinks<F> {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn kinks(&self) -> &[f64] {
        &self.kinks
    }
}

const GH_MIN_ORDER: usize = 5;
const GH_MAX_ORDER: usize = 200;
/// Gaussian mass beyond 10 sigma is ~1.5e-23; truncating there is far below
/// every tolerance in use.
const GAUSS_SPAN_SIGMAS: f64 = 10.0;

/// `E[h(center + sqrt(variance) G)]` for standard normal `G`.
///
/// Smooth integrands use a Gauss-Hermite rule of the given order. When `h`
/// declares kinks, the integral is split there and each smooth segment uses
/// a Gauss-Legendre rule of the same order against the Gaussian density, so
/// doubling the order still tightens the result spectrally.
pub fn gh_expectation(
    h: &dyn Integrand,
    variance: f64,
    center: f64,
    order: usize,
) -> Result<f64> {
    if !(variance >= 0.0) || !center.is_finite() {
        return Err(Error::Domain(format!(
            "bad Gaussian parameters: variance {variance}, center {center}"
        )));
    }
    if !(GH_MIN_ORDER..=GH_MAX_ORDER).contains(&order) {
        return Err(Error::Domain(format!(
            "quadrature order {order} outside [{GH_MIN_ORDER}, {GH_MAX_ORDER}]"
        )));
    }
    if variance == 0.0 {
        return Ok(h.value(center));
    }
    let sigma = variance.sqrt();
    let lo = center - GAUSS_SPAN_SIGMAS * sigma;
    let hi = center + GAUSS_SPAN_SIGMAS * sigma;
    let interior: Vec<f64> = h
        .kinks()
        .iter()
        .copied()
        .filter(|k| *k > lo && *k < hi)
        .collect();

    let value = if interior.is_empty() {
        let rule = hermite_rule(order);
        let scale = (2.0 * variance).sqrt();
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
            acc += w * h.value(center + scale * x);
        }
        acc / std::f64::consts::PI.sqrt()
    } else {
        let mut cuts = interior;
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        let rule = legendre_rule(order);
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let mut total = 0.0;
        for w2 in cuts.windows(2) {
            let (a, b) = (w2[0], w2[1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let mut panel = 0.0;
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let p = mid + half * x;
                let dens = (-(p - center) * (p - center) / (2.0 * variance)).exp() * norm;
                panel += w * h.value(p) * dens;
            }
            total += half * panel;
        }
        total
    };
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "Gaussian expectation overflowed (center {center}, variance {variance})"
        )));
    }
    Ok(value)
}

/// Same quadrature, returning both `E[h]` and the martingale slope
/// `E[h * (X - center)] / variance` in one pass.
pub fn gh_expectation_with_slope(
    h: &dyn Integrand,
    variance: f64,
    center: f64,
    order: usize,
) -> Result<(f64, f64)> {
    if variance == 0.0 {
        return Ok((h.value(center), 0.0));
    }
    let sigma = variance.sqrt();
    let lo = center - GAUSS_SPAN_SIGMAS * sigma;
    let hi = center + GAUSS_SPAN_SIGMAS * sigma;
    let interior: Vec<f64> = h
        .kinks()
        .iter()
        .copied()
        .filter(|k| *k > lo && *k < hi)
        .collect();
    if !(GH_MIN_ORDER..=GH_MAX_ORDER).contains(&order) {
        return Err(Error::Domain(format!(
            "quadrature order {order} outside [{GH_MIN_ORDER}, {GH_MAX_ORDER}]"
        )));
    }
    let (mut mean, mut slope) = (0.0, 0.0);
    if interior.is_empty() {
        let rule = hermite_rule(order);
        let scale = (2.0 * variance).sqrt();
        for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
            let v = h.value(center + scale * x);
            mean += w * v;
            slope += w * v * scale * x;
        }
        let norm = std::f64::consts::PI.sqrt();
        mean /= norm;
        slope /= norm * variance;
    } else {
        let mut cuts = interior;
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        let rule = legendre_rule(order);
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        for w2 in cuts.windows(2) {
            let (a, b) = (w2[0], w2[1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let p = mid + half * x;
                let dens = (-(p - center) * (p - center) / (2.0 * variance)).exp() * norm;
                let v = h.value(p) * dens * w * half;
                mean += v;
                slope += v * (p - center);
            }
        }
        slope /= variance;
    }
    if !(mean.is_finite() && slope.is_finite()) {
        return Err(Error::Numeric("Gaussian expectation overflowed".into()));
    }
    Ok((mean, slope))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t: f64, n: usize) -> TimeGrid {
        TimeGrid::new(t, n).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = grid(1.0, 32);
        let a = sample_brownian(&g, 100, 7).unwrap();
        let b = sample_brownian(&g, 100, 7).unwrap();
        assert_eq!(a.increments(), b.increments());
        let c = sample_brownian(&g, 100, 8).unwrap();
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn path_draws_do_not_depend_on_path_count() {
        let g = grid(1.0, 16);
        let small = sample_brownian(&g, 10, 99).unwrap();
        let large = sample_brownian(&g, 1000, 99).unwrap();
        for k in 0..10 {
            assert_eq!(small.increments().row(k), large.increments().row(k));
        }
    }

    #[test]
    fn terminal_variance_concentrates() {
        let g = grid(2.0, 64);
        let n_paths = 4000;
        let ens = sample_brownian(&g, n_paths, 12345).unwrap();
        let w = ens.brownian_states();
        let var: f64 = w
            .column(g.n_steps())
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            / n_paths as f64;
        // chi-squared concentration: sd of the estimator is T sqrt(2/n)
        let band = 4.0 * g.t_end() * (2.0 / n_paths as f64).sqrt();
        assert!((var - g.t_end()).abs() < band, "var {var}");
    }

    #[test]
    fn disjoint_paths_are_uncorrelated() {
        let g = grid(1.0, 256);
        let ens = sample_brownian(&g, 2, 5).unwrap();
        let a = ens.increments().row(0);
        let b = ens.increments().row(1);
        let n = g.n_steps() as f64;
        let dt = g.dt();
        let rho: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / (n * dt);
        assert!(rho.abs() <= 4.0 / n.sqrt(), "rho {rho}");
    }

    #[test]
    fn mean_increment_is_small() {
        let g = grid(1.0, 64);
        let n_paths = 2000;
        let ens = sample_brownian(&g, n_paths, 777).unwrap();
        let total: f64 = ens.increments().iter().sum();
        let count = (n_paths * g.n_steps()) as f64;
        let mean = total / count;
        assert!(mean.abs() <= 4.0 * g.dt().sqrt() / count.sqrt());
    }

    #[test]
    fn zero_paths_is_a_domain_error() {
        let g = grid(1.0, 4);
        assert!(matches!(
            sample_brownian(&g, 0, 1),
            Err(Error::Domain(_))
        ));
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn euler_pure_brownian_and_frozen() {
        let g = grid(1.0, 32);
        let ens = sample_brownian(&g, 20, 3).unwrap();
        let x = euler_forward(Coefficient::Const(0.0), Coefficient::Const(1.0), 0.0, 0.0, &ens)
            .unwrap();
        let w = ens.brownian_states();
        for j in 0..20 {
            for k in 0..=32 {
                assert!((x.states[(j, k)] - w[(j, k)]).abs() < 1e-14);
            }
        }
        let frozen =
            euler_forward(Coefficient::Const(0.0), Coefficient::Const(0.0), 0.0, 2.5, &ens)
                .unwrap();
        assert!(frozen.states.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn euler_geometric_mean_matches_closed_form() {
        let g = grid(1.0, 128);
        let n_paths = 20_000;
        let ens = sample_brownian(&g, n_paths, 2024).unwrap();
        let x = euler_forward(
            Coefficient::Linear { slope: 0.1, intercept: 0.0 },
            Coefficient::Linear { slope: 0.2, intercept: 0.0 },
            0.0,
            1.0,
            &ens,
        )
        .unwrap();
        let terminal = x.states.column(g.n_steps());
        let mean: f64 = terminal.iter().sum::<f64>() / n_paths as f64;
        let sd: f64 = (terminal.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (n_paths as f64 - 1.0))
            .sqrt();
        let se = sd / (n_paths as f64).sqrt();
        let target = (0.1_f64).exp();
        assert!(
            (mean - target).abs() < 4.0 * se + 0.01 * g.dt(),
            "mean {mean} target {target} se {se}"
        );
    }

    #[test]
    fn quadratic_variation_examples() {
        let g = grid(2.0, 100);
        let ones = vec![1.0; 100];
        let qv = quadratic_variation(&ones, &g);
        assert!((qv[100] - 2.0).abs() < 1e-12);
        let zeros = vec![0.0; 100];
        assert_eq!(quadratic_variation(&zeros, &g)[100], 0.0);
        // Z_s = s: Riemann sum of s^2 -> T^3/3
        let zs: Vec<f64> = (0..100).map(|k| g.node(k)).collect();
        let qv = quadratic_variation(&zs, &g);
        let exact: f64 = (0..100).map(|k| g.node(k).powi(2) * g.dt()).sum();
        assert!((qv[100] - exact).abs() < 1e-12);
        assert!((qv[100] - 8.0 / 3.0).abs() < 0.1);
        // nondecreasing
        assert!(qv.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn local_time_trivial_cases() {
        let g = grid(1.0, 10);
        let y = vec![5.0; 11];
        let z = vec![1.0; 10];
        assert_eq!(local_time(&y, &z, &g, 0.0, 0.1).unwrap(), 0.0);
        let z0 = vec![0.0; 10];
        assert_eq!(local_time(&y, &z0, &g, 5.0, 0.1).unwrap(), 0.0);
        assert!(local_time(&y, &z, &g, 0.0, 0.0).is_err());
    }

    #[test]
    fn brownian_local_time_mean_matches_known_value() {
        // E[L_T^0(W)] = sqrt(2 T / pi)
        let g = grid(1.0, 1 << 14);
        let n_paths = 400;
        let ens = sample_brownian(&g, n_paths, 31).unwrap();
        let w = ens.brownian_states();
        let eps = default_bandwidth(&w, &g);
        let z = vec![1.0; g.n_steps()];
        let mut acc = 0.0;
        for j in 0..n_paths {
            let row: Vec<f64> = w.row(j).to_vec();
            acc += local_time(&row, &z, &g, 0.0, eps).unwrap();
        }
        let mean = acc / n_paths as f64;
        let target = (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (mean - target).abs() < 0.05 * target.max(1.0),
            "mean {mean} target {target} eps {eps}"
        );
    }

    #[test]
    fn occupation_identity_on_brownian_fixture() {
        // sum psi(Y_k) |Z_k|^2 dt ~ int psi(a) Lhat^a da for smooth psi >= 0
        let g = grid(1.0, 1 << 14);
        let n_paths = 8;
        let ens = sample_brownian(&g, n_paths, 57).unwrap();
        let w = ens.brownian_states();
        let eps = default_bandwidth(&w, &g);
        let z = vec![1.0; g.n_steps()];
        let psi = |a: f64| (-a * a).exp();
        for j in 0..n_paths {
            let row: Vec<f64> = w.row(j).to_vec();
            let lhs: f64 = (0..g.n_steps()).map(|k| psi(row[k]) * g.dt()).sum();
            // trapezoid over an a-grid covering the path range
            let ymin = row.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * eps;
            let ymax = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * eps;
            let m = 800;
            let da = (ymax - ymin) / m as f64;
            let mut rhs = 0.0;
            for i in 0..=m {
                let a = ymin + i as f64 * da;
                let lt = local_time(&row, &z, &g, a, eps).unwrap();
                let wgt = if i == 0 || i == m { 0.5 } else { 1.0 };
                rhs += wgt * psi(a) * lt * da;
            }
            let rel = (lhs - rhs).abs() / lhs.max(1e-12);
            assert!(rel <= 0.10, "path {j}: rel {rel}");
        }
    }

    #[test]
    fn gh_expectation_polynomials_are_exact() {
        let id = Smooth(|x: f64| x);
        assert!((gh_expectation(&id, 2.0, 3.5, 21).unwrap() - 3.5).abs() < 1e-13);
        let sq = Smooth(|x: f64| x * x);
        assert!((gh_expectation(&sq, 1.0, 0.0, 21).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn gh_expectation_kinked_integrand_self_converges() {
        // relu has a kink at 0; split quadrature must still be spectral
        let relu = WithKinks {
            f: |x: f64| x.max(0.0),
            kinks: vec![0.0],
        };
        let v64 = gh_expectation(&relu, 1.0, 0.0, 64).unwrap();
        let v128 = gh_expectation(&relu, 1.0, 0.0, 128).unwrap();
        assert!((v64 - v128).abs() < 1e-9);
        let exact = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((v64 - exact).abs() < 1e-12);
    }

    #[test]
    fn gh_expectation_order_bounds() {
        let id = Smooth(|x: f64| x);
        assert!(gh_expectation(&id, 1.0, 0.0, 4).is_err());
        assert!(gh_expectation(&id, 1.0, 0.0, 201).is_err());
    }

    #[test]
    fn slope_of_identity_is_one() {
        let id = Smooth(|x: f64| x);
        let (mean, slope) = gh_expectation_with_slope(&id, 0.7, 1.3, 32).unwrap();
        assert!((mean - 1.3).abs() < 1e-12);
        assert!((slope - 1.0).abs() < 1e-12);
    }
}
