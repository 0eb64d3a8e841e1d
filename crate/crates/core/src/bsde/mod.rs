//! The solvers.
//!
//! Constructive pipeline: transform the terminal condition by `u`, solve the
//! driver-free or linear-growth equation backward (exact Gaussian quadrature
//! or least-squares Monte Carlo), and transform back with `u^{-1}`. The
//! dominated solver localizes a general continuous driver between the
//! extremal solutions of the `+g`/`-g` equations and solves the truncated
//! equation directly, then asserts the sandwich.

mod collocation;
pub mod drivers;
mod regression;
mod terminal;

pub use drivers::{
    BarDriver, ConstBar, DominatingDriver, LinearYBar, QuadDriver, QuadraticGenDriver,
    ScaledDriver, ZeroBar, ZeroDriver,
};
pub use terminal::{PsiFn, TerminalCondition, TerminalKind};

use crate::error::{Error, Result};
use crate::generator::{DominatingParams, GeneratorSpec};
use crate::stochastic::{gh_expectation_with_slope, ForwardPaths, Integrand, PathEnsemble, TimeGrid};
use crate::transform::{build_u, TransformPair};
use collocation::{smooth_expectation_and_slope, StateGrid};
use ndarray::parallel::prelude::*;
use ndarray::{Array2, Axis, Zip};
use regression::regress_on_state;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// How conditional expectations are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact Gaussian quadrature over the Brownian transition law.
    Quadrature,
    /// Backward least-squares regression on a polynomial basis.
    Regression,
}

/// Solver knobs. Defaults are the desk-scale settings used by the presets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Polynomial basis degree for the regression method.
    pub basis_degree: usize,
    /// Gaussian quadrature order for the quadrature method.
    pub gh_order: usize,
    /// Per-step fixed-point tolerance.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Pathwise sandwich tolerance asserted by the dominated solver;
    /// `None` disables the assertion (negative controls).
    pub sandwich_tol: Option<f64>,
    /// Percentile of the dominating process used for the truncation radius.
    pub truncation_percentile: f64,
    /// Keep the transformed-space arrays in the diagnostics.
    pub keep_transformed: bool,
    /// Engine for the driver solvers (`solve_qbsde_abc` standalone).
    /// The dominated solver always uses the order-preserving grid engine.
    pub driver_method: Method,
    /// State-grid resolution of the order-preserving engine.
    pub collocation_points: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            basis_degree: 4,
            gh_order: 96,
            picard_tol: 1e-10,
            picard_max_iter: 80,
            sandwich_tol: Some(1e-6),
            truncation_percentile: 99.9,
            keep_transformed: false,
            driver_method: Method::Regression,
            collocation_points: 1601,
        }
    }
}

/// Per-solve diagnostics.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    /// Worst per-path fixed-point iteration count, per backward step.
    pub picard_iterations: Vec<usize>,
    /// Condition number of the normal equations, per backward step.
    pub regression_condition: Vec<f64>,
    /// Typical fitted-value standard error, per backward step.
    pub fitted_se: Vec<f64>,
    pub max_fixed_point_residual: f64,
    /// Ensemble estimate of `E[xi^2]`.
    pub terminal_second_moment: f64,
    /// Worst-case per-step contraction estimate
    /// `dt Ly + Lz sqrt(dt) basis-bound`.
    pub contraction_estimate: Option<f64>,
    /// Transformed-space `(Ybar, Zbar)` when requested.
    pub transformed: Option<(Array2<f64>, Array2<f64>)>,
}

/// Per-path, per-node solution arrays plus diagnostics.
#[derive(Clone, Debug)]
pub struct BsdeSolution {
    pub grid: TimeGrid,
    /// `n_paths x (n_steps + 1)`.
    pub y: Array2<f64>,
    /// `n_paths x n_steps`, left endpoints.
    pub z: Array2<f64>,
    pub method: Method,
    pub seed: u64,
    pub diagnostics: Diagnostics,
}

impl BsdeSolution {
    pub fn n_paths(&self) -> usize {
        self.y.nrows()
    }

    /// Value at time zero (the column is constant by construction; the mean
    /// is returned for robustness).
    pub fn y0(&self) -> f64 {
        let col = self.y.column(0);
        col.iter().sum::<f64>() / col.len() as f64
    }

    fn assert_finite(&self) -> Result<()> {
        if self.y.iter().chain(self.z.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric("solution contains non-finite entries".into()))
        }
    }

    /// Mean over paths of the absolute total discrete driver residual
    /// `sum_k [Y_k - Y_{k+1} - H(t_k, Y_k, Z_k) dt + Z_k dW_k]`.
    pub fn driver_residual_mean(
        &self,
        driver: &dyn Fn(f64, f64, f64) -> f64,
        ensemble: &PathEnsemble,
    ) -> f64 {
        let dt = self.grid.dt();
        let n = self.grid.n_steps();
        let mut acc = 0.0;
        for j in 0..self.n_paths() {
            let mut r = 0.0;
            for k in 0..n {
                let y_k = self.y[(j, k)];
                let z_k = self.z[(j, k)];
                r += y_k - self.y[(j, k + 1)] - driver(self.grid.node(k), y_k, z_k) * dt
                    + z_k * ensemble.increments()[(j, k)];
            }
            acc += r.abs();
        }
        acc / self.n_paths() as f64
    }

    /// Writes `path_id,t,y,z` rows (z is empty at the terminal node).
    /// Column order is frozen.
    pub fn export_csv<W: Write>(&self, mut w: W, max_paths: usize) -> std::io::Result<()> {
        writeln!(w, "path_id,t,y,z")?;
        let n = self.grid.n_steps();
        for j in 0..self.n_paths().min(max_paths) {
            for k in 0..=n {
                if k < n {
                    writeln!(
                        w,
                        "{j},{:.17e},{:.17e},{:.17e}",
                        self.grid.node(k),
                        self.y[(j, k)],
                        self.z[(j, k)]
                    )?;
                } else {
                    writeln!(w, "{j},{:.17e},{:.17e},", self.grid.node(k), self.y[(j, k)])?;
                }
            }
        }
        Ok(())
    }
}

/// The two extremal barrier solutions and the truncation radius derived from
/// their dominating process `S_t = |Y^{-g}_t| + |Y^{g}_t|`.
#[derive(Clone, Debug)]
pub struct ExtremalPair {
    /// Solution of `eq(-xi^-, -g)`; nonpositive.
    pub lower: BsdeSolution,
    /// Solution of `eq(xi^+, g)`; nonnegative.
    pub upper: BsdeSolution,
    /// High percentile of `S_t`, used to clamp the driver argument.
    pub truncation_radius: f64,
}

impl ExtremalPair {
    pub fn dominating_process(&self, path: usize, node: usize) -> f64 {
        self.lower.y[(path, node)].abs() + self.upper.y[(path, node)].abs()
    }

    /// `(max(lower - y), max(y - upper))` over all samples: positive parts
    /// of the sandwich violations.
    pub fn violation(&self, sol: &BsdeSolution) -> (f64, f64) {
        let mut below: f64 = 0.0;
        let mut above: f64 = 0.0;
        for ((l, u), y) in self
            .lower
            .y
            .iter()
            .zip(self.upper.y.iter())
            .zip(sol.y.iter())
        {
            below = below.max(l - y);
            above = above.max(y - u);
        }
        (below, above)
    }
}

/// Sign of the dominating equation being solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriverSign {
    /// `eq(xi, +(a + b|y| + c|z| + f(y)|z|^2))`
    Plus,
    /// `eq(xi, -(a + b|y| + c|z| + f(y)|z|^2))`
    Minus,
}

/// Terminal map `x -> wrap(psi(x))` with the kinks of the composition.
struct TerminalMap<'a> {
    psi: &'a PsiFn,
    wrap: Option<&'a TransformPair>,
    kinks: Vec<f64>,
}

impl<'a> TerminalMap<'a> {
    fn new(psi: &'a PsiFn, wrap: Option<&'a TransformPair>) -> Self {
        let mut kinks = psi.kinks();
        if let Some(u) = wrap {
            for &b in u.spec().breakpoints() {
                kinks.extend(psi.preimages(b));
            }
        }
        kinks.sort_by(|a, b| a.total_cmp(b));
        kinks.dedup();
        Self { psi, wrap, kinks }
    }
}

impl Integrand for TerminalMap<'_> {
    fn value(&self, x: f64) -> f64 {
        let v = self.psi.eval(x);
        match self.wrap {
            Some(u) => u.eval(v),
            None => v,
        }
    }
    fn kinks(&self) -> &[f64] {
        &self.kinks
    }
}

fn resolve_states(
    term: &TerminalCondition,
    ensemble: &PathEnsemble,
    forward: Option<&ForwardPaths>,
) -> Result<Array2<f64>> {
    match term.kind {
        TerminalKind::OfBrownian => Ok(ensemble.brownian_states()),
        TerminalKind::OfForward => {
            let fw = forward.ok_or_else(|| {
                Error::Domain("an of_forward terminal needs forward paths".into())
            })?;
            if fw.grid() != ensemble.grid() || fw.states.nrows() != ensemble.n_paths() {
                return Err(Error::MismatchedEnsembles(
                    "forward paths and ensemble disagree on grid or path count".into(),
                ));
            }
            Ok(fw.states.clone())
        }
    }
}

/// Solves the driver-free equation `eq(xi, 0)`: `Y_t = E[xi | F_t]`, with
/// `Z` from the martingale representation.
pub fn solve_zero_generator(
    term: &TerminalCondition,
    ensemble: &PathEnsemble,
    forward: Option<&ForwardPaths>,
    method: Method,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    let states = resolve_states(term, ensemble, forward)?;
    solve_zero_with_map(term, None, &states, ensemble, method, cfg)
}

/// Driver-free solve of the mapped terminal `wrap(psi(state_T))`. The
/// quadrature method computes, per path and node, the Gaussian conditional
/// expectation and its martingale slope; the regression method runs the
/// backward least-squares sweep.
fn solve_zero_with_map(
    term: &TerminalCondition,
    wrap: Option<&TransformPair>,
    states: &Array2<f64>,
    ensemble: &PathEnsemble,
    method: Method,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    let grid = *ensemble.grid();
    let n = grid.n_steps();
    let n_paths = ensemble.n_paths();
    let map = TerminalMap::new(&term.psi, wrap);

    let mut diagnostics = Diagnostics {
        terminal_second_moment: states
            .column(n)
            .iter()
            .map(|&x| {
                let v = term.psi.eval(x);
                v * v
            })
            .sum::<f64>()
            / n_paths as f64,
        ..Default::default()
    };

    let mut y = Array2::zeros((n_paths, n + 1));
    let mut z = Array2::zeros((n_paths, n));

    match method {
        Method::Quadrature => {
            if term.kind != TerminalKind::OfBrownian {
                return Err(Error::Domain(
                    "the quadrature method needs a Brownian terminal state".into(),
                ));
            }
            let t_end = grid.t_end();
            let order = cfg.gh_order;
            let failed = std::sync::Mutex::new(None::<Error>);
            Zip::from(y.axis_iter_mut(Axis(0)))
                .and(z.axis_iter_mut(Axis(0)))
                .and(states.axis_iter(Axis(0)))
                .par_for_each(|mut yrow, mut zrow, srow| {
                    for k in 0..=n {
                        let variance = t_end - grid.node(k);
                        if k == n {
                            yrow[n] = map.value(srow[n]);
                        } else {
                            match gh_expectation_with_slope(&map, variance, srow[k], order) {
                                Ok((mean, slope)) => {
                                    yrow[k] = mean;
                                    zrow[k] = slope;
                                }
                                Err(e) => {
                                    let mut guard = failed.lock().unwrap();
                                    if guard.is_none() {
                                        *guard = Some(e);
                                    }
                                    return;
                                }
                            }
                        }
                    }
                });
            if let Some(e) = failed.into_inner().unwrap() {
                return Err(e);
            }
        }
        Method::Regression => {
            let dt = grid.dt();
            for j in 0..n_paths {
                y[(j, n)] = map.value(states[(j, n)]);
            }
            for k in (0..n).rev() {
                let state_k: Vec<f64> = states.column(k).iter().copied().collect();
                let targets: Vec<f64> = y.column(k + 1).iter().copied().collect();
                let fit = regress_on_state(&state_k, &targets, cfg.basis_degree, k)?;
                // centering by the fitted mean is a zero-mean control
                // variate: same conditional expectation, far less variance
                let z_targets: Vec<f64> = (0..n_paths)
                    .map(|j| (y[(j, k + 1)] - fit.fitted[j]) * ensemble.increments()[(j, k)] / dt)
                    .collect();
                let z_fit = regress_on_state(&state_k, &z_targets, cfg.basis_degree, k)?;
                for j in 0..n_paths {
                    y[(j, k)] = fit.fitted[j];
                    z[(j, k)] = z_fit.fitted[j];
                }
                diagnostics.regression_condition.push(fit.condition);
                diagnostics.fitted_se.push(fit.fitted_se);
            }
            diagnostics.regression_condition.reverse();
            diagnostics.fitted_se.reverse();
        }
    }

    let sol = BsdeSolution {
        grid,
        y,
        z,
        method,
        seed: ensemble.seed(),
        diagnostics,
    };
    sol.assert_finite()?;
    Ok(sol)
}

/// Solves `eq(xi, f(y)|z|^2)` by the transform route: the transformed pair
/// solves the driver-free equation, and
/// `(Y, Z) = (u^{-1}(Ybar), Zbar / u'(Y))`.
pub fn solve_qbsde_pure(
    f: &GeneratorSpec,
    term: &TerminalCondition,
    ensemble: &PathEnsemble,
    forward: Option<&ForwardPaths>,
    method: Method,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    let u = build_u(f)?;
    let states = resolve_states(term, ensemble, forward)?;
    let bar = solve_zero_with_map(term, Some(&u), &states, ensemble, method, cfg)?;
    untransform(bar, &u, &term.psi, &states, cfg)
}

/// Maps a transformed-space solution back through `u^{-1}`. The terminal
/// column is re-assigned the sampled terminal directly, so `Y_T = xi`
/// exactly.
fn untransform(
    bar: BsdeSolution,
    u: &TransformPair,
    psi: &PsiFn,
    states: &Array2<f64>,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    let n = bar.grid.n_steps();
    let mut y = bar.y.clone();
    let mut z = bar.z.clone();
    Zip::from(y.axis_iter_mut(Axis(0)))
        .and(z.axis_iter_mut(Axis(0)))
        .and(states.axis_iter(Axis(0)))
        .par_for_each(|mut yrow, mut zrow, srow| {
            for k in 0..=n {
                if k == n {
                    yrow[n] = psi.eval(srow[n]);
                } else {
                    let x = u.invert(yrow[k]);
                    yrow[k] = x;
                    zrow[k] /= u.deriv(x);
                }
            }
        });
    let mut diagnostics = bar.diagnostics.clone();
    diagnostics.transformed = cfg.keep_transformed.then(|| (bar.y, bar.z));
    let sol = BsdeSolution {
        grid: bar.grid,
        y,
        z,
        method: bar.method,
        seed: bar.seed,
        diagnostics,
    };
    sol.assert_finite()?;
    Ok(sol)
}

/// Backward least-squares solve of a transformed equation with a continuous
/// linear-growth driver: per step, `Ybar_k` is the fixed point of
/// `y = E_k[Ybar_{k+1}] + G(y, Zbar_k) dt` with `Zbar_k` from the increment
/// regression `E_k[Ybar_{k+1} dW_k] / dt`.
pub fn solve_linear_growth(
    driver: &dyn BarDriver,
    xi_bar: &[f64],
    states: &Array2<f64>,
    ensemble: &PathEnsemble,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    let grid = *ensemble.grid();
    let n = grid.n_steps();
    let n_paths = ensemble.n_paths();
    if xi_bar.len() != n_paths || states.nrows() != n_paths {
        return Err(Error::MismatchedEnsembles(
            "terminal samples, states and ensemble disagree on path count".into(),
        ));
    }
    let dt = grid.dt();
    let lip_y = driver.lipschitz_y();
    let core_contraction = dt * lip_y;
    if core_contraction >= 1.0 {
        return Err(Error::RefineGrid {
            contraction: core_contraction,
            required_steps: (2.0 * grid.t_end() * lip_y).ceil() as usize + 1,
        });
    }

    let mut y = Array2::zeros((n_paths, n + 1));
    let mut z = Array2::zeros((n_paths, n));
    for (j, &v) in xi_bar.iter().enumerate() {
        y[(j, n)] = v;
    }
    let mut diagnostics = Diagnostics {
        terminal_second_moment: xi_bar.iter().map(|v| v * v).sum::<f64>() / n_paths as f64,
        ..Default::default()
    };
    let mut worst_contraction: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;

    for k in (0..n).rev() {
        let state_k: Vec<f64> = states.column(k).iter().copied().collect();
        let targets: Vec<f64> = y.column(k + 1).iter().copied().collect();
        let fit = regress_on_state(&state_k, &targets, cfg.basis_degree, k)?;
        let z_targets: Vec<f64> = (0..n_paths)
            .map(|j| (y[(j, k + 1)] - fit.fitted[j]) * ensemble.increments()[(j, k)] / dt)
            .collect();
        let z_fit = regress_on_state(&state_k, &z_targets, cfg.basis_degree, k)?;

        let basis_bound =
            (fit.basis_row_bound) * ((cfg.basis_degree + 1) as f64 / n_paths as f64).sqrt();
        worst_contraction =
            worst_contraction.max(dt * lip_y + driver.lipschitz_z() * dt.sqrt() * basis_bound);

        let results: Vec<(f64, usize, f64)> = (0..n_paths)
            .into_par_iter()
            .map(|j| {
                let e = fit.fitted[j];
                let zb = z_fit.fitted[j];
                let mut cur = e;
                let mut iters = 0;
                let mut resid = f64::INFINITY;
                while resid > cfg.picard_tol && iters < cfg.picard_max_iter {
                    let next = e + dt * driver.eval(cur, zb);
                    resid = (next - cur).abs();
                    cur = next;
                    iters += 1;
                }
                (cur, iters, resid)
            })
            .collect();
        let mut max_iters = 0;
        for (j, (val, iters, resid)) in results.into_iter().enumerate() {
            if resid > cfg.picard_tol.max(1e-9) {
                // no contraction observed at this step size
                return Err(Error::RefineGrid {
                    contraction: core_contraction.max(0.5),
                    required_steps: 2 * n,
                });
            }
            y[(j, k)] = val;
            z[(j, k)] = z_fit.fitted[j];
            max_iters = max_iters.max(iters);
            worst_residual = worst_residual.max(resid);
        }
        diagnostics.picard_iterations.push(max_iters);
        diagnostics.regression_condition.push(fit.condition);
        diagnostics.fitted_se.push(fit.fitted_se);
    }
    diagnostics.picard_iterations.reverse();
    diagnostics.regression_condition.reverse();
    diagnostics.fitted_se.reverse();
    diagnostics.max_fixed_point_residual = worst_residual;
    diagnostics.contraction_estimate = Some(worst_contraction);

    let sol = BsdeSolution {
        grid,
        y,
        z,
        method: Method::Regression,
        seed: ensemble.seed(),
        diagnostics,
    };
    sol.assert_finite()?;
    Ok(sol)
}

/// Solves `eq(xi, sign * (a + b|y| + c|z| + f(y)|z|^2))` by composing the
/// transform built from `sign * f` with a backward linear-growth solve
/// (regression by default, the state-grid engine when configured).
pub fn solve_qbsde_abc(
    params: &DominatingParams,
    sign: DriverSign,
    term: &TerminalCondition,
    ensemble: &PathEnsemble,
    forward: Option<&ForwardPaths>,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    let states = resolve_states(term, ensemble, forward)?;
    let psi = term.psi.clone();
    solve_abc_inner(
        params,
        sign,
        &|x| psi.eval(x),
        &states,
        ensemble,
        cfg,
        cfg.driver_method,
        None,
    )
}

#[allow(clippy::too_many_arguments)]
fn solve_abc_inner(
    params: &DominatingParams,
    sign: DriverSign,
    terminal_raw: &(dyn Fn(f64) -> f64 + Sync),
    states: &Array2<f64>,
    ensemble: &PathEnsemble,
    cfg: &SolverConfig,
    method: Method,
    shared_grid: Option<&StateGrid>,
) -> Result<BsdeSolution> {
    let (f_signed, sgn) = match sign {
        DriverSign::Plus => (params.f.clone(), 1.0),
        DriverSign::Minus => (params.f.negated(), -1.0),
    };
    let u = build_u(&f_signed)?;
    let driver = drivers::TransformedAbcDriver {
        transform: &u,
        a: params.a,
        b: params.b,
        c: params.c,
        sign: sgn,
    };
    let n = ensemble.grid().n_steps();
    let bar = match method {
        Method::Regression => {
            let xi_bar: Vec<f64> = states
                .column(n)
                .iter()
                .map(|&x| u.eval(terminal_raw(x)))
                .collect();
            solve_linear_growth(&driver, &xi_bar, states, ensemble, cfg)?
        }
        Method::Quadrature => {
            let (m_lo, m_hi) = u.isometry_bounds()?;
            let lip_y = m_lo * m_hi * params.b;
            let dt = ensemble.grid().dt();
            if dt * lip_y >= 0.5 {
                return Err(Error::RefineGrid {
                    contraction: dt * lip_y,
                    required_steps: (2.0 * ensemble.grid().t_end() * lip_y).ceil() as usize + 1,
                });
            }
            // |G| <= M a + m M b |ybar| + c |zbar| bounds the fixed-point
            // displacement from the conditional mean
            let (a, c) = (params.a, params.c);
            let span = move |e: f64, z_bar: f64| {
                2.0 * (m_hi * a + lip_y * e.abs() + c * z_bar.abs()) + 1.0
            };
            collocation_backward(
                &|x| u.eval(terminal_raw(x)),
                &|_t, y_bar, z_bar| driver.eval(y_bar, z_bar),
                &span,
                states,
                ensemble,
                cfg,
                shared_grid,
            )?
        }
    };

    // untransform, re-assigning the exact terminal samples
    let mut y = bar.y.clone();
    let mut z = bar.z.clone();
    for j in 0..y.nrows() {
        for k in 0..n {
            let x = u.invert(y[(j, k)]);
            y[(j, k)] = x;
            z[(j, k)] /= u.deriv(x);
        }
        y[(j, n)] = terminal_raw(states[(j, n)]);
    }
    let mut diagnostics = bar.diagnostics.clone();
    diagnostics.transformed = cfg.keep_transformed.then(|| (bar.y, bar.z));
    let sol = BsdeSolution {
        grid: bar.grid,
        y,
        z,
        method,
        seed: bar.seed,
        diagnostics,
    };
    sol.assert_finite()?;
    Ok(sol)
}

/// Backward sweep on a state grid with the order-preserving Gaussian
/// smoothing operator: deterministic, and conditional expectations of
/// ordered value functions stay ordered, which regression projection cannot
/// guarantee pathwise.
fn collocation_backward(
    terminal_bar: &(dyn Fn(f64) -> f64 + Sync),
    driver_bar: &(dyn Fn(f64, f64, f64) -> f64 + Sync),
    span_bar: &(dyn Fn(f64, f64) -> f64 + Sync),
    states: &Array2<f64>,
    ensemble: &PathEnsemble,
    cfg: &SolverConfig,
    shared_grid: Option<&StateGrid>,
) -> Result<BsdeSolution> {
    let grid = *ensemble.grid();
    let n = grid.n_steps();
    let n_paths = ensemble.n_paths();
    let dt = grid.dt();
    let sigma = dt.sqrt();

    let own_grid;
    let sgrid = match shared_grid {
        Some(g) => g,
        None => {
            own_grid = default_state_grid(states, &grid, cfg);
            &own_grid
        }
    };

    let mut v: Vec<f64> = (0..sgrid.n).map(|i| terminal_bar(sgrid.node(i))).collect();
    let mut y = Array2::zeros((n_paths, n + 1));
    let mut z = Array2::zeros((n_paths, n));
    for j in 0..n_paths {
        y[(j, n)] = terminal_bar(states[(j, n)]);
    }

    let mut diagnostics = Diagnostics::default();
    diagnostics.terminal_second_moment =
        y.column(n).iter().map(|v| v * v).sum::<f64>() / n_paths as f64;
    let mut worst_residual: f64 = 0.0;

    for k in (0..n).rev() {
        let t_k = grid.node(k);
        let step: Vec<(f64, f64, usize, f64)> = (0..sgrid.n)
            .into_par_iter()
            .map(|i| {
                let x = sgrid.node(i);
                let (e, slope) = smooth_expectation_and_slope(sgrid, &v, x, sigma);
                let (val, iters, resid) = scalar_implicit_step(
                    e,
                    dt,
                    &|yb| driver_bar(t_k, yb, slope),
                    span_bar(e, slope) * dt + 1e-9,
                    cfg,
                );
                (val, slope, iters, resid)
            })
            .collect();
        let mut v_next = vec![0.0; sgrid.n];
        let mut z_nodes = vec![0.0; sgrid.n];
        let mut max_iters = 0;
        for (i, (val, slope, iters, resid)) in step.into_iter().enumerate() {
            v_next[i] = val;
            z_nodes[i] = slope;
            max_iters = max_iters.max(iters);
            worst_residual = worst_residual.max(resid);
        }
        v = v_next;
        for j in 0..n_paths {
            let x = states[(j, k)];
            y[(j, k)] = sgrid.interp(&v, x);
            z[(j, k)] = sgrid.interp(&z_nodes, x);
        }
        diagnostics.picard_iterations.push(max_iters);
    }
    diagnostics.picard_iterations.reverse();
    diagnostics.max_fixed_point_residual = worst_residual;

    let sol = BsdeSolution {
        grid,
        y,
        z,
        method: Method::Quadrature,
        seed: ensemble.seed(),
        diagnostics,
    };
    sol.assert_finite()?;
    Ok(sol)
}

/// Grid covering the simulated state range plus a diffusive pad, so the
/// constant-extension boundary never influences the path region.
fn default_state_grid(states: &Array2<f64>, grid: &TimeGrid, cfg: &SolverConfig) -> StateGrid {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in states.iter() {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let pad = 9.0 * grid.t_end().sqrt() + 1.0;
    StateGrid::new(lo - pad, hi + pad, cfg.collocation_points.max(101))
}

/// Solves `eq(xi, H)` for a continuous driver dominated by
/// `g(y, z) = a + b|y| + c|z| + f(|y|)|z|^2`.
///
/// Builds the extremal barriers from `eq(xi^+, g)` and `eq(-xi^-, -g)`,
/// truncates the driver argument at a radius taken from the dominating
/// process `S_t = |Y^{-g}| + |Y^{g}|`, and solves the truncated equation
/// `eq(xi, H(t, rho(y), z))` backward. The backward sweep runs in the
/// coordinates of the transform built from `f(|.|)`, where the equation
/// reads `eq(u(xi), u'(y)[H(t, rho(y), z) - f(|y|) z^2])`: the dominating
/// barrier lives in the same coordinates with the same regression
/// projections, so the domination is inherited by the estimators instead of
/// being lost to basis-misspecification noise. The pathwise sandwich
/// `Y^{-g} <= Y <= Y^{g}` is asserted at the configured tolerance.
pub fn solve_dominated(
    driver: &dyn QuadDriver,
    params: &DominatingParams,
    term: &TerminalCondition,
    ensemble: &PathEnsemble,
    forward: Option<&ForwardPaths>,
    cfg: &SolverConfig,
) -> Result<(BsdeSolution, ExtremalPair)> {
    let states = resolve_states(term, ensemble, forward)?;
    if term.kind != TerminalKind::OfBrownian {
        return Err(Error::Domain(
            "the dominated solver works on the Brownian state".into(),
        ));
    }
    let grid = *ensemble.grid();
    let n = grid.n_steps();
    let n_paths = ensemble.n_paths();

    let f_even = params.f.evenized()?;
    let params_even = DominatingParams::new(params.a, params.b, params.c, f_even.clone())?;
    let sgrid = default_state_grid(&states, &grid, cfg);

    let psi = term.psi.clone();
    let upper = solve_abc_inner(
        &params_even,
        DriverSign::Plus,
        &|x| psi.eval(x).max(0.0),
        &states,
        ensemble,
        cfg,
        Method::Quadrature,
        Some(&sgrid),
    )?;
    let lower = solve_abc_inner(
        &params_even,
        DriverSign::Minus,
        &|x| psi.eval(x).min(0.0),
        &states,
        ensemble,
        cfg,
        Method::Quadrature,
        Some(&sgrid),
    )?;

    // Truncation radius from the dominating process, with headroom so the
    // clamp localizes the driver without biting the solved range.
    let mut s: Vec<f64> = upper
        .y
        .iter()
        .zip(lower.y.iter())
        .map(|(u, l)| u.abs() + l.abs())
        .collect();
    let idx = (((cfg.truncation_percentile / 100.0) * (s.len() as f64 - 1.0)).round() as usize)
        .min(s.len() - 1);
    let (_, radius, _) = s.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    let radius = (1.05 * *radius).max(1.0);

    // local quadratic bound of the truncated driver
    let sup_f = f_even.sup_abs_on(-radius, radius);
    if !sup_f.is_finite() {
        return Err(Error::Domain(
            "the dominated solver needs a locally bounded generator".into(),
        ));
    }
    let c_of_r = 1.0 + sup_f;
    let a1 = params.a + params.c * params.c;
    let linear_bound = a1 + params.b * radius;

    let u = build_u(&f_even)?;
    let (m_lo, m_hi) = u.isometry_bounds()?;

    // The truncated equation in the coordinates of the same transform the
    // upper barrier uses: eq(u(xi), u'(y) [H(t, rho(y), z) - f(|y|) z^2]).
    // The clamp is applied to the state before every term; iteration probes
    // beyond the truncation radius then see a bounded continuation instead
    // of a mismatched quadratic.
    let h_bar = |t: f64, y_bar: f64, z_bar: f64| -> f64 {
        let x = u.invert(y_bar).clamp(-radius, radius);
        let du = u.deriv(x);
        let z = z_bar / du;
        du * (driver.eval(t, x, z) - f_even.eval_pointwise(x) * z * z)
    };
    // |h_bar| <= M (a1 + bR) + M (C(R) + sup f) zbar^2 / m^2
    let bar_span = |_e: f64, z_bar: f64| {
        m_hi * linear_bound + m_hi * (c_of_r + sup_f) * z_bar * z_bar / (m_lo * m_lo)
    };

    let bar = collocation_backward(
        &|x| u.eval(psi.eval(x)),
        &h_bar,
        &bar_span,
        &states,
        ensemble,
        cfg,
        Some(&sgrid),
    )?;

    // back to the original coordinates
    let mut y = bar.y.clone();
    let mut z = bar.z.clone();
    for j in 0..n_paths {
        for k in 0..n {
            let x = u.invert(y[(j, k)]);
            y[(j, k)] = x;
            z[(j, k)] /= u.deriv(x);
        }
        y[(j, n)] = psi.eval(states[(j, n)]);
    }
    let mut diagnostics = bar.diagnostics.clone();
    diagnostics.terminal_second_moment =
        y.column(n).iter().map(|v| v * v).sum::<f64>() / n_paths as f64;
    diagnostics.transformed = cfg.keep_transformed.then(|| (bar.y, bar.z));

    let sol = BsdeSolution {
        grid,
        y,
        z,
        method: Method::Quadrature,
        seed: ensemble.seed(),
        diagnostics,
    };
    sol.assert_finite()?;

    let pair = ExtremalPair {
        lower,
        upper,
        truncation_radius: radius,
    };
    if let Some(tol) = cfg.sandwich_tol {
        let (below, above) = pair.violation(&sol);
        if below > tol || above > tol {
            return Err(Error::SolverInconsistency(format!(
                "domination sandwich violated: below {below:.3e}, above {above:.3e}, tol {tol:.1e}"
            )));
        }
    }
    Ok((sol, pair))
}

/// Per-node implicit step: solve `y = e + h(y) dt`. Picard from `e`; on
/// non-convergence, bracketed bisection on `phi(y) = y - e - h(y) dt`,
/// whose root lies within the supplied span by the local quadratic bound.
fn scalar_implicit_step(
    e: f64,
    dt: f64,
    h: &dyn Fn(f64) -> f64,
    span: f64,
    cfg: &SolverConfig,
) -> (f64, usize, f64) {
    let mut cur = e;
    let mut iters = 0;
    let mut resid = f64::INFINITY;
    while resid > cfg.picard_tol && iters < cfg.picard_max_iter {
        let next = e + dt * h(cur);
        resid = (next - cur).abs();
        cur = next;
        iters += 1;
    }
    if resid <= cfg.picard_tol {
        return (cur, iters, resid);
    }
    // bisection fallback
    let (mut lo, mut hi) = (e - span, e + span);
    let phi = |y: f64| y - e - dt * h(y);
    let mut flo = phi(lo);
    for _ in 0..200 {
        if hi - lo <= cfg.picard_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = phi(mid);
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    (root, cfg.picard_max_iter, phi(root).abs())
}

/// Delta-method standard error of `y0 = u^{-1}(mean(xibar))`:
/// `sd(xibar) / (sqrt(n) u'(y0))`. For an untransformed martingale solve,
/// pass `du = 1`.
pub fn y0_delta_se(xi_bar: &[f64], du_at_y0: f64) -> f64 {
    let n = xi_bar.len() as f64;
    let mean = xi_bar.iter().sum::<f64>() / n;
    let var = xi_bar.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    var.sqrt() / (n.sqrt() * du_at_y0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{builtin, step};
    use crate::stochastic::sample_brownian;

    fn ens(t: f64, n_steps: usize, n_paths: usize, seed: u64) -> PathEnsemble {
        let grid = TimeGrid::new(t, n_steps).unwrap();
        sample_brownian(&grid, n_paths, seed).unwrap()
    }

    #[test]
    fn zero_generator_identity_terminal_is_brownian() {
        let e = ens(1.0, 16, 64, 11);
        let term = TerminalCondition::of_brownian(PsiFn::Identity);
        let cfg = SolverConfig::default();
        let sol = solve_zero_generator(&term, &e, None, Method::Quadrature, &cfg).unwrap();
        let w = e.brownian_states();
        for j in 0..64 {
            for k in 0..=16 {
                assert!((sol.y[(j, k)] - w[(j, k)]).abs() < 1e-12);
                if k < 16 {
                    assert!((sol.z[(j, k)] - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_generator_square_terminal_y0_is_t() {
        let e = ens(2.0, 8, 32, 5);
        let term = TerminalCondition::of_brownian(PsiFn::Square);
        let sol =
            solve_zero_generator(&term, &e, None, Method::Quadrature, &SolverConfig::default())
                .unwrap();
        // E[W_T^2 | F_0] = T at every path
        for j in 0..32 {
            assert!((sol.y[(j, 0)] - 2.0).abs() < 1e-11);
        }
        assert!((sol.y0() - 2.0).abs() < 1e-11);
    }

    #[test]
    fn zero_generator_relu_quadrature_half_moment() {
        let e = ens(1.0, 4, 8, 3);
        let term = TerminalCondition::of_brownian(PsiFn::Relu);
        let sol =
            solve_zero_generator(&term, &e, None, Method::Quadrature, &SolverConfig::default())
                .unwrap();
        let target = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((sol.y0() - target).abs() < 1e-6, "y0 {}", sol.y0());
    }

    #[test]
    fn regression_mean_is_exact_for_martingales() {
        // with the intercept in the basis, the backward sweep telescopes the
        // sample mean
        let e = ens(1.0, 10, 5000, 77);
        let term = TerminalCondition::of_brownian(PsiFn::Relu);
        let sol =
            solve_zero_generator(&term, &e, None, Method::Regression, &SolverConfig::default())
                .unwrap();
        let w = e.brownian_states();
        let xi_mean: f64 = w.column(10).iter().map(|&x| x.max(0.0)).sum::<f64>() / 5000.0;
        assert!((sol.y0() - xi_mean).abs() < 1e-10);
        assert!(!sol.diagnostics.regression_condition.is_empty());
    }

    #[test]
    fn pure_solver_with_zero_generator_matches_driver_free_exactly() {
        let e = ens(1.0, 8, 128, 9);
        let term = TerminalCondition::of_brownian(PsiFn::Identity);
        let cfg = SolverConfig::default();
        let zero = builtin("zero").unwrap();
        let a = solve_zero_generator(&term, &e, None, Method::Quadrature, &cfg).unwrap();
        let b = solve_qbsde_pure(&zero, &term, &e, None, Method::Quadrature, &cfg).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.z, b.z);
    }

    #[test]
    fn pure_solver_step_matches_frozen_oracle() {
        // Y_0 = u^{-1}(E[u(W_1)]) for f = 1_[0,1): value frozen from the
        // closed-form Gaussian integral of the piecewise-exponential u
        let oracle = 0.567_292_705_756_426_8;
        let e = ens(1.0, 4, 8, 21);
        let f = step(1.0).unwrap();
        let term = TerminalCondition::of_brownian(PsiFn::Identity);
        let sol =
            solve_qbsde_pure(&f, &term, &e, None, Method::Quadrature, &SolverConfig::default())
                .unwrap();
        assert!(
            (sol.y0() - oracle).abs() < 1e-6,
            "y0 {} vs oracle {oracle}",
            sol.y0()
        );
    }

    #[test]
    fn ae_modified_generator_yields_bit_identical_solution() {
        use crate::generator::{GeneratorSpec, Piece, PieceKind};
        let e = ens(1.0, 8, 64, 13);
        let term = TerminalCondition::of_brownian(PsiFn::Identity);
        let cfg = SolverConfig::default();
        let f1 = step(1.0).unwrap();
        let f2 = GeneratorSpec::new(
            vec![
                Piece {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                    kind: PieceKind::Const(0.0),
                },
                Piece {
                    lo: 0.0,
                    hi: 0.0,
                    kind: PieceKind::Const(-123.0),
                },
                Piece {
                    lo: 0.0,
                    hi: 0.5,
                    kind: PieceKind::Const(1.0),
                },
                Piece {
                    lo: 0.5,
                    hi: 1.0,
                    kind: PieceKind::Const(1.0),
                },
                Piece {
                    lo: 1.0,
                    hi: f64::INFINITY,
                    kind: PieceKind::Const(0.0),
                },
            ],
            0.0,
        )
        .unwrap();
        let a = solve_qbsde_pure(&f1, &term, &e, None, Method::Quadrature, &cfg).unwrap();
        let b = solve_qbsde_pure(&f2, &term, &e, None, Method::Quadrature, &cfg).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.z, b.z);
    }

    #[test]
    fn transform_roundtrip_reproduces_the_driver_free_arrays() {
        let e = ens(1.0, 8, 64, 17);
        let f = step(1.0).unwrap();
        let term = TerminalCondition::of_brownian(PsiFn::Identity);
        let cfg = SolverConfig {
            keep_transformed: true,
            ..Default::default()
        };
        let sol = solve_qbsde_pure(&f, &term, &e, None, Method::Quadrature, &cfg).unwrap();
        let (bar_y, bar_z) = sol.diagnostics.transformed.as_ref().unwrap();
        // independent driver-free solve of the mapped terminal
        let u = build_u(&f).unwrap();
        let states = e.brownian_states();
        let bar =
            solve_zero_with_map(&term, Some(&u), &states, &e, Method::Quadrature, &cfg).unwrap();
        assert_eq!(*bar_y, bar.y);
        assert_eq!(*bar_z, bar.z);
    }

    #[test]
    fn linear_growth_zero_driver_reduces_to_regression_martingale() {
        let e = ens(1.0, 8, 2000, 29);
        let term = TerminalCondition::of_brownian(PsiFn::Identity);
        let cfg = SolverConfig::default();
        let states = e.brownian_states();
        let xi: Vec<f64> = states.column(8).iter().copied().collect();
        let a = solve_linear_growth(&ZeroBar, &xi, &states, &e, &cfg).unwrap();
        let b = solve_zero_generator(&term, &e, None, Method::Regression, &cfg).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.z, b.z);
    }

    #[test]
    fn linear_growth_constant_driver_shifts_by_time_to_go() {
        let e = ens(1.0, 16, 2000, 31);
        let states = e.brownian_states();
        let xi: Vec<f64> = states.column(16).iter().copied().collect();
        let cfg = SolverConfig::default();
        let with = solve_linear_growth(&ConstBar(1.0), &xi, &states, &e, &cfg).unwrap();
        let without = solve_linear_growth(&ZeroBar, &xi, &states, &e, &cfg).unwrap();
        for k in 0..=16 {
            let shift = 1.0 - e.grid().node(k);
            for j in 0..50 {
                assert!(
                    (with.y[(j, k)] - without.y[(j, k)] - shift).abs() < 1e-9,
                    "k={k}"
                );
            }
        }
    }

    #[test]
    fn linear_growth_linear_driver_matches_exponential_closed_form() {
        // G = b ybar with xi = W_T: Ybar_t = W_t e^{b (T - t)}
        let e = ens(1.0, 64, 20_000, 37);
        let states = e.brownian_states();
        let xi: Vec<f64> = states.column(64).iter().copied().collect();
        let cfg = SolverConfig::default();
        let rate = 0.5;
        let sol = solve_linear_growth(&LinearYBar { rate }, &xi, &states, &e, &cfg).unwrap();
        assert!(sol.y0().abs() < 0.02, "y0 {}", sol.y0());
        for k in [16, 32, 48] {
            let t = e.grid().node(k);
            let scale = (rate * (1.0 - t)).exp();
            let mut err = 0.0;
            for j in 0..sol.n_paths() {
                err += (sol.y[(j, k)] - states[(j, k)] * scale).abs();
            }
            err /= sol.n_paths() as f64;
            // first order in dt plus regression error
            assert!(err < 0.05, "node {k}: mean abs err {err}");
        }
        assert!(sol.diagnostics.contraction_estimate.unwrap() < 1.0);
    }

    #[test]
    fn abc_with_zero_params_equals_pure_solver() {
        let e = ens(1.0, 8, 2000, 41);
        let f = step(1.0).unwrap();
        let params = DominatingParams::new(0.0, 0.0, 0.0, f.clone()).unwrap();
        let term = TerminalCondition::of_brownian(PsiFn::Identity);
        let cfg = SolverConfig::default();
        let a = solve_qbsde_abc(&params, DriverSign::Plus, &term, &e, None, &cfg).unwrap();
        let b = solve_qbsde_pure(&f, &term, &e, None, Method::Regression, &cfg).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.z, b.z);
    }

    #[test]
    fn abc_deterministic_ode_case() {
        // a = 1, b = c = 0, f = 0, xi = 0: Y_t = T - t, Z = 0
        let e = ens(1.0, 32, 500, 43);
        let zero = builtin("zero").unwrap();
        let params = DominatingParams::new(1.0, 0.0, 0.0, zero).unwrap();
        let term = TerminalCondition::of_brownian(PsiFn::Const { value: 0.0 });
        let sol = solve_qbsde_abc(
            &params,
            DriverSign::Plus,
            &term,
            &e,
            None,
            &SolverConfig::default(),
        )
        .unwrap();
        for k in 0..=32 {
            let want = 1.0 - e.grid().node(k);
            for j in 0..10 {
                assert!((sol.y[(j, k)] - want).abs() < 1e-10, "k {k}");
            }
        }
        // Z is zero in the continuum; the regression estimate carries
        // fitted noise of order sd(target) sqrt(p / n)
        let mean_abs_z: f64 = sol.z.iter().map(|z| z.abs()).sum::<f64>() / sol.z.len() as f64;
        assert!(mean_abs_z < 0.2, "mean |z| {mean_abs_z}");
    }

    #[test]
    fn dominated_zero_driver_sandwich_holds() {
        let e = ens(1.0, 16, 4000, 47);
        let f = step(1.0).unwrap();
        let params = DominatingParams::new(0.5, 0.1, 0.0, f).unwrap();
        let term = TerminalCondition::of_brownian(PsiFn::Abs);
        let cfg = SolverConfig::default();
        let (sol, pair) = solve_dominated(&ZeroDriver, &params, &term, &e, None, &cfg).unwrap();
        let (below, above) = pair.violation(&sol);
        assert!(below <= 1e-6 && above <= 1e-6, "below {below} above {above}");
        // the driver-free equation is plain conditional expectation; the
        // dominated route estimates it through the transform coordinates
        let plain = solve_zero_generator(&term, &e, None, Method::Regression, &cfg).unwrap();
        assert!(
            (sol.y0() - plain.y0()).abs() < 0.02,
            "dominated y0 {} vs plain {}",
            sol.y0(),
            plain.y0()
        );
        assert!(pair.truncation_radius >= 1.0);
    }

    #[test]
    fn driver_residual_is_zero_for_exact_discrete_dynamics() {
        // manufactured solution: Y = W, Z = 1, driver 0; residual telescopes
        let e = ens(1.0, 16, 32, 53);
        let term = TerminalCondition::of_brownian(PsiFn::Identity);
        let sol =
            solve_zero_generator(&term, &e, None, Method::Quadrature, &SolverConfig::default())
                .unwrap();
        let resid = sol.driver_residual_mean(&|_t, _y, _z| 0.0, &e);
        assert!(resid < 1e-10, "resid {resid}");
    }

    #[test]
    fn terminal_row_equals_sampled_terminal_exactly() {
        let e = ens(1.0, 8, 256, 59);
        let f = step(1.0).unwrap();
        let term = TerminalCondition::of_brownian(PsiFn::Relu);
        let w = e.brownian_states();
        for method in [Method::Quadrature, Method::Regression] {
            let sol =
                solve_qbsde_pure(&f, &term, &e, None, method, &SolverConfig::default()).unwrap();
            for j in 0..256 {
                let xi = w[(j, 8)].max(0.0);
                assert_eq!(sol.y[(j, 8)].to_bits(), xi.to_bits());
            }
        }
    }

    #[test]
    fn csv_export_shape() {
        let e = ens(1.0, 2, 4, 61);
        let term = TerminalCondition::of_brownian(PsiFn::Identity);
        let sol =
            solve_zero_generator(&term, &e, None, Method::Quadrature, &SolverConfig::default())
                .unwrap();
        let mut buf = Vec::new();
        sol.export_csv(&mut buf, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path_id,t,y,z");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert!(lines[3].ends_with(','));
    }
}
