//! Order-preserving conditional-expectation engine on a state grid.
//!
//! Value functions are stored at uniform grid nodes and interpolated
//! piecewise-linearly (with constant extension beyond the grid). The
//! one-step Gaussian smoothing `E[V(x + sigma G)]` of such a function has a
//! closed form, and it is a nonnegative combination of the nodal values, so
//! conditional expectations computed this way preserve pointwise ordering —
//! which is what makes the dominated solver's pathwise sandwich hold
//! structurally rather than statistically.

use statrs::function::erf::erf;

#[derive(Clone, Copy, Debug)]
pub(crate) struct StateGrid {
    pub lo: f64,
    pub h: f64,
    pub n: usize,
}

impl StateGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2 && hi > lo);
        Self {
            lo,
            h: (hi - lo) / (n - 1) as f64,
            n,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.h
    }

    pub fn hi(&self) -> f64 {
        self.node(self.n - 1)
    }

    /// Linear interpolation, clamped to the edge values outside the grid.
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        if x <= self.lo {
            return values[0];
        }
        if x >= self.hi() {
            return values[self.n - 1];
        }
        let t = (x - self.lo) / self.h;
        let i = (t.floor() as usize).min(self.n - 2);
        let w = t - i as f64;
        values[i] * (1.0 - w) + values[i + 1] * w
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Exact `E[V(x + sigma G)]` and `E[V(x + sigma G) G] / sigma` for the
/// piecewise-linear interpolant `V` of `values`, constant beyond the grid.
/// The second output is the martingale-representation slope.
pub(crate) fn smooth_expectation_and_slope(
    grid: &StateGrid,
    values: &[f64],
    x: f64,
    sigma: f64,
) -> (f64, f64) {
    debug_assert_eq!(values.len(), grid.n);
    if sigma == 0.0 {
        return (grid.interp(values, x), 0.0);
    }
    // only cells within 9 sigma of x carry mass above 1e-18
    let span = 9.0 * sigma;
    let first = (((x - span) - grid.lo) / grid.h).floor().max(0.0) as usize;
    let last = ((((x + span) - grid.lo) / grid.h).ceil() as usize).min(grid.n - 1);

    let mut mean = 0.0;
    let mut mg = 0.0;

    // left constant tail: V = values[first] below node `first`
    let a0 = (grid.node(first) - x) / sigma;
    mean += values[first] * std_normal_cdf(a0);
    mg += values[first] * (-std_normal_pdf(a0));

    for j in first..last {
        let xj = grid.node(j);
        let a = (xj - x) / sigma;
        let b = (xj + grid.h - x) / sigma;
        let ca = std_normal_cdf(a);
        let cb = std_normal_cdf(b);
        let pa = std_normal_pdf(a);
        let pb = std_normal_pdf(b);
        let slope = (values[j + 1] - values[j]) / grid.h;
        let v0 = values[j] + slope * (x - xj);
        // int_a^b t phi = pa - pb ; int_a^b t^2 phi = (cb - ca) - (b pb - a pa)
        mean += v0 * (cb - ca) + slope * sigma * (pa - pb);
        mg += v0 * (pa - pb) + slope * sigma * ((cb - ca) - (b * pb - a * pa));
    }

    // right constant tail
    let bn = (grid.node(last) - x) / sigma;
    mean += values[last] * (1.0 - std_normal_cdf(bn));
    mg += values[last] * std_normal_pdf(bn);

    (mean, mg / sigma)
}
