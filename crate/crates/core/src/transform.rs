//! The two explicit state transforms.
//!
//! `build_u` produces the increasing bijection `u(x) = int_0^x exp(2F(y)) dy`
//! with `F = int_0^x f`; applied to a solution it removes the `f(y)|z|^2`
//! term, since `u'' = 2 f u'` almost everywhere. `build_second` produces
//! `u2(x) = int_0^x K(y) exp(2F(y)) dy` with `K(y) = int_0^y exp(-2F)`, which
//! satisfies `u2'' - 2 f u2' = 1` a.e. and supplies the quadratic bounds used
//! to control `int |Z|^2`.
//!
//! Evaluation goes through a piecewise-cubic Hermite table with exact
//! derivatives at the nodes, refined until the midpoint interpolation error
//! is below 1e-11 and each cell passes a monotonicity certificate; direct
//! quadrature remains the fallback outside the tabulated window.

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::quad::integrate_adaptive;
use std::io::{BufRead, Write};

const TABLE_TOL: f64 = 1e-11;
const SEGMENT_TOL: f64 = 1e-13;

/// Which defining ODE the transform satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    /// `u'' - 2 f u' = 0`
    Zvonkin0,
    /// `u'' - 2 f u' = 1`
    Zvonkin1,
}

/// Cubic-Hermite interpolation table with node derivatives.
#[derive(Clone, Debug)]
struct CurveTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl CurveTable {
    /// Builds the table over consecutive `anchors`. `deriv` must be exact;
    /// `segment_integral(a, b)` must integrate `deriv` over `[a, b]` lying
    /// within one anchor segment. `certify_monotone` additionally refines
    /// until each cell's Hermite cubic is certifiably monotone.
    fn build(
        anchors: &[f64],
        deriv: &dyn Fn(f64) -> f64,
        segment_integral: &dyn Fn(f64, f64) -> f64,
        certify_monotone: bool,
    ) -> CurveTable {
        assert!(anchors.len() >= 2);
        let mut xs = vec![anchors[0]];
        let mut ys = vec![0.0];
        let mut ds = vec![deriv(anchors[0])];
        for w in anchors.windows(2) {
            let (a, b) = (w[0], w[1]);
            let y_a = *ys.last().unwrap();
            let d_a = *ds.last().unwrap();
            refine_cell(
                a,
                y_a,
                d_a,
                b,
                y_a + segment_integral(a, b),
                deriv(b),
                deriv,
                segment_integral,
                certify_monotone,
                40,
                &mut xs,
                &mut ys,
                &mut ds,
            );
        }
        CurveTable { xs, ys, ds }
    }

    /// Shifts all ordinates so that the curve vanishes at `x0` (a node).
    fn anchor_zero_at(&mut self, x0: f64) {
        let i = self
            .xs
            .iter()
            .position(|&x| x == x0)
            .expect("anchor must be a node");
        let y0 = self.ys[i];
        for y in &mut self.ys {
            *y -= y0;
        }
        self.ys[i] = 0.0;
    }

    fn span(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    fn cell_of(&self, x: f64) -> usize {
        self.xs.partition_point(|&n| n <= x).clamp(1, self.xs.len() - 1) - 1
    }

    fn eval_in(&self, x: f64) -> f64 {
        let i = self.cell_of(x);
        hermite(
            x,
            self.xs[i],
            self.xs[i + 1],
            self.ys[i],
            self.ys[i + 1],
            self.ds[i],
            self.ds[i + 1],
        )
    }

    /// Inverse of an increasing table: bisection in the bracketing cell to
    /// width 1e-13, then a Newton polish with the exact derivative.
    fn invert_in(&self, y: f64, deriv: &dyn Fn(f64) -> f64) -> f64 {
        let i = self.ys.partition_point(|&v| v <= y).clamp(1, self.ys.len() - 1) - 1;
        let (mut lo, mut hi) = (self.xs[i], self.xs[i + 1]);
        for _ in 0..200 {
            if hi - lo <= 1e-13 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.eval_in(mid) <= y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..2 {
            let d = deriv(x);
            if d > 0.0 {
                x -= (self.eval_in(x.clamp(self.xs[i], self.xs[i + 1])) - y) / d;
            }
        }
        x.clamp(self.xs[i], self.xs[i + 1])
    }
}

#[allow(clippy::too_many_arguments)]
fn refine_cell(
    x0: f64,
    y0: f64,
    d0: f64,
    x1: f64,
    y1: f64,
    d1: f64,
    deriv: &dyn Fn(f64) -> f64,
    segment_integral: &dyn Fn(f64, f64) -> f64,
    certify_monotone: bool,
    depth: usize,
    xs: &mut Vec<f64>,
    ys: &mut Vec<f64>,
    ds: &mut Vec<f64>,
) {
    let h = x1 - x0;
    let xm = 0.5 * (x0 + x1);
    let mut split = false;
    if depth > 0 && xm > x0 && xm < x1 {
        let ym = y0 + segment_integral(x0, xm);
        let interp = hermite(xm, x0, x1, y0, y1, d0, d1);
        if (interp - ym).abs() > TABLE_TOL * (1.0 + ym.abs()) {
            split = true;
        }
        if certify_monotone && !split {
            // Fritsch-Carlson sufficient condition for a monotone cubic.
            let secant = (y1 - y0) / h;
            if secant <= 0.0 || d0 > 3.0 * secant || d1 > 3.0 * secant {
                split = true;
            }
        }
        if split {
            let dm = deriv(xm);
            refine_cell(
                x0,
                y0,
                d0,
                xm,
                ym,
                dm,
                deriv,
                segment_integral,
                certify_monotone,
                depth - 1,
                xs,
                ys,
                ds,
            );
            refine_cell(
                xm,
                ym,
                dm,
                x1,
                y1,
                d1,
                deriv,
                segment_integral,
                certify_monotone,
                depth - 1,
                xs,
                ys,
                ds,
            );
            return;
        }
    }
    xs.push(x1);
    ys.push(y1);
    ds.push(d1);
}

fn hermite(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

/// The increasing bijection `u` with its certified inverse and
/// quasi-isometry constants `m = exp(-2 ||f||_1) <= u' <= exp(2 ||f||_1) = M`.
#[derive(Clone, Debug)]
pub struct TransformPair {
    spec: GeneratorSpec,
    kind: TransformKind,
    table: CurveTable,
    lower_slope: f64,
    upper_slope: f64,
    /// The generator vanishes a.e., so `u` is the identity exactly.
    is_identity: bool,
}

/// Builds the quadratic-term-removing transform of a globally integrable
/// generator.
pub fn build_u(spec: &GeneratorSpec) -> Result<TransformPair> {
    let l1 = spec.l1_norm_global();
    if !l1.is_finite() {
        return Err(Error::NotIntegrable { l1 });
    }
    let anchors = anchor_points(spec);
    let deriv = |x: f64| (2.0 * spec.f_int(x)).exp();
    let seg = |a: f64, b: f64| exp2f_integral(spec, a, b);
    let mut table = CurveTable::build(&anchors, &deriv, &seg, true);
    table.anchor_zero_at(0.0);
    Ok(TransformPair {
        spec: spec.clone(),
        kind: TransformKind::Zvonkin0,
        table,
        lower_slope: (-2.0 * l1).exp(),
        upper_slope: (2.0 * l1).exp(),
        is_identity: l1 == 0.0,
    })
}

impl TransformPair {
    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    /// `u(x)`: tabulated cubic inside the window, exact linear continuation
    /// where the generator vanishes, direct quadrature otherwise.
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x.is_finite());
        if self.is_identity {
            return x;
        }
        let (lo, hi) = self.table.span();
        if x >= lo && x <= hi {
            self.table.eval_in(x)
        } else if x < lo {
            let y0 = self.table.ys[0];
            if self.tail_is_linear(false) {
                y0 + self.deriv(lo) * (x - lo)
            } else {
                y0 - exp2f_integral(&self.spec, x, lo)
            }
        } else {
            let y1 = *self.table.ys.last().unwrap();
            if self.tail_is_linear(true) {
                y1 + self.deriv(hi) * (x - hi)
            } else {
                y1 + exp2f_integral(&self.spec, hi, x)
            }
        }
    }

    /// `u'(x) = exp(2 F(x))`, exact through the antiderivative.
    pub fn deriv(&self, x: f64) -> f64 {
        (2.0 * self.spec.f_int(x)).exp()
    }

    /// A.e. second derivative `u'' = 2 f u'` (the defining ODE; never a
    /// finite difference).
    pub fn second_deriv_ae(&self, x: f64) -> f64 {
        2.0 * self.spec.eval_pointwise(x) * self.deriv(x)
    }

    /// `u^{-1}(y)`: bracketed bisection inside the table cell followed by a
    /// Newton polish with the exact derivative.
    pub fn invert(&self, y: f64) -> f64 {
        debug_assert!(y.is_finite());
        if self.is_identity {
            return y;
        }
        let y_lo = self.table.ys[0];
        let y_hi = *self.table.ys.last().unwrap();
        if y >= y_lo && y <= y_hi {
            return self
                .table
                .invert_in(y, &|x: f64| self.deriv(x));
        }
        let (lo, hi) = self.table.span();
        if y < y_lo {
            if self.tail_is_linear(false) {
                lo + (y - y_lo) / self.deriv(lo)
            } else {
                self.invert_tail(y, lo, false)
            }
        } else if self.tail_is_linear(true) {
            hi + (y - y_hi) / self.deriv(hi)
        } else {
            self.invert_tail(y, hi, true)
        }
    }

    /// Quasi-isometry constants `(m, M)` with
    /// `m |x - y| <= |u(x) - u(y)| <= M |x - y|`.
    pub fn isometry_bounds(&self) -> Result<(f64, f64)> {
        if self.kind != TransformKind::Zvonkin0 {
            return Err(Error::Domain(
                "isometry bounds are defined for the quadratic-killing transform".into(),
            ));
        }
        Ok((self.lower_slope, self.upper_slope))
    }

    fn tail_is_linear(&self, upper: bool) -> bool {
        let pieces = self.spec.pieces();
        let kind = if upper {
            &pieces[pieces.len() - 1].kind
        } else {
            &pieces[0].kind
        };
        matches!(kind, crate::generator::PieceKind::Const(c) if *c == 0.0)
    }

    fn invert_tail(&self, y: f64, edge: f64, upper: bool) -> f64 {
        // |u^{-1}(y) - edge| <= |y - u(edge)| / m gives a global bracket.
        let span = (y - self.eval(edge)).abs() / self.lower_slope + 1.0;
        let (mut lo, mut hi) = if upper {
            (edge, edge + span)
        } else {
            (edge - span, edge)
        };
        for _ in 0..200 {
            if hi - lo <= 1e-13 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) <= y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..2 {
            x -= (self.eval(x) - y) / self.deriv(x);
        }
        x
    }

    /// Writes the interpolation table as `x,u,du` CSV rows.
    pub fn dump_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,u,du")?;
        for i in 0..self.table.xs.len() {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e}",
                self.table.xs[i], self.table.ys[i], self.table.ds[i]
            )?;
        }
        Ok(())
    }
}

/// Reads back a table dumped by [`TransformPair::dump_table`] for
/// inspection.
pub fn load_table<R: BufRead>(r: R) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "x,u,du" {
                return Err(Error::InvalidConfig(format!(
                    "expected header `x,u,du`, got `{line}`"
                )));
            }
            continue;
        }
        let mut parts = line.split(',');
        let mut next = || -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| Error::InvalidConfig(format!("short row {i}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("row {i}: {e}")))
        };
        rows.push((next()?, next()?, next()?));
    }
    Ok(rows)
}

/// The second transform: `K`, `u2`, the even extension `v(x) = u2(|x|)`, and
/// the quadratic-growth constants `c1`, `c2`.
#[derive(Clone, Debug)]
pub struct SecondTransform {
    spec: GeneratorSpec,
    /// `K = int_0^y exp(-2F)` is the quadratic-killing transform of `-f`.
    k: TransformPair,
    u2: CurveTable,
    c1: f64,
    c2: f64,
}

/// Builds the source-1/2 transform: `u2'' - 2 f u2' = 1` a.e. by
/// construction.
pub fn build_second(spec: &GeneratorSpec) -> Result<SecondTransform> {
    let l1 = spec.l1_norm_global();
    if !l1.is_finite() {
        return Err(Error::NotIntegrable { l1 });
    }
    let k = build_u(&spec.negated())?;
    let deriv = |x: f64| k.eval(x) * (2.0 * spec.f_int(x)).exp();
    let seg = |a: f64, b: f64| integrate_adaptive(&deriv, a, b, SEGMENT_TOL, SEGMENT_TOL);
    let anchors = anchor_points(spec);
    let mut u2 = CurveTable::build(&anchors, &deriv, &seg, false);
    u2.anchor_zero_at(0.0);
    let c2 = (4.0 * l1).exp();
    Ok(SecondTransform {
        spec: spec.clone(),
        k,
        u2,
        c1: 0.5 * c2,
        c2,
    })
}

impl SecondTransform {
    /// `K(y) = int_0^y exp(-2F)`.
    pub fn eval_k(&self, y: f64) -> f64 {
        self.k.eval(y)
    }

    /// `u2(x) = int_0^x K exp(2F)`.
    pub fn eval_u2(&self, x: f64) -> f64 {
        let (lo, hi) = self.u2.span();
        if x >= lo && x <= hi {
            self.u2.eval_in(x)
        } else if x < lo {
            self.u2.ys[0]
                - integrate_adaptive(&|y| self.eval_u2_prime(y), x, lo, SEGMENT_TOL, SEGMENT_TOL)
        } else {
            self.u2.ys.last().unwrap()
                + integrate_adaptive(&|y| self.eval_u2_prime(y), hi, x, SEGMENT_TOL, SEGMENT_TOL)
        }
    }

    /// `u2'(x) = K(x) exp(2F(x))`, exact through the two antiderivatives.
    pub fn eval_u2_prime(&self, x: f64) -> f64 {
        self.k.eval(x) * (2.0 * self.spec.f_int(x)).exp()
    }

    /// A.e. `u2'' = 1 + 2 f u2'` (the defining ODE).
    pub fn u2_second_ae(&self, x: f64) -> f64 {
        1.0 + 2.0 * self.spec.eval_pointwise(x) * self.eval_u2_prime(x)
    }

    /// `v(x) = u2(|x|)`.
    pub fn eval_v(&self, x: f64) -> f64 {
        self.eval_u2(x.abs())
    }

    /// `v'(x) = sgn(x) u2'(|x|)`; zero at the origin since `K(0) = 0`.
    pub fn eval_v_prime(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            x.signum() * self.eval_u2_prime(x.abs())
        }
    }

    /// `(c1, c2)` with `u2(|x|) <= c1 x^2` and `u2'(|x|) <= c2 |x|`.
    pub fn growth_constants(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }
}

/// Anchor nodes for table construction: the generator's breakpoints plus the
/// origin, padded to a window at least [-50, 50].
fn anchor_points(spec: &GeneratorSpec) -> Vec<f64> {
    let mut pts = vec![0.0];
    pts.extend_from_slice(spec.breakpoints());
    let lo = pts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = pts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    pts.push((lo - 2.0).min(-50.0));
    pts.push((hi + 2.0).max(50.0));
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts
}

/// Integral of `exp(2F)` over `[a, b]`: closed form on constant pieces
/// (where `F` is affine), adaptive Gauss-Legendre otherwise.
fn exp2f_integral(spec: &GeneratorSpec, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    debug_assert!(a < b);
    let mut cuts: Vec<f64> = vec![a];
    for &bp in spec.breakpoints() {
        if bp > a && bp < b {
            cuts.push(bp);
        }
    }
    cuts.push(b);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let mid = 0.5 * (x0 + x1);
        let idx = spec
            .pieces()
            .iter()
            .position(|p| p.lo <= mid && mid < p.hi)
            .expect("pieces partition the line");
        match &spec.pieces()[idx].kind {
            crate::generator::PieceKind::Const(c) => {
                let f0 = (2.0 * spec.f_int(x0)).exp();
                acc += if *c == 0.0 {
                    f0 * (x1 - x0)
                } else {
                    f0 * ((2.0 * c * (x1 - x0)).exp() - 1.0) / (2.0 * c)
                };
            }
            _ => {
                acc += integrate_adaptive(
                    &|x| (2.0 * spec.f_int(x)).exp(),
                    x0,
                    x1,
                    SEGMENT_TOL,
                    SEGMENT_TOL,
                );
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{builtin, step};

    #[test]
    fn zero_generator_gives_identity() {
        let f = builtin("zero").unwrap();
        let u = build_u(&f).unwrap();
        for x in [-17.0, -0.3, 0.0, 0.5, 42.0] {
            assert!((u.eval(x) - x).abs() < 1e-13, "u({x}) = {}", u.eval(x));
            assert_eq!(u.deriv(x), 1.0);
        }
        assert_eq!(u.isometry_bounds().unwrap(), (1.0, 1.0));
        assert!((u.invert(3.7) - 3.7).abs() < 1e-12);
    }

    #[test]
    fn step_transform_closed_forms() {
        let f = step(1.0).unwrap();
        let u = build_u(&f).unwrap();
        let e2 = (2.0_f64).exp();
        assert!((u.eval(1.0) - (e2 - 1.0) / 2.0).abs() < 1e-10);
        assert!((u.eval(-1.0) + 1.0).abs() < 1e-10);
        assert!((u.eval(2.0) - ((e2 - 1.0) / 2.0 + e2)).abs() < 1e-10);
        let (m, big_m) = u.isometry_bounds().unwrap();
        assert!((m - (-2.0_f64).exp()).abs() < 1e-15);
        assert!((big_m - e2).abs() < 1e-15);
        // inverse of the closed-form value
        assert!((u.invert((e2 - 1.0) / 2.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn roundtrip_is_tight_over_the_window() {
        for name in ["step", "h1", "h2", "h3"] {
            let f = builtin(name).unwrap();
            let u = build_u(&f).unwrap();
            let n = 1000;
            for i in 0..=n {
                let x = -50.0 + 100.0 * i as f64 / n as f64;
                let back = u.invert(u.eval(x));
                assert!(
                    (back - x).abs() < 1e-10,
                    "{name}: roundtrip at {x} off by {}",
                    back - x
                );
            }
        }
    }

    #[test]
    fn difference_quotients_respect_the_isometry_bounds() {
        let f = step(1.0).unwrap();
        let u = build_u(&f).unwrap();
        let (m, big_m) = u.isometry_bounds().unwrap();
        let xs: Vec<f64> = (0..200).map(|i| -5.0 + 10.0 * i as f64 / 199.0).collect();
        for (i, &x) in xs.iter().enumerate() {
            for &y in xs.iter().skip(i + 1) {
                let q = (u.eval(x) - u.eval(y)).abs() / (x - y).abs();
                assert!(q >= m - 1e-12 && q <= big_m + 1e-12, "quotient {q}");
            }
        }
    }

    #[test]
    fn sign_of_f_does_not_change_the_bounds() {
        let f = step(-1.0).unwrap();
        let u = build_u(&f).unwrap();
        let (m, big_m) = u.isometry_bounds().unwrap();
        assert!((m - (-2.0_f64).exp()).abs() < 1e-15);
        assert!((big_m - (2.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn ode_residual_by_centered_differences() {
        let f = builtin("h1").unwrap();
        let u = build_u(&f).unwrap();
        let h = 1e-5;
        for i in 0..400 {
            let x = -4.0 + 8.0 * i as f64 / 399.0;
            // stay away from breakpoints, where u'' jumps
            if f.breakpoints().iter().any(|&b| (x - b).abs() < 10.0 * h) {
                continue;
            }
            let du = u.deriv(x);
            let num = (u.deriv(x + h) - u.deriv(x - h)) / (2.0 * h);
            let resid = 0.5 * num - f.eval_pointwise(x) * du;
            assert!(resid.abs() <= 1e-5 * (1.0 + du.abs()), "x={x} resid={resid}");
        }
    }

    #[test]
    fn monotone_everywhere_sampled() {
        let f = builtin("h2").unwrap();
        let u = build_u(&f).unwrap();
        let mut prev = u.eval(-20.0);
        for i in 1..2000 {
            let x = -20.0 + 40.0 * i as f64 / 1999.0;
            let v = u.eval(x);
            assert!(v > prev, "not increasing at {x}");
            prev = v;
        }
    }

    #[test]
    fn ae_equal_specs_build_bit_equal_transforms() {
        use crate::generator::{GeneratorSpec, Piece, PieceKind};
        let a = step(1.0).unwrap();
        let b = GeneratorSpec::new(
            vec![
                Piece {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                    kind: PieceKind::Const(0.0),
                },
                Piece {
                    lo: 0.0,
                    hi: 0.0,
                    kind: PieceKind::Const(9.0),
                },
                Piece {
                    lo: 0.0,
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
        let ua = build_u(&a).unwrap();
        let ub = build_u(&b).unwrap();
        for x in [-3.0, -0.2, 0.0, 0.4, 0.99, 1.0, 2.7] {
            assert_eq!(ua.eval(x).to_bits(), ub.eval(x).to_bits());
            assert_eq!(ua.deriv(x).to_bits(), ub.deriv(x).to_bits());
        }
    }

    #[test]
    fn second_transform_zero_generator() {
        let f = builtin("zero").unwrap();
        let s = build_second(&f).unwrap();
        for x in [-2.0, -0.5, 0.0, 0.3, 1.7] {
            assert!((s.eval_k(x) - x).abs() < 1e-12);
            assert!((s.eval_u2(x) - 0.5 * x * x).abs() < 1e-11, "u2({x})");
            assert!((s.eval_v(x) - 0.5 * x * x).abs() < 1e-11);
            // 1/2 u2'' - f u2' = 1/2 exactly
            assert_eq!(0.5 * s.u2_second_ae(x) - 0.0, 0.5);
        }
        assert_eq!(s.growth_constants().0, 0.5);
        assert_eq!(s.eval_v_prime(0.0), 0.0);
    }

    #[test]
    fn second_transform_step_matches_nested_quadrature_oracle() {
        // values from an independent nested adaptive-quadrature computation
        let expected = [
            (-2.0, 2.0),
            (-1.0, 0.5),
            (0.5, 0.179570457114761309),
            (1.0, 1.09726402473266256),
            (2.0, 4.79179207419798767),
        ];
        let f = step(1.0).unwrap();
        let s = build_second(&f).unwrap();
        for (x, want) in expected {
            let got = s.eval_u2(x);
            assert!((got - want).abs() < 1e-8, "u2({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn second_transform_ode_residual_and_growth() {
        let f = step(1.0).unwrap();
        let s = build_second(&f).unwrap();
        let (c1, c2) = s.growth_constants();
        let h = 1e-5;
        for i in 0..1000 {
            let x = -3.0 + 6.0 * i as f64 / 999.0;
            if f.breakpoints().iter().any(|&b| (x - b).abs() < 10.0 * h) {
                continue;
            }
            let num = (s.eval_u2_prime(x + h) - s.eval_u2_prime(x - h)) / (2.0 * h);
            let resid = 0.5 * num - f.eval_pointwise(x) * s.eval_u2_prime(x) - 0.5;
            assert!(resid.abs() < 1e-6, "x={x} resid={resid}");
            assert!(s.eval_u2(x.abs()) <= c1 * x * x + 1e-12);
            assert!(s.eval_u2_prime(x.abs()) <= c2 * x.abs() + 1e-12);
            if x >= 0.0 {
                assert!(s.eval_u2(x) >= -1e-12);
                assert!(s.eval_u2_prime(x) >= -1e-12);
            }
        }
        // v'(0) = 0 and v is C1 across the origin
        assert_eq!(s.eval_v_prime(0.0), 0.0);
        assert!(s.eval_v_prime(1e-8).abs() < 1e-7);
    }

    #[test]
    fn table_dump_and_load_roundtrip() {
        let f = step(1.0).unwrap();
        let u = build_u(&f).unwrap();
        let mut buf = Vec::new();
        u.dump_table(&mut buf).unwrap();
        let rows = load_table(std::io::BufReader::new(buf.as_slice())).unwrap();
        assert!(rows.len() > 10);
        for (x, uu, du) in &rows {
            assert!((u.eval(*x) - uu).abs() < 1e-12);
            assert!((u.deriv(*x) - du).abs() < 1e-12);
        }
    }
}
