//! Driver descriptors for the transformed (linear-growth) equation and the
//! raw quadratic equation.

use crate::error::Result;
use crate::generator::{DominatingParams, GeneratorSpec};
use crate::transform::TransformPair;

/// Driver of a transformed equation `Ybar_t = xibar + int G(Ybar, Zbar) ds - int Zbar dW`,
/// continuous and of linear growth.
pub trait BarDriver: Sync {
    fn eval(&self, y_bar: f64, z_bar: f64) -> f64;
    /// Lipschitz estimate in `y_bar`, used by the per-step contraction
    /// assertion.
    fn lipschitz_y(&self) -> f64;
    /// Lipschitz estimate in `z_bar`.
    fn lipschitz_z(&self) -> f64;
}

/// `G(ybar, zbar) = sign * [(a + b |u^{-1}(ybar)|) u'(u^{-1}(ybar)) + c |zbar|]`,
/// the image of `a + b|y| + c|z| + f(y)|z|^2` under the transform that
/// removes its quadratic term. Bounded by `M a + m M b |ybar| + c |zbar|`.
pub struct TransformedAbcDriver<'a> {
    pub transform: &'a TransformPair,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sign: f64,
}

impl BarDriver for TransformedAbcDriver<'_> {
    fn eval(&self, y_bar: f64, z_bar: f64) -> f64 {
        let x = self.transform.invert(y_bar);
        self.sign * ((self.a + self.b * x.abs()) * self.transform.deriv(x) + self.c * z_bar.abs())
    }

    fn lipschitz_y(&self) -> f64 {
        let (m, big_m) = self
            .transform
            .isometry_bounds()
            .expect("abc driver is built on the quadratic-killing transform");
        m * big_m * self.b
    }

    fn lipschitz_z(&self) -> f64 {
        self.c
    }
}

pub struct ZeroBar;

impl BarDriver for ZeroBar {
    fn eval(&self, _y: f64, _z: f64) -> f64 {
        0.0
    }
    fn lipschitz_y(&self) -> f64 {
        0.0
    }
    fn lipschitz_z(&self) -> f64 {
        0.0
    }
}

/// Constant driver, for the additive-shift fixture.
pub struct ConstBar(pub f64);

impl BarDriver for ConstBar {
    fn eval(&self, _y: f64, _z: f64) -> f64 {
        self.0
    }
    fn lipschitz_y(&self) -> f64 {
        0.0
    }
    fn lipschitz_z(&self) -> f64 {
        0.0
    }
}

/// `G = rate * ybar`, for the linear closed-form fixture.
pub struct LinearYBar {
    pub rate: f64,
}

impl BarDriver for LinearYBar {
    fn eval(&self, y: f64, _z: f64) -> f64 {
        self.rate * y
    }
    fn lipschitz_y(&self) -> f64 {
        self.rate.abs()
    }
    fn lipschitz_z(&self) -> f64 {
        0.0
    }
}

/// Driver of the raw quadratic equation `eq(xi, H)`. Evaluated pointwise
/// through the a.e. representative.
pub trait QuadDriver: Sync {
    fn eval(&self, t: f64, y: f64, z: f64) -> f64;
    fn name(&self) -> &str;
}

pub struct ZeroDriver;

impl QuadDriver for ZeroDriver {
    fn eval(&self, _t: f64, _y: f64, _z: f64) -> f64 {
        0.0
    }
    fn name(&self) -> &str {
        "zero"
    }
}

/// `H(t, y, z) = f(y) |z|^2`.
pub struct QuadraticGenDriver {
    pub f: GeneratorSpec,
    label: String,
}

impl QuadraticGenDriver {
    pub fn new(f: GeneratorSpec, label: impl Into<String>) -> Self {
        Self {
            f,
            label: label.into(),
        }
    }
}

impl QuadDriver for QuadraticGenDriver {
    fn eval(&self, _t: f64, y: f64, z: f64) -> f64 {
        self.f.eval_pointwise(y) * z * z
    }
    fn name(&self) -> &str {
        &self.label
    }
}

/// The dominating driver itself: `g(y, z) = a + b|y| + c|z| + f(|y|) |z|^2`.
pub struct DominatingDriver {
    params: DominatingParams,
    f_even: GeneratorSpec,
}

impl DominatingDriver {
    pub fn new(params: DominatingParams) -> Result<Self> {
        let f_even = params.f.evenized()?;
        Ok(Self { params, f_even })
    }
}

impl QuadDriver for DominatingDriver {
    fn eval(&self, _t: f64, y: f64, z: f64) -> f64 {
        self.params.a
            + self.params.b * y.abs()
            + self.params.c * z.abs()
            + self.f_even.eval_pointwise(y) * z * z
    }
    fn name(&self) -> &str {
        "dominating"
    }
}

/// Scales another driver; a factor above one breaks the domination premise
/// and serves as the negative control.
pub struct ScaledDriver<D: QuadDriver> {
    pub inner: D,
    pub factor: f64,
    label: String,
}

impl<D: QuadDriver> ScaledDriver<D> {
    pub fn new(inner: D, factor: f64) -> Self {
        let label = format!("{} x {}", inner.name(), factor);
        Self {
            inner,
            factor,
            label,
        }
    }
}

impl<D: QuadDriver> QuadDriver for ScaledDriver<D> {
    fn eval(&self, t: f64, y: f64, z: f64) -> f64 {
        self.factor * self.inner.eval(t, y, z)
    }
    fn name(&self) -> &str {
        &self.label
    }
}
