//! Piecewise representation of the quadratic coefficient `f` and of the
//! dominating driver parameters.
//!
//! Everything downstream depends on `f` only through its antiderivative
//! `F(x) = int_0^x f`, so two generators that agree almost everywhere are
//! canonicalized to the same structure and produce bit-identical results.
//! Pointwise evaluation exists for diagnostics only and uses the right-limit
//! value at breakpoints.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One smooth piece on a half-open interval `[lo, hi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub kind: PieceKind,
}

/// The smooth function carried by a piece. Every kind has a closed-form
/// antiderivative, which is what all consumers actually use.
#[derive(Clone, Debug, PartialEq)]
pub enum PieceKind {
    Const(f64),
    /// Coefficients in ascending powers.
    Poly(Vec<f64>),
    /// `amplitude * sin(frequency * y + phase)`.
    Sin {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// `scale / ((1 + y^2) * sqrt(|y|))`: integrable cusp at the origin.
    SqrtSingular { scale: f64 },
}

impl PieceKind {
    fn eval(&self, y: f64) -> f64 {
        match self {
            PieceKind::Const(c) => *c,
            PieceKind::Poly(coeffs) => {
                let mut acc = 0.0;
                for &c in coeffs.iter().rev() {
                    acc = acc * y + c;
                }
                acc
            }
            PieceKind::Sin {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * y + phase).sin(),
            PieceKind::SqrtSingular { scale } => {
                if y == 0.0 {
                    f64::INFINITY * scale.signum()
                } else {
                    scale / ((1.0 + y * y) * y.abs().sqrt())
                }
            }
        }
    }

    /// A global antiderivative of the piece function, evaluated at finite `y`.
    fn primitive(&self, y: f64) -> f64 {
        match self {
            PieceKind::Const(c) => c * y,
            PieceKind::Poly(coeffs) => {
                let mut acc = 0.0;
                for (k, &c) in coeffs.iter().enumerate().rev() {
                    acc = acc * y + c / (k as f64 + 1.0);
                }
                acc * y
            }
            PieceKind::Sin {
                amplitude,
                frequency,
                phase,
            } => {
                if *frequency == 0.0 {
                    amplitude * phase.sin() * y
                } else {
                    -amplitude / frequency * (frequency * y + phase).cos()
                }
            }
            PieceKind::SqrtSingular { scale } => scale * sqrt_singular_primitive(y),
        }
    }

    /// Limit of the primitive at +/- infinity; finite only when the tail is
    /// integrable.
    fn primitive_limit(&self, to_plus_infinity: bool) -> f64 {
        let sign = if to_plus_infinity { 1.0 } else { -1.0 };
        match self {
            PieceKind::Const(c) => {
                if *c == 0.0 {
                    0.0
                } else {
                    sign * c.signum() * f64::INFINITY
                }
            }
            PieceKind::Poly(coeffs) => {
                if coeffs.iter().all(|&c| c == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PieceKind::Sin { amplitude, .. } => {
                if *amplitude == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PieceKind::SqrtSingular { scale } => {
                sign * scale * std::f64::consts::PI / std::f64::consts::SQRT_2
            }
        }
    }

    fn primitive_maybe_inf(&self, y: f64) -> f64 {
        if y == f64::INFINITY {
            self.primitive_limit(true)
        } else if y == f64::NEG_INFINITY {
            self.primitive_limit(false)
        } else {
            self.primitive(y)
        }
    }

    /// Signed integral over a finite subinterval.
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.primitive(b) - self.primitive(a)
    }

    /// Integral of |f| over `[a, b]` (possibly infinite endpoints), exact up
    /// to root-location error: the interval is split at sign changes and each
    /// slab uses the closed-form primitive.
    fn abs_integral(&self, a: f64, b: f64) -> f64 {
        if a >= b {
            return 0.0;
        }
        let unbounded = !a.is_finite() || !b.is_finite();
        match self {
            PieceKind::Const(c) => {
                if *c == 0.0 {
                    0.0
                } else if unbounded {
                    f64::INFINITY
                } else {
                    c.abs() * (b - a)
                }
            }
            PieceKind::Poly(coeffs) => {
                if coeffs.iter().all(|&c| c == 0.0) {
                    0.0
                } else if unbounded {
                    f64::INFINITY
                } else {
                    let mut cuts = poly_sign_changes(coeffs, a, b);
                    cuts.insert(0, a);
                    cuts.push(b);
                    cuts.windows(2)
                        .map(|w| self.integral(w[0], w[1]).abs())
                        .sum()
                }
            }
            PieceKind::Sin {
                amplitude,
                frequency,
                ..
            } => {
                if *amplitude == 0.0 {
                    0.0
                } else if unbounded {
                    f64::INFINITY
                } else if *frequency == 0.0 {
                    self.eval(a).abs() * (b - a)
                } else {
                    let mut cuts = self.sin_roots(a, b);
                    cuts.insert(0, a);
                    cuts.push(b);
                    cuts.windows(2)
                        .map(|w| self.integral(w[0], w[1]).abs())
                        .sum()
                }
            }
            // Nonnegative up to the overall sign of `scale`.
            PieceKind::SqrtSingular { .. } => {
                (self.primitive_maybe_inf(b) - self.primitive_maybe_inf(a)).abs()
            }
        }
    }

    fn sin_roots(&self, a: f64, b: f64) -> Vec<f64> {
        let PieceKind::Sin {
            frequency, phase, ..
        } = self
        else {
            unreachable!()
        };
        let pi = std::f64::consts::PI;
        let (ua, ub) = {
            let ua = (frequency * a + phase) / pi;
            let ub = (frequency * b + phase) / pi;
            if ua <= ub {
                (ua, ub)
            } else {
                (ub, ua)
            }
        };
        let mut roots = Vec::new();
        let mut k = ua.ceil() as i64;
        while (k as f64) <= ub {
            let y = (k as f64 * pi - phase) / frequency;
            if y > a && y < b {
                roots.push(y);
            }
            k += 1;
        }
        roots.sort_by(|x, y| x.total_cmp(y));
        roots
    }

    fn is_zero(&self) -> bool {
        match self {
            PieceKind::Const(c) => *c == 0.0,
            PieceKind::Poly(coeffs) => coeffs.iter().all(|&c| c == 0.0),
            PieceKind::Sin { amplitude, .. } => *amplitude == 0.0,
            PieceKind::SqrtSingular { scale } => *scale == 0.0,
        }
    }

    /// Mirror image: kind of `y -> f(-y)`.
    fn mirrored(&self) -> PieceKind {
        match self {
            PieceKind::Const(c) => PieceKind::Const(*c),
            PieceKind::Poly(coeffs) => PieceKind::Poly(
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| if k % 2 == 0 { c } else { -c })
                    .collect(),
            ),
            PieceKind::Sin {
                amplitude,
                frequency,
                phase,
            } => PieceKind::Sin {
                amplitude: *amplitude,
                frequency: -frequency,
                phase: *phase,
            },
            PieceKind::SqrtSingular { scale } => PieceKind::SqrtSingular { scale: *scale },
        }
    }

    fn negated(&self) -> PieceKind {
        match self {
            PieceKind::Const(c) => PieceKind::Const(-c),
            PieceKind::Poly(coeffs) => PieceKind::Poly(coeffs.iter().map(|&c| -c).collect()),
            PieceKind::Sin {
                amplitude,
                frequency,
                phase,
            } => PieceKind::Sin {
                amplitude: -amplitude,
                frequency: *frequency,
                phase: *phase,
            },
            PieceKind::SqrtSingular { scale } => PieceKind::SqrtSingular { scale: -scale },
        }
    }

    /// Supremum of |f| over a finite interval, by sampling plus endpoints.
    /// Returns infinity if the interval touches the cusp of a singular kind.
    fn sup_abs(&self, a: f64, b: f64) -> f64 {
        match self {
            PieceKind::Const(c) => c.abs(),
            PieceKind::SqrtSingular { scale } => {
                if *scale == 0.0 {
                    0.0
                } else if a <= 0.0 && b >= 0.0 {
                    f64::INFINITY
                } else {
                    let edge = if b < 0.0 { b } else { a };
                    self.eval(edge).abs()
                }
            }
            _ => {
                let n = 512;
                let mut m: f64 = self.eval(a).abs().max(self.eval(b).abs());
                for i in 1..n {
                    let y = a + (b - a) * i as f64 / n as f64;
                    m = m.max(self.eval(y).abs());
                }
                m
            }
        }
    }
}

/// Primitive of `1/((1+y^2) sqrt(|y|))`, odd and increasing, zero at 0.
/// For y > 0 substitute y = t^2 to get `2 * int_0^sqrt(y) dt/(1+t^4)`,
/// which has the standard closed form below.
fn sqrt_singular_primitive(y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let t = y.abs().sqrt();
    let s2 = std::f64::consts::SQRT_2;
    let q = (1.0 / (4.0 * s2)) * (((t * t + s2 * t + 1.0) / (t * t - s2 * t + 1.0)).ln())
        + (1.0 / (2.0 * s2)) * ((s2 * t + 1.0).atan() + (s2 * t - 1.0).atan());
    2.0 * q.copysign(y)
}

fn poly_sign_changes(coeffs: &[f64], a: f64, b: f64) -> Vec<f64> {
    let eval = |y: f64| {
        let mut acc = 0.0;
        for &c in coeffs.iter().rev() {
            acc = acc * y + c;
        }
        acc
    };
    let degree = coeffs.len().saturating_sub(1);
    let samples = 64 * (degree + 2);
    let mut roots = Vec::new();
    let mut prev_x = a;
    let mut prev_v = eval(a);
    for i in 1..=samples {
        let x = a + (b - a) * i as f64 / samples as f64;
        let v = eval(x);
        if v == 0.0 {
            // sample landed exactly on a root
            roots.push(x);
        } else if prev_v == 0.0 {
            // root already recorded at the previous sample
        } else if v.signum() != prev_v.signum() {
            let (mut lo, mut hi) = (prev_x, x);
            let mut flo = prev_v;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let fm = eval(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_v = v;
    }
    roots
}

/// Canonical piecewise generator. Immutable after construction; cheap to
/// share across path workers.
#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    pieces: Vec<Piece>,
    /// Finite interior endpoints, sorted ascending.
    breakpoints: Vec<f64>,
    /// Per-piece offsets such that `F(x) = offset[i] + primitive_i(x)`.
    offsets: Vec<f64>,
    support_bound: f64,
    l1_norm_global: f64,
    eta_bound: f64,
}

impl GeneratorSpec {
    /// Builds a spec from pieces that partition the real line. Zero-width
    /// pieces are dropped (they carry no mass and no pointwise weight under
    /// the right-limit convention) and adjacent identical pieces are merged,
    /// so almost-everywhere-equal inputs canonicalize to the same value.
    pub fn new(pieces: Vec<Piece>, eta_bound: f64) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Domain("generator needs at least one piece".into()));
        }
        let mut kept: Vec<Piece> = Vec::with_capacity(pieces.len());
        for p in pieces {
            if p.lo > p.hi || p.lo.is_nan() || p.hi.is_nan() {
                return Err(Error::Domain(format!(
                    "invalid piece interval [{}, {})",
                    p.lo, p.hi
                )));
            }
            if p.lo == p.hi {
                continue; // measure zero
            }
            match kept.last_mut() {
                Some(prev) if prev.kind == p.kind && prev.hi == p.lo => prev.hi = p.hi,
                _ => kept.push(p),
            }
        }
        if kept.is_empty() {
            return Err(Error::Domain("all pieces have zero width".into()));
        }
        if kept[0].lo != f64::NEG_INFINITY || kept[kept.len() - 1].hi != f64::INFINITY {
            return Err(Error::Domain(
                "pieces must cover the real line (first lo = -inf, last hi = +inf)".into(),
            ));
        }
        for w in kept.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(Error::Domain(format!(
                    "pieces must be contiguous: gap between {} and {}",
                    w[0].hi, w[1].lo
                )));
            }
        }

        let breakpoints: Vec<f64> = kept.iter().skip(1).map(|p| p.lo).collect();

        // Anchor F(0) = 0 in the piece containing the origin, then chain
        // offsets across breakpoints by continuity.
        let origin = kept.partition_point(|p| p.hi <= 0.0);
        let mut offsets = vec![0.0; kept.len()];
        offsets[origin] = -kept[origin].kind.primitive(0.0);
        for i in origin + 1..kept.len() {
            let b = kept[i].lo;
            offsets[i] =
                offsets[i - 1] + kept[i - 1].kind.primitive(b) - kept[i].kind.primitive(b);
        }
        for i in (0..origin).rev() {
            let b = kept[i].hi;
            offsets[i] = offsets[i + 1] + kept[i + 1].kind.primitive(b) - kept[i].kind.primitive(b);
        }

        let l1_norm_global: f64 = kept.iter().map(|p| p.kind.abs_integral(p.lo, p.hi)).sum();

        let support_bound = {
            let first_zero = kept[0].kind.is_zero();
            let last_zero = kept[kept.len() - 1].kind.is_zero();
            if first_zero && last_zero {
                breakpoints
                    .iter()
                    .fold(0.0_f64, |acc, &b| acc.max(b.abs()))
            } else {
                f64::INFINITY
            }
        };

        if eta_bound < 0.0 || eta_bound.is_nan() {
            return Err(Error::Domain("eta_bound must be >= 0".into()));
        }

        Ok(Self {
            pieces: kept,
            breakpoints,
            offsets,
            support_bound,
            l1_norm_global,
            eta_bound,
        })
    }

    /// Constant function `c` on the whole line.
    fn constant(c: f64) -> Self {
        Self::new(
            vec![Piece {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                kind: PieceKind::Const(c),
            }],
            0.0,
        )
        .expect("constant spec is valid")
    }

    /// Compactly supported function equal to `kind` on `[lo, hi)`, zero
    /// elsewhere.
    pub fn supported(lo: f64, hi: f64, kind: PieceKind, eta_bound: f64) -> Result<Self> {
        Self::new(
            vec![
                Piece {
                    lo: f64::NEG_INFINITY,
                    hi: lo,
                    kind: PieceKind::Const(0.0),
                },
                Piece { lo, hi, kind },
                Piece {
                    lo: hi,
                    hi: f64::INFINITY,
                    kind: PieceKind::Const(0.0),
                },
            ],
            eta_bound,
        )
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    pub fn l1_norm_global(&self) -> f64 {
        self.l1_norm_global
    }

    pub fn eta_bound(&self) -> f64 {
        self.eta_bound
    }

    fn piece_index(&self, x: f64) -> usize {
        // right-limit convention: x on a breakpoint belongs to the piece
        // starting there
        self.breakpoints.partition_point(|&b| b <= x)
    }

    /// `F(x) = int_0^x f`, via the piecewise closed forms. The only public
    /// route from `f` into the numerics.
    pub fn antiderivative(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("antiderivative at non-finite {x}")));
        }
        Ok(self.f_int(x))
    }

    pub(crate) fn f_int(&self, x: f64) -> f64 {
        debug_assert!(x.is_finite());
        let i = self.piece_index(x);
        self.offsets[i] + self.pieces[i].kind.primitive(x)
    }

    /// `int_lo^hi |f|`; endpoints may be infinite.
    pub fn l1_norm(&self, lo: f64, hi: f64) -> Result<f64> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Domain(format!("invalid interval [{lo}, {hi}]")));
        }
        let mut acc = 0.0;
        for p in &self.pieces {
            let a = lo.max(p.lo);
            let b = hi.min(p.hi);
            if a < b {
                acc += p.kind.abs_integral(a, b);
            }
        }
        Ok(acc)
    }

    /// Pointwise value, for diagnostics only: the right-limit representative
    /// at breakpoints. Solvers never consume this.
    pub fn eval_pointwise(&self, x: f64) -> f64 {
        let i = self.piece_index(x);
        self.pieces[i].kind.eval(x)
    }

    /// Supremum of |f| over `[lo, hi]` (sampled for non-constant pieces);
    /// infinite when the interval touches a non-integrable-sup cusp.
    pub fn sup_abs_on(&self, lo: f64, hi: f64) -> f64 {
        let mut m: f64 = 0.0;
        for p in &self.pieces {
            let a = lo.max(p.lo);
            let b = hi.min(p.hi);
            if a < b {
                m = m.max(p.kind.sup_abs(a, b));
            }
        }
        m
    }

    /// The spec of `y -> f(-y)` composed into `y -> f(|y|)`: even reflection
    /// of the restriction to `[0, inf)`.
    pub fn evenized(&self) -> Result<GeneratorSpec> {
        let mut right: Vec<Piece> = Vec::new();
        for p in &self.pieces {
            let lo = p.lo.max(0.0);
            if lo < p.hi {
                right.push(Piece {
                    lo,
                    hi: p.hi,
                    kind: p.kind.clone(),
                });
            }
        }
        let mut pieces: Vec<Piece> = right
            .iter()
            .rev()
            .map(|p| Piece {
                lo: -p.hi,
                hi: -p.lo,
                kind: p.kind.mirrored(),
            })
            .collect();
        pieces.extend(right);
        Self::new(pieces, self.eta_bound)
    }

    /// The spec of `-f`.
    pub fn negated(&self) -> GeneratorSpec {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                lo: p.lo,
                hi: p.hi,
                kind: p.kind.negated(),
            })
            .collect();
        Self::new(pieces, self.eta_bound).expect("negation preserves validity")
    }

    pub fn to_json(&self) -> GeneratorJson {
        GeneratorJson {
            pieces: self
                .pieces
                .iter()
                .map(|p| {
                    let (kind, coeffs) = match &p.kind {
                        PieceKind::Const(c) => ("const".to_string(), vec![*c]),
                        PieceKind::Poly(cs) => ("poly".to_string(), cs.clone()),
                        PieceKind::Sin {
                            amplitude,
                            frequency,
                            phase,
                        } => ("sin".to_string(), vec![*amplitude, *frequency, *phase]),
                        PieceKind::SqrtSingular { scale } => ("h3sing".to_string(), vec![*scale]),
                    };
                    PieceJson {
                        lo: if p.lo.is_finite() { Some(p.lo) } else { None },
                        hi: if p.hi.is_finite() { Some(p.hi) } else { None },
                        kind,
                        coeffs,
                    }
                })
                .collect(),
            eta_bound: self.eta_bound,
        }
    }

    pub fn from_json(json: &GeneratorJson) -> Result<Self> {
        let pieces = json
            .pieces
            .iter()
            .map(|pj| {
                let kind = match pj.kind.as_str() {
                    "const" => PieceKind::Const(*pj.coeffs.first().ok_or_else(|| {
                        Error::InvalidConfig("const piece needs one coefficient".into())
                    })?),
                    "poly" => PieceKind::Poly(pj.coeffs.clone()),
                    "sin" => {
                        if pj.coeffs.len() != 3 {
                            return Err(Error::InvalidConfig(
                                "sin piece needs [amplitude, frequency, phase]".into(),
                            ));
                        }
                        PieceKind::Sin {
                            amplitude: pj.coeffs[0],
                            frequency: pj.coeffs[1],
                            phase: pj.coeffs[2],
                        }
                    }
                    "h3sing" => PieceKind::SqrtSingular {
                        scale: pj.coeffs.first().copied().unwrap_or(1.0),
                    },
                    other => {
                        return Err(Error::InvalidConfig(format!("unknown piece kind `{other}`")))
                    }
                };
                Ok(Piece {
                    lo: pj.lo.unwrap_or(f64::NEG_INFINITY),
                    hi: pj.hi.unwrap_or(f64::INFINITY),
                    kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pieces, json.eta_bound)
    }
}

/// JSON wire form of a piecewise generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorJson {
    pub pieces: Vec<PieceJson>,
    #[serde(default)]
    pub eta_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceJson {
    /// Omitted = unbounded below.
    pub lo: Option<f64>,
    /// Omitted = unbounded above.
    pub hi: Option<f64>,
    pub kind: String,
    #[serde(default)]
    pub coeffs: Vec<f64>,
}

/// Parameters of the dominating driver `a + b|y| + c|z| + f(|y|)|z|^2`.
#[derive(Clone, Debug)]
pub struct DominatingParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub f: GeneratorSpec,
}

impl DominatingParams {
    pub fn new(a: f64, b: f64, c: f64, f: GeneratorSpec) -> Result<Self> {
        if a < 0.0 || b < 0.0 || c < 0.0 || !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::Domain("a, b, c must be finite and >= 0".into()));
        }
        if !f.l1_norm_global().is_finite() {
            return Err(Error::NotIntegrable {
                l1: f.l1_norm_global(),
            });
        }
        Ok(Self { a, b, c, f })
    }
}

/// The intro generators plus the two workhorse fixtures.
pub fn builtin(name: &str) -> Result<GeneratorSpec> {
    match name.to_ascii_lowercase().as_str() {
        "zero" => Ok(GeneratorSpec::constant(0.0)),
        "h1" => {
            let pi = std::f64::consts::PI;
            GeneratorSpec::supported(
                -pi,
                pi / 2.0,
                PieceKind::Sin {
                    amplitude: 1.0,
                    frequency: 1.0,
                    phase: 0.0,
                },
                0.0,
            )
        }
        "h2" => h2(0.0, 1.0, 2.0, 3.0),
        "h3" => GeneratorSpec::new(
            vec![
                Piece {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                    kind: PieceKind::SqrtSingular { scale: 1.0 },
                },
                Piece {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    kind: PieceKind::SqrtSingular { scale: 1.0 },
                },
            ],
            // the generator takes the value 1 (not f(y)|z|^2) on the null
            // set {y = 0}; a unit additive bound covers it
            1.0,
        ),
        "step" => step(1.0),
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

/// `alpha * 1_{[0,1)}`.
pub fn step(alpha: f64) -> Result<GeneratorSpec> {
    GeneratorSpec::supported(0.0, 1.0, PieceKind::Const(alpha), 0.0)
}

/// `1_{[a,b)} - 1_{[c,d)}` for `a < b <= c < d`.
pub fn h2(a: f64, b: f64, c: f64, d: f64) -> Result<GeneratorSpec> {
    if !(a < b && b <= c && c < d) {
        return Err(Error::Domain(
            "h2 intervals must satisfy a < b <= c < d".into(),
        ));
    }
    GeneratorSpec::new(
        vec![
            Piece {
                lo: f64::NEG_INFINITY,
                hi: a,
                kind: PieceKind::Const(0.0),
            },
            Piece {
                lo: a,
                hi: b,
                kind: PieceKind::Const(1.0),
            },
            Piece {
                lo: b,
                hi: c,
                kind: PieceKind::Const(0.0),
            },
            Piece {
                lo: c,
                hi: d,
                kind: PieceKind::Const(-1.0),
            },
            Piece {
                lo: d,
                hi: f64::INFINITY,
                kind: PieceKind::Const(0.0),
            },
        ],
        0.0,
    )
}
