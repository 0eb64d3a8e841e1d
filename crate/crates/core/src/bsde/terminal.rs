//! Terminal conditions: a continuous map with declared polynomial growth,
//! applied to the terminal Brownian or forward state.

use serde::{Deserialize, Serialize};

/// The terminal map. Each variant declares where it fails to be smooth and
/// can push kink locations backwards through itself, which keeps the
/// Gaussian quadrature of compositions spectrally accurate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiFn {
    Identity,
    Square,
    /// `max(x, 0)`
    Relu,
    Abs,
    Const { value: f64 },
    /// `scale * x + shift`
    Affine { scale: f64, shift: f64 },
}

impl PsiFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PsiFn::Identity => x,
            PsiFn::Square => x * x,
            PsiFn::Relu => x.max(0.0),
            PsiFn::Abs => x.abs(),
            PsiFn::Const { value } => *value,
            PsiFn::Affine { scale, shift } => scale * x + shift,
        }
    }

    /// Declared polynomial growth degree.
    pub fn growth_degree(&self) -> u32 {
        match self {
            PsiFn::Const { .. } => 0,
            PsiFn::Identity | PsiFn::Relu | PsiFn::Abs | PsiFn::Affine { .. } => 1,
            PsiFn::Square => 2,
        }
    }

    /// Points where the map itself is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            PsiFn::Relu | PsiFn::Abs => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// Solutions of `psi(x) = b`, for pulling composition kinks back into
    /// the state variable.
    pub fn preimages(&self, b: f64) -> Vec<f64> {
        match self {
            PsiFn::Identity => vec![b],
            PsiFn::Square => {
                if b > 0.0 {
                    vec![-b.sqrt(), b.sqrt()]
                } else if b == 0.0 {
                    vec![0.0]
                } else {
                    Vec::new()
                }
            }
            PsiFn::Relu => {
                if b > 0.0 {
                    vec![b]
                } else if b == 0.0 {
                    vec![0.0]
                } else {
                    Vec::new()
                }
            }
            PsiFn::Abs => {
                if b > 0.0 {
                    vec![-b, b]
                } else if b == 0.0 {
                    vec![0.0]
                } else {
                    Vec::new()
                }
            }
            PsiFn::Const { .. } => Vec::new(),
            PsiFn::Affine { scale, shift } => {
                if *scale == 0.0 {
                    Vec::new()
                } else {
                    vec![(b - shift) / scale]
                }
            }
        }
    }
}

/// Which terminal state the map is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    OfBrownian,
    OfForward,
}

/// `xi = psi(W_T)` or `xi = psi(X_T)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TerminalCondition {
    pub kind: TerminalKind,
    pub psi: PsiFn,
}

impl TerminalCondition {
    pub fn of_brownian(psi: PsiFn) -> Self {
        Self {
            kind: TerminalKind::OfBrownian,
            psi,
        }
    }

    pub fn of_forward(psi: PsiFn) -> Self {
        Self {
            kind: TerminalKind::OfForward,
            psi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preimages_cover_the_kinks_of_compositions() {
        assert_eq!(PsiFn::Identity.preimages(1.0), vec![1.0]);
        assert_eq!(PsiFn::Square.preimages(4.0), vec![-2.0, 2.0]);
        assert_eq!(PsiFn::Relu.preimages(-1.0), Vec::<f64>::new());
        assert_eq!(PsiFn::Abs.preimages(3.0), vec![-3.0, 3.0]);
        assert_eq!(
            PsiFn::Affine {
                scale: 2.0,
                shift: 1.0
            }
            .preimages(5.0),
            vec![2.0]
        );
    }

    #[test]
    fn serde_tags() {
        let json = serde_json::to_string(&PsiFn::Relu).unwrap();
        assert_eq!(json, r#"{"kind":"relu"}"#);
        let back: PsiFn = serde_json::from_str(r#"{"kind":"const","value":2.5}"#).unwrap();
        assert_eq!(back, PsiFn::Const { value: 2.5 });
    }
}
