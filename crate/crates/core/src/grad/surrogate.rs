use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    /// Triangle of half-width `v_th` and height `1 / v_th`.
    #[default]
    Rectangular,
    /// Derivative of `atan(pi/2 * alpha * x) / pi + 1/2`.
    Arctan,
    /// Derivative of `NonzeroSign(x) * ln(|alpha x| + 1)`.
    LogNonzeroSign,
}

/// Smooth stand-in for the derivative of the Heaviside spike function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub kind: SurrogateKind,
    /// Steepness; ignored by the rectangular form, whose width is the neuron's own threshold.
    pub alpha: f64,
}

impl Default for Surrogate {
    fn default() -> Self {
        Self::rectangular()
    }
}

impl Surrogate {
    pub fn rectangular() -> Self {
        Self {
            kind: SurrogateKind::Rectangular,
            alpha: 1.0,
        }
    }

    pub fn arctan(alpha: f64) -> Self {
        assert!(alpha > 0.0, "surrogate alpha must be positive");
        Self {
            kind: SurrogateKind::Arctan,
            alpha,
        }
    }

    pub fn log_nonzero_sign(alpha: f64) -> Self {
        assert!(alpha > 0.0, "surrogate alpha must be positive");
        Self {
            kind: SurrogateKind::LogNonzeroSign,
            alpha,
        }
    }

    /// `g'(x)` where `x = u - v_th`.
    #[inline]
    pub fn derivative(&self, x: f64, v_th: f64) -> f64 {
        match self.kind {
            SurrogateKind::Rectangular => {
                if v_th <= 0.0 {
                    return 0.0;
                }
                (v_th - x.abs()).max(0.0) / (v_th * v_th)
            }
            SurrogateKind::Arctan => {
                let z = 0.5 * PI * self.alpha * x;
                0.5 * self.alpha / (1.0 + z * z)
            }
            SurrogateKind::LogNonzeroSign => self.alpha / (self.alpha * x.abs() + 1.0),
        }
    }

    /// The smooth function whose derivative is [`Surrogate::derivative`].
    pub fn primitive(&self, x: f64, v_th: f64) -> f64 {
        match self.kind {
            SurrogateKind::Rectangular => {
                if v_th <= 0.0 {
                    return if x >= 0.0 { 1.0 } else { 0.0 };
                }
                let h = 2.0 * v_th * v_th;
                if x <= -v_th {
                    0.0
                } else if x <= 0.0 {
                    (v_th + x).powi(2) / h
                } else if x < v_th {
                    1.0 - (v_th - x).powi(2) / h
                } else {
                    1.0
                }
            }
            SurrogateKind::Arctan => (0.5 * PI * self.alpha * x).atan() / PI + 0.5,
            SurrogateKind::LogNonzeroSign => nonzero_sign(x) * (self.alpha * x.abs()).ln_1p(),
        }
    }
}

/// `sign(x)` with `sign(0) = +1`.
#[inline]
pub fn nonzero_sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}
