//! Polygamma functions for positive arguments.

const SHIFT_UNTIL: f64 = 6.0;

/// Digamma `psi(x)` for `x > 0`; NaN otherwise.
///
/// Shifts the argument above 6 with `psi(x) = psi(x + 1) - 1/x`, then sums the
/// asymptotic series through the `x^-14` term.
pub fn digamma(mut x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return if x == f64::INFINITY {
            f64::INFINITY
        } else {
            f64::NAN
        };
    }
    let mut acc = 0.0;
    while x <= SHIFT_UNTIL {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0
                    - r * (1.0 / 240.0
                        - r * (1.0 / 132.0 - r * (691.0 / 32760.0 - r * (1.0 / 12.0)))))));
    acc + x.ln() - 0.5 / x - series
}

/// Trigamma `psi'(x)` for `x > 0`; NaN otherwise.
pub fn trigamma(mut x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return if x == f64::INFINITY { 0.0 } else { f64::NAN };
    }
    let mut acc = 0.0;
    while x <= SHIFT_UNTIL {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    let series = 1.0 / 6.0
        - r * (1.0 / 30.0
            - r * (1.0 / 42.0
                - r * (1.0 / 30.0 - r * (5.0 / 66.0 - r * (691.0 / 2730.0 - r * (7.0 / 6.0))))));
    acc + 1.0 / x + 0.5 * r + series * r / x
}

pub use statrs::function::gamma::ln_gamma;
