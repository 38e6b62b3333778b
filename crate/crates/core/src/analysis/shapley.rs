//! Exact Shapley attribution over the four neuron properties.
//!
//! Coalitions are indexed by [`TrainableMask::bits`]: bit 0 is tau_m, bit 1
//! v_th, bit 2 v_rest, bit 3 R.

use serde::{Deserialize, Serialize};

use crate::neuron::{Property, TrainableMask};

use super::AnalysisError;

pub const PLAYERS: usize = 4;
pub const COALITIONS: usize = 1 << PLAYERS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    /// Per property, in [`Property::ALL`] order.
    pub values: [f64; PLAYERS],
    /// `v(S)` indexed by coalition bits.
    pub table: [f64; COALITIONS],
    /// `sum(values) - (v(grand) - v(empty))`.
    pub efficiency_residual: f64,
    /// Standard deviations of the inputs, carried through unchanged.
    pub input_sd: Option<[f64; COALITIONS]>,
}

impl ShapleyReport {
    /// Values divided by `v(grand) - v(empty)`.
    pub fn normalized(&self) -> [f64; PLAYERS] {
        let total = self.table[COALITIONS - 1] - self.table[0];
        self.values.map(|v| v / total)
    }

    /// Property with the largest value (first on ties).
    pub fn top(&self) -> Property {
        let mut best = 0;
        for i in 1..PLAYERS {
            if self.values[i] > self.values[best] {
                best = i;
            }
        }
        Property::ALL[best]
    }
}

/// Human-readable coalition, e.g. `{tau_m, v_rest}`.
pub fn coalition_name(bits: usize) -> String {
    let names: Vec<&str> = TrainableMask::from_bits(bits as u8)
        .properties()
        .map(Property::name)
        .collect();
    format!("{{{}}}", names.join(", "))
}

/// All orderings of `0..PLAYERS`.
fn orderings() -> Vec<[usize; PLAYERS]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..PLAYERS {
        for b in 0..PLAYERS {
            for c in 0..PLAYERS {
                for d in 0..PLAYERS {
                    let o = [a, b, c, d];
                    let distinct = (0..PLAYERS).all(|i| (i + 1..PLAYERS).all(|j| o[i] != o[j]));
                    if distinct {
                        out.push(o);
                    }
                }
            }
        }
    }
    out
}

/// Shapley values as the average marginal contribution over all 24 orderings.
///
/// Every coalition must be present; the error names the first missing one.
pub fn shapley_exact(table: &[Option<f64>; COALITIONS]) -> Result<ShapleyReport, AnalysisError> {
    let mut v = [0.0; COALITIONS];
    for (bits, entry) in table.iter().enumerate() {
        v[bits] = entry.ok_or_else(|| AnalysisError::MissingCoalition(coalition_name(bits)))?;
        if !v[bits].is_finite() {
            return Err(AnalysisError::NonFinite { index: bits });
        }
    }
    let orders = orderings();
    let mut values = [0.0; PLAYERS];
    for order in &orders {
        let mut coalition = 0usize;
        for &p in order {
            let with = coalition | 1 << p;
            values[p] += v[with] - v[coalition];
            coalition = with;
        }
    }
    for x in values.iter_mut() {
        *x /= orders.len() as f64;
    }
    let efficiency_residual = values.iter().sum::<f64>() - (v[COALITIONS - 1] - v[0]);
    Ok(ShapleyReport {
        values,
        table: v,
        efficiency_residual,
        input_sd: None,
    })
}

/// Table from `(mask, value)` pairs; coalitions not listed stay missing.
pub fn coalition_table(entries: &[(TrainableMask, f64)]) -> [Option<f64>; COALITIONS] {
    let mut t = [None; COALITIONS];
    for (m, x) in entries {
        t[m.bits() as usize] = Some(*x);
    }
    t
}

/// Published HalfCheetah ablation rewards `(mask bits as "tau_m v_th v_rest R", mean, sd)`
/// for the 15 nonempty trainable-property sets.
pub const HALFCHEETAH_ABLATION: [(&str, f64, f64); 15] = [
    ("1000", 3967.0, 171.0),
    ("0100", 101.0, 24.0),
    ("0010", 3544.0, 236.0),
    ("0001", 3264.0, 528.0),
    ("1100", 3110.0, 749.0),
    ("1010", 3887.0, 637.0),
    ("1001", 3460.0, 331.0),
    ("0110", 3335.0, 248.0),
    ("0101", 2679.0, 406.0),
    ("0011", 3587.0, 193.0),
    ("1110", 3924.0, 342.0),
    ("1101", 3724.0, 472.0),
    ("1011", 3982.0, 319.0),
    ("0111", 3214.0, 204.0),
    ("1111", 4221.0, 413.0),
];

/// Shapley report of [`HALFCHEETAH_ABLATION`] with the given empty-coalition value.
pub fn halfcheetah_report(empty_value: f64) -> ShapleyReport {
    let mut table = [None; COALITIONS];
    let mut sd = [0.0; COALITIONS];
    table[0] = Some(empty_value);
    for (bits, mean, s) in HALFCHEETAH_ABLATION {
        let m = TrainableMask::parse_bit_string(bits)
            .expect("valid literal")
            .bits() as usize;
        table[m] = Some(mean);
        sd[m] = s;
    }
    let mut r = shapley_exact(&table).expect("complete table");
    r.input_sd = Some(sd);
    r
}
