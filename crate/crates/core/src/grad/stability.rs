use std::io::Write;

use crate::neuron::{NetworkSpec, Trajectory};

use super::{step_jacobian, GradMode, Surrogate};

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub step: usize,
    /// Flat neuron index across all layers.
    pub neuron: usize,
    pub jacobian: f64,
    /// `|prod_{i <= step} dv(i)/dv(i-1)|` for this neuron.
    pub running_product: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn build(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|b| lo + b as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &x in values {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub max_abs_jacobian: f64,
    pub max_running_product: f64,
    /// `(step, neuron)` pairs where `|dv(t)/dv(t-1)| > 1`.
    pub flagged: Vec<(usize, usize)>,
    pub u_histogram: Histogram,
}

pub const HISTOGRAM_BINS: usize = 40;

/// Per-step temporal Jacobians of every neuron along a recorded trajectory.
///
/// # Panics
/// If the trajectory is empty.
pub fn stability_report(
    net: &NetworkSpec,
    traj: &Trajectory,
    surrogate: &Surrogate,
    mode: GradMode,
) -> StabilityReport {
    assert!(
        !traj.is_empty(),
        "stability report needs a nonempty trajectory"
    );
    let n = net.num_neurons();
    let mut running = vec![1.0f64; n];
    let mut rows = Vec::with_capacity(traj.len() * n);
    let mut flagged = Vec::new();
    let mut us = Vec::with_capacity(traj.len() * n);
    let mut max_j = 0.0f64;
    let mut max_p = 0.0f64;

    for (t, step) in traj.steps.iter().enumerate() {
        let mut flat = 0;
        for (l, rec) in step.layers.iter().enumerate() {
            let spiking = net.layer_spiking(l);
            for i in 0..rec.u.len() {
                let p = &net.params[l][i];
                let j = if spiking {
                    step_jacobian(rec.u[i], rec.s[i], p, surrogate, mode)
                } else {
                    1.0 - p.decay()
                };
                running[flat] *= j.abs();
                if j.abs() > 1.0 {
                    flagged.push((t, flat));
                }
                max_j = max_j.max(j.abs());
                max_p = max_p.max(running[flat]);
                us.push(rec.u[i]);
                rows.push(StabilityRow {
                    step: t,
                    neuron: flat,
                    jacobian: j,
                    running_product: running[flat],
                    u: rec.u[i],
                });
                flat += 1;
            }
        }
    }

    StabilityReport {
        rows,
        max_abs_jacobian: max_j,
        max_running_product: max_p,
        flagged,
        u_histogram: Histogram::build(&us, HISTOGRAM_BINS),
    }
}

impl StabilityReport {
    /// Writes `step,neuron,jacobian,running_product,u`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,neuron,jacobian,running_product,u")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.step, r.neuron, r.jacobian, r.running_product, r.u
            )?;
        }
        Ok(())
    }
}
