use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::analysis::{
    firing_stats, fit_gamma, fit_lognormal, gamma_log_likelihood, lognormal_log_likelihood,
    read_coalition_csv, sample_neurons, sample_skewness, shapley_exact, write_firing_csv,
    write_shapley_csv, AnalysisError, FiringTable, FitResult, ShapleyReport,
};
use crate::grad::{backward, jacobian_product_oracle, step_jacobian, GradMode, Surrogate};
use crate::neuron::{
    forward, init_weights, NetworkSpec, NeuronParams, ReadoutMode, TrainableMask, Trajectory,
};

use super::io::{atomic_write, write_csv};
use super::train::load_datasets;
use super::{ExperimentConfig, ExperimentError};

/// One fitted family for one input in `fit.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub source: String,
    pub distribution: String,
    pub shape: f64,
    pub scale: f64,
    pub log_likelihood: f64,
    pub n: usize,
    pub skewness: f64,
    pub converged: bool,
    pub degenerate: bool,
}

impl FitRow {
    fn new(source: &str, f: &FitResult, skewness: f64) -> Self {
        Self {
            source: source.into(),
            distribution: f.family.name().into(),
            shape: f.shape,
            scale: f.scale,
            log_likelihood: f.log_likelihood,
            n: f.n,
            skewness,
            converged: f.converged,
            degenerate: f.degenerate,
        }
    }
}

#[derive(Serialize)]
struct HistRow {
    source: String,
    bin_left: f64,
    bin_right: f64,
    count: usize,
    density: f64,
    gamma_pdf: f64,
    lognormal_pdf: f64,
}

/// Reads one numeric column of a CSV.
///
/// With a header row, `column` names the column (default `tau_m_ms` when
/// present, else the first) and `layer` keeps only rows of that layer. A file
/// without a header is read from its first column.
fn read_column(
    path: &Path,
    column: Option<&str>,
    layer: Option<usize>,
) -> Result<Vec<f64>, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut records = rd.records().enumerate().peekable();
    let mut col = 0;
    let mut layer_col = None;
    if let Some((_, Ok(first))) = records.peek() {
        if first.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            let names: Vec<&str> = first.iter().collect();
            let want = column.unwrap_or(if names.contains(&"tau_m_ms") {
                "tau_m_ms"
            } else {
                names[0]
            });
            col = names
                .iter()
                .position(|n| *n == want)
                .ok_or_else(|| AnalysisError::Parse {
                    line: 1,
                    message: format!("no column {want:?}"),
                })?;
            layer_col = names.iter().position(|n| *n == "layer");
            records.next();
        } else if column.is_some() {
            return Err(AnalysisError::Parse {
                line: 1,
                message: "a column name needs a header row".into(),
            }
            .into());
        }
    }
    if layer.is_some() && layer_col.is_none() {
        return Err(AnalysisError::Parse {
            line: 1,
            message: "a layer filter needs a `layer` column".into(),
        }
        .into());
    }
    let mut out = Vec::new();
    for (i, rec) in records {
        let rec = rec.map_err(AnalysisError::from)?;
        let line = i + 1;
        let field = |c: usize| -> Result<f64, AnalysisError> {
            let f = rec.get(c).unwrap_or("");
            f.parse::<f64>().map_err(|e| AnalysisError::Parse {
                line,
                message: format!("{f:?}: {e}"),
            })
        };
        if let (Some(want), Some(lc)) = (layer, layer_col) {
            if field(lc)? != want as f64 {
                continue;
            }
        }
        out.push(field(col)?);
    }
    Ok(out)
}

/// Fits gamma and lognormal distributions to each input and writes
/// `fit.csv` and `fit_hist.csv` (histograms with both fitted densities) into `out`.
pub fn fitdist(
    inputs: &[&Path],
    column: Option<&str>,
    layer: Option<usize>,
    bins: usize,
    out: &Path,
) -> Result<Vec<FitRow>, ExperimentError> {
    let bins = bins.max(1);
    let mut rows = Vec::new();
    let mut hist = Vec::new();
    for path in inputs {
        let source = path.display().to_string();
        let x = read_column(path, column, layer)?;
        let g = fit_gamma(&x)?;
        let l = fit_lognormal(&x)?;
        let skew = sample_skewness(&x);
        rows.push(FitRow::new(&source, &g, skew));
        rows.push(FitRow::new(&source, &l, skew));

        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo {
            (hi - lo) / bins as f64
        } else {
            1.0
        };
        let mut counts = vec![0usize; bins];
        for &v in &x {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
        for (b, &count) in counts.iter().enumerate() {
            let left = lo + b as f64 * width;
            let mid = [left + width / 2.0];
            hist.push(HistRow {
                source: source.clone(),
                bin_left: left,
                bin_right: left + width,
                count,
                density: count as f64 / (x.len() as f64 * width),
                gamma_pdf: gamma_log_likelihood(&mid, g.shape, g.scale).exp(),
                lognormal_pdf: lognormal_log_likelihood(&mid, l.shape, l.scale).exp(),
            });
        }
    }
    write_csv(&out.join("fit.csv"), &rows)?;
    write_csv(&out.join("fit_hist.csv"), &hist)?;
    Ok(rows)
}

/// Shapley values from a `mask,mean[,sd]` CSV. `empty` supplies (or
/// overrides) the value of the empty coalition. Writes `shapley.csv` into `out`.
pub fn shapley_from_csv(
    path: &Path,
    empty: Option<f64>,
    out: &Path,
) -> Result<ShapleyReport, ExperimentError> {
    let f = std::fs::File::open(path).map_err(|e| ExperimentError::io(path, e))?;
    let (mut table, sd) = read_coalition_csv(f)?;
    if let Some(e) = empty {
        table[0] = Some(e);
    }
    let mut report = shapley_exact(&table)?;
    report.input_sd = sd;
    write_shapley_report(&report, out)?;
    Ok(report)
}

/// Writes `shapley.csv` into `out`.
pub fn write_shapley_report(report: &ShapleyReport, out: &Path) -> Result<(), ExperimentError> {
    let mut buf = Vec::new();
    write_shapley_csv(&mut buf, report)?;
    atomic_write(&out.join("shapley.csv"), &buf)
}

/// Per-class firing rates of a trained classification run.
///
/// Loads `network.json` and `config.toml` from `run_dir`, presents the first
/// `per_class` images of every class (test split when configured), samples
/// `neurons` neurons with `seed` and writes `firing.csv` into `out`.
pub fn stats(
    run_dir: &Path,
    per_class: usize,
    neurons: usize,
    seed: u64,
    out: &Path,
) -> Result<FiringTable, ExperimentError> {
    let net_path = run_dir.join("network.json");
    let text = std::fs::read_to_string(&net_path).map_err(|e| ExperimentError::io(&net_path, e))?;
    let net: NetworkSpec = serde_json::from_str(&text)
        .map_err(|e| ExperimentError::Failed(format!("{}: {e}", net_path.display())))?;
    net.validate()?;
    let cfg = ExperimentConfig::load(&run_dir.join("config.toml"))?;
    let data = load_datasets(&cfg)?
        .ok_or_else(|| ExperimentError::Config("stats needs a classification run".into()))?;
    let ds = data.test.as_ref().unwrap_or(&data.train);
    let classes = net.output_dim();
    let mut picked: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for i in 0..ds.len() {
        let c = ds.labels[i] as usize;
        if c < classes && picked[c].len() < per_class {
            picked[c].push(i);
        }
    }
    let steps = cfg.env.classify_steps;
    let groups: Vec<Vec<Trajectory>> = picked
        .iter()
        .map(|idx| {
            idx.iter()
                .map(|&i| forward(&net, &vec![ds.image_normalized(i); steps]).map(|(_, t)| t))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let sample = sample_neurons(net.num_neurons(), neurons, seed);
    let table = firing_stats(&groups, &sample)?;
    let mut buf = Vec::new();
    write_firing_csv(&mut buf, &table)?;
    atomic_write(&out.join("firing.csv"), &buf)?;
    Ok(table)
}

/// Random small network, trajectory and loss gradient for gradient checks.
pub struct GradCase {
    pub net: NetworkSpec,
    pub traj: Trajectory,
    pub loss_grads: Vec<Vec<f64>>,
    pub surrogate: Surrogate,
    pub mode: GradMode,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// A case with at most `max_neurons` LIF neurons over 1..=`max_steps` steps.
pub fn random_grad_case(rng: &mut ChaCha8Rng, max_neurons: usize, max_steps: usize) -> GradCase {
    let input = rng.random_range(1..=3);
    let mut sizes = vec![input];
    let mut budget = max_neurons.max(1);
    for _ in 0..rng.random_range(0..=2) {
        if budget < 2 {
            break;
        }
        let n = rng.random_range(1..=(budget - 1).min(4));
        sizes.push(n);
        budget -= n;
    }
    sizes.push(rng.random_range(1..=budget.min(3)));
    let mut weights = init_weights(&sizes, rng.random());
    for w in weights.iter_mut() {
        w.as_mut_slice().iter_mut().for_each(|x| *x *= 2.5);
    }
    let params = sizes[1..]
        .iter()
        .map(|&n| {
            (0..n)
                .map(|_| NeuronParams {
                    tau_raw: (1.0f64 / 3.0).ln() + 0.6 * normal(rng),
                    v_th: 0.5 + rng.random_range(-0.2..0.3),
                    v_rest: rng.random_range(-0.2..0.2),
                    resistance: rng.random_range(0.5..2.0),
                })
                .collect()
        })
        .collect();
    let mut net = NetworkSpec::new(sizes, weights, params).expect("valid random network");
    net.readout = if rng.random_bool(0.5) {
        ReadoutMode::SpikeCount
    } else {
        ReadoutMode::MembranePotential
    };
    net.trainable = TrainableMask::from_bits(rng.random_range(1..16));
    net.input_gain = rng.random_range(0.5..2.0);
    let steps = rng.random_range(1..=max_steps.max(1));
    let inputs: Vec<Vec<f64>> = (0..steps)
        .map(|_| (0..input).map(|_| 0.8 + 1.5 * normal(rng)).collect())
        .collect();
    let (_, traj) = forward(&net, &inputs).expect("finite inputs");
    let loss_grads = (0..steps)
        .map(|_| (0..net.output_dim()).map(|_| normal(rng)).collect())
        .collect();
    let alpha = [0.5, 1.0, 2.0, 4.0][rng.random_range(0..4)];
    let surrogate = match rng.random_range(0..3) {
        0 => Surrogate::rectangular(),
        1 => Surrogate::arctan(alpha),
        _ => Surrogate::log_nonzero_sign(alpha),
    };
    let mode = if rng.random_bool(0.5) {
        GradMode::Full
    } else {
        GradMode::Detached
    };
    GradCase {
        net,
        traj,
        loss_grads,
        surrogate,
        mode,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub cases: usize,
    /// Largest norm-wise relative error of `backward` against the oracle.
    pub max_rel_err: f64,
    /// Cases above `tolerance`.
    pub failures: usize,
    pub tolerance: f64,
    /// Detached-mode steps whose Jacobian magnitude exceeds `1 - dt/tau_m`.
    pub contraction_violations: usize,
    pub detached_steps: usize,
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// Compares [`backward`] with the Jacobian-product oracle on random cases
/// (at most 8 neurons, 20 steps) and counts detached-mode contraction violations.
pub fn gradcheck(
    cases: usize,
    seed: u64,
    tolerance: f64,
) -> Result<GradCheckReport, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        cases,
        max_rel_err: 0.0,
        failures: 0,
        tolerance,
        contraction_violations: 0,
        detached_steps: 0,
    };
    for _ in 0..cases {
        let c = random_grad_case(&mut rng, 8, 20);
        let fast = backward(&c.net, &c.traj, &c.loss_grads, &c.surrogate, c.mode)?;
        let slow = jacobian_product_oracle(&c.net, &c.traj, &c.loss_grads, &c.surrogate, c.mode)?;
        let mut a = fast.genome.clone();
        a.extend(fast.weights_flat());
        let mut b = slow.genome.clone();
        b.extend(slow.weights_flat());
        let e = rel_err(&a, &b);
        report.max_rel_err = report.max_rel_err.max(e);
        if !(e <= tolerance) {
            report.failures += 1;
        }
        for step in &c.traj.steps {
            for (l, rec) in step.layers.iter().enumerate() {
                if !c.net.layer_spiking(l) {
                    continue;
                }
                for (i, p) in c.net.params[l].iter().enumerate() {
                    let j = step_jacobian(rec.u[i], rec.s[i], p, &c.surrogate, GradMode::Detached);
                    report.detached_steps += 1;
                    if j.abs() > 1.0 - p.decay() {
                        report.contraction_violations += 1;
                    }
                }
            }
        }
    }
    Ok(report)
}
