#![allow(dead_code)]

use hetsnn::grad::{GradMode, Surrogate};
use hetsnn::neuron::{
    forward, init_weights, NetworkSpec, NeuronParams, ReadoutMode, TrainableMask, Trajectory,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

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

/// Random network of at most `max_neurons` LIF neurons, run for 1..=`max_steps` steps.
pub fn random_case(rng: &mut ChaCha8Rng, max_neurons: usize, max_steps: usize) -> GradCase {
    let input = rng.random_range(1..=3);
    let hidden_layers = rng.random_range(0..=2);
    let mut sizes = vec![input];
    let mut budget = max_neurons;
    for _ in 0..hidden_layers {
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
        for x in w.as_mut_slice() {
            *x *= 2.5;
        }
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
    let mut net = NetworkSpec::new(sizes.clone(), weights, params).unwrap();
    net.readout = if rng.random_bool(0.5) {
        ReadoutMode::SpikeCount
    } else {
        ReadoutMode::MembranePotential
    };
    net.trainable = TrainableMask::from_bits(rng.random_range(1..16));
    net.input_gain = rng.random_range(0.5..2.0);

    let steps = rng.random_range(1..=max_steps);
    let inputs: Vec<Vec<f64>> = (0..steps)
        .map(|_| (0..input).map(|_| 0.8 + 1.5 * normal(rng)).collect())
        .collect();
    let (_, traj) = forward(&net, &inputs).unwrap();
    let out = net.output_dim();
    let loss_grads = (0..steps)
        .map(|_| (0..out).map(|_| normal(rng)).collect())
        .collect();
    let surrogate = match rng.random_range(0..3) {
        0 => Surrogate::rectangular(),
        1 => Surrogate::arctan([0.5, 1.0, 2.0, 4.0][rng.random_range(0..4)]),
        _ => Surrogate::log_nonzero_sign([0.5, 1.0, 2.0, 4.0][rng.random_range(0..4)]),
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

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}
