//! Heterogeneous spiking neural networks with fixed random weights.
//!
//! Modules:
//! - [`neuron`]: LIF dynamics, feedforward simulation, genome packing.
//! - [`grad`]: surrogate-gradient BPTT, an explicit Jacobian-product oracle,
//!   stability diagnostics and REINFORCE.
//! - [`es`]: evolution strategies (plain ES and PGPE) with deterministic
//!   parallel fitness evaluation.
//! - [`envs`]: memory-length T-maze, CartPole, IDX image classification.
//! - [`analysis`]: gamma/lognormal fitting, Shapley attribution, firing rates.
//! - [`experiment`]: configuration and experiment runners used by the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod analysis;
pub mod envs;
pub mod es;
pub mod experiment;
pub mod grad;
pub mod neuron;
