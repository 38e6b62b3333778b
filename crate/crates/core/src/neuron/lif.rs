use serde::{Deserialize, Serialize};

use super::{NeuronParams, SimError};

/// Post-reset membrane potentials and last-step spikes of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerState {
    pub v: Vec<f64>,
    pub s: Vec<bool>,
}

impl LayerState {
    /// All neurons at their resting potential, silent.
    pub fn at_rest(params: &[NeuronParams]) -> Self {
        Self {
            v: params.iter().map(|p| p.v_rest).collect(),
            s: vec![false; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// One Euler step of a layer of LIF neurons.
///
/// `input_current` is the summed synaptic current `sum_i w_i s_i` in amperes.
/// Returns the new state and the pre-reset potential `u`. With `spiking =
/// false` the threshold is treated as infinite (non-spiking readout).
pub fn lif_step(
    state: &LayerState,
    input_current: &[f64],
    params: &[NeuronParams],
    spiking: bool,
) -> Result<(LayerState, Vec<f64>), SimError> {
    let mut next = state.clone();
    let mut u = vec![0.0; state.len()];
    lif_step_in_place(&mut next, input_current, params, spiking, &mut u)?;
    Ok((next, u))
}

pub(crate) fn lif_step_in_place(
    state: &mut LayerState,
    input_current: &[f64],
    params: &[NeuronParams],
    spiking: bool,
    u_out: &mut [f64],
) -> Result<(), SimError> {
    let n = state.len();
    if input_current.len() != n {
        return Err(SimError::Dimension {
            expected: n,
            got: input_current.len(),
            context: "input current",
        });
    }
    if params.len() != n {
        return Err(SimError::Dimension {
            expected: n,
            got: params.len(),
            context: "neuron parameter table",
        });
    }
    for i in 0..n {
        let p = &params[i];
        let current = input_current[i];
        if !current.is_finite() {
            return Err(SimError::NonFiniteInput { neuron: i });
        }
        p.check_finite(i)?;
        let k = p.decay();
        let v_prev = state.v[i];
        let u = v_prev + k * (p.r_mem() * current - v_prev + p.v_rest);
        let s = spiking && u >= p.v_th;
        u_out[i] = u;
        state.s[i] = s;
        state.v[i] = if s { p.v_rest } else { u };
    }
    Ok(())
}
