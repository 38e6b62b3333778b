//! Flattening of trainable network quantities into an optimizer vector.
//!
//! Neuron genomes are laid out layer by layer; inside a layer each trainable
//! property occupies a contiguous block of `n` values in [`Property::ALL`]
//! order. Resistance enters in units of `DEFAULT_R_MEM` so that all
//! coordinates share a unit scale.

use serde::{Deserialize, Serialize};

use super::{NetworkSpec, SimError};

pub type Genome = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    TauM,
    VTh,
    VRest,
    RMem,
}

impl Property {
    pub const ALL: [Property; 4] = [
        Property::TauM,
        Property::VTh,
        Property::VRest,
        Property::RMem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::TauM => "tau_m",
            Property::VTh => "v_th",
            Property::VRest => "v_rest",
            Property::RMem => "r_mem",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Which neuron properties the optimizer may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainableMask {
    pub tau_m: bool,
    pub v_th: bool,
    pub v_rest: bool,
    pub r_mem: bool,
}

impl Default for TrainableMask {
    fn default() -> Self {
        Self::ALL
    }
}

impl TrainableMask {
    pub const ALL: Self = Self {
        tau_m: true,
        v_th: true,
        v_rest: true,
        r_mem: true,
    };
    pub const NONE: Self = Self {
        tau_m: false,
        v_th: false,
        v_rest: false,
        r_mem: false,
    };

    /// Bit `i` set means `Property::ALL[i]` is trainable.
    pub fn from_bits(bits: u8) -> Self {
        Self {
            tau_m: bits & 1 != 0,
            v_th: bits & 2 != 0,
            v_rest: bits & 4 != 0,
            r_mem: bits & 8 != 0,
        }
    }

    pub fn bits(self) -> u8 {
        self.tau_m as u8
            | (self.v_th as u8) << 1
            | (self.v_rest as u8) << 2
            | (self.r_mem as u8) << 3
    }

    pub fn contains(self, p: Property) -> bool {
        match p {
            Property::TauM => self.tau_m,
            Property::VTh => self.v_th,
            Property::VRest => self.v_rest,
            Property::RMem => self.r_mem,
        }
    }

    pub fn properties(self) -> impl Iterator<Item = Property> {
        Property::ALL.into_iter().filter(move |&p| self.contains(p))
    }

    pub fn count(self) -> usize {
        self.bits().count_ones() as usize
    }

    /// Four-character 0/1 string in property order, e.g. `"1001"` for tau_m and R.
    pub fn to_bit_string(self) -> String {
        Property::ALL
            .iter()
            .map(|&p| if self.contains(p) { '1' } else { '0' })
            .collect()
    }

    pub fn parse_bit_string(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.len() != 4 {
            return None;
        }
        let mut bits = 0u8;
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '1' => bits |= 1 << i,
                '0' => {}
                _ => return None,
            }
        }
        Some(Self::from_bits(bits))
    }
}

pub fn genome_len(net: &NetworkSpec) -> usize {
    net.trainable.count() * net.num_neurons()
}

pub(crate) fn get_coord(p: &super::NeuronParams, prop: Property) -> f64 {
    match prop {
        Property::TauM => p.tau_raw,
        Property::VTh => p.v_th,
        Property::VRest => p.v_rest,
        Property::RMem => p.resistance,
    }
}

fn set_coord(p: &mut super::NeuronParams, prop: Property, x: f64) {
    match prop {
        Property::TauM => p.tau_raw = x,
        Property::VTh => p.v_th = x,
        Property::VRest => p.v_rest = x,
        Property::RMem => p.resistance = x,
    }
}

pub fn genome_pack(net: &NetworkSpec) -> Genome {
    let mut g = Vec::with_capacity(genome_len(net));
    for layer in &net.params {
        for prop in net.trainable.properties() {
            g.extend(layer.iter().map(|p| get_coord(p, prop)));
        }
    }
    g
}

/// Returns a copy of `net` with the trainable properties taken from `genome`.
pub fn genome_unpack(net: &NetworkSpec, genome: &[f64]) -> Result<NetworkSpec, SimError> {
    let mut out = net.clone();
    genome_unpack_into(&mut out, genome)?;
    Ok(out)
}

pub(crate) fn genome_unpack_into(net: &mut NetworkSpec, genome: &[f64]) -> Result<(), SimError> {
    let expected = genome_len(net);
    if genome.len() != expected {
        return Err(SimError::Dimension {
            expected,
            got: genome.len(),
            context: "genome length",
        });
    }
    let mask = net.trainable;
    let mut pos = 0;
    for layer in net.params.iter_mut() {
        let n = layer.len();
        for prop in mask.properties() {
            for (p, &x) in layer.iter_mut().zip(&genome[pos..pos + n]) {
                set_coord(p, prop, x);
            }
            pos += n;
        }
    }
    Ok(())
}

pub fn weights_len(net: &NetworkSpec) -> usize {
    net.weights.iter().map(|w| w.rows() * w.cols()).sum()
}

pub fn weights_pack(net: &NetworkSpec) -> Genome {
    net.weights
        .iter()
        .flat_map(|w| w.as_slice().iter().copied())
        .collect()
}

pub fn weights_unpack(net: &NetworkSpec, genome: &[f64]) -> Result<NetworkSpec, SimError> {
    let expected = weights_len(net);
    if genome.len() != expected {
        return Err(SimError::Dimension {
            expected,
            got: genome.len(),
            context: "weight genome length",
        });
    }
    let mut out = net.clone();
    let mut pos = 0;
    for w in out.weights.iter_mut() {
        let n = w.rows() * w.cols();
        w.as_mut_slice().copy_from_slice(&genome[pos..pos + n]);
        pos += n;
    }
    Ok(out)
}
