use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::neuron::NetworkSpec;

use super::{ExperimentConfig, ExperimentError};

/// Bumped whenever a column of an emitted CSV changes.
pub const CURVES_SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| ExperimentError::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = std::fs::File::create(&tmp).map_err(|e| ExperimentError::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| ExperimentError::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| ExperimentError::io(path, e))
}

/// Serializes `rows` as CSV with a header taken from the field names.
pub(crate) fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| ExperimentError::Failed(format!("csv: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| ExperimentError::Failed(format!("csv: {e}")))
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    atomic_write(path, &csv_bytes(rows)?)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| ExperimentError::Failed(e.to_string()))?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Hex SHA-256 of the canonical TOML form of `cfg`.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct GenomeRow {
    layer: usize,
    neuron: usize,
    tau_m_ms: f64,
    v_th: f64,
    v_rest: f64,
    r_ohm: f64,
}

/// Per-neuron dump `layer,neuron,tau_m_ms,v_th,v_rest,r_ohm` of every LIF layer.
pub fn genome_csv(net: &NetworkSpec) -> Result<Vec<u8>, ExperimentError> {
    let rows: Vec<GenomeRow> = net
        .params
        .iter()
        .enumerate()
        .flat_map(|(l, layer)| {
            layer.iter().enumerate().map(move |(i, p)| GenomeRow {
                layer: l,
                neuron: i,
                tau_m_ms: p.tau_m(net.delta_t) * 1e3,
                v_th: p.v_th,
                v_rest: p.v_rest,
                r_ohm: p.r_mem(),
            })
        })
        .collect();
    csv_bytes(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub task: String,
    pub optimizer: String,
    pub config_sha256: String,
    pub seed: u64,
    pub schema_version: u32,
    pub crate_version: String,
    pub threads: usize,
    pub wall_time_s: f64,
    /// Training episodes (or examples) consumed.
    pub episodes: u64,
    pub trainable_params: usize,
    pub summary: serde_json::Value,
}
