//! Binary checkpoint of an [`EsState`].
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size     field
//! 0       8        magic "HSNNCKPT"
//! 8       4        u32 version (1)
//! 12      4        u32 reserved (0)
//! 16      8        u64 generation
//! 24      8        u64 seed
//! 32      8        u64 dim
//! 40      8*dim    f64 center
//! ...     8*dim    f64 sigma
//! ```

use std::io::{Read, Write};

use super::{EsError, EsState};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HSNNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint<W: Write>(state: &EsState, mut w: W) -> Result<(), EsError> {
    if state.sigma.len() != state.center.len() {
        return Err(EsError::Dimension {
            expected: state.center.len(),
            got: state.sigma.len(),
        });
    }
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&state.generation.to_le_bytes())?;
    w.write_all(&state.seed.to_le_bytes())?;
    w.write_all(&(state.center.len() as u64).to_le_bytes())?;
    for x in state.center.iter().chain(&state.sigma) {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, EsError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| EsError::Checkpoint("truncated header".into()))?;
    Ok(u64::from_le_bytes(b))
}

pub fn load_checkpoint<R: Read>(mut r: R) -> Result<EsState, EsError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| EsError::Checkpoint("truncated header".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(EsError::Checkpoint("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)
        .map_err(|_| EsError::Checkpoint("truncated header".into()))?;
    let version = u32::from_le_bytes(b4);
    if version != CHECKPOINT_VERSION {
        return Err(EsError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    r.read_exact(&mut b4)
        .map_err(|_| EsError::Checkpoint("truncated header".into()))?;
    let generation = read_u64(&mut r)?;
    let seed = read_u64(&mut r)?;
    let dim = read_u64(&mut r)? as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 16 * dim {
        return Err(EsError::Checkpoint(format!(
            "expected {} payload bytes, found {}",
            16 * dim,
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let (center, sigma) = values.split_at(dim);
    if center.iter().chain(sigma).any(|x| !x.is_finite()) || sigma.iter().any(|&s| s <= 0.0) {
        return Err(EsError::Checkpoint(
            "non-finite center or non-positive sigma".into(),
        ));
    }
    Ok(EsState {
        center: center.to_vec(),
        sigma: sigma.to_vec(),
        generation,
        seed,
    })
}
