use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use twincal_core::nn::ParamStore;

use super::FormatError;

pub const TWNN_MAGIC: &[u8; 4] = b"TWNN";
pub const TWNN_VERSION: u32 = 1;

const MAX_NAME: u32 = 4096;
const MAX_RANK: u32 = 8;

/// Writes every tensor (trainable or not) in name order.
pub fn write_checkpoint_to(w: &mut impl Write, store: &ParamStore) -> Result<(), FormatError> {
    w.write_all(TWNN_MAGIC)?;
    w.write_u32::<LE>(TWNN_VERSION)?;
    w.write_u64::<LE>(store.len() as u64)?;
    for id in store.ids() {
        let name = store.name(id).as_bytes();
        w.write_u32::<LE>(name.len() as u32)?;
        w.write_all(name)?;
        let dims = store.dims(id);
        w.write_u32::<LE>(dims.len() as u32)?;
        for &d in dims {
            w.write_u64::<LE>(d as u64)?;
        }
        for &v in store.value(id) {
            w.write_f64::<LE>(v)?;
        }
    }
    Ok(())
}

/// Batch-norm running statistics and metadata come back non-trainable.
pub fn read_checkpoint_from(r: &mut impl Read) -> Result<ParamStore, FormatError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TWNN_MAGIC {
        return Err(FormatError::Schema("not a TWNN checkpoint (bad magic)".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != TWNN_VERSION {
        return Err(FormatError::Schema(format!("unsupported TWNN version {version}")));
    }
    let count = r.read_u64::<LE>()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = r.read_u32::<LE>()?;
        if len == 0 || len > MAX_NAME {
            return Err(FormatError::Schema(format!("bad tensor name length {len}")));
        }
        let mut name = vec![0u8; len as usize];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| FormatError::Schema("tensor name is not UTF-8".into()))?;
        let rank = r.read_u32::<LE>()?;
        if rank > MAX_RANK {
            return Err(FormatError::Schema(format!("{name}: rank {rank} too large")));
        }
        let dims: Vec<usize> = (0..rank)
            .map(|_| r.read_u64::<LE>().map(|d| d as usize))
            .collect::<Result<_, _>>()?;
        let size = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&s| s <= 1 << 28)
            .ok_or_else(|| FormatError::Schema(format!("{name}: tensor too large")))?;
        let mut data = Vec::with_capacity(size);
        for _ in 0..size {
            data.push(r.read_f64::<LE>()?);
        }
        let trainable = !(name.contains("running_") || name.starts_with("meta."));
        store
            .register(&name, &dims, data, trainable)
            .map_err(|e| FormatError::Schema(e.to_string()))?;
    }
    Ok(store)
}
