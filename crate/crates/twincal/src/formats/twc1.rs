use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use twincal_core::calibration::DftReport;
use twincal_core::{Channel, Complex64, Vec3};

use super::FormatError;

pub const TWC1_MAGIC: &[u8; 4] = b"TWC1";
pub const TWC1_VERSION: u32 = 1;
/// Both complex channels are stored after the weights.
pub const FLAG_CHANNELS: u32 = 1;

/// Paired-twin records sharing one codebook size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub records: Vec<DftReport>,
}

impl Dataset {
    pub fn has_channels(&self) -> bool {
        !self.records.is_empty()
            && self
                .records
                .iter()
                .all(|r| r.h_baseline.is_some() && r.h_target.is_some())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn write_channel(w: &mut impl Write, h: &Channel) -> std::io::Result<()> {
    for c in h.as_slice() {
        w.write_f64::<LE>(c.re)?;
        w.write_f64::<LE>(c.im)?;
    }
    Ok(())
}

fn read_channel(r: &mut impl Read, n: usize) -> Result<Channel, FormatError> {
    let mut h = Vec::with_capacity(n);
    for _ in 0..n {
        let re = r.read_f64::<LE>()?;
        let im = r.read_f64::<LE>()?;
        h.push(Complex64::new(re, im));
    }
    Ok(Channel(h))
}

pub fn write_dataset_to(w: &mut impl Write, data: &Dataset) -> Result<(), FormatError> {
    let channels = data.has_channels();
    let partial = data.records.iter().any(|r| r.h_baseline.is_some() || r.h_target.is_some());
    if partial && !channels {
        return Err(FormatError::Schema("channels must be present on every record or none".into()));
    }
    for (i, r) in data.records.iter().enumerate() {
        r.validate(data.n)
            .map_err(|reason| FormatError::Schema(format!("record {i}: {reason}")))?;
    }
    w.write_all(TWC1_MAGIC)?;
    w.write_u32::<LE>(TWC1_VERSION)?;
    w.write_u32::<LE>(data.n as u32)?;
    w.write_u32::<LE>(if channels { FLAG_CHANNELS } else { 0 })?;
    w.write_u64::<LE>(data.records.len() as u64)?;
    for r in &data.records {
        for v in [r.position.x, r.position.y, r.position.z] {
            w.write_f64::<LE>(v)?;
        }
        for v in r.z_baseline.iter().chain(&r.z_target) {
            w.write_f64::<LE>(*v)?;
        }
        if channels {
            write_channel(w, r.h_baseline.as_ref().expect("checked"))?;
            write_channel(w, r.h_target.as_ref().expect("checked"))?;
        }
    }
    Ok(())
}

pub fn read_dataset_from(r: &mut impl Read) -> Result<Dataset, FormatError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TWC1_MAGIC {
        return Err(FormatError::Schema("not a TWC1 dataset (bad magic)".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != TWC1_VERSION {
        return Err(FormatError::Schema(format!("unsupported TWC1 version {version}")));
    }
    let n = r.read_u32::<LE>()? as usize;
    let flags = r.read_u32::<LE>()?;
    if flags & !FLAG_CHANNELS != 0 {
        return Err(FormatError::Schema(format!("unknown flag bits {flags:#x}")));
    }
    if n == 0 {
        return Err(FormatError::Schema("N must be positive".into()));
    }
    let channels = flags & FLAG_CHANNELS != 0;
    let count = r.read_u64::<LE>()?;
    let mut records = Vec::with_capacity(count.min(1 << 16) as usize);
    for i in 0..count {
        let position = Vec3::new(r.read_f64::<LE>()?, r.read_f64::<LE>()?, r.read_f64::<LE>()?);
        let mut read_vec = || -> Result<Vec<f64>, FormatError> {
            (0..n).map(|_| Ok(r.read_f64::<LE>()?)).collect()
        };
        let z_baseline = read_vec()?;
        let z_target = read_vec()?;
        let (h_baseline, h_target) = if channels {
            (Some(read_channel(r, n)?), Some(read_channel(r, n)?))
        } else {
            (None, None)
        };
        let rec = DftReport {
            position,
            z_baseline,
            z_target,
            h_baseline,
            h_target,
        };
        rec.validate(n)
            .map_err(|reason| FormatError::Schema(format!("record {i}: {reason}")))?;
        records.push(rec);
    }
    Ok(Dataset { n, records })
}
