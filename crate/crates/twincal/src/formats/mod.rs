//! Versioned little-endian binary formats: `TWC1` paired-twin datasets and
//! `TWNN` parameter checkpoints.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

mod twc1;
mod twnn;

pub use twc1::{read_dataset_from, write_dataset_to, Dataset, FLAG_CHANNELS, TWC1_MAGIC, TWC1_VERSION};
pub use twnn::{read_checkpoint_from, write_checkpoint_to, TWNN_MAGIC, TWNN_VERSION};

#[derive(Debug)]
pub enum FormatError {
    Io(io::Error),
    Schema(String),
}

impl From<io::Error> for FormatError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            FormatError::Schema("file is truncated".into())
        } else {
            FormatError::Io(e)
        }
    }
}

fn attach(path: &Path, e: FormatError) -> Error {
    match e {
        FormatError::Io(source) => Error::io(path, source),
        FormatError::Schema(reason) => Error::schema(path, reason),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Fails unless `r` is exhausted.
fn expect_end(r: &mut impl Read) -> std::result::Result<(), FormatError> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(FormatError::Schema("trailing bytes after last record".into())),
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = open(path)?;
    read_dataset_from(&mut r)
        .and_then(|d| expect_end(&mut r).map(|_| d))
        .map_err(|e| attach(path, e))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = create(path)?;
    write_dataset_to(&mut w, data)
        .and_then(|_| w.flush().map_err(FormatError::from))
        .map_err(|e| attach(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<twincal_core::nn::ParamStore> {
    let mut r = open(path)?;
    read_checkpoint_from(&mut r)
        .and_then(|s| expect_end(&mut r).map(|_| s))
        .map_err(|e| attach(path, e))
}

pub fn write_checkpoint(path: &Path, store: &twincal_core::nn::ParamStore) -> Result<()> {
    let mut w = create(path)?;
    write_checkpoint_to(&mut w, store)
        .and_then(|_| w.flush().map_err(FormatError::from))
        .map_err(|e| attach(path, e))
}
