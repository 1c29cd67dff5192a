//! Binary frame files: little-endian `u64` frame length `n`, `u64` frame
//! count, then the frames as consecutive blocks of `n` little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::CliError;

const HEADER: usize = 16;

/// Writes the columns of `frames` as frames.
pub fn write_frames(path: &Path, frames: &DMatrix<f64>) -> Result<(), CliError> {
    std::fs::write(path, encode_frames(frames)).map_err(|e| CliError::output(path, e))
}

pub fn encode_frames(frames: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * frames.len());
    out.extend_from_slice(&(frames.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(frames.ncols() as u64).to_le_bytes());
    for x in frames.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Reads a frame file into an `n × count` matrix.
pub fn read_frames(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let file = File::open(path).map_err(|e| CliError::input(path, e))?;
    let len = file.metadata().map_err(|e| CliError::input(path, e))?.len();
    let mut r = BufReader::new(file);
    let mut word = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8], CliError> {
        r.read_exact(&mut word).map_err(|e| CliError::input(path, e))?;
        Ok(word)
    };
    if len < HEADER as u64 {
        return Err(CliError::input(path, "truncated header"));
    }
    let n = u64::from_le_bytes(next(&mut r)?);
    let count = u64::from_le_bytes(next(&mut r)?);
    let expected = n
        .checked_mul(count)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(HEADER as u64));
    if expected != Some(len) {
        return Err(CliError::input(path, format!("header says {n} × {count} values but the file has {len} bytes")));
    }
    let mut data = Vec::with_capacity((n * count) as usize);
    for _ in 0..n * count {
        let x = f64::from_le_bytes(next(&mut r)?);
        if !x.is_finite() {
            return Err(CliError::input(path, "non-finite value"));
        }
        data.push(x);
    }
    Ok(DMatrix::from_vec(n as usize, count as usize, data))
}
