//! Binary container for off-line encoded shards.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      8 bytes  "MDOTSHRD"
//! version    u32
//! m          u32
//! workers    u32
//! worker_id  u32
//! beta       f64
//! rows (N)   u64
//! width      u64
//! entries    rows × width f64, row-major
//! ```

use std::io::{Read, Write};

use super::{CodeConfig, EncodedShard};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

pub const SHARD_MAGIC: [u8; 8] = *b"MDOTSHRD";
pub const SHARD_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShardHeader {
    pub version: u32,
    pub m: u32,
    pub workers: u32,
    pub worker_id: u32,
    pub beta: f64,
    pub rows: u64,
    pub width: u64,
}

fn to_u32(x: usize, what: &str) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::Format(format!("{what} {x} does not fit in u32")))
}

pub fn write_shard<T: Real, W: Write>(out: &mut W, shard: &EncodedShard<T>, cfg: &CodeConfig<T>) -> Result<()> {
    out.write_all(&SHARD_MAGIC)?;
    out.write_all(&SHARD_VERSION.to_le_bytes())?;
    out.write_all(&to_u32(cfg.m(), "m")?.to_le_bytes())?;
    out.write_all(&to_u32(cfg.workers(), "worker count")?.to_le_bytes())?;
    out.write_all(&to_u32(shard.worker_id, "worker id")?.to_le_bytes())?;
    out.write_all(&shard.beta.as_f64().to_le_bytes())?;
    out.write_all(&(shard.matrix.rows() as u64).to_le_bytes())?;
    out.write_all(&(shard.matrix.cols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(shard.matrix.entries().len() * 8);
    for x in shard.matrix.entries() {
        buf.extend_from_slice(&x.as_f64().to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated shard header: {e}")))?;
    Ok(b)
}

pub fn read_shard<T: Real, R: Read>(input: &mut R) -> Result<(ShardHeader, EncodedShard<T>)> {
    let magic: [u8; 8] = read_array(input)?;
    if magic != SHARD_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let header = ShardHeader {
        version: u32::from_le_bytes(read_array(input)?),
        m: u32::from_le_bytes(read_array(input)?),
        workers: u32::from_le_bytes(read_array(input)?),
        worker_id: u32::from_le_bytes(read_array(input)?),
        beta: f64::from_le_bytes(read_array(input)?),
        rows: u64::from_le_bytes(read_array(input)?),
        width: u64::from_le_bytes(read_array(input)?),
    };
    if header.version != SHARD_VERSION {
        return Err(Error::Format(format!("unsupported version {}", header.version)));
    }
    let count = header
        .rows
        .checked_mul(header.width)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| Error::Format("shard dimensions overflow".into()))?;
    let mut raw = Vec::new();
    input.take(count as u64 * 8).read_to_end(&mut raw)?;
    if raw.len() != count * 8 {
        return Err(Error::Format(format!(
            "truncated shard body: {} of {} bytes",
            raw.len(),
            count * 8
        )));
    }
    let entries = raw
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let matrix = DenseMatrix::new(header.rows as usize, header.width as usize, entries)?;
    let shard = EncodedShard {
        worker_id: header.worker_id as usize,
        beta: T::lit(header.beta),
        matrix,
    };
    Ok((header, shard))
}
