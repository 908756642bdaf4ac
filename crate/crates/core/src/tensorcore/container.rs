//! Binary container for named tensors.
//!
//! Layout (little endian): magic `CWTC`, `u32` version, `u32` count, then for
//! each tensor `u32` name length, UTF-8 name, `u32` rank, `u64` dims, and
//! the `f64` payload.

use std::io::{Read, Write};

use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CWTC";
const VERSION: u32 = 1;

pub fn write_tensors<W: Write>(w: &mut W, items: &[(String, Tensor)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(items.len() as u32).to_le_bytes())?;
    for (name, t) in items {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for d in t.shape() {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_tensors<R: Read>(r: &mut R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a tensor container".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let count = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let nlen = read_u32(r)? as usize;
        if nlen > 4096 {
            return Err(Error::Format("tensor name too long".into()));
        }
        let mut nb = vec![0u8; nlen];
        r.read_exact(&mut nb)?;
        let name = String::from_utf8(nb).map_err(|_| Error::Format("tensor name not UTF-8".into()))?;
        let rank = read_u32(r)? as usize;
        if rank == 0 || rank > 3 {
            return Err(Error::Format(format!("tensor {name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(r)? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, d| a.checked_mul(*d))
            .filter(|n| *n <= 1 << 31)
            .ok_or_else(|| Error::Format(format!("tensor {name} too large")))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_bits(read_u64(r)?));
        }
        out.push((name, Tensor::from_vec(&shape, data)?));
    }
    Ok(out)
}

/// Looks up a tensor by name in a decoded container.
pub fn lookup<'a>(items: &'a [(String, Tensor)], name: &str) -> Result<&'a Tensor> {
    items
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
}

/// Reads a scalar stored under `name`.
pub fn lookup_scalar(items: &[(String, Tensor)], name: &str) -> Result<f64> {
    lookup(items, name).map(Tensor::item)
}
