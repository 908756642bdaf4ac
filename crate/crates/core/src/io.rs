//! Binary trajectory and sparse-series files.
//!
//! Trajectory layout (little endian): `CWTJ`, `u32` version, `u64` rows,
//! `u32` dims, `f64` effective step, row-major `f64` data, then `(min, max)`
//! per dimension. A sparse file appends `MASK`, sparsity, multiplicative and
//! additive noise levels (`f64`), the observation seed (`u64`), the bit count
//! (`u64`) and the row-major mask packed least-significant bit first.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dynsys::TrajectoryMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::observe::{Mask, ObservationSpec, SparseSeries};

const TRAJ_MAGIC: &[u8; 4] = b"CWTJ";
const MASK_MAGIC: &[u8; 4] = b"MASK";
const VERSION: u32 = 1;
const MAX_ELEMENTS: u64 = 1 << 31;

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("file truncated".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(get::<8, _>(r)?))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(get::<8, _>(r)?))
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(get::<4, _>(r)?))
}

pub fn write_trajectory<W: Write>(w: &mut W, t: &TrajectoryMatrix) -> Result<()> {
    w.write_all(TRAJ_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(t.len() as u64).to_le_bytes())?;
    w.write_all(&(t.dim() as u32).to_le_bytes())?;
    put_f64(w, t.dt_effective)?;
    for v in t.data.as_slice() {
        put_f64(w, *v)?;
    }
    for d in 0..t.dim() {
        let (lo, hi) = t.norm_stats.get(d).copied().unwrap_or((0.0, 1.0));
        put_f64(w, lo)?;
        put_f64(w, hi)?;
    }
    Ok(())
}

pub fn read_trajectory<R: Read>(r: &mut R) -> Result<TrajectoryMatrix> {
    if &get::<4, _>(r)? != TRAJ_MAGIC {
        return Err(Error::Format("not a trajectory file".into()));
    }
    let v = get_u32(r)?;
    if v != VERSION {
        return Err(Error::Format(format!("unsupported trajectory version {v}")));
    }
    let rows = get_u64(r)?;
    let dims = get_u32(r)? as u64;
    if rows.checked_mul(dims).is_none_or(|n| n > MAX_ELEMENTS) {
        return Err(Error::Format("trajectory too large".into()));
    }
    let dt = get_f64(r)?;
    let (rows, dims) = (rows as usize, dims as usize);
    let mut data = Vec::with_capacity(rows * dims);
    for _ in 0..rows * dims {
        data.push(get_f64(r)?);
    }
    let mut norm_stats = Vec::with_capacity(dims);
    for _ in 0..dims {
        norm_stats.push((get_f64(r)?, get_f64(r)?));
    }
    Ok(TrajectoryMatrix {
        data: Matrix::from_vec(rows, dims, data),
        dt_effective: dt,
        norm_stats,
    })
}

pub fn write_sparse<W: Write>(w: &mut W, s: &SparseSeries) -> Result<()> {
    let t = TrajectoryMatrix {
        data: s.values.clone(),
        dt_effective: s.dt_effective,
        norm_stats: s.norm_stats.clone(),
    };
    write_trajectory(w, &t)?;
    w.write_all(MASK_MAGIC)?;
    put_f64(w, s.spec.sparsity)?;
    put_f64(w, s.spec.mult_noise_sigma)?;
    put_f64(w, s.spec.add_noise_sigma)?;
    w.write_all(&s.spec.seed.to_le_bytes())?;
    let bits = s.mask.as_slice();
    w.write_all(&(bits.len() as u64).to_le_bytes())?;
    let mut packed = vec![0u8; bits.len().div_ceil(8)];
    for (i, b) in bits.iter().enumerate() {
        if *b {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    w.write_all(&packed)?;
    Ok(())
}

pub fn read_sparse<R: Read>(r: &mut R) -> Result<SparseSeries> {
    let t = read_trajectory(r)?;
    if &get::<4, _>(r)? != MASK_MAGIC {
        return Err(Error::Format("missing mask section".into()));
    }
    let spec = ObservationSpec {
        sparsity: get_f64(r)?,
        mult_noise_sigma: get_f64(r)?,
        add_noise_sigma: get_f64(r)?,
        seed: get_u64(r)?,
    };
    let n = get_u64(r)? as usize;
    if n != t.len() * t.dim() {
        return Err(Error::Format(format!(
            "mask holds {n} bits for {} values",
            t.len() * t.dim()
        )));
    }
    let mut packed = vec![0u8; n.div_ceil(8)];
    r.read_exact(&mut packed)
        .map_err(|_| Error::Format("file truncated".into()))?;
    let bits = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
    Ok(SparseSeries {
        mask: Mask::from_vec(t.len(), t.dim(), bits),
        values: t.data,
        spec,
        dt_effective: t.dt_effective,
        norm_stats: t.norm_stats,
    })
}

pub fn save_trajectory(path: &Path, t: &TrajectoryMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trajectory(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<TrajectoryMatrix> {
    read_trajectory(&mut BufReader::new(File::open(path)?))
}

pub fn save_sparse(path: &Path, s: &SparseSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_sparse(&mut w, s)?;
    w.flush()?;
    Ok(())
}

pub fn load_sparse(path: &Path) -> Result<SparseSeries> {
    read_sparse(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys;
    use crate::observe::apply_observation;

    #[test]
    fn trajectory_roundtrip() {
        let t = dynsys::generate(&dynsys::find("rossler").unwrap(), 123, 4).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &t).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 4 + 8 + 123 * 3 * 8 + 6 * 8);
        assert_eq!(&buf[..4], b"CWTJ");
        let back = read_trajectory(&mut buf.as_slice()).unwrap();
        assert_eq!(back.data, t.data);
        assert_eq!(back.norm_stats, t.norm_stats);
        assert_eq!(back.dt_effective, t.dt_effective);
    }

    #[test]
    fn sparse_roundtrip() {
        let t = dynsys::generate(&dynsys::find("sprott_3").unwrap(), 37, 4).unwrap();
        let s = apply_observation(&t, &ObservationSpec::new(0.6, 9).with_mult_noise(0.05)).unwrap();
        let mut buf = Vec::new();
        write_sparse(&mut buf, &s).unwrap();
        let back = read_sparse(&mut buf.as_slice()).unwrap();
        assert_eq!(back.mask, s.mask);
        assert_eq!(back.values, s.values);
        assert_eq!(back.spec, s.spec);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let t = dynsys::generate(&dynsys::find("sprott_3").unwrap(), 10, 4).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &t).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_trajectory(&mut bad.as_slice()), Err(Error::Format(_))));
        buf.truncate(buf.len() - 1);
        assert!(matches!(read_trajectory(&mut buf.as_slice()), Err(Error::Format(_))));
        let mut no_mask = Vec::new();
        write_trajectory(&mut no_mask, &t).unwrap();
        assert!(read_sparse(&mut no_mask.as_slice()).is_err());
    }
}
