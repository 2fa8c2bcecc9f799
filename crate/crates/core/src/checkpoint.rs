//! Binary parameter checkpoints.
//!
//! Layout: the magic `DPLS2S01`, then one record per parameter in name
//! order: name length (u32 LE), name bytes, rank (u32 LE), one u64 LE
//! per dimension, then the values as f64 LE. Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::params::ParameterSet;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"DPLS2S01";

pub fn save(params: &ParameterSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(params, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ParameterSet> {
    let mut r = BufReader::new(File::open(path)?);
    read_from(&mut r)
}

pub fn write_to(params: &ParameterSet, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    for (name, p) in params.iter() {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        let shape = p.value.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in p.value.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_from(r: &mut impl Read) -> Result<ParameterSet> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CoreError::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let mut params = ParameterSet::new();
    loop {
        let mut len_buf = [0u8; 4];
        match r.read(&mut len_buf)? {
            0 => break,
            4 => {}
            n => {
                r.read_exact(&mut len_buf[n..])
                    .map_err(|_| CoreError::Checkpoint("truncated record header".into()))?;
            }
        }
        let name_len = u32::from_le_bytes(len_buf) as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|e| CoreError::Checkpoint(format!("parameter name not utf-8: {e}")))?;

        let mut rank_buf = [0u8; 4];
        r.read_exact(&mut rank_buf)?;
        let rank = u32::from_le_bytes(rank_buf) as usize;

        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut dim = [0u8; 8];
            r.read_exact(&mut dim)?;
            shape.push(u64::from_le_bytes(dim) as usize);
        }
        let count: usize = shape.iter().product();
        let mut values = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        params.insert(name, Tensor::new(shape, values)?)?;
    }
    Ok(params)
}

/// FNV-1a hash of a file's bytes; used to assert checkpoint continuity.
pub fn file_hash(path: &Path) -> Result<u64> {
    let bytes = std::fs::read(path)?;
    Ok(bytes_hash(&bytes))
}

pub fn bytes_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{init_uniform, seeded_rng};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = seeded_rng(11, 0);
        let mut params = ParameterSet::new();
        params.insert("enc.w", init_uniform(vec![4, 8], &mut rng)).unwrap();
        params.insert("enc.b", init_uniform(vec![1, 8], &mut rng)).unwrap();
        params.insert("head.0.w", init_uniform(vec![8, 5], &mut rng)).unwrap();

        let mut first = Vec::new();
        write_to(&params, &mut first).unwrap();
        let reloaded = read_from(&mut first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_to(&reloaded, &mut second).unwrap();
        assert_eq!(first, second);

        for (name, p) in params.iter() {
            let q = reloaded.get(name).unwrap();
            assert_eq!(p.value.shape(), q.value.shape());
            for (a, b) in p.value.values().iter().zip(q.value.values()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"NOTMAGIC".to_vec();
        assert!(read_from(&mut bytes.as_slice()).is_err());
    }

    #[test]
    fn preserves_special_values() {
        let mut params = ParameterSet::new();
        params
            .insert("w", Tensor::row(&[0.0, -0.0, 1.5e-300, f64::MIN_POSITIVE]))
            .unwrap();
        let mut buf = Vec::new();
        write_to(&params, &mut buf).unwrap();
        let back = read_from(&mut buf.as_slice()).unwrap();
        let vals = back.get("w").unwrap().value.values().to_vec();
        assert_eq!(vals[1].to_bits(), (-0.0f64).to_bits());
        assert_eq!(vals[2], 1.5e-300);
    }
}
