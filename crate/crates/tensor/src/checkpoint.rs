//! Binary checkpoint format for named tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "UAVNTNSR"
//! version  u32      CHECKPOINT_VERSION
//! count    u32      number of tensors
//! repeated count times:
//!   name_len u32, name (UTF-8)
//!   ndim     u32, dims u64 × ndim
//!   payload  f32 × prod(dims)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"UAVNTNSR";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_NAME_LEN: usize = 4096;
const MAX_NDIM: usize = 8;

fn bad(msg: impl Into<String>) -> TensorError {
    TensorError::Checkpoint(msg.into())
}

pub fn write_tensors<W: Write>(mut w: W, tensors: &[(String, &Tensor)]) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| bad("truncated file"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| bad("truncated file"))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic header"));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "unsupported version {} (expected {})",
            version, CHECKPOINT_VERSION
        )));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        if name_len > MAX_NAME_LEN {
            return Err(bad("tensor name too long"));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|_| bad("truncated name"))?;
        let name = String::from_utf8(name).map_err(|_| bad("name is not UTF-8"))?;
        let ndim = read_u32(&mut r)? as usize;
        if ndim > MAX_NDIM {
            return Err(bad(format!("{}: too many dimensions", name)));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u64(&mut r)? as usize);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad(format!("{}: shape overflows", name)))?;
        let mut bytes = Vec::new();
        let got = r
            .by_ref()
            .take((numel as u64).saturating_mul(4))
            .read_to_end(&mut bytes)?;
        if got != numel * 4 {
            return Err(bad(format!("{}: truncated payload", name)));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        out.push((name, Tensor::new(&shape, data)?));
    }
    Ok(out)
}

pub fn save(path: impl AsRef<Path>, tensors: &[(String, &Tensor)]) -> Result<()> {
    let file = File::create(path)?;
    write_tensors(BufWriter::new(file), tensors)
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor)>> {
    let file = File::open(path)?;
    read_tensors(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_magic_and_version() {
        let t = Tensor::ones(&[2]);
        let mut buf = Vec::new();
        write_tensors(&mut buf, &[("w".into(), &t)]).unwrap();

        let mut wrong_magic = buf.clone();
        wrong_magic[0] = b'X';
        assert!(read_tensors(wrong_magic.as_slice()).is_err());

        let mut wrong_version = buf.clone();
        wrong_version[8] = 99;
        let err = read_tensors(wrong_version.as_slice()).unwrap_err();
        assert!(err.to_string().contains("unsupported version"));

        let truncated = &buf[..buf.len() - 2];
        assert!(read_tensors(truncated).is_err());
    }

    #[test]
    fn header_is_little_endian() {
        let t = Tensor::new(&[1], vec![1.0]).unwrap();
        let mut buf = Vec::new();
        write_tensors(&mut buf, &[("a".into(), &t)]).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        assert_eq!(&buf[8..12], &[1, 0, 0, 0]);
        assert_eq!(&buf[buf.len() - 4..], &1.0f32.to_le_bytes());
    }
}
