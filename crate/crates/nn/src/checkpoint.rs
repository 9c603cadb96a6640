//! Versioned binary checkpoint: magic, version, JSON header, then named
//! little-endian `f32` blobs.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

const MAGIC: &[u8; 4] = b"NGCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}, expected {VERSION}")]
    Version(u32),
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("checkpoint has no blob named {0}")]
    MissingBlob(String),
    #[error("blob {name} has {got} values, expected {expected}")]
    BlobSize { name: String, expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: serde_json::Value,
    pub blobs: Vec<(String, Vec<f32>)>,
}

impl Checkpoint {
    pub fn new(header: serde_json::Value) -> Self {
        Self {
            header,
            blobs: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, data: Vec<f32>) {
        self.blobs.push((name.to_string(), data));
    }

    pub fn blob(&self, name: &str) -> Result<&[f32], CheckpointError> {
        self.blobs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
            .ok_or_else(|| CheckpointError::MissingBlob(name.to_string()))
    }

    /// Blob that must hold exactly `len` values.
    pub fn blob_sized(&self, name: &str, len: usize) -> Result<&[f32], CheckpointError> {
        let b = self.blob(name)?;
        if b.len() != len {
            return Err(CheckpointError::BlobSize {
                name: name.to_string(),
                expected: len,
                got: b.len(),
            });
        }
        Ok(b)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.blobs.len() as u32).to_le_bytes())?;
        for (name, data) in &self.blobs {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(data.len() as u64).to_le_bytes())?;
            let mut buf = Vec::with_capacity(data.len() * 4);
            for v in data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let hlen = read_u64(&mut r)? as usize;
        let mut header = vec![0u8; hlen];
        r.read_exact(&mut header)?;
        let header = serde_json::from_slice(&header)?;
        let count = read_u32(&mut r)?;
        let mut blobs = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let nlen = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; nlen];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| CheckpointError::BadMagic)?;
            let len = read_u64(&mut r)? as usize;
            let mut raw = vec![0u8; len * 4];
            r.read_exact(&mut raw)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            blobs.push((name, data));
        }
        Ok(Self { header, blobs })
    }

    /// Writes through a temporary file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            self.write_to(&mut f)?;
            f.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut c = Checkpoint::new(serde_json::json!({"network": {"a": 1}}));
        c.push("w", vec![1.5, -0.0, f32::MIN_POSITIVE, 3.0e-39, f32::NAN]);
        c.push("empty", vec![]);
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(&buf[..]).unwrap();
        assert_eq!(back.header, c.header);
        for ((n1, d1), (n2, d2)) in back.blobs.iter().zip(&c.blobs) {
            assert_eq!(n1, n2);
            let b1: Vec<u32> = d1.iter().map(|v| v.to_bits()).collect();
            let b2: Vec<u32> = d2.iter().map(|v| v.to_bits()).collect();
            assert_eq!(b1, b2);
        }
        assert!(Checkpoint::read_from(&buf[..buf.len() - 1]).is_err());
        buf[4] = 9;
        assert!(matches!(Checkpoint::read_from(&buf[..]), Err(CheckpointError::Version(9))));
    }
}
