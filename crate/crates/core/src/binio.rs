//! Little-endian helpers shared by the binary model and embedding formats.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Each id as a u32 byte length followed by its UTF-8 bytes.
pub fn write_vocab(w: &mut impl Write, ids: &[String]) -> std::io::Result<()> {
    for id in ids {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
    }
    Ok(())
}

pub fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated file: {e}")))
}

pub fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    read_exact(r, &mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_vocab(r: &mut impl Read, n: usize) -> Result<Vec<String>> {
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let len = read_u32(r)? as usize;
        let mut buf = vec![0u8; len];
        read_exact(r, &mut buf)?;
        ids.push(String::from_utf8(buf).map_err(|_| Error::Format("item id is not UTF-8".into()))?);
    }
    Ok(ids)
}

