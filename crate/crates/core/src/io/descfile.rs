//! Descriptor-table binary format: "RDSC" magic, version, row count N,
//! width d, then N·d little-endian 32-bit values row-major. The payload
//! length is exact — no trailing bytes are tolerated.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::DescriptorTable;

const MAGIC: &[u8; 4] = b"RDSC";
const VERSION: u32 = 1;

pub fn write_descriptors(path: &Path, table: &DescriptorTable) -> Result<()> {
    let mut out = Vec::with_capacity(20 + 4 * table.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(table.len() as u64).to_le_bytes());
    out.extend_from_slice(&(table.dim() as u32).to_le_bytes());
    for v in table.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_descriptors(path: &Path) -> Result<DescriptorTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 {
        return Err(Error::parse(
            path,
            format!("header needs 20 bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::parse(path, "bad magic, not a descriptor file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::parse(path, format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let expected = 20 + 4 * n * d;
    if bytes.len() != expected {
        return Err(Error::parse(
            path,
            format!(
                "payload must be exactly {expected} bytes for {n} rows of width {d}, found {}",
                bytes.len()
            ),
        ));
    }
    let values: Vec<f32> = bytes[20..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DescriptorTable::new(d, values)
}
