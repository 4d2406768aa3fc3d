//! Network checkpoint format: "RCKP" magic, version, tensor count, then
//! self-describing tensors (length-prefixed name, rank, dims, 32-bit LE
//! payload). Loading validates every name and shape against the network
//! the caller says the file should hold.

use std::collections::BTreeMap;
use std::path::Path;

use crate::camera::LEVELS;
use crate::error::{Error, Result};
use crate::net::OmegaNet;
use crate::tensor::{Shape, Tensor};

const MAGIC: &[u8; 4] = b"RCKP";
const VERSION: u32 = 1;

pub fn write_checkpoint(path: &Path, net: &OmegaNet<f32>) -> Result<()> {
    let tensors = net.named_tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, tensor) in tensors {
        let name_bytes = name.as_bytes();
        out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(name_bytes);
        match tensor.shape() {
            Shape::Chw { c, h, w } => {
                out.push(3);
                for d in [c, h, w] {
                    out.extend_from_slice(&(d as u32).to_le_bytes());
                }
            }
            Shape::Flat { n } => {
                out.push(1);
                out.extend_from_slice(&(n as u32).to_le_bytes());
            }
        }
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::parse(
                self.path,
                format!(
                    "truncated while reading {what}: need {n} bytes at byte offset {}, file has {}",
                    self.offset,
                    self.bytes.len()
                ),
            ));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Reads every tensor in the file, in file order.
pub fn read_checkpoint_tensors(path: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { path, bytes: &bytes, offset: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::parse(path, "bad magic, not a checkpoint file"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::parse(path, format!("unsupported version {version}")));
    }
    let count = r.u32("tensor count")? as usize;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let name_len = r.u16(&format!("name length of tensor {i}"))? as usize;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| Error::parse(path, format!("tensor {i} name is not UTF-8")))?
            .to_string();
        let rank = r.take(1, "rank")?[0];
        let shape = match rank {
            1 => Shape::flat(r.u32(&format!("dims of {name}"))? as usize),
            3 => {
                let c = r.u32(&format!("dims of {name}"))? as usize;
                let h = r.u32(&format!("dims of {name}"))? as usize;
                let w = r.u32(&format!("dims of {name}"))? as usize;
                Shape::chw(c, h, w)
            }
            other => {
                return Err(Error::parse(
                    path,
                    format!("tensor {name}: unsupported rank {other}"),
                ))
            }
        };
        let payload = r.take(4 * shape.numel(), &format!("payload of {name}"))?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if r.offset != bytes.len() {
        return Err(Error::parse(
            path,
            format!("{} trailing bytes after the last tensor", bytes.len() - r.offset),
        ));
    }
    Ok(out)
}

/// Loads a checkpoint into a network of the given architecture. The file
/// must carry exactly the architecture's tensors, each with its exact
/// shape — extras, omissions, and size mismatches are all rejected.
pub fn load_network(
    path: &Path,
    descriptor_dim: usize,
    widths: [usize; LEVELS],
) -> Result<OmegaNet<f32>> {
    let tensors = read_checkpoint_tensors(path)?;
    let mut net = OmegaNet::<f32>::zeros(descriptor_dim, widths)?;
    let expected: BTreeMap<String, Shape> = net
        .named_tensors()
        .iter()
        .map(|(name, t)| (name.clone(), t.shape()))
        .collect();
    let mut remaining = expected.clone();
    for (name, tensor) in tensors {
        let want = remaining.remove(&name).ok_or_else(|| {
            if expected.contains_key(&name) {
                Error::parse(path, format!("tensor {name} appears twice"))
            } else {
                Error::parse(path, format!("unknown tensor {name} for this architecture"))
            }
        })?;
        if tensor.shape() != want {
            return Err(Error::shape(
                format!("checkpoint tensor {name}"),
                want.to_string(),
                tensor.shape().to_string(),
            ));
        }
        net.assign_named(&name, tensor)?;
    }
    if let Some((name, _)) = remaining.into_iter().next() {
        return Err(Error::parse(path, format!("checkpoint is missing tensor {name}")));
    }
    Ok(net)
}
