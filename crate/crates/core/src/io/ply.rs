//! PLY 1.0 point-cloud files: ascii or little-endian binary, a vertex
//! element with float x, y, z, and optionally 8-bit red, green, blue.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::scene::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLittleEndian,
}

struct Header {
    encoding: Encoding,
    vertex_count: usize,
    has_rgb: bool,
    /// Byte offset of the first vertex record.
    body_start: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let bad = |msg: String| Error::parse(path, msg);
    let mut offset = 0usize;
    let mut next_line = || -> Result<(String, usize)> {
        let rest = &bytes[offset..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(path, "header never reaches end_header"))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::parse(path, "header is not valid UTF-8"))?
            .trim_end_matches('\r')
            .to_string();
        offset += end + 1;
        Ok((line, offset))
    };

    let (magic, _) = next_line()?;
    if magic.trim() != "ply" {
        return Err(bad("missing \"ply\" magic line".into()));
    }

    let mut encoding: Option<Encoding> = None;
    let mut vertex_count: Option<usize> = None;
    // Properties of the element currently being declared; only the vertex
    // element may carry any.
    let mut in_vertex_element = false;
    let mut properties: Vec<(String, String)> = Vec::new();
    let body_start;
    loop {
        let (line, after) = next_line()?;
        let mut words = line.split_whitespace();
        match words.next() {
            None | Some("comment") | Some("obj_info") => continue,
            Some("format") => {
                let kind = words.next().unwrap_or("");
                let version = words.next().unwrap_or("");
                if version != "1.0" {
                    return Err(bad(format!("unsupported version {version:?}")));
                }
                encoding = Some(match kind {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLittleEndian,
                    other => return Err(bad(format!("unsupported format {other:?}"))),
                });
            }
            Some("element") => {
                let name = words.next().unwrap_or("");
                if name != "vertex" {
                    return Err(bad(format!("unsupported element {name:?}")));
                }
                if vertex_count.is_some() {
                    return Err(bad("duplicate vertex element".into()));
                }
                let count: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| bad(format!("bad vertex count in {line:?}")))?;
                vertex_count = Some(count);
                in_vertex_element = true;
            }
            Some("property") => {
                if !in_vertex_element {
                    return Err(bad(format!("property outside the vertex element: {line:?}")));
                }
                let ty = words.next().unwrap_or("").to_string();
                let name = words.next().unwrap_or("").to_string();
                properties.push((ty, name));
            }
            Some("end_header") => {
                body_start = after;
                break;
            }
            Some(other) => return Err(bad(format!("unrecognized header keyword {other:?}"))),
        }
    }

    let encoding = encoding.ok_or_else(|| bad("missing format line".into()))?;
    let vertex_count = vertex_count.ok_or_else(|| bad("missing vertex element".into()))?;

    // The only layouts understood: float x/y/z, optionally followed by
    // uchar red/green/blue. Anything else is named in the rejection.
    let expect: [(&str, &str); 6] = [
        ("float", "x"),
        ("float", "y"),
        ("float", "z"),
        ("uchar", "red"),
        ("uchar", "green"),
        ("uchar", "blue"),
    ];
    if properties.len() != 3 && properties.len() != 6 {
        let got: Vec<String> = properties.iter().map(|(t, n)| format!("{t} {n}")).collect();
        return Err(bad(format!(
            "vertex element must declare x y z (optionally red green blue), found [{}]",
            got.join(", ")
        )));
    }
    for ((ty, name), (want_ty, want_name)) in properties.iter().zip(expect.iter()) {
        if ty != want_ty || name != want_name {
            return Err(bad(format!("unsupported property \"{ty} {name}\"")));
        }
    }

    Ok(Header {
        encoding,
        vertex_count,
        has_rgb: properties.len() == 6,
        body_start,
    })
}

/// Reads a point cloud, returning per-point RGB when the file carries it.
pub fn read_ply(path: &Path) -> Result<(PointCloud, Option<Vec<[u8; 3]>>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &bytes)?;
    let n = header.vertex_count;
    let mut positions = Vec::with_capacity(n);
    let mut colors = header.has_rgb.then(|| Vec::with_capacity(n));

    match header.encoding {
        Encoding::Ascii => {
            let body = std::str::from_utf8(&bytes[header.body_start..])
                .map_err(|_| Error::parse(path, "ascii body is not valid UTF-8"))?;
            let mut lines = body.lines();
            for i in 0..n {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::parse(path, format!("vertex {i} missing: file ends early")))?;
                let mut words = line.split_whitespace();
                let mut coord = |axis: &str| -> Result<f64> {
                    words
                        .next()
                        .and_then(|w| w.parse::<f32>().ok())
                        .map(f64::from)
                        .ok_or_else(|| {
                            Error::parse(path, format!("vertex {i}: bad or missing {axis} value"))
                        })
                };
                let (x, y, z) = (coord("x")?, coord("y")?, coord("z")?);
                positions.push(Vector3::new(x, y, z));
                if let Some(colors) = colors.as_mut() {
                    let mut channel = |name: &str| -> Result<u8> {
                        words
                            .next()
                            .and_then(|w| w.parse::<u8>().ok())
                            .ok_or_else(|| {
                                Error::parse(path, format!("vertex {i}: bad or missing {name} value"))
                            })
                    };
                    colors.push([channel("red")?, channel("green")?, channel("blue")?]);
                }
            }
        }
        Encoding::BinaryLittleEndian => {
            let stride = 12 + if header.has_rgb { 3 } else { 0 };
            let need = n * stride;
            let body = &bytes[header.body_start..];
            if body.len() < need {
                return Err(Error::parse(
                    path,
                    format!(
                        "truncated vertex data: need {need} bytes, file ends at byte offset {}",
                        bytes.len()
                    ),
                ));
            }
            for i in 0..n {
                let rec = &body[i * stride..(i + 1) * stride];
                let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
                positions.push(Vector3::new(f(0) as f64, f(1) as f64, f(2) as f64));
                if let Some(colors) = colors.as_mut() {
                    colors.push([rec[12], rec[13], rec[14]]);
                }
            }
        }
    }

    Ok((PointCloud::new(positions)?, colors))
}

/// Writes a point cloud; `colors`, when given, must have one RGB triple per
/// point. Positions are stored at 32-bit precision, as the format demands.
pub fn write_ply(
    path: &Path,
    cloud: &PointCloud,
    colors: Option<&[[u8; 3]]>,
    binary: bool,
) -> Result<()> {
    if let Some(c) = colors {
        if c.len() != cloud.len() {
            return Err(Error::validation(format!(
                "{} colors for {} points",
                c.len(),
                cloud.len()
            )));
        }
    }
    let mut header = String::new();
    header.push_str("ply\n");
    header.push_str(if binary {
        "format binary_little_endian 1.0\n"
    } else {
        "format ascii 1.0\n"
    });
    let _ = writeln!(header, "element vertex {}", cloud.len());
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    for (i, p) in cloud.positions().iter().enumerate() {
        let (x, y, z) = (p.x as f32, p.y as f32, p.z as f32);
        if binary {
            out.extend_from_slice(&x.to_le_bytes());
            out.extend_from_slice(&y.to_le_bytes());
            out.extend_from_slice(&z.to_le_bytes());
            if let Some(c) = colors {
                out.extend_from_slice(&c[i]);
            }
        } else {
            let mut line = format!("{x} {y} {z}");
            if let Some(c) = colors {
                let _ = write!(line, " {} {} {}", c[i][0], c[i][1], c[i][2]);
            }
            line.push('\n');
            out.extend_from_slice(line.as_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
