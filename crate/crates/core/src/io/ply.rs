//! PLY point clouds: ascii and binary little-endian.
//!
//! Only the `vertex` element's `x`, `y`, `z` properties are read; other
//! properties and elements are skipped. Writes use `double` coordinates.

use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(Scalar, String),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body_start: usize,
}

fn parse_header(bytes: &[u8], bad: &dyn Fn(String) -> Error) -> Result<Header> {
    let mut pos = 0;
    let mut next_line = || -> Option<String> {
        if pos >= bytes.len() {
            return None;
        }
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
        let line = String::from_utf8_lossy(&bytes[pos..end]).trim_end_matches('\r').to_string();
        pos = (end + 1).min(bytes.len());
        Some(line)
    };
    if next_line().as_deref() != Some("ply") {
        return Err(bad("missing 'ply' magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line().ok_or_else(|| bad("header has no end_header".into()))?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(bad(format!("unsupported format {other}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad(format!("bad element count {count:?}")))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, _name] => {
                let (c, i) = (Scalar::parse(ct), Scalar::parse(it));
                let el = elements.last_mut().ok_or_else(|| bad("property before element".into()))?;
                match (c, i) {
                    (Some(c), Some(i)) => el.props.push(Property::List(c, i)),
                    _ => return Err(bad(format!("unknown list types {ct} {it}"))),
                }
            }
            ["property", ty, name] => {
                let t = Scalar::parse(ty).ok_or_else(|| bad(format!("unknown type {ty}")))?;
                let el = elements.last_mut().ok_or_else(|| bad("property before element".into()))?;
                el.props.push(Property::Scalar(t, name.to_string()));
            }
            _ => return Err(bad(format!("unrecognized header line {line:?}"))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| bad("missing format line".into()))?,
        elements,
        body_start: pos,
    })
}

fn xyz_slots(el: &Element, bad: &dyn Fn(String) -> Error) -> Result<[usize; 3]> {
    let find = |axis: &str| {
        el.props
            .iter()
            .position(|p| matches!(p, Property::Scalar(_, n) if n == axis))
            .ok_or_else(|| bad(format!("vertex element lacks property {axis}")))
    };
    Ok([find("x")?, find("y")?, find("z")?])
}

pub fn parse_ply(bytes: &[u8], origin: &Path) -> Result<PointCloud> {
    let bad = |reason: String| Error::Ply {
        path: origin.to_path_buf(),
        reason,
    };
    let header = parse_header(bytes, &bad)?;
    let vertex_idx = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| bad("no vertex element".into()))?;
    let slots = xyz_slots(&header.elements[vertex_idx], &bad)?;
    let body = &bytes[header.body_start..];
    let mut points = Vec::new();

    match header.format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| bad("ascii body is not UTF-8".into()))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for (ei, el) in header.elements.iter().enumerate().take(vertex_idx + 1) {
                for row in 0..el.count {
                    let line = lines
                        .next()
                        .ok_or_else(|| bad(format!("{} row {row} missing", el.name)))?;
                    if ei != vertex_idx {
                        continue;
                    }
                    let vals: Vec<&str> = line.split_whitespace().collect();
                    if vals.len() < el.props.len() {
                        return Err(bad(format!("vertex row {row} has {} values", vals.len())));
                    }
                    let mut c = [0.0; 3];
                    for (k, &s) in slots.iter().enumerate() {
                        c[k] = vals[s]
                            .parse()
                            .map_err(|_| bad(format!("vertex row {row}: bad number {:?}", vals[s])))?;
                    }
                    points.push(Point3::new(c[0], c[1], c[2]));
                }
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let mut pos = 0usize;
            let mut take = |n: usize| -> Result<&[u8]> {
                if pos + n > body.len() {
                    return Err(bad("binary body truncated".into()));
                }
                let s = &body[pos..pos + n];
                pos += n;
                Ok(s)
            };
            for (ei, el) in header.elements.iter().enumerate().take(vertex_idx + 1) {
                for _ in 0..el.count {
                    let mut c = [0.0; 3];
                    for (pi, prop) in el.props.iter().enumerate() {
                        match prop {
                            Property::Scalar(t, _) => {
                                let v = t.read_le(take(t.size())?);
                                if ei == vertex_idx {
                                    if let Some(k) = slots.iter().position(|&s| s == pi) {
                                        c[k] = v;
                                    }
                                }
                            }
                            Property::List(ct, it) => {
                                let n = ct.read_le(take(ct.size())?);
                                if !(n >= 0.0) {
                                    return Err(bad("negative list length".into()));
                                }
                                take(n as usize * it.size())?;
                            }
                        }
                    }
                    if ei == vertex_idx {
                        points.push(Point3::new(c[0], c[1], c[2]));
                    }
                }
            }
        }
    }
    PointCloud::new(points).map_err(|e| bad(e.to_string()))
}

pub fn ply_bytes(cloud: &PointCloud, format: PlyFormat) -> Vec<u8> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    )
    .into_bytes();
    match format {
        PlyFormat::Ascii => {
            for p in cloud.points() {
                writeln!(out, "{} {} {}", p.x, p.y, p.z).expect("write to Vec");
            }
        }
        PlyFormat::BinaryLittleEndian => {
            out.reserve(24 * cloud.len());
            for p in cloud.points() {
                for v in [p.x, p.y, p.z] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes, path)
}

pub fn write_ply(path: &Path, cloud: &PointCloud, format: PlyFormat) -> Result<()> {
    std::fs::write(path, ply_bytes(cloud, format)).map_err(|e| Error::io(path, e))
}
