//! PLY point clouds: ASCII and binary little-endian.
//!
//! The vertex element supplies `x,y,z`, optional `red,green,blue` and optional
//! `nx,ny,nz`. Features are the three colors in [0, 1] (0.5 when absent)
//! followed by the normals when present.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::{validate_cloud, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
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
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
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
    /// Byte offset of the first payload byte.
    body: usize,
    /// Number of header lines (1-based line of the first ASCII data row is `lines + 1`).
    lines: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(end) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(Error::parse(format!("line {}", line_no + 1), "header is missing end_header"));
        };
        line_no += 1;
        let raw = &bytes[pos..pos + end];
        pos += end + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| Error::parse(format!("line {line_no}"), "header is not UTF-8"))?
            .trim_end_matches('\r')
            .trim();
        let loc = || format!("line {line_no}");
        let words: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(Error::parse(loc(), "missing 'ply' magic"));
            }
            continue;
        }
        match words.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                format = Some(match words.get(1).copied() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    Some(other) => return Err(Error::UnsupportedProperty(format!("format {other}"))),
                    None => return Err(Error::parse(loc(), "format line without a format")),
                });
            }
            Some("element") => {
                let (Some(name), Some(count)) = (words.get(1), words.get(2)) else {
                    return Err(Error::parse(loc(), "element needs a name and a count"));
                };
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(loc(), format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let Some(el) = elements.last_mut() else {
                    return Err(Error::parse(loc(), "property before any element"));
                };
                let ty = |w: Option<&&str>| -> Result<Scalar> {
                    let w = w.ok_or_else(|| Error::parse(loc(), "property is missing a type"))?;
                    Scalar::parse(w).ok_or_else(|| Error::UnsupportedProperty(format!("type {w}")))
                };
                let prop = if words.get(1) == Some(&"list") {
                    if words.len() != 5 {
                        return Err(Error::parse(loc(), "list property needs count type, item type and name"));
                    }
                    Property::List {
                        count: ty(words.get(2))?,
                        item: ty(words.get(3))?,
                    }
                } else {
                    let Some(name) = words.get(2) else {
                        return Err(Error::parse(loc(), "property is missing a name"));
                    };
                    Property::Scalar {
                        name: name.to_string(),
                        ty: ty(words.get(1))?,
                    }
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::parse(loc(), format!("unknown header keyword '{other}'"))),
        }
    }
    let format = format.ok_or_else(|| Error::parse("header", "no format line"))?;
    Ok(Header {
        format,
        elements,
        body: pos,
        lines: line_no,
    })
}

/// Column indices of the fields we read from the vertex element.
struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<([usize; 3], bool)>,
    normals: Option<[usize; 3]>,
}

fn vertex_layout(el: &Element) -> Result<VertexLayout> {
    let mut find = |name: &str| -> Result<Option<(usize, Scalar)>> {
        for (i, p) in el.props.iter().enumerate() {
            match p {
                Property::Scalar { name: n, ty } if n == name => return Ok(Some((i, *ty))),
                _ => {}
            }
        }
        Ok(None)
    };
    let mut xyz = [0; 3];
    for (slot, name) in ["x", "y", "z"].iter().enumerate() {
        match find(name)? {
            Some((i, _)) => xyz[slot] = i,
            None => return Err(Error::parse("header", format!("vertex element has no '{name}' property"))),
        }
    }
    let triple = |names: [&str; 3], find: &mut dyn FnMut(&str) -> Result<Option<(usize, Scalar)>>| -> Result<Option<([usize; 3], bool)>> {
        let found: Vec<Option<(usize, Scalar)>> = names.iter().map(|n| find(n)).collect::<Result<_>>()?;
        match (found[0], found[1], found[2]) {
            (Some(a), Some(b), Some(c)) => Ok(Some(([a.0, b.0, c.0], a.1.is_float()))),
            (None, None, None) => Ok(None),
            _ => Err(Error::UnsupportedProperty(format!("partial {} triple", names.join("/")))),
        }
    };
    let rgb = triple(["red", "green", "blue"], &mut find)?;
    let normals = triple(["nx", "ny", "nz"], &mut find)?.map(|(i, _)| i);
    if el.props.iter().any(|p| matches!(p, Property::List { .. })) {
        return Err(Error::UnsupportedProperty("list property on vertex element".into()));
    }
    Ok(VertexLayout { xyz, rgb, normals })
}

fn assemble(layout: &VertexLayout, rows: &[Vec<f64>]) -> Result<PointCloud> {
    let n = rows.len();
    let channels = 3 + if layout.normals.is_some() { 3 } else { 0 };
    let positions = Array2::from_shape_fn((n, 3), |(i, a)| rows[i][layout.xyz[a]]);
    let features = Array2::from_shape_fn((n, channels), |(i, c)| match (c, &layout.rgb, &layout.normals) {
        (0..=2, Some((idx, is_float)), _) => {
            let v = rows[i][idx[c]];
            if *is_float {
                v
            } else {
                v / 255.0
            }
        }
        (0..=2, None, _) => 0.5,
        (_, _, Some(idx)) => rows[i][idx[c - 3]],
        _ => unreachable!("normal channels only exist with normals"),
    });
    let cloud = PointCloud { positions, features };
    validate_cloud(&cloud)?;
    Ok(cloud)
}

/// Parse a PLY file from memory.
pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let Some(vi) = header.elements.iter().position(|e| e.name == "vertex") else {
        return Err(Error::parse("header", "no vertex element"));
    };
    let layout = vertex_layout(&header.elements[vi])?;
    let mut rows = Vec::new();
    match header.format {
        PlyFormat::Ascii => {
            let body = std::str::from_utf8(&bytes[header.body..])
                .map_err(|_| Error::parse(format!("byte {}", header.body), "ASCII body is not UTF-8"))?;
            let mut lines = body.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
            for (ei, el) in header.elements.iter().enumerate() {
                for _ in 0..el.count {
                    let Some((li, line)) = lines.next() else {
                        return Err(Error::parse(
                            format!("line {}", header.lines + body.lines().count() + 1),
                            format!("unexpected end of file in element '{}'", el.name),
                        ));
                    };
                    if ei != vi {
                        continue;
                    }
                    let loc = || format!("line {}", header.lines + li + 1);
                    let vals: Vec<f64> = line
                        .split_whitespace()
                        .map(|w| w.parse::<f64>().map_err(|_| Error::parse(loc(), format!("bad number '{w}'"))))
                        .collect::<Result<_>>()?;
                    if vals.len() != el.props.len() {
                        return Err(Error::parse(
                            loc(),
                            format!("expected {} values, found {}", el.props.len(), vals.len()),
                        ));
                    }
                    rows.push(vals);
                }
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let mut pos = header.body;
            let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
                if *pos + n > bytes.len() {
                    return Err(Error::parse(
                        format!("byte {}", *pos),
                        format!("truncated payload: need {n} bytes, {} left", bytes.len() - *pos),
                    ));
                }
                let s = &bytes[*pos..*pos + n];
                *pos += n;
                Ok(s)
            };
            for (ei, el) in header.elements.iter().enumerate() {
                for _ in 0..el.count {
                    let mut vals = Vec::with_capacity(el.props.len());
                    for p in &el.props {
                        match *p {
                            Property::Scalar { ty, .. } => vals.push(ty.decode(take(&mut pos, ty.size())?)),
                            Property::List { count, item } => {
                                let n = count.decode(take(&mut pos, count.size())?);
                                if !(n >= 0.0) {
                                    return Err(Error::parse(format!("byte {}", pos - count.size()), "negative list length"));
                                }
                                take(&mut pos, n as usize * item.size())?;
                                vals.push(f64::NAN);
                            }
                        }
                    }
                    if ei == vi {
                        rows.push(vals);
                    }
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyCloud);
    }
    assemble(&layout, &rows)
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_ply(&fs::read(path)?)
}

/// Serialize a cloud with `double` coordinates. Features must have 3 (colors)
/// or 6 (colors then normals) channels; colors are written as `double`.
pub fn ply_bytes(cloud: &PointCloud, format: PlyFormat) -> Result<Vec<u8>> {
    validate_cloud(cloud)?;
    let c = cloud.channels();
    if c != 3 && c != 6 {
        return Err(Error::UnsupportedProperty(format!("cannot write {c} feature channels")));
    }
    let mut names = vec!["x", "y", "z", "red", "green", "blue"];
    if c == 6 {
        names.extend(["nx", "ny", "nz"]);
    }
    let mut out = Vec::new();
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(out, "ply\nformat {fmt} 1.0\nelement vertex {}", cloud.len())?;
    for n in &names {
        writeln!(out, "property double {n}")?;
    }
    writeln!(out, "end_header")?;
    for i in 0..cloud.len() {
        let row = cloud.positions.row(i).iter().chain(cloud.features.row(i).iter()).copied().collect::<Vec<f64>>();
        match format {
            PlyFormat::Ascii => {
                let words: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                writeln!(out, "{}", words.join(" "))?;
            }
            PlyFormat::BinaryLittleEndian => {
                for v in row {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub fn save_ply(path: impl AsRef<Path>, cloud: &PointCloud, format: PlyFormat) -> Result<()> {
    fs::write(path, ply_bytes(cloud, format)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_xyz_only_fills_gray() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 2 3\n";
        let c = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.features.iter().all(|&v| v == 0.5));
        assert_eq!(c.positions[[1, 2]], 3.0);
    }

    #[test]
    fn uchar_colors_scale_and_faces_are_skipped() {
        let text = "ply\nformat ascii 1.0\ncomment x\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n\
property uchar red\nproperty uchar green\nproperty uchar blue\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n\
1 1 1 255 0 51\n3 0 0 0\n";
        let c = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(c.features.row(0).to_vec(), vec![1.0, 0.0, 0.2]);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let positions = Array2::from_shape_fn((5, 3), |(i, a)| (i as f64 * 0.1 + a as f64).sin() * 1e3 + 1.0 / 3.0);
        let features = Array2::from_shape_fn((5, 6), |(i, c)| (i * c) as f64 / 7.0);
        let cloud = PointCloud::new(positions, features).unwrap();
        for fmt in [PlyFormat::BinaryLittleEndian, PlyFormat::Ascii] {
            let back = parse_ply(&ply_bytes(&cloud, fmt).unwrap()).unwrap();
            assert_eq!(back, cloud);
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let cloud = PointCloud::new(Array2::zeros((2, 3)), Array2::zeros((2, 3))).unwrap();
        let bytes = ply_bytes(&cloud, PlyFormat::BinaryLittleEndian).unwrap();
        let header_len = bytes.len() - 2 * 6 * 8;
        // Cut inside the second vertex's 'y'.
        let cut = header_len + 6 * 8 + 8 + 3;
        match parse_ply(&bytes[..cut]) {
            Err(Error::ParseError { location, .. }) => assert_eq!(location, format!("byte {}", header_len + 56)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        assert!(matches!(parse_ply(b"plx\n"), Err(Error::ParseError { .. })));
        let big = "ply\nformat binary_big_endian 1.0\nend_header\n";
        assert!(matches!(parse_ply(big.as_bytes()), Err(Error::UnsupportedProperty(_))));
        let empty = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(matches!(parse_ply(empty.as_bytes()), Err(Error::EmptyCloud)));
        let bad = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 q\n";
        match parse_ply(bad.as_bytes()) {
            Err(Error::ParseError { location, .. }) => assert_eq!(location, "line 8"),
            other => panic!("{other:?}"),
        }
    }
}
