//! Stanford PLY reader and writer.
//!
//! The reader is a single pass over the input slice: header lines are
//! decoded one at a time and the body is consumed element by element,
//! so memory use is proportional to the decoded model only. Only the
//! `ascii` and `binary_little_endian` encodings are accepted.

use std::fmt::Write as _;

use super::model::{unit_normals, Model3D};
use super::{AssetError, Location};

pub(crate) fn has_magic(bytes: &[u8]) -> bool {
    bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n")
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

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body_offset: usize,
    lines: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, AssetError> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(rel_end) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            return Err(AssetError::malformed(
                Location::Line(line_no + 1),
                "header is not terminated by end_header",
            ));
        };
        let raw = &bytes[offset..offset + rel_end];
        offset += rel_end + 1;
        line_no += 1;
        let loc = Location::Line(line_no);
        let line = std::str::from_utf8(raw)
            .map_err(|_| AssetError::malformed(loc, "header line is not valid UTF-8"))?
            .trim_end_matches('\r');
        let mut words = line.split_ascii_whitespace();
        let Some(keyword) = words.next() else {
            continue;
        };
        if line_no == 1 {
            if keyword != "ply" {
                return Err(AssetError::UnsupportedFormat("missing ply magic".into()));
            }
            continue;
        }
        match keyword {
            "format" => {
                let fmt = words.next().unwrap_or_default();
                encoding = Some(match fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLe,
                    "binary_big_endian" => {
                        return Err(AssetError::UnsupportedFormat(
                            "binary_big_endian PLY is not supported".into(),
                        ))
                    }
                    other => {
                        return Err(AssetError::UnsupportedFormat(format!(
                            "unknown PLY encoding {other:?}"
                        )))
                    }
                });
            }
            "comment" | "obj_info" => {}
            "element" => {
                let (Some(name), Some(count)) = (words.next(), words.next()) else {
                    return Err(AssetError::malformed(loc, "element needs a name and a count"));
                };
                let count = count
                    .parse()
                    .map_err(|_| AssetError::malformed(loc, format!("bad element count {count:?}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let Some(element) = elements.last_mut() else {
                    return Err(AssetError::malformed(loc, "property before any element"));
                };
                let parts: Vec<&str> = words.collect();
                let bad_type = |t: &str| AssetError::malformed(loc, format!("unknown property type {t:?}"));
                let prop = match parts.as_slice() {
                    ["list", count, item, name] => Property::List {
                        name: name.to_string(),
                        count: Scalar::parse(count).ok_or_else(|| bad_type(count))?,
                        item: Scalar::parse(item).ok_or_else(|| bad_type(item))?,
                    },
                    [ty, name] => Property::Scalar {
                        name: name.to_string(),
                        ty: Scalar::parse(ty).ok_or_else(|| bad_type(ty))?,
                    },
                    _ => return Err(AssetError::malformed(loc, "malformed property line")),
                };
                element.properties.push(prop);
            }
            "end_header" => break,
            other => {
                return Err(AssetError::malformed(loc, format!("unexpected header keyword {other:?}")))
            }
        }
    }
    let encoding = encoding
        .ok_or_else(|| AssetError::malformed(Location::Line(line_no), "header has no format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
        lines: line_no,
    })
}

/// Source of property values for either body encoding.
trait ValueReader {
    fn read(&mut self, ty: Scalar) -> Result<f64, AssetError>;
    fn location(&self) -> Location;
    fn finish(&mut self) -> Result<(), AssetError>;
}

struct AsciiReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> AsciiReader<'a> {
    fn next_token(&mut self) -> Option<&'a [u8]> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            if self.bytes[self.pos] == b'\n' {
                self.line += 1;
            }
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let bytes = self.bytes;
        (self.pos > start).then(|| &bytes[start..self.pos])
    }
}

impl ValueReader for AsciiReader<'_> {
    fn read(&mut self, ty: Scalar) -> Result<f64, AssetError> {
        let token = self
            .next_token()
            .ok_or_else(|| AssetError::malformed(Location::Line(self.line), "unexpected end of file"))?;
        let text = std::str::from_utf8(token).unwrap_or("");
        let loc = Location::Line(self.line);
        let bad = || AssetError::malformed(loc, format!("bad {ty:?} token {text:?}"));
        if ty.is_float() {
            text.parse::<f64>().map_err(|_| bad())
        } else {
            text.parse::<i64>().map(|v| v as f64).map_err(|_| bad())
        }
    }

    fn location(&self) -> Location {
        Location::Line(self.line)
    }

    fn finish(&mut self) -> Result<(), AssetError> {
        if self.next_token().is_some() {
            return Err(AssetError::malformed(
                Location::Line(self.line),
                "data after the last declared element",
            ));
        }
        Ok(())
    }
}

struct BinaryReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl ValueReader for BinaryReader<'_> {
    fn read(&mut self, ty: Scalar) -> Result<f64, AssetError> {
        let n = ty.size();
        let Some(raw) = self.bytes.get(self.pos..self.pos + n) else {
            return Err(AssetError::malformed(Location::Byte(self.pos), "truncated binary payload"));
        };
        self.pos += n;
        Ok(match ty {
            Scalar::I8 => raw[0] as i8 as f64,
            Scalar::U8 => raw[0] as f64,
            Scalar::I16 => i16::from_le_bytes([raw[0], raw[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([raw[0], raw[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(raw.try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(raw.try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(raw.try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(raw.try_into().unwrap()),
        })
    }

    fn location(&self) -> Location {
        Location::Byte(self.pos)
    }

    fn finish(&mut self) -> Result<(), AssetError> {
        if self.pos != self.bytes.len() {
            return Err(AssetError::malformed(
                Location::Byte(self.pos),
                format!("{} bytes after the last declared element", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

/// Column positions of the vertex properties we keep.
#[derive(Default)]
struct VertexLayout {
    xyz: [Option<usize>; 3],
    rgb: [Option<usize>; 3],
    normal: [Option<usize>; 3],
}

impl VertexLayout {
    fn from_element(el: &Element) -> Self {
        let mut layout = VertexLayout::default();
        for (i, p) in el.properties.iter().enumerate() {
            if !matches!(p, Property::Scalar { .. }) {
                continue;
            }
            let slot = match p.name() {
                "x" => &mut layout.xyz[0],
                "y" => &mut layout.xyz[1],
                "z" => &mut layout.xyz[2],
                "red" => &mut layout.rgb[0],
                "green" => &mut layout.rgb[1],
                "blue" => &mut layout.rgb[2],
                "nx" => &mut layout.normal[0],
                "ny" => &mut layout.normal[1],
                "nz" => &mut layout.normal[2],
                _ => continue,
            };
            *slot = Some(i);
        }
        layout
    }
}

fn color_channel(value: f64, ty: Scalar) -> u8 {
    if ty.is_float() {
        (value * 255.0).round().clamp(0.0, 255.0) as u8
    } else {
        value.clamp(0.0, 255.0) as u8
    }
}

pub(crate) fn parse_ply(bytes: &[u8]) -> Result<Model3D, AssetError> {
    if !has_magic(bytes) {
        return Err(AssetError::UnsupportedFormat("missing ply magic".into()));
    }
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_offset..];
    match header.encoding {
        Encoding::Ascii => read_body(
            &header,
            AsciiReader {
                bytes: body,
                pos: 0,
                line: header.lines + 1,
            },
        ),
        Encoding::BinaryLe => read_body(
            &header,
            BinaryReader {
                bytes,
                pos: header.body_offset,
            },
        ),
    }
}

fn read_body(header: &Header, mut reader: impl ValueReader) -> Result<Model3D, AssetError> {
    let vertex_count = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .map(|e| e.count)
        .ok_or_else(|| AssetError::malformed(Location::Line(1), "no vertex element"))?;

    let mut positions = Vec::with_capacity(vertex_count);
    let mut colors = Vec::new();
    let mut normals = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut row = Vec::new();
    let mut polygon: Vec<u32> = Vec::new();

    for el in &header.elements {
        match el.name.as_str() {
            "vertex" => {
                let layout = VertexLayout::from_element(el);
                let [Some(xi), Some(yi), Some(zi)] = layout.xyz else {
                    return Err(AssetError::malformed(
                        Location::Line(1),
                        "vertex element lacks x, y or z",
                    ));
                };
                let rgb = match layout.rgb {
                    [Some(r), Some(g), Some(b)] => Some([r, g, b]),
                    _ => None,
                };
                let nrm = match layout.normal {
                    [Some(a), Some(b), Some(c)] => Some([a, b, c]),
                    _ => None,
                };
                if rgb.is_some() {
                    colors.reserve(el.count);
                }
                if nrm.is_some() {
                    normals.reserve(el.count);
                }
                for _ in 0..el.count {
                    row.clear();
                    for p in &el.properties {
                        match p {
                            Property::Scalar { ty, .. } => row.push(reader.read(*ty)?),
                            Property::List { count, item, .. } => {
                                let n = reader.read(*count)? as usize;
                                for _ in 0..n {
                                    reader.read(*item)?;
                                }
                                row.push(0.0);
                            }
                        }
                    }
                    positions.push([row[xi], row[yi], row[zi]]);
                    if let Some(c) = rgb {
                        let ty = |i: usize| match &el.properties[i] {
                            Property::Scalar { ty, .. } => *ty,
                            Property::List { .. } => Scalar::U8,
                        };
                        colors.push([
                            color_channel(row[c[0]], ty(c[0])),
                            color_channel(row[c[1]], ty(c[1])),
                            color_channel(row[c[2]], ty(c[2])),
                        ]);
                    }
                    if let Some(n) = nrm {
                        normals.push([row[n[0]], row[n[1]], row[n[2]]]);
                    }
                }
            }
            "face" => {
                let index_prop = el.properties.iter().position(|p| {
                    matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index")
                });
                for _ in 0..el.count {
                    for (i, p) in el.properties.iter().enumerate() {
                        match p {
                            Property::Scalar { ty, .. } => {
                                reader.read(*ty)?;
                            }
                            Property::List { count, item, .. } => {
                                let loc = reader.location();
                                let n = reader.read(*count)?;
                                if n < 0.0 {
                                    return Err(AssetError::malformed(loc, "negative list length"));
                                }
                                let keep = Some(i) == index_prop;
                                polygon.clear();
                                for _ in 0..n as usize {
                                    let loc = reader.location();
                                    let v = reader.read(*item)?;
                                    if keep {
                                        if v < 0.0 || v.fract() != 0.0 || v as usize >= vertex_count {
                                            return Err(AssetError::malformed(
                                                loc,
                                                format!("face index {v} out of range for {vertex_count} vertices"),
                                            ));
                                        }
                                        polygon.push(v as u32);
                                    }
                                }
                                if keep {
                                    if polygon.len() < 3 {
                                        return Err(AssetError::malformed(
                                            loc,
                                            format!("face with {} vertices", polygon.len()),
                                        ));
                                    }
                                    for k in 1..polygon.len() - 1 {
                                        faces.push([polygon[0], polygon[k], polygon[k + 1]]);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            _ => {
                for _ in 0..el.count {
                    for p in &el.properties {
                        match p {
                            Property::Scalar { ty, .. } => {
                                reader.read(*ty)?;
                            }
                            Property::List { count, item, .. } => {
                                let n = reader.read(*count)? as usize;
                                for _ in 0..n {
                                    reader.read(*item)?;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    reader.finish()?;

    let colors = (!colors.is_empty()).then_some(colors);
    let normals = if normals.is_empty() { None } else { unit_normals(normals) };
    if positions.is_empty() {
        return Err(AssetError::malformed(reader.location(), "model has no vertices"));
    }
    Model3D::new(positions, colors, normals, faces)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

fn fits_f32(v: f64) -> bool {
    (v as f32) as f64 == v
}

/// Serializes a model. Positions and normals are declared `float` when every
/// value is exactly representable in 32 bits, `double` otherwise, so a
/// binary round trip is always lossless.
pub fn write_ply(model: &Model3D, encoding: PlyEncoding) -> Vec<u8> {
    let pos_double = model.positions().iter().flatten().any(|&v| !fits_f32(v));
    let nrm_double = model
        .normals()
        .is_some_and(|n| n.iter().flatten().any(|&v| !fits_f32(v)));
    let real = |double: bool| if double { "double" } else { "float" };

    let mut head = String::new();
    head.push_str("ply\n");
    head.push_str(match encoding {
        PlyEncoding::Ascii => "format ascii 1.0\n",
        PlyEncoding::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    head.push_str("comment qoe3d\n");
    let _ = writeln!(head, "element vertex {}", model.point_count());
    for axis in ["x", "y", "z"] {
        let _ = writeln!(head, "property {} {axis}", real(pos_double));
    }
    if model.colors().is_some() {
        for c in ["red", "green", "blue"] {
            let _ = writeln!(head, "property uchar {c}");
        }
    }
    if model.normals().is_some() {
        for n in ["nx", "ny", "nz"] {
            let _ = writeln!(head, "property {} {n}", real(nrm_double));
        }
    }
    if !model.faces().is_empty() {
        let _ = writeln!(head, "element face {}", model.faces().len());
        head.push_str("property list uchar uint vertex_indices\n");
    }
    head.push_str("end_header\n");

    let mut out = head.into_bytes();
    match encoding {
        PlyEncoding::Ascii => {
            let mut line = String::new();
            for i in 0..model.point_count() {
                line.clear();
                let p = model.positions()[i];
                let _ = write!(line, "{} {} {}", p[0], p[1], p[2]);
                if let Some(c) = model.colors() {
                    let _ = write!(line, " {} {} {}", c[i][0], c[i][1], c[i][2]);
                }
                if let Some(n) = model.normals() {
                    let _ = write!(line, " {} {} {}", n[i][0], n[i][1], n[i][2]);
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
            for f in model.faces() {
                out.extend_from_slice(format!("3 {} {} {}\n", f[0], f[1], f[2]).as_bytes());
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            let put_real = |out: &mut Vec<u8>, v: f64, double: bool| {
                if double {
                    out.extend_from_slice(&v.to_le_bytes());
                } else {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            };
            for i in 0..model.point_count() {
                for v in model.positions()[i] {
                    put_real(&mut out, v, pos_double);
                }
                if let Some(c) = model.colors() {
                    out.extend_from_slice(&c[i]);
                }
                if let Some(n) = model.normals() {
                    for v in n[i] {
                        put_real(&mut out, v, nrm_double);
                    }
                }
            }
            for f in model.faces() {
                out.push(3);
                for idx in f {
                    out.extend_from_slice(&idx.to_le_bytes());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asset_io::ModelKind;

    const MINIMAL: &str = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n";

    #[test]
    fn minimal_ascii() {
        let m = parse_ply(MINIMAL.as_bytes()).unwrap();
        assert_eq!(m.kind(), ModelKind::PointCloud);
        assert_eq!(m.positions(), &[[0.0; 3]]);
        assert!(m.colors().is_none());
        assert!(m.normals().is_none());
    }

    #[test]
    fn binary_matches_ascii() {
        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        for _ in 0..3 {
            bin.extend_from_slice(&0f32.to_le_bytes());
        }
        assert_eq!(parse_ply(&bin).unwrap(), parse_ply(MINIMAL.as_bytes()).unwrap());
    }

    #[test]
    fn attributes_faces_and_extra_properties() {
        let src = "ply\r\nformat ascii 1.0\r\ncomment hi\r\nelement vertex 4\r\nproperty float x\r\nproperty float y\r\nproperty float z\r\nproperty float nx\r\nproperty float ny\r\nproperty float nz\r\nproperty uchar red\r\nproperty uchar green\r\nproperty uchar blue\r\nproperty uchar alpha\r\nelement face 1\r\nproperty list uchar int vertex_indices\r\nproperty uchar flags\r\nend_header\r\n\
0 0 0 0 0 1 255 0 0 255\r\n1 0 0 0 0 2 0 255 0 255\r\n1 1 0 0 0 1 0 0 255 255\r\n0 1 0 0 0 1 1 2 3 255\r\n4 0 1 2 3 7\r\n";
        let m = parse_ply(src.as_bytes()).unwrap();
        assert_eq!(m.kind(), ModelKind::TriangleMesh);
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.colors().unwrap()[3], [1, 2, 3]);
        assert_eq!(m.normals().unwrap()[1], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn big_endian_rejected() {
        let src = MINIMAL.replace("ascii", "binary_big_endian");
        assert!(matches!(parse_ply(src.as_bytes()), Err(AssetError::UnsupportedFormat(_))));
    }

    #[test]
    fn count_mismatch_reports_line() {
        let src = MINIMAL.replace("vertex 1", "vertex 2");
        match parse_ply(src.as_bytes()) {
            Err(AssetError::MalformedFile { location, .. }) => assert_eq!(location, Location::Line(9)),
            other => panic!("{other:?}"),
        }
        let src = format!("{MINIMAL}1 1 1\n");
        assert!(matches!(parse_ply(src.as_bytes()), Err(AssetError::MalformedFile { .. })));
    }

    #[test]
    fn bad_token_and_index() {
        let src = MINIMAL.replace("0 0 0\n", "0 zero 0\n");
        assert!(matches!(
            parse_ply(src.as_bytes()),
            Err(AssetError::MalformedFile { location: Location::Line(8), .. })
        ));
        let src = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n";
        assert!(matches!(
            parse_ply(src.as_bytes()),
            Err(AssetError::MalformedFile { location: Location::Line(13), .. })
        ));
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        let header_len = bin.len();
        for _ in 0..4 {
            bin.extend_from_slice(&1f32.to_le_bytes());
        }
        match parse_ply(&bin) {
            Err(AssetError::MalformedFile { location, .. }) => {
                assert_eq!(location, Location::Byte(header_len + 16))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_end_header() {
        assert!(matches!(
            parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\n"),
            Err(AssetError::MalformedFile { .. })
        ));
    }

    #[test]
    fn writer_round_trips_both_encodings() {
        let m = Model3D::new(
            vec![[0.1, -2.5, 3.0], [1.0, 2.0, 3.25], [7.0, 8.0, 9.0]],
            Some(vec![[1, 2, 3], [4, 5, 6], [7, 8, 9]]),
            Some(vec![[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
            vec![[0, 1, 2]],
        )
        .unwrap();
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            assert_eq!(parse_ply(&write_ply(&m, enc)).unwrap(), m);
        }
    }
}
