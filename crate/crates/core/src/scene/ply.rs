//! PLY reader: ascii, binary_little_endian and binary_big_endian.
//!
//! Only `vertex` (x, y, z) and `face` (vertex_indices / vertex_index list)
//! elements are used; any other element is parsed and discarded.

use std::io::{Cursor, Read};

use byteorder::{BigEndian, LittleEndian, ReadBytesExt};

use super::mesh::TriMesh;
use super::MeshParseError;
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(name: &str) -> Option<Self> {
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

/// Pulls scalar values out of the body, whatever the encoding.
trait ValueSource {
    fn read(&mut self, ty: Scalar) -> Result<f64, MeshParseError>;
}

struct AsciiSource<'a> {
    tokens: std::iter::Peekable<std::str::SplitAsciiWhitespace<'a>>,
}

impl ValueSource for AsciiSource<'_> {
    fn read(&mut self, _ty: Scalar) -> Result<f64, MeshParseError> {
        let tok = self
            .tokens
            .next()
            .ok_or_else(|| MeshParseError::new("unexpected end of ascii body"))?;
        tok.parse()
            .map_err(|_| MeshParseError::new(format!("bad ascii value `{tok}`")))
    }
}

struct BinarySource<'a> {
    cursor: Cursor<&'a [u8]>,
    big_endian: bool,
}

impl BinarySource<'_> {
    fn read_inner(&mut self, ty: Scalar) -> std::io::Result<f64> {
        let c = &mut self.cursor;
        Ok(match (ty, self.big_endian) {
            (Scalar::I8, _) => c.read_i8()? as f64,
            (Scalar::U8, _) => c.read_u8()? as f64,
            (Scalar::I16, false) => c.read_i16::<LittleEndian>()? as f64,
            (Scalar::I16, true) => c.read_i16::<BigEndian>()? as f64,
            (Scalar::U16, false) => c.read_u16::<LittleEndian>()? as f64,
            (Scalar::U16, true) => c.read_u16::<BigEndian>()? as f64,
            (Scalar::I32, false) => c.read_i32::<LittleEndian>()? as f64,
            (Scalar::I32, true) => c.read_i32::<BigEndian>()? as f64,
            (Scalar::U32, false) => c.read_u32::<LittleEndian>()? as f64,
            (Scalar::U32, true) => c.read_u32::<BigEndian>()? as f64,
            (Scalar::F32, false) => c.read_f32::<LittleEndian>()? as f64,
            (Scalar::F32, true) => c.read_f32::<BigEndian>()? as f64,
            (Scalar::F64, false) => c.read_f64::<LittleEndian>()?,
            (Scalar::F64, true) => c.read_f64::<BigEndian>()?,
        })
    }
}

impl ValueSource for BinarySource<'_> {
    fn read(&mut self, ty: Scalar) -> Result<f64, MeshParseError> {
        let offset = self.cursor.position();
        self.read_inner(ty).map_err(|_| {
            MeshParseError::new(format!("binary body truncated at byte {offset}"))
        })
    }
}

fn parse_header(text: &str) -> Result<(Format, Vec<Element>), MeshParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(MeshParseError::at(1, "missing `ply` magic")),
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLe,
                    "binary_big_endian" => Format::BinaryBe,
                    other => {
                        return Err(MeshParseError::at(line_no, format!("unknown format `{other}`")))
                    }
                });
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| MeshParseError::at(line_no, "bad element count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| MeshParseError::at(line_no, "property before element"))?;
                let count = Scalar::parse(count)
                    .ok_or_else(|| MeshParseError::at(line_no, format!("unknown type `{count}`")))?;
                let item = Scalar::parse(item)
                    .ok_or_else(|| MeshParseError::at(line_no, format!("unknown type `{item}`")))?;
                el.properties.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| MeshParseError::at(line_no, "property before element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| MeshParseError::at(line_no, format!("unknown type `{ty}`")))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            ["end_header"] => {
                let format = format.ok_or_else(|| MeshParseError::new("header has no format line"))?;
                return Ok((format, elements));
            }
            _ => return Err(MeshParseError::at(line_no, format!("unrecognized header line `{raw}`"))),
        }
    }
    Err(MeshParseError::new("missing end_header"))
}

pub fn parse_ply(bytes: &[u8]) -> Result<TriMesh, MeshParseError> {
    const END: &[u8] = b"end_header";
    let end_pos = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| MeshParseError::new("missing end_header"))?;
    let mut body_start = end_pos + END.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..body_start])
        .map_err(|_| MeshParseError::new("header is not valid text"))?;
    let (format, elements) = parse_header(header)?;
    let body = &bytes[body_start..];

    match format {
        Format::Ascii => {
            let text = std::str::from_utf8(body)
                .map_err(|_| MeshParseError::new("ascii body is not valid UTF-8"))?;
            let mut src = AsciiSource {
                tokens: text.split_ascii_whitespace().peekable(),
            };
            read_elements(&elements, &mut src)
        }
        Format::BinaryLe | Format::BinaryBe => {
            let mut src = BinarySource {
                cursor: Cursor::new(body),
                big_endian: format == Format::BinaryBe,
            };
            let mesh = read_elements(&elements, &mut src)?;
            let mut rest = Vec::new();
            let _ = src.cursor.read_to_end(&mut rest);
            if !rest.is_empty() {
                log::debug!("ply: {} trailing bytes ignored", rest.len());
            }
            Ok(mesh)
        }
    }
}

fn read_elements(elements: &[Element], src: &mut dyn ValueSource) -> Result<TriMesh, MeshParseError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let coord_slot = |name: &str| match name {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            _ => None,
        };
        if is_vertex {
            for axis in ["x", "y", "z"] {
                if !el.properties.iter().any(|p| p.name() == axis) {
                    return Err(MeshParseError::new(format!("vertex element lacks `{axis}`")));
                }
            }
        }
        if is_face
            && !el
                .properties
                .iter()
                .any(|p| matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index"))
        {
            return Err(MeshParseError::new("face element lacks a vertex_indices list"));
        }
        for row in 0..el.count {
            let mut xyz = [0.0f64; 3];
            for prop in &el.properties {
                match prop {
                    Property::Scalar { name, ty } => {
                        let v = src.read(*ty)?;
                        if is_vertex {
                            if let Some(k) = coord_slot(name) {
                                xyz[k] = v;
                            }
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = src.read(*count)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(MeshParseError::new(format!("bad list length {n}")));
                        }
                        let mut items = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            items.push(src.read(*item)?);
                        }
                        if is_face && (name == "vertex_indices" || name == "vertex_index") {
                            if items.len() < 3 {
                                return Err(MeshParseError::new(format!("face {row} has fewer than 3 corners")));
                            }
                            let idx: Vec<u32> = items
                                .iter()
                                .map(|&v| {
                                    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                                        Err(MeshParseError::new(format!("face {row}: bad index {v}")))
                                    } else {
                                        Ok(v as u32)
                                    }
                                })
                                .collect::<Result<_, _>>()?;
                            for k in 1..idx.len() - 1 {
                                faces.push([idx[0], idx[k], idx[k + 1]]);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                if !xyz.iter().all(|c| c.is_finite()) {
                    return Err(MeshParseError::new(format!("vertex {row} is not finite")));
                }
                vertices.push(Point::from(xyz));
            }
        }
    }
    TriMesh::new(vertices, faces).map_err(|e| MeshParseError::new(e.to_string()))
}
