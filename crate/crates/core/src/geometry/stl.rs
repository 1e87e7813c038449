//! STL reading (binary and ASCII) and binary writing.

use nalgebra::Point3;

use super::{GeometryError, TriangleMesh};

/// Vertices closer than this (mm) are merged on load.
pub const WELD_TOLERANCE_MM: f64 = 1e-6;

const HEADER_LEN: usize = 80;
const FACET_LEN: usize = 50;
const HEADER_TAG: &[u8] = b"channelforge";

/// Length unit of the coordinates stored in an STL file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Mm,
    Cm,
    M,
}

impl Units {
    pub fn to_mm(self) -> f64 {
        match self {
            Units::Mm => 1.0,
            Units::Cm => 10.0,
            Units::M => 1000.0,
        }
    }
}

impl std::str::FromStr for Units {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mm" => Ok(Units::Mm),
            "cm" => Ok(Units::Cm),
            "m" => Ok(Units::M),
            other => Err(format!("unknown unit `{other}` (expected mm, cm or m)")),
        }
    }
}

/// Parses a binary or ASCII STL stream into a welded mesh in millimetres.
pub fn load_mesh(bytes: &[u8]) -> Result<TriangleMesh, GeometryError> {
    load_mesh_with_units(bytes, Units::Mm)
}

pub fn load_mesh_with_units(bytes: &[u8], units: Units) -> Result<TriangleMesh, GeometryError> {
    let facets = if is_binary(bytes) {
        parse_binary(bytes)?
    } else if bytes.trim_ascii_start().starts_with(b"solid") {
        parse_ascii(bytes)?
    } else {
        // Not ASCII and the facet count does not match the length.
        parse_binary(bytes)?
    };
    if facets.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let scale = units.to_mm();
    let raw: Vec<Point3<f64>> = facets.iter().flatten().map(|p| p * scale).collect();
    let indices: Vec<[u32; 3]> = (0..facets.len() as u32)
        .map(|f| [3 * f, 3 * f + 1, 3 * f + 2])
        .collect();
    let (vertices, triangles) = TriangleMesh::welded(&raw, &indices, WELD_TOLERANCE_MM);
    if let Some(t) = triangles
        .iter()
        .position(|t| t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
    {
        return Err(GeometryError::Parse {
            offset: if is_binary(bytes) {
                HEADER_LEN + 4 + t * FACET_LEN
            } else {
                0
            },
            message: format!("facet {t} collapses to a line or point after welding"),
        });
    }
    TriangleMesh::new(vertices, triangles)
}

fn is_binary(bytes: &[u8]) -> bool {
    if bytes.len() < HEADER_LEN + 4 {
        return false;
    }
    let count = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap()) as usize;
    count.checked_mul(FACET_LEN).and_then(|n| n.checked_add(HEADER_LEN + 4)) == Some(bytes.len())
}

type Facet = [Point3<f64>; 3];

fn parse_binary(bytes: &[u8]) -> Result<Vec<Facet>, GeometryError> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(GeometryError::Parse {
            offset: bytes.len(),
            message: "truncated binary header".into(),
        });
    }
    let count = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN + 4..];
    if body.len() != count * FACET_LEN {
        return Err(GeometryError::Parse {
            offset: HEADER_LEN,
            message: format!(
                "header declares {count} facets ({} bytes) but {} bytes follow",
                count * FACET_LEN,
                body.len()
            ),
        });
    }
    let f32_at = |b: &[u8], i: usize| f32::from_le_bytes(b[i..i + 4].try_into().unwrap()) as f64;
    let mut facets = Vec::with_capacity(count);
    for (f, rec) in body.chunks_exact(FACET_LEN).enumerate() {
        let mut tri = [Point3::origin(); 3];
        for (v, p) in tri.iter_mut().enumerate() {
            let base = 12 + 12 * v;
            *p = Point3::new(f32_at(rec, base), f32_at(rec, base + 4), f32_at(rec, base + 8));
        }
        if tri.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::Parse {
                offset: HEADER_LEN + 4 + f * FACET_LEN,
                message: format!("facet {f} has a non-finite coordinate"),
            });
        }
        facets.push(tri);
    }
    Ok(facets)
}

struct Tokens<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.src.len() && !self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some((
            start,
            std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("\u{fffd}"),
        ))
    }

    fn skip_line(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
            self.pos += 1;
        }
    }

    fn expect(&mut self, word: &str) -> Result<usize, GeometryError> {
        match self.next() {
            Some((at, tok)) if tok.eq_ignore_ascii_case(word) => Ok(at),
            Some((at, tok)) => Err(GeometryError::Parse {
                offset: at,
                message: format!("expected `{word}`, found `{tok}`"),
            }),
            None => Err(GeometryError::Parse {
                offset: self.src.len(),
                message: format!("expected `{word}`, found end of input"),
            }),
        }
    }

    fn number(&mut self) -> Result<f64, GeometryError> {
        match self.next() {
            Some((at, tok)) => tok
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| GeometryError::Parse {
                    offset: at,
                    message: format!("invalid number `{tok}`"),
                }),
            None => Err(GeometryError::Parse {
                offset: self.src.len(),
                message: "expected a number, found end of input".into(),
            }),
        }
    }
}

fn parse_ascii(bytes: &[u8]) -> Result<Vec<Facet>, GeometryError> {
    let mut toks = Tokens { src: bytes, pos: 0 };
    toks.expect("solid")?;
    // Solid name runs to end of line.
    toks.skip_line();
    let mut facets = Vec::new();
    loop {
        match toks.next() {
            Some((_, t)) if t.eq_ignore_ascii_case("endsolid") => break,
            Some((_, t)) if t.eq_ignore_ascii_case("facet") => {
                toks.expect("normal")?;
                for _ in 0..3 {
                    toks.number()?;
                }
                toks.expect("outer")?;
                toks.expect("loop")?;
                let mut tri = [Point3::origin(); 3];
                for p in &mut tri {
                    toks.expect("vertex")?;
                    *p = Point3::new(toks.number()?, toks.number()?, toks.number()?);
                }
                toks.expect("endloop")?;
                toks.expect("endfacet")?;
                facets.push(tri);
            }
            Some((at, t)) => {
                return Err(GeometryError::Parse {
                    offset: at,
                    message: format!("expected `facet` or `endsolid`, found `{t}`"),
                })
            }
            None => {
                return Err(GeometryError::Parse {
                    offset: bytes.len(),
                    message: "missing `endsolid`".into(),
                })
            }
        }
    }
    Ok(facets)
}

/// Serialises a mesh as little-endian binary STL with recomputed facet normals.
pub fn write_binary_stl(mesh: &TriangleMesh) -> Vec<u8> {
    let n = mesh.triangles().len();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + n * FACET_LEN);
    let mut header = [0u8; HEADER_LEN];
    header[..HEADER_TAG.len()].copy_from_slice(HEADER_TAG);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for t in 0..n {
        let normal = mesh.face_normal(t);
        for c in normal.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        for p in mesh.triangle(t) {
            for c in p.coords.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

/// ASCII STL, used by tests and for human inspection.
pub fn write_ascii_stl(mesh: &TriangleMesh, name: &str) -> String {
    use std::fmt::Write;
    let mut s = format!("solid {name}\n");
    for t in 0..mesh.triangles().len() {
        let n = mesh.face_normal(t);
        let _ = writeln!(s, "  facet normal {} {} {}", n.x, n.y, n.z);
        s.push_str("    outer loop\n");
        for p in mesh.triangle(t) {
            let _ = writeln!(s, "      vertex {} {} {}", p.x, p.y, p.z);
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    let _ = writeln!(s, "endsolid {name}");
    s
}
