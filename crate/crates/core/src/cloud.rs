//! Point clouds and the PLY format.
//!
//! Clouds are written as binary little-endian PLY with a single `vertex`
//! element holding `x y z` and optionally `nx ny nz` as 32-bit floats. ASCII
//! and binary little-endian files are accepted on read.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, normals: None }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Self {
        debug_assert_eq!(points.len(), normals.len());
        Self {
            points,
            normals: Some(normals),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.points)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = &self.normals {
            if n.len() != self.points.len() {
                return Err(Error::InvariantViolation(format!(
                    "{} points but {} normals",
                    self.points.len(),
                    n.len()
                )));
            }
            if let Some(i) = n.iter().position(|v| (v.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::InvariantViolation(format!("normal {i} is not unit length")));
            }
        }
        Ok(())
    }

    /// Rounds every coordinate to `f32`, the precision stored on disk.
    pub fn quantized(&self) -> Self {
        let q = |v: &Vec3| Vec3::new(v.x as f32 as f64, v.y as f32 as f64, v.z as f32 as f64);
        Self {
            points: self.points.iter().map(q).collect(),
            normals: self.normals.as_ref().map(|n| n.iter().map(q).collect()),
        }
    }

    /// Concatenates clouds; normals survive only if every input has them.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a PointCloud> + Clone) -> Self {
        let all_normals = parts.clone().into_iter().all(|c| c.normals.is_some());
        let mut out = PointCloud::default();
        let mut normals = Vec::new();
        for c in parts {
            out.points.extend_from_slice(&c.points);
            if all_normals {
                normals.extend_from_slice(c.normals.as_ref().unwrap());
            }
        }
        if all_normals {
            out.normals = Some(normals);
        }
        out
    }

    pub fn to_ply_bytes(&self) -> Vec<u8> {
        let mut header = String::from("ply\nformat binary_little_endian 1.0\ncomment treecloud\n");
        header.push_str(&format!("element vertex {}\n", self.points.len()));
        header.push_str("property float x\nproperty float y\nproperty float z\n");
        if self.normals.is_some() {
            header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
        }
        header.push_str("end_header\n");
        let stride = if self.normals.is_some() { 24 } else { 12 };
        let mut out = Vec::with_capacity(header.len() + stride * self.points.len());
        out.extend_from_slice(header.as_bytes());
        for (i, p) in self.points.iter().enumerate() {
            for c in p.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
            if let Some(n) = &self.normals {
                for c in n[i].iter() {
                    out.extend_from_slice(&(*c as f32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn write_ply(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        f.write_all(&self.to_ply_bytes()).map_err(|e| Error::file(path, e))
    }

    pub fn read_ply(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        parse_ply(BufReader::new(f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
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
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
struct Header {
    ascii: bool,
    count: usize,
    props: Vec<(String, Scalar)>,
}

fn parse_header(r: &mut impl BufRead) -> Result<Header> {
    let bad = |m: String| Error::MalformedHeader(m);
    let mut line = String::new();
    let mut next = |line: &mut String| -> Result<bool> {
        line.clear();
        Ok(r.read_line(line)? > 0)
    };
    if !next(&mut line)? || line.trim_end() != "ply" {
        return Err(bad("missing 'ply' magic".into()));
    }
    let mut ascii = None;
    let mut count = None;
    let mut props = Vec::new();
    let mut in_vertex = false;
    let mut seen_vertex = false;
    loop {
        if !next(&mut line)? {
            return Err(bad("missing end_header".into()));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", fmt, _version] => {
                ascii = Some(match *fmt {
                    "ascii" => true,
                    "binary_little_endian" => false,
                    other => return Err(bad(format!("unsupported format {other}"))),
                })
            }
            ["element", name, n] => {
                if *name == "vertex" {
                    if seen_vertex {
                        return Err(bad("duplicate vertex element".into()));
                    }
                    count = Some(n.parse::<usize>().map_err(|e| bad(format!("bad vertex count: {e}")))?);
                    in_vertex = true;
                    seen_vertex = true;
                } else {
                    if !seen_vertex {
                        return Err(bad(format!("element {name} precedes vertex")));
                    }
                    in_vertex = false;
                }
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(bad("list properties on vertex are not supported".into()));
                }
            }
            ["property", ty, name] => {
                if in_vertex {
                    let s = Scalar::parse(ty).ok_or_else(|| bad(format!("unknown property type {ty}")))?;
                    props.push((name.to_string(), s));
                }
            }
            _ => return Err(bad(format!("unrecognized header line {:?}", line.trim_end()))),
        }
    }
    let ascii = ascii.ok_or_else(|| bad("missing format line".into()))?;
    let count = count.ok_or_else(|| bad("missing vertex element".into()))?;
    Ok(Header { ascii, count, props })
}

pub fn parse_ply(mut r: impl BufRead) -> Result<PointCloud> {
    let header = parse_header(&mut r)?;
    let find = |name: &str| header.props.iter().position(|(n, _)| n == name);
    let (Some(x), Some(y), Some(z)) = (find("x"), find("y"), find("z")) else {
        return Err(Error::MalformedHeader("vertex element lacks x, y, z".into()));
    };
    let normal_idx = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let mut values = vec![0.0; header.props.len()];
    let mut points = Vec::with_capacity(header.count.min(1 << 26));
    let mut normals = normal_idx.map(|_| Vec::with_capacity(header.count.min(1 << 26)));

    let mut emit = |values: &[f64], points: &mut Vec<Vec3>| {
        points.push(Vec3::new(values[x], values[y], values[z]));
        if let (Some(ns), Some([a, b, c])) = (normals.as_mut(), normal_idx) {
            ns.push(Vec3::new(values[a], values[b], values[c]));
        }
    };

    if header.ascii {
        let mut line = String::new();
        for i in 0..header.count {
            line.clear();
            let truncated = Error::TruncatedPayload {
                expected: header.count,
                found: i,
            };
            if r.read_line(&mut line)? == 0 {
                return Err(truncated);
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < values.len() {
                return Err(truncated);
            }
            for (v, f) in values.iter_mut().zip(&fields) {
                *v = f.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("bad value {f:?}: {e}"),
                })?;
            }
            emit(&values, &mut points);
        }
    } else {
        let stride: usize = header.props.iter().map(|p| p.1.size()).sum();
        let mut buf = vec![0u8; stride];
        for i in 0..header.count {
            if let Err(e) = r.read_exact(&mut buf) {
                return Err(if e.kind() == std::io::ErrorKind::UnexpectedEof {
                    Error::TruncatedPayload {
                        expected: header.count,
                        found: i,
                    }
                } else {
                    e.into()
                });
            }
            let mut off = 0;
            for (v, (_, s)) in values.iter_mut().zip(&header.props) {
                *v = s.decode(&buf[off..off + s.size()]);
                off += s.size();
            }
            emit(&values, &mut points);
        }
    }
    Ok(PointCloud { points, normals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_fixture() {
        let text = "ply\nformat ascii 1.0\ncomment hand written\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1.5 -2 3\n0.25 0.5 0.75\n";
        let c = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.normals.is_none());
        assert_eq!(c.points[1], Vec3::new(1.5, -2.0, 3.0));
        assert_eq!(c.points[2], Vec3::new(0.25, 0.5, 0.75));
    }

    #[test]
    fn ascii_with_normals_and_extra_elements() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nproperty uchar red\nproperty float nx\nproperty float ny\nproperty float nz\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n1 2 3 255 0 0 1\n4 5 6 0 1 0 0\n";
        let c = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(c.normals.as_ref().unwrap()[1], Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(c.points[1], Vec3::new(4.0, 5.0, 6.0));
    }

    #[test]
    fn truncated_binary_payload() {
        let cloud = PointCloud::new((0..9).map(|i| Vec3::new(i as f64, 0.0, 1.0)).collect());
        let bytes = cloud.to_ply_bytes();
        let text = String::from_utf8_lossy(&bytes).replace("element vertex 9", "element vertex 10");
        let header_len = text.find("end_header\n").unwrap() + "end_header\n".len();
        let mut forged = text.as_bytes()[..header_len].to_vec();
        forged.extend_from_slice(&bytes[bytes.len() - 9 * 12..]);
        match parse_ply(forged.as_slice()) {
            Err(Error::TruncatedPayload { expected: 10, found: 9 }) => {}
            other => panic!("expected truncated payload, got {other:?}"),
        }
    }

    #[test]
    fn truncated_ascii_payload() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n";
        assert!(matches!(
            parse_ply(text.as_bytes()),
            Err(Error::TruncatedPayload { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn malformed_headers() {
        for text in [
            "plx\n",
            "ply\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
            "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n",
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n",
            "ply\nformat ascii 1.0\nelement vertex 1\n",
        ] {
            assert!(
                matches!(parse_ply(text.as_bytes()), Err(Error::MalformedHeader(_))),
                "{text:?}"
            );
        }
    }

    #[test]
    fn binary_round_trip_with_normals() {
        let pts: Vec<Vec3> = (0..50)
            .map(|i| Vec3::new(i as f64 * 0.1, -(i as f64), 1.0 / (i + 1) as f64))
            .collect();
        let nrm: Vec<Vec3> = pts.iter().map(|p| (p + Vec3::new(0.0, 0.0, 1.0)).normalize()).collect();
        let cloud = PointCloud::with_normals(pts, nrm).quantized();
        let back = parse_ply(cloud.to_ply_bytes().as_slice()).unwrap();
        assert_eq!(back, cloud);
    }
}
