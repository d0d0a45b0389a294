//! PLY reader/writer for the subset used here: a `vertex` element with
//! `x y z` (float/double), optional `red green blue` (uchar) and `nx ny nz`
//! (float/double), and an optional `face` element with a
//! `list uchar int vertex_indices` property. ASCII and binary little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, TriMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    U8,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "uchar" | "uint8" => Some(Scalar::U8),
            "float" | "float32" => Some(Scalar::F32),
            "double" | "float64" => Some(Scalar::F64),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            Scalar::U8 => 1,
            Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VertexProp {
    X,
    Y,
    Z,
    Red,
    Green,
    Blue,
    Nx,
    Ny,
    Nz,
}

struct Header {
    format: PlyFormat,
    vertex_count: usize,
    props: Vec<(VertexProp, Scalar)>,
    face_count: usize,
    body_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let perr = |line: usize, msg: String| Error::parse(path, Some(line), msg);
    let mut pos = 0usize;
    let mut lineno = 0usize;
    let next_line = |pos: &mut usize| -> Option<&str> {
        let rest = &bytes[*pos..];
        let end = rest.iter().position(|&b| b == b'\n')?;
        *pos += end + 1;
        std::str::from_utf8(&rest[..end]).ok().map(|s| s.trim_end_matches('\r'))
    };

    let mut format = None;
    let mut vertex_count = None;
    let mut face_count = 0usize;
    let mut props = Vec::new();
    let mut current: Option<&str> = None;
    let mut saw_face_list = false;
    loop {
        lineno += 1;
        let line = next_line(&mut pos)
            .ok_or_else(|| perr(lineno, "unterminated header (missing end_header)".into()))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if lineno == 1 {
            if line != "ply" {
                return Err(perr(1, format!("expected magic 'ply', found {line:?}")));
            }
            continue;
        }
        match toks.as_slice() {
            ["format", "ascii", "1.0"] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", "1.0"] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, ..] => {
                return Err(Error::Unsupported(format!("PLY format {other}")));
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                vertex_count = Some(n.parse().map_err(|_| perr(lineno, format!("bad vertex count {n:?}")))?);
                current = Some("vertex");
            }
            ["element", "face", n] => {
                face_count = n.parse().map_err(|_| perr(lineno, format!("bad face count {n:?}")))?;
                current = Some("face");
            }
            ["element", other, ..] => {
                return Err(Error::Unsupported(format!("PLY element {other}")));
            }
            ["property", "list", cnt, idx, name] => {
                if current != Some("face") || *name != "vertex_indices" && *name != "vertex_index" {
                    return Err(Error::Unsupported(format!("PLY list property {name}")));
                }
                if !matches!(*cnt, "uchar" | "uint8") || !matches!(*idx, "int" | "int32" | "uint" | "uint32") {
                    return Err(Error::Unsupported(format!("PLY list types {cnt} {idx}")));
                }
                saw_face_list = true;
            }
            ["property", ty, name] => {
                if current != Some("vertex") {
                    return Err(Error::Unsupported(format!("PLY property {name} outside vertex")));
                }
                let scalar = Scalar::parse(ty)
                    .ok_or_else(|| Error::Unsupported(format!("PLY property type {ty} for {name}")))?;
                let prop = match *name {
                    "x" => VertexProp::X,
                    "y" => VertexProp::Y,
                    "z" => VertexProp::Z,
                    "red" => VertexProp::Red,
                    "green" => VertexProp::Green,
                    "blue" => VertexProp::Blue,
                    "nx" => VertexProp::Nx,
                    "ny" => VertexProp::Ny,
                    "nz" => VertexProp::Nz,
                    other => return Err(Error::Unsupported(format!("PLY vertex property {other}"))),
                };
                let is_color = matches!(prop, VertexProp::Red | VertexProp::Green | VertexProp::Blue);
                if is_color != (scalar == Scalar::U8) {
                    return Err(Error::Unsupported(format!("PLY property {name} of type {ty}")));
                }
                props.push((prop, scalar));
            }
            ["end_header"] => break,
            _ => return Err(perr(lineno, format!("malformed header line {line:?}"))),
        }
    }
    let format = format.ok_or_else(|| perr(lineno, "missing format line".into()))?;
    let vertex_count = vertex_count.ok_or_else(|| perr(lineno, "missing vertex element".into()))?;
    for need in [VertexProp::X, VertexProp::Y, VertexProp::Z] {
        if !props.iter().any(|(p, _)| *p == need) {
            return Err(perr(lineno, format!("missing vertex property {need:?}")));
        }
    }
    if face_count > 0 && !saw_face_list {
        return Err(perr(lineno, "face element without vertex_indices".into()));
    }
    Ok(Header {
        format,
        vertex_count,
        props,
        face_count,
        body_offset: pos,
    })
}

struct Body {
    cloud: PointCloud,
    faces: Vec<[u32; 3]>,
}

fn assemble(
    header: &Header,
    values: &[f64],
    faces: Vec<[u32; 3]>,
    path: &Path,
) -> Result<Body> {
    let has = |p: VertexProp| header.props.iter().position(|(q, _)| *q == p);
    let np = header.props.len();
    let ix = [has(VertexProp::X), has(VertexProp::Y), has(VertexProp::Z)].map(Option::unwrap);
    let rgb = [has(VertexProp::Red), has(VertexProp::Green), has(VertexProp::Blue)];
    let nrm = [has(VertexProp::Nx), has(VertexProp::Ny), has(VertexProp::Nz)];
    let rgb = match rgb {
        [Some(r), Some(g), Some(b)] => Some([r, g, b]),
        [None, None, None] => None,
        _ => return Err(Error::parse(path, None, "incomplete color properties")),
    };
    let nrm = match nrm {
        [Some(a), Some(b), Some(c)] => Some([a, b, c]),
        [None, None, None] => None,
        _ => return Err(Error::parse(path, None, "incomplete normal properties")),
    };
    let rows = values.chunks_exact(np);
    let mut cloud = PointCloud::default();
    cloud.points.reserve(header.vertex_count);
    let mut colors = rgb.map(|_| Vec::with_capacity(header.vertex_count));
    let mut normals = nrm.map(|_| Vec::with_capacity(header.vertex_count));
    for row in rows {
        cloud.points.push(Point3::new(row[ix[0]], row[ix[1]], row[ix[2]]));
        if let (Some(c), Some(ix)) = (colors.as_mut(), rgb) {
            c.push(ix.map(|i| row[i] as u8));
        }
        if let (Some(n), Some(ix)) = (normals.as_mut(), nrm) {
            let v = Vec3::new(row[ix[0]], row[ix[1]], row[ix[2]]);
            n.push(v.try_normalize(1e-12).unwrap_or(v));
        }
    }
    cloud.colors = colors;
    cloud.normals = normals;
    for (i, f) in faces.iter().enumerate() {
        if f.iter().any(|&v| v as usize >= header.vertex_count) {
            return Err(Error::parse(path, None, format!("face {i} references a missing vertex")));
        }
    }
    Ok(Body { cloud, faces })
}

fn read_body(path: &Path, bytes: &[u8], header: &Header) -> Result<Body> {
    let body = &bytes[header.body_offset..];
    let np = header.props.len();
    match header.format {
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = header.props.iter().map(|(_, s)| s.size()).sum();
            let vbytes = stride * header.vertex_count;
            if body.len() < vbytes {
                return Err(Error::parse(
                    path,
                    None,
                    format!("truncated vertex data: expected {vbytes} bytes, got {}", body.len()),
                ));
            }
            let mut values = Vec::with_capacity(np * header.vertex_count);
            for rec in body[..vbytes].chunks_exact(stride) {
                let mut off = 0;
                for (_, s) in &header.props {
                    let v = match s {
                        Scalar::U8 => rec[off] as f64,
                        Scalar::F32 => f32::from_le_bytes(rec[off..off + 4].try_into().unwrap()) as f64,
                        Scalar::F64 => f64::from_le_bytes(rec[off..off + 8].try_into().unwrap()),
                    };
                    values.push(v);
                    off += s.size();
                }
            }
            let fbytes = 13 * header.face_count;
            let rest = &body[vbytes..];
            if rest.len() != fbytes {
                return Err(Error::parse(
                    path,
                    None,
                    format!(
                        "face data size mismatch: expected {fbytes} bytes, got {}",
                        rest.len()
                    ),
                ));
            }
            let mut faces = Vec::with_capacity(header.face_count);
            for rec in rest.chunks_exact(13) {
                if rec[0] != 3 {
                    return Err(Error::Unsupported(format!("face with {} vertices", rec[0])));
                }
                let idx = |k: usize| u32::from_le_bytes(rec[1 + 4 * k..5 + 4 * k].try_into().unwrap());
                faces.push([idx(0), idx(1), idx(2)]);
            }
            assemble(header, &values, faces, path)
        }
        PlyFormat::Ascii => {
            if !body.is_empty() && *body.last().unwrap() != b'\n' {
                return Err(Error::parse(path, None, "truncated body: missing final newline"));
            }
            let text = std::str::from_utf8(body)
                .map_err(|_| Error::parse(path, None, "body is not valid UTF-8"))?;
            let header_lines = bytes[..header.body_offset].iter().filter(|&&b| b == b'\n').count();
            let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
            let mut values = Vec::with_capacity(np * header.vertex_count);
            for k in 0..header.vertex_count {
                let (i, line) = lines.next().ok_or_else(|| {
                    Error::parse(
                        path,
                        None,
                        format!("expected {} vertices, found {k}", header.vertex_count),
                    )
                })?;
                let lineno = header_lines + i + 1;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != np {
                    return Err(Error::parse(
                        path,
                        Some(lineno),
                        format!("expected {np} values, found {}", toks.len()),
                    ));
                }
                for t in toks {
                    values.push(t.parse::<f64>().map_err(|_| {
                        Error::parse(path, Some(lineno), format!("bad number {t:?}"))
                    })?);
                }
            }
            let mut faces = Vec::with_capacity(header.face_count);
            for k in 0..header.face_count {
                let (i, line) = lines.next().ok_or_else(|| {
                    Error::parse(path, None, format!("expected {} faces, found {k}", header.face_count))
                })?;
                let lineno = header_lines + i + 1;
                let toks: Vec<u32> = line
                    .split_whitespace()
                    .map(|t| t.parse::<u32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(path, Some(lineno), "bad face record"))?;
                if toks.len() != 4 || toks[0] != 3 {
                    return Err(Error::parse(path, Some(lineno), "expected a triangle record"));
                }
                faces.push([toks[1], toks[2], toks[3]]);
            }
            if let Some((i, _)) = lines.next() {
                return Err(Error::parse(path, Some(header_lines + i + 1), "trailing data after body"));
            }
            assemble(header, &values, faces, path)
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn parse_ply(path: &Path, bytes: &[u8]) -> Result<(PointCloud, Vec<[u32; 3]>)> {
    let header = parse_header(path, bytes)?;
    let body = read_body(path, bytes, &header)?;
    body.cloud.validate()?;
    Ok((body.cloud, body.faces))
}

/// Reads the vertex element of a PLY file as a point cloud.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    parse_ply(path, &read_file(path)?).map(|(c, _)| c)
}

/// Reads a triangle mesh (vertex + face elements).
pub fn read_mesh_ply(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let (cloud, faces) = parse_ply(path, &read_file(path)?)?;
    TriMesh::new(cloud.points, faces)
        .map_err(|e| Error::parse(path, None, e.to_string()))
}

fn encode(cloud: &PointCloud, faces: &[[u32; 3]], format: PlyFormat) -> Vec<u8> {
    let mut out = Vec::new();
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let _ = writeln!(out, "ply\nformat {fmt} 1.0\nelement vertex {}", cloud.len());
    out.extend_from_slice(b"property double x\nproperty double y\nproperty double z\n");
    if cloud.colors.is_some() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if cloud.normals.is_some() {
        out.extend_from_slice(b"property float nx\nproperty float ny\nproperty float nz\n");
    }
    if !faces.is_empty() {
        let _ = writeln!(out, "element face {}", faces.len());
        out.extend_from_slice(b"property list uchar int vertex_indices\n");
    }
    out.extend_from_slice(b"end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let color = cloud.colors.as_ref().map(|c| c[i]);
        let normal = cloud.normals.as_ref().map(|n| n[i].map(|v| v as f32));
        match format {
            PlyFormat::Ascii => {
                let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
                if let Some([r, g, b]) = color {
                    let _ = write!(out, " {r} {g} {b}");
                }
                if let Some(n) = normal {
                    let _ = write!(out, " {} {} {}", n.x, n.y, n.z);
                }
                out.push(b'\n');
            }
            PlyFormat::BinaryLittleEndian => {
                for v in [p.x, p.y, p.z] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                if let Some(c) = color {
                    out.extend_from_slice(&c);
                }
                if let Some(n) = normal {
                    for v in [n.x, n.y, n.z] {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
    }
    for f in faces {
        match format {
            PlyFormat::Ascii => {
                let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
            }
            PlyFormat::BinaryLittleEndian => {
                out.push(3);
                for v in f {
                    out.extend_from_slice(&(*v as i32).to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn encode_ply(cloud: &PointCloud, format: PlyFormat) -> Vec<u8> {
    encode(cloud, &[], format)
}

pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(cloud, &[], format)).map_err(|e| Error::io(path, e))
}

pub fn write_mesh_ply(mesh: &TriMesh, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
    let path = path.as_ref();
    let cloud = PointCloud::from_points(mesh.vertices.clone());
    fs::write(path, encode(&cloud, &mesh.faces, format)).map_err(|e| Error::io(path, e))
}
