//! Binary little-endian PLY for point clouds and triangle meshes.
//!
//! Vertices carry `float x, y, z` and optionally `uchar red, green, blue`;
//! faces use `property list uchar int vertex_indices`.

use super::IoError;
use crate::geometry::Vec3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Checks index bounds and that every face has three distinct indices.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.vertices.len() as u32;
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(format!("face {i} references a vertex out of range"));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(format!("face {i} is degenerate"));
            }
        }
        Ok(())
    }
}

fn header(vertices: usize, colors: bool, faces: Option<usize>) -> String {
    let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
    h.push_str(&format!("element vertex {vertices}\n"));
    h.push_str("property float x\nproperty float y\nproperty float z\n");
    if colors {
        h.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if let Some(f) = faces {
        h.push_str(&format!("element face {f}\n"));
        h.push_str("property list uchar int vertex_indices\n");
    }
    h.push_str("end_header\n");
    h
}

fn push_vertex(out: &mut Vec<u8>, p: &Vec3) {
    for c in [p.x, p.y, p.z] {
        out.extend_from_slice(&(c as f32).to_le_bytes());
    }
}

/// Panics if `colors` is given with a length different from `points`.
pub fn write_ply_points(points: &[Vec3], colors: Option<&[[u8; 3]]>) -> Vec<u8> {
    if let Some(c) = colors {
        assert_eq!(c.len(), points.len(), "one color per point");
    }
    let mut out = header(points.len(), colors.is_some(), None).into_bytes();
    out.reserve(points.len() * 15);
    for (i, p) in points.iter().enumerate() {
        push_vertex(&mut out, p);
        if let Some(c) = colors {
            out.extend_from_slice(&c[i]);
        }
    }
    out
}

pub fn write_ply_mesh(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = header(mesh.vertices.len(), false, Some(mesh.faces.len())).into_bytes();
    for p in &mesh.vertices {
        push_vertex(&mut out, p);
    }
    for f in &mesh.faces {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}

#[derive(Debug, Default)]
struct Layout {
    vertices: usize,
    colors: bool,
    faces: Option<usize>,
}

fn perr(msg: impl Into<String>) -> IoError {
    IoError::Ply(msg.into())
}

fn parse_header(bytes: &[u8]) -> Result<(Layout, usize), IoError> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| perr("missing end_header"))?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| perr("header is not ASCII"))?;
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(perr("missing 'ply' magic"));
    }
    let mut layout = Layout::default();
    let mut vertex_props: Vec<(String, String)> = Vec::new();
    let mut face_props: Vec<String> = Vec::new();
    let mut current: Option<&str> = None;
    let mut saw_format = false;
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", "binary_little_endian", "1.0"] => saw_format = true,
            ["format", other, ..] => return Err(perr(format!("unsupported format '{other}'"))),
            ["element", "vertex", n] => {
                if current.is_some() {
                    return Err(perr("vertex element must come first"));
                }
                layout.vertices = n.parse().map_err(|_| perr("bad vertex count"))?;
                current = Some("vertex");
            }
            ["element", "face", n] => {
                if current != Some("vertex") {
                    return Err(perr("face element must follow vertex element"));
                }
                layout.faces = Some(n.parse().map_err(|_| perr("bad face count"))?);
                current = Some("face");
            }
            ["element", name, ..] => return Err(perr(format!("unknown element '{name}'"))),
            ["property", "list", rest @ ..] if current == Some("face") => {
                face_props.push(rest.join(" "));
            }
            ["property", ty, name] if current == Some("vertex") => {
                vertex_props.push((ty.to_string(), name.to_string()));
            }
            _ => return Err(perr(format!("unexpected header line '{line}'"))),
        }
    }
    if !saw_format {
        return Err(perr("missing format line"));
    }
    let names: Vec<(&str, &str)> =
        vertex_props.iter().map(|(t, n)| (t.as_str(), n.as_str())).collect();
    let xyz = [("float", "x"), ("float", "y"), ("float", "z")];
    let rgb = [("uchar", "red"), ("uchar", "green"), ("uchar", "blue")];
    if names.len() == 3 && names[..] == xyz {
        layout.colors = false;
    } else if names.len() == 6 && names[..3] == xyz && names[3..] == rgb {
        layout.colors = true;
    } else {
        return Err(perr(format!("unsupported vertex layout {names:?}")));
    }
    if layout.faces.is_some() && face_props != ["uchar int vertex_indices"] {
        return Err(perr(format!("unsupported face layout {face_props:?}")));
    }
    Ok((layout, end + END.len()))
}

pub type PlyPoints = (Vec<Vec3>, Option<Vec<[u8; 3]>>);

/// Reads the vertex element of a PLY file; a trailing face element is skipped.
pub fn read_ply_points(bytes: &[u8]) -> Result<PlyPoints, IoError> {
    let (layout, start) = parse_header(bytes)?;
    let stride = if layout.colors { 15 } else { 12 };
    let need = layout.vertices.checked_mul(stride).ok_or_else(|| perr("vertex count overflow"))?;
    let body = &bytes[start..];
    if body.len() < need {
        return Err(perr(format!("vertex data truncated: need {need} bytes, have {}", body.len())));
    }
    let mut points = Vec::with_capacity(layout.vertices);
    let mut colors = layout.colors.then(|| Vec::with_capacity(layout.vertices));
    for rec in body[..need].chunks_exact(stride) {
        let f = |o: usize| f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]) as f64;
        points.push(Vec3::new(f(0), f(4), f(8)));
        if let Some(c) = colors.as_mut() {
            c.push([rec[12], rec[13], rec[14]]);
        }
    }
    Ok((points, colors))
}

pub fn read_ply_mesh(bytes: &[u8]) -> Result<TriangleMesh, IoError> {
    let (layout, start) = parse_header(bytes)?;
    let (vertices, _) = read_ply_points(bytes)?;
    let stride = if layout.colors { 15 } else { 12 };
    let mut cursor = start + layout.vertices * stride;
    let mut faces = Vec::with_capacity(layout.faces.unwrap_or(0));
    for _ in 0..layout.faces.unwrap_or(0) {
        let n = *bytes.get(cursor).ok_or_else(|| perr("face data truncated"))? as usize;
        if n != 3 {
            return Err(perr(format!("only triangles are supported, found {n}-gon")));
        }
        let rec = bytes.get(cursor + 1..cursor + 13).ok_or_else(|| perr("face data truncated"))?;
        let idx = |o: usize| i32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]);
        let f = [idx(0), idx(4), idx(8)];
        if f.iter().any(|&i| i < 0) {
            return Err(perr("negative face index"));
        }
        faces.push([f[0] as u32, f[1] as u32, f[2] as u32]);
        cursor += 13;
    }
    Ok(TriangleMesh { vertices, faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_cloud_is_valid() {
        let bytes = write_ply_points(&[], None);
        assert!(String::from_utf8_lossy(&bytes).contains("element vertex 0\n"));
        let (pts, colors) = read_ply_points(&bytes).unwrap();
        assert!(pts.is_empty());
        assert!(colors.is_none());
    }

    #[test]
    fn three_points_round_trip_with_colors() {
        let pts = vec![Vec3::new(0.5, -1.25, 3.0), Vec3::new(1e-3_f32 as f64, 2.0, 0.0), Vec3::new(-7.0, 8.5, 9.75)];
        let cols = vec![[1, 2, 3], [255, 0, 128], [9, 9, 9]];
        let bytes = write_ply_points(&pts, Some(&cols));
        let (back, back_cols) = read_ply_points(&bytes).unwrap();
        assert_eq!(back, pts);
        assert_eq!(back_cols.unwrap(), cols);
        assert_eq!(write_ply_points(&back, Some(&cols)), bytes);
    }

    #[test]
    fn cube_mesh_header_counts() {
        let vertices: Vec<Vec3> = (0..8)
            .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
            .collect();
        let faces: Vec<[u32; 3]> = vec![
            [0, 2, 1], [1, 2, 3], [4, 5, 6], [5, 7, 6], [0, 1, 4], [1, 5, 4],
            [2, 6, 3], [3, 6, 7], [0, 4, 2], [2, 4, 6], [1, 3, 5], [3, 7, 5],
        ];
        let mesh = TriangleMesh { vertices, faces };
        mesh.validate().unwrap();
        let bytes = write_ply_mesh(&mesh);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("element vertex 8\n"));
        assert!(text.contains("element face 12\n"));
        assert_eq!(read_ply_mesh(&bytes).unwrap(), mesh);
        // the vertex reader skips faces
        assert_eq!(read_ply_points(&bytes).unwrap().0.len(), 8);
    }

    #[test]
    fn rejects_unknown_layouts() {
        let ascii = b"ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(read_ply_points(ascii).is_err());
        let normals = b"ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nend_header\n";
        assert!(read_ply_points(normals).is_err());
        let extra = b"ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nelement edge 0\nend_header\n";
        assert!(read_ply_points(extra).is_err());
        let trunc = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0000";
        assert!(read_ply_points(trunc).is_err());
    }

    proptest! {
        #[test]
        fn f32_points_round_trip(raw in proptest::collection::vec((-1e6f32..1e6, -1e6f32..1e6, -1e6f32..1e6), 0..40)) {
            let pts: Vec<Vec3> = raw.iter().map(|&(x, y, z)| Vec3::new(x as f64, y as f64, z as f64)).collect();
            let (back, _) = read_ply_points(&write_ply_points(&pts, None)).unwrap();
            prop_assert_eq!(back, pts);
        }
    }
}
