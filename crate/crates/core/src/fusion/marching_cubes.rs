//! Marching cubes over the zero level set of a [`TsdfVolume`].
//!
//! The case table is derived at first use instead of being transcribed.
//! On every cube face, walked counter-clockwise as seen from outside, each run
//! of inside corners (sdf < 0) is cut off by one segment from the crossing
//! where the walk enters the run to the crossing where it leaves it. Ambiguous
//! faces therefore always separate their inside corners, and two cubes sharing
//! a face produce the same segment in opposite directions, so the surface is
//! watertight. Segments chain into loops that are fan-triangulated; triangle
//! normals point toward positive distance.

use super::TsdfVolume;
use crate::geometry::Vec3;
use crate::io::TriangleMesh;
use std::collections::HashMap;
use std::sync::OnceLock;

/// Corner offsets, in the customary numbering.
pub const CORNERS: [[usize; 3]; 8] =
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]];

pub const EDGES: [[usize; 2]; 12] =
    [[0, 1], [1, 2], [2, 3], [3, 0], [4, 5], [5, 6], [6, 7], [7, 4], [0, 4], [1, 5], [2, 6], [3, 7]];

/// Cube faces as corner cycles, counter-clockwise seen from outside.
pub const FACES: [[usize; 4]; 6] =
    [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [3, 7, 6, 2], [0, 4, 7, 3], [1, 2, 6, 5]];

fn edge_between(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("face corners are adjacent")
}

/// Triangles (as edge-index triples) for one inside-corner bitmask.
fn triangulate_case(case: u8) -> Vec<[u8; 3]> {
    let inside = |c: usize| case & (1 << c) != 0;
    // next[entry edge] = exit edge
    let mut next: [Option<usize>; 12] = [None; 12];
    for face in FACES {
        let start = match (0..4).find(|&i| !inside(face[i])) {
            Some(s) => s,
            None => continue,
        };
        let mut entry = None;
        for step in 0..4 {
            let a = face[(start + step) % 4];
            let b = face[(start + step + 1) % 4];
            match (inside(a), inside(b)) {
                (false, true) => entry = Some(edge_between(a, b)),
                (true, false) => {
                    let from = entry.take().expect("a run of inside corners starts with an entry");
                    next[from] = Some(edge_between(a, b));
                }
                _ => {}
            }
        }
    }
    let mut tris = Vec::new();
    let mut used = [false; 12];
    for first in 0..12 {
        if next[first].is_none() || used[first] {
            continue;
        }
        let mut lp = vec![first];
        used[first] = true;
        let mut cur = next[first].expect("checked");
        while cur != first {
            used[cur] = true;
            lp.push(cur);
            cur = next[cur].expect("crossings form closed loops");
        }
        for i in 1..lp.len() - 1 {
            tris.push([lp[0] as u8, lp[i] as u8, lp[i + 1] as u8]);
        }
    }
    tris
}

pub fn case_table() -> &'static [Vec<[u8; 3]>; 256] {
    static TABLE: OnceLock<[Vec<[u8; 3]>; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|c| triangulate_case(c as u8)))
}

/// Extracts the zero level set. Cells with any zero-weight corner are
/// skipped; an empty or crossing-free volume yields an empty mesh.
pub fn extract_mesh(volume: &TsdfVolume) -> TriangleMesh {
    let table = case_table();
    let [nx, ny, nz] = volume.dims();
    let sdf = volume.sdf();
    let weight = volume.weights();
    let mut mesh = TriangleMesh::default();
    let mut vertex_of: HashMap<usize, u32> = HashMap::new();
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut case = 0u8;
                let mut vals = [0.0; 8];
                let mut idx = [0usize; 8];
                let mut usable = true;
                for (c, off) in CORNERS.iter().enumerate() {
                    let n = volume.index(i + off[0], j + off[1], k + off[2]);
                    if weight[n] <= 0.0 {
                        usable = false;
                        break;
                    }
                    idx[c] = n;
                    vals[c] = sdf[n];
                    if vals[c] < 0.0 {
                        case |= 1 << c;
                    }
                }
                if !usable || case == 0 || case == 255 {
                    continue;
                }
                for tri in &table[case as usize] {
                    let mut face = [0u32; 3];
                    for (slot, &e) in face.iter_mut().zip(tri) {
                        let [a, b] = EDGES[e as usize];
                        let axis = (0..3).find(|&d| CORNERS[a][d] != CORNERS[b][d]).expect("edge spans one axis");
                        let (lo, hi) = if CORNERS[a][axis] < CORNERS[b][axis] { (a, b) } else { (b, a) };
                        let key = idx[lo] * 3 + axis;
                        *slot = *vertex_of.entry(key).or_insert_with(|| {
                            let (s0, s1) = (vals[lo], vals[hi]);
                            let t = s0 / (s0 - s1);
                            let p0 = volume.position(i + CORNERS[lo][0], j + CORNERS[lo][1], k + CORNERS[lo][2]);
                            let mut p = p0;
                            p[axis] += t * volume.voxel_size();
                            mesh.vertices.push(p);
                            (mesh.vertices.len() - 1) as u32
                        });
                    }
                    if face[0] != face[1] && face[1] != face[2] && face[0] != face[2] {
                        mesh.faces.push(face);
                    }
                }
            }
        }
    }
    mesh
}

/// Face normal (unnormalized) of triangle `f`.
pub fn face_normal(mesh: &TriangleMesh, f: &[u32; 3]) -> Vec3 {
    let [a, b, c] = f.map(|i| mesh.vertices[i as usize]);
    (b - a).cross(&(c - a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases_are_empty() {
        assert!(case_table()[0].is_empty());
        assert!(case_table()[255].is_empty());
        assert_eq!(case_table()[1].len(), 1);
        assert_eq!(case_table()[3].len(), 2);
    }

    #[test]
    fn faces_are_outward_ccw() {
        for (f, face) in FACES.iter().enumerate() {
            let p = face.map(|c| Vec3::new(CORNERS[c][0] as f64, CORNERS[c][1] as f64, CORNERS[c][2] as f64));
            let n = (p[1] - p[0]).cross(&(p[2] - p[1]));
            let center = (p[0] + p[1] + p[2] + p[3]) / 4.0 - Vec3::repeat(0.5);
            assert!(n.dot(&center) > 0.0, "face {f}");
        }
    }

    #[test]
    fn every_case_forms_closed_edge_manifold_patches() {
        // every crossing edge is used, and each directed loop edge appears once
        for case in 1u16..255 {
            let case = case as u8;
            let inside = |c: usize| case & (1 << c) != 0;
            let crossing = (0..12).filter(|&e| inside(EDGES[e][0]) != inside(EDGES[e][1])).count();
            let tris = &case_table()[case as usize];
            let mut used: Vec<u8> = tris.iter().flatten().copied().collect();
            used.sort_unstable();
            used.dedup();
            assert_eq!(used.len(), crossing, "case {case}");
        }
    }

    #[test]
    fn midpoint_interpolation() {
        let mut vol = TsdfVolume::new(Vec3::zeros(), 1.0, [2, 2, 2], 1.0);
        vol.fill_from_fn(|p| if p.x < 0.5 { -0.5 } else { 0.5 });
        let mesh = extract_mesh(&vol);
        assert!(!mesh.is_empty());
        assert!(mesh.vertices.iter().all(|v| (v.x - 0.5).abs() < 1e-15));
        // normal points toward positive distance (+x)
        assert!(mesh.faces.iter().all(|f| face_normal(&mesh, f).x > 0.0));
    }

    #[test]
    fn uniform_volume_is_empty() {
        let mut vol = TsdfVolume::new(Vec3::zeros(), 1.0, [4, 4, 4], 1.0);
        vol.fill_from_fn(|_| 1.0);
        assert!(extract_mesh(&vol).is_empty());
    }

    #[test]
    fn sphere_is_closed_outward_and_on_radius() {
        let r = 0.7;
        let vs = 0.05;
        let mut vol = TsdfVolume::new(Vec3::repeat(-1.0), vs, [41, 41, 41], 4.0 * vs);
        vol.fill_from_fn(|p| p.norm() - r);
        let mesh = extract_mesh(&vol);
        mesh.validate().unwrap();
        for v in &mesh.vertices {
            assert!((v.norm() - r).abs() < vs, "vertex off the sphere: {}", v.norm());
        }
        // each directed edge appears once and its reverse once
        let mut directed = std::collections::HashMap::new();
        for f in &mesh.faces {
            for e in 0..3 {
                *directed.entry((f[e], f[(e + 1) % 3])).or_insert(0) += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            assert_eq!(n, 1);
            assert_eq!(directed.get(&(b, a)), Some(&1));
        }
        for f in &mesh.faces {
            let c = (mesh.vertices[f[0] as usize] + mesh.vertices[f[1] as usize] + mesh.vertices[f[2] as usize]) / 3.0;
            let n = face_normal(&mesh, f);
            // grid points lying exactly on the surface give zero-area faces
            if n.norm() > 1e-12 {
                assert!(n.dot(&c) > 0.0);
            }
        }
    }

    #[test]
    fn unobserved_cells_are_skipped() {
        let vol = TsdfVolume::new(Vec3::zeros(), 1.0, [3, 3, 3], 1.0);
        assert!(extract_mesh(&vol).is_empty());
    }
}
