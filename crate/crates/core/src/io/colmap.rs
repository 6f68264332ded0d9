//! Subset of the COLMAP text model: `PINHOLE` and `SIMPLE_PINHOLE` cameras,
//! images with world-to-camera poses, and 3-D points with tracks.
//!
//! COLMAP places the image origin at the corner of the top-left pixel; this
//! crate uses pixel centers, so principal points and observations are shifted
//! by 0.5 pixel on read and shifted back on write.

use super::{read_file, write_file, IoError};
use crate::geometry::{CameraIntrinsics, CameraPose, PixelCoord, Vec3, View};
use nalgebra::{Quaternion, Rotation3, UnitQuaternion};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct SparsePoint {
    pub point_id: u64,
    pub position: Vec3,
    /// (view index, observed pixel)
    pub track: Vec<(usize, PixelCoord)>,
}

/// Views are ordered by ascending COLMAP image id; `view_id` is the position
/// in that order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseModel {
    pub views: Vec<View>,
    pub image_names: Vec<String>,
    pub points: Vec<SparsePoint>,
}

impl SparseModel {
    /// Points whose track contains `view_id`, with the observed pixel.
    pub fn observations(&self, view_id: usize) -> impl Iterator<Item = (&SparsePoint, PixelCoord)> + '_ {
        self.points.iter().filter_map(move |p| {
            p.track.iter().find(|(v, _)| *v == view_id).map(|(_, px)| (p, *px))
        })
    }

    /// Largest reprojection error over all track observations.
    pub fn max_reprojection_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in &self.points {
            for (v, px) in &p.track {
                let err = match self.views[*v].project(&p.position) {
                    Some((q, _)) => q.distance(px),
                    None => f64::INFINITY,
                };
                worst = worst.max(err);
            }
        }
        worst
    }
}

fn err(file: &str, line: usize, msg: impl Into<String>) -> IoError {
    IoError::Colmap { file: file.to_string(), line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, file: &str, line: usize, what: &str) -> Result<T, IoError> {
    let tok = tok.ok_or_else(|| err(file, line, format!("missing {what}")))?;
    tok.parse().map_err(|_| err(file, line, format!("cannot parse {what} from '{tok}'")))
}

/// Reads `cameras.txt`, `images.txt` and `points3D.txt` from `dir`.
pub fn parse_colmap_model(dir: &Path) -> Result<SparseModel, IoError> {
    let read = |name: &str| -> Result<String, IoError> {
        let bytes = read_file(&dir.join(name))?;
        String::from_utf8(bytes).map_err(|_| err(name, 0, "file is not valid UTF-8"))
    };
    parse_colmap_text(&read("cameras.txt")?, &read("images.txt")?, &read("points3D.txt")?)
}

pub use parse_colmap_model as read_colmap_model;

struct RawImage {
    name: String,
    camera_id: u64,
    pose: CameraPose,
    points2d: Vec<(PixelCoord, i64)>,
}

pub fn parse_colmap_text(cameras: &str, images: &str, points: &str) -> Result<SparseModel, IoError> {
    let cams = parse_cameras(cameras)?;
    let raw_images = parse_images(images)?;

    let mut views = Vec::with_capacity(raw_images.len());
    let mut image_names = Vec::with_capacity(raw_images.len());
    let mut index_of_image = HashMap::new();
    for (i, (image_id, (line, img))) in raw_images.iter().enumerate() {
        let k = cams
            .get(&img.camera_id)
            .ok_or_else(|| err("images.txt", *line, format!("image {image_id} references unknown camera {}", img.camera_id)))?;
        views.push(View::new(i, *k, img.pose));
        image_names.push(img.name.clone());
        index_of_image.insert(*image_id, i);
    }

    let mut pts = Vec::new();
    for (lineno, line) in points.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let point_id: u64 = parse_num(tok.next(), "points3D.txt", line_no, "POINT3D_ID")?;
        let x: f64 = parse_num(tok.next(), "points3D.txt", line_no, "X")?;
        let y: f64 = parse_num(tok.next(), "points3D.txt", line_no, "Y")?;
        let z: f64 = parse_num(tok.next(), "points3D.txt", line_no, "Z")?;
        for what in ["R", "G", "B"] {
            let _: u8 = parse_num(tok.next(), "points3D.txt", line_no, what)?;
        }
        let _: f64 = parse_num(tok.next(), "points3D.txt", line_no, "ERROR")?;
        let rest: Vec<&str> = tok.collect();
        if rest.len() % 2 != 0 {
            return Err(err("points3D.txt", line_no, "track has an odd number of entries"));
        }
        let mut track = Vec::with_capacity(rest.len() / 2);
        for pair in rest.chunks_exact(2) {
            let image_id: u64 = parse_num(Some(pair[0]), "points3D.txt", line_no, "IMAGE_ID")?;
            let idx: usize = parse_num(Some(pair[1]), "points3D.txt", line_no, "POINT2D_IDX")?;
            let &view = index_of_image
                .get(&image_id)
                .ok_or_else(|| err("points3D.txt", line_no, format!("track references unknown image {image_id}")))?;
            let img = &raw_images[&image_id].1;
            let (px, _) = img.points2d.get(idx).ok_or_else(|| {
                err("points3D.txt", line_no, format!("image {image_id} has no 2-D point {idx}"))
            })?;
            track.push((view, *px));
        }
        if track.len() < 2 {
            log::warn!("points3D.txt:{line_no}: point {point_id} has fewer than two observations, skipped");
            continue;
        }
        pts.push(SparsePoint { point_id, position: Vec3::new(x, y, z), track });
    }
    Ok(SparseModel { views, image_names, points: pts })
}

fn parse_cameras(text: &str) -> Result<HashMap<u64, CameraIntrinsics>, IoError> {
    const F: &str = "cameras.txt";
    let mut cams = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let n = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let id: u64 = parse_num(tok.next(), F, n, "CAMERA_ID")?;
        let model = tok.next().ok_or_else(|| err(F, n, "missing MODEL"))?;
        let width: usize = parse_num(tok.next(), F, n, "WIDTH")?;
        let height: usize = parse_num(tok.next(), F, n, "HEIGHT")?;
        let params: Vec<f64> = tok
            .map(|t| t.parse::<f64>().map_err(|_| err(F, n, format!("cannot parse parameter '{t}'"))))
            .collect::<Result<_, _>>()?;
        let (fx, fy, cx, cy) = match (model, params.as_slice()) {
            ("PINHOLE", [fx, fy, cx, cy]) => (*fx, *fy, *cx, *cy),
            ("SIMPLE_PINHOLE", [f, cx, cy]) => (*f, *f, *cx, *cy),
            ("PINHOLE" | "SIMPLE_PINHOLE", p) => {
                return Err(err(F, n, format!("{model} expects {} parameters, got {}", if model == "PINHOLE" { 4 } else { 3 }, p.len())));
            }
            (other, _) => return Err(err(F, n, format!("unsupported camera model '{other}'"))),
        };
        let k = CameraIntrinsics::new(fx, fy, cx - 0.5, cy - 0.5, width, height)
            .map_err(|e| err(F, n, e.to_string()))?;
        if cams.insert(id, k).is_some() {
            return Err(err(F, n, format!("duplicate camera id {id}")));
        }
    }
    Ok(cams)
}

fn parse_images(text: &str) -> Result<BTreeMap<u64, (usize, RawImage)>, IoError> {
    const F: &str = "images.txt";
    let mut out = BTreeMap::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim_start().starts_with('#'));
    while let Some((lineno, line)) = lines.next() {
        let n = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let id: u64 = parse_num(tok.next(), F, n, "IMAGE_ID")?;
        let mut q = [0.0f64; 4];
        for (i, what) in ["QW", "QX", "QY", "QZ"].iter().enumerate() {
            q[i] = parse_num(tok.next(), F, n, what)?;
        }
        let mut t = [0.0f64; 3];
        for (i, what) in ["TX", "TY", "TZ"].iter().enumerate() {
            t[i] = parse_num(tok.next(), F, n, what)?;
        }
        let camera_id: u64 = parse_num(tok.next(), F, n, "CAMERA_ID")?;
        let name = tok.next().ok_or_else(|| err(F, n, "missing NAME"))?.to_string();
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        if (quat.norm() - 1.0).abs() > 1e-6 {
            return Err(err(F, n, "quaternion is not unit length"));
        }
        let rot = UnitQuaternion::from_quaternion(quat).to_rotation_matrix().into_inner();
        let pose = CameraPose::new(rot, Vec3::new(t[0], t[1], t[2])).map_err(|e| err(F, n, e.to_string()))?;

        let mut points2d = Vec::new();
        if let Some((pl, pline)) = lines.next() {
            let toks: Vec<&str> = pline.split_whitespace().collect();
            if toks.len() % 3 != 0 {
                return Err(err(F, pl + 1, "POINTS2D entries must be (X, Y, POINT3D_ID) triples"));
            }
            for tri in toks.chunks_exact(3) {
                let x: f64 = parse_num(Some(tri[0]), F, pl + 1, "X")?;
                let y: f64 = parse_num(Some(tri[1]), F, pl + 1, "Y")?;
                let pid: i64 = parse_num(Some(tri[2]), F, pl + 1, "POINT3D_ID")?;
                points2d.push((PixelCoord::new(x - 0.5, y - 0.5), pid));
            }
        }
        if out.insert(id, (n, RawImage { name, camera_id, pose, points2d })).is_some() {
            return Err(err(F, n, format!("duplicate image id {id}")));
        }
    }
    Ok(out)
}

/// Serializes a model as COLMAP text files (one `PINHOLE` camera per view,
/// image and camera ids equal to `view_id + 1`).
pub fn colmap_text(model: &SparseModel) -> (String, String, String) {
    let mut cameras = String::from("# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    for v in &model.views {
        let k = &v.intrinsics;
        let _ = writeln!(
            cameras,
            "{} PINHOLE {} {} {} {} {} {}",
            v.view_id + 1, k.width, k.height, k.fx, k.fy, k.cx + 0.5, k.cy + 0.5
        );
    }

    // per-view 2-D observation lists; points reference them by index
    let mut obs: Vec<Vec<(PixelCoord, u64)>> = vec![Vec::new(); model.views.len()];
    let mut tracks: Vec<Vec<(usize, usize)>> = Vec::with_capacity(model.points.len());
    for p in &model.points {
        let mut t = Vec::with_capacity(p.track.len());
        for (v, px) in &p.track {
            t.push((*v, obs[*v].len()));
            obs[*v].push((*px, p.point_id));
        }
        tracks.push(t);
    }

    let mut images = String::from("# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    for (i, v) in model.views.iter().enumerate() {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*v.pose.rotation()));
        let t = v.pose.translation();
        let name = model.image_names.get(i).cloned().unwrap_or_else(|| format!("view_{i:04}.png"));
        let _ = writeln!(
            images,
            "{} {} {} {} {} {} {} {} {} {}",
            v.view_id + 1, q.w, q.i, q.j, q.k, t.x, t.y, t.z, v.view_id + 1, name
        );
        let line: Vec<String> = obs[i]
            .iter()
            .map(|(px, pid)| format!("{} {} {}", px.x + 0.5, px.y + 0.5, pid))
            .collect();
        let _ = writeln!(images, "{}", line.join(" "));
    }

    let mut points = String::from("# 3D point list with one line of data per point:\n#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    for (p, t) in model.points.iter().zip(&tracks) {
        let _ = write!(points, "{} {} {} {} 128 128 128 0", p.point_id, p.position.x, p.position.y, p.position.z);
        for (v, idx) in t {
            let _ = write!(points, " {} {}", model.views[*v].view_id + 1, idx);
        }
        points.push('\n');
    }
    (cameras, images, points)
}

pub fn write_colmap_model(dir: &Path, model: &SparseModel) -> Result<(), IoError> {
    let (c, i, p) = colmap_text(model);
    write_file(&dir.join("cameras.txt"), c.as_bytes())?;
    write_file(&dir.join("images.txt"), i.as_bytes())?;
    write_file(&dir.join("points3D.txt"), p.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    const CAMERAS: &str = "# comment\n1 PINHOLE 640 480 500 500 320 240\n";
    const IMAGES: &str = "# comment\n1 1 0 0 0 0 0 0 1 a.png\n320 240 7 10 10 -1\n2 1 0 0 0 -0.5 0 0 1 b.png\n195 240 7\n";
    const POINTS: &str = "7 0 0 2 200 10 10 0.1 1 0 2 0\n";

    #[test]
    fn camera_fields_and_half_pixel_shift() {
        let m = parse_colmap_text(CAMERAS, IMAGES, POINTS).unwrap();
        let k = m.views[0].intrinsics;
        assert_eq!((k.fx, k.fy, k.cx, k.cy, k.width, k.height), (500.0, 500.0, 319.5, 239.5, 640, 480));
        assert_eq!(*m.views[0].pose.rotation(), Matrix3::identity());
        assert_eq!(m.image_names, vec!["a.png", "b.png"]);
    }

    #[test]
    fn fixture_reprojects_and_drops_untracked_observations() {
        let m = parse_colmap_text(CAMERAS, IMAGES, POINTS).unwrap();
        assert_eq!(m.points.len(), 1);
        let p = &m.points[0];
        assert_eq!(p.track.len(), 2);
        assert_eq!(p.track[0], (0, PixelCoord::new(319.5, 239.5)));
        assert!(m.max_reprojection_error() < 1e-6, "{}", m.max_reprojection_error());
    }

    #[test]
    fn simple_pinhole() {
        let m = parse_colmap_text("3 SIMPLE_PINHOLE 100 80 90 50 40\n", "5 1 0 0 0 0 0 0 3 x.png\n\n", "").unwrap();
        let k = m.views[0].intrinsics;
        assert_eq!((k.fx, k.fy, k.cx, k.cy), (90.0, 90.0, 49.5, 39.5));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_colmap_text("# c\n1 OPENCV 640 480 1 1 1 1 0 0 0 0\n", "", "").unwrap_err();
        assert!(e.to_string().contains("cameras.txt:2") && e.to_string().contains("OPENCV"), "{e}");
        let e = parse_colmap_text(CAMERAS, "1 1 0 0 0 0 0 0 9 a.png\n\n", "").unwrap_err();
        assert!(e.to_string().contains("images.txt:1"), "{e}");
        let e = parse_colmap_text(CAMERAS, IMAGES, "\n7 0 0 2 1 1 1 0 1 0 3 0\n").unwrap_err();
        assert!(e.to_string().contains("points3D.txt:2") && e.to_string().contains("unknown image 3"), "{e}");
        let e = parse_colmap_text(CAMERAS, IMAGES, "7 0 0 zz 1 1 1 0 1 0 2 0\n").unwrap_err();
        assert!(e.to_string().contains("points3D.txt:1"), "{e}");
        let e = parse_colmap_text(CAMERAS, IMAGES, "7 0 0 2 1 1 1 0 1 5 2 0\n").unwrap_err();
        assert!(e.to_string().contains("no 2-D point 5"), "{e}");
    }

    #[test]
    fn text_round_trip() {
        let m = parse_colmap_text(CAMERAS, IMAGES, POINTS).unwrap();
        let (c, i, p) = colmap_text(&m);
        let back = parse_colmap_text(&c, &i, &p).unwrap();
        assert_eq!(back.views.len(), 2);
        assert_eq!(back.points[0].position, m.points[0].position);
        for (a, b) in back.points[0].track.iter().zip(&m.points[0].track) {
            assert_eq!(a.0, b.0);
            assert_abs_diff_eq!(a.1.x, b.1.x, epsilon = 1e-9);
            assert_abs_diff_eq!(a.1.y, b.1.y, epsilon = 1e-9);
        }
        assert_eq!(back.views[1].pose, m.views[1].pose);
    }
}
