//! Pinhole camera model.
//!
//! Poses map world to camera (`x_cam = R * x_world + t`), so the depth of a
//! point is the z-component of its camera-frame coordinates. Pixel `(0, 0)` is
//! the center of the top-left pixel.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not orthonormal with det +1 (deviation {0:e})")]
    NotARotation(f64),
    #[error("depth must be positive and finite, got {0}")]
    NonPositiveDepth(f64),
    #[error("degenerate look-at: eye coincides with target or up is parallel to the view direction")]
    DegenerateLookAt,
}

/// Continuous pixel coordinates, x rightward and y downward.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PixelCoord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "image size must be non-zero ({width}x{height})"
            )));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside the {width}x{height} image"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Intrinsics for a symmetric frustum with the given horizontal field of view.
    pub fn from_fov(hfov_rad: f64, width: usize, height: usize) -> Result<Self, GeometryError> {
        let f = 0.5 * width as f64 / (0.5 * hfov_rad).tan();
        Self::new(
            f,
            f,
            0.5 * (width as f64 - 1.0),
            0.5 * (height as f64 - 1.0),
            width,
            height,
        )
    }

    pub fn contains(&self, p: &PixelCoord) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64
    }

    /// Intrinsics for the same camera imaged at a different resolution.
    pub fn rescaled(&self, width: usize, height: usize) -> Result<Self, GeometryError> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(
            self.fx * sx,
            self.fy * sy,
            (self.cx + 0.5) * sx - 0.5,
            (self.cy + 0.5) * sy - 0.5,
            width,
            height,
        )
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeometryError> {
        let dev = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if !(dev <= ORTHONORMAL_TOL && (det - 1.0).abs() <= ORTHONORMAL_TOL) {
            return Err(GeometryError::NotARotation(dev.max((det - 1.0).abs())));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    /// Camera at `eye` looking toward `target`; camera y points down, so
    /// `up` is mapped to image-up.
    pub fn look_at(eye: &Vec3, target: &Vec3, up: &Vec3) -> Result<Self, GeometryError> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(GeometryError::DegenerateLookAt);
        }
        let z = forward.normalize();
        let down = -up - z * (-up).dot(&z);
        if down.norm() < 1e-9 {
            return Err(GeometryError::DegenerateLookAt);
        }
        let y = down.normalize();
        let x = y.cross(&z);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * eye);
        Self::new(rotation, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn transform(&self, world: &Vec3) -> Vec3 {
        self.rotation * world + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &CameraPose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub view_id: usize,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

impl View {
    pub fn new(view_id: usize, intrinsics: CameraIntrinsics, pose: CameraPose) -> Self {
        Self { view_id, intrinsics, pose }
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    /// Camera-frame depth of a world point.
    pub fn depth_of(&self, world: &Vec3) -> f64 {
        self.pose.transform(world).z
    }

    /// Projects a world point. Returns `None` when the point is at or behind
    /// the camera plane; bounds are not checked.
    pub fn project(&self, world: &Vec3) -> Option<(PixelCoord, f64)> {
        let pc = self.pose.transform(world);
        let depth = pc.z;
        if !(depth > 0.0) {
            return None;
        }
        let k = &self.intrinsics;
        let px = PixelCoord::new(k.fx * pc.x / depth + k.cx, k.fy * pc.y / depth + k.cy);
        Some((px, depth))
    }

    pub fn backproject(&self, pixel: &PixelCoord, depth: f64) -> Result<Vec3, GeometryError> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(GeometryError::NonPositiveDepth(depth));
        }
        Ok(self.backproject_unchecked(pixel, depth))
    }

    pub(crate) fn backproject_unchecked(&self, pixel: &PixelCoord, depth: f64) -> Vec3 {
        let pc = self.camera_ray(pixel) * depth;
        self.pose.rotation.transpose() * (pc - self.pose.translation)
    }

    /// Camera-frame ray through `pixel` with unit z-component.
    pub fn camera_ray(&self, pixel: &PixelCoord) -> Vec3 {
        let k = &self.intrinsics;
        Vec3::new((pixel.x - k.cx) / k.fx, (pixel.y - k.cy) / k.fy, 1.0)
    }

    /// World-frame unit ray direction through `pixel`.
    pub fn world_ray(&self, pixel: &PixelCoord) -> Vec3 {
        (self.pose.rotation.transpose() * self.camera_ray(pixel)).normalize()
    }

    pub fn contains(&self, pixel: &PixelCoord) -> bool {
        self.intrinsics.contains(pixel)
    }

    /// Maps an in-bounds pixel to `[-1, 1]^2`, corners exactly at ±1.
    pub fn normalize_pixel(&self, pixel: &PixelCoord) -> (f64, f64) {
        normalize_pixel(self.width(), self.height(), pixel)
    }

    pub fn center(&self) -> Vec3 {
        self.pose.center()
    }
}

pub fn normalize_pixel(width: usize, height: usize, pixel: &PixelCoord) -> (f64, f64) {
    let u = if width > 1 { 2.0 * pixel.x / (width - 1) as f64 - 1.0 } else { 0.0 };
    let v = if height > 1 { 2.0 * pixel.y / (height - 1) as f64 - 1.0 } else { 0.0 };
    (u, v)
}

/// Normalized view index `i / (N - 1)`, zero for single-view scenes.
pub fn normalized_view_index(index: usize, num_views: usize) -> f64 {
    if num_views <= 1 {
        0.0
    } else {
        index as f64 / (num_views - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn vga_view() -> View {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        View::new(0, k, CameraPose::identity())
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let (px, d) = vga_view().project(&Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!(px, PixelCoord::new(320.0, 240.0));
        assert_eq!(d, 2.0);
    }

    #[test]
    fn off_axis_projection() {
        let (px, d) = vga_view().project(&Vec3::new(0.4, 0.0, 2.0)).unwrap();
        assert_abs_diff_eq!(px.x, 420.0, epsilon = 1e-12);
        assert_abs_diff_eq!(px.y, 240.0, epsilon = 1e-12);
        assert_eq!(d, 2.0);
    }

    #[test]
    fn behind_camera_is_flagged() {
        assert!(vga_view().project(&Vec3::new(0.0, 0.0, -1.0)).is_none());
        assert!(vga_view().project(&Vec3::new(1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn backprojection_examples() {
        let v = vga_view();
        let p = v.backproject(&PixelCoord::new(320.0, 240.0), 3.0).unwrap();
        assert_eq!(p, Vec3::new(0.0, 0.0, 3.0));
        let p = v.backproject(&PixelCoord::new(420.0, 240.0), 2.0).unwrap();
        assert_abs_diff_eq!(p, Vec3::new(0.4, 0.0, 2.0), epsilon = 1e-12);
        assert!(v.backproject(&PixelCoord::new(1.0, 1.0), 0.0).is_err());
        assert!(v.backproject(&PixelCoord::new(1.0, 1.0), -2.0).is_err());
    }

    #[test]
    fn pixel_normalization() {
        let v = vga_view();
        assert_eq!(v.normalize_pixel(&PixelCoord::new(0.0, 0.0)), (-1.0, -1.0));
        assert_eq!(v.normalize_pixel(&PixelCoord::new(639.0, 479.0)), (1.0, 1.0));
        let (u, w) = v.normalize_pixel(&PixelCoord::new(319.5, 239.5));
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn view_index_normalization() {
        assert_eq!(normalized_view_index(0, 1), 0.0);
        assert_eq!(normalized_view_index(0, 2), 0.0);
        assert_eq!(normalized_view_index(1, 2), 1.0);
        assert_eq!(normalized_view_index(2, 5), 0.5);
    }

    #[test]
    fn rejects_bad_rotation_and_intrinsics() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = 1.01;
        assert!(CameraPose::new(r, Vec3::zeros()).is_err());
        // reflection
        let r = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(CameraPose::new(r, Vec3::zeros()).is_err());
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 5.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let eye = Vec3::new(1.0, -2.0, 3.0);
        let target = Vec3::new(0.2, 0.1, -0.3);
        let pose = CameraPose::look_at(&eye, &target, &Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let v = View::new(0, CameraIntrinsics::from_fov(1.0, 64, 48).unwrap(), pose);
        let (px, d) = v.project(&target).unwrap();
        assert_abs_diff_eq!(px.x, v.intrinsics.cx, epsilon = 1e-9);
        assert_abs_diff_eq!(px.y, v.intrinsics.cy, epsilon = 1e-9);
        assert_abs_diff_eq!(d, (target - eye).norm(), epsilon = 1e-12);
        assert_abs_diff_eq!(v.center(), eye, epsilon = 1e-12);
        // world up appears toward smaller image y
        let (above, _) = v.project(&(target + Vec3::new(0.0, 0.1, 0.0))).unwrap();
        assert!(above.y < px.y);
    }

    proptest! {
        #[test]
        fn project_backproject_round_trip(
            x in 0.0f64..639.0, y in 0.0f64..479.0, depth in 1e-3f64..1e3,
            ax in -3.0f64..3.0, ay in -3.0f64..3.0, az in -3.0f64..3.0,
            tx in -5.0f64..5.0, ty in -5.0f64..5.0, tz in -5.0f64..5.0,
        ) {
            let r = Rotation3::from_euler_angles(ax, ay, az).into_inner();
            let pose = CameraPose::new(r, Vec3::new(tx, ty, tz)).unwrap();
            let v = View::new(0, CameraIntrinsics::new(500.0, 480.0, 320.0, 240.0, 640, 480).unwrap(), pose);
            let p = PixelCoord::new(x, y);
            let w = v.backproject(&p, depth).unwrap();
            let (q, d) = v.project(&w).unwrap();
            prop_assert!(q.distance(&p) < 1e-9);
            prop_assert!((d - depth).abs() <= 1e-9 * depth.max(1.0));
        }

        #[test]
        fn pose_inverse_composes_to_identity(
            ax in -3.0f64..3.0, ay in -3.0f64..3.0, az in -3.0f64..3.0,
            tx in -5.0f64..5.0, ty in -5.0f64..5.0, tz in -5.0f64..5.0,
        ) {
            let r = Rotation3::from_euler_angles(ax, ay, az).into_inner();
            let pose = CameraPose::new(r, Vec3::new(tx, ty, tz)).unwrap();
            let id = pose.compose(&pose.inverse());
            prop_assert!((id.rotation() - Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!(id.translation().norm() < 1e-9);
        }

        #[test]
        fn depth_is_camera_z(px in -10.0f64..10.0, py in -10.0f64..10.0, pz in -10.0f64..10.0) {
            let pose = CameraPose::look_at(&Vec3::new(0.0, 0.0, -4.0), &Vec3::zeros(), &Vec3::y()).unwrap();
            let v = View::new(0, CameraIntrinsics::from_fov(1.2, 64, 64).unwrap(), pose);
            let w = Vec3::new(px, py, pz);
            let z = pose.transform(&w).z;
            match v.project(&w) {
                Some((_, d)) => prop_assert_eq!(d, z),
                None => prop_assert!(z <= 0.0),
            }
        }
    }
}
