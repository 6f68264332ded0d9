use crate::geometry::PixelCoord;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepthMapError {
    #[error("depth map expects {expected} values for {width}x{height}, got {actual}")]
    SizeMismatch { width: usize, height: usize, expected: usize, actual: usize },
    #[error("depth map dimensions must be non-zero")]
    Empty,
}

/// Dense row-major depth raster.
///
/// A pixel is valid iff its value is finite and strictly positive; invalid
/// pixels written by this crate are stored as `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

#[inline]
pub fn is_valid_depth(d: f64) -> bool {
    d > 0.0 && d.is_finite()
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, DepthMapError> {
        if width == 0 || height == 0 {
            return Err(DepthMapError::Empty);
        }
        if values.len() != width * height {
            return Err(DepthMapError::SizeMismatch {
                width,
                height,
                expected: width * height,
                actual: values.len(),
            });
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0);
        Self { width, height, values: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.values[y * self.width + x] = value;
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        is_valid_depth(self.get(x, y))
    }

    /// Valid depth at an integer pixel.
    #[inline]
    pub fn depth_at(&self, x: usize, y: usize) -> Option<f64> {
        let d = self.get(x, y);
        is_valid_depth(d).then_some(d)
    }

    pub fn mask(&self) -> Vec<bool> {
        self.values.iter().map(|&d| is_valid_depth(d)).collect()
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&d| is_valid_depth(d)).count()
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        self.set(x, y, 0.0);
    }

    pub fn contains(&self, p: &PixelCoord) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64
    }

    /// Bilinear sample at a continuous pixel position.
    ///
    /// Returns `None` when the position is out of bounds or any tap of the
    /// (edge-clamped) 2x2 footprint is invalid.
    pub fn sample_bilinear(&self, p: &PixelCoord) -> Option<f64> {
        if !self.contains(p) {
            return None;
        }
        let x0 = (p.x.floor() as usize).min(self.width - 1);
        let y0 = (p.y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = p.x - x0 as f64;
        let fy = p.y - y0 as f64;
        let d00 = self.depth_at(x0, y0)?;
        let d10 = self.depth_at(x1, y0)?;
        let d01 = self.depth_at(x0, y1)?;
        let d11 = self.depth_at(x1, y1)?;
        let top = d00 + (d10 - d00) * fx;
        let bottom = d01 + (d11 - d01) * fx;
        Some(top + (bottom - top) * fy)
    }

    /// Bilinear resampling to a new resolution with pixel-center alignment.
    /// Output pixels whose footprint touches an invalid sample are invalid.
    pub fn resample(&self, width: usize, height: usize) -> DepthMap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        DepthMap::from_fn(width, height, |x, y| {
            let p = PixelCoord::new(
                ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64),
                ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64),
            );
            self.sample_bilinear(&p).unwrap_or(0.0)
        })
    }

    /// Median of the valid values, `None` if there are none.
    pub fn median(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.values.iter().copied().filter(|&d| is_valid_depth(d)).collect();
        median_in_place(&mut v)
    }
}

pub(crate) fn median_in_place(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
