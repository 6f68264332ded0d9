//! Static 3-d tree for exact nearest-neighbor distances.

use crate::geometry::Vec3;

#[derive(Debug, Clone)]
pub struct KdTree {
    // points reordered so every subtree is a contiguous range whose median
    // element splits on `axis(depth)`
    points: Vec<Vec3>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut pts = points.to_vec();
        build(&mut pts, 0);
        Self { points: pts }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance from `q` to the closest stored point (`inf` when empty).
    pub fn nearest_distance(&self, q: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        search(&self.points, 0, q, &mut best);
        best.sqrt()
    }
}

fn build(pts: &mut [Vec3], depth: usize) {
    if pts.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = pts.len() / 2;
    pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let (left, rest) = pts.split_at_mut(mid);
    build(left, depth + 1);
    build(&mut rest[1..], depth + 1);
}

fn search(pts: &[Vec3], depth: usize, q: &Vec3, best: &mut f64) {
    if pts.is_empty() {
        return;
    }
    let mid = pts.len() / 2;
    let p = &pts[mid];
    let d2 = (p - q).norm_squared();
    if d2 < *best {
        *best = d2;
    }
    let axis = depth % 3;
    let diff = q[axis] - p[axis];
    let (near, far) = if diff < 0.0 { (&pts[..mid], &pts[mid + 1..]) } else { (&pts[mid + 1..], &pts[..mid]) };
    search(near, depth + 1, q, best);
    if diff * diff < *best {
        search(far, depth + 1, q, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut rnd = || Vec3::new(rng.random(), rng.random(), rng.random());
        let pts: Vec<Vec3> = (0..400).map(|_| rnd()).collect();
        let tree = KdTree::new(&pts);
        for _ in 0..200 {
            let q = rnd() * 1.2;
            let brute = pts.iter().map(|p| (p - q).norm_squared()).fold(f64::INFINITY, f64::min).sqrt();
            assert_eq!(tree.nearest_distance(&q), brute);
        }
        assert_eq!(KdTree::new(&[]).nearest_distance(&Vec3::zeros()), f64::INFINITY);
    }
}
