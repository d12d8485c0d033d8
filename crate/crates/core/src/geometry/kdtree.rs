//! Static 3D kd-tree over a borrowed point slice.
//!
//! The tree is implicit: a permutation of point indices where the median of
//! every subrange is the splitting node. Queries return exactly what a
//! linear scan would (same distance arithmetic, ties resolved to the lowest
//! point index), which keeps chamfer and coincidence counts bit-identical
//! to brute force.

use nalgebra::Point3;

use super::cloud::dist2;

#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [Point3<f64>],
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Point3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        build_rec(points, &mut order, &mut axes);
        Self {
            points,
            order,
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the closest point. `None` on an empty
    /// tree.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, self.order.len(), q, &mut best);
        Some(best)
    }

    /// True when some point lies within squared distance `r2` (inclusive).
    pub fn any_within(&self, q: &Point3<f64>, r2: f64) -> bool {
        self.any_rec(0, self.order.len(), q, r2)
    }

    /// Indices of all points within squared distance `r2`, unordered.
    pub fn within(&self, q: &Point3<f64>, r2: f64, out: &mut Vec<usize>) {
        out.clear();
        self.within_rec(0, self.order.len(), q, r2, out);
    }

    fn nearest_rec(&self, lo: usize, hi: usize, q: &Point3<f64>, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d = dist2(q, p);
        if d < best.1 || (d == best.1 && idx < best.0) {
            *best = (idx, d);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (first, second) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(first.0, first.1, q, best);
        if diff * diff <= best.1 {
            self.nearest_rec(second.0, second.1, q, best);
        }
    }

    fn any_rec(&self, lo: usize, hi: usize, q: &Point3<f64>, r2: f64) -> bool {
        if lo >= hi {
            return false;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.points[self.order[mid]];
        if dist2(q, p) <= r2 {
            return true;
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (first, second) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.any_rec(first.0, first.1, q, r2)
            || (diff * diff <= r2 && self.any_rec(second.0, second.1, q, r2))
    }

    fn within_rec(&self, lo: usize, hi: usize, q: &Point3<f64>, r2: f64, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        if dist2(q, p) <= r2 {
            out.push(idx);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        if diff <= 0.0 || diff * diff <= r2 {
            self.within_rec(lo, mid, q, r2, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_rec(mid + 1, hi, q, r2, out);
        }
    }
}

fn build_rec(points: &[Point3<f64>], order: &mut [usize], axes: &mut [u8]) {
    if order.len() <= 1 {
        return;
    }
    let axis = widest_axis(points, order);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .total_cmp(&points[b][axis])
            .then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    let (left, rest) = order.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build_rec(points, left, left_axes);
    build_rec(points, &mut rest[1..], &mut rest_axes[1..]);
}

fn widest_axis(points: &[Point3<f64>], order: &[usize]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[Point3<f64>], q: &Point3<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y) + (q.z - p.z) * (q.z - p.z);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 2, 5, 17, 200] {
            let pts: Vec<_> = (0..n)
                .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let tree = KdTree::build(&pts);
            for _ in 0..100 {
                let q = Point3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
                assert_eq!(tree.nearest(&q).unwrap(), brute_nearest(&pts, &q));
                let r2 = rng.gen_range(0.0..0.3);
                let mut got = Vec::new();
                tree.within(&q, r2, &mut got);
                got.sort_unstable();
                let want: Vec<_> = (0..n).filter(|&i| dist2(&q, &pts[i]) <= r2).collect();
                assert_eq!(got, want);
                assert_eq!(tree.any_within(&q, r2), !want.is_empty());
            }
        }
    }

    #[test]
    fn handles_many_duplicates() {
        let pts = vec![Point3::origin(); 1000];
        let tree = KdTree::build(&pts);
        assert_eq!(tree.nearest(&Point3::new(1.0, 0.0, 0.0)), Some((0, 1.0)));
    }
}
