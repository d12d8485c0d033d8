use crate::geometry::{KdTree, PointCloud};

/// For each point of `from`, the index of and squared distance to its
/// nearest point in `to`.
pub fn nearest_neighbors(from: &PointCloud, to: &PointCloud) -> Vec<(usize, f64)> {
    let tree = KdTree::build(to.points());
    from.points()
        .iter()
        .map(|p| tree.nearest(p).expect("clouds are non-empty"))
        .collect()
}

/// Mean squared nearest-neighbour distance from `from` to `to`.
pub fn one_sided_chamfer(from: &PointCloud, to: &PointCloud) -> f64 {
    let sum: f64 = nearest_neighbors(from, to).iter().map(|&(_, d)| d).sum();
    sum / from.len() as f64
}

/// Symmetric chamfer distance: squared nearest-neighbour distances averaged
/// over each cloud's own size, then summed over both directions.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    one_sided_chamfer(a, b) + one_sided_chamfer(b, a)
}
