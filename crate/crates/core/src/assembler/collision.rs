use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::assembler::{CollisionConfig, PushTrigger};
use crate::geometry::{centroid, KdTree, PointCloud, Pose, Scene};

/// Number of points of `a` with at least one point of `b` within `radius`
/// (inclusive). Directional: `a → b`.
pub fn coincident_count(a: &PointCloud, b: &PointCloud, radius: f64) -> usize {
    let tree = KdTree::build(b.points());
    let r2 = radius * radius;
    a.points().iter().filter(|p| tree.any_within(p, r2)).count()
}

fn coincident_points(a: &PointCloud, tree: &KdTree<'_>, r2: f64) -> Vec<Point3<f64>> {
    a.points()
        .iter()
        .filter(|p| tree.any_within(p, r2))
        .copied()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// Part index being moved.
    pub part: usize,
    /// Part index it collides with.
    pub other: usize,
    pub count: usize,
    pub displacement: [f64; 3],
}

/// Direction from the overlap to part `i`, with fallbacks for the
/// symmetric cases where that direction vanishes.
fn push_direction(
    i: usize,
    j: usize,
    ci: &Point3<f64>,
    cj: &Point3<f64>,
    overlap: &[Point3<f64>],
) -> Vector3<f64> {
    let eps = 1e-12;
    let ov = centroid(overlap);
    let d = ci - ov;
    if d.norm() > eps {
        return d;
    }
    let d = ci - cj;
    if d.norm() > eps {
        return d;
    }
    // Coincident centroids: split along the overlap's thinnest axis, moving
    // the lower-index part forward and the other back, by the overlap's
    // extent along it.
    let mut cov = Matrix3::zeros();
    for p in overlap {
        let v = p - ov;
        cov += v * v.transpose();
    }
    let eig = cov.symmetric_eigen();
    let k = eig.eigenvalues.imin();
    let axis: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
    let (lo, hi) = overlap.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let t = (p - ov).dot(&axis);
        (lo.min(t), hi.max(t))
    });
    let sign = if i < j { 1.0 } else { -1.0 };
    axis * (sign * (hi - lo) / 2.0)
}

/// Displaces colliding parts away from their overlap.
///
/// For every ordered pair `(i, j)` whose coincident count triggers, part `i`
/// is translated by `(centroid_i − centroid of i's coincident points) · s`.
/// All displacements are computed from the input configuration and applied
/// together, so the result does not depend on pair order. Rotations are
/// untouched.
pub fn push_away(scene: &Scene, cfg: &CollisionConfig) -> (Scene, Vec<CollisionEvent>) {
    let placed = scene.placed_parts();
    let trees: Vec<KdTree<'_>> = placed.iter().map(|c| KdTree::build(c.points())).collect();
    let centroids: Vec<Point3<f64>> = placed.iter().map(PointCloud::centroid).collect();
    let r2 = cfg.radius * cfg.radius;
    let n = placed.len();
    let mut delta = vec![Vector3::zeros(); n];
    let mut events = Vec::new();

    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let overlap = coincident_points(&placed[i], &trees[j], r2);
            let count = overlap.len();
            let fires = match cfg.trigger {
                PushTrigger::Above => count >= cfg.count_threshold,
                PushTrigger::Below => count < cfg.count_threshold,
            };
            if !fires || count == 0 {
                continue;
            }
            let dir = push_direction(i, j, &centroids[i], &centroids[j], &overlap);
            let d = dir * cfg.scale;
            delta[i] += d;
            events.push(CollisionEvent {
                part: i,
                other: j,
                count,
                displacement: [d.x, d.y, d.z],
            });
        }
    }

    if delta.iter().all(|d| *d == Vector3::zeros()) {
        return (scene.clone(), events);
    }
    let poses: Vec<Pose> = scene
        .parts()
        .iter()
        .zip(&delta)
        .map(|(p, d)| {
            if *d == Vector3::zeros() {
                *p.pose()
            } else {
                p.pose().with_translation(p.pose().translation() + d)
            }
        })
        .collect();
    let out = scene
        .with_poses(&poses)
        .expect("pose count matches part count");
    (out, events)
}

/// Total coincident points over all ordered part pairs.
pub fn total_coincident(scene: &Scene, radius: f64) -> usize {
    let placed = scene.placed_parts();
    let mut total = 0;
    for (j, b) in placed.iter().enumerate() {
        let tree = KdTree::build(b.points());
        for (i, a) in placed.iter().enumerate() {
            if i != j {
                total += coincident_points(a, &tree, radius * radius).len();
            }
        }
    }
    total
}
