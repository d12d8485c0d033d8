#![allow(dead_code)]

use std::sync::Arc;

use assembloid::geometry::{Part, PointCloud, Pose, Scene};
use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud(rng: &mut impl Rng, n: usize, half_width: f64) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-half_width..half_width),
                    rng.gen_range(-half_width..half_width),
                    rng.gen_range(-half_width..half_width),
                )
            })
            .collect(),
    )
    .unwrap()
}

pub fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    // Normalized Gaussian 4-vector is uniform on S³.
    loop {
        let q = nalgebra::Quaternion::new(
            rng.sample::<f64, _>(rand_distr::StandardNormal),
            rng.sample(rand_distr::StandardNormal),
            rng.sample(rand_distr::StandardNormal),
            rng.sample(rand_distr::StandardNormal),
        );
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

pub fn random_pose(rng: &mut impl Rng, trans: f64) -> Pose {
    Pose::new(
        random_rotation(rng),
        Vector3::new(
            rng.gen_range(-trans..trans),
            rng.gen_range(-trans..trans),
            rng.gen_range(-trans..trans),
        ),
    )
}

/// Scene of `k` random parts with `n` points each at random poses.
pub fn random_scene(rng: &mut impl Rng, k: usize, n: usize) -> Scene {
    let parts = (0..k)
        .map(|i| {
            Part::new(
                i as u32,
                Arc::new(random_cloud(rng, n, 0.2)),
                random_pose(rng, 0.5),
            )
        })
        .collect();
    Scene::new(parts, "test").unwrap()
}

/// Two-part box scene used by assembler tests: a slab and a post.
pub fn two_part_scene(rng: &mut impl Rng, n: usize) -> Scene {
    let slab = assembloid::datagen::sample_cuboid_surface([0.6, 0.1, 0.4], n, rng).unwrap();
    let post = assembloid::datagen::sample_cuboid_surface([0.1, 0.5, 0.1], n, rng).unwrap();
    Scene::new(
        vec![
            Part::new(0, Arc::new(slab), Pose::from_translation(Vector3::new(0.0, 0.2, 0.0))),
            Part::new(1, Arc::new(post), Pose::from_translation(Vector3::new(0.0, -0.1, 0.0))),
        ],
        "test",
    )
    .unwrap()
}

pub fn sq(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// Exhaustive O(n·m) one-directional mean squared nearest distance.
pub fn brute_one_sided(a: &PointCloud, b: &PointCloud) -> f64 {
    let sum: f64 = a
        .points()
        .iter()
        .map(|p| {
            b.points()
                .iter()
                .map(|q| sq(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    sum / a.len() as f64
}

pub fn brute_chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    brute_one_sided(a, b) + brute_one_sided(b, a)
}

pub fn brute_coincident(a: &PointCloud, b: &PointCloud, radius: f64) -> usize {
    let r2 = radius * radius;
    a.points()
        .iter()
        .filter(|p| b.points().iter().any(|q| sq(p, q) <= r2))
        .count()
}

pub fn pairwise(cloud: &PointCloud) -> Vec<f64> {
    let pts = cloud.points();
    let mut out = Vec::with_capacity(pts.len() * pts.len());
    for a in pts {
        for b in pts {
            out.push((a - b).norm());
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_point_diff(a: &PointCloud, b: &PointCloud) -> f64 {
    assert_eq!(a.len(), b.len());
    a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| (p - q).amax())
        .fold(0.0, f64::max)
}

/// Six-part chair (four identical legs) and a prediction with the front two
/// leg poses exchanged.
pub fn swapped_legs(seed: u64) -> (Scene, Scene) {
    use assembloid::datagen::{generate_scene, Family, ShapeSpec};
    let (gt, meta) =
        generate_scene(&ShapeSpec::new(Family::Chair, 64).with_parts(6), &mut self::rng(seed)).unwrap();
    assert_eq!(meta.part_names[2], "leg_fl");
    let mut poses = gt.poses();
    poses.swap(2, 3);
    (gt.with_poses(&poses).unwrap(), gt)
}
