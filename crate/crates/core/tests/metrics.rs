mod common;

use std::sync::Arc;

use assembloid::geometry::{chamfer, geodesic_rotation_distance, Part, Pose, Scene};
use assembloid::metrics::{
    evaluate, fair_part_accuracy, part_accuracy, rmse_rotation, rmse_translation, scd,
    MetricOptions, RotationMetric, DEFAULT_PA_THRESHOLD, TABLE_HEADER,
};
use assembloid::Error;
use common::*;
use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;

fn permuted(scene: &Scene, order: &[usize]) -> Scene {
    let parts = order.iter().map(|&k| scene.parts()[k].clone()).collect();
    Scene::new(parts, scene.label()).unwrap()
}

#[test]
fn perfect_assembly() {
    let gt = random_scene(&mut rng(1), 4, 32);
    let r = evaluate(&gt, &gt, &MetricOptions::default()).unwrap();
    assert_eq!((r.scd, r.pa, r.fpa, r.rmse_trans, r.rmse_rot), (0.0, 1.0, 1.0, 0.0, 0.0));
}

#[test]
fn far_displacement_gives_zero_accuracy() {
    let gt = random_scene(&mut rng(2), 4, 32);
    let poses: Vec<Pose> = gt
        .poses()
        .iter()
        .map(|p| p.with_translation(p.translation() + Vector3::new(10.0, 0.0, 0.0)))
        .collect();
    let pred = gt.with_poses(&poses).unwrap();
    assert_eq!(part_accuracy(&pred, &gt, DEFAULT_PA_THRESHOLD).unwrap(), 0.0);
    assert_eq!(fair_part_accuracy(&pred, &gt, DEFAULT_PA_THRESHOLD).unwrap(), 0.0);
}

#[test]
fn scd_of_offset_single_parts_is_the_cloud_chamfer() {
    let c = Arc::new(random_cloud(&mut rng(3), 40, 0.3));
    let a = Scene::new(vec![Part::new(0, c.clone(), Pose::identity())], "a").unwrap();
    let b = a.with_poses(&[Pose::from_translation(Vector3::new(1.0, 0.0, 0.0))]).unwrap();
    assert_eq!(scd(&a, &b), chamfer(&a.render(), &b.render()));
}

#[test]
fn swapped_identical_legs() {
    let (pred, gt) = swapped_legs(4);
    let pa = part_accuracy(&pred, &gt, DEFAULT_PA_THRESHOLD).unwrap();
    assert_eq!(pa, 4.0 / 6.0);
    assert_eq!(fair_part_accuracy(&pred, &gt, DEFAULT_PA_THRESHOLD).unwrap(), 1.0);
    let r = evaluate(&pred, &gt, &MetricOptions::default()).unwrap();
    assert_eq!(r.per_part[2].fair_match, 3);
    assert_eq!(r.per_part[3].fair_match, 2);
    assert_eq!(r.scd, 0.0);
}

#[test]
fn translation_rmse_examples() {
    let gt = random_scene(&mut rng(5), 4, 16);
    assert_eq!(rmse_translation(&gt, &gt).unwrap(), 0.0);
    let mut poses = gt.poses();
    poses[1] = poses[1].with_translation(poses[1].translation() + Vector3::new(1.0, 0.0, 0.0));
    let pred = gt.with_poses(&poses).unwrap();
    assert!((rmse_translation(&pred, &gt).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn rotation_rmse_examples() {
    let c = Arc::new(random_cloud(&mut rng(6), 16, 0.3));
    let gt = Scene::new(vec![Part::new(0, c, Pose::identity())], "a").unwrap();
    let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
    let pred = gt.with_poses(&[Pose::new(q, Vector3::zeros())]).unwrap();
    assert!((rmse_rotation(&pred, &gt, RotationMetric::Geodesic).unwrap() - 90.0).abs() < 1e-9);
    // 90° about z is (0, 0, 90) in XYZ Euler angles: sqrt(90²/3).
    let euler = rmse_rotation(&pred, &gt, RotationMetric::Euler).unwrap();
    assert!((euler - 90.0 / 3f64.sqrt()).abs() < 1e-9, "{euler}");
    let flipped = gt
        .with_poses(&[Pose::new(UnitQuaternion::new_unchecked(-q.into_inner()), Vector3::zeros())])
        .unwrap();
    assert_eq!(
        rmse_rotation(&flipped, &gt, RotationMetric::Geodesic).unwrap(),
        rmse_rotation(&pred, &gt, RotationMetric::Geodesic).unwrap()
    );
}

#[test]
fn part_count_mismatch_is_a_correspondence_error() {
    let a = random_scene(&mut rng(7), 3, 8);
    let b = random_scene(&mut rng(8), 4, 8);
    assert!(matches!(part_accuracy(&a, &b, 0.01), Err(Error::Correspondence(_))));
    assert!(matches!(fair_part_accuracy(&a, &b, 0.01), Err(Error::Correspondence(_))));
    assert!(matches!(rmse_translation(&a, &b), Err(Error::Correspondence(_))));
    assert!(matches!(evaluate(&a, &b, &MetricOptions::default()), Err(Error::Correspondence(_))));
}

#[test]
fn fair_accuracy_dominates_on_random_scenes() {
    // Perturbed copies so some parts pass and some fail.
    for seed in 0..100 {
        let mut r = rng(100 + seed);
        let gt = random_scene(&mut r, 5, 24);
        let poses: Vec<Pose> = gt
            .poses()
            .iter()
            .map(|p| {
                let dt = random_cloud(&mut r, 1, 0.12).points()[0].coords;
                p.with_translation(p.translation() + dt)
            })
            .collect();
        let pred = gt.with_poses(&poses).unwrap();
        let pa = part_accuracy(&pred, &gt, 0.01).unwrap();
        let fpa = fair_part_accuracy(&pred, &gt, 0.01).unwrap();
        assert!(fpa >= pa, "seed {seed}: {fpa} < {pa}");
    }
}

#[test]
fn report_row_follows_the_table_order() {
    let (pred, gt) = swapped_legs(9);
    let r = evaluate(&pred, &gt, &MetricOptions::default()).unwrap();
    assert_eq!(TABLE_HEADER, "scd_x1e3,pa_pct,rmse_t_x1e2,rmse_r_deg,fpa_pct");
    assert_eq!(
        r.table_values(),
        [r.scd * 1e3, r.pa * 100.0, r.rmse_trans * 100.0, r.rmse_rot, r.fpa * 100.0]
    );
    assert_eq!(r.table_row().split(',').count(), 5);
    let json = serde_json::to_string(&r).unwrap();
    assert_eq!(serde_json::from_str::<assembloid::metrics::MetricsReport>(&json).unwrap(), r);
}

/// Direct recomputation of every metric from per-part quantities.
fn recompute(pred: &Scene, gt: &Scene) -> [f64; 5] {
    let (pp, gp) = (pred.placed_parts(), gt.placed_parts());
    let n = pp.len() as f64;
    let pa = pp.iter().zip(&gp).filter(|(p, g)| brute_chamfer(p, g) < 0.01).count() as f64 / n;
    let fpa = pp
        .iter()
        .filter(|p| gp.iter().map(|g| brute_chamfer(p, g)).fold(f64::INFINITY, f64::min) < 0.01)
        .count() as f64
        / n;
    let (mut t2, mut r2) = (0.0, 0.0);
    for (p, g) in pred.parts().iter().zip(gt.parts()) {
        t2 += (p.pose().translation() - g.pose().translation()).norm_squared();
        r2 += geodesic_rotation_distance(p.pose().rotation(), g.pose().rotation()).powi(2);
    }
    [brute_chamfer(&pred.render(), &gt.render()), pa, fpa, (t2 / n).sqrt(), (r2 / n).sqrt()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_match_direct_recomputation(seed in 0u64..10_000, k in 2usize..6) {
        let mut r = rng(seed);
        let gt = random_scene(&mut r, k, 12);
        let poses: Vec<Pose> = gt
            .poses()
            .iter()
            .map(|p| p.with_translation(p.translation() + random_cloud(&mut r, 1, 0.1).points()[0].coords))
            .collect();
        let pred = gt.with_poses(&poses).unwrap();
        let rep = evaluate(&pred, &gt, &MetricOptions::default()).unwrap();
        let want = recompute(&pred, &gt);
        prop_assert!((rep.scd - want[0]).abs() <= 1e-15 * want[0].max(1.0));
        prop_assert_eq!(rep.pa, want[1]);
        prop_assert_eq!(rep.fpa, want[2]);
        prop_assert!((rep.rmse_trans - want[3]).abs() < 1e-12);
        prop_assert!((rep.rmse_rot - want[4]).abs() < 1e-9);
        prop_assert!(rep.pa <= rep.fpa);
    }

    #[test]
    fn metrics_ignore_a_shared_permutation(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let gt = random_scene(&mut r, 4, 12);
        let pred = random_scene(&mut r, 4, 12);
        let pred = gt.with_poses(&pred.poses()).unwrap();
        let order = [2, 0, 3, 1];
        let a = evaluate(&pred, &gt, &MetricOptions::default()).unwrap();
        let b = evaluate(&permuted(&pred, &order), &permuted(&gt, &order), &MetricOptions::default()).unwrap();
        prop_assert_eq!(a.pa, b.pa);
        prop_assert_eq!(a.fpa, b.fpa);
        prop_assert!((a.scd - b.scd).abs() <= 1e-15 * a.scd.max(1.0));
        prop_assert!((a.rmse_trans - b.rmse_trans).abs() < 1e-12);
        prop_assert!((a.rmse_rot - b.rmse_rot).abs() < 1e-9);
    }

    #[test]
    fn scd_is_symmetric_and_evaluation_is_pure(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let a = random_scene(&mut r, 3, 10);
        let b = random_scene(&mut r, 3, 10);
        prop_assert_eq!(scd(&a, &b), scd(&b, &a));
        let opts = MetricOptions::default();
        prop_assert_eq!(evaluate(&a, &b, &opts).unwrap(), evaluate(&a, &b, &opts).unwrap());
    }
}
