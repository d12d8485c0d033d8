//! Least-squares rigid alignment.
//!
//! [`kabsch_align`] solves the known-correspondence problem in closed form
//! (SVD of the cross-covariance with a sign fix so the result is never a
//! reflection). [`icp_align`] wraps it with nearest-neighbour matching for
//! when index correspondence cannot be trusted.

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::cloud::{centroid, dist2};
use crate::geometry::{compose, KdTree, PointCloud, Pose};

/// Ratio of the second to the first principal variance below which a point
/// set is treated as collinear.
const COLLINEAR_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidAlignment {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    /// RMS point distance after alignment.
    pub residual: f64,
}

impl RigidAlignment {
    pub fn pose(&self) -> Pose {
        Pose::new(self.rotation, self.translation)
    }
}

fn rms_residual(pose: &Pose, source: &[Point3<f64>], target: &[Point3<f64>]) -> f64 {
    let sum: f64 = source
        .iter()
        .zip(target)
        .map(|(s, t)| dist2(&pose.transform_point(s), t))
        .sum();
    (sum / source.len() as f64).sqrt()
}

fn check_pairs(source: &PointCloud, target: &PointCloud) -> Result<()> {
    if source.len() != target.len() {
        return Err(Error::Correspondence(format!(
            "source has {} points, target has {}",
            source.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Optimal rotation and translation mapping `source[i]` onto `target[i]`.
pub fn kabsch_align(source: &PointCloud, target: &PointCloud) -> Result<RigidAlignment> {
    check_pairs(source, target)?;
    if source.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "need at least 3 points for a rotation, got {}",
            source.len()
        )));
    }
    let (src, dst) = (source.points(), target.points());
    let cs = centroid(src);
    let ct = centroid(dst);

    let mut cov = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for (s, t) in src.iter().zip(dst) {
        let a = s - cs;
        let b = t - ct;
        cov += a * b.transpose();
        scatter += a * a.transpose();
    }

    let mut spread = scatter.symmetric_eigenvalues();
    spread
        .as_mut_slice()
        .sort_unstable_by(|a, b| b.total_cmp(a));
    if spread[0] <= 0.0 || spread[1] <= COLLINEAR_RATIO * spread[0] {
        return Err(Error::DegenerateGeometry(
            "source points are collinear or coincident".into(),
        ));
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateGeometry("SVD did not converge".into())),
    };
    let v = v_t.transpose();
    let u_t = u.transpose();
    let d = (v * u_t).determinant().signum();
    let rot = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u_t;
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rot));
    let translation = ct.coords - rotation * cs.coords;
    let pose = Pose::new(rotation, translation);
    Ok(RigidAlignment {
        rotation,
        translation,
        residual: rms_residual(&pose, src, dst),
    })
}

/// Translation-only alignment of centroids; used when rotation is
/// unobservable.
pub fn centroid_align(source: &PointCloud, target: &PointCloud) -> Result<RigidAlignment> {
    check_pairs(source, target)?;
    let translation = target.centroid() - source.centroid();
    let pose = Pose::from_translation(translation);
    Ok(RigidAlignment {
        rotation: UnitQuaternion::identity(),
        translation,
        residual: rms_residual(&pose, source.points(), target.points()),
    })
}

/// [`kabsch_align`], falling back to [`centroid_align`] on degenerate
/// geometry. The flag reports whether the fallback was taken.
pub fn align_or_translate(
    source: &PointCloud,
    target: &PointCloud,
) -> Result<(RigidAlignment, bool)> {
    match kabsch_align(source, target) {
        Ok(a) => Ok((a, false)),
        Err(Error::DegenerateGeometry(_)) => Ok((centroid_align(source, target)?, true)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpOutcome {
    pub alignment: RigidAlignment,
    /// Correspondence residual after each iteration; non-increasing.
    pub residuals: Vec<f64>,
    /// True if any iteration used the translation-only fallback.
    pub fallback: bool,
}

/// Point-to-point ICP from `source` onto `target`.
///
/// Stops after `max_iters` iterations or once the residual improves by less
/// than `tol`. The returned residual is measured against the final
/// iteration's nearest-neighbour correspondences.
pub fn icp_align(
    source: &PointCloud,
    target: &PointCloud,
    max_iters: usize,
    tol: f64,
) -> Result<RigidAlignment> {
    Ok(icp_align_traced(source, target, max_iters, tol)?.alignment)
}

pub fn icp_align_traced(
    source: &PointCloud,
    target: &PointCloud,
    max_iters: usize,
    tol: f64,
) -> Result<IcpOutcome> {
    if max_iters == 0 {
        return Err(Error::InvalidInput("ICP needs max_iters >= 1".into()));
    }
    let tree = KdTree::build(target.points());
    let mut current = source.clone();
    let mut total: Option<RigidAlignment> = None;
    let mut residuals = Vec::with_capacity(max_iters);
    let mut fallback = false;

    for _ in 0..max_iters {
        let matched = PointCloud::from_trusted(
            current
                .points()
                .iter()
                .map(|p| target.points()[tree.nearest(p).expect("non-empty").0])
                .collect(),
        );
        let (step, fb) = if current.len() == matched.len() && current.len() >= 3 {
            align_or_translate(&current, &matched)?
        } else {
            (centroid_align(&current, &matched)?, true)
        };
        fallback |= fb;
        current = step.pose().apply(&current);
        total = Some(match total {
            None => step,
            Some(prev) => {
                let pose = compose(&step.pose(), &prev.pose());
                RigidAlignment {
                    rotation: *pose.rotation(),
                    translation: *pose.translation(),
                    residual: step.residual,
                }
            }
        });
        let improvement = residuals.last().map(|&r: &f64| r - step.residual);
        residuals.push(step.residual);
        if step.residual == 0.0 || improvement.is_some_and(|d| d < tol) {
            break;
        }
    }

    Ok(IcpOutcome {
        alignment: total.expect("at least one iteration"),
        residuals,
        fallback,
    })
}
