//! Assembly quality metrics against a ground-truth scene.
//!
//! Chamfer values use the per-direction mean convention (each direction
//! averaged over its own cloud, then summed).

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{chamfer, geodesic_rotation_distance, PointCloud, Scene};

pub const DEFAULT_PA_THRESHOLD: f64 = 0.01;

/// How per-part rotation error is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationMetric {
    /// Angle of the relative rotation, degrees.
    #[default]
    Geodesic,
    /// XYZ Euler angles of the relative rotation, degrees; RMSE is taken
    /// over all parts and all three axes.
    Euler,
}

impl std::str::FromStr for RotationMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geodesic" => Ok(Self::Geodesic),
            "euler" => Ok(Self::Euler),
            other => Err(Error::Config(format!("unknown rotation metric {other:?}"))),
        }
    }
}

fn check_counts(pred: &Scene, gt: &Scene) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Correspondence(format!(
            "prediction has {} parts, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Shape chamfer distance between the full rendered scenes.
pub fn scd(pred: &Scene, gt: &Scene) -> f64 {
    chamfer(&pred.render(), &gt.render())
}

fn part_chamfers(pred: &[PointCloud], gt: &[PointCloud]) -> Vec<f64> {
    pred.iter().zip(gt).map(|(p, g)| chamfer(p, g)).collect()
}

fn fraction_below(values: impl Iterator<Item = f64>, n: usize, thre: f64) -> f64 {
    values.filter(|&c| c < thre).count() as f64 / n as f64
}

/// Fraction of parts whose chamfer to the same-index ground-truth part is
/// below `thre`.
pub fn part_accuracy(pred: &Scene, gt: &Scene, thre: f64) -> Result<f64> {
    check_counts(pred, gt)?;
    let c = part_chamfers(&pred.placed_parts(), &gt.placed_parts());
    Ok(fraction_below(c.into_iter(), pred.len(), thre))
}

/// For each predicted part, index and chamfer of the closest ground-truth
/// part (ties to the lowest index; matching is with replacement).
fn fair_matches(pred: &[PointCloud], gt: &[PointCloud]) -> Vec<(usize, f64)> {
    pred.iter()
        .map(|p| {
            gt.iter()
                .enumerate()
                .map(|(j, g)| (j, chamfer(p, g)))
                .fold((usize::MAX, f64::INFINITY), |best, (j, c)| {
                    if c < best.1 {
                        (j, c)
                    } else {
                        best
                    }
                })
        })
        .collect()
}

/// Part accuracy after matching every predicted part to its chamfer-nearest
/// ground-truth part.
pub fn fair_part_accuracy(pred: &Scene, gt: &Scene, thre: f64) -> Result<f64> {
    check_counts(pred, gt)?;
    let m = fair_matches(&pred.placed_parts(), &gt.placed_parts());
    Ok(fraction_below(m.into_iter().map(|(_, c)| c), pred.len(), thre))
}

/// Root mean squared distance between part translations.
pub fn rmse_translation(pred: &Scene, gt: &Scene) -> Result<f64> {
    check_counts(pred, gt)?;
    let sum: f64 = pred
        .parts()
        .iter()
        .zip(gt.parts())
        .map(|(p, g)| (p.pose().translation() - g.pose().translation()).norm_squared())
        .sum();
    Ok((sum / pred.len() as f64).sqrt())
}

fn euler_error(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> [f64; 3] {
    let (r, p, y) = (b.inverse() * a).euler_angles();
    [r.to_degrees(), p.to_degrees(), y.to_degrees()]
}

/// Root mean squared rotation error in degrees.
pub fn rmse_rotation(pred: &Scene, gt: &Scene, metric: RotationMetric) -> Result<f64> {
    check_counts(pred, gt)?;
    let pairs = pred.parts().iter().zip(gt.parts());
    let (sum, n) = match metric {
        RotationMetric::Geodesic => (
            pairs
                .map(|(p, g)| geodesic_rotation_distance(p.pose().rotation(), g.pose().rotation()).powi(2))
                .sum::<f64>(),
            pred.len(),
        ),
        RotationMetric::Euler => (
            pairs
                .map(|(p, g)| {
                    euler_error(p.pose().rotation(), g.pose().rotation())
                        .iter()
                        .map(|e| e * e)
                        .sum::<f64>()
                })
                .sum::<f64>(),
            3 * pred.len(),
        ),
    };
    Ok((sum / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartMetrics {
    pub id: u32,
    pub chamfer: f64,
    pub fair_match: usize,
    pub fair_chamfer: f64,
    pub translation_error: f64,
    pub rotation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scd: f64,
    pub pa: f64,
    pub fpa: f64,
    pub rmse_trans: f64,
    /// Degrees.
    pub rmse_rot: f64,
    pub rotation_metric: RotationMetric,
    pub threshold: f64,
    pub chamfer_convention: String,
    pub per_part: Vec<PartMetrics>,
}

pub const CHAMFER_CONVENTION: &str = "sum of per-direction mean squared nearest-neighbour distances";

/// Table column header for [`MetricsReport::table_row`].
pub const TABLE_HEADER: &str = "scd_x1e3,pa_pct,rmse_t_x1e2,rmse_r_deg,fpa_pct";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricOptions {
    pub threshold: f64,
    pub rotation: RotationMetric,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_PA_THRESHOLD,
            rotation: RotationMetric::Geodesic,
        }
    }
}

impl MetricsReport {
    /// Values in display units: SCD ×10³, PA %, RMSE(T) ×10², RMSE(R) °,
    /// fPA %.
    pub fn table_values(&self) -> [f64; 5] {
        [
            self.scd * 1e3,
            self.pa * 100.0,
            self.rmse_trans * 100.0,
            self.rmse_rot,
            self.fpa * 100.0,
        ]
    }

    pub fn table_row(&self) -> String {
        format_row(&self.table_values())
    }
}

pub fn format_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn evaluate(pred: &Scene, gt: &Scene, opts: &MetricOptions) -> Result<MetricsReport> {
    check_counts(pred, gt)?;
    let pp = pred.placed_parts();
    let gp = gt.placed_parts();
    let direct = part_chamfers(&pp, &gp);
    let fair = fair_matches(&pp, &gp);
    let per_part = pred
        .parts()
        .iter()
        .zip(gt.parts())
        .enumerate()
        .map(|(k, (p, g))| PartMetrics {
            id: p.id(),
            chamfer: direct[k],
            fair_match: fair[k].0,
            fair_chamfer: fair[k].1,
            translation_error: (p.pose().translation() - g.pose().translation()).norm(),
            rotation_error: geodesic_rotation_distance(p.pose().rotation(), g.pose().rotation()),
        })
        .collect();
    let n = pred.len();
    Ok(MetricsReport {
        scd: scd(pred, gt),
        pa: fraction_below(direct.iter().copied(), n, opts.threshold),
        fpa: fraction_below(fair.iter().map(|m| m.1), n, opts.threshold),
        rmse_trans: rmse_translation(pred, gt)?,
        rmse_rot: rmse_rotation(pred, gt, opts.rotation)?,
        rotation_metric: opts.rotation,
        threshold: opts.threshold,
        chamfer_convention: CHAMFER_CONVENTION.into(),
        per_part,
    })
}
