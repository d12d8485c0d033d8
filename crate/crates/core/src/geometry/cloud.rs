use std::ops::Range;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// An ordered, non-empty set of finite 3D points.
///
/// Point order is significant: it carries correspondence identity through
/// noising, denoising and rigid alignment, so every transformation in this
/// crate maps index `i` to index `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("point cloud must not be empty".into()));
        }
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { points })
    }

    pub fn from_xyz(coords: &[[f64; 3]]) -> Result<Self> {
        Self::new(coords.iter().map(|c| Point3::new(c[0], c[1], c[2])).collect())
    }

    /// Builds a cloud from points that are finite by construction (images of
    /// finite points under finite maps).
    pub(crate) fn from_trusted(points: Vec<Point3<f64>>) -> Self {
        debug_assert!(!points.is_empty());
        debug_assert!(points.iter().all(|p| p.coords.iter().all(|c| c.is_finite())));
        Self { points }
    }

    /// Concatenates clouds in order.
    pub fn concat<'a>(clouds: impl IntoIterator<Item = &'a PointCloud>) -> Result<Self> {
        let mut points = Vec::new();
        for c in clouds {
            points.extend_from_slice(&c.points);
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3<f64>> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3<f64> {
        centroid(&self.points)
    }

    /// Copies out the points in `range` as a new cloud.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.points.len() {
            return Err(Error::InvalidInput(format!(
                "slice {range:?} out of bounds for cloud of {} points",
                self.points.len()
            )));
        }
        Ok(Self::from_trusted(self.points[range].to_vec()))
    }

    /// Adds `offsets[i]` to point `i`.
    pub fn displaced(&self, offsets: &[Vector3<f64>]) -> Result<Self> {
        if offsets.len() != self.points.len() {
            return Err(Error::Correspondence(format!(
                "{} offsets for {} points",
                offsets.len(),
                self.points.len()
            )));
        }
        Self::new(
            self.points
                .iter()
                .zip(offsets)
                .map(|(p, d)| p + d)
                .collect(),
        )
    }

    /// Returns the coordinates as displacement vectors from the origin.
    pub fn coords(&self) -> Vec<Vector3<f64>> {
        self.points.iter().map(|p| p.coords).collect()
    }
}

pub(crate) fn centroid(points: &[Point3<f64>]) -> Point3<f64> {
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len() as f64)
}

/// Squared Euclidean distance with a fixed evaluation order, so every
/// nearest-neighbour query in the crate agrees bit-for-bit.
#[inline]
pub(crate) fn dist2(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}
