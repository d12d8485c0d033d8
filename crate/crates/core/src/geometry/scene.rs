use std::collections::HashSet;
use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Pose};

/// Default hard cap on parts per scene.
pub const DEFAULT_MAX_PARTS: usize = 20;

/// One rigid piece: fixed canonical geometry plus its current placement.
///
/// The canonical cloud is shared (parts with identical geometry may point at
/// the same cloud) and never mutated.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    id: u32,
    canonical: Arc<PointCloud>,
    pose: Pose,
}

impl Part {
    pub fn new(id: u32, canonical: Arc<PointCloud>, pose: Pose) -> Self {
        Self {
            id,
            canonical,
            pose,
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn canonical(&self) -> &Arc<PointCloud> {
        &self.canonical
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn with_pose(&self, pose: Pose) -> Self {
        Self {
            pose,
            ..self.clone()
        }
    }

    /// Canonical geometry transformed by the current pose.
    pub fn placed(&self) -> PointCloud {
        self.pose.apply(&self.canonical)
    }
}

/// A labelled set of parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    parts: Vec<Part>,
    label: String,
}

impl Scene {
    pub fn new(parts: Vec<Part>, label: impl Into<String>) -> Result<Self> {
        Self::with_max_parts(parts, label, DEFAULT_MAX_PARTS)
    }

    pub fn with_max_parts(
        parts: Vec<Part>,
        label: impl Into<String>,
        max_parts: usize,
    ) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidInput("scene has no parts".into()));
        }
        if parts.len() > max_parts {
            return Err(Error::InvalidInput(format!(
                "scene has {} parts, cap is {max_parts}",
                parts.len()
            )));
        }
        let mut seen = HashSet::new();
        for p in &parts {
            if !seen.insert(p.id) {
                return Err(Error::InvalidInput(format!("duplicate part id {}", p.id)));
            }
        }
        Ok(Self {
            parts,
            label: label.into(),
        })
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.parts.iter().map(|p| p.pose).collect()
    }

    /// Same parts with new poses, index-aligned.
    pub fn with_poses(&self, poses: &[Pose]) -> Result<Self> {
        if poses.len() != self.parts.len() {
            return Err(Error::Correspondence(format!(
                "{} poses for {} parts",
                poses.len(),
                self.parts.len()
            )));
        }
        Ok(Self {
            parts: self
                .parts
                .iter()
                .zip(poses)
                .map(|(p, pose)| p.with_pose(*pose))
                .collect(),
            label: self.label.clone(),
        })
    }

    /// Index ranges of each part inside [`Scene::render`].
    pub fn part_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.parts
            .iter()
            .map(|p| {
                let r = start..start + p.len();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn total_points(&self) -> usize {
        self.parts.iter().map(Part::len).sum()
    }

    /// All placed parts concatenated in part order.
    pub fn render(&self) -> PointCloud {
        let mut points = Vec::with_capacity(self.total_points());
        for p in &self.parts {
            points.extend(p.placed().into_points());
        }
        PointCloud::from_trusted(points)
    }

    pub fn placed_parts(&self) -> Vec<PointCloud> {
        self.parts.iter().map(Part::placed).collect()
    }
}
