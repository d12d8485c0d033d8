use nalgebra::{Matrix3, Point3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// A rigid transform: rotate by a unit quaternion, then translate.
///
/// Serialized as `{"quat":[w,x,y,z],"trans":[x,y,z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    quat: [f64; 4],
    trans: [f64; 3],
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        Pose::from_arrays(r.quat, r.trans)
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            quat: p.quat_wxyz(),
            trans: p.translation.into(),
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    /// Builds a pose from a `[w,x,y,z]` quaternion and a translation.
    ///
    /// Quaternions already unit to within 1e-12 are kept bit-for-bit so
    /// serialized poses round-trip exactly; others are normalized.
    pub fn from_arrays(quat: [f64; 4], trans: [f64; 3]) -> Result<Self> {
        if !quat.iter().chain(trans.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("pose has non-finite components".into()));
        }
        let q = Quaternion::new(quat[0], quat[1], quat[2], quat[3]);
        let norm = q.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidInput("pose quaternion has zero norm".into()));
        }
        let q = if (norm - 1.0).abs() <= 1e-12 { q } else { q / norm };
        Ok(Self::new(
            UnitQuaternion::new_unchecked(q),
            Vector3::from(trans),
        ))
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn quat_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud::from_trusted(
            cloud
                .points()
                .iter()
                .map(|p| self.transform_point(p))
                .collect(),
        )
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self::new(inv, -(inv * self.translation))
    }
}

/// Rotates then translates every point of `cloud`.
pub fn apply_pose(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    pose.apply(cloud)
}

/// `outer ∘ inner`: applying the result equals applying `inner` first, then
/// `outer`. The rotation is renormalized.
pub fn compose(outer: &Pose, inner: &Pose) -> Pose {
    let mut rotation = outer.rotation * inner.rotation;
    rotation.renormalize();
    Pose::new(rotation, outer.rotation * inner.translation + outer.translation)
}

/// Angle of the relative rotation between `a` and `b` in degrees, in
/// `[0, 180]`. `q` and `-q` are the same orientation.
pub fn geodesic_rotation_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let (a, b) = (a.quaternion(), b.quaternion());
    // conj(a) * b, written out so that a == b cancels to exactly zero
    let w = a.w * b.w + a.imag().dot(&b.imag());
    let v = a.w * b.imag() - b.w * a.imag() - a.imag().cross(&b.imag());
    // atan2 keeps precision near zero where acos(w) does not.
    2.0 * v.norm().atan2(w.abs()).to_degrees()
}
