//! Procedural cuboid-composition shapes and the pose perturbation levels.

use std::sync::Arc;

use nalgebra::{Point3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Part, PointCloud, Pose, Scene, DEFAULT_MAX_PARTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Chair,
    Table,
    Airplane,
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Chair => "chair",
            Family::Table => "table",
            Family::Airplane => "airplane",
        }
    }

    pub fn default_parts(&self) -> usize {
        match self {
            Family::Chair => 4,
            Family::Table => 5,
            Family::Airplane => 5,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chair" => Ok(Self::Chair),
            "table" => Ok(Self::Table),
            "airplane" | "airplane-like" => Ok(Self::Airplane),
            other => Err(Error::Spec(format!("unknown family {other:?}"))),
        }
    }
}

/// An axis-aligned box: full side lengths and centre, in shape coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cuboid {
    pub name: &'static str,
    pub size: [f64; 3],
    pub center: [f64; 3],
    /// Parts with equal `group` share one canonical cloud.
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub family: Family,
    /// Part count; `None` picks the family default. Chairs take 4 (two leg
    /// panels) or 6 (four legs); tables 3 (two trestles) or 5; airplanes 4
    /// (one-piece wing) or 5.
    #[serde(default)]
    pub parts: Option<usize>,
    /// Points sampled per part.
    pub points_per_part: usize,
    /// Relative dimension jitter; each box size is scaled by a factor drawn
    /// from `[1 − j, 1 + j]`.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_jitter() -> f64 {
    0.15
}

impl ShapeSpec {
    pub fn new(family: Family, points_per_part: usize) -> Self {
        Self {
            family,
            parts: None,
            points_per_part,
            jitter: default_jitter(),
        }
    }

    pub fn with_parts(mut self, parts: usize) -> Self {
        self.parts = Some(parts);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub family: Family,
    pub part_names: Vec<String>,
    pub part_sizes: Vec<[f64; 3]>,
    pub points_per_part: usize,
}

fn jittered(rng: &mut impl Rng, base: f64, j: f64) -> f64 {
    if j == 0.0 {
        base
    } else {
        base * rng.gen_range(1.0 - j..=1.0 + j)
    }
}

fn chair_layout(rng: &mut impl Rng, parts: usize, j: f64) -> Result<Vec<Cuboid>> {
    let w = jittered(rng, 0.9, j);
    let d = jittered(rng, 0.85, j);
    let seat_t = jittered(rng, 0.08, j);
    let leg_h = jittered(rng, 0.9, j);
    let back_h = jittered(rng, 1.0, j);
    let back_t = jittered(rng, 0.08, j);
    let leg = jittered(rng, 0.08, j);
    let seat_y = leg_h + seat_t / 2.0;
    let mut out = vec![
        Cuboid { name: "seat", size: [w, seat_t, d], center: [0.0, seat_y, 0.0], group: 0 },
        Cuboid {
            name: "back",
            size: [w, back_h, back_t],
            center: [0.0, leg_h + seat_t + back_h / 2.0, -(d - back_t) / 2.0],
            group: 1,
        },
    ];
    let x = (w - leg) / 2.0;
    match parts {
        4 => {
            for (k, sx) in [-1.0, 1.0].into_iter().enumerate() {
                out.push(Cuboid {
                    name: if k == 0 { "leg_panel_left" } else { "leg_panel_right" },
                    size: [leg, leg_h, d],
                    center: [sx * x, leg_h / 2.0, 0.0],
                    group: 2,
                });
            }
        }
        6 => {
            let z = (d - leg) / 2.0;
            let names = ["leg_fl", "leg_fr", "leg_bl", "leg_br"];
            for (k, (sx, sz)) in [(-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)].into_iter().enumerate() {
                out.push(Cuboid {
                    name: names[k],
                    size: [leg, leg_h, leg],
                    center: [sx * x, leg_h / 2.0, sz * z],
                    group: 2,
                });
            }
        }
        n => return Err(Error::Spec(format!("chair takes 4 or 6 parts, got {n}"))),
    }
    Ok(out)
}

fn table_layout(rng: &mut impl Rng, parts: usize, j: f64) -> Result<Vec<Cuboid>> {
    let w = jittered(rng, 1.4, j);
    let d = jittered(rng, 0.9, j);
    let top_t = jittered(rng, 0.07, j);
    let leg_h = jittered(rng, 0.8, j);
    let leg = jittered(rng, 0.09, j);
    let mut out = vec![Cuboid {
        name: "top",
        size: [w, top_t, d],
        center: [0.0, leg_h + top_t / 2.0, 0.0],
        group: 0,
    }];
    let x = (w - leg) / 2.0 - 0.05;
    match parts {
        3 => {
            for (k, sx) in [-1.0, 1.0].into_iter().enumerate() {
                out.push(Cuboid {
                    name: if k == 0 { "trestle_left" } else { "trestle_right" },
                    size: [leg, leg_h, d * 0.8],
                    center: [sx * x, leg_h / 2.0, 0.0],
                    group: 1,
                });
            }
        }
        5 => {
            let z = (d - leg) / 2.0 - 0.05;
            let names = ["leg_fl", "leg_fr", "leg_bl", "leg_br"];
            for (k, (sx, sz)) in [(-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)].into_iter().enumerate() {
                out.push(Cuboid {
                    name: names[k],
                    size: [leg, leg_h, leg],
                    center: [sx * x, leg_h / 2.0, sz * z],
                    group: 1,
                });
            }
        }
        n => return Err(Error::Spec(format!("table takes 3 or 5 parts, got {n}"))),
    }
    Ok(out)
}

fn airplane_layout(rng: &mut impl Rng, parts: usize, j: f64) -> Result<Vec<Cuboid>> {
    let len = jittered(rng, 2.0, j);
    let body = jittered(rng, 0.22, j);
    let span = jittered(rng, 0.9, j);
    let chord = jittered(rng, 0.4, j);
    let wing_t = jittered(rng, 0.05, j);
    let tail_span = jittered(rng, 0.7, j);
    let fin_h = jittered(rng, 0.35, j);
    let tail_z = -(len / 2.0) + chord * 0.4;
    let mut out = vec![Cuboid { name: "fuselage", size: [body, body, len], center: [0.0; 3], group: 0 }];
    match parts {
        4 => out.push(Cuboid {
            name: "wing",
            size: [2.0 * span + body, wing_t, chord],
            center: [0.0, 0.0, 0.1],
            group: 1,
        }),
        5 => {
            for (k, sx) in [-1.0, 1.0].into_iter().enumerate() {
                out.push(Cuboid {
                    name: if k == 0 { "wing_left" } else { "wing_right" },
                    size: [span, wing_t, chord],
                    center: [sx * (body + span) / 2.0, 0.0, 0.1],
                    group: 1,
                });
            }
        }
        n => return Err(Error::Spec(format!("airplane takes 4 or 5 parts, got {n}"))),
    }
    out.push(Cuboid {
        name: "stabilizer",
        size: [tail_span, wing_t, chord * 0.6],
        center: [0.0, body / 2.0, tail_z],
        group: 2,
    });
    out.push(Cuboid {
        name: "fin",
        size: [wing_t, fin_h, chord * 0.6],
        center: [0.0, body / 2.0 + fin_h / 2.0, tail_z],
        group: 3,
    });
    Ok(out)
}

/// Uniform sample on the surface of an origin-centred box with full side
/// lengths `size`.
pub fn sample_cuboid_surface(size: [f64; 3], n: usize, rng: &mut impl Rng) -> Result<PointCloud> {
    if size.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Spec(format!("cuboid sides must be positive, got {size:?}")));
    }
    if n == 0 {
        return Err(Error::Spec("points per part must be >= 1".into()));
    }
    let [a, b, c] = size;
    // face pairs normal to x, y, z
    let areas = [b * c, a * c, a * b];
    let total: f64 = areas.iter().sum();
    let half = [a / 2.0, b / 2.0, c / 2.0];
    let points = (0..n)
        .map(|_| {
            let u = rng.gen_range(0.0..total);
            let axis = if u < areas[0] {
                0
            } else if u < areas[0] + areas[1] {
                1
            } else {
                2
            };
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let mut p = [0.0; 3];
            for (k, v) in p.iter_mut().enumerate() {
                *v = if k == axis {
                    side * half[k]
                } else {
                    rng.gen_range(-half[k]..=half[k])
                };
            }
            Point3::new(p[0], p[1], p[2])
        })
        .collect();
    PointCloud::new(points)
}

/// Builds a scene from boxes: each canonical cloud is centred at its own
/// origin and axis-aligned, and the ground-truth pose translates it to its
/// centre. The layout is rescaled so the shape fits the unit cube centred at
/// the origin.
pub fn scene_from_cuboids(
    boxes: &[Cuboid],
    label: &str,
    points_per_part: usize,
    rng: &mut impl Rng,
) -> Result<Scene> {
    if boxes.len() < 2 || boxes.len() > DEFAULT_MAX_PARTS {
        return Err(Error::Spec(format!(
            "part count must lie in 2..={DEFAULT_MAX_PARTS}, got {}",
            boxes.len()
        )));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for b in boxes {
        for k in 0..3 {
            lo[k] = lo[k].min(b.center[k] - b.size[k] / 2.0);
            hi[k] = hi[k].max(b.center[k] + b.size[k] / 2.0);
        }
    }
    let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::Spec("shape has no extent".into()));
    }
    let scale = 1.0 / extent;
    let mid: Vec<f64> = (0..3).map(|k| (lo[k] + hi[k]) / 2.0).collect();

    let mut shared: Vec<(usize, [f64; 3], Arc<PointCloud>)> = Vec::new();
    let mut parts = Vec::with_capacity(boxes.len());
    for (id, b) in boxes.iter().enumerate() {
        let size = b.size.map(|s| s * scale);
        let cloud = match shared.iter().find(|(g, s, _)| *g == b.group && *s == size) {
            Some((_, _, c)) => Arc::clone(c),
            None => {
                let c = Arc::new(sample_cuboid_surface(size, points_per_part, rng)?);
                shared.push((b.group, size, Arc::clone(&c)));
                c
            }
        };
        let t = Vector3::new(
            (b.center[0] - mid[0]) * scale,
            (b.center[1] - mid[1]) * scale,
            (b.center[2] - mid[2]) * scale,
        );
        parts.push(Part::new(id as u32, cloud, Pose::from_translation(t)));
    }
    Scene::new(parts, label)
}

/// Ground-truth scene for `spec`; deterministic given the generator state.
pub fn generate_scene(spec: &ShapeSpec, rng: &mut impl Rng) -> Result<(Scene, SceneMeta)> {
    if spec.points_per_part == 0 {
        return Err(Error::Spec("points per part must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&spec.jitter) {
        return Err(Error::Spec(format!("jitter must lie in [0, 1), got {}", spec.jitter)));
    }
    let parts = spec.parts.unwrap_or(spec.family.default_parts());
    let boxes = match spec.family {
        Family::Chair => chair_layout(rng, parts, spec.jitter)?,
        Family::Table => table_layout(rng, parts, spec.jitter)?,
        Family::Airplane => airplane_layout(rng, parts, spec.jitter)?,
    };
    let scene = scene_from_cuboids(&boxes, spec.family.label(), spec.points_per_part, rng)?;
    let meta = SceneMeta {
        family: spec.family,
        part_names: boxes.iter().map(|b| b.name.to_string()).collect(),
        part_sizes: boxes.iter().map(|b| b.size).collect(),
        points_per_part: spec.points_per_part,
    };
    Ok((scene, meta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelName {
    Slight,
    Moderate,
    Substantial,
    Excessive,
    Custom,
}

/// A pose perturbation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub name: LevelName,
    /// Rotation angle cap, degrees.
    pub max_angle: f64,
    /// Per-axis Gaussian translation sigma. Unbounded at the dispersed level,
    /// which JSON carries as `null`.
    #[serde(with = "unbounded")]
    pub trans_sigma: f64,
    /// Uniform rotation over SO(3) and uniform position in the unit cube,
    /// ignoring the two magnitudes.
    pub dispersed: bool,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl NoiseLevel {
    pub const SLIGHT: Self = Self::bounded(LevelName::Slight, 15.0, 0.05);
    pub const MODERATE: Self = Self::bounded(LevelName::Moderate, 45.0, 0.15);
    pub const SUBSTANTIAL: Self = Self::bounded(LevelName::Substantial, 90.0, 0.30);
    pub const EXCESSIVE: Self = Self {
        name: LevelName::Excessive,
        max_angle: 180.0,
        trans_sigma: f64::INFINITY,
        dispersed: true,
    };
    pub const ALL: [Self; 4] = [Self::SLIGHT, Self::MODERATE, Self::SUBSTANTIAL, Self::EXCESSIVE];

    const fn bounded(name: LevelName, max_angle: f64, trans_sigma: f64) -> Self {
        Self {
            name,
            max_angle,
            trans_sigma,
            dispersed: false,
        }
    }

    pub fn custom(max_angle: f64, trans_sigma: f64) -> Result<Self> {
        if !(0.0..=180.0).contains(&max_angle) || !(trans_sigma >= 0.0 && trans_sigma.is_finite()) {
            return Err(Error::Spec(format!(
                "custom level needs angle in [0, 180] and finite sigma >= 0, got {max_angle}, {trans_sigma}"
            )));
        }
        Ok(Self::bounded(LevelName::Custom, max_angle, trans_sigma))
    }
}

impl std::str::FromStr for NoiseLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slight" => Ok(Self::SLIGHT),
            "moderate" => Ok(Self::MODERATE),
            "substantial" => Ok(Self::SUBSTANTIAL),
            "excessive" => Ok(Self::EXCESSIVE),
            other => Err(Error::Config(format!("unknown noise level {other:?}"))),
        }
    }
}

impl std::fmt::Display for LevelName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LevelName::Slight => "slight",
            LevelName::Moderate => "moderate",
            LevelName::Substantial => "substantial",
            LevelName::Excessive => "excessive",
            LevelName::Custom => "custom",
        })
    }
}

fn normal3(rng: &mut impl Rng) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Uniformly distributed rotation (normalized 4D Gaussian).
pub fn uniform_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    loop {
        let q = nalgebra::Quaternion::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if q.norm() > 1e-9 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

/// Rotation about a uniformly random axis by an angle uniform in
/// `[0, max_angle]` degrees.
pub fn bounded_rotation(max_angle: f64, rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let axis = loop {
        let v = normal3(rng);
        if v.norm() > 1e-9 {
            break Unit::new_normalize(v);
        }
    };
    let angle = rng.gen_range(0.0..=max_angle.to_radians());
    UnitQuaternion::from_axis_angle(&axis, angle)
}

/// Randomizes every part pose. Rotations are applied about the part's own
/// origin (`R ← R_rand R`); translations get Gaussian offsets, or are
/// replaced by a uniform position in the unit cube at the dispersed level.
pub fn perturb(scene: &Scene, level: &NoiseLevel, rng: &mut impl Rng) -> Scene {
    let poses: Vec<Pose> = scene
        .parts()
        .iter()
        .map(|p| {
            let pose = p.pose();
            if level.dispersed {
                let q = uniform_rotation(rng);
                let t = Vector3::new(
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                );
                return Pose::new(q * pose.rotation(), t);
            }
            let r = bounded_rotation(level.max_angle, rng);
            let dt = normal3(rng) * level.trans_sigma;
            let rotation = if level.max_angle == 0.0 {
                *pose.rotation()
            } else {
                UnitQuaternion::new_normalize((r * pose.rotation()).into_inner())
            };
            let translation = if level.trans_sigma == 0.0 {
                *pose.translation()
            } else {
                pose.translation() + dt
            };
            Pose::new(rotation, translation)
        })
        .collect();
    scene
        .with_poses(&poses)
        .expect("pose count matches part count")
}
