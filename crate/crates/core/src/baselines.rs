//! Direct pose optimization against a reference cloud, and the supervised
//! loss suite used for analysis.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{chamfer, KdTree, PointCloud, Pose, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimpleParams {
    pub learning_rate: f64,
    pub iterations: usize,
    /// Heavy-ball momentum in `[0, 1)`; 0 is plain gradient descent.
    pub momentum: f64,
}

impl Default for SimpleParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            iterations: 500,
            momentum: 0.5,
        }
    }
}

impl SimpleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iteration budget must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleConfig {
    pub params: SimpleParams,
    /// Shape the rendered scene is pulled towards.
    pub reference: PointCloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleOutcome {
    /// Loss at every evaluated iterate, starting with the input.
    pub loss: Vec<f64>,
    /// Running minimum of `loss`.
    pub best: Vec<f64>,
    pub diverged: bool,
}

/// Per-part gradient of a loss with respect to `(q, t)`, where `q` is the
/// raw quaternion `[w, x, y, z]` before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseGradient {
    pub quat: Vector4<f64>,
    pub trans: Vector3<f64>,
}

/// `∂R/∂q_k` for the unit-quaternion rotation matrix, `k` over (w, x, y, z).
fn rotation_partials(q: &Quaternion<f64>) -> [Matrix3<f64>; 4] {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    [
        Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0) * 2.0,
        Matrix3::new(0.0, y, z, y, -2.0 * x, -w, z, w, -2.0 * x) * 2.0,
        Matrix3::new(-2.0 * y, x, w, x, 0.0, z, -w, z, -2.0 * y) * 2.0,
        Matrix3::new(-2.0 * z, -w, x, w, -2.0 * z, y, x, y, 0.0) * 2.0,
    ]
}

/// Chamfer loss between the rendered scene and `reference`, and its
/// gradient with nearest-neighbour assignments held fixed.
pub fn scd_loss_and_gradient(scene: &Scene, reference: &PointCloud) -> (f64, Vec<PoseGradient>) {
    let rendered = scene.render();
    let pts = rendered.points();
    let refs = reference.points();
    let (n, m) = (pts.len() as f64, refs.len() as f64);
    let mut grad_p = vec![Vector3::zeros(); pts.len()];

    let ref_tree = KdTree::build(refs);
    let mut forward = 0.0;
    for (k, p) in pts.iter().enumerate() {
        let (j, d2) = ref_tree.nearest(p).expect("reference non-empty");
        forward += d2;
        grad_p[k] += (p - refs[j]) * (2.0 / n);
    }
    let tree = KdTree::build(pts);
    let mut backward = 0.0;
    for r in refs {
        let (k, d2) = tree.nearest(r).expect("scene non-empty");
        backward += d2;
        grad_p[k] += (pts[k] - r) * (2.0 / m);
    }
    let loss = forward / n + backward / m;

    let grads = scene
        .parts()
        .iter()
        .zip(scene.part_ranges())
        .map(|(part, range)| {
            let canon = part.canonical().points();
            let mut g_rot = Matrix3::zeros();
            let mut trans = Vector3::zeros();
            for (c, g) in canon.iter().zip(&grad_p[range]) {
                trans += g;
                g_rot += g * c.coords.transpose();
            }
            let q = part.pose().rotation().quaternion();
            let partials = rotation_partials(q);
            let g_unit = Vector4::from_fn(|k, _| g_rot.component_mul(&partials[k]).sum());
            // through q / |q| at |q| = 1: project out the radial part
            let qv = Vector4::new(q.w, q.i, q.j, q.k);
            let quat = g_unit - qv * qv.dot(&g_unit);
            PoseGradient { quat, trans }
        })
        .collect();
    (loss, grads)
}

/// Gradient descent on the scene-to-reference chamfer over seven parameters
/// per part. Quaternions are renormalized after every step. Returns the
/// best scene seen.
pub fn simple_optimize(scene: &Scene, cfg: &SimpleConfig) -> Result<(Scene, SimpleOutcome)> {
    cfg.params.validate()?;
    if scene.is_empty() {
        return Err(Error::InvalidInput("empty scene".into()));
    }
    let mut current = scene.clone();
    let mut velocity = vec![(Vector4::zeros(), Vector3::zeros()); scene.len()];
    let mut best_scene = scene.clone();
    let mut outcome = SimpleOutcome {
        loss: Vec::with_capacity(cfg.params.iterations + 1),
        best: Vec::with_capacity(cfg.params.iterations + 1),
        diverged: false,
    };

    for it in 0..=cfg.params.iterations {
        let (loss, grads) = scd_loss_and_gradient(&current, &cfg.reference);
        if !loss.is_finite() {
            log::warn!("simple baseline diverged at iteration {it}; keeping best iterate");
            outcome.diverged = true;
            break;
        }
        let best = outcome.best.last().copied().unwrap_or(f64::INFINITY);
        outcome.loss.push(loss);
        if loss < best {
            best_scene = current.clone();
            outcome.best.push(loss);
        } else {
            outcome.best.push(best);
        }
        if it == cfg.params.iterations || loss == 0.0 {
            break;
        }
        let poses: Vec<Pose> = current
            .parts()
            .iter()
            .zip(&grads)
            .zip(&mut velocity)
            .map(|((part, g), (vq, vt))| {
                *vq = *vq * cfg.params.momentum - g.quat * cfg.params.learning_rate;
                *vt = *vt * cfg.params.momentum - g.trans * cfg.params.learning_rate;
                let q = part.pose().rotation().quaternion();
                let raw = Quaternion::new(q.w + vq[0], q.i + vq[1], q.j + vq[2], q.k + vq[3]);
                Pose::new(UnitQuaternion::from_quaternion(raw), part.pose().translation() + *vt)
            })
            .collect();
        current = current.with_poses(&poses)?;
    }
    Ok((best_scene, outcome))
}

pub const TRANSLATION_WEIGHT: f64 = 1.0;
pub const ROTATION_WEIGHT: f64 = 10.0;
pub const SHAPE_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupervisedLosses {
    pub translation: f64,
    pub rotation: f64,
    pub shape: f64,
    pub total: f64,
}

impl SupervisedLosses {
    pub fn from_components(translation: f64, rotation: f64, shape: f64) -> Self {
        Self {
            translation,
            rotation,
            shape,
            total: TRANSLATION_WEIGHT * translation + ROTATION_WEIGHT * rotation + SHAPE_WEIGHT * shape,
        }
    }
}

/// Translation, rotated-part and whole-shape losses of `pred` against `gt`.
pub fn supervised_losses(pred: &Scene, gt: &Scene) -> Result<SupervisedLosses> {
    if pred.len() != gt.len() {
        return Err(Error::Correspondence(format!(
            "prediction has {} parts, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    let mut lt = 0.0;
    let mut lr = 0.0;
    for (p, g) in pred.parts().iter().zip(gt.parts()) {
        lt += (p.pose().translation() - g.pose().translation()).norm_squared();
        let rp = Pose::new(*p.pose().rotation(), Vector3::zeros()).apply(p.canonical());
        let rg = Pose::new(*g.pose().rotation(), Vector3::zeros()).apply(g.canonical());
        lr += chamfer(&rp, &rg);
    }
    let ls = chamfer(&pred.render(), &gt.render());
    Ok(SupervisedLosses::from_components(lt, lr, ls))
}
