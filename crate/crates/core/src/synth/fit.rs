use crate::cams::{embedding_world_targets, reference_frame, CamsSequence, EmbeddingMode, WorldTargets};
use crate::error::{Error, Result};
use crate::geometry::PartFrame;
use crate::hand::{HandModel, HandPose, PointOwner, PoseGradient, NUM_FINGERS, POSE_DIM};
use crate::numopt::{minimize, Objective, ObjectiveReport, Schedule};
use crate::scene::Scene;
use crate::Vec3;

use super::{check_lengths, flatten, pose_at, unflatten, FitWeights};

/// The embedding-fitting objective over a flattened `51 × T` pose block.
pub struct FitObjective<'a> {
    model: &'a HandModel,
    /// Active `(finger, targets)` pairs per frame.
    targets: Vec<Vec<(usize, WorldTargets)>>,
    weights: FitWeights,
    mode: EmbeddingMode,
}

impl<'a> FitObjective<'a> {
    pub fn new(
        cams: &CamsSequence,
        scene: &Scene,
        object_traj: &[Vec<PartFrame>],
        model: &'a HandModel,
        weights: &FitWeights,
    ) -> Result<Self> {
        let matched = cams.matched_points(&scene.parts)?;
        let repr = &cams.representation;
        let parts = scene.parts.len();
        let mut targets = Vec::with_capacity(object_traj.len());
        for (t, fr) in cams.frames.iter().enumerate() {
            let mut row = Vec::new();
            for f in 0..NUM_FINGERS {
                for (k, part) in scene.parts.iter().enumerate() {
                    let idx = f * parts + k;
                    let s = &fr.tuples[idx];
                    let Some((f1, f2)) = &s.embeddings else { continue };
                    let j = fr.stage;
                    let pose = &object_traj[t][k];
                    let start = reference_frame(part, pose, matched[j][idx].as_ref(), repr);
                    let end = reference_frame(part, pose, matched[j + 1][idx].as_ref(), repr);
                    row.push((f, embedding_world_targets(f1, f2, fr.t_norm, &start, &end, repr.embedding)?));
                }
            }
            targets.push(row);
        }
        Ok(FitObjective { model, targets, weights: *weights, mode: repr.embedding })
    }

    pub fn frames(&self) -> usize {
        self.targets.len()
    }

    /// Number of active `(finger, part)` targets at frame `t`.
    pub fn active_targets(&self, t: usize) -> usize {
        self.targets[t].len()
    }

    /// World fingertip targets of finger `f` at frame `t`.
    pub fn tip_targets(&self, t: usize, f: usize) -> impl Iterator<Item = &Vec3> {
        self.targets[t].iter().filter(move |(g, _)| *g == f).map(|(_, w)| &w.tip)
    }

    /// Weighted fingertip and joint terms without smoothness; their
    /// gradient is added into `grad` when given.
    pub fn data_terms(&self, x: &[f64], grad: Option<&mut [f64]>) -> (f64, f64) {
        let (tip, joint, _) = self.parts(x, grad, false);
        (self.weights.lambda_tip * tip, self.weights.lambda_joint * joint)
    }

    /// Unweighted tip and joint sums and the weighted smoothness; gradient
    /// of the weighted total added into `grad` when given.
    fn parts(&self, x: &[f64], mut grad: Option<&mut [f64]>, with_smooth: bool) -> (f64, f64, f64) {
        let w = &self.weights;
        let (mut tip, mut joint) = (0.0, 0.0);
        for (t, row) in self.targets.iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            let state = self.model.state(&pose_at(x, t));
            let joints = self.model.joints(&state);
            let mut pg = PoseGradient::new();
            for (f, target) in row {
                let fj = joints.fingers[*f];
                let e = fj.tip - target.tip;
                tip += e.norm_squared();
                let mut g_tip = e * (2.0 * w.lambda_tip);
                let others = [fj.dip, fj.pip, fj.mcp, joints.root];
                for (q, p) in others.iter().enumerate() {
                    let owner = PointOwner { finger: *f, level: [2, 1, 0, 0][q] };
                    let g = match self.mode {
                        EmbeddingMode::Absolute => {
                            let d = p - target.joints[q];
                            joint += d.norm_squared();
                            d * (2.0 * w.lambda_joint)
                        }
                        EmbeddingMode::Directional if w.literal_joint_loss => {
                            let d = (p - fj.tip) - target.joints[q];
                            joint += d.norm_squared();
                            let g = d * (2.0 * w.lambda_joint);
                            g_tip -= g;
                            g
                        }
                        EmbeddingMode::Directional => {
                            let r = p - fj.tip;
                            let len = r.norm();
                            let u = r / len;
                            let d = u - target.joints[q];
                            joint += d.norm_squared();
                            // d|u - D|²/dr = 2 (I - u uᵀ)(u - D) / |r|
                            let g = (d - u * u.dot(&d)) * (2.0 * w.lambda_joint / len);
                            g_tip -= g;
                            g
                        }
                    };
                    if grad.is_some() {
                        pg.add(owner, p, &g);
                    }
                }
                if grad.is_some() {
                    pg.add(PointOwner { finger: *f, level: 3 }, &fj.tip, &g_tip);
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                pg.finish(&state, &mut g[POSE_DIM * t..POSE_DIM * (t + 1)]);
            }
        }
        let mut smooth = 0.0;
        let smooth_frames = if with_smooth { self.targets.len() } else { 0 };
        for t in 1..smooth_frames {
            for p in 0..POSE_DIM {
                let wp = if p < 3 { w.lambda_smooth_wrist } else { w.lambda_smooth_joints };
                let d = x[POSE_DIM * t + p] - x[POSE_DIM * (t - 1) + p];
                smooth += wp * d * d;
                if let Some(g) = grad.as_deref_mut() {
                    g[POSE_DIM * t + p] += 2.0 * wp * d;
                    g[POSE_DIM * (t - 1) + p] -= 2.0 * wp * d;
                }
            }
        }
        (tip, joint, smooth)
    }
}

impl Objective for FitObjective<'_> {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (tip, joint, smooth) = self.parts(x, Some(grad), true);
        self.weights.lambda_tip * tip + self.weights.lambda_joint * joint + smooth
    }

    fn terms(&mut self, x: &[f64]) -> Vec<(String, f64)> {
        let (tip, joint, smooth) = self.parts(x, None, true);
        vec![
            ("tip".into(), self.weights.lambda_tip * tip),
            ("joint".into(), self.weights.lambda_joint * joint),
            ("smooth".into(), smooth),
        ]
    }
}

/// Fits hand poses to the embedding targets, starting from `theta0`.
pub fn fit_finger_embeddings(
    cams: &CamsSequence,
    scene: &Scene,
    object_traj: &[Vec<PartFrame>],
    theta0: &[HandPose],
    model: &HandModel,
    weights: &FitWeights,
) -> Result<(Vec<HandPose>, ObjectiveReport)> {
    weights.validate()?;
    check_lengths(cams, scene, object_traj, theta0)?;
    let mut objective = FitObjective::new(cams, scene, object_traj, model, weights)?;
    let x0 = flatten(theta0);
    let (x, report) = minimize(&mut objective, &x0, &Schedule::new(weights.learning_rate, weights.epochs))
        .map_err(|e| match e {
            Error::NonFinite { iteration, .. } => {
                Error::NonFinite { iteration, context: "embedding fit".into() }
            }
            other => other,
        })?;
    Ok((unflatten(&x), report))
}
