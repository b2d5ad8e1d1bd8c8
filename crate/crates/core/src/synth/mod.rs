//! Hand motion synthesis from a representation and an object trajectory.
//!
//! The first stage fits every frame's pose to the fingertip and joint
//! targets decoded from the finger embeddings. The second stage pulls
//! contacting fingers onto the part surface and pushes penetrating
//! vertices out, rebuilding correspondences between rounds.

mod contact;
mod fit;

use serde::{Deserialize, Serialize};

use crate::cams::CamsSequence;
use crate::error::{Error, Result};
use crate::geometry::{GoalKeyframe, PartFrame};
use crate::hand::{HandConfig, HandModel, HandPose, POSE_DIM};
use crate::motion::Motion;
use crate::numopt::ObjectiveReport;
use crate::scene::Scene;
use crate::Vec3;

pub use contact::{
    build_correspondences, optimize_contact, ContactCorrespondence, ContactObjective, ContactReport, StepReport,
    Correspondences, PenetrationCorrespondence, VertexTarget, COEFFICIENT_LENGTH, SECTION_RADIUS,
};
pub use fit::{fit_finger_embeddings, FitObjective};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitWeights {
    pub lambda_tip: f64,
    pub lambda_joint: f64,
    pub lambda_smooth_joints: f64,
    pub lambda_smooth_wrist: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Compare raw bone vectors with the target directions instead of
    /// normalizing them first.
    #[serde(default)]
    pub literal_joint_loss: bool,
}

impl Default for FitWeights {
    fn default() -> Self {
        FitWeights {
            lambda_tip: 50.0,
            lambda_joint: 1.0,
            lambda_smooth_joints: 0.05,
            lambda_smooth_wrist: 1000.0,
            epochs: 2000,
            learning_rate: 1e-2,
            literal_joint_loss: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactWeights {
    pub lambda_contact: f64,
    pub lambda_trans: f64,
    pub lambda_v: f64,
    pub lambda_a: f64,
    /// Smoothness multiplier per step; its length is the number of steps.
    pub smooth_schedule: Vec<f64>,
    pub epochs_per_step: usize,
    pub cone_angle_deg: f64,
    pub learning_rate: f64,
    /// How velocity and acceleration penalties combine over frames and joints.
    #[serde(default)]
    pub smooth_reduction: SmoothReduction,
    /// Keep the fitting stage's fingertip and joint terms active during
    /// refinement so frames without contact stay on their targets.
    #[serde(default = "default_true")]
    pub keep_fit_terms: bool,
}

fn default_true() -> bool {
    true
}

/// Reduction of the per-frame, per-joint velocity and acceleration norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothReduction {
    /// Mean over interior frames and joints.
    #[default]
    Mean,
    /// Plain sum.
    Sum,
}

impl Default for ContactWeights {
    fn default() -> Self {
        ContactWeights {
            lambda_contact: 80.0,
            lambda_trans: 1.0,
            lambda_v: 5.0,
            lambda_a: 20.0,
            smooth_schedule: vec![1.0, 1.0, 10.0, 10.0, 500.0, 500.0],
            epochs_per_step: 500,
            cone_angle_deg: 45.0,
            learning_rate: 5e-3,
            smooth_reduction: SmoothReduction::Mean,
            keep_fit_terms: true,
        }
    }
}

impl ContactWeights {
    pub fn steps(&self) -> usize {
        self.smooth_schedule.len()
    }
}

fn validate_non_negative(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v >= 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be a finite non-negative number")));
        }
    }
    Ok(())
}

impl FitWeights {
    pub fn validate(&self) -> Result<()> {
        validate_non_negative(&[
            ("lambda_tip", self.lambda_tip),
            ("lambda_joint", self.lambda_joint),
            ("lambda_smooth_joints", self.lambda_smooth_joints),
            ("lambda_smooth_wrist", self.lambda_smooth_wrist),
            ("learning_rate", self.learning_rate),
        ])
    }
}

impl ContactWeights {
    pub fn validate(&self) -> Result<()> {
        validate_non_negative(&[
            ("lambda_contact", self.lambda_contact),
            ("lambda_trans", self.lambda_trans),
            ("lambda_v", self.lambda_v),
            ("lambda_a", self.lambda_a),
            ("learning_rate", self.learning_rate),
        ])?;
        if self.smooth_schedule.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::invalid("smooth_schedule entries must be non-negative"));
        }
        if !(self.cone_angle_deg > 0.0 && self.cone_angle_deg <= 180.0) {
            return Err(Error::invalid("cone_angle_deg must lie in (0, 180]"));
        }
        Ok(())
    }
}

pub(crate) fn pose_at(x: &[f64], t: usize) -> HandPose {
    let p = &x[POSE_DIM * t..POSE_DIM * (t + 1)];
    let mut angles = [0.0; 45];
    angles.copy_from_slice(&p[6..]);
    HandPose::new(Vec3::new(p[0], p[1], p[2]), Vec3::new(p[3], p[4], p[5]), angles)
}

pub(crate) fn flatten(poses: &[HandPose]) -> Vec<f64> {
    poses.iter().flat_map(|p| p.to_array()).collect()
}

pub(crate) fn unflatten(x: &[f64]) -> Vec<HandPose> {
    (0..x.len() / POSE_DIM).map(|t| pose_at(x, t)).collect()
}

pub(crate) fn check_lengths(cams: &CamsSequence, scene: &Scene, object_traj: &[Vec<PartFrame>], theta: &[HandPose]) -> Result<()> {
    if cams.frames.len() != object_traj.len() || theta.len() != object_traj.len() {
        return Err(Error::ShapeMismatch(format!(
            "representation has {} frames, object trajectory {}, hand sequence {}",
            cams.frames.len(),
            object_traj.len(),
            theta.len()
        )));
    }
    if cams.part_count() != scene.parts.len() || object_traj.iter().any(|f| f.len() != scene.parts.len()) {
        return Err(Error::ShapeMismatch("part counts of representation, scene and trajectory differ".into()));
    }
    Ok(())
}

/// Everything produced by [`synthesize`].
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub motion: Motion,
    /// Hand sequence after the fitting stage.
    pub fitted: Vec<HandPose>,
    pub fit_report: ObjectiveReport,
    pub contact_report: ContactReport,
}

/// Runs the whole pipeline: object trajectory from the goals, fitting from
/// `theta_init` repeated over every frame, then contact refinement.
#[allow(clippy::too_many_arguments)]
pub fn synthesize(
    scene: &Scene,
    goals: &[GoalKeyframe],
    cams: &CamsSequence,
    theta_init: &HandPose,
    frames_per_stage: usize,
    hand: &HandConfig,
    fit: &FitWeights,
    contact: &ContactWeights,
    fps: f64,
) -> Result<Synthesis> {
    if goals.len() != cams.stage_count() + 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} goal keyframes give {} stages, representation has {}",
            goals.len(),
            goals.len().saturating_sub(1),
            cams.stage_count()
        )));
    }
    let object_traj = scene.object_trajectory(goals, frames_per_stage)?;
    let model = HandModel::new(hand.clone())?;
    let theta0 = vec![*theta_init; object_traj.len()];
    let (fitted, fit_report) = fit_finger_embeddings(cams, scene, &object_traj, &theta0, &model, fit)?;
    let (hand_track, contact_report) = optimize_contact(&fitted, cams, scene, &object_traj, &model, fit, contact)?;
    Ok(Synthesis { motion: Motion::new(fps, hand_track, object_traj)?, fitted, fit_report, contact_report })
}
