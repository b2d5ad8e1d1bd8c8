use cams_core::cams::{extract_cams, CamsSequence, Representation};
use cams_core::geometry::{make_scene, GoalKeyframe, PartFrame, PartKeyframe, SceneKind, SceneParams};
use cams_core::hand::{HandConfig, HandModel, HandPose, NUM_FINGERS, POSE_DIM};
use cams_core::metrics::penetration_rate;
use cams_core::motion::Motion;
use cams_core::numopt::{finite_diff_gradient, max_relative_error, Objective};
use cams_core::scene::Scene;
use cams_core::scripted::scripted_motion;
use cams_core::synth::*;
use cams_core::Vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::FRAC_PI_2;

fn model() -> HandModel {
    HandModel::new(HandConfig::default()).unwrap()
}

fn flat(poses: &[HandPose]) -> Vec<f64> {
    poses.iter().flat_map(|p| p.to_array()).collect()
}

fn far_hand() -> HandPose {
    HandPose::new(Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.2, -0.1, 0.3), [0.1; 45])
}

/// Static box with a far-away hand: representation without any contact.
fn quiet_box(frames: usize) -> (Scene, Vec<Vec<PartFrame>>, CamsSequence) {
    let scene = make_scene(SceneKind::BoxOnGround, &SceneParams::default()).unwrap();
    let objects = vec![vec![PartFrame::identity()]; frames];
    let motion = Motion::new(30.0, vec![far_hand(); frames], objects.clone()).unwrap();
    let b = [0, frames / 2, frames - 1];
    let cams = extract_cams(&motion, &scene, &b, &HandConfig::default(), &Representation::default()).unwrap();
    assert!(cams.frames.iter().all(|f| f.tuples.iter().all(|s| !s.f_n)));
    (scene, objects, cams)
}

/// Middle finger pointing down with its lowest point at `tip`.
fn pointing_hand(model: &HandModel, tip: Vec3) -> (HandPose, usize) {
    let mut pose = HandPose::new(Vec3::zeros(), Vec3::new(-FRAC_PI_2, 0.0, 0.0), [0.0; 45]);
    let v = model.vertices(&model.state(&pose));
    let low = (0..v.len()).min_by(|a, b| v[*a].z.total_cmp(&v[*b].z)).unwrap();
    pose.wrist_translation = tip - v[low];
    (pose, low)
}

struct Laptop {
    scene: Scene,
    truth: Motion,
    cams: CamsSequence,
    initial: HandPose,
}

fn laptop(frames_per_stage: usize) -> Laptop {
    let scene = make_scene(SceneKind::HingedLaptop, &SceneParams::default()).unwrap();
    let hand = HandConfig::default();
    let s = scripted_motion(SceneKind::HingedLaptop, &scene, &hand, frames_per_stage, 30.0).unwrap();
    let cams = extract_cams(&s.motion, &scene, &s.stage_boundaries, &hand, &Representation::default()).unwrap();
    Laptop { scene, truth: s.motion, cams, initial: s.initial_pose }
}

#[test]
fn fit_without_targets_keeps_a_constant_sequence() {
    let (scene, objects, cams) = quiet_box(7);
    let theta = vec![far_hand(); 7];
    let (out, report) = fit_finger_embeddings(&cams, &scene, &objects, &theta, &model(), &FitWeights::default()).unwrap();
    assert_eq!(out, theta);
    assert_eq!(report.final_loss(), 0.0);
}

#[test]
fn single_frame_has_no_smoothness() {
    let l = laptop(4);
    let m = model();
    let mut cams = l.cams.clone();
    cams.frames.truncate(1);
    let objects = vec![l.truth.objects[5].clone()];
    cams.frames[0] = l.cams.frames[5].clone();
    let mut obj = FitObjective::new(&cams, &l.scene, &objects, &m, &FitWeights::default()).unwrap();
    let x = l.truth.hand[2].to_array();
    let terms = obj.terms(&x);
    assert_eq!(terms.iter().find(|t| t.0 == "smooth").unwrap().1, 0.0);
    assert!(terms.iter().find(|t| t.0 == "tip").unwrap().1 > 0.0);
}

#[test]
fn frames_without_targets_stay_put_without_smoothing() {
    let l = laptop(6);
    let m = model();
    let objects = l.scene.object_trajectory(&l.scene.goals, 6).unwrap();
    let weights = FitWeights { lambda_smooth_joints: 0.0, lambda_smooth_wrist: 0.0, epochs: 50, ..FitWeights::default() };
    let theta = vec![l.initial; objects.len()];
    // every laptop frame is near the hand; silence the first few
    let mut cams = l.cams.clone();
    for fr in &mut cams.frames[..4] {
        for s in &mut fr.tuples {
            s.f_n = false;
            s.f_c = false;
            s.embeddings = None;
        }
    }
    let obj = FitObjective::new(&cams, &l.scene, &objects, &m, &weights).unwrap();
    let idle: Vec<usize> = (0..objects.len()).filter(|&t| obj.active_targets(t) == 0).collect();
    let busy = (0..objects.len()).filter(|&t| obj.active_targets(t) > 0).count();
    assert!(!idle.is_empty() && busy > 0);
    let (out, _) = fit_finger_embeddings(&cams, &l.scene, &objects, &theta, &m, &weights).unwrap();
    for t in idle {
        assert_eq!(out[t], theta[t], "frame {t}");
    }
}

#[test]
fn mismatched_lengths_are_rejected() {
    let (scene, objects, cams) = quiet_box(5);
    let m = model();
    let theta = vec![far_hand(); 4];
    assert!(fit_finger_embeddings(&cams, &scene, &objects, &theta, &m, &FitWeights::default()).is_err());
    assert!(optimize_contact(&theta, &cams, &scene, &objects, &m, &FitWeights::default(), &ContactWeights::default()).is_err());
    let goals = vec![scene.goals[0].clone(); 2];
    let r = synthesize(&scene, &goals, &cams, &far_hand(), 2, &HandConfig::default(), &FitWeights::default(), &ContactWeights::default(), 30.0);
    assert!(r.is_err());
}

#[test]
fn invalid_weights_are_rejected() {
    let (scene, objects, cams) = quiet_box(5);
    let theta = vec![far_hand(); 5];
    let w = FitWeights { lambda_tip: -1.0, ..FitWeights::default() };
    assert!(fit_finger_embeddings(&cams, &scene, &objects, &theta, &model(), &w).is_err());
    let c = ContactWeights { cone_angle_deg: 0.0, ..ContactWeights::default() };
    assert!(optimize_contact(&theta, &cams, &scene, &objects, &model(), &FitWeights::default(), &c).is_err());
}

#[test]
fn contact_stage_without_terms_keeps_theta() {
    let (scene, objects, cams) = quiet_box(6);
    let theta = vec![far_hand(); 6];
    let (out, report) =
        optimize_contact(&theta, &cams, &scene, &objects, &model(), &FitWeights::default(), &ContactWeights::default()).unwrap();
    assert_eq!(out, theta);
    assert_eq!(report.steps.len(), 6);
    assert!(report.steps.iter().all(|s| s.contact_tuples == 0 && s.penetrating_vertices == 0));
}

#[test]
fn synthesize_with_still_object_and_no_contacts_repeats_h0() {
    let (scene, _, cams) = quiet_box(5);
    let still = GoalKeyframe { parts: vec![PartKeyframe::default()] };
    let goals = vec![still; 3];
    let out = synthesize(&scene, &goals, &cams, &far_hand(), 2, &HandConfig::default(), &FitWeights::default(), &ContactWeights::default(), 30.0)
        .unwrap();
    assert_eq!(out.motion.frame_count(), 2 * 2 + 1);
    assert!(out.motion.hand.iter().all(|h| *h == far_hand()));
}

#[test]
fn coefficients_are_centralized() {
    let l = laptop(6);
    let m = model();
    let objects = &l.truth.objects;
    let c = build_correspondences(&l.truth.hand, &l.cams, &l.scene, objects, &m, 45.0).unwrap();
    assert!(!c.contacts.is_empty());
    for corr in &c.contacts {
        let max = corr.targets.iter().map(|t| t.coefficient).fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        assert!(corr.targets.iter().all(|t| t.coefficient > 0.0 && t.coefficient <= 1.0));
        assert!(!corr.whole_part);
    }
    for p in &c.penetrations {
        assert!(p.targets.iter().all(|t| t.coefficient > 0.0 && t.coefficient <= 1.0 && t.signed_distance < 0.0));
    }
}

#[test]
fn vertex_at_its_target_has_unit_coefficient() {
    let l = laptop(6);
    let m = model();
    let c = build_correspondences(&l.truth.hand, &l.cams, &l.scene, &l.truth.objects, &m, 45.0).unwrap();
    for corr in &c.contacts {
        let state = m.state(&l.truth.hand[corr.frame]);
        for t in &corr.targets {
            let v = m.vertex(&state, t.vertex);
            if (v - t.point).norm() < 1e-12 {
                assert_eq!(t.coefficient, 1.0);
            }
        }
    }
}

#[test]
fn seeded_penetration_targets_the_nearest_face() {
    let (scene, objects, cams) = quiet_box(3);
    let m = model();
    let (pose, low) = pointing_hand(&m, Vec3::new(0.004, -0.003, 0.1 - 0.010));
    let theta = vec![pose; 3];
    let c = build_correspondences(&theta, &cams, &scene, &objects, &m, 45.0).unwrap();
    assert!(c.contacts.is_empty());
    let hit = c
        .penetrations
        .iter()
        .filter(|p| p.frame == 0)
        .flat_map(|p| p.targets.iter())
        .find(|t| t.vertex == low)
        .expect("lowest vertex penetrates");
    // analytic nearest face of the 10 cm box: the top at z = 0.1
    assert!((hit.point - Vec3::new(0.004, -0.003, 0.1)).norm() < 1e-12);
    assert!((hit.signed_distance + 0.010).abs() < 1e-12);

    let (outside, _) = pointing_hand(&m, Vec3::new(0.0, 0.0, 0.15));
    let c = build_correspondences(&[outside; 3], &cams, &scene, &objects, &m, 45.0).unwrap();
    assert_eq!(c.penetrating_vertices(), 0);
}

#[test]
fn contact_stage_removes_seeded_penetration() {
    let (scene, objects, cams) = quiet_box(3);
    let m = model();
    let (pose, _) = pointing_hand(&m, Vec3::new(0.0, 0.0, 0.1 - 0.010));
    let theta = vec![pose; 3];
    let before = Motion::new(30.0, theta.clone(), objects.clone()).unwrap();
    assert!(penetration_rate(&before, &scene, &m, 0.005).unwrap() > 0.0);
    let (out, report) =
        optimize_contact(&theta, &cams, &scene, &objects, &m, &FitWeights::default(), &ContactWeights::default()).unwrap();
    let after = Motion::new(30.0, out, objects).unwrap();
    assert_eq!(penetration_rate(&after, &scene, &m, 0.005).unwrap(), 0.0);
    for s in &report.steps {
        assert!(s.objective.final_loss() <= s.objective.initial_loss());
    }
}

fn perturbed(poses: &[HandPose], rng: &mut ChaCha8Rng, sigma: f64) -> Vec<f64> {
    let n = Normal::new(0.0, sigma).unwrap();
    flat(poses).into_iter().map(|v| v + n.sample(rng)).collect()
}

fn check_gradient(obj: &mut dyn Objective, x: &[f64]) -> f64 {
    let mut g = vec![0.0; x.len()];
    obj.evaluate(x, &mut g);
    let fd = finite_diff_gradient(
        |y| {
            let mut scratch = vec![0.0; y.len()];
            obj.evaluate(y, &mut scratch)
        },
        x,
        1e-6,
    );
    max_relative_error(&g, &fd, 1e-2)
}

#[test]
fn fit_gradient_matches_finite_differences() {
    let l = laptop(2);
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for literal in [false, true] {
        let w = FitWeights { literal_joint_loss: literal, ..FitWeights::default() };
        let mut obj = FitObjective::new(&l.cams, &l.scene, &l.truth.objects, &m, &w).unwrap();
        for _ in 0..20 {
            let x = perturbed(&l.truth.hand, &mut rng, 0.05);
            let err = check_gradient(&mut obj, &x);
            assert!(err < 1e-4, "literal {literal}: {err}");
        }
    }
}

#[test]
fn contact_gradient_matches_finite_differences() {
    let l = laptop(2);
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    // sink the hand 4 mm so penetration terms are present too
    let sunk: Vec<HandPose> = l
        .truth
        .hand
        .iter()
        .map(|h| {
            let mut h = *h;
            h.wrist_translation.z -= 0.004;
            h
        })
        .collect();
    let corr = build_correspondences(&sunk, &l.cams, &l.scene, &l.truth.objects, &m, 45.0).unwrap();
    assert!(!corr.contacts.is_empty() && corr.penetrating_vertices() > 0);
    for reduction in [SmoothReduction::Mean, SmoothReduction::Sum] {
        for keep in [false, true] {
            let w = ContactWeights { smooth_reduction: reduction, keep_fit_terms: keep, ..ContactWeights::default() };
            let fit = keep.then(|| FitObjective::new(&l.cams, &l.scene, &l.truth.objects, &m, &FitWeights::default()).unwrap());
            let mut obj = ContactObjective::new(&m, &corr, sunk.len(), &w, 10.0, fit);
            for _ in 0..20 {
                let x = perturbed(&sunk, &mut rng, 0.02);
                let err = check_gradient(&mut obj, &x);
                assert!(err < 1e-4, "{reduction:?} keep {keep}: {err}");
            }
        }
    }
}

#[test]
fn smoothness_terms_vanish_for_constant_motion() {
    let l = laptop(2);
    let m = model();
    let corr = Correspondences::default();
    let theta = vec![l.initial; 5];
    let mut obj = ContactObjective::new(&m, &corr, 5, &ContactWeights::default(), 500.0, None);
    let x = flat(&theta);
    let mut g = vec![0.0; x.len()];
    assert_eq!(obj.evaluate(&x, &mut g), 0.0);
    assert!(g.iter().all(|v| *v == 0.0));
}

#[test]
fn synthesis_is_deterministic() {
    let l = laptop(4);
    let hand = HandConfig::default();
    let fit = FitWeights { epochs: 200, ..FitWeights::default() };
    let contact = ContactWeights { epochs_per_step: 30, ..ContactWeights::default() };
    let run = || synthesize(&l.scene, &l.scene.goals, &l.cams, &l.initial, 4, &hand, &fit, &contact, 30.0).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.motion, b.motion);
    assert_eq!(a.fit_report, b.fit_report);
}

#[test]
fn laptop_round_trip() {
    const F: usize = 40;
    let l = laptop(F);
    let m = model();
    let hand = HandConfig::default();
    let out = synthesize(&l.scene, &l.scene.goals, &l.cams, &l.initial, F, &hand, &FitWeights::default(), &ContactWeights::default(), 30.0)
        .unwrap();
    assert_eq!(out.motion.frame_count(), 2 * F + 1);

    let fit = &out.fit_report;
    assert!(fit.final_loss() <= 0.01 * fit.initial_loss(), "{} / {}", fit.final_loss(), fit.initial_loss());

    // fitted fingertips against their decoded targets
    let obj = FitObjective::new(&l.cams, &l.scene, &out.motion.objects, &m, &FitWeights::default()).unwrap();
    let (mut sum, mut n) = (0.0, 0);
    for (t, pose) in out.fitted.iter().enumerate() {
        let joints = m.joints(&m.state(pose));
        for f in 0..NUM_FINGERS {
            for target in obj.tip_targets(t, f) {
                sum += (joints.fingers[f].tip - target).norm();
                n += 1;
            }
        }
    }
    assert!(n > 0 && sum / (n as f64) < 0.005, "{}", sum / n as f64);

    // final fingertips against the scripted motion on near frames
    let (mut sum, mut n) = (0.0, 0);
    for t in 0..out.motion.frame_count() {
        let a = m.joints(&m.state(&out.motion.hand[t]));
        let b = m.joints(&m.state(&l.truth.hand[t]));
        for f in 0..NUM_FINGERS {
            if (0..l.scene.parts.len()).any(|k| l.cams.frames[t].tuples[l.cams.tuple_index(f, k)].f_n) {
                sum += (a.fingers[f].tip - b.fingers[f].tip).norm();
                n += 1;
            }
        }
    }
    assert!(sum / (n as f64) < 0.015, "{}", sum / n as f64);

    let fitted = Motion::new(30.0, out.fitted.clone(), out.motion.objects.clone()).unwrap();
    let before = penetration_rate(&fitted, &l.scene, &m, 0.005).unwrap();
    let after = penetration_rate(&out.motion, &l.scene, &m, 0.005).unwrap();
    assert!(after <= before && after < 0.01, "{before} {after}");

    assert_eq!(out.contact_report.steps.len(), 6);
    for s in &out.contact_report.steps {
        let h = &s.objective.history;
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.objective.final_loss() < s.objective.initial_loss());
    }
    assert_eq!(POSE_DIM, 51);
}
