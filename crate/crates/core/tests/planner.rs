use cams_core::cams::{extract_cams, CamsSequence, Representation};
use cams_core::geometry::{make_scene, SceneKind, SceneParams};
use cams_core::hand::{HandConfig, HandPose};
use cams_core::planner::{
    cvae_loss, retrieval_plan, ConditionDescriptor, GaussianParams, LibraryEntry, LossWeights, PlannerPrediction,
    LATENT_DIM,
};
use cams_core::scene::Scene;
use cams_core::scripted::scripted_motion;
use cams_core::Vec3;

fn laptop_cams(scale: f64) -> (Scene, CamsSequence) {
    let scene = make_scene(SceneKind::HingedLaptop, &SceneParams { scale, ..SceneParams::default() }).unwrap();
    let hand = HandConfig::default().scaled(scale);
    let s = scripted_motion(SceneKind::HingedLaptop, &scene, &hand, 6, 30.0).unwrap();
    let cams = extract_cams(&s.motion, &scene, &s.stage_boundaries, &hand, &Representation::default()).unwrap();
    (scene, cams)
}

fn total(pred: &PlannerPrediction, gt: &CamsSequence) -> f64 {
    cvae_loss(pred, gt, &GaussianParams::standard(), &LossWeights::default()).unwrap().total
}

#[test]
fn perfect_prediction_costs_nothing() {
    let (_, gt) = laptop_cams(1.0);
    let l = cvae_loss(&PlannerPrediction::from_cams(&gt), &gt, &GaussianParams::standard(), &LossWeights::default())
        .unwrap();
    assert_eq!([l.l_flag, l.l_pos, l.l_dir, l.l_tip, l.l_vec, l.l_kld, l.total], [0.0; 7]);
}

#[test]
fn total_is_the_weighted_sum() {
    let (_, gt) = laptop_cams(1.0);
    let mut pred = PlannerPrediction::from_cams(&gt);
    pred.targets[1][3].c = 0.3;
    pred.targets[1][3].v += Vec3::new(0.1, 0.0, 0.0);
    pred.samples[1][4][3].f1.tip += Vec3::new(0.0, 0.01, 0.0);
    pred.samples[1][2][3].f2.joints[1] += Vec3::new(0.0, 0.2, 0.0);
    let g = GaussianParams::new(vec![0.5; LATENT_DIM], vec![0.7; LATENT_DIM]).unwrap();
    let w = LossWeights::default();
    let l = cvae_loss(&pred, &gt, &g, &w).unwrap();
    let expect = 0.1 * l.l_flag + 500.0 * l.l_pos + 100.0 * l.l_dir + 100.0 * l.l_tip + 1.0 * l.l_vec + 5.0 * l.l_kld;
    assert_eq!(l.total, expect);
    assert!(l.l_flag > 0.0 && l.l_pos > 0.0 && l.l_tip > 0.0 && l.l_vec > 0.0 && l.l_kld > 0.0);
    assert_eq!(l.l_dir, 0.0);
}

#[test]
fn kld_of_unit_mean_is_32() {
    let (_, gt) = laptop_cams(1.0);
    let g = GaussianParams::new(vec![1.0; LATENT_DIM], vec![1.0; LATENT_DIM]).unwrap();
    let l = cvae_loss(&PlannerPrediction::from_cams(&gt), &gt, &g, &LossWeights::default()).unwrap();
    assert!((l.l_kld - 32.0).abs() < 1e-9);
}

#[test]
fn position_error_without_ground_truth_contact_is_ignored() {
    let (_, gt) = laptop_cams(1.0);
    let mut pred = PlannerPrediction::from_cams(&gt);
    // thumb on the base never touches
    let idx = gt.tuple_index(0, 0);
    assert!(!gt.targets[0][idx].c);
    pred.targets[0][idx].v = Vec3::new(0.9, 0.9, 0.9);
    pred.targets[0][idx].n = Vec3::new(0.0, 1.0, 0.0);
    assert_eq!(total(&pred, &gt), 0.0);
}

#[test]
fn flipping_any_gated_field_raises_the_total() {
    let (_, gt) = laptop_cams(1.0);
    let base = PlannerPrediction::from_cams(&gt);
    assert_eq!(total(&base, &gt), 0.0);
    let mut mutated = 0;
    for j in 0..gt.targets.len() {
        for idx in 0..gt.targets[j].len() {
            let mut p = base.clone();
            p.targets[j][idx].c = 1.0 - p.targets[j][idx].c;
            assert!(total(&p, &gt) > 0.0);
            if gt.targets[j][idx].c {
                let mut p = base.clone();
                p.targets[j][idx].v.x += 0.01;
                assert!(total(&p, &gt) > 0.0);
                let mut p = base.clone();
                p.targets[j][idx].n = -p.targets[j][idx].n;
                assert!(total(&p, &gt) > 0.0);
                mutated += 1;
            }
        }
    }
    assert!(mutated > 0);
    for (j, stage) in gt.samples.iter().enumerate() {
        for (s, fr) in stage.iter().enumerate() {
            for (idx, t) in fr.tuples.iter().enumerate() {
                let mut p = base.clone();
                p.samples[j][s][idx].f_n = 1.0 - p.samples[j][s][idx].f_n;
                assert!(total(&p, &gt) > 0.0);
                let mut p = base.clone();
                p.samples[j][s][idx].f_c = 1.0 - p.samples[j][s][idx].f_c;
                assert!(total(&p, &gt) > 0.0);
                if t.embeddings.is_some() && gt.targets[j][idx].c {
                    let mut p = base.clone();
                    p.samples[j][s][idx].f1.tip.z += 0.001;
                    assert!(total(&p, &gt) > 0.0);
                }
                if t.embeddings.is_some() && gt.targets[j + 1][idx].c {
                    let mut p = base.clone();
                    p.samples[j][s][idx].f2.joints[3].x += 0.1;
                    assert!(total(&p, &gt) > 0.0);
                }
            }
        }
    }
}

#[test]
fn layout_mismatch_and_bad_sigma_are_errors() {
    let (_, gt) = laptop_cams(1.0);
    let mut pred = PlannerPrediction::from_cams(&gt);
    pred.targets.pop();
    assert!(cvae_loss(&pred, &gt, &GaussianParams::standard(), &LossWeights::default()).is_err());
    let pred = PlannerPrediction::from_cams(&gt);
    let g = GaussianParams { mu: vec![0.0; 2], sigma: vec![1.0, -1.0] };
    assert!(cvae_loss(&pred, &gt, &g, &LossWeights::default()).is_err());
}

fn entry(scene: &Scene, cams: &CamsSequence) -> LibraryEntry {
    LibraryEntry { descriptor: ConditionDescriptor::new(scene, &scene.goals).unwrap(), cams: cams.clone(), source: None }
}

#[test]
fn retrieval_returns_the_exact_match_verbatim() {
    let (scene, cams) = laptop_cams(1.0);
    let box_scene = make_scene(SceneKind::BoxOnGround, &SceneParams::default()).unwrap();
    let mut other = cams.clone();
    other.initial_pose = HandPose::rest();
    let lib = vec![entry(&box_scene, &other), entry(&scene, &cams)];
    let (i, got) = retrieval_plan(&scene, &scene.goals, None, &lib, 0.0, 1).unwrap();
    assert_eq!(i, 1);
    assert_eq!(got, cams);
    assert!(retrieval_plan(&scene, &scene.goals, None, &[], 0.0, 1).is_err());
}

#[test]
fn retrieval_picks_the_nearer_condition() {
    let (scene, cams) = laptop_cams(1.0);
    let mut near = entry(&scene, &cams);
    near.descriptor.angle_profile.iter_mut().for_each(|a| *a += 0.1);
    let mut far = entry(&scene, &cams);
    far.descriptor.angle_profile.iter_mut().for_each(|a| *a -= 0.5);
    let (i, _) = retrieval_plan(&scene, &scene.goals, None, &[far.clone(), near.clone()], 0.0, 0).unwrap();
    assert_eq!(i, 1);
    let (i, _) = retrieval_plan(&scene, &scene.goals, None, &[near, far], 0.0, 0).unwrap();
    assert_eq!(i, 0);
}

#[test]
fn jitter_is_deterministic_per_seed() {
    let (scene, cams) = laptop_cams(1.0);
    let lib = vec![entry(&scene, &cams)];
    let (_, a) = retrieval_plan(&scene, &scene.goals, None, &lib, 0.005, 42).unwrap();
    let (_, b) = retrieval_plan(&scene, &scene.goals, None, &lib, 0.005, 42).unwrap();
    let (_, c) = retrieval_plan(&scene, &scene.goals, None, &lib, 0.005, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, cams);
    let flags = |x: &CamsSequence| x.targets.iter().flatten().map(|t| t.c).collect::<Vec<_>>();
    assert_eq!(flags(&a), flags(&cams));
    let h0 = HandPose::rest();
    let (_, d) = retrieval_plan(&scene, &scene.goals, Some(&h0), &lib, 0.0, 0).unwrap();
    assert_eq!(d.initial_pose, h0);
}

#[test]
fn retrieval_ignores_uniform_scale() {
    let (small, cams) = laptop_cams(1.0);
    let (big, big_cams) = laptop_cams(3.0);
    let pliers = make_scene(SceneKind::Pliers, &SceneParams::default()).unwrap();
    let big_pliers = make_scene(SceneKind::Pliers, &SceneParams { scale: 3.0, ..SceneParams::default() }).unwrap();
    let lib_small = vec![entry(&pliers, &cams), entry(&small, &cams)];
    let lib_big = vec![entry(&big_pliers, &big_cams), entry(&big, &big_cams)];
    let (a, _) = retrieval_plan(&small, &small.goals, None, &lib_small, 0.0, 0).unwrap();
    let (b, _) = retrieval_plan(&big, &big.goals, None, &lib_big, 0.0, 0).unwrap();
    assert_eq!(a, b);
    let d1 = ConditionDescriptor::new(&small, &small.goals).unwrap();
    let d3 = ConditionDescriptor::new(&big, &big.goals).unwrap();
    assert!(d1.distance(&d3) < 1e-12);
}
