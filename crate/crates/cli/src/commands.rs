use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cams_core::cams::{extract_cams, CamsSequence};
use cams_core::geometry::{make_scene, GoalKeyframe, SceneParams};
use cams_core::hand::{HandModel, HandPose, NUM_FINGERS};
use cams_core::metrics::{evaluate, MetricsReport};
use cams_core::motion::Motion;
use cams_core::planner::{library_json, load_library, retrieval_plan, ConditionDescriptor};
use cams_core::scene::{goals_from_json, scene_to_json, Scene};
use cams_core::scripted::scripted_motion;
use cams_core::synth::{synthesize, Synthesis};
use serde_json::{json, Value};

use crate::args::*;
use crate::config::RunConfig;
use crate::output::{header, write_json, write_text, CliError, CliResult, Input, Stage};

const DEFAULT_FRAMES_PER_STAGE: usize = 40;

struct Ctx {
    config: RunConfig,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let mut ctx = Ctx { config };
    match cli.command {
        Command::Extract(a) => extract(&ctx, a),
        Command::Plan(a) => plan(&ctx, a),
        Command::Library(a) => library(a),
        Command::Synthesize(a) => {
            ctx.config.apply(&a.weights, &a.ablations);
            synthesize_cmd(&ctx, a)
        }
        Command::Evaluate(a) => evaluate_cmd(&ctx, a),
        Command::Roundtrip(a) => {
            ctx.config.apply(&a.weights, &a.ablations);
            roundtrip(&ctx, a)
        }
        Command::Scene { command: SceneCommand::Gen(a) } => scene_gen(&ctx, a),
    }
}

fn parse_scene(input: &Input) -> CliResult<Scene> {
    Scene::from_json_str(&input.text).map_err(|e| CliError::input("scene", format!("{}: {e}", input.path.display())))
}

fn parse_motion(input: &Input) -> CliResult<Motion> {
    Motion::from_json_str(&input.text).map_err(|e| CliError::input("motion", format!("{}: {e}", input.path.display())))
}

fn parse_cams(input: &Input) -> CliResult<CamsSequence> {
    CamsSequence::from_json_str(&input.text).map_err(|e| CliError::input("cams", format!("{}: {e}", input.path.display())))
}

fn parse_goals(input: &Input) -> CliResult<Vec<GoalKeyframe>> {
    let value: Value = serde_json::from_str(&input.text).map_err(|e| CliError::input("goals", e.to_string()))?;
    // either a bare array or a scene-style object
    let array = value.get("goal_keyframes").cloned().unwrap_or(value);
    goals_from_json(&array).map_err(|e| CliError::input("goals", format!("{}: {e}", input.path.display())))
}

fn part_names(scene: &Scene) -> Vec<String> {
    scene.parts.iter().map(|p| p.name.clone()).collect()
}

fn even_boundaries(frames: usize, stages: usize) -> CliResult<Vec<usize>> {
    if stages == 0 {
        return Err(CliError::input("arguments", "stage count must be positive"));
    }
    if frames < 2 || !(frames - 1).is_multiple_of(stages) {
        return Err(CliError::input(
            "arguments",
            format!("{frames} frames cannot be split into {stages} equal stages; pass --boundaries"),
        ));
    }
    let f = (frames - 1) / stages;
    Ok((0..=stages).map(|j| j * f).collect())
}

fn extract(ctx: &Ctx, a: ExtractArgs) -> CliResult<()> {
    let scene_in = Input::read("scene", &a.scene)?;
    let motion_in = Input::read("motion", &a.motion)?;
    let scene = parse_scene(&scene_in)?;
    let motion = parse_motion(&motion_in)?;
    let boundaries = match (a.boundaries, a.stages) {
        (Some(b), _) => b,
        (None, Some(m)) => even_boundaries(motion.frame_count(), m)?,
        (None, None) => return Err(CliError::input("arguments", "pass --stages or --boundaries")),
    };
    let cams = extract_cams(&motion, &scene, &boundaries, &ctx.config.hand, &a.ablations.representation()).at("extract")?;
    let h = header("extract", ctx.config.seed, &[&scene_in, &motion_in], &a.ablations.labels());
    write_json(&a.out, &cams.to_json(Some(h)))
}

fn read_pose(path: &Path) -> CliResult<(Input, HandPose)> {
    let input = Input::read("initial_pose", path)?;
    let values: Vec<f64> = serde_json::from_str(&input.text).map_err(|e| CliError::input("initial_pose", e.to_string()))?;
    let pose = HandPose::from_slice(&values).at("initial_pose")?;
    Ok((input, pose))
}

fn plan(ctx: &Ctx, a: PlanArgs) -> CliResult<()> {
    let scene_in = Input::read("scene", &a.scene)?;
    let library_in = Input::read("library", &a.library)?;
    let scene = parse_scene(&scene_in)?;
    let mut inputs = vec![&scene_in, &library_in];
    let goals_in = a.goals.as_deref().map(|p| Input::read("goals", p)).transpose()?;
    let goals = match &goals_in {
        Some(g) => {
            inputs.push(g);
            parse_goals(g)?
        }
        None => scene.goals.clone(),
    };
    let pose = a.initial_pose.as_deref().map(read_pose).transpose()?;
    if let Some((i, _)) = &pose {
        inputs.push(i);
    }
    let library = load_library(&a.library).at("library")?;
    let jitter = a.jitter.unwrap_or(ctx.config.jitter);
    let (index, cams) =
        retrieval_plan(&scene, &goals, pose.as_ref().map(|p| &p.1), &library, jitter, ctx.config.seed).at("plan")?;
    let mut h = header("plan", ctx.config.seed, &inputs, &cams.representation.ablation_labels());
    h["retrieved_entry"] = json!(index);
    h["jitter"] = json!(jitter);
    write_json(&a.out, &cams.to_json(Some(h)))
}

fn library(a: LibraryArgs) -> CliResult<()> {
    let dir = a.out.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut records = Vec::new();
    for entry in &a.entries {
        let (scene_path, cams_path) =
            entry.split_once('=').ok_or_else(|| CliError::input("arguments", format!("entry '{entry}' is not SCENE=CAMS")))?;
        let scene = parse_scene(&Input::read("scene", Path::new(scene_path))?)?;
        let cams_path = PathBuf::from(cams_path);
        parse_cams(&Input::read("cams", &cams_path)?)?;
        let descriptor = ConditionDescriptor::new(&scene, &scene.goals).at("library")?;
        records.push((descriptor, relative_to(&cams_path, &dir)));
    }
    write_json(&a.out, &library_json(&records))
}

/// `path` relative to `dir` when it lies inside it, absolute otherwise.
fn relative_to(path: &Path, dir: &Path) -> PathBuf {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let (p, d) = (abs(path), abs(dir));
    p.strip_prefix(&d).map(Path::to_path_buf).unwrap_or(p)
}

fn frames_per_stage(explicit: Option<usize>, ctx: &Ctx, cams: &CamsSequence) -> CliResult<usize> {
    if let Some(f) = explicit.or(ctx.config.frames_per_stage) {
        return Ok(f);
    }
    let b = &cams.stage_boundaries;
    let f = b.get(1).copied().unwrap_or(0);
    if f > 0 && b.iter().enumerate().all(|(j, &x)| x == j * f) {
        Ok(f)
    } else {
        Err(CliError::input("arguments", "stages are uneven; pass --frames-per-stage"))
    }
}

fn check_representation(cams: &CamsSequence, ablations: &Ablations) -> CliResult<()> {
    let want = ablations.representation();
    if cams.representation != want {
        return Err(CliError::input(
            "cams",
            format!(
                "representation file uses {:?} but the flags ask for {:?}; extract again with the same flags",
                cams.representation, want
            ),
        ));
    }
    Ok(())
}

fn run_synthesis(ctx: &Ctx, scene: &Scene, goals: &[GoalKeyframe], cams: &CamsSequence, f: usize, fps: f64) -> CliResult<Synthesis> {
    let c = &ctx.config;
    synthesize(scene, goals, cams, &cams.initial_pose, f, &c.hand, &c.fit, &c.contact, fps).at("synthesize")
}

fn synthesis_report(s: &Synthesis, h: Value) -> Value {
    json!({ "header": h, "fit": s.fit_report, "contact": s.contact_report })
}

fn synthesize_cmd(ctx: &Ctx, a: SynthesizeArgs) -> CliResult<()> {
    let scene_in = Input::read("scene", &a.scene)?;
    let cams_in = Input::read("cams", &a.cams)?;
    let scene = parse_scene(&scene_in)?;
    let cams = parse_cams(&cams_in)?;
    check_representation(&cams, &a.ablations)?;
    let mut inputs = vec![&scene_in, &cams_in];
    let goals_in = a.goals.as_deref().map(|p| Input::read("goals", p)).transpose()?;
    let goals = match &goals_in {
        Some(g) => {
            inputs.push(g);
            parse_goals(g)?
        }
        None => scene.goals.clone(),
    };
    let f = frames_per_stage(a.frames_per_stage, ctx, &cams)?;
    let out = run_synthesis(ctx, &scene, &goals, &cams, f, a.fps.unwrap_or(ctx.config.fps))?;
    let h = header("synthesize", ctx.config.seed, &inputs, &a.ablations.labels());
    write_json(&a.out, &out.motion.to_json(&part_names(&scene), Some(h.clone())))?;
    let report = a.report.unwrap_or_else(|| sidecar(&a.out, "report"));
    write_json(&report, &synthesis_report(&out, h))
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

fn metrics_json(report: &MetricsReport, h: Value) -> Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    v["header"] = h;
    v
}

fn per_frame_csv(report: &MetricsReport) -> String {
    let mut out = String::from("frame,contacts,consistent,max_residual,articulated,min_articulation_torque,penetrating_points,penetration\n");
    for f in &report.frames {
        let max_res = f.residuals.iter().copied().fold(0.0, f64::max);
        let art = f.articulated.map(|b| (b as u8).to_string()).unwrap_or_default();
        let tau = f
            .articulation_torque
            .as_ref()
            .map(|ts| {
                let min = ts.iter().map(|t| t.unwrap_or(f64::NEG_INFINITY)).fold(f64::INFINITY, f64::min);
                if min.is_finite() { min.to_string() } else { String::new() }
            })
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            f.frame, f.contacts, f.consistent as u8, max_res, art, tau, f.penetrating_points, f.penetration
        );
    }
    out
}

fn evaluate_cmd(ctx: &Ctx, a: EvaluateArgs) -> CliResult<()> {
    let scene_in = Input::read("scene", &a.scene)?;
    let motion_in = Input::read("motion", &a.motion)?;
    let scene = parse_scene(&scene_in)?;
    let motion = parse_motion(&motion_in)?;
    let model = HandModel::new(ctx.config.hand.clone()).at("config")?;
    let report = evaluate(&motion, &scene, &model, &ctx.config.metrics, a.articulation).at("evaluate")?;
    let h = header("evaluate", ctx.config.seed, &[&scene_in, &motion_in], &[]);
    write_json(&a.out, &metrics_json(&report, h))?;
    if let Some(p) = &a.per_frame {
        write_text(p, &per_frame_csv(&report))?;
    }
    Ok(())
}

/// Fingertip distance statistics between two hand tracks over the frames
/// where the representation marks a finger near some part.
fn fingertip_deviation(model: &HandModel, cams: &CamsSequence, a: &[HandPose], b: &[HandPose]) -> Value {
    let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0usize);
    for (t, (pa, pb)) in a.iter().zip(b).enumerate() {
        let (ja, jb) = (model.joints(&model.state(pa)), model.joints(&model.state(pb)));
        for f in 0..NUM_FINGERS {
            let near = (0..cams.part_count()).any(|k| cams.frames[t].tuples[cams.tuple_index(f, k)].f_n);
            if near {
                let d = (ja.fingers[f].tip - jb.fingers[f].tip).norm();
                sum += d;
                max = max.max(d);
                n += 1;
            }
        }
    }
    let mean = if n > 0 { sum / n as f64 } else { 0.0 };
    json!({ "mean": mean, "max": max, "samples": n })
}

fn roundtrip(ctx: &Ctx, a: RoundtripArgs) -> CliResult<()> {
    let scene_in = Input::read("scene", &a.scene)?;
    let motion_in = Input::read("motion", &a.motion)?;
    let scene = parse_scene(&scene_in)?;
    let motion = parse_motion(&motion_in)?;
    let labels = a.ablations.labels();
    let inputs = [&scene_in, &motion_in];
    let h = |cmd: &str| header(cmd, ctx.config.seed, &inputs, &labels);

    let boundaries = even_boundaries(motion.frame_count(), a.stages)?;
    let f = boundaries[1];
    let c = &ctx.config;
    let cams = extract_cams(&motion, &scene, &boundaries, &c.hand, &a.ablations.representation()).at("extract")?;
    write_json(&a.out_dir.join("cams.json"), &cams.to_json(Some(h("roundtrip/extract"))))?;

    let out = run_synthesis(ctx, &scene, &scene.goals, &cams, f, motion.fps)?;
    let names = part_names(&scene);
    write_json(&a.out_dir.join("motion.json"), &out.motion.to_json(&names, Some(h("roundtrip/synthesize"))))?;
    write_json(&a.out_dir.join("synthesis_report.json"), &synthesis_report(&out, h("roundtrip/synthesize")))?;

    let model = HandModel::new(c.hand.clone()).at("config")?;
    let articulation = scene.articulation_axis().is_some();
    let before = evaluate(&motion, &scene, &model, &c.metrics, articulation).at("evaluate")?;
    let after = evaluate(&out.motion, &scene, &model, &c.metrics, articulation).at("evaluate")?;
    let fitted = Motion::new(out.motion.fps, out.fitted.clone(), out.motion.objects.clone()).at("evaluate")?;
    let fitted_pen = cams_core::metrics::penetration_rate(&fitted, &scene, &model, c.metrics.penetration_depth).at("evaluate")?;
    write_json(&a.out_dir.join("metrics_input.json"), &metrics_json(&before, h("roundtrip/evaluate")))?;
    write_json(&a.out_dir.join("metrics_synthesized.json"), &metrics_json(&after, h("roundtrip/evaluate")))?;

    if out.motion.frame_count() != motion.frame_count() {
        return Err(CliError::input("roundtrip", "synthesized and input motions differ in length"));
    }
    let summary = json!({
        "header": h("roundtrip"),
        "frames": motion.frame_count(),
        "stages": a.stages,
        "fingertip_deviation": fingertip_deviation(&model, &cams, &out.motion.hand, &motion.hand),
        "fit_loss": {
            "initial": out.fit_report.initial_loss(),
            "final": out.fit_report.final_loss(),
            "ratio": out.fit_report.final_loss() / out.fit_report.initial_loss(),
        },
        "contact_steps": out.contact_report.steps.iter().map(|s| json!({
            "smooth": s.smooth,
            "initial": s.objective.initial_loss(),
            "final": s.objective.final_loss(),
        })).collect::<Vec<_>>(),
        "penetration_rate": { "fitted": fitted_pen, "synthesized": after.penetration_rate, "input": before.penetration_rate },
        "cm_consistency": { "input": before.cm_consistency, "synthesized": after.cm_consistency },
        "articulation_consistency": { "input": before.articulation_consistency, "synthesized": after.articulation_consistency },
    });
    write_json(&a.out_dir.join("summary.json"), &summary)
}

fn scene_gen(ctx: &Ctx, a: SceneGenArgs) -> CliResult<()> {
    let params = SceneParams { scale: a.scale, open_angle: a.open_angle, ..SceneParams::default() };
    let scene = make_scene(a.kind, &params).at("scene")?;
    let mut h = header("scene gen", ctx.config.seed, &[], &[]);
    h["kind"] = serde_json::to_value(a.kind).expect("kind serializes");
    h["params"] = serde_json::to_value(params).expect("params serialize");
    write_json(&a.out, &scene_to_json(&scene, Some(h.clone())))?;
    if let Some(path) = &a.motion_out {
        let f = a.frames_per_stage.or(ctx.config.frames_per_stage).unwrap_or(DEFAULT_FRAMES_PER_STAGE);
        let fps = a.fps.unwrap_or(ctx.config.fps);
        let s = scripted_motion(a.kind, &scene, &ctx.config.hand, f, fps).at("scene")?;
        h["stage_boundaries"] = json!(s.stage_boundaries);
        write_json(path, &s.motion.to_json(&part_names(&scene), Some(h)))?;
    }
    Ok(())
}
