use std::path::PathBuf;

use cams_core::cams::{EmbeddingMode, Representation};
use cams_core::geometry::SceneKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cams", version, about = "Contact-target planning, hand motion synthesis and physical evaluation")]
pub struct Cli {
    /// Seed for every random draw; recorded in output headers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration (weights, thresholds, hand, timing).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the contact representation of a hand-object motion.
    Extract(ExtractArgs),
    /// Retrieve a representation for a scene from a library.
    Plan(PlanArgs),
    /// Write a planner library from scene/representation pairs.
    Library(LibraryArgs),
    /// Synthesize a hand motion from a representation.
    Synthesize(SynthesizeArgs),
    /// Compute the physical plausibility metrics of a motion.
    Evaluate(EvaluateArgs),
    /// Extract, re-synthesize and evaluate, comparing against the input.
    Roundtrip(RoundtripArgs),
    /// Fixture scenes.
    Scene {
        #[command(subcommand)]
        command: SceneCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum SceneCommand {
    /// Generate a procedural scene and optionally its scripted motion.
    Gen(SceneGenArgs),
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct Ablations {
    /// Store contact targets in part-local instead of normalized coordinates.
    #[arg(long)]
    pub no_npcs: bool,
    /// Anchor finger embeddings at the part origin instead of the contact point.
    #[arg(long)]
    pub no_contact_frames: bool,
    /// Embed joint positions instead of bone directions.
    #[arg(long)]
    pub absolute_embedding: bool,
    /// Compare raw bone vectors with target directions when fitting.
    #[arg(long)]
    pub literal_joint_loss: bool,
}

impl Ablations {
    pub fn representation(&self) -> Representation {
        Representation {
            npcs: !self.no_npcs,
            contact_frames: !self.no_contact_frames,
            embedding: if self.absolute_embedding { EmbeddingMode::Absolute } else { EmbeddingMode::Directional },
        }
    }

    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = self.representation().ablation_labels();
        if self.literal_joint_loss {
            out.push("literal-joint-loss");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct WeightOverrides {
    #[arg(long)]
    pub lambda_tip: Option<f64>,
    #[arg(long)]
    pub lambda_joint: Option<f64>,
    #[arg(long)]
    pub lambda_contact: Option<f64>,
    #[arg(long)]
    pub lambda_trans: Option<f64>,
    #[arg(long)]
    pub lambda_v: Option<f64>,
    #[arg(long)]
    pub lambda_a: Option<f64>,
    /// Iterations of the embedding fit.
    #[arg(long)]
    pub fit_epochs: Option<usize>,
    /// Iterations per contact refinement step.
    #[arg(long)]
    pub epochs_per_step: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub motion: PathBuf,
    /// Number of stages, split evenly over the motion's frames.
    #[arg(long, conflicts_with = "boundaries")]
    pub stages: Option<usize>,
    /// Explicit stage boundary frames, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub boundaries: Option<Vec<usize>>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub ablations: Ablations,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub library: PathBuf,
    /// Goal keyframes; defaults to the scene's own.
    #[arg(long)]
    pub goals: Option<PathBuf>,
    /// Starting hand pose as a JSON array of 51 numbers.
    #[arg(long)]
    pub initial_pose: Option<PathBuf>,
    /// Standard deviation of the noise added to retrieved targets, meters.
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LibraryArgs {
    /// `SCENE=CAMS` pairs; the condition comes from the scene and its goals.
    #[arg(long = "entry", required = true)]
    pub entries: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub cams: PathBuf,
    #[arg(long)]
    pub goals: Option<PathBuf>,
    #[arg(long)]
    pub frames_per_stage: Option<usize>,
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Optimization report; defaults to `<out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub ablations: Ablations,
    #[command(flatten)]
    pub weights: WeightOverrides,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub motion: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also compute articulation consistency (needs a hinged part).
    #[arg(long)]
    pub articulation: bool,
    /// Write per-frame diagnostics as CSV.
    #[arg(long)]
    pub per_frame: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub motion: PathBuf,
    #[arg(long)]
    pub stages: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub ablations: Ablations,
    #[command(flatten)]
    pub weights: WeightOverrides,
}

#[derive(Debug, Args)]
pub struct SceneGenArgs {
    #[arg(long)]
    pub kind: SceneKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the kind's scripted hand motion.
    #[arg(long)]
    pub motion_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Final hinge angle in radians.
    #[arg(long)]
    pub open_angle: Option<f64>,
    #[arg(long)]
    pub frames_per_stage: Option<usize>,
    #[arg(long)]
    pub fps: Option<f64>,
}
