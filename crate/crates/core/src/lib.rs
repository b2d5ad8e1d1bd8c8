//! Hand-object motion synthesis for articulated objects, planned as
//! per-finger contact targets anchored in normalized part coordinates.
//!
//! The crate covers the whole pipeline: mesh geometry and object trajectories
//! ([`geometry`]), a parametric hand ([`hand`]), the contact representation
//! ([`cams`]), planning ([`planner`]), optimization-based synthesis
//! ([`synth`]) and physical plausibility metrics ([`metrics`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod cams;
pub mod error;
pub mod geometry;
pub mod hand;
pub mod metrics;
pub mod motion;
pub mod numopt;
pub mod planner;
pub mod scene;
pub mod scripted;
pub mod synth;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/scenes.md")]
    pub struct Scenes;
    #[doc = include_str!("../../../book/src/hand.md")]
    pub struct Hand;
    #[doc = include_str!("../../../book/src/representation.md")]
    pub struct Representation;
    #[doc = include_str!("../../../book/src/planning.md")]
    pub struct Planning;
    #[doc = include_str!("../../../book/src/synthesis.md")]
    pub struct Synthesis;
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub struct Metrics;
}
