//! Target-object and action prediction for people moving through indoor
//! scenes.
//!
//! Two channels score every object in a scene: a language model ranks objects
//! from text context (time of day, persona, action history, conversation), and
//! a goal predictor turns the observed trajectory into a target-area heatmap
//! whose overlap with object masks gives physical probabilities. The two are
//! multiplied, and the language model then predicts the action at the winning
//! object. [`eval`] runs the full protocol over a dataset of scene /
//! scenario / trajectory triples.

pub mod dataset;
pub mod eval;
pub mod fusion;
pub mod geodesic;
pub mod goal;
pub mod llm;
pub mod predict;
pub mod probs;
pub mod raster;
pub mod render;
pub mod scene;
pub mod trajectory;

pub use probs::{ObjectProbabilityMap, ProbabilityOutcome};
pub use scene::{GridGeometry, Heatmap, ObjectRegion, Pixel, Scene, SceneMap};
pub use trajectory::{Sample, Trajectory};
