//! Single-pair prediction: the full pipeline for one scene, scenario and
//! observed trajectory.

use serde::Serialize;

use crate::eval::{EvalError, Method, Scenario};
use crate::fusion::{fuse, top_k};
use crate::goal::{object_probabilities, GoalPredictorKind};
use crate::llm::{predict_action, predict_target_ranks, AblationMode, ChatBackend, ScoreTable};
use crate::probs::ObjectProbabilityMap;
use crate::scene::{Heatmap, Scene};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone)]
pub struct PredictOptions {
    pub method: Method,
    pub ablation: AblationMode,
    /// Cut the observation at this progress distance first.
    pub d_min_m: Option<f64>,
    pub k: usize,
    pub scores: ScoreTable,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            method: Method::Fused,
            ablation: AblationMode::All,
            d_min_m: None,
            k: 5,
            scores: ScoreTable::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PredictionFlags {
    pub trajectory_fallback: bool,
    pub fusion_fallback: bool,
    /// Trajectory shorter than `d_min_m`.
    pub saturated: bool,
    pub defaulted_labels: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub probs: ObjectProbabilityMap,
    /// Zero for the language-only method.
    pub heatmap: Heatmap,
    /// The observation the physical channel saw.
    pub observed: Trajectory,
    pub top1: String,
    pub action: String,
    pub flags: PredictionFlags,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedEntry {
    pub label: String,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionSummary {
    pub scenario: String,
    pub scene: String,
    pub method: Method,
    pub ablation: AblationMode,
    pub d_min_m: Option<f64>,
    pub progress_m: f64,
    pub probabilities: Vec<RankedEntry>,
    pub top_k: Vec<String>,
    pub target: String,
    pub action: String,
    pub flags: PredictionFlags,
}

pub fn predict_scene(
    scene: &Scene,
    scenario: &Scenario,
    trajectory: &Trajectory,
    predictor: &GoalPredictorKind,
    chat: &dyn ChatBackend,
    opts: &PredictOptions,
) -> Result<Prediction, EvalError> {
    scenario.validate()?;
    if opts.k == 0 {
        return Err(EvalError::Precondition("k must be at least 1".into()));
    }
    let (observed, saturated) = match opts.d_min_m {
        Some(d) if !(d.is_finite() && d >= 0.0) => {
            return Err(EvalError::Precondition(format!("d_min must be non-negative, got {d}")));
        }
        Some(d) => trajectory.truncate_at_progress(d),
        None => (trajectory.clone(), false),
    };
    let ctx = scenario.context(scene);
    let mut flags = PredictionFlags {
        saturated,
        ..PredictionFlags::default()
    };
    let physical = if opts.method == Method::Llm {
        None
    } else {
        let heat = predictor.predict(scene, &observed)?;
        let out = object_probabilities(&heat, scene)?;
        flags.trajectory_fallback = out.fallback;
        Some((heat, out.probs))
    };
    let semantic = if opts.method == Method::Trajectory {
        None
    } else {
        let p = predict_target_ranks(chat, &ctx, opts.ablation, &opts.scores)?;
        flags.defaulted_labels = p.ranks.defaulted.clone();
        Some(p.probs)
    };
    let probs = match (semantic, &physical) {
        (Some(s), Some((_, t))) => {
            let f = fuse(&s, t)?;
            flags.fusion_fallback = f.fallback;
            f.probs
        }
        (Some(s), None) => s,
        (None, Some((_, t))) => t.clone(),
        (None, None) => unreachable!("every method uses at least one channel"),
    };
    let top1 = top_k(&probs, 1).remove(0);
    let action_mode = if opts.method == Method::Trajectory {
        AblationMode::All
    } else {
        opts.ablation
    };
    let action = predict_action(chat, &ctx, action_mode, &top1)?;
    Ok(Prediction {
        probs,
        heatmap: physical.map(|(h, _)| h).unwrap_or_else(|| Heatmap::zeros(*scene.geometry())),
        observed,
        top1,
        action,
        flags,
    })
}

impl Prediction {
    pub fn summary(&self, scene: &Scene, scenario: &Scenario, opts: &PredictOptions) -> PredictionSummary {
        PredictionSummary {
            scenario: scenario.id.clone(),
            scene: scene.name.clone(),
            method: opts.method,
            ablation: opts.ablation,
            d_min_m: opts.d_min_m,
            progress_m: self.observed.progress_distance(),
            probabilities: self
                .probs
                .ranked()
                .into_iter()
                .map(|(label, probability)| RankedEntry {
                    label: label.to_string(),
                    probability,
                })
                .collect(),
            top_k: top_k(&self.probs, opts.k),
            target: self.top1.clone(),
            action: self.action.clone(),
            flags: self.flags.clone(),
        }
    }
}
