//! Composed language-model operations.

use log::debug;

use super::prompts::{build_action_prompt, build_candidate_prompt, build_judge_prompt, build_ranking_prompt};
use super::{parse_ranks, ranks_to_probabilities, AblationMode, ChatBackend, LlmError, RankAssignment, SceneContext, ScoreTable};
use crate::probs::ObjectProbabilityMap;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPrediction {
    pub probs: ObjectProbabilityMap,
    pub ranks: RankAssignment,
    /// Raw first-stage response.
    pub candidates: String,
}

/// Candidate listing, then ranking, then rank scoring.
pub fn predict_target_ranks(
    backend: &dyn ChatBackend,
    ctx: &SceneContext,
    mode: AblationMode,
    scores: &ScoreTable,
) -> Result<TargetPrediction, LlmError> {
    ctx.validate()?;
    let ctx = ctx.ablated(mode);
    let candidates = backend.complete(&build_candidate_prompt(&ctx, mode))?;
    let ranking = backend.complete(&build_ranking_prompt(&ctx, mode, &candidates))?;
    let ranks = parse_ranks(&ranking, &ctx.object_list);
    if !ranks.defaulted.is_empty() {
        debug!("{} label(s) defaulted to rank D", ranks.defaulted.len());
    }
    Ok(TargetPrediction {
        probs: ranks_to_probabilities(&ranks, scores),
        ranks,
        candidates,
    })
}

/// One-sentence action at `target`, trimmed.
pub fn predict_action(
    backend: &dyn ChatBackend,
    ctx: &SceneContext,
    mode: AblationMode,
    target: &str,
) -> Result<String, LlmError> {
    ctx.validate()?;
    if !ctx.object_list.iter().any(|o| o == target) {
        return Err(LlmError::Precondition(format!("target `{target}` is not in the object list")));
    }
    let ctx = ctx.ablated(mode);
    Ok(backend.complete(&build_action_prompt(&ctx, mode, target))?.trim().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JudgeOutcome {
    pub score: u8,
    /// The response held no standalone 0 or 1; `score` defaulted to 0.
    pub unparsable: bool,
}

/// First standalone `0` or `1` token in the judge response.
pub fn parse_judgement(response: &str) -> JudgeOutcome {
    let digit = response
        .split(|c: char| !c.is_ascii_alphanumeric())
        .find_map(|tok| match tok {
            "0" => Some(0),
            "1" => Some(1),
            _ => None,
        });
    JudgeOutcome {
        score: digit.unwrap_or(0),
        unparsable: digit.is_none(),
    }
}

pub fn judge_action(backend: &dyn ChatBackend, predicted: &str, ground_truth: &str) -> Result<JudgeOutcome, LlmError> {
    if predicted.trim().is_empty() || ground_truth.trim().is_empty() {
        return Err(LlmError::Precondition("judge needs non-empty actions".into()));
    }
    Ok(parse_judgement(&backend.complete(&build_judge_prompt(predicted, ground_truth))?))
}
