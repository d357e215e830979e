//! Prompt templates. The template text lives in `assets/prompts/*_v1.txt`;
//! bump the suffix whenever wording changes so golden files stay meaningful.

use super::{AblationMode, SceneContext};

pub const PROMPT_VERSION: u32 = 1;

pub const CANDIDATES_TEMPLATE: &str = include_str!("../../assets/prompts/candidates_v1.txt");
pub const RANKING_TEMPLATE: &str = include_str!("../../assets/prompts/ranking_v1.txt");
pub const ACTION_TEMPLATE: &str = include_str!("../../assets/prompts/action_v1.txt");
pub const JUDGE_TEMPLATE: &str = include_str!("../../assets/prompts/judge_v1.txt");

/// Rendered in place of a field the ablation mode withholds.
pub const UNAVAILABLE: &str = "(unavailable)";
/// Rendered for a visible but empty list.
pub const NONE: &str = "(none)";

/// Single-pass `{key}` substitution; substituted text is never rescanned.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').and_then(|close| {
            let key = &after[..close];
            vars.iter().find(|(k, _)| *k == key).map(|(_, v)| (close, *v))
        }) {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn bullet_list(items: &[String], hidden: bool) -> String {
    if hidden {
        return UNAVAILABLE.to_string();
    }
    if items.is_empty() {
        return NONE.to_string();
    }
    items.iter().map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n")
}

fn context_vars(ctx: &SceneContext, mode: AblationMode) -> [(&'static str, String); 6] {
    [
        ("day_time", ctx.day_time.clone()),
        ("persona", ctx.persona.clone()),
        ("location", ctx.location.clone()),
        ("action_history", bullet_list(&ctx.action_history, mode.hides_history())),
        ("conversation", bullet_list(&ctx.conversation, mode.hides_conversation())),
        ("object_list", bullet_list(&ctx.object_list, false)),
    ]
}

fn render(template: &str, ctx: &SceneContext, mode: AblationMode, extra: &[(&str, &str)]) -> String {
    let owned = context_vars(ctx, mode);
    let mut vars: Vec<(&str, &str)> = owned.iter().map(|(k, v)| (*k, v.as_str())).collect();
    vars.extend_from_slice(extra);
    fill(template, &vars)
}

/// First stage: free-form list of candidate targets and actions.
pub fn build_candidate_prompt(ctx: &SceneContext, mode: AblationMode) -> String {
    render(CANDIDATES_TEMPLATE, ctx, mode, &[])
}

/// Second stage: one `label: RANK` line per object, given the first-stage
/// response.
pub fn build_ranking_prompt(ctx: &SceneContext, mode: AblationMode, candidates: &str) -> String {
    let candidates = candidates.trim();
    let candidates = if candidates.is_empty() { NONE } else { candidates };
    render(RANKING_TEMPLATE, ctx, mode, &[("candidates", candidates)])
}

pub fn build_action_prompt(ctx: &SceneContext, mode: AblationMode, target: &str) -> String {
    render(ACTION_TEMPLATE, ctx, mode, &[("target", target)])
}

pub fn build_judge_prompt(predicted: &str, ground_truth: &str) -> String {
    fill(
        JUDGE_TEMPLATE,
        &[("predicted", predicted.trim()), ("ground_truth", ground_truth.trim())],
    )
}
