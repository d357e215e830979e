//! Language-model channel: two-stage target-object ranking, action
//! prediction and the binary action judge.

pub mod client;
pub mod mock;
pub mod pipeline;
pub mod prompts;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{ChatBackend, HttpChatClient, LlmEndpointConfig, RetryingPoster, API_KEY_ENV};
pub use mock::{prompt_hash, CannedBackend, HeuristicBackend, ScriptedBackend};
pub use pipeline::{judge_action, predict_action, predict_target_ranks, JudgeOutcome, TargetPrediction};
pub use prompts::{build_action_prompt, build_candidate_prompt, build_judge_prompt, build_ranking_prompt};

use crate::probs::ObjectProbabilityMap;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("request rejected with HTTP {status}: {body}")]
    Request { status: u16, body: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Which parts of the text context the language model may see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    All,
    WoConv,
    WoConvHist,
}

impl AblationMode {
    pub const ALL_MODES: [AblationMode; 3] = [AblationMode::All, AblationMode::WoConv, AblationMode::WoConvHist];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::All => "all",
            AblationMode::WoConv => "wo_conv",
            AblationMode::WoConvHist => "wo_conv_hist",
        }
    }

    pub fn hides_conversation(self) -> bool {
        !matches!(self, AblationMode::All)
    }

    pub fn hides_history(self) -> bool {
        matches!(self, AblationMode::WoConvHist)
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(AblationMode::All),
            "wo_conv" => Ok(AblationMode::WoConv),
            "wo_conv_hist" => Ok(AblationMode::WoConvHist),
            other => Err(format!("unknown ablation mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneContext {
    pub day_time: String,
    pub persona: String,
    pub location: String,
    pub action_history: Vec<String>,
    pub conversation: Vec<String>,
    pub object_list: Vec<String>,
}

impl SceneContext {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.object_list.is_empty() {
            return Err(LlmError::Precondition("object list is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &self.object_list {
            if !seen.insert(l) {
                return Err(LlmError::Precondition(format!("object `{l}` listed twice")));
            }
        }
        Ok(())
    }

    /// Copy with the fields hidden by `mode` emptied.
    pub fn ablated(&self, mode: AblationMode) -> SceneContext {
        let mut out = self.clone();
        if mode.hides_conversation() {
            out.conversation.clear();
        }
        if mode.hides_history() {
            out.action_history.clear();
        }
        out
    }
}

/// Four-level plausibility rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rank {
    A,
    B,
    C,
    D,
}

impl Rank {
    pub fn from_letter(c: char) -> Option<Rank> {
        match c.to_ascii_uppercase() {
            'A' => Some(Rank::A),
            'B' => Some(Rank::B),
            'C' => Some(Rank::C),
            'D' => Some(Rank::D),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Rank::A => 'A',
            Rank::B => 'B',
            Rank::C => 'C',
            Rank::D => 'D',
        }
    }
}

/// Score given to each rank before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for ScoreTable {
    fn default() -> Self {
        ScoreTable {
            a: 15.0,
            b: 10.0,
            c: 5.0,
            d: 1.0,
        }
    }
}

impl ScoreTable {
    pub fn score(&self, rank: Rank) -> f64 {
        match rank {
            Rank::A => self.a,
            Rank::B => self.b,
            Rank::C => self.c,
            Rank::D => self.d,
        }
    }
}

/// A rank for every scene object, plus the labels that had to be defaulted.
#[derive(Debug, Clone, PartialEq)]
pub struct RankAssignment {
    pub ranks: BTreeMap<String, Rank>,
    /// Labels missing from the response or given an invalid letter.
    pub defaulted: Vec<String>,
}

impl RankAssignment {
    pub fn get(&self, label: &str) -> Option<Rank> {
        self.ranks.get(label).copied()
    }
}

fn normalize_label(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Parses `label: LETTER` lines. Never fails: labels that are absent or carry
/// a letter outside A-D default to D; for repeated labels the last line wins.
pub fn parse_ranks(response: &str, objects: &[String]) -> RankAssignment {
    let by_key: BTreeMap<String, &String> = objects.iter().map(|o| (normalize_label(o), o)).collect();
    let mut seen: BTreeMap<&String, Option<Rank>> = BTreeMap::new();
    for line in response.lines() {
        let Some((lhs, rhs)) = line.rsplit_once(':') else {
            continue;
        };
        let lhs = lhs.trim().trim_start_matches(['-', '*', '•']).trim();
        let lhs = lhs.trim_matches(|c: char| c == '`' || c == '"' || c == '\'' || c == '*');
        let Some(&label) = by_key.get(&normalize_label(lhs)) else {
            continue;
        };
        let token = rhs
            .split_whitespace()
            .next()
            .unwrap_or("")
            .trim_matches(|c: char| !c.is_alphanumeric());
        let mut chars = token.chars();
        let rank = match (chars.next(), chars.next()) {
            (Some(c), None) => Rank::from_letter(c),
            _ => None,
        };
        seen.insert(label, rank);
    }
    let mut ranks = BTreeMap::new();
    let mut defaulted = Vec::new();
    for o in objects {
        let rank = match seen.get(o) {
            Some(Some(r)) => *r,
            _ => {
                defaulted.push(o.clone());
                Rank::D
            }
        };
        ranks.insert(o.clone(), rank);
    }
    RankAssignment { ranks, defaulted }
}

/// Scores every rank with `table` and normalizes.
pub fn ranks_to_probabilities(ranks: &RankAssignment, table: &ScoreTable) -> ObjectProbabilityMap {
    ObjectProbabilityMap::from_weights(ranks.ranks.iter().map(|(l, r)| (l.clone(), table.score(*r))))
        .expect("rank scores are positive")
        .probs
}
