//! Evaluation harness: pairs x methods x ablations x progress thresholds,
//! averaged over trials.

pub mod embed;
pub mod report;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{cosine_similarity, Embedder, HashingEmbedder, RemoteEmbedder};
pub use report::{CellKey, CellStats, Report, ReportHeader};

use crate::fusion::{fuse, top_k};
use crate::goal::{object_probabilities, GoalPredictorKind, PredictError};
use crate::llm::{
    judge_action, predict_action, predict_target_ranks, AblationMode, ChatBackend, LlmError, SceneContext,
    ScoreTable,
};
use crate::probs::{ObjectProbabilityMap, ProbabilityError, ProbabilityOutcome};
use crate::scene::{load_scene, Scene, SceneError};
use crate::trajectory::{Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl EvalError {
    /// Failures that invalidate a single observation instead of the run.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            EvalError::Llm(LlmError::Transport { .. } | LlmError::Protocol(_) | LlmError::Request { .. })
        )
    }
}

/// One authored action scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub day_time: String,
    pub persona: String,
    /// World coordinates in meters.
    pub start_location: [f64; 2],
    /// Free-text description of where the person is. Defaults to the
    /// coordinates of `start_location`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    pub gt_target_object: String,
    pub gt_action: String,
    #[serde(default)]
    pub action_history: Vec<String>,
    #[serde(default)]
    pub conversation: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.id.trim().is_empty() {
            return Err(EvalError::Precondition("scenario id is empty".into()));
        }
        if self.gt_action.trim().is_empty() {
            return Err(EvalError::Precondition(format!("scenario `{}` has an empty gt_action", self.id)));
        }
        if self.gt_target_object.trim().is_empty() {
            return Err(EvalError::Precondition(format!(
                "scenario `{}` has an empty gt_target_object",
                self.id
            )));
        }
        if !self.start_location.iter().all(|v| v.is_finite()) {
            return Err(EvalError::Precondition(format!("scenario `{}` start is not finite", self.id)));
        }
        Ok(())
    }

    pub fn location_text(&self) -> String {
        match &self.location {
            Some(l) => l.clone(),
            None => format!(
                "({:.1} m, {:.1} m) on the floor plan",
                self.start_location[0], self.start_location[1]
            ),
        }
    }

    /// Language-model context for this scenario in `scene`.
    pub fn context(&self, scene: &Scene) -> SceneContext {
        SceneContext {
            day_time: self.day_time.clone(),
            persona: self.persona.clone(),
            location: self.location_text(),
            action_history: self.action_history.clone(),
            conversation: self.conversation.clone(),
            object_list: scene.labels(),
        }
    }

    pub fn load(path: &Path) -> Result<Scenario, EvalError> {
        let s: Scenario = read_json(path)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        write_json(path, self)
    }
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| EvalError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| EvalError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct EvalPair {
    pub scenario: Scenario,
    pub scene: Arc<Scene>,
    pub trajectory: Trajectory,
}

impl EvalPair {
    pub fn new(scenario: Scenario, scene: Arc<Scene>, trajectory: Trajectory) -> Result<Self, EvalError> {
        scenario.validate()?;
        if !scene.has_label(&scenario.gt_target_object) {
            return Err(EvalError::Precondition(format!(
                "scenario `{}` targets `{}`, which scene `{}` lacks",
                scenario.id, scenario.gt_target_object, scene.name
            )));
        }
        Ok(EvalPair {
            scenario,
            scene,
            trajectory,
        })
    }

    pub fn id(&self) -> String {
        format!("{}@{}", self.scenario.id, self.scene.name)
    }
}

/// One manifest row; paths are relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scenario: String,
    pub scene: String,
    pub trajectory: String,
}

pub fn load_manifest(path: &Path) -> Result<Vec<EvalPair>, EvalError> {
    let entries: Vec<ManifestEntry> = read_json(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut scenes: HashMap<String, Arc<Scene>> = HashMap::new();
    let mut pairs = Vec::with_capacity(entries.len());
    for e in entries {
        let scene = match scenes.get(&e.scene) {
            Some(s) => s.clone(),
            None => {
                let s = Arc::new(load_scene(&base.join(&e.scene))?);
                scenes.insert(e.scene.clone(), s.clone());
                s
            }
        };
        let scenario = Scenario::load(&base.join(&e.scenario))?;
        let trajectory = Trajectory::load_csv(&base.join(&e.trajectory))?;
        pairs.push(EvalPair::new(scenario, scene, trajectory)?);
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Llm,
    Trajectory,
    Fused,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Llm, Method::Trajectory, Method::Fused];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Llm => "llm",
            Method::Trajectory => "trajectory",
            Method::Fused => "fused",
        }
    }

    fn uses_llm_ranks(self) -> bool {
        !matches!(self, Method::Trajectory)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(Method::Llm),
            "trajectory" => Ok(Method::Trajectory),
            "fused" => Ok(Method::Fused),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub methods: Vec<Method>,
    pub ablations: Vec<AblationMode>,
    pub d_thresholds_m: Vec<f64>,
    pub trials: usize,
    pub k: usize,
    pub predictor: GoalPredictorKind,
    pub scores: ScoreTable,
    /// Recorded in the report header.
    pub seed: u64,
    /// Upper bound on pairs evaluated concurrently.
    pub jobs: usize,
    /// Free-form description of the chat backend for the report header.
    pub llm_backend: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            methods: Method::ALL.to_vec(),
            ablations: AblationMode::ALL_MODES.to_vec(),
            d_thresholds_m: vec![1.0, 2.0, 3.0],
            trials: 3,
            k: 5,
            predictor: GoalPredictorKind::Geometric {
                beta: crate::goal::DEFAULT_BETA,
            },
            scores: ScoreTable::default(),
            seed: 0,
            jobs: 1,
            llm_backend: "unspecified".into(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Precondition(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        if self.methods.is_empty() || self.ablations.is_empty() || self.d_thresholds_m.is_empty() {
            return bad("methods, ablations and thresholds must be non-empty");
        }
        if !self.d_thresholds_m.iter().all(|d| d.is_finite() && *d > 0.0) {
            return bad("thresholds must be positive");
        }
        if !self.d_thresholds_m.windows(2).all(|w| w[0] < w[1]) {
            return bad("thresholds must be strictly ascending");
        }
        Ok(())
    }
}

/// 1 iff `gt` is among the `k` most probable labels.
pub fn top5_hit(p: &ObjectProbabilityMap, gt: &str, k: usize) -> Result<bool, EvalError> {
    if !p.contains(gt) {
        return Err(EvalError::Precondition(format!("ground truth `{gt}` is not a predicted label")));
    }
    Ok(top_k(p, k).iter().any(|l| l == gt))
}

/// What one (pair, trial) contributed to one cell.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Observation {
    Valid {
        hit: bool,
        cosine: f64,
        judge: u8,
        judge_unparsable: bool,
        trajectory_fallback: bool,
        fusion_fallback: bool,
        defaulted_labels: usize,
        saturated: bool,
    },
    Invalid,
}

struct PairRun<'a> {
    pair: &'a EvalPair,
    cfg: &'a EvalConfig,
    chat: &'a dyn ChatBackend,
    embedder: &'a dyn Embedder,
    gt_embedding: Vec<f64>,
}

type Cached<T> = Result<T, String>;

impl PairRun<'_> {
    fn trajectory_outcomes(&self) -> Result<Vec<(ProbabilityOutcome, bool)>, EvalError> {
        self.cfg
            .d_thresholds_m
            .iter()
            .map(|&d| {
                let (prefix, saturated) = self.pair.trajectory.truncate_at_progress(d);
                let heat = self.cfg.predictor.predict(&self.pair.scene, &prefix)?;
                Ok((object_probabilities(&heat, &self.pair.scene)?, saturated))
            })
            .collect()
    }

    /// Observations in `report::cell_order` for every trial.
    fn run(&self) -> Result<Vec<Vec<Observation>>, EvalError> {
        let traj = self.trajectory_outcomes()?;
        let ctx = self.pair.scenario.context(&self.pair.scene);
        let gt = &self.pair.scenario.gt_target_object;
        let needs_llm = self.cfg.methods.iter().any(|m| m.uses_llm_ranks());
        let mut trials = Vec::with_capacity(self.cfg.trials);
        for trial in 0..self.cfg.trials {
            let mut ranks = BTreeMap::new();
            if needs_llm {
                for &mode in &self.cfg.ablations {
                    let r = predict_target_ranks(self.chat, &ctx, mode, &self.cfg.scores);
                    ranks.insert(mode, self.soft(r, "target ranking", trial)?);
                }
            }
            let mut actions: HashMap<(AblationMode, String), Cached<String>> = HashMap::new();
            let mut scored: HashMap<String, Cached<(f64, u8, bool)>> = HashMap::new();
            let mut obs = Vec::new();
            for &method in &self.cfg.methods {
                for &mode in &self.cfg.ablations {
                    for (traj_out, saturated) in &traj {
                        let (probs, fusion_fallback, defaulted) = match (method, ranks.get(&mode)) {
                            (Method::Trajectory, _) => (traj_out.probs.clone(), false, 0),
                            (_, Some(Err(_))) | (_, None) => {
                                obs.push(Observation::Invalid);
                                continue;
                            }
                            (Method::Llm, Some(Ok(p))) => (p.probs.clone(), false, p.ranks.defaulted.len()),
                            (Method::Fused, Some(Ok(p))) => {
                                let f = fuse(&p.probs, &traj_out.probs)?;
                                (f.probs, f.fallback, p.ranks.defaulted.len())
                            }
                        };
                        let hit = top5_hit(&probs, gt, self.cfg.k)?;
                        let top1 = top_k(&probs, 1).remove(0);
                        // The physical channel never sees the text context, so
                        // its action step always gets the full context.
                        let action_mode = if method == Method::Trajectory { AblationMode::All } else { mode };
                        let key = (action_mode, top1);
                        if !actions.contains_key(&key) {
                            let a = predict_action(self.chat, &ctx, action_mode, &key.1);
                            actions.insert(key.clone(), self.soft(a, "action prediction", trial)?);
                        }
                        let score = match &actions[&key] {
                            Ok(a) => {
                                if !scored.contains_key(a) {
                                    scored.insert(a.clone(), self.score_action(a)?);
                                }
                                scored[a].clone()
                            }
                            Err(e) => Err(e.clone()),
                        };
                        obs.push(match score {
                            Ok((cosine, judge, judge_unparsable)) => Observation::Valid {
                                hit,
                                cosine,
                                judge,
                                judge_unparsable,
                                trajectory_fallback: method != Method::Llm && traj_out.fallback,
                                fusion_fallback,
                                defaulted_labels: defaulted,
                                saturated: method != Method::Llm && *saturated,
                            },
                            Err(_) => Observation::Invalid,
                        });
                    }
                }
            }
            trials.push(obs);
        }
        Ok(trials)
    }

    /// Transport-class failures become a cached error string; anything else
    /// aborts the run.
    fn soft<T>(&self, r: Result<T, LlmError>, what: &str, trial: usize) -> Result<Cached<T>, EvalError> {
        match r {
            Ok(v) => Ok(Ok(v)),
            Err(e) => {
                let e = EvalError::from(e);
                if e.is_transport() {
                    warn!("{} trial {trial}: {what} failed: {e}", self.pair.id());
                    Ok(Err(e.to_string()))
                } else {
                    Err(e)
                }
            }
        }
    }

    fn score_action(&self, action: &str) -> Result<Cached<(f64, u8, bool)>, EvalError> {
        let emb = match self.embedder.embed(action) {
            Ok(v) => v,
            Err(e) if e.is_transport() => return Ok(Err(e.to_string())),
            Err(EvalError::Precondition(_)) => {
                // Empty model output: worst possible similarity, judged wrong.
                return Ok(Ok((-1.0, 0, true)));
            }
            Err(e) => return Err(e),
        };
        let cosine = cosine_similarity(&emb, &self.gt_embedding)?;
        match judge_action(self.chat, action, &self.pair.scenario.gt_action) {
            Ok(j) => Ok(Ok((cosine, j.score, j.unparsable))),
            Err(e) => {
                let e = EvalError::from(e);
                if e.is_transport() {
                    Ok(Err(e.to_string()))
                } else {
                    Err(e)
                }
            }
        }
    }
}

/// Runs the full grid. Pairs evaluate concurrently up to `cfg.jobs`;
/// aggregation walks pairs in input order so the result does not depend on
/// scheduling.
pub fn run_evaluation(
    pairs: &[EvalPair],
    cfg: &EvalConfig,
    chat: &dyn ChatBackend,
    embedder: &dyn Embedder,
) -> Result<Report, EvalError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(EvalError::Precondition("no evaluation pairs".into()));
    }
    info!(
        "evaluating {} pairs x {} cells x {} trials",
        pairs.len(),
        cfg.methods.len() * cfg.ablations.len() * cfg.d_thresholds_m.len(),
        cfg.trials
    );
    let eval_pair = |pair: &EvalPair| -> Result<Vec<Vec<Observation>>, EvalError> {
        let gt_embedding = embedder.embed(&pair.scenario.gt_action)?;
        PairRun {
            pair,
            cfg,
            chat,
            embedder,
            gt_embedding,
        }
        .run()
    };
    let per_pair: Vec<Vec<Vec<Observation>>> = if cfg.jobs == 1 {
        pairs.iter().map(eval_pair).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| EvalError::Precondition(format!("thread pool: {e}")))?;
        pool.install(|| pairs.par_iter().map(eval_pair).collect::<Result<_, _>>())?
    };
    Ok(Report::aggregate(cfg, embedder.name(), pairs.len(), &per_pair))
}
