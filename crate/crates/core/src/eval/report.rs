//! Evaluation report: JSON grid plus a plain-text table.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_json, EvalConfig, EvalError, Method, Observation};
use crate::llm::prompts::PROMPT_VERSION;
use crate::llm::AblationMode;

/// Table title, accessor, and whether the value prints as a percentage.
type Metric = (&'static str, fn(&CellStats) -> Option<f64>, bool);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub seed: u64,
    pub trials: usize,
    pub k: usize,
    pub predictor: String,
    pub llm_backend: String,
    pub embedder: String,
    pub prompt_version: u32,
    pub pair_count: usize,
    pub methods: Vec<Method>,
    pub ablations: Vec<AblationMode>,
    pub d_thresholds_m: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub method: Method,
    pub ablation: AblationMode,
    pub d_threshold_m: f64,
}

/// Means are over valid observations and `None` when there were none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub top5_accuracy: Option<f64>,
    pub action_cosine: Option<f64>,
    pub judge_accuracy: Option<f64>,
    pub pair_count: usize,
    pub valid_observations: usize,
    pub invalid_observations: usize,
    /// Trajectory probabilities that fell back to uniform (zero overlap).
    pub trajectory_fallbacks: usize,
    /// Fusions whose products were all zero.
    pub fusion_fallbacks: usize,
    /// Object ranks missing from model output, summed.
    pub defaulted_labels: usize,
    pub judge_unparsable: usize,
    /// Observations whose trajectory was shorter than the threshold.
    pub saturated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    #[serde(flatten)]
    pub key: CellKey,
    #[serde(flatten)]
    pub stats: CellStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub header: ReportHeader,
    pub cells: Vec<ReportCell>,
}

/// Cell keys in the order the harness emits observations.
pub(crate) fn cell_order(cfg: &EvalConfig) -> Vec<CellKey> {
    let mut out = Vec::new();
    for &method in &cfg.methods {
        for &ablation in &cfg.ablations {
            for &d_threshold_m in &cfg.d_thresholds_m {
                out.push(CellKey {
                    method,
                    ablation,
                    d_threshold_m,
                });
            }
        }
    }
    out
}

/// Mean of per-trial means, written as an offset from the first so constant
/// trials reproduce the single-trial value exactly.
fn mean_of_trials(per_trial: &[f64]) -> Option<f64> {
    let first = *per_trial.first()?;
    let offset: f64 = per_trial.iter().map(|m| m - first).sum();
    Some(first + offset / per_trial.len() as f64)
}

#[derive(Default)]
struct TrialSums {
    n: usize,
    hits: f64,
    cosine: f64,
    judge: f64,
}

impl Report {
    pub(crate) fn aggregate(
        cfg: &EvalConfig,
        embedder: String,
        pair_count: usize,
        per_pair: &[Vec<Vec<Observation>>],
    ) -> Report {
        let keys = cell_order(cfg);
        let mut cells = Vec::with_capacity(keys.len());
        for (ci, key) in keys.into_iter().enumerate() {
            let mut stats = CellStats {
                top5_accuracy: None,
                action_cosine: None,
                judge_accuracy: None,
                pair_count,
                valid_observations: 0,
                invalid_observations: 0,
                trajectory_fallbacks: 0,
                fusion_fallbacks: 0,
                defaulted_labels: 0,
                judge_unparsable: 0,
                saturated: 0,
            };
            let mut trials: Vec<TrialSums> = (0..cfg.trials).map(|_| TrialSums::default()).collect();
            for pair in per_pair {
                for (t, obs) in pair.iter().enumerate() {
                    match &obs[ci] {
                        Observation::Invalid => stats.invalid_observations += 1,
                        Observation::Valid {
                            hit,
                            cosine,
                            judge,
                            judge_unparsable,
                            trajectory_fallback,
                            fusion_fallback,
                            defaulted_labels,
                            saturated,
                        } => {
                            stats.valid_observations += 1;
                            stats.trajectory_fallbacks += *trajectory_fallback as usize;
                            stats.fusion_fallbacks += *fusion_fallback as usize;
                            stats.defaulted_labels += defaulted_labels;
                            stats.judge_unparsable += *judge_unparsable as usize;
                            stats.saturated += *saturated as usize;
                            let s = &mut trials[t];
                            s.n += 1;
                            s.hits += if *hit { 1.0 } else { 0.0 };
                            s.cosine += cosine;
                            s.judge += *judge as f64;
                        }
                    }
                }
            }
            let valid: Vec<&TrialSums> = trials.iter().filter(|s| s.n > 0).collect();
            let per_trial = |f: fn(&TrialSums) -> f64| -> Vec<f64> { valid.iter().map(|s| f(s) / s.n as f64).collect() };
            stats.top5_accuracy = mean_of_trials(&per_trial(|s| s.hits));
            stats.action_cosine = mean_of_trials(&per_trial(|s| s.cosine));
            stats.judge_accuracy = mean_of_trials(&per_trial(|s| s.judge));
            cells.push(ReportCell { key, stats });
        }
        Report {
            header: ReportHeader {
                seed: cfg.seed,
                trials: cfg.trials,
                k: cfg.k,
                predictor: cfg.predictor.name().to_string(),
                llm_backend: cfg.llm_backend.clone(),
                embedder,
                prompt_version: PROMPT_VERSION,
                pair_count,
                methods: cfg.methods.clone(),
                ablations: cfg.ablations.clone(),
                d_thresholds_m: cfg.d_thresholds_m.clone(),
            },
            cells,
        }
    }

    pub fn cell(&self, method: Method, ablation: AblationMode, d_threshold_m: f64) -> Option<&CellStats> {
        self.cells
            .iter()
            .find(|c| c.key.method == method && c.key.ablation == ablation && c.key.d_threshold_m == d_threshold_m)
            .map(|c| &c.stats)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One table per metric: a row per (method, threshold), a column per
    /// ablation mode.
    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "pairs={} trials={} k={} seed={} predictor={} llm={} embedder={} prompts=v{}",
            h.pair_count, h.trials, h.k, h.seed, h.predictor, h.llm_backend, h.embedder, h.prompt_version
        );
        let metrics: [Metric; 3] = [
            ("Target object top-5 accuracy [%]", |c| c.top5_accuracy, true),
            ("Action cosine similarity", |c| c.action_cosine, false),
            ("Action judge accuracy [%]", |c| c.judge_accuracy, true),
        ];
        for (title, get, percent) in metrics {
            let _ = writeln!(out, "\n{title}");
            let mut header = format!("{:<22}", "method");
            for a in &h.ablations {
                let _ = write!(header, "{:>14}", a.as_str());
            }
            let _ = writeln!(out, "{header}");
            for &m in &h.methods {
                for &d in &h.d_thresholds_m {
                    let mut row = format!("{:<22}", format!("{} (d>{}m)", m.as_str(), d));
                    for &a in &h.ablations {
                        let v = self.cell(m, a, d).and_then(get);
                        let text = match v {
                            Some(v) if percent => format!("{:.1}", v * 100.0),
                            Some(v) => format!("{v:.3}"),
                            None => "n/a".into(),
                        };
                        let _ = write!(row, "{text:>14}");
                    }
                    let _ = writeln!(out, "{}", row.trim_end());
                }
            }
        }
        let invalid: usize = self.cells.iter().map(|c| c.stats.invalid_observations).sum();
        if invalid > 0 {
            let _ = writeln!(out, "\n{invalid} observation(s) invalid after retries; see report.json");
        }
        out
    }

    /// Writes `report.json` and `report.txt` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<(), EvalError> {
        write_json(&dir.join("report.json"), self)?;
        let path = dir.join("report.txt");
        std::fs::write(&path, self.to_text()).map_err(|source| EvalError::Io { path, source })
    }
}
