//! Label -> probability maps shared by the semantic, physical and fused
//! predictors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the sum of a probability map.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ProbabilityError {
    #[error("probability map needs at least one label")]
    Empty,
    #[error("invalid weight {weight} for `{label}`")]
    InvalidWeight { label: String, weight: f64 },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("label sets differ: {0}")]
    LabelMismatch(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
}

/// Non-negative probabilities over a fixed label set, summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectProbabilityMap {
    entries: BTreeMap<String, f64>,
}

/// A distribution plus whether it came from the uniform fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityOutcome {
    pub probs: ObjectProbabilityMap,
    pub fallback: bool,
}

impl ObjectProbabilityMap {
    /// Normalizes non-negative weights. An all-zero weight vector falls back
    /// to the uniform distribution and is reported via `fallback`.
    pub fn from_weights<I, S>(weights: I) -> Result<ProbabilityOutcome, ProbabilityError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut entries = BTreeMap::new();
        for (label, weight) in weights {
            let label = label.into();
            if !(weight.is_finite() && weight >= 0.0) {
                return Err(ProbabilityError::InvalidWeight { label, weight });
            }
            if entries.insert(label.clone(), weight).is_some() {
                return Err(ProbabilityError::DuplicateLabel(label));
            }
        }
        if entries.is_empty() {
            return Err(ProbabilityError::Empty);
        }
        let total: f64 = entries.values().sum();
        let fallback = total <= 0.0;
        let n = entries.len() as f64;
        for v in entries.values_mut() {
            *v = if fallback { 1.0 / n } else { *v / total };
        }
        Ok(ProbabilityOutcome {
            probs: ObjectProbabilityMap { entries },
            fallback,
        })
    }

    pub fn uniform<I, S>(labels: I) -> Result<Self, ProbabilityError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_weights(labels.into_iter().map(|l| (l, 1.0))).map(|o| o.probs)
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.entries.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.contains_key(label)
    }

    /// Entries in ascending label order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn sum(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn same_labels(&self, other: &ObjectProbabilityMap) -> bool {
        self.entries.len() == other.entries.len() && self.entries.keys().eq(other.entries.keys())
    }

    /// Labels sorted by descending probability, ties by ascending label.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// 1-based rank of `label` under [`ObjectProbabilityMap::ranked`].
    pub fn rank_of(&self, label: &str) -> Option<usize> {
        self.ranked().iter().position(|(l, _)| *l == label).map(|i| i + 1)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.entries
            .values()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }
}
