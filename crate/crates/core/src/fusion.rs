//! Multiplicative fusion of semantic and physical object probabilities.

use crate::probs::{ObjectProbabilityMap, ProbabilityError, ProbabilityOutcome};

/// Elementwise product, renormalized. When every product is zero the result
/// is uniform and `fallback` is set.
pub fn fuse(p_llm: &ObjectProbabilityMap, p_traj: &ObjectProbabilityMap) -> Result<ProbabilityOutcome, ProbabilityError> {
    if !p_llm.same_labels(p_traj) {
        let a: Vec<&str> = p_llm.labels().collect();
        let b: Vec<&str> = p_traj.labels().collect();
        return Err(ProbabilityError::LabelMismatch(format!("{a:?} vs {b:?}")));
    }
    ObjectProbabilityMap::from_weights(
        p_llm
            .iter()
            .zip(p_traj.iter())
            .map(|((label, a), (_, b))| (label, a * b)),
    )
}

/// The `k` most probable labels; ties resolve by ascending label.
pub fn top_k(p: &ObjectProbabilityMap, k: usize) -> Vec<String> {
    p.ranked().into_iter().take(k).map(|(l, _)| l.to_string()).collect()
}
