mod common;

use std::sync::OnceLock;

use trllm_core::dataset::{bundled_scenarios, write_dataset, DatasetConfig};
use trllm_core::eval::{
    cosine_similarity, load_manifest, run_evaluation, top5_hit, Embedder, EvalConfig, EvalError, EvalPair,
    HashingEmbedder, Method, Report,
};
use trllm_core::llm::{AblationMode, ChatBackend, HeuristicBackend, LlmError};
use trllm_core::probs::ObjectProbabilityMap;

fn bundled() -> &'static [EvalPair] {
    static PAIRS: OnceLock<Vec<EvalPair>> = OnceLock::new();
    PAIRS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let summary = write_dataset(dir.path(), &DatasetConfig::default(), &bundled_scenarios()).unwrap();
        assert_eq!(summary.pair_count, 24);
        load_manifest(&dir.path().join("manifest.json")).unwrap()
    })
}

fn config(trials: usize) -> EvalConfig {
    EvalConfig {
        trials,
        seed: 7,
        llm_backend: "heuristic".into(),
        ..EvalConfig::default()
    }
}

fn evaluate(cfg: &EvalConfig) -> Report {
    run_evaluation(bundled(), cfg, &HeuristicBackend, &HashingEmbedder::default()).unwrap()
}

fn default_report() -> &'static Report {
    static REPORT: OnceLock<Report> = OnceLock::new();
    REPORT.get_or_init(|| evaluate(&config(3)))
}

const D: [f64; 3] = [1.0, 2.0, 3.0];

fn acc(r: &Report, m: Method, a: AblationMode, d: f64) -> f64 {
    r.cell(m, a, d).unwrap().top5_accuracy.unwrap()
}

#[test]
fn report_matches_golden() {
    let r = default_report();
    assert_eq!(r.cells.len(), 27);
    assert!(r.cells.iter().all(|c| c.stats.invalid_observations == 0 && c.stats.valid_observations == 72));
    common::golden("bundled_report.json", r.to_json().as_bytes());
    common::golden("bundled_report.txt", r.to_text().as_bytes());
}

#[test]
fn trajectory_row_ignores_ablation() {
    let r = default_report();
    for d in D {
        let base = serde_json::to_string(r.cell(Method::Trajectory, AblationMode::All, d).unwrap()).unwrap();
        for a in AblationMode::ALL_MODES {
            assert_eq!(serde_json::to_string(r.cell(Method::Trajectory, a, d).unwrap()).unwrap(), base);
        }
    }
}

#[test]
fn accuracy_trends() {
    let r = default_report();
    for a in AblationMode::ALL_MODES {
        for m in [Method::Trajectory, Method::Fused] {
            let row: Vec<f64> = D.iter().map(|&d| acc(r, m, a, d)).collect();
            assert!(row.windows(2).all(|w| w[0] <= w[1]), "{m} {a}: {row:?}");
        }
        for d in D {
            let best = acc(r, Method::Llm, a, d).max(acc(r, Method::Trajectory, a, d));
            assert!(acc(r, Method::Fused, a, d) >= best, "{a} d>{d}");
        }
    }
    for d in D {
        let row: Vec<f64> = AblationMode::ALL_MODES.iter().map(|&a| acc(r, Method::Llm, a, d)).collect();
        assert!(row.windows(2).all(|w| w[0] >= w[1]), "d>{d}: {row:?}");
    }
}

#[test]
fn deterministic_trials_collapse() {
    let one = evaluate(&config(1));
    let three = default_report();
    assert_eq!(one.cells.len(), three.cells.len());
    for (a, b) in one.cells.iter().zip(&three.cells) {
        assert_eq!(a.key, b.key);
        assert_eq!(a.stats.top5_accuracy, b.stats.top5_accuracy);
        assert_eq!(a.stats.action_cosine, b.stats.action_cosine);
        assert_eq!(a.stats.judge_accuracy, b.stats.judge_accuracy);
        assert_eq!(a.stats.valid_observations * 3, b.stats.valid_observations);
    }
    // With one trial every accuracy is a whole number of pairs.
    for c in &one.cells {
        for v in [c.stats.top5_accuracy.unwrap(), c.stats.judge_accuracy.unwrap()] {
            let count = v * 24.0;
            assert!((count - count.round()).abs() < 1e-9, "{v}");
        }
    }
}

#[test]
fn parallelism_does_not_change_output() {
    let cfg = EvalConfig { jobs: 4, ..config(3) };
    assert_eq!(evaluate(&cfg).to_json(), default_report().to_json());
}

#[test]
fn config_preconditions() {
    for cfg in [
        config(0),
        EvalConfig { k: 0, ..config(1) },
        EvalConfig { jobs: 0, ..config(1) },
        EvalConfig { d_thresholds_m: vec![2.0, 1.0], ..config(1) },
        EvalConfig { ablations: vec![], ..config(1) },
    ] {
        let err = run_evaluation(bundled(), &cfg, &HeuristicBackend, &HashingEmbedder::default()).unwrap_err();
        assert!(matches!(err, EvalError::Precondition(_)));
    }
    let err = run_evaluation(&[], &config(1), &HeuristicBackend, &HashingEmbedder::default()).unwrap_err();
    assert!(matches!(err, EvalError::Precondition(_)));
}

/// Fails every ranking request; everything else goes to the heuristic mock.
struct FlakyRanking(fn() -> LlmError);

impl ChatBackend for FlakyRanking {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        if prompt.contains("Candidate targets from the previous step") {
            Err((self.0)())
        } else {
            HeuristicBackend.complete(prompt)
        }
    }
}

#[test]
fn transport_failures_become_invalid_observations() {
    let backend = FlakyRanking(|| LlmError::Transport { attempts: 4, message: "connection refused".into() });
    let r = run_evaluation(bundled(), &config(1), &backend, &HashingEmbedder::default()).unwrap();
    for c in &r.cells {
        if c.key.method == Method::Trajectory {
            assert_eq!((c.stats.valid_observations, c.stats.invalid_observations), (24, 0));
            assert!(c.stats.top5_accuracy.is_some());
        } else {
            assert_eq!((c.stats.valid_observations, c.stats.invalid_observations), (0, 24));
            assert_eq!(c.stats.top5_accuracy, None);
        }
    }
    assert!(r.to_text().contains("432 observation(s) invalid"));

    let backend = FlakyRanking(|| LlmError::Request { status: 401, body: "no key".into() });
    let r = run_evaluation(bundled(), &config(1), &backend, &HashingEmbedder::default()).unwrap();
    assert_eq!(r.cells.iter().map(|c| c.stats.invalid_observations).sum::<usize>(), 18 * 24);
}

#[test]
fn non_transport_failures_abort() {
    let backend = FlakyRanking(|| LlmError::Config("bad".into()));
    let err = run_evaluation(bundled(), &config(1), &backend, &HashingEmbedder::default()).unwrap_err();
    assert!(!err.is_transport());
    assert!(matches!(err, EvalError::Llm(LlmError::Config(_))));
}

#[test]
fn top5_examples() {
    let p = ObjectProbabilityMap::from_weights([("a", 6.0), ("b", 5.0), ("c", 4.0), ("d", 3.0), ("e", 2.0), ("f", 1.0)])
        .unwrap()
        .probs;
    assert!(top5_hit(&p, "e", 5).unwrap());
    assert!(!top5_hit(&p, "f", 5).unwrap());
    assert!(top5_hit(&p, "f", 6).unwrap());
    let tied = ObjectProbabilityMap::uniform(["f", "e", "d", "c", "b", "a"]).unwrap();
    assert!(top5_hit(&tied, "e", 5).unwrap());
    assert!(!top5_hit(&tied, "f", 5).unwrap());
    assert!(matches!(top5_hit(&p, "zzz", 5), Err(EvalError::Precondition(_))));
}

#[test]
fn embedding_and_cosine() {
    let e = HashingEmbedder::default();
    let u = e.embed("Open the fridge").unwrap();
    assert_eq!(u.len(), 512);
    assert!((u.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(u, e.embed("  open   the FRIDGE ").unwrap());
    assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
    let near = cosine_similarity(&u, &e.embed("open the fridge door").unwrap()).unwrap();
    let far = cosine_similarity(&u, &e.embed("watch television").unwrap()).unwrap();
    assert!(near > far, "{near} vs {far}");
    assert!(e.embed("   ").is_err());

    assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
    assert_eq!(cosine_similarity(&[1.0, 1.0], &[-3.0, -3.0]).unwrap(), -1.0);
    assert!((cosine_similarity(&[3.0, 4.0], &[4.0, 3.0]).unwrap() - 24.0 / 25.0).abs() < 1e-15);
    assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]).is_err());
}
