//! Synthetic scenes, trajectories and evaluation pairs for offline runs.

pub mod scene_gen;
pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scene_gen::{gen_scene, RoomSpec, OBJECT_VOCABULARY};
pub use synth::{goal_cells, is_goal_adjacent, synthesize_trajectory, DEFAULT_SPEED_MPS};

use crate::eval::{write_json, EvalError, EvalPair, ManifestEntry, Scenario};
use crate::scene::{save_scene, Scene, SceneError};
use crate::trajectory::TrajectoryError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("infeasible spec: {0}")]
    Infeasible(String),
    #[error("goal object `{0}` is unreachable from the start")]
    Unreachable(String),
    #[error("scene has no object `{0}`")]
    UnknownObject(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

const BUNDLED_SCENARIOS_JSON: &str = include_str!("../../assets/scenarios/bundled_v1.json");

/// The eight authored scenarios shipped with the crate.
pub fn bundled_scenarios() -> Vec<Scenario> {
    serde_json::from_str(BUNDLED_SCENARIOS_JSON).expect("bundled scenarios parse")
}

#[derive(Debug, Clone)]
pub struct PairSet {
    pub pairs: Vec<EvalPair>,
    /// Scenario ids whose target object is in no scene.
    pub unmatched: Vec<String>,
}

/// Scenario-major product of scenarios and scenes, keeping pairs whose
/// target object exists in the scene, each with a synthesized trajectory.
pub fn build_pairs(scenarios: &[Scenario], scenes: &[Arc<Scene>], speed_mps: f64) -> Result<PairSet, DatasetError> {
    if scenarios.is_empty() || scenes.is_empty() {
        return Err(DatasetError::Precondition("scenarios and scenes must be non-empty".into()));
    }
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for sc in scenarios {
        let before = pairs.len();
        for scene in scenes.iter().filter(|s| s.has_label(&sc.gt_target_object)) {
            let traj = synthesize_trajectory(scene, sc.start_location, &sc.gt_target_object, speed_mps)?;
            pairs.push(EvalPair::new(sc.clone(), scene.clone(), traj)?);
        }
        if pairs.len() == before {
            warn!("scenario `{}`: `{}` is in no scene", sc.id, sc.gt_target_object);
            unmatched.push(sc.id.clone());
        }
    }
    Ok(PairSet { pairs, unmatched })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    pub scenes: usize,
    pub rooms: usize,
    pub objects: usize,
    pub speed_mps: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            seed: 7,
            scenes: 6,
            rooms: 3,
            objects: 10,
            speed_mps: DEFAULT_SPEED_MPS,
        }
    }
}

/// Scene `i` carries the target object of scenario `j` exactly when `i + j`
/// is even, so every scenario is excluded from half of the scenes.
pub fn scene_spec(cfg: &DatasetConfig, scenarios: &[Scenario], i: usize) -> RoomSpec {
    let mut spec = RoomSpec::new(cfg.rooms, cfg.objects);
    for (j, sc) in scenarios.iter().enumerate() {
        let label = sc.gt_target_object.clone();
        let list = if (i + j).is_multiple_of(2) { &mut spec.required } else { &mut spec.excluded };
        if !list.contains(&label) {
            list.push(label);
        }
    }
    spec
}

pub fn scene_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(1000).wrapping_add(i as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub config: DatasetConfig,
    pub scene_count: usize,
    pub scenario_count: usize,
    pub pair_count: usize,
    pub unmatched_scenarios: Vec<String>,
    pub note: String,
}

fn create_dir(path: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Generates scenes, pairs and trajectories and writes them under `dir`
/// with a `manifest.json` and a `dataset.json` summary.
pub fn write_dataset(dir: &Path, cfg: &DatasetConfig, scenarios: &[Scenario]) -> Result<DatasetSummary, DatasetError> {
    if cfg.scenes == 0 {
        return Err(DatasetError::Precondition("need at least one scene".into()));
    }
    for sc in scenarios {
        sc.validate()?;
    }
    let scenes = (0..cfg.scenes)
        .map(|i| {
            let mut s = gen_scene(scene_seed(cfg.seed, i), &scene_spec(cfg, scenarios, i))?;
            s.name = format!("scene_{i:02}");
            Ok(Arc::new(s))
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    let set = build_pairs(scenarios, &scenes, cfg.speed_mps)?;

    for sub in ["scenes", "scenarios", "trajectories"] {
        create_dir(&dir.join(sub))?;
    }
    for s in &scenes {
        save_scene(s, &dir.join("scenes").join(format!("{}.json", s.name)))?;
    }
    for sc in scenarios {
        sc.save(&dir.join("scenarios").join(format!("{}.json", sc.id)))?;
    }
    let mut manifest = Vec::with_capacity(set.pairs.len());
    for p in &set.pairs {
        let traj_rel = format!("trajectories/{}__{}.csv", p.scenario.id, p.scene.name);
        p.trajectory.save_csv(&dir.join(&traj_rel))?;
        manifest.push(ManifestEntry {
            scenario: format!("scenarios/{}.json", p.scenario.id),
            scene: format!("scenes/{}.json", p.scene.name),
            trajectory: traj_rel,
        });
    }
    write_json(&dir.join("manifest.json"), &manifest)?;
    let summary = DatasetSummary {
        config: cfg.clone(),
        scene_count: scenes.len(),
        scenario_count: scenarios.len(),
        pair_count: set.pairs.len(),
        unmatched_scenarios: set.unmatched,
        note: "Synthetic floor plans and original scenario texts written for this dataset.".into(),
    };
    write_json(&dir.join("dataset.json"), &summary)?;
    info!("wrote {} pairs to {}", summary.pair_count, dir.display());
    Ok(summary)
}
