//! Trajectory-based target prediction: heatmap predictors and the
//! heatmap -> object probability step.

pub mod dump;
pub mod geometric;
pub mod unet;
pub mod weights;

use std::sync::Arc;

use thiserror::Error;

pub use geometric::{geometric_predict, GeometricError, DEFAULT_BETA};
pub use unet::{unet_forward, UNetSpec};
pub use weights::{load_weights, save_weights, Tensor, WeightContainer, WeightsError};

use crate::probs::{ObjectProbabilityMap, ProbabilityOutcome};
use crate::raster::{rasterize, DEFAULT_SIGMA_PX, EPOCHS};
use crate::scene::{object_overlap_mass, Heatmap, Scene, SceneError};
use crate::trajectory::{Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Geometric(#[from] GeometricError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone)]
pub enum GoalPredictorKind {
    Unet {
        spec: UNetSpec,
        weights: Arc<WeightContainer>,
        sigma_px: f64,
    },
    Geometric {
        beta: f64,
    },
    /// Flat heatmap; object probabilities end up proportional to mask area.
    Uniform,
}

impl GoalPredictorKind {
    /// U-Net predictor; fails early if the weights do not fit the schema.
    pub fn unet(spec: UNetSpec, weights: WeightContainer) -> Result<Self, WeightsError> {
        spec.validate(&weights)?;
        Ok(GoalPredictorKind::Unet {
            spec,
            weights: Arc::new(weights),
            sigma_px: DEFAULT_SIGMA_PX,
        })
    }

    pub fn geometric(beta: f64) -> Result<Self, GeometricError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(GeometricError::InvalidBeta(beta));
        }
        Ok(GoalPredictorKind::Geometric { beta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GoalPredictorKind::Unet { .. } => "unet",
            GoalPredictorKind::Geometric { .. } => "geometric",
            GoalPredictorKind::Uniform => "uniform",
        }
    }

    /// Target-area heatmap for the observed trajectory.
    pub fn predict(&self, scene: &Scene, traj: &Trajectory) -> Result<Heatmap, PredictError> {
        match self {
            GoalPredictorKind::Unet { spec, weights, sigma_px } => {
                let stack = rasterize(&traj.resample_to_epochs(EPOCHS), &scene.map, *sigma_px)?;
                Ok(unet_forward(spec, weights, &stack)?)
            }
            GoalPredictorKind::Geometric { beta } => Ok(geometric_predict(scene, traj, *beta)?),
            GoalPredictorKind::Uniform => Ok(Heatmap::filled(*scene.geometry(), 1.0)),
        }
    }
}

/// Per-object probability from heatmap overlap mass, normalized over all
/// objects. Zero total mass falls back to uniform (`fallback = true`).
pub fn object_probabilities(heatmap: &Heatmap, scene: &Scene) -> Result<ProbabilityOutcome, SceneError> {
    if heatmap.geometry != *scene.geometry() {
        return Err(SceneError::Dimension {
            expected: format!("{:?}", scene.geometry()),
            found: format!("{:?}", heatmap.geometry),
        });
    }
    let masses = scene
        .objects
        .iter()
        .map(|o| Ok((o.label.clone(), object_overlap_mass(heatmap, o)?)))
        .collect::<Result<Vec<_>, SceneError>>()?;
    Ok(ObjectProbabilityMap::from_weights(masses).expect("scene labels are unique and masses finite"))
}
