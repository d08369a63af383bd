//! Soft conditioning: compare each record with its feature-space neighbors
//! instead of with exact feature-vector matches.
//!
//! Distances are Gower-style: numeric columns are min-max scaled to `[0, 1]`
//! and compared by absolute difference, categorical columns contribute 0 on a
//! match and 1 otherwise, and the per-column terms are averaged with
//! non-negative weights. The result lies in `[0, 1]`.

mod index;
mod soft;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use index::{Backend, Neighbor, NeighborIndex};
pub(crate) use soft::criterion_index;
pub use soft::{
    soft_evaluate, soft_evaluate_indexed, InstanceResult, InstanceStatus, SoftMeasure, SoftOptions,
    SoftResult,
};

/// Per-feature weights of the Gower distance, in feature column order.
/// `None` weighs every feature 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl DistanceSpec {
    pub fn weighted(weights: Vec<f64>) -> Self {
        DistanceSpec {
            weights: Some(weights),
        }
    }

    pub(crate) fn resolve(&self, features: usize) -> Result<Vec<f64>> {
        let weights = match &self.weights {
            None => vec![1.0; features],
            Some(w) if w.len() != features => {
                return Err(Error::InvalidDistance(format!(
                    "{} weights given for {features} feature columns",
                    w.len()
                )))
            }
            Some(w) => w.clone(),
        };
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidDistance(
                "weights must be finite and non-negative".into(),
            ));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidDistance("weights sum to zero".into()));
        }
        Ok(weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NeighborhoodMode {
    /// The `k` nearest records; ties at the boundary go to the lower record index.
    Knn { k: usize },
    /// Every record within distance `radius` (inclusive).
    Ball { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub mode: NeighborhoodMode,
    pub include_self: bool,
}

/// Default neighborhood size for soft evaluation.
pub const DEFAULT_K: usize = 200;

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        NeighborhoodSpec::knn(DEFAULT_K)
    }
}

impl NeighborhoodSpec {
    pub fn knn(k: usize) -> Self {
        NeighborhoodSpec {
            mode: NeighborhoodMode::Knn { k },
            include_self: true,
        }
    }

    pub fn ball(radius: f64) -> Self {
        NeighborhoodSpec {
            mode: NeighborhoodMode::Ball { radius },
            include_self: true,
        }
    }

    pub fn excluding_self(mut self) -> Self {
        self.include_self = false;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.mode {
            NeighborhoodMode::Knn { k } => {
                let available = if self.include_self {
                    n
                } else {
                    n.saturating_sub(1)
                };
                if k == 0 || k > available {
                    return Err(Error::InvalidNeighborhood(format!(
                        "k = {k} must be between 1 and {available}"
                    )));
                }
            }
            NeighborhoodMode::Ball { radius } => {
                if !(radius > 0.0 && radius <= 1.0) {
                    return Err(Error::InvalidNeighborhood(format!(
                        "radius {radius} must be in (0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}
