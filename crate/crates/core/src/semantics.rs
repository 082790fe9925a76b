//! Version age of information and the feature-distance proxy that drives it.
//!
//! A client's age grows by one for every global update it missed that is
//! semantically significant to it, i.e. whose batch-mean features on the
//! client's probe batch lie at least `mu` away (Euclidean) from the feature
//! moment the client recorded during its latest training. Participation
//! resets the age to zero.

use serde::{Deserialize, Serialize};

use crate::error::{EhflError, Result};
use crate::learner::{forward, FeatureVector, Minibatch, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaoiState {
    age: u64,
    mu: f64,
    last_distance: Option<f64>,
}

impl VaoiState {
    pub fn new(mu: f64) -> Self {
        VaoiState {
            age: 0,
            mu,
            last_distance: None,
        }
    }

    pub fn age(&self) -> u64 {
        self.age
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Latest measured distance; `None` before the client's first training.
    pub fn last_distance(&self) -> Option<f64> {
        self.last_distance
    }

    /// Applies one round of the age recursion.
    ///
    /// `distance` is `None` when the client has no historical moment yet;
    /// such a client counts as maximally stale and ages whenever it is not
    /// selected.
    pub fn update(&mut self, participated: bool, distance: Option<f64>) {
        self.last_distance = distance;
        self.age = next_age(self.age, participated, distance, self.mu);
    }
}

/// `X(t+1) = (X(t)+1)(1-q)` if `M >= mu`, else `X(t)(1-q)`.
pub fn next_age(age: u64, participated: bool, distance: Option<f64>, mu: f64) -> u64 {
    if participated {
        0
    } else if distance.is_none_or(|m| m >= mu) {
        age + 1
    } else {
        age
    }
}

/// Euclidean distance between two feature vectors.
pub fn feature_distance(v: &FeatureVector, h: &FeatureVector) -> Result<f64> {
    if v.len() != h.len() {
        return Err(EhflError::Shape(format!(
            "feature lengths differ: {} vs {}",
            v.len(),
            h.len()
        )));
    }
    Ok(v.as_slice()
        .iter()
        .zip(h.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Batch-mean features of `model` on `batch`, from a single forward pass.
pub fn mean_features(
    model: &ModelParams,
    batch: &Minibatch,
    feature_layer: usize,
) -> Result<FeatureVector> {
    let out = forward(model, batch, feature_layer)?;
    Ok(out.features.scaled(1.0 / batch.len() as f64))
}

/// Feature distance between the global model's batch-mean features on the
/// client's probe batch and the client's historical moment. Returns `None`
/// when the client has never trained. Runs forward only; nothing is mutated.
pub fn probe(
    historical: Option<&FeatureVector>,
    global: &ModelParams,
    probe_batch: &Minibatch,
    feature_layer: usize,
) -> Result<Option<f64>> {
    match historical {
        None => Ok(None),
        Some(h) => {
            let v = mean_features(global, probe_batch, feature_layer)?;
            feature_distance(&v, h).map(Some)
        }
    }
}
