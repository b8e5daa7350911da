//! Weighted mixtures of product profiles.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::SIMPLEX_TOL;

/// `Σ_t w_t · ⊗_i x_i^(t)`, a mixture of `T` product distributions.
///
/// The component type is a [`MixedProfile`](crate::MixedProfile) for
/// normal-form games or a [`BehavioralProfile`](crate::BehavioralProfile)
/// for the lifted game.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCorrelated<P> {
    components: Vec<P>,
    weights: Vec<f64>,
}

impl<P> SparseCorrelated<P> {
    pub fn uniform(components: Vec<P>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let w = 1.0 / components.len() as f64;
        let weights = vec![w; components.len()];
        Ok(Self {
            components,
            weights,
        })
    }

    pub fn weighted(components: Vec<P>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyMixture);
        }
        if weights.len() != components.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("weight {w} is negative")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Self {
            components,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[P] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &P)> {
        self.weights.iter().copied().zip(self.components.iter())
    }

    /// True when every weight equals `1/T` up to `1e-12`.
    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|x| (x - w).abs() <= 1e-12)
    }

    pub fn into_components(self) -> Vec<P> {
        self.components
    }
}

#[derive(Serialize)]
struct ReprRef<'a, P> {
    #[serde(rename = "T")]
    t: usize,
    weights: &'a [f64],
    components: &'a [P],
}

#[derive(Deserialize)]
struct Repr<P> {
    #[serde(rename = "T")]
    t: usize,
    weights: Option<Vec<f64>>,
    components: Vec<P>,
}

impl<P: Serialize> Serialize for SparseCorrelated<P> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ReprRef {
            t: self.len(),
            weights: &self.weights,
            components: &self.components,
        }
        .serialize(serializer)
    }
}

impl<'de, P: DeserializeOwned> Deserialize<'de> for SparseCorrelated<P> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = Repr::<P>::deserialize(deserializer)?;
        if repr.t != repr.components.len() {
            return Err(serde::de::Error::custom(format!(
                "T = {} but {} components given",
                repr.t,
                repr.components.len()
            )));
        }
        let out = match repr.weights {
            Some(w) => Self::weighted(repr.components, w),
            None => Self::uniform(repr.components),
        };
        out.map_err(serde::de::Error::custom)
    }
}
