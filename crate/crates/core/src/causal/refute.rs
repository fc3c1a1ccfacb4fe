//! Placebo, random-common-cause and subset refuters.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::estimate::{estimate_dataset, EstimatorParams, Method};
use super::synthetic::standard_normal;
use super::{BinaryDataset, CausalError};
use crate::{derive_seed, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refuter {
    Placebo,
    RandomCommonCause,
    Subset,
}

impl Refuter {
    pub const ALL: [Refuter; 3] = [Refuter::Placebo, Refuter::RandomCommonCause, Refuter::Subset];

    pub fn as_str(self) -> &'static str {
        match self {
            Refuter::Placebo => "placebo",
            Refuter::RandomCommonCause => "random_common_cause",
            Refuter::Subset => "subset",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Refuter::Placebo => "Placebo",
            Refuter::RandomCommonCause => "RCC",
            Refuter::Subset => "Subset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefuteParams {
    /// Placebo tolerance on a [0, 1] outcome scale.
    pub placebo_epsilon: f64,
    /// Relative tolerance for RCC and subset.
    pub delta: f64,
    pub subset_fraction: f64,
}

impl Default for RefuteParams {
    fn default() -> Self {
        RefuteParams {
            placebo_epsilon: 0.05,
            delta: 0.10,
            subset_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefutationResult {
    pub refuter: Refuter,
    pub original_ate: f64,
    pub refuted_ate: f64,
    pub stable: bool,
}

/// Re-estimate under `refuter`. Outcomes not on a [0, 1] scale have the
/// placebo effect divided by the observed outcome range before comparing
/// with the tolerance.
#[allow(clippy::too_many_arguments)]
pub fn refute_dataset(
    data: &BinaryDataset,
    original_ate: f64,
    method: Method,
    refuter: Refuter,
    params: &EstimatorParams,
    rparams: &RefuteParams,
    unit_scaled: bool,
    seed: u64,
) -> Result<RefutationResult, CausalError> {
    let mut rng = seeded_rng(derive_seed(seed, refuter.as_str()));
    let altered = match refuter {
        Refuter::Placebo => {
            let mut t = data.t.clone();
            t.shuffle(&mut rng);
            BinaryDataset {
                t,
                ..data.clone()
            }
        }
        Refuter::RandomCommonCause => {
            let mut z = data.z.clone();
            z.push((0..data.len()).map(|_| standard_normal(&mut rng)).collect());
            BinaryDataset { z, ..data.clone() }
        }
        Refuter::Subset => {
            let k = ((data.len() as f64) * rparams.subset_fraction).round() as usize;
            let mut rows = index::sample(&mut rng, data.len(), k.min(data.len())).into_vec();
            rows.sort_unstable();
            data.select(&rows)
        }
    };
    let refuted_ate = estimate_dataset(&altered, method, params)?.ate;
    let stable = match refuter {
        Refuter::Placebo => {
            let scale = if unit_scaled { 1.0 } else { data.outcome_range() };
            scale > 0.0 && (refuted_ate / scale).abs() <= rparams.placebo_epsilon
        }
        Refuter::RandomCommonCause | Refuter::Subset => {
            (refuted_ate - original_ate).abs() <= rparams.delta * original_ate.abs()
        }
    };
    Ok(RefutationResult {
        refuter,
        original_ate,
        refuted_ate,
        stable,
    })
}
