//! Structural causal model of prompt treatments: correlation screening,
//! propensity-score ATE estimation and refutation.

mod estimate;
mod propensity;
mod refute;
mod screening;
mod stats;
mod study;
pub mod synthetic;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::llm_eval::EvalRecord;
use crate::testbeds::Testbed;

pub use estimate::{
    estimate_dataset, ipw_ate, matching_ate, stratification_ate, AteResult, EstimatorParams, Method,
};
pub use propensity::{fit_propensity, standardize, PropensityFit, PropensityParams};
pub use refute::{refute_dataset, RefutationResult, RefuteParams, Refuter};
pub use screening::{screen_confounders, ScreenedCandidate};
pub use stats::{
    average_ranks, correlation, mean, pearson_correlation, sample_std, spearman_correlation,
    CorrelationMethod,
};
pub use study::{
    run_study, CorrelationRow, EffectKind, EffectRow, MetricSummary, StudyConfig, StudyResults,
    VariableRole,
};

#[derive(Debug, thiserror::Error)]
pub enum CausalError {
    #[error("correlation undefined: {0}")]
    Correlation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("perfect separation: {0}")]
    Separation(String),
    #[error("propensity fit did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },
    #[error("no treated/control pair within the caliper (empty common support)")]
    NoCommonSupport,
    #[error("every propensity stratum lacks a treatment arm")]
    AllStrataDropped,
    #[error("invalid causal model: {0}")]
    InvalidModel(String),
    #[error("record {point_id} ({treatment}) has no value for `{name}`")]
    MissingVariable {
        point_id: String,
        treatment: String,
        name: String,
    },
    #[error("evaluation record for unknown point {0}")]
    UnknownPoint(String),
}

/// Outcomes bounded to [0, 1], reported with a percentage.
pub fn is_unit_scaled(outcome: &str) -> bool {
    matches!(outcome, "y_lev_similarity" | "y_bleu" | "y_codebleu")
}

/// One binary contrast of the causal graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScmSpec {
    /// Treatment group coded T = 1.
    pub treatment: String,
    /// Group coded T = 0.
    pub control: String,
    pub outcome: String,
    pub confounders: Vec<String>,
    pub effect_modifiers: Vec<String>,
}

pub fn default_confounders() -> Vec<String> {
    ["prompt_size", "n_whitespaces", "token_count", "nloc"]
        .map(String::from)
        .to_vec()
}

pub fn default_effect_modifiers() -> Vec<String> {
    ["complexity", "n_ast_nodes", "n_ast_errors", "n_ast_levels"]
        .map(String::from)
        .to_vec()
}

impl ScmSpec {
    pub fn new(treatment: &str, outcome: &str) -> Self {
        ScmSpec {
            treatment: treatment.into(),
            control: "control".into(),
            outcome: outcome.into(),
            confounders: default_confounders(),
            effect_modifiers: default_effect_modifiers(),
        }
    }

    pub fn validate(&self) -> Result<(), CausalError> {
        let bad = |m: String| Err(CausalError::InvalidModel(m));
        if self.treatment == self.control {
            return bad("treatment and control groups are the same".into());
        }
        if self.confounders.contains(&self.outcome) {
            return bad(format!("outcome `{}` listed as a confounder", self.outcome));
        }
        if self.confounders.iter().any(|z| z == "treatment") {
            return bad("treatment listed as a confounder".into());
        }
        if let Some(z) = self.confounders.iter().find(|z| self.effect_modifiers.contains(z)) {
            return bad(format!("`{z}` is both a confounder and an effect modifier"));
        }
        Ok(())
    }
}

/// Named numeric values of one (point, treatment) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub point_id: String,
    pub treatment: String,
    pub values: BTreeMap<String, f64>,
}

/// Join evaluation records with the features of their testbed points.
pub fn build_study_records(evals: &[EvalRecord], testbed: &Testbed) -> Result<Vec<StudyRecord>, CausalError> {
    let features: HashMap<String, &crate::features::FeatureVector> = testbed
        .points
        .iter()
        .map(|p| (p.point_id(), &p.point.features))
        .collect();
    evals
        .iter()
        .map(|e| {
            let f = features
                .get(&e.point_id)
                .ok_or_else(|| CausalError::UnknownPoint(e.point_id.clone()))?;
            let mut values = BTreeMap::new();
            for key in crate::features::FeatureVector::KEYS {
                if let Some(v) = f.get(key) {
                    values.insert((*key).to_owned(), v);
                }
            }
            for key in ["prompt_size", "y_bleu", "y_codebleu", "y_lev_distance", "y_lev_similarity"] {
                values.insert(key.to_owned(), e.outcome(key).expect("known outcome"));
            }
            Ok(StudyRecord {
                point_id: e.point_id.clone(),
                treatment: e.treatment.to_string(),
                values,
            })
        })
        .collect()
}

/// Binary-treatment design: outcome, treatment indicator and confounder
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    pub t: Vec<bool>,
    pub y: Vec<f64>,
    /// Confounder columns, each of length n.
    pub z: Vec<Vec<f64>>,
}

impl BinaryDataset {
    pub fn new(t: Vec<bool>, y: Vec<f64>, z: Vec<Vec<f64>>) -> Self {
        BinaryDataset { t, y, z }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> BinaryDataset {
        BinaryDataset {
            t: rows.iter().map(|i| self.t[*i]).collect(),
            y: rows.iter().map(|i| self.y[*i]).collect(),
            z: self
                .z
                .iter()
                .map(|c| rows.iter().map(|i| c[*i]).collect())
                .collect(),
        }
    }

    pub fn outcome_range(&self) -> f64 {
        let lo = self.y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Rows of the two contrast groups, sorted by (point_id, treatment) so
    /// every estimate is independent of input order.
    pub fn from_records(records: &[StudyRecord], scm: &ScmSpec) -> Result<Self, CausalError> {
        scm.validate()?;
        let mut rows: Vec<&StudyRecord> = records
            .iter()
            .filter(|r| r.treatment == scm.treatment || r.treatment == scm.control)
            .collect();
        rows.sort_by(|a, b| (&a.point_id, &a.treatment).cmp(&(&b.point_id, &b.treatment)));
        let get = |r: &StudyRecord, name: &str| {
            r.values.get(name).copied().ok_or_else(|| CausalError::MissingVariable {
                point_id: r.point_id.clone(),
                treatment: r.treatment.clone(),
                name: name.to_owned(),
            })
        };
        let t = rows.iter().map(|r| r.treatment == scm.treatment).collect();
        let y = rows.iter().map(|r| get(r, &scm.outcome)).collect::<Result<_, _>>()?;
        let z = scm
            .confounders
            .iter()
            .map(|name| rows.iter().map(|r| get(r, name)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        Ok(BinaryDataset { t, y, z })
    }
}

/// ATE of `scm.treatment` against `scm.control` on `scm.outcome`.
pub fn estimate_ate(
    records: &[StudyRecord],
    scm: &ScmSpec,
    method: Method,
    params: &EstimatorParams,
) -> Result<AteResult, CausalError> {
    let data = BinaryDataset::from_records(records, scm)?;
    let mut res = estimate_dataset(&data, method, params)?;
    if is_unit_scaled(&scm.outcome) {
        res.ate_pct = Some(res.ate * 100.0);
    }
    Ok(res)
}

/// Re-estimate the contrast under a refuter; deterministic in `seed`.
pub fn refute(
    records: &[StudyRecord],
    scm: &ScmSpec,
    method: Method,
    refuter: Refuter,
    params: &EstimatorParams,
    rparams: &RefuteParams,
    seed: u64,
) -> Result<RefutationResult, CausalError> {
    let data = BinaryDataset::from_records(records, scm)?;
    let original = estimate_dataset(&data, method, params)?.ate;
    refute_dataset(
        &data,
        original,
        method,
        refuter,
        params,
        rparams,
        is_unit_scaled(&scm.outcome),
        seed,
    )
}
