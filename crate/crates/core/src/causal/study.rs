//! A full study: performance summaries, correlations and every
//! (contrast, outcome, method) effect with its refutations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::{estimate_dataset, EstimatorParams, Method};
use super::refute::{refute_dataset, RefuteParams, Refuter};
use super::screening::{screen_confounders, ScreenedCandidate};
use super::stats::{correlation, mean, sample_std, CorrelationMethod};
use super::{
    default_confounders, default_effect_modifiers, is_unit_scaled, BinaryDataset, CausalError, ScmSpec,
    StudyRecord,
};
use crate::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub control: String,
    pub treatments: Vec<String>,
    pub distance_outcome: String,
    pub similarity_outcome: String,
    pub confounders: Vec<String>,
    pub effect_modifiers: Vec<String>,
    pub methods: Vec<Method>,
    pub refuters: Vec<Refuter>,
    pub estimator: EstimatorParams,
    pub refute: RefuteParams,
    pub correlation: CorrelationMethod,
    /// Screening band for |r| with the distance outcome.
    pub screen_band: (f64, f64),
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            control: "control".into(),
            treatments: vec!["T1".into(), "T2".into()],
            distance_outcome: "y_lev_distance".into(),
            similarity_outcome: "y_lev_similarity".into(),
            confounders: default_confounders(),
            effect_modifiers: default_effect_modifiers(),
            methods: Method::ALL.to_vec(),
            refuters: Refuter::ALL.to_vec(),
            estimator: EstimatorParams::default(),
            refute: RefuteParams::default(),
            correlation: CorrelationMethod::Pearson,
            screen_band: (0.4, 0.8),
            seed: 0,
        }
    }
}

impl StudyConfig {
    pub fn groups(&self) -> Vec<String> {
        std::iter::once(self.control.clone())
            .chain(self.treatments.iter().cloned())
            .collect()
    }

    fn scm(&self, treatment: &str, outcome: &str) -> ScmSpec {
        ScmSpec {
            treatment: treatment.into(),
            control: self.control.clone(),
            outcome: outcome.into(),
            confounders: self.confounders.clone(),
            effect_modifiers: self.effect_modifiers.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub group: String,
    pub n: usize,
    pub bleu: f64,
    pub codebleu: f64,
    pub lev_similarity_mean: f64,
    pub lev_similarity_std: f64,
    pub lev_distance_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableRole {
    Confounder,
    EffectModifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub group: String,
    pub variable: String,
    pub role: VariableRole,
    /// `None` when either series is constant in the group.
    pub r_distance: Option<f64>,
    pub r_similarity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Ate,
    Placebo,
    Rcc,
    Subset,
}

impl EffectKind {
    pub const ALL: [EffectKind; 4] = [EffectKind::Ate, EffectKind::Placebo, EffectKind::Rcc, EffectKind::Subset];

    pub fn label(self) -> &'static str {
        match self {
            EffectKind::Ate => "ATE",
            EffectKind::Placebo => "Placebo",
            EffectKind::Rcc => "RCC",
            EffectKind::Subset => "Subset",
        }
    }

    fn from_refuter(r: Refuter) -> Self {
        match r {
            Refuter::Placebo => EffectKind::Placebo,
            Refuter::RandomCommonCause => EffectKind::Rcc,
            Refuter::Subset => EffectKind::Subset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub method: Method,
    pub kind: EffectKind,
    pub treatment: String,
    pub outcome: String,
    /// `None` when the estimator or refuter failed; see `error`.
    pub value: Option<f64>,
    pub pct: Option<f64>,
    /// Refuter verdict; `None` for the ATE row itself.
    pub stable: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResults {
    pub metrics: Vec<MetricSummary>,
    pub correlations: Vec<CorrelationRow>,
    pub screened: Vec<ScreenedCandidate>,
    pub effects: Vec<EffectRow>,
}

fn column(records: &[&StudyRecord], name: &str) -> Result<Vec<f64>, CausalError> {
    records
        .iter()
        .map(|r| {
            r.values.get(name).copied().ok_or_else(|| CausalError::MissingVariable {
                point_id: r.point_id.clone(),
                treatment: r.treatment.clone(),
                name: name.to_owned(),
            })
        })
        .collect()
}

fn group_rows<'a>(records: &'a [StudyRecord], group: &str) -> Vec<&'a StudyRecord> {
    let mut rows: Vec<&StudyRecord> = records.iter().filter(|r| r.treatment == group).collect();
    rows.sort_by(|a, b| a.point_id.cmp(&b.point_id));
    rows
}

/// Contrast jobs run in parallel; each is single-threaded and seeded by
/// its own label, so results do not depend on scheduling.
pub fn run_study(records: &[StudyRecord], cfg: &StudyConfig) -> Result<StudyResults, CausalError> {
    let mut metrics = Vec::new();
    let mut correlations = Vec::new();
    for g in cfg.groups() {
        let rows = group_rows(records, &g);
        if rows.is_empty() {
            return Err(CausalError::InsufficientData(format!("no records for group `{g}`")));
        }
        let sim = column(&rows, &cfg.similarity_outcome)?;
        let dist = column(&rows, &cfg.distance_outcome)?;
        metrics.push(MetricSummary {
            group: g.clone(),
            n: rows.len(),
            bleu: mean(&column(&rows, "y_bleu")?),
            codebleu: mean(&column(&rows, "y_codebleu")?),
            lev_similarity_mean: mean(&sim),
            lev_similarity_std: sample_std(&sim),
            lev_distance_mean: mean(&dist),
        });
        let vars = cfg
            .confounders
            .iter()
            .map(|v| (v, VariableRole::Confounder))
            .chain(cfg.effect_modifiers.iter().map(|v| (v, VariableRole::EffectModifier)));
        for (var, role) in vars {
            let x = column(&rows, var)?;
            correlations.push(CorrelationRow {
                group: g.clone(),
                variable: var.clone(),
                role,
                r_distance: correlation(&x, &dist, cfg.correlation).ok(),
                r_similarity: correlation(&x, &sim, cfg.correlation).ok(),
            });
        }
    }

    let candidates: Vec<String> = cfg
        .confounders
        .iter()
        .chain(&cfg.effect_modifiers)
        .cloned()
        .collect();
    let in_study: Vec<StudyRecord> = records
        .iter()
        .filter(|r| cfg.groups().contains(&r.treatment))
        .cloned()
        .collect();
    let screened = screen_confounders(
        &in_study,
        &candidates,
        &cfg.distance_outcome,
        cfg.screen_band.0,
        cfg.screen_band.1,
        cfg.correlation,
    );

    let mut jobs = Vec::new();
    for t in &cfg.treatments {
        for outcome in [&cfg.distance_outcome, &cfg.similarity_outcome] {
            for m in &cfg.methods {
                jobs.push((t.clone(), outcome.clone(), *m));
            }
        }
    }
    // A contrast the data cannot support (no common support, a stratum
    // layout without both arms) yields NA rows instead of sinking the study.
    let per_job: Vec<Vec<EffectRow>> = jobs
        .par_iter()
        .map(|(t, outcome, method)| -> Result<Vec<EffectRow>, CausalError> {
            let scm = cfg.scm(t, outcome);
            let data = BinaryDataset::from_records(records, &scm)?;
            let unit = is_unit_scaled(outcome);
            let row = |kind, result: Result<(f64, Option<bool>), String>| {
                let (value, stable, error) = match result {
                    Ok((v, s)) => (Some(v), s, None),
                    Err(e) => (None, None, Some(e)),
                };
                EffectRow {
                    method: *method,
                    kind,
                    treatment: t.clone(),
                    outcome: outcome.clone(),
                    value,
                    pct: value.filter(|_| unit).map(|v| v * 100.0),
                    stable,
                    error,
                }
            };
            let ate = match estimate_dataset(&data, *method, &cfg.estimator) {
                Ok(e) => e.ate,
                Err(e) => {
                    log::warn!("{method} for {t} on {outcome}: {e}");
                    let msg = e.to_string();
                    return Ok(std::iter::once(EffectKind::Ate)
                        .chain(cfg.refuters.iter().map(|r| EffectKind::from_refuter(*r)))
                        .map(|k| row(k, Err(msg.clone())))
                        .collect());
                }
            };
            let mut rows = vec![row(EffectKind::Ate, Ok((ate, None)))];
            let seed = derive_seed(cfg.seed, &format!("{t}/{outcome}/{method}"));
            for r in &cfg.refuters {
                let res = refute_dataset(&data, ate, *method, *r, &cfg.estimator, &cfg.refute, unit, seed)
                    .map(|res| (res.refuted_ate, Some(res.stable)))
                    .map_err(|e| e.to_string());
                rows.push(row(EffectKind::from_refuter(*r), res));
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;
    let mut effects: Vec<EffectRow> = per_job.into_iter().flatten().collect();
    effects.sort_by(|a, b| {
        let key = |e: &EffectRow| {
            (
                e.method,
                e.kind,
                cfg.treatments.iter().position(|t| *t == e.treatment),
                e.outcome != cfg.distance_outcome,
            )
        };
        key(a).cmp(&key(b))
    });
    Ok(StudyResults {
        metrics,
        correlations,
        screened,
        effects,
    })
}
