use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{parse_f64, ReportError};
use crate::llm_eval::{EvalRecord, TreatmentId};
use crate::testbeds::Testbed;
use crate::tokenization::{classify_tokens, BpeModel, TaxonomyClass, TaxonomyTable};

/// Group name of the reference methods.
pub const GROUND_TRUTH: &str = "ground_truth";

/// Similarity thresholds 0.00, 0.01, ..., 1.00.
pub const SIMILARITY_LEVELS: usize = 101;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyCount {
    pub group: String,
    pub class: TaxonomyClass,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenFrequency {
    pub group: String,
    pub token: String,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDistMeta {
    pub measure: String,
    pub log_base: String,
    pub maximum: f64,
    /// Distance of each group's token distribution to the ground truth.
    pub distance_to_ground_truth: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionPoint {
    pub group: String,
    pub level: f64,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploratoryFigures {
    pub taxonomy: Vec<TaxonomyCount>,
    pub tokens: Vec<TokenFrequency>,
    pub meta: TokenDistMeta,
    pub proportions: Vec<ProportionPoint>,
}

/// Jensen–Shannon distance (square root of the divergence, natural log)
/// between two count vectors keyed by token. Ranges over [0, √ln 2].
pub fn jensen_shannon_distance(p: &BTreeMap<String, usize>, q: &BTreeMap<String, usize>) -> f64 {
    let np: usize = p.values().sum();
    let nq: usize = q.values().sum();
    match (np, nq) {
        (0, 0) => return 0.0,
        (0, _) | (_, 0) => return std::f64::consts::LN_2.sqrt(),
        _ => {}
    }
    let mut keys: Vec<&String> = p.keys().chain(q.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut js = 0.0;
    for k in keys {
        let pi = p.get(k).copied().unwrap_or(0) as f64 / np as f64;
        let qi = q.get(k).copied().unwrap_or(0) as f64 / nq as f64;
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            js += 0.5 * pi * (pi / m).ln();
        }
        if qi > 0.0 {
            js += 0.5 * qi * (qi / m).ln();
        }
    }
    js.max(0.0).sqrt()
}

/// Fraction of `similarities` at or above each level in
/// [`SIMILARITY_LEVELS`] steps of 0.01.
pub fn similarity_proportion(similarities: &[f64]) -> Vec<(f64, f64)> {
    (0..SIMILARITY_LEVELS)
        .map(|i| {
            let level = i as f64 / 100.0;
            let above = similarities.iter().filter(|s| **s >= level).count();
            let prop = if similarities.is_empty() {
                0.0
            } else {
                above as f64 / similarities.len() as f64
            };
            (level, prop)
        })
        .collect()
}

/// Token taxonomy counts, token distributions and similarity proportion
/// curves for the ground truth and every treatment present in `records`.
pub fn exploratory_figures(
    records: &[EvalRecord],
    testbed: &Testbed,
    model: &BpeModel,
    table: &TaxonomyTable,
) -> ExploratoryFigures {
    let mut groups: Vec<(String, Vec<String>, Vec<f64>)> = Vec::new();
    let truth_tokens = testbed
        .points
        .iter()
        .flat_map(|p| model.token_texts(&p.point.raw.code))
        .collect();
    groups.push((GROUND_TRUTH.to_owned(), truth_tokens, vec![1.0; testbed.points.len()]));
    for t in TreatmentId::ALL {
        let mut rows: Vec<&EvalRecord> = records.iter().filter(|r| r.treatment == t).collect();
        if rows.is_empty() {
            continue;
        }
        rows.sort_by(|a, b| a.point_id.cmp(&b.point_id));
        let tokens = rows.iter().flat_map(|r| model.token_texts(&r.generated)).collect();
        let sims = rows.iter().map(|r| r.y_lev_similarity).collect();
        groups.push((t.to_string(), tokens, sims));
    }

    let mut taxonomy = Vec::new();
    let mut tokens = Vec::new();
    let mut counts_by_group = Vec::new();
    let mut proportions = Vec::new();
    for (name, toks, sims) in &groups {
        for (class, count) in classify_tokens(toks, table) {
            taxonomy.push(TaxonomyCount {
                group: name.clone(),
                class,
                count,
            });
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in toks {
            *counts.entry(t.clone()).or_default() += 1;
        }
        let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        for (token, count) in ranked {
            tokens.push(TokenFrequency {
                group: name.clone(),
                token: token.clone(),
                count: *count,
                frequency: *count as f64 / toks.len() as f64,
            });
        }
        counts_by_group.push((name.clone(), counts));
        for (level, proportion) in similarity_proportion(sims) {
            proportions.push(ProportionPoint {
                group: name.clone(),
                level,
                proportion,
            });
        }
    }
    let truth = &counts_by_group[0].1;
    let distance_to_ground_truth = counts_by_group
        .iter()
        .map(|(g, c)| (g.clone(), jensen_shannon_distance(c, truth)))
        .collect();
    ExploratoryFigures {
        taxonomy,
        tokens,
        meta: TokenDistMeta {
            measure: "jensen-shannon distance (sqrt of divergence)".into(),
            log_base: "e".into(),
            maximum: std::f64::consts::LN_2.sqrt(),
            distance_to_ground_truth,
        },
        proportions,
    }
}

pub fn write_taxonomy_counts_csv<W: Write>(rows: &[TaxonomyCount], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "class", "count"])?;
    for r in rows {
        w.write_record([r.group.as_str(), r.class.as_str(), &r.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_taxonomy_counts_csv<R: Read>(input: R) -> Result<Vec<TaxonomyCount>, ReportError> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TaxonomyCount {
                group: rec[0].to_owned(),
                class: rec[1].parse().map_err(ReportError::Malformed)?,
                count: rec[2]
                    .parse()
                    .map_err(|_| ReportError::Malformed(format!("bad count `{}`", &rec[2])))?,
            })
        })
        .collect()
}

pub fn write_token_dist_csv<W: Write>(rows: &[TokenFrequency], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "token", "count", "frequency"])?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            r.token.clone(),
            r.count.to_string(),
            r.frequency.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_token_dist_csv<R: Read>(input: R) -> Result<Vec<TokenFrequency>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::None).from_reader(input);
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TokenFrequency {
                group: rec[0].to_owned(),
                token: rec[1].to_owned(),
                count: rec[2]
                    .parse()
                    .map_err(|_| ReportError::Malformed(format!("bad count `{}`", &rec[2])))?,
                frequency: parse_f64(&rec[3])?,
            })
        })
        .collect()
}

pub fn write_similarity_proportion_csv<W: Write>(rows: &[ProportionPoint], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "level", "proportion"])?;
    for r in rows {
        w.write_record([r.group.clone(), format!("{:.2}", r.level), r.proportion.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_similarity_proportion_csv<R: Read>(input: R) -> Result<Vec<ProportionPoint>, ReportError> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ProportionPoint {
                group: rec[0].to_owned(),
                level: parse_f64(&rec[1])?,
                proportion: parse_f64(&rec[2])?,
            })
        })
        .collect()
}
