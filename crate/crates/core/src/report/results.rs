use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{parse_opt_f64, ReportError};
use crate::causal::{is_unit_scaled, EffectKind, StudyResults, VariableRole};

/// Block names in table order.
pub const BLOCKS: [&str; 3] = ["Performance Metrics", "Correlations", "Causal Effects"];

/// One cell of the results table in long form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub block: String,
    pub group: String,
    pub row: String,
    pub treatment: String,
    pub scale: String,
    /// Empty for undefined correlations.
    pub value: Option<f64>,
    pub annotation: String,
}

const HEADER: [&str; 7] = ["block", "group", "row", "treatment", "scale", "value", "annotation"];

fn cell(block: usize, group: &str, row: &str, treatment: &str, scale: &str, value: Option<f64>) -> ResultRow {
    ResultRow {
        block: BLOCKS[block].to_owned(),
        group: group.to_owned(),
        row: row.to_owned(),
        treatment: treatment.to_owned(),
        scale: scale.to_owned(),
        value,
        annotation: String::new(),
    }
}

fn mark_highest(rows: &mut [ResultRow], scale: &str) {
    let best = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.scale == scale)
        .filter_map(|(i, r)| r.value.map(|v| (i, v.abs())))
        .fold(None::<(usize, f64)>, |acc, (i, v)| match acc {
            Some((_, b)) if b >= v => acc,
            _ => Some((i, v)),
        });
    if let Some((i, _)) = best {
        rows[i].annotation = "highest".into();
    }
}

/// Flatten a study into the three result blocks.
pub fn results_table(results: &StudyResults) -> Result<Vec<ResultRow>, ReportError> {
    if results.metrics.is_empty() {
        return Err(ReportError::MissingBlock(BLOCKS[0]));
    }
    if results.correlations.is_empty() {
        return Err(ReportError::MissingBlock(BLOCKS[1]));
    }
    if results.effects.is_empty() {
        return Err(ReportError::MissingBlock(BLOCKS[2]));
    }
    if results.effects.iter().all(|e| e.kind == EffectKind::Ate) {
        return Err(ReportError::EmptyRefutations);
    }

    let mut out = Vec::new();
    for m in &results.metrics {
        out.push(cell(0, "Distance", "Bleu", &m.group, "score", Some(m.bleu)));
        out.push(cell(0, "Distance", "CodeBleu", &m.group, "score", Some(m.codebleu)));
        out.push(cell(0, "Similarity", "Avg. Lev.", &m.group, "mean", Some(m.lev_similarity_mean)));
        out.push(cell(0, "Similarity", "Avg. Lev.", &m.group, "std", Some(m.lev_similarity_std)));
    }

    let mut corr = Vec::new();
    for role in [VariableRole::Confounder, VariableRole::EffectModifier] {
        let group = match role {
            VariableRole::Confounder => "Confounders",
            VariableRole::EffectModifier => "Effect Modifiers",
        };
        for c in results.correlations.iter().filter(|c| c.role == role) {
            corr.push(cell(1, group, &c.variable, &c.group, "distance", c.r_distance));
            corr.push(cell(1, group, &c.variable, &c.group, "similarity", c.r_similarity));
        }
    }
    mark_highest(&mut corr, "distance");
    mark_highest(&mut corr, "similarity");
    out.extend(corr);

    for e in &results.effects {
        let (scale, value) = if is_unit_scaled(&e.outcome) {
            ("similarity_pct", e.pct)
        } else {
            ("distance", e.value)
        };
        let mut row = cell(2, e.method.label(), e.kind.label(), &e.treatment, scale, value);
        row.annotation = match (e.kind, e.stable) {
            _ if e.error.is_some() => "failed",
            (EffectKind::Placebo, Some(true)) => "null-effect",
            (EffectKind::Placebo, Some(false)) => "non-null",
            (_, Some(true)) => "stable",
            (_, Some(false)) => "unstable",
            (_, None) => "",
        }
        .into();
        out.push(row);
    }
    Ok(out)
}

fn format_value(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.block.as_str(),
            &r.group,
            &r.row,
            &r.treatment,
            &r.scale,
            &format_value(r.value),
            &r.annotation,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, ReportError> {
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().ne(HEADER) {
        return Err(ReportError::Malformed("unexpected results header".into()));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ResultRow {
                block: rec[0].to_owned(),
                group: rec[1].to_owned(),
                row: rec[2].to_owned(),
                treatment: rec[3].to_owned(),
                scale: rec[4].to_owned(),
                value: parse_opt_f64(&rec[5])?,
                annotation: rec[6].to_owned(),
            })
        })
        .collect()
}

fn ordered<'a>(values: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = Vec::new();
    for v in values {
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    seen
}

fn fmt_num(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(x) => format!("{x:.decimals$}"),
        None => "NA".into(),
    }
}

/// Render the table as Markdown, one section per block with treatments as
/// columns. Highest correlations are bold; refuter verdicts follow values.
pub fn results_markdown(rows: &[ResultRow]) -> Result<String, ReportError> {
    for b in BLOCKS {
        if !rows.iter().any(|r| r.block == b) {
            return Err(ReportError::MissingBlock(b));
        }
    }
    let block = |b: usize| rows.iter().filter(move |r| r.block == BLOCKS[b]);
    let index: BTreeMap<(&str, &str, &str, &str, &str), &ResultRow> = rows
        .iter()
        .map(|r| ((r.block.as_str(), r.group.as_str(), r.row.as_str(), r.treatment.as_str(), r.scale.as_str()), r))
        .collect();
    let get = |b: usize, g: &str, row: &str, t: &str, s: &str| index.get(&(BLOCKS[b], g, row, t, s)).copied();

    let mut md = String::new();

    let groups = ordered(block(0).map(|r| r.treatment.as_str()));
    let _ = writeln!(md, "## {}\n", BLOCKS[0]);
    let _ = writeln!(md, "| | | {} |", groups.join(" | "));
    let _ = writeln!(md, "|---|---|{}", "---|".repeat(groups.len()));
    for (g, row) in ordered(block(0).map(|r| r.row.as_str()))
        .into_iter()
        .filter_map(|row| block(0).find(|r| r.row == row).map(|r| (r.group.as_str(), row)))
    {
        let cells: Vec<String> = groups
            .iter()
            .map(|t| match get(0, g, row, t, "score") {
                Some(r) => fmt_num(r.value, 3),
                None => format!(
                    "{} ± {}",
                    fmt_num(get(0, g, row, t, "mean").and_then(|r| r.value), 2),
                    fmt_num(get(0, g, row, t, "std").and_then(|r| r.value), 2)
                ),
            })
            .collect();
        let _ = writeln!(md, "| {g} | {row} | {} |", cells.join(" | "));
    }

    let groups = ordered(block(1).map(|r| r.treatment.as_str()));
    let _ = writeln!(md, "\n## {}\n", BLOCKS[1]);
    let heads: Vec<String> = groups.iter().map(|g| format!("{g} Dist. | {g} Sim.")).collect();
    let _ = writeln!(md, "| | | {} |", heads.join(" | "));
    let _ = writeln!(md, "|---|---|{}", "---|".repeat(2 * groups.len()));
    let mut seen = Vec::new();
    for r in block(1) {
        if seen.contains(&(r.group.as_str(), r.row.as_str())) {
            continue;
        }
        seen.push((r.group.as_str(), r.row.as_str()));
        let mut cells = Vec::new();
        for t in &groups {
            for s in ["distance", "similarity"] {
                let c = get(1, &r.group, &r.row, t, s);
                let text = fmt_num(c.and_then(|c| c.value), 2);
                cells.push(match c {
                    Some(c) if c.annotation == "highest" => format!("**{text}**"),
                    _ => text,
                });
            }
        }
        let _ = writeln!(md, "| {} | {} | {} |", r.group, r.row, cells.join(" | "));
    }

    let treatments = ordered(block(2).map(|r| r.treatment.as_str()));
    let _ = writeln!(md, "\n## {}\n", BLOCKS[2]);
    let heads: Vec<String> = treatments.iter().map(|t| format!("{t} Dist. | {t} Sim.%")).collect();
    let _ = writeln!(md, "| | | {} |", heads.join(" | "));
    let _ = writeln!(md, "|---|---|{}", "---|".repeat(2 * treatments.len()));
    let mut seen = Vec::new();
    for r in block(2) {
        if seen.contains(&(r.group.as_str(), r.row.as_str())) {
            continue;
        }
        seen.push((r.group.as_str(), r.row.as_str()));
        let mut cells = Vec::new();
        for t in &treatments {
            for (s, suffix) in [("distance", ""), ("similarity_pct", "%")] {
                cells.push(match get(2, &r.group, &r.row, t, s) {
                    Some(c) => {
                        let suffix = if c.value.is_some() { suffix } else { "" };
                        let mut text = format!("{}{suffix}", fmt_num(c.value, 2));
                        if !c.annotation.is_empty() {
                            let _ = write!(text, " ({})", c.annotation);
                        }
                        text
                    }
                    None => "-".into(),
                });
            }
        }
        let _ = writeln!(md, "| {} | {} | {} |", r.group, r.row, cells.join(" | "));
    }
    Ok(md)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::{CorrelationRow, EffectRow, MetricSummary, Method};

    fn study() -> StudyResults {
        let metric = |g: &str| MetricSummary {
            group: g.into(),
            n: 10,
            bleu: 0.4,
            codebleu: 0.45,
            lev_similarity_mean: 0.4,
            lev_similarity_std: 0.2,
            lev_distance_mean: 100.0,
        };
        let corr = |g: &str, v: &str, role, r: Option<f64>| CorrelationRow {
            group: g.into(),
            variable: v.into(),
            role,
            r_distance: r,
            r_similarity: r.map(|x| -x / 2.0),
        };
        let effect = |kind, outcome: &str, value: f64, stable| EffectRow {
            method: Method::Stratification,
            kind,
            treatment: "T1".into(),
            outcome: outcome.into(),
            value: Some(value),
            pct: (outcome == "y_lev_similarity").then_some(value * 100.0),
            stable,
            error: None,
        };
        StudyResults {
            metrics: vec![metric("control"), metric("T1")],
            correlations: vec![
                corr("control", "nloc", VariableRole::Confounder, Some(0.6)),
                corr("T1", "nloc", VariableRole::Confounder, Some(-0.8)),
                corr("T1", "complexity", VariableRole::EffectModifier, None),
            ],
            screened: vec![],
            effects: vec![
                effect(EffectKind::Ate, "y_lev_distance", 111.05, None),
                effect(EffectKind::Ate, "y_lev_similarity", -0.051, None),
                effect(EffectKind::Placebo, "y_lev_similarity", 0.0004, Some(true)),
                effect(EffectKind::Subset, "y_lev_similarity", -0.052, Some(true)),
            ],
        }
    }

    #[test]
    fn blocks_in_order_and_annotations() {
        let rows = results_table(&study()).unwrap();
        let order = ordered(rows.iter().map(|r| r.block.as_str()));
        assert_eq!(order, BLOCKS.to_vec());
        let highest: Vec<_> = rows.iter().filter(|r| r.annotation == "highest").collect();
        assert_eq!(highest.len(), 2);
        assert_eq!(highest[0].value, Some(-0.8));
        assert!(rows.iter().any(|r| r.row == "Placebo" && r.annotation == "null-effect"));
        let pct = rows.iter().find(|r| r.row == "ATE" && r.scale == "similarity_pct").unwrap();
        assert!((pct.value.unwrap() + 5.1).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let rows = results_table(&study()).unwrap();
        let mut a = Vec::new();
        write_results_csv(&rows, &mut a).unwrap();
        let back = read_results_csv(&a[..]).unwrap();
        assert_eq!(back, rows);
        let mut b = Vec::new();
        write_results_csv(&results_table(&study()).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_blocks_are_named() {
        let mut s = study();
        s.correlations.clear();
        assert!(matches!(results_table(&s), Err(ReportError::MissingBlock("Correlations"))));
        let mut s = study();
        s.effects.retain(|e| e.kind == EffectKind::Ate);
        assert!(matches!(results_table(&s), Err(ReportError::EmptyRefutations)));
    }

    #[test]
    fn markdown_has_three_sections() {
        let md = results_markdown(&results_table(&study()).unwrap()).unwrap();
        let pos: Vec<usize> = BLOCKS.iter().map(|b| md.find(&format!("## {b}")).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(md.contains("**-0.80**"));
        assert!(md.contains("0.40 ± 0.20"));
        assert!(md.contains("NA"));
    }
}
