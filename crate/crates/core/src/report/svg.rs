//! Minimal static SVG plots of the figure data.

use std::fmt::Write as _;

use super::figures::{ProportionPoint, TaxonomyCount, TokenFrequency};
use crate::tokenization::TaxonomyClass;

const W: f64 = 640.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948"];

fn groups<'a>(names: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for n in names {
        if !out.contains(&n) {
            out.push(n);
        }
    }
    out
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{y}" x2="{x}" y2="{y}" stroke="black"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{y}" stroke="black"/>"#,
        x = W - MARGIN,
        y = H - MARGIN
    );
    s
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, g) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y0:.1}" width="10" height="10" fill="{c}"/><text x="{tx}" y="{ty:.1}">{t}</text>"#,
            x = W - 150.0,
            y0 = y - 9.0,
            c = COLORS[i % COLORS.len()],
            tx = W - 136.0,
            ty = y,
            t = escape(g)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(s: &mut String, color: &str, pts: &[(f64, f64)]) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
}

/// Grouped bar chart of token counts per taxonomy class.
pub fn taxonomy_svg(rows: &[TaxonomyCount]) -> String {
    let names = groups(rows.iter().map(|r| r.group.as_str()));
    let max = rows.iter().map(|r| r.count).max().unwrap_or(0).max(1) as f64;
    let mut s = open("Token count per taxonomy class");
    let slot = (W - 2.0 * MARGIN) / TaxonomyClass::ALL.len() as f64;
    let bar = slot * 0.8 / names.len().max(1) as f64;
    for (ci, class) in TaxonomyClass::ALL.iter().enumerate() {
        let x0 = MARGIN + slot * ci as f64 + slot * 0.1;
        for (gi, g) in names.iter().enumerate() {
            let count = rows
                .iter()
                .find(|r| r.group == *g && r.class == *class)
                .map_or(0, |r| r.count) as f64;
            let h = (H - 2.0 * MARGIN) * count / max;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{bar:.2}" height="{h:.2}" fill="{}"/>"#,
                x0 + bar * gi as f64,
                H - MARGIN - h,
                COLORS[gi % COLORS.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle" font-size="9">{}</text>"#,
            x0 + slot * 0.4,
            H - MARGIN + 14.0,
            class
        );
    }
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}

/// Proportion of points at or above each similarity level.
pub fn proportion_svg(rows: &[ProportionPoint]) -> String {
    let names = groups(rows.iter().map(|r| r.group.as_str()));
    let mut s = open("Similarity proportion");
    for (gi, g) in names.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.group == *g)
            .map(|r| {
                (
                    MARGIN + (W - 2.0 * MARGIN) * r.level,
                    H - MARGIN - (H - 2.0 * MARGIN) * r.proportion,
                )
            })
            .collect();
        polyline(&mut s, COLORS[gi % COLORS.len()], &pts);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">similarity</text>"#, W / 2.0, H - 12.0);
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}

/// Relative frequency against rank for the `top` most frequent tokens of
/// each group.
pub fn token_rank_svg(rows: &[TokenFrequency], top: usize) -> String {
    let names = groups(rows.iter().map(|r| r.group.as_str()));
    let max = rows.iter().map(|r| r.frequency).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut s = open("Token frequency by rank");
    let span = top.saturating_sub(1).max(1) as f64;
    for (gi, g) in names.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.group == *g)
            .take(top)
            .enumerate()
            .map(|(rank, r)| {
                (
                    MARGIN + (W - 2.0 * MARGIN) * rank as f64 / span,
                    H - MARGIN - (H - 2.0 * MARGIN) * r.frequency / max,
                )
            })
            .collect();
        polyline(&mut s, COLORS[gi % COLORS.len()], &pts);
    }
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}
