//! Tables and figure data: descriptive statistics per testbed, the dedup
//! summary, the study results table, and exploratory token and similarity
//! distributions.

mod descriptive;
mod figures;
mod results;
mod svg;

pub use descriptive::{
    descriptive_table, read_dedup_csv, read_descriptive_csv, write_dedup_csv, write_descriptive_csv,
    DedupRow, DescriptiveRow, FeatureStat, DESCRIPTIVE_FEATURES,
};
pub use figures::{
    exploratory_figures, jensen_shannon_distance, read_similarity_proportion_csv,
    read_taxonomy_counts_csv, read_token_dist_csv, similarity_proportion, write_similarity_proportion_csv,
    write_taxonomy_counts_csv, write_token_dist_csv, ExploratoryFigures, ProportionPoint, TaxonomyCount,
    TokenDistMeta, TokenFrequency, GROUND_TRUTH, SIMILARITY_LEVELS,
};
pub use results::{
    read_results_csv, results_markdown, results_table, write_results_csv, ResultRow, BLOCKS,
};
pub use svg::{proportion_svg, taxonomy_svg, token_rank_svg};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("testbed {0} has no points")]
    EmptyTestbed(String),
    #[error("results block `{0}` is missing")]
    MissingBlock(&'static str),
    #[error("no refutation rows in the causal effects")]
    EmptyRefutations,
    #[error("malformed report file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_f64(s: &str) -> Result<f64, ReportError> {
    s.trim()
        .parse()
        .map_err(|_| ReportError::Malformed(format!("`{s}` is not a number")))
}

fn parse_opt_f64(s: &str) -> Result<Option<f64>, ReportError> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}
