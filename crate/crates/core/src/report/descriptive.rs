use std::io::{Read, Write};

use super::{parse_f64, ReportError};
use crate::causal::mean;
use crate::testbeds::{DedupReport, Testbed, TestbedName};

/// Feature columns of the descriptive table, confounders first.
pub const DESCRIPTIVE_FEATURES: [&str; 8] = [
    "n_whitespaces",
    "nloc",
    "token_count",
    "n_ast_errors",
    "n_ast_levels",
    "n_ast_nodes",
    "complexity",
    "n_identifiers",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStat {
    pub feature: String,
    pub avg: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptiveRow {
    pub testbed: String,
    pub size: usize,
    pub stats: Vec<FeatureStat>,
}

/// One row per testbed with avg and std of every descriptive feature.
pub fn descriptive_table(testbeds: &[Testbed]) -> Result<Vec<DescriptiveRow>, ReportError> {
    testbeds
        .iter()
        .map(|tb| {
            if tb.points.is_empty() {
                return Err(ReportError::EmptyTestbed(tb.name.to_string()));
            }
            let stats = DESCRIPTIVE_FEATURES
                .iter()
                .map(|f| {
                    let xs: Vec<f64> = tb
                        .points
                        .iter()
                        .map(|p| p.point.features.get(f).expect("descriptive features are numeric"))
                        .collect();
                    FeatureStat {
                        feature: (*f).to_owned(),
                        avg: mean(&xs),
                        std: population_std(&xs),
                    }
                })
                .collect();
            Ok(DescriptiveRow {
                testbed: tb.name.to_string(),
                size: tb.points.len(),
                stats,
            })
        })
        .collect()
}

fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn descriptive_header() -> Vec<String> {
    let mut h = vec!["testbed".to_owned(), "size".to_owned()];
    for f in DESCRIPTIVE_FEATURES {
        h.push(format!("{f}_avg"));
        h.push(format!("{f}_std"));
    }
    h
}

/// Values are written with two decimals.
pub fn write_descriptive_csv<W: Write>(rows: &[DescriptiveRow], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(descriptive_header())?;
    for r in rows {
        let mut rec = vec![r.testbed.clone(), r.size.to_string()];
        for s in &r.stats {
            rec.push(format!("{:.2}", s.avg));
            rec.push(format!("{:.2}", s.std));
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_descriptive_csv<R: Read>(input: R) -> Result<Vec<DescriptiveRow>, ReportError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != descriptive_header() {
        return Err(ReportError::Malformed("unexpected descriptive header".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let size = rec[1]
            .parse()
            .map_err(|_| ReportError::Malformed(format!("bad size `{}`", &rec[1])))?;
        let stats = DESCRIPTIVE_FEATURES
            .iter()
            .enumerate()
            .map(|(i, f)| {
                Ok(FeatureStat {
                    feature: (*f).to_owned(),
                    avg: parse_f64(&rec[2 + 2 * i])?,
                    std: parse_f64(&rec[3 + 2 * i])?,
                })
            })
            .collect::<Result<_, ReportError>>()?;
        rows.push(DescriptiveRow {
            testbed: rec[0].to_owned(),
            size,
            stats,
        });
    }
    Ok(rows)
}

/// One line of the dedup summary.
#[derive(Debug, Clone, PartialEq)]
pub struct DedupRow {
    pub testbed: TestbedName,
    pub report: DedupReport,
}

const DEDUP_HEADER: [&str; 7] = ["task", "testbed", "io", "before", "dupes", "rate", "after"];

pub fn write_dedup_csv<W: Write>(rows: &[DedupRow], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DEDUP_HEADER)?;
    for r in rows {
        w.write_record([
            r.testbed.task().as_str().to_owned(),
            r.testbed.to_string(),
            r.testbed.io_kind().map(|k| k.as_str()).unwrap_or("").to_owned(),
            r.report.before.to_string(),
            r.report.dupes.to_string(),
            r.report.rate_percent(),
            r.report.after.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dedup_csv<R: Read>(input: R) -> Result<Vec<DedupRow>, ReportError> {
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().ne(DEDUP_HEADER) {
        return Err(ReportError::Malformed("unexpected dedup header".into()));
    }
    let count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| ReportError::Malformed(format!("bad count `{s}`")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let testbed: TestbedName = rec[1].parse().map_err(ReportError::Malformed)?;
        let report = DedupReport::new(count(&rec[3])?, count(&rec[4])?);
        if report.after != count(&rec[6])? || report.rate_percent() != rec[5] {
            return Err(ReportError::Malformed(format!("inconsistent dedup row for {testbed}")));
        }
        rows.push(DedupRow { testbed, report });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DataPoint;
    use crate::ingest::tests::sample;
    use crate::testbeds::TestbedPoint;

    fn testbed(codes: &[&str]) -> Testbed {
        Testbed {
            name: TestbedName::RandomCut,
            seed: 0,
            points: codes
                .iter()
                .map(|c| TestbedPoint::plain(DataPoint::from_raw(sample(c, None))))
                .collect(),
        }
    }

    #[test]
    fn complexity_one_and_three() {
        let tb = testbed(&[
            "def f(x):\n    return x\n",
            "def g(x):\n    if x:\n        return 1\n    if x > 2:\n        return 2\n    return 3\n",
        ]);
        let rows = descriptive_table(&[tb]).unwrap();
        let c = rows[0].stats.iter().find(|s| s.feature == "complexity").unwrap();
        assert_eq!((c.avg, c.std), (2.0, 1.0));
        let mut buf = Vec::new();
        write_descriptive_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains(",2.00,1.00,"), "{text}");
        let back = read_descriptive_csv(&buf[..]).unwrap();
        let mut again = Vec::new();
        write_descriptive_csv(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn identical_points_have_zero_std() {
        let code = "def f(x):\n    return x\n";
        let rows = descriptive_table(&[testbed(&[code, code, code])]).unwrap();
        assert!(rows[0].stats.iter().all(|s| s.std == 0.0));
    }

    #[test]
    fn empty_testbed_is_error() {
        assert!(matches!(descriptive_table(&[testbed(&[])]), Err(ReportError::EmptyTestbed(_))));
    }

    #[test]
    fn dedup_round_trip() {
        let rows = vec![
            DedupRow {
                testbed: TestbedName::RandomCut,
                report: DedupReport::new(3000, 69),
            },
            DedupRow {
                testbed: TestbedName::CommitGen,
                report: DedupReport::new(3000, 81),
            },
        ];
        let mut buf = Vec::new();
        write_dedup_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("code completion,RandomCut,code->code,3000,69,2.30%,2931"), "{text}");
        assert_eq!(read_dedup_csv(&buf[..]).unwrap(), rows);
    }
}
