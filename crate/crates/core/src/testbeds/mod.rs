//! Deduplicate the mined corpus and derive the task testbeds.

mod cut;
mod dedup;
mod sample;

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::features::{is_valid_docstring, DataPoint};
use crate::jsonl::{self, JsonlError};
use crate::tokenization::BpeModel;

pub use cut::{cut_candidates, is_cut_eligible, random_cut, Cut};
pub use dedup::{dedup, dedup_sets, jaccard_similarity, token_set, DedupReport, DEFAULT_THRESHOLD};
pub use sample::sample_points;

#[derive(Debug, thiserror::Error)]
pub enum TestbedError {
    #[error("dedup threshold must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("cannot sample {requested} points from {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("testbed {testbed}: only {eligible} eligible points, {required} required")]
    InsufficientPoints {
        testbed: TestbedName,
        eligible: usize,
        required: usize,
    },
    #[error("point {point_id} has no valid docstring")]
    MissingDocstring { point_id: String },
    #[error("point {point_id} has no cut position after its signature")]
    NotCuttable { point_id: String },
    #[error("line {line}: expected testbed {expected}, found {found}")]
    MixedTestbed {
        line: usize,
        expected: TestbedName,
        found: String,
    },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestbedName {
    RawData,
    RawDataDocstring,
    RandomCut,
    WithDocstring,
    FromDocstring,
    CommitGen,
    SummarizationGen,
}

impl TestbedName {
    pub const ALL: [TestbedName; 7] = [
        TestbedName::RawData,
        TestbedName::RawDataDocstring,
        TestbedName::RandomCut,
        TestbedName::WithDocstring,
        TestbedName::FromDocstring,
        TestbedName::CommitGen,
        TestbedName::SummarizationGen,
    ];

    pub const TASKS: [TestbedName; 5] = [
        TestbedName::RandomCut,
        TestbedName::WithDocstring,
        TestbedName::FromDocstring,
        TestbedName::CommitGen,
        TestbedName::SummarizationGen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestbedName::RawData => "RawData",
            TestbedName::RawDataDocstring => "RawDataDocstring",
            TestbedName::RandomCut => "RandomCut",
            TestbedName::WithDocstring => "WithDocstring",
            TestbedName::FromDocstring => "FromDocstring",
            TestbedName::CommitGen => "CommitGen",
            TestbedName::SummarizationGen => "SummarizationGen",
        }
    }

    pub fn task(self) -> Task {
        match self {
            TestbedName::RawData | TestbedName::RawDataDocstring => Task::Raw,
            TestbedName::RandomCut | TestbedName::WithDocstring | TestbedName::FromDocstring => {
                Task::CodeCompletion
            }
            TestbedName::CommitGen => Task::CodeGeneration,
            TestbedName::SummarizationGen => Task::Summarization,
        }
    }

    pub fn io_kind(self) -> Option<IoKind> {
        match self {
            TestbedName::RawData | TestbedName::RawDataDocstring => None,
            TestbedName::RandomCut => Some(IoKind::CodeToCode),
            TestbedName::WithDocstring => Some(IoKind::CodeTextToCode),
            TestbedName::FromDocstring => Some(IoKind::TextToCode),
            TestbedName::CommitGen | TestbedName::SummarizationGen => Some(IoKind::CodeToText),
        }
    }

    /// Whether points carry a cut prefix/suffix.
    pub fn is_cut(self) -> bool {
        matches!(self, TestbedName::RandomCut | TestbedName::WithDocstring)
    }
}

impl fmt::Display for TestbedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestbedName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TestbedName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown testbed `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "code completion")]
    CodeCompletion,
    #[serde(rename = "code generation")]
    CodeGeneration,
    #[serde(rename = "summarization")]
    Summarization,
    #[serde(rename = "raw")]
    Raw,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::CodeCompletion => "code completion",
            Task::CodeGeneration => "code generation",
            Task::Summarization => "summarization",
            Task::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IoKind {
    #[serde(rename = "code->code")]
    CodeToCode,
    #[serde(rename = "code+text->code")]
    CodeTextToCode,
    #[serde(rename = "text->code")]
    TextToCode,
    #[serde(rename = "code->text")]
    CodeToText,
}

impl IoKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IoKind::CodeToCode => "code->code",
            IoKind::CodeTextToCode => "code+text->code",
            IoKind::TextToCode => "text->code",
            IoKind::CodeToText => "code->text",
        }
    }
}

/// A data point inside a testbed.
#[derive(Debug, Clone, PartialEq)]
pub struct TestbedPoint {
    pub point: DataPoint,
    pub cut_prefix: Option<String>,
    pub expected_suffix: Option<String>,
}

impl TestbedPoint {
    pub fn plain(point: DataPoint) -> Self {
        TestbedPoint {
            point,
            cut_prefix: None,
            expected_suffix: None,
        }
    }

    pub fn point_id(&self) -> String {
        self.point.point_id()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Testbed {
    pub name: TestbedName,
    pub seed: u64,
    pub points: Vec<TestbedPoint>,
}

impl Testbed {
    pub fn task(&self) -> Task {
        self.name.task()
    }

    pub fn io_kind(&self) -> Option<IoKind> {
        self.name.io_kind()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Feature JSONL plus `testbed`, `task`, `seed` and, for cut testbeds,
/// `cut_prefix`/`expected_suffix`.
pub fn write_testbed<W: Write>(testbed: &Testbed, out: W) -> Result<(), TestbedError> {
    let mut rows = Vec::with_capacity(testbed.points.len());
    for (index, p) in testbed.points.iter().enumerate() {
        let mut value = serde_json::to_value(&p.point)
            .map_err(|source| JsonlError::Serialize { index, source })?;
        let obj = value.as_object_mut().expect("data point is an object");
        obj.insert("testbed".into(), testbed.name.as_str().into());
        obj.insert("task".into(), testbed.task().as_str().into());
        obj.insert("seed".into(), testbed.seed.into());
        if let Some(prefix) = &p.cut_prefix {
            obj.insert("cut_prefix".into(), prefix.clone().into());
        }
        if let Some(suffix) = &p.expected_suffix {
            obj.insert("expected_suffix".into(), suffix.clone().into());
        }
        rows.push(value);
    }
    Ok(jsonl::write_records(&rows, out)?)
}

/// Read a testbed file written by [`write_testbed`]. An empty file yields an
/// empty testbed called `fallback`.
pub fn read_testbed<R: BufRead>(input: R, fallback: TestbedName) -> Result<Testbed, TestbedError> {
    let rows = jsonl::read_with(input, |mut value| {
        let obj = value.as_object_mut().ok_or("expected a JSON object")?;
        let mut take_str = |k: &str| -> Result<Option<String>, String> {
            match obj.remove(k) {
                None | Some(serde_json::Value::Null) => Ok(None),
                Some(serde_json::Value::String(s)) => Ok(Some(s)),
                Some(other) => Err(format!("`{k}` must be a string, got {other}")),
            }
        };
        let name = take_str("testbed")?.ok_or("missing field `testbed`")?;
        take_str("task")?;
        let cut_prefix = take_str("cut_prefix")?;
        let expected_suffix = take_str("expected_suffix")?;
        let seed = obj.remove("seed").and_then(|s| s.as_u64()).unwrap_or(0);
        let point = DataPoint::from_json(value)?;
        Ok((
            name,
            seed,
            TestbedPoint {
                point,
                cut_prefix,
                expected_suffix,
            },
        ))
    })?;
    let Some((first, seed, _)) = rows.first() else {
        return Ok(Testbed {
            name: fallback,
            seed: 0,
            points: Vec::new(),
        });
    };
    let name: TestbedName = first.parse().map_err(|_| TestbedError::MixedTestbed {
        line: 1,
        expected: fallback,
        found: first.clone(),
    })?;
    let seed = *seed;
    let mut points = Vec::with_capacity(rows.len());
    for (i, (n, _, p)) in rows.into_iter().enumerate() {
        if n != name.as_str() {
            return Err(TestbedError::MixedTestbed {
                line: i + 1,
                expected: name,
                found: n,
            });
        }
        points.push(p);
    }
    Ok(Testbed { name, seed, points })
}

/// More than 10 words or more than 50 characters.
pub fn is_long_text(text: &str) -> bool {
    text.split_whitespace().count() > 10 || text.chars().count() > 50
}

/// RawData keeps the first point of every distinct method body;
/// RawDataDocstring is its subset with a valid docstring.
pub fn build_raw_testbeds(points: Vec<DataPoint>) -> (Testbed, Testbed) {
    let mut seen = HashSet::new();
    let raw: Vec<DataPoint> = points
        .into_iter()
        .filter(|p| seen.insert(p.raw.code.clone()))
        .collect();
    let with_doc: Vec<TestbedPoint> = raw
        .iter()
        .filter(|p| p.raw.docstring.as_deref().is_some_and(is_valid_docstring))
        .cloned()
        .map(TestbedPoint::plain)
        .collect();
    (
        Testbed {
            name: TestbedName::RawData,
            seed: 0,
            points: raw.into_iter().map(TestbedPoint::plain).collect(),
        },
        Testbed {
            name: TestbedName::RawDataDocstring,
            seed: 0,
            points: with_doc,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeriveConfig {
    /// Points drawn per testbed before dedup.
    pub size: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for DeriveConfig {
    fn default() -> Self {
        DeriveConfig {
            size: 3000,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
        }
    }
}

fn cuttable(p: &DataPoint) -> bool {
    is_cut_eligible(&p.raw.code, p.features.token_count) && !cut_candidates(&p.raw.code).is_empty()
}

/// Filter the pool for `name`, draw `cfg.size` points and drop near
/// duplicates of the method code.
pub fn select_task_points(
    name: TestbedName,
    raw: &Testbed,
    raw_doc: &Testbed,
    model: &BpeModel,
    cfg: &DeriveConfig,
) -> Result<(Vec<DataPoint>, DedupReport), TestbedError> {
    let source = match name {
        TestbedName::RandomCut => raw,
        _ => raw_doc,
    };
    let pool: Vec<&DataPoint> = source
        .points
        .iter()
        .map(|p| &p.point)
        .filter(|p| match name {
            TestbedName::RandomCut | TestbedName::WithDocstring => cuttable(p),
            TestbedName::CommitGen => is_long_text(&p.raw.commit_message),
            TestbedName::SummarizationGen => p.raw.docstring.as_deref().is_some_and(is_long_text),
            _ => true,
        })
        .collect();
    if pool.len() < cfg.size {
        return Err(TestbedError::InsufficientPoints {
            testbed: name,
            eligible: pool.len(),
            required: cfg.size,
        });
    }
    let drawn = sample_points(&pool, cfg.size, derive_seed(cfg.seed, name.as_str()))?;
    let (kept, report) = dedup(drawn, model, cfg.threshold, |p| p.raw.code.as_str())?;
    Ok((kept.into_iter().cloned().collect(), report))
}

/// Wrap selected points into the testbed, cutting them when the testbed
/// needs a prefix/suffix split.
pub fn finish_testbed(name: TestbedName, points: Vec<DataPoint>, base_seed: u64) -> Result<Testbed, TestbedError> {
    let seed = derive_seed(base_seed, name.as_str());
    let points = points
        .into_iter()
        .map(|p| {
            if !name.is_cut() {
                return Ok(TestbedPoint::plain(p));
            }
            let cut = random_cut(&p.raw.code, seed, &p.point_id()).ok_or_else(|| {
                TestbedError::NotCuttable {
                    point_id: p.point_id(),
                }
            })?;
            Ok(TestbedPoint {
                point: p,
                cut_prefix: Some(cut.prefix),
                expected_suffix: Some(cut.suffix),
            })
        })
        .collect::<Result<_, TestbedError>>()?;
    Ok(Testbed { name, seed, points })
}

/// Build one task testbed: filter the pool, draw `size` points, dedup on
/// method code, then cut if the testbed needs it.
pub fn build_task_testbed(
    name: TestbedName,
    raw: &Testbed,
    raw_doc: &Testbed,
    model: &BpeModel,
    cfg: &DeriveConfig,
) -> Result<(Testbed, DedupReport), TestbedError> {
    let (points, report) = select_task_points(name, raw, raw_doc, model, cfg)?;
    Ok((finish_testbed(name, points, cfg.seed)?, report))
}

/// The five task testbeds, in [`TestbedName::TASKS`] order.
pub fn derive_task_testbeds(
    raw: &Testbed,
    raw_doc: &Testbed,
    model: &BpeModel,
    cfg: &DeriveConfig,
) -> Result<Vec<(Testbed, DedupReport)>, TestbedError> {
    if let Some(bad) = raw_doc
        .points
        .iter()
        .find(|p| !p.point.raw.docstring.as_deref().is_some_and(is_valid_docstring))
    {
        return Err(TestbedError::MissingDocstring {
            point_id: bad.point_id(),
        });
    }
    TestbedName::TASKS
        .into_iter()
        .map(|name| build_task_testbed(name, raw, raw_doc, model, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::tests::sample;

    fn point(code: &str, doc: Option<&str>, message: &str) -> DataPoint {
        let mut raw = sample(code, doc);
        raw.commit_message = message.to_owned();
        DataPoint::from_raw(raw)
    }

    #[test]
    fn long_text_predicate() {
        assert!(!is_long_text("one two three four five six seven eight"));
        assert!(!is_long_text(&"x".repeat(40)));
        assert!(is_long_text(&"x".repeat(51)));
        assert!(is_long_text("a b c d e f g h i j k"));
        let t = "a b c d e f g h i j k";
        assert_eq!(is_long_text(t), is_long_text(t));
    }

    #[test]
    fn io_kinds() {
        assert_eq!(TestbedName::FromDocstring.io_kind(), Some(IoKind::TextToCode));
        assert_eq!(TestbedName::WithDocstring.io_kind(), Some(IoKind::CodeTextToCode));
        assert_eq!(TestbedName::RawData.io_kind(), None);
        assert_eq!("withdocstring".parse::<TestbedName>().unwrap(), TestbedName::WithDocstring);
    }

    #[test]
    fn testbed_jsonl_round_trip() {
        let p = point(
            "def add(a, b):\n    total = a + b\n    return total\n",
            Some("Add two numbers together."),
            "add helper",
        );
        let cut = random_cut(&p.raw.code, 1, "x").unwrap();
        let tb = Testbed {
            name: TestbedName::RandomCut,
            seed: 42,
            points: vec![TestbedPoint {
                point: p,
                cut_prefix: Some(cut.prefix),
                expected_suffix: Some(cut.suffix),
            }],
        };
        let mut buf = Vec::new();
        write_testbed(&tb, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"task\":\"code completion\""));
        let back = read_testbed(buf.as_slice(), TestbedName::RawData).unwrap();
        assert_eq!(back, tb);
        assert!(back.points[0].point.raw.extras.is_empty());
    }

    #[test]
    fn empty_file_gives_empty_testbed() {
        let tb = read_testbed(&b""[..], TestbedName::CommitGen).unwrap();
        assert_eq!(tb.name, TestbedName::CommitGen);
        assert!(tb.is_empty());
    }

    #[test]
    fn raw_testbeds_drop_exact_copies() {
        let a = point("def f(x):\n    return x\n", Some("Return the argument unchanged."), "m");
        let b = point("def g():\n    pass\n", None, "m");
        let (raw, doc) = build_raw_testbeds(vec![a.clone(), b, a]);
        assert_eq!(raw.len(), 2);
        assert_eq!(doc.len(), 1);
    }

    #[test]
    fn short_docstring_and_message_excluded() {
        let p = point(
            "def f(x):\n    return x + 1 + 2 + 3 + 4\n",
            Some("one two three four five six seven eight"),
            &"m".repeat(40),
        );
        let raw = Testbed {
            name: TestbedName::RawData,
            seed: 0,
            points: vec![TestbedPoint::plain(p)],
        };
        let model = crate::tokenization::train_bpe(&["def f(x): return x"], 300, &[]).unwrap();
        let cfg = DeriveConfig {
            size: 1,
            ..DeriveConfig::default()
        };
        let err = build_task_testbed(TestbedName::SummarizationGen, &raw, &raw, &model, &cfg).unwrap_err();
        assert!(err.to_string().contains("SummarizationGen"), "{err}");
        let err = build_task_testbed(TestbedName::CommitGen, &raw, &raw, &model, &cfg).unwrap_err();
        assert!(err.to_string().contains("CommitGen"));
        let (tb, _) = build_task_testbed(TestbedName::FromDocstring, &raw, &raw, &model, &cfg).unwrap();
        assert_eq!(tb.len(), 1);
        assert!(tb.points[0].cut_prefix.is_none());
    }
}
