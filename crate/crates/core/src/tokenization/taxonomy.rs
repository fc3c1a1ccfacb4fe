//! Keyword taxonomy used to bucket tokens for exploratory counts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TaxonomyClass {
    Blocks,
    Tests,
    Oop,
    Declarations,
    Exceptions,
    Datatype,
    Loops,
    Operators,
    Conditionals,
    ExtraTokens,
}

impl TaxonomyClass {
    pub const ALL: [TaxonomyClass; 10] = [
        TaxonomyClass::Blocks,
        TaxonomyClass::Tests,
        TaxonomyClass::Oop,
        TaxonomyClass::Declarations,
        TaxonomyClass::Exceptions,
        TaxonomyClass::Datatype,
        TaxonomyClass::Loops,
        TaxonomyClass::Operators,
        TaxonomyClass::Conditionals,
        TaxonomyClass::ExtraTokens,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaxonomyClass::Blocks => "blocks",
            TaxonomyClass::Tests => "tests",
            TaxonomyClass::Oop => "oop",
            TaxonomyClass::Declarations => "declarations",
            TaxonomyClass::Exceptions => "exceptions",
            TaxonomyClass::Datatype => "datatype",
            TaxonomyClass::Loops => "loops",
            TaxonomyClass::Operators => "operators",
            TaxonomyClass::Conditionals => "conditionals",
            TaxonomyClass::ExtraTokens => "extraTokens",
        }
    }
}

impl fmt::Display for TaxonomyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaxonomyClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaxonomyClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown taxonomy class `{s}`"))
    }
}

/// Keyword → class lookup. Anything absent is `extraTokens`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyTable {
    pub class_of: BTreeMap<String, TaxonomyClass>,
}

impl Default for TaxonomyTable {
    fn default() -> Self {
        use TaxonomyClass::*;
        let groups: [(TaxonomyClass, &[&str]); 9] = [
            (Exceptions, &["try", "except", "finally", "raise"]),
            (Conditionals, &["if", "elif", "else"]),
            (Loops, &["for", "while", "break", "continue"]),
            (Oop, &["class", "self", "super"]),
            (
                Declarations,
                &["def", "lambda", "import", "from", "as", "global", "nonlocal", "return"],
            ),
            (Datatype, &["int", "float", "str", "bool", "list", "dict", "set", "tuple"]),
            (Tests, &["assert"]),
            (Blocks, &["with", "pass", "yield"]),
            (Operators, &["and", "or", "not", "in", "is"]),
        ];
        let class_of = groups
            .iter()
            .flat_map(|(class, words)| words.iter().map(move |w| ((*w).to_owned(), *class)))
            .collect();
        TaxonomyTable { class_of }
    }
}

impl TaxonomyTable {
    /// Class of one token; surrounding whitespace is ignored.
    pub fn classify(&self, token: &str) -> TaxonomyClass {
        self.class_of
            .get(token.trim())
            .copied()
            .unwrap_or(TaxonomyClass::ExtraTokens)
    }
}

/// Per-class counts; every class is present, possibly with zero.
pub fn classify_tokens<S: AsRef<str>>(
    tokens: &[S],
    table: &TaxonomyTable,
) -> BTreeMap<TaxonomyClass, usize> {
    let mut hist: BTreeMap<TaxonomyClass, usize> =
        TaxonomyClass::ALL.into_iter().map(|c| (c, 0)).collect();
    for t in tokens {
        *hist.entry(table.classify(t.as_ref())).or_default() += 1;
    }
    hist
}
