//! Prompt treatments and their rendering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::testbeds::TestbedPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TreatmentId {
    #[serde(rename = "control")]
    Control,
    T1,
    T2,
}

impl TreatmentId {
    pub const ALL: [TreatmentId; 3] = [TreatmentId::Control, TreatmentId::T1, TreatmentId::T2];

    pub fn as_str(self) -> &'static str {
        match self {
            TreatmentId::Control => "control",
            TreatmentId::T1 => "T1",
            TreatmentId::T2 => "T2",
        }
    }

    fn step_count(self) -> usize {
        match self {
            TreatmentId::Control | TreatmentId::T1 => 1,
            TreatmentId::T2 => 2,
        }
    }
}

impl fmt::Display for TreatmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TreatmentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TreatmentId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown treatment `{s}`"))
    }
}

/// Ordered prompt templates. Placeholders: `{partial_code}`, `{fun_name}`,
/// `{code}` and `{docstring}`; any other brace text is kept literally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentSpec {
    pub id: TreatmentId,
    pub steps: Vec<String>,
}

impl TreatmentSpec {
    pub fn new(id: TreatmentId, steps: Vec<String>) -> Result<Self, EvalError> {
        let spec = TreatmentSpec { id, steps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.steps.len() != self.id.step_count() {
            return Err(EvalError::StepCount {
                treatment: self.id,
                expected: self.id.step_count(),
                found: self.steps.len(),
            });
        }
        Ok(())
    }

    pub fn control() -> Self {
        TreatmentSpec {
            id: TreatmentId::Control,
            steps: vec!["Complete the following python method: ```{partial_code}```".into()],
        }
    }

    pub fn t1() -> Self {
        TreatmentSpec {
            id: TreatmentId::T1,
            steps: vec![
                "Complete the following a Python code, return only code and complete method: ```{partial_code}```"
                    .into(),
            ],
        }
    }

    pub fn t2() -> Self {
        TreatmentSpec {
            id: TreatmentId::T2,
            steps: vec![
                "You are given the description of a Python method and the beginning of its code. \
                 Description: `{docstring}`. Code: ```{partial_code}```"
                    .into(),
                "Remember you have a Python function named `{fun_name}`, the function starts with the \
                 following code `{code}`. The description for the function is: `{docstring}`. \
                 Complete the function, remove comments and optimize the code. Return only code."
                    .into(),
            ],
        }
    }

    pub fn defaults() -> Vec<TreatmentSpec> {
        vec![Self::control(), Self::t1(), Self::t2()]
    }
}

/// Values a template may reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptInput {
    pub partial_code: Option<String>,
    pub fun_name: String,
    pub docstring: Option<String>,
}

impl PromptInput {
    pub fn from_point(p: &TestbedPoint) -> Self {
        PromptInput {
            partial_code: p.cut_prefix.clone(),
            fun_name: p.point.raw.fun_name.clone(),
            docstring: p.point.raw.docstring.clone(),
        }
    }

    fn lookup(&self, key: &str) -> Option<Result<&str, &'static str>> {
        Some(match key {
            "partial_code" | "code" => self.partial_code.as_deref().ok_or("partial_code"),
            "fun_name" => Ok(self.fun_name.as_str()),
            "docstring" => self.docstring.as_deref().ok_or("docstring"),
            _ => return None,
        })
    }
}

fn render_one(template: &str, input: &PromptInput, id: TreatmentId) -> Result<String, EvalError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let substituted = after.find('}').and_then(|close| {
            input
                .lookup(&after[..close])
                .map(|value| (close, value))
        });
        match substituted {
            Some((close, Ok(value))) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            Some((_, Err(field))) => {
                return Err(EvalError::MissingField { treatment: id, field });
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Render every step of `spec` for one point.
pub fn render_prompts(spec: &TreatmentSpec, input: &PromptInput) -> Result<Vec<String>, EvalError> {
    spec.validate()?;
    spec.steps.iter().map(|t| render_one(t, input, spec.id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(doc: Option<&str>) -> PromptInput {
        PromptInput {
            partial_code: Some("def add(a, b):".into()),
            fun_name: "add".into(),
            docstring: doc.map(str::to_owned),
        }
    }

    #[test]
    fn control_contains_prefix() {
        let p = render_prompts(&TreatmentSpec::control(), &input(None)).unwrap();
        assert_eq!(p, vec!["Complete the following python method: ```def add(a, b):```"]);
    }

    #[test]
    fn t2_needs_docstring() {
        let err = render_prompts(&TreatmentSpec::t2(), &input(None)).unwrap_err();
        assert!(matches!(err, EvalError::MissingField { field: "docstring", .. }));
        let p = render_prompts(&TreatmentSpec::t2(), &input(Some("Add two numbers."))).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p[1].starts_with("Remember you have a Python function named `add`, the function starts with the following code `def add(a, b):`. The description for the function is: `Add two numbers.`"));
    }

    #[test]
    fn control_and_t1_share_payload() {
        let i = input(None);
        let c = &render_prompts(&TreatmentSpec::control(), &i).unwrap()[0];
        let t = &render_prompts(&TreatmentSpec::t1(), &i).unwrap()[0];
        let payload = |s: &str| s.split_once("```").unwrap().1.to_owned();
        assert_eq!(payload(c), payload(t));
        assert_ne!(c, t);
    }

    #[test]
    fn substituted_text_is_not_rescanned() {
        let mut i = input(None);
        i.partial_code = Some("def f(): return {'a': '{fun_name}'}".into());
        let p = render_prompts(&TreatmentSpec::control(), &i).unwrap();
        assert!(p[0].contains("{'a': '{fun_name}'}"));
    }

    #[test]
    fn step_counts_checked() {
        assert!(TreatmentSpec::new(TreatmentId::T2, vec!["x".into()]).is_err());
        assert!(TreatmentSpec::new(TreatmentId::T1, vec!["x".into()]).is_ok());
    }
}
