use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use codecause_core::causal::StudyConfig;
use codecause_core::ingest::{DateWindow, RepoQuery};
use codecause_core::llm_eval::{ClientConfig, ClientMode, TreatmentSpec, DEFAULT_WEIGHTS};
use codecause_core::testbeds::{TestbedName, DEFAULT_THRESHOLD};
use serde::{Deserialize, Serialize};

use crate::Usage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory whose subdirectories are git clones.
    pub clones: PathBuf,
    /// Optional repository catalog (JSON array) used to select clones.
    pub catalog: Option<PathBuf>,
    /// Pre-trained tokenizer; trained on the validated corpus when absent.
    pub tokenizer: Option<PathBuf>,
    pub cache: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            clones: "clones".into(),
            catalog: None,
            tokenizer: None,
            cache: "llm_cache.jsonl".into(),
            output: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerSettings {
    pub vocab_size: usize,
    pub special_tokens: Vec<String>,
}

impl Default for TokenizerSettings {
    fn default() -> Self {
        TokenizerSettings {
            vocab_size: 8000,
            special_tokens: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestbedSettings {
    pub size: usize,
    pub threshold: f64,
    /// Task testbeds to build.
    pub tasks: Vec<TestbedName>,
    /// Testbed that is prompted, evaluated and analysed.
    pub evaluate: TestbedName,
}

impl Default for TestbedSettings {
    fn default() -> Self {
        TestbedSettings {
            size: 3000,
            threshold: DEFAULT_THRESHOLD,
            tasks: TestbedName::TASKS.to_vec(),
            evaluate: TestbedName::WithDocstring,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub mode: ClientMode,
    pub client: ClientConfig,
    pub codebleu_weights: [f64; 4],
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            mode: ClientMode::Replay,
            client: ClientConfig::default(),
            codebleu_weights: DEFAULT_WEIGHTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub query: RepoQuery,
    pub window: DateWindow,
    pub tokenizer: TokenizerSettings,
    pub testbeds: TestbedSettings,
    pub treatments: Vec<TreatmentSpec>,
    pub llm: LlmSettings,
    pub study: StudyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            paths: Paths::default(),
            query: RepoQuery::default(),
            window: DateWindow::default(),
            tokenizer: TokenizerSettings::default(),
            testbeds: TestbedSettings::default(),
            treatments: TreatmentSpec::defaults(),
            llm: LlmSettings::default(),
            study: StudyConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Read the config; a missing file yields the defaults.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        if !path.exists() {
            return Ok(PipelineConfig::default());
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| anyhow::Error::new(Usage(format!("invalid config {}: {e}", path.display()))))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let t = self.testbeds.threshold;
        if !(t > 0.0 && t <= 1.0) {
            bail!(Usage(format!("testbeds.threshold must be in (0, 1], got {t}")));
        }
        if self.testbeds.size == 0 {
            bail!(Usage("testbeds.size must be positive".into()));
        }
        if !self.testbeds.tasks.contains(&self.testbeds.evaluate) {
            bail!(Usage(format!(
                "testbeds.evaluate `{}` is not among testbeds.tasks",
                self.testbeds.evaluate
            )));
        }
        for spec in &self.treatments {
            spec.validate().map_err(|e| Usage(e.to_string()))?;
        }
        Ok(())
    }

    /// Hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::manifest::sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}
