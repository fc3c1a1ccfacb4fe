use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use codecause_core::causal::{build_study_records, run_study, StudyConfig, StudyResults};
use codecause_core::features::DataPoint;
use codecause_core::ingest::{
    harvest_many, import_jsonl, select_repositories, validate_sample, RepoMeta, RepoSearchClient, UreqGet,
};
use codecause_core::jsonl;
use codecause_core::llm_eval::{
    evaluate_testbed, render_prompts, write_eval_csv, ClientMode, EvalRecord, HttpTransport, LlmClient,
    PromptInput, ReplayCache, TreatmentId,
};
use codecause_core::report::{
    descriptive_table, exploratory_figures, proportion_svg, results_markdown, results_table, taxonomy_svg,
    token_rank_svg, write_dedup_csv, write_descriptive_csv, write_results_csv, write_similarity_proportion_csv,
    write_taxonomy_counts_csv, write_token_dist_csv, DedupRow,
};
use codecause_core::testbeds::{
    build_raw_testbeds, finish_testbed, read_testbed, select_task_points, write_testbed, DeriveConfig, Testbed,
    TestbedName,
};
use codecause_core::tokenization::{train_bpe, BpeModel, TaxonomyTable};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::manifest::{hash_file, sha256_hex, Outputs, Step};
use crate::Usage;

pub const MINED: &str = "work/mined.jsonl";
pub const EXTRACTED: &str = "work/extracted.jsonl";
pub const VALIDATED: &str = "work/validated.jsonl";
pub const VALIDATION: &str = "work/validation.csv";
pub const TOKENIZER: &str = "work/tokenizer.json";
pub const PROMPTS: &str = "work/prompts.jsonl";
pub const EVAL: &str = "work/eval.jsonl";
pub const EVAL_CSV: &str = "work/eval.csv";
pub const CORRELATIONS: &str = "work/correlations.json";
pub const STUDY: &str = "work/study.json";

fn testbed_path(name: TestbedName) -> String {
    format!("testbeds/{name}.jsonl")
}

fn selected_path(name: TestbedName) -> String {
    format!("work/dedup/{name}.jsonl")
}

/// One prompted conversation as written by `prompt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub point_id: String,
    pub treatment: TreatmentId,
    pub prompts: Vec<String>,
}

pub struct Ctx {
    pub cfg: PipelineConfig,
    /// Directory relative config paths are resolved against.
    pub base: PathBuf,
    pub jobs: usize,
}

impl Ctx {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.cfg.paths.output)
    }

    fn require(&self, rel: &str, producer: &str) -> anyhow::Result<PathBuf> {
        let p = self.out_dir().join(rel);
        if !p.exists() {
            bail!(Usage(format!("missing {}: run {producer} first", p.display())));
        }
        Ok(p)
    }

    /// Hash required artifacts, failing with the producing command's name.
    fn inputs(&self, required: &[(&str, &str)]) -> anyhow::Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (rel, producer) in required {
            let p = self.require(rel, producer)?;
            out.insert((*rel).to_owned(), hash_file(&p)?);
        }
        Ok(out)
    }

    fn step(&self, command: &'static str, inputs: BTreeMap<String, String>) -> Step {
        Step {
            out_dir: self.out_dir(),
            command,
            seed: self.cfg.seed,
            config_hash: self.cfg.hash(),
            inputs,
        }
    }

    fn pool(&self) -> anyhow::Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new().num_threads(self.jobs.max(1)).build()?)
    }

    fn read(&self, rel: &str) -> anyhow::Result<BufReader<std::fs::File>> {
        let p = self.out_dir().join(rel);
        let f = std::fs::File::open(&p).with_context(|| format!("opening {}", p.display()))?;
        Ok(BufReader::new(f))
    }

    fn read_points(&self, rel: &str) -> anyhow::Result<Vec<DataPoint>> {
        jsonl::read_records(self.read(rel)?).with_context(|| format!("reading {rel}"))
    }

    fn read_testbed(&self, name: TestbedName) -> anyhow::Result<Testbed> {
        read_testbed(self.read(&testbed_path(name))?, name).with_context(|| format!("reading testbed {name}"))
    }

    fn read_tokenizer(&self) -> anyhow::Result<BpeModel> {
        let p = self.out_dir().join(TOKENIZER);
        let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        Ok(BpeModel::from_json(&text)?)
    }

    fn read_evals(&self) -> anyhow::Result<Vec<EvalRecord>> {
        jsonl::read_records(self.read(EVAL)?).context("reading evaluation records")
    }
}

fn rel(p: &str) -> PathBuf {
    PathBuf::from(p)
}

fn clone_dirs(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Usage(format!("cannot list clones directory {}: {e}", dir.display())))?;
    for e in entries {
        let p = e?.path();
        if p.is_dir() && git2::Repository::open(&p).is_ok() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn head_id(repo: &Path) -> anyhow::Result<String> {
    let r = git2::Repository::open(repo)?;
    let head = r.head()?.peel_to_commit()?;
    Ok(head.id().to_string())
}

fn dir_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Harvest methods from the local clones, optionally restricted to the
/// catalog entries that satisfy the repository query.
pub fn mine(ctx: &Ctx, search: bool) -> anyhow::Result<()> {
    let cfg = &ctx.cfg;
    let catalog_path = cfg
        .paths
        .catalog
        .as_ref()
        .map(|p| ctx.resolve(p))
        .unwrap_or_else(|| ctx.out_dir().join("work/catalog.json"));
    if search {
        let client = RepoSearchClient::new(UreqGet, ctx.out_dir().join("work/search_cache"));
        let found = client.search(&cfg.query, 10)?;
        let mut text = serde_json::to_string_pretty(&found)?;
        text.push('\n');
        crate::manifest::write_atomic(&catalog_path, text.as_bytes())?;
        log::info!("search returned {} repositories", found.len());
    }
    let mut repos = clone_dirs(&ctx.resolve(&cfg.paths.clones))?;
    let mut inputs = BTreeMap::new();
    if catalog_path.exists() {
        let catalog: Vec<RepoMeta> = serde_json::from_str(&std::fs::read_to_string(&catalog_path)?)
            .with_context(|| format!("parsing catalog {}", catalog_path.display()))?;
        let wanted: Vec<String> = select_repositories(&cfg.query, &catalog)
            .iter()
            .flat_map(|r| {
                let short = r.full_name.rsplit('/').next().unwrap_or(&r.full_name).to_owned();
                [r.full_name.replace('/', "__"), short]
            })
            .collect();
        repos.retain(|p| wanted.contains(&dir_name(p)));
        inputs.insert("catalog".to_owned(), hash_file(&catalog_path)?);
    }
    if repos.is_empty() {
        bail!(Usage(format!(
            "no git clones to mine under {}",
            ctx.resolve(&cfg.paths.clones).display()
        )));
    }
    for r in &repos {
        inputs.insert(format!("clone:{}", dir_name(r)), head_id(r)?);
    }
    ctx.step("mine", inputs).run(|| {
        let samples = ctx.pool()?.install(|| harvest_many(&repos, &cfg.window, ctx.jobs))?;
        log::info!("mined {} methods from {} repositories", samples.len(), repos.len());
        Ok(vec![(rel(MINED), jsonl::to_bytes(&samples)?)])
    })
}

pub fn extract(ctx: &Ctx) -> anyhow::Result<()> {
    let inputs = ctx.inputs(&[(MINED, "mine")])?;
    ctx.step("extract", inputs).run(|| {
        use rayon::prelude::*;
        let samples = import_jsonl(ctx.read(MINED)?)?;
        let points: Vec<DataPoint> =
            ctx.pool()?.install(|| samples.into_par_iter().map(DataPoint::from_raw).collect());
        Ok(vec![(rel(EXTRACTED), jsonl::to_bytes(&points)?)])
    })
}

pub fn validate(ctx: &Ctx) -> anyhow::Result<()> {
    let inputs = ctx.inputs(&[(EXTRACTED, "extract")])?;
    ctx.step("validate", inputs).run(|| {
        let points = ctx.read_points(EXTRACTED)?;
        let mut report = csv::Writer::from_writer(Vec::new());
        report.write_record(["point_id", "passed", "reasons"])?;
        let mut kept = Vec::new();
        for p in points {
            let v = validate_sample(&p.raw, &ctx.cfg.window);
            let reasons: Vec<String> = v.reasons.iter().map(ToString::to_string).collect();
            report.write_record([p.point_id(), v.passed.to_string(), reasons.join("; ")])?;
            if v.passed {
                kept.push(p);
            }
        }
        log::info!("{} points passed validation", kept.len());
        Ok(vec![
            (rel(VALIDATED), jsonl::to_bytes(&kept)?),
            (rel(VALIDATION), report.into_inner()?),
        ])
    })
}

fn derive_config(cfg: &PipelineConfig) -> DeriveConfig {
    DeriveConfig {
        size: cfg.testbeds.size,
        threshold: cfg.testbeds.threshold,
        seed: cfg.seed,
    }
}

/// Train (or load) the tokenizer, build the raw testbeds, then draw and
/// near-dedup the points of every task testbed.
pub fn dedup(ctx: &Ctx) -> anyhow::Result<()> {
    let mut inputs = ctx.inputs(&[(VALIDATED, "validate")])?;
    let pretrained = ctx.cfg.paths.tokenizer.as_ref().map(|p| ctx.resolve(p));
    if let Some(p) = &pretrained {
        inputs.insert("tokenizer".to_owned(), hash_file(p)?);
    }
    ctx.step("dedup", inputs).run(|| {
        let points = ctx.read_points(VALIDATED)?;
        let model = match &pretrained {
            Some(p) => BpeModel::from_json(&std::fs::read_to_string(p)?)?,
            None => {
                let codes: Vec<&str> = points.iter().map(|p| p.raw.code.as_str()).collect();
                train_bpe(&codes, ctx.cfg.tokenizer.vocab_size, &ctx.cfg.tokenizer.special_tokens)?
            }
        };
        let (raw, raw_doc) = build_raw_testbeds(points);
        let dcfg = derive_config(&ctx.cfg);
        let mut outputs: Outputs = vec![(rel(TOKENIZER), model.to_json().into_bytes())];
        let mut rows = Vec::new();
        ctx.pool()?.install(|| -> anyhow::Result<()> {
            for name in &ctx.cfg.testbeds.tasks {
                let (kept, report) = select_task_points(*name, &raw, &raw_doc, &model, &dcfg)?;
                log::info!("{name}: {} of {} kept ({} dupes)", report.after, report.before, report.dupes);
                outputs.push((PathBuf::from(selected_path(*name)), jsonl::to_bytes(&kept)?));
                rows.push(DedupRow {
                    testbed: *name,
                    report,
                });
            }
            Ok(())
        })?;
        for tb in [&raw, &raw_doc] {
            let mut buf = Vec::new();
            write_testbed(tb, &mut buf)?;
            outputs.push((PathBuf::from(testbed_path(tb.name)), buf));
        }
        let mut csv = Vec::new();
        write_dedup_csv(&rows, &mut csv)?;
        outputs.push((rel("reports/dedup.csv"), csv));
        Ok(outputs)
    })
}

pub fn build_testbeds(ctx: &Ctx) -> anyhow::Result<()> {
    let selected: Vec<String> = ctx.cfg.testbeds.tasks.iter().map(|n| selected_path(*n)).collect();
    let required: Vec<(&str, &str)> = selected.iter().map(|s| (s.as_str(), "dedup")).collect();
    let inputs = ctx.inputs(&required)?;
    ctx.step("build-testbeds", inputs).run(|| {
        let mut outputs = Vec::new();
        for name in &ctx.cfg.testbeds.tasks {
            let points = ctx.read_points(&selected_path(*name))?;
            let tb = finish_testbed(*name, points, ctx.cfg.seed)?;
            let mut buf = Vec::new();
            write_testbed(&tb, &mut buf)?;
            outputs.push((PathBuf::from(testbed_path(*name)), buf));
        }
        Ok(outputs)
    })
}

pub fn prompt(ctx: &Ctx) -> anyhow::Result<()> {
    let name = ctx.cfg.testbeds.evaluate;
    let tb_path = testbed_path(name);
    let inputs = ctx.inputs(&[(&tb_path, "build-testbeds")])?;
    ctx.step("prompt", inputs).run(|| {
        let tb = ctx.read_testbed(name)?;
        let mut records = Vec::new();
        for p in &tb.points {
            let input = PromptInput::from_point(p);
            for spec in &ctx.cfg.treatments {
                records.push(PromptRecord {
                    point_id: p.point_id(),
                    treatment: spec.id,
                    prompts: render_prompts(spec, &input)?,
                });
            }
        }
        Ok(vec![(rel(PROMPTS), jsonl::to_bytes(&records)?)])
    })
}

pub fn eval(ctx: &Ctx) -> anyhow::Result<()> {
    let name = ctx.cfg.testbeds.evaluate;
    let tb_path = testbed_path(name);
    let mut inputs = ctx.inputs(&[(PROMPTS, "prompt"), (&tb_path, "build-testbeds"), (TOKENIZER, "dedup")])?;
    let cache_path = ctx.resolve(&ctx.cfg.paths.cache);
    let cache_hash = if cache_path.exists() {
        hash_file(&cache_path)?
    } else {
        sha256_hex(b"")
    };
    inputs.insert("cache".to_owned(), cache_hash);
    ctx.step("eval", inputs).run(|| {
        let tb = ctx.read_testbed(name)?;
        let model = ctx.read_tokenizer()?;
        let cache = ReplayCache::open(&cache_path)?;
        let client_cfg = ctx.cfg.llm.client.clone();
        let client = match ctx.cfg.llm.mode {
            ClientMode::Replay => LlmClient::replay(cache, client_cfg),
            ClientMode::Live => LlmClient::live(cache, client_cfg, Box::new(HttpTransport::from_env()?)),
        };
        let records = evaluate_testbed(
            &tb,
            &ctx.cfg.treatments,
            &client,
            &model,
            ctx.cfg.llm.codebleu_weights,
            ctx.jobs,
        )?;
        let mut csv = Vec::new();
        write_eval_csv(&records, &mut csv)?;
        Ok(vec![(rel(EVAL), jsonl::to_bytes(&records)?), (rel(EVAL_CSV), csv)])
    })
}

fn study_config(ctx: &Ctx) -> StudyConfig {
    StudyConfig {
        seed: ctx.cfg.seed,
        ..ctx.cfg.study.clone()
    }
}

fn study_inputs(ctx: &Ctx) -> anyhow::Result<(BTreeMap<String, String>, String)> {
    let tb_path = testbed_path(ctx.cfg.testbeds.evaluate);
    Ok((ctx.inputs(&[(EVAL, "eval"), (&tb_path, "build-testbeds")])?, tb_path))
}

fn pretty(value: &impl Serialize) -> anyhow::Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn run_study_step(ctx: &Ctx, cfg: StudyConfig) -> anyhow::Result<StudyResults> {
    let tb = ctx.read_testbed(ctx.cfg.testbeds.evaluate)?;
    let records = build_study_records(&ctx.read_evals()?, &tb)?;
    Ok(ctx.pool()?.install(|| run_study(&records, &cfg))?)
}

/// Performance summaries, correlations and confounder screening.
pub fn correlate(ctx: &Ctx) -> anyhow::Result<()> {
    let (inputs, _) = study_inputs(ctx)?;
    ctx.step("correlate", inputs).run(|| {
        let cfg = StudyConfig {
            methods: Vec::new(),
            refuters: Vec::new(),
            ..study_config(ctx)
        };
        let res = run_study_step(ctx, cfg)?;
        Ok(vec![(rel(CORRELATIONS), pretty(&res)?)])
    })
}

/// Effects of every treatment against the control with refutations.
pub fn ate(ctx: &Ctx) -> anyhow::Result<()> {
    let (inputs, _) = study_inputs(ctx)?;
    ctx.step("ate", inputs).run(|| {
        let res = run_study_step(ctx, study_config(ctx))?;
        Ok(vec![(rel(STUDY), pretty(&res)?)])
    })
}

pub fn report(ctx: &Ctx) -> anyhow::Result<()> {
    let evaluate = ctx.cfg.testbeds.evaluate;
    let evaluated_path = testbed_path(evaluate);
    let mut inputs = ctx.inputs(&[
        (STUDY, "ate"),
        (EVAL, "eval"),
        (TOKENIZER, "dedup"),
        (&evaluated_path, "build-testbeds"),
    ])?;
    let mut names = vec![TestbedName::RawData, TestbedName::RawDataDocstring];
    names.extend(ctx.cfg.testbeds.tasks.iter().copied());
    let names: Vec<TestbedName> = names
        .into_iter()
        .filter(|n| *n == evaluate || ctx.out_dir().join(testbed_path(*n)).exists())
        .collect();
    for n in &names {
        let p = testbed_path(*n);
        inputs.insert(p.clone(), hash_file(&ctx.out_dir().join(&p))?);
    }
    ctx.step("report", inputs).run(|| {
        let testbeds = names
            .iter()
            .map(|n| ctx.read_testbed(*n))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let study: StudyResults = serde_json::from_reader(ctx.read(STUDY)?).context("reading study results")?;
        let evals = ctx.read_evals()?;
        let model = ctx.read_tokenizer()?;
        let evaluated = testbeds
            .iter()
            .find(|t| t.name == evaluate)
            .expect("evaluated testbed is always loaded");

        let mut outputs = Vec::new();
        let mut buf = Vec::new();
        write_descriptive_csv(&descriptive_table(&testbeds)?, &mut buf)?;
        outputs.push((rel("reports/descriptive.csv"), buf));

        let rows = results_table(&study)?;
        let mut buf = Vec::new();
        write_results_csv(&rows, &mut buf)?;
        outputs.push((rel("reports/results.csv"), buf));
        outputs.push((rel("reports/results.md"), results_markdown(&rows)?.into_bytes()));

        let fig = exploratory_figures(&evals, evaluated, &model, &TaxonomyTable::default());
        let mut buf = Vec::new();
        write_taxonomy_counts_csv(&fig.taxonomy, &mut buf)?;
        outputs.push((rel("figures/taxonomy_counts.csv"), buf));
        let mut buf = Vec::new();
        write_token_dist_csv(&fig.tokens, &mut buf)?;
        outputs.push((rel("figures/token_dist.csv"), buf));
        outputs.push((rel("figures/token_dist.meta.json"), pretty(&fig.meta)?));
        let mut buf = Vec::new();
        write_similarity_proportion_csv(&fig.proportions, &mut buf)?;
        outputs.push((rel("figures/similarity_proportion.csv"), buf));
        outputs.push((rel("figures/taxonomy_counts.svg"), taxonomy_svg(&fig.taxonomy).into_bytes()));
        outputs.push((rel("figures/token_dist.svg"), token_rank_svg(&fig.tokens, 50).into_bytes()));
        outputs.push((
            rel("figures/similarity_proportion.svg"),
            proportion_svg(&fig.proportions).into_bytes(),
        ));
        Ok(outputs)
    })
}

pub fn run_all(ctx: &Ctx) -> anyhow::Result<()> {
    mine(ctx, false)?;
    extract(ctx)?;
    validate(ctx)?;
    dedup(ctx)?;
    build_testbeds(ctx)?;
    prompt(ctx)?;
    eval(ctx)?;
    correlate(ctx)?;
    ate(ctx)?;
    report(ctx)
}
