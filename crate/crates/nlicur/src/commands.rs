//! The pipeline steps behind each subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nlicur_core::aggregate::{group_average, GroupReport, Grouping};
use nlicur_core::corpus::ProfileTable;
use nlicur_core::curation::{self, CurationOutput, Recipe};
use nlicur_core::entailment::{stats, Pair, Scorer};
use nlicur_core::humaneval::{score_systems, SystemScores};
use nlicur_core::metrics::{
    check_aligned, check_unique, example_rouge, length_ratio, nli_rate, percent_mean, MetricRecord,
    MetricsError, TextById,
};
use nlicur_core::selection::{
    best_nli_earlier_report, select_all, CheckpointChoice, EarlierReport,
};
use nlicur_core::Example;
use rayon::prelude::*;
use serde::Serialize;

use crate::annotations::read_annotations;
use crate::config::{require_file, RunConfig};
use crate::corpus_io::{load_corpus, write_corpus, Corpus};
use crate::error::{Error, Result};
use crate::fsio::{self, write_atomic};
use crate::manifest::{RunManifest, TOOL, VERSION};
use crate::pipeline::{annotate_file, thread_pool, AnnotateSummary, PipelineOptions};
use crate::profiles::{load_profiles, profiles_or_default, DEFAULT_PROFILES_CSV};
use crate::render::{self, Table};
use crate::tables;

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const STATS_FILE: &str = "entailment_stats";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHOICES_FILE: &str = "choices";
pub const EARLIER_FILE: &str = "nli_earlier";
pub const MANIFEST_FILE: &str = "manifest.json";

/// A resolved configuration plus the worker pool sized by `max_in_flight`.
pub struct Context {
    pub cfg: RunConfig,
    pub pool: rayon::ThreadPool,
    /// Non-fatal findings to report to the user.
    pub warnings: Vec<String>,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let pool = thread_pool(cfg.scorer.max_in_flight)?;
        Ok(Self {
            cfg,
            pool,
            warnings: Vec::new(),
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    fn manifest(&self, command: &str) -> Result<RunManifest> {
        Ok(RunManifest::new(command, self.cfg.settings()?))
    }

    fn profiles(&self) -> Result<ProfileTable> {
        profiles_or_default(self.cfg.profiles.as_deref(), self.cfg.tiers)
    }

    fn record_profiles(&self, m: &mut RunManifest) -> Result<()> {
        match &self.cfg.profiles {
            Some(p) => m.input("profiles", p),
            None => {
                m.input_bytes("profiles", DEFAULT_PROFILES_CSV.as_bytes());
                Ok(())
            }
        }
    }
}

/// Writes `<stem>.csv` and `<stem>.md` and records both in the manifest.
fn write_table(dir: &Path, stem: &str, table: &Table, m: &mut RunManifest) -> Result<()> {
    let csv = table.to_csv();
    let md = table.to_markdown();
    let csv_name = format!("{stem}.csv");
    let md_name = format!("{stem}.md");
    write_atomic(dir.join(&csv_name), &csv)?;
    write_atomic(dir.join(&md_name), md.as_bytes())?;
    m.output(&csv_name, &csv);
    m.output(&md_name, md.as_bytes());
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AnnotateOutcome {
    pub summary: AnnotateSummary,
    pub annotations: PathBuf,
}

/// Scores every example, writes the annotation file and the per-language
/// entailment table.
pub fn annotate(ctx: &mut Context, resume: bool) -> Result<AnnotateOutcome> {
    let corpus = ctx.cfg.corpus()?.to_path_buf();
    let out = ctx.out(ANNOTATIONS_FILE);
    let scorer = ctx.cfg.scorer();
    let opts = PipelineOptions {
        threshold: ctx.cfg.threshold,
        batch_size: ctx.cfg.scorer.batch_size,
        max_in_flight: ctx.cfg.scorer.max_in_flight,
    };
    let summary = annotate_file(
        &corpus,
        &out,
        scorer.as_ref(),
        opts,
        ctx.cfg.strict,
        resume,
        &ctx.pool,
    )?;
    if summary.skipped_lines > 0 {
        ctx.warn(format!(
            "skipped {} malformed corpus lines",
            summary.skipped_lines
        ));
    }
    let profiles = ctx.profiles()?;
    let unknown: Vec<&String> = summary
        .counts
        .0
        .keys()
        .filter(|l| !profiles.contains(l))
        .collect();
    if !unknown.is_empty() {
        ctx.warn(format!("languages without a profile: {unknown:?}"));
    }

    let mut m = ctx.manifest("annotate")?;
    m.input("corpus", &corpus)?;
    m.output(
        ANNOTATIONS_FILE,
        &std::fs::read(&out).map_err(|e| Error::io(&out, e))?,
    );
    write_table(
        &ctx.cfg.out,
        STATS_FILE,
        &render::stats_table(&summary.counts.stats()),
        &mut m,
    )?;
    m.detail("examples", summary.report.examples + summary.resumed);
    m.write(&ctx.out("annotate.manifest.json"))?;
    Ok(AnnotateOutcome {
        summary,
        annotations: out,
    })
}

/// Sidecar written next to a curated corpus.
#[derive(Debug, Clone, Serialize)]
pub struct CurationManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub recipe: &'static str,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub generator: Option<&'static str>,
    pub quotas: Option<BTreeMap<String, u64>>,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
    pub warnings: Vec<String>,
    pub settings_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub output_sha256: String,
}

/// Per-language counts from a curation manifest (`counts`) or a plain
/// `{language: count}` object.
pub fn read_quotas(path: &Path) -> Result<BTreeMap<String, u64>> {
    let text = fsio::read_to_string(path)?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let obj = v.get("counts").unwrap_or(&v);
    serde_json::from_value::<BTreeMap<String, u64>>(obj.clone())
        .map(|m| {
            m.into_iter()
                .map(|(k, n)| (nlicur_core::normalize_language_key(&k), n))
                .collect()
        })
        .map_err(|e| Error::parse(path, 0, format!("quotas must map languages to counts: {e}")))
}

#[derive(Debug, Clone)]
pub struct CurateArgs {
    pub recipe: Recipe,
    pub annotations: Option<PathBuf>,
    /// Quotas for `random` / `self_rouge`; defaults to the filtered counts
    /// derived from `annotations`.
    pub quotas: Option<PathBuf>,
}

pub fn curate(ctx: &mut Context, args: &CurateArgs) -> Result<CurationOutput> {
    let corpus_path = ctx.cfg.corpus()?.to_path_buf();
    for p in args.annotations.iter().chain(args.quotas.iter()) {
        require_file(p)?;
    }
    let corpus = load_corpus(&corpus_path, ctx.cfg.strict)?;
    if corpus.skipped_count > 0 {
        ctx.warn(format!(
            "skipped {} malformed corpus lines",
            corpus.skipped_count
        ));
    }
    let annotations = match &args.annotations {
        Some(p) => Some(read_annotations(p)?),
        None => None,
    };
    let need_annotations = || {
        annotations.as_deref().ok_or_else(|| {
            Error::validation(format!(
                "recipe `{}` needs --annotations",
                args.recipe.as_str()
            ))
        })
    };
    let threshold = ctx.cfg.threshold;
    let policy = ctx.cfg.collision.into();
    let examples = &corpus.examples;
    let quotas = || -> Result<BTreeMap<String, u64>> {
        match (&args.quotas, &annotations) {
            (Some(p), _) => read_quotas(p),
            (None, Some(a)) => Ok(curation::filter(examples, a, threshold)?.per_language_selected),
            (None, None) => Err(Error::validation(format!(
                "recipe `{}` needs --quotas or --annotations",
                args.recipe.as_str()
            ))),
        }
    };
    let mut used_quotas = None;
    let output = match args.recipe {
        Recipe::Vanilla => curation::vanilla(examples),
        Recipe::Filtered => curation::filter(examples, need_annotations()?, threshold)?,
        Recipe::Controlled => {
            curation::augment_controlled(examples, need_annotations()?, &ctx.cfg.tokens, policy)?
        }
        Recipe::Inference => curation::prepare_inference(examples, &ctx.cfg.tokens.pos, policy)?,
        Recipe::Random => {
            let q = quotas()?;
            let out = curation::random_select(examples, &q, ctx.cfg.seed)?;
            used_quotas = Some(q);
            out
        }
        Recipe::SelfRouge => {
            let q = quotas()?;
            let tokenizer = ctx.cfg.tokenizer()?;
            let beta = ctx.cfg.beta;
            let scores: Vec<f64> = ctx.pool.install(|| {
                examples
                    .par_iter()
                    .map(|e| curation::self_rouge(e, &tokenizer, beta))
                    .collect()
            });
            let out = curation::self_rouge_select_scored(examples, &scores, &q)?;
            used_quotas = Some(q);
            out
        }
    };
    for w in &output.warnings {
        ctx.warn(w.to_string());
    }

    let name = output.recipe.as_str();
    let out_path = ctx.out(&format!("{name}.jsonl"));
    write_corpus(&out_path, &output.examples)?;
    let mut inputs = BTreeMap::new();
    inputs.insert("corpus".to_string(), fsio::file_sha256(&corpus_path)?);
    if let Some(p) = &args.annotations {
        inputs.insert("annotations".to_string(), fsio::file_sha256(p)?);
    }
    if let Some(p) = &args.quotas {
        inputs.insert("quotas".to_string(), fsio::file_sha256(p)?);
    }
    let manifest = CurationManifest {
        tool: TOOL,
        version: VERSION,
        recipe: output.recipe.as_str(),
        seed: output.seed,
        threshold: output.threshold,
        generator: output.generator,
        quotas: used_quotas,
        counts: output.per_language_selected.clone(),
        total: output.examples.len() as u64,
        warnings: output.warnings.iter().map(|w| w.to_string()).collect(),
        settings_hash: ctx.cfg.settings()?.hash(),
        inputs,
        output_sha256: fsio::file_sha256(&out_path)?,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_atomic(ctx.out(&format!("{name}.manifest.json")), &bytes)?;
    Ok(output)
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub predictions: PathBuf,
    /// Corpus file supplying reference summaries and languages.
    pub references: PathBuf,
    /// Corpus file supplying source documents; defaults to `references`.
    pub documents: Option<PathBuf>,
    pub model_id: String,
    pub checkpoint_step: u64,
    /// Metrics table to extend; defaults to `<out>/metrics.csv`.
    pub metrics: Option<PathBuf>,
}

fn texts<F: Fn(&Example) -> &str>(corpus: &Corpus, f: F) -> TextById {
    corpus
        .examples
        .iter()
        .map(|e| (e.id.clone(), f(e).to_string()))
        .collect()
}

fn subset(map: &TextById, ids: &[&String]) -> TextById {
    ids.iter()
        .map(|id| ((*id).clone(), map[*id].clone()))
        .collect()
}

/// Scores predictions against references and documents, one metrics row per
/// language, and appends the rows to the metrics table.
pub fn evaluate(ctx: &mut Context, args: &EvaluateArgs) -> Result<Vec<MetricRecord>> {
    require_file(&args.predictions)?;
    require_file(&args.references)?;
    if let Some(d) = &args.documents {
        require_file(d)?;
    }
    let metrics_path = args
        .metrics
        .clone()
        .unwrap_or_else(|| ctx.out(METRICS_FILE));
    let predictions = tables::read_texts(&args.predictions)?;
    let refs = load_corpus(&args.references, true)?;
    let references = texts(&refs, |e| &e.summary);
    let documents = match &args.documents {
        Some(p) => texts(&load_corpus(p, true)?, |e| &e.document),
        None => texts(&refs, |e| &e.document),
    };
    check_aligned(&predictions, &references)?;
    check_aligned(&predictions, &documents)?;

    let language: BTreeMap<&str, &str> = refs
        .examples
        .iter()
        .map(|e| (e.id.as_str(), e.language.as_str()))
        .collect();
    let mut by_lang: BTreeMap<&str, Vec<&String>> = BTreeMap::new();
    for id in predictions.keys() {
        by_lang.entry(language[id.as_str()]).or_default().push(id);
    }

    let tokenizer = ctx.cfg.tokenizer()?;
    let scorer = ctx.cfg.scorer();
    let beta = ctx.cfg.beta;
    let batch = ctx.cfg.scorer.batch_size;
    let mut rows = Vec::new();
    for (lang, ids) in by_lang {
        let (rouge, scores) = ctx.pool.install(|| {
            let rouge: Vec<f64> = ids
                .par_iter()
                .map(|id| example_rouge(&predictions[*id], &references[*id], &tokenizer, beta))
                .collect();
            let scores: Vec<std::result::Result<Vec<f64>, MetricsError>> = ids
                .par_chunks(batch)
                .map(|chunk| nli_chunk(scorer.as_ref(), chunk, &predictions, &documents))
                .collect();
            (rouge, scores)
        });
        let mut nli = Vec::with_capacity(ids.len());
        for s in scores {
            nli.extend(s?);
        }
        let preds = subset(&predictions, &ids);
        let refs_l = subset(&references, &ids);
        rows.push(MetricRecord {
            model_id: args.model_id.clone(),
            checkpoint_step: args.checkpoint_step,
            language: lang.to_string(),
            rouge_l: percent_mean(rouge).ok_or(MetricsError::Empty)?,
            nli: nli_rate(&nli, ctx.cfg.threshold, ctx.cfg.nli_mode.into())
                .ok_or(MetricsError::Empty)?,
            length_ratio: length_ratio(&preds, &refs_l, &tokenizer)?,
            n_examples: ids.len() as u64,
        });
    }

    let mut all = if metrics_path.exists() {
        tables::read_metrics(&metrics_path)?
    } else {
        Vec::new()
    };
    all.extend(rows.iter().cloned());
    check_unique(&all)?;
    write_atomic(&metrics_path, &tables::metrics_csv(&all))?;
    Ok(rows)
}

fn nli_chunk(
    scorer: &dyn Scorer,
    ids: &[&String],
    predictions: &TextById,
    documents: &TextById,
) -> std::result::Result<Vec<f64>, MetricsError> {
    let pairs: Vec<Pair<'_>> = ids
        .iter()
        .map(|id| Pair::new(&documents[*id], &predictions[*id]))
        .collect();
    let scores = scorer
        .score_batch(&pairs)
        .map_err(|source| MetricsError::Scorer {
            example_id: ids[0].clone(),
            source,
        })?;
    if scores.len() != ids.len() {
        return Err(MetricsError::Scorer {
            example_id: ids[0].clone(),
            source: nlicur_core::entailment::ScoreError::LengthMismatch {
                expected: ids.len(),
                got: scores.len(),
            },
        });
    }
    Ok(scores)
}

pub fn select(
    ctx: &mut Context,
    metrics: &Path,
) -> Result<(Vec<CheckpointChoice>, Vec<EarlierReport>)> {
    let records = tables::read_metrics(metrics)?;
    let choices = select_all(&records, ctx.cfg.weighting.into())?;
    let earlier = best_nli_earlier_report(&choices)?;
    let mut m = ctx.manifest("select-checkpoint")?;
    m.input("metrics", metrics)?;
    let csv = tables::choices_csv(&choices);
    write_atomic(ctx.out(&format!("{CHOICES_FILE}.csv")), &csv)?;
    m.output(&format!("{CHOICES_FILE}.csv"), &csv);
    let md = render::choices_table(&choices).to_markdown();
    write_atomic(ctx.out(&format!("{CHOICES_FILE}.md")), md.as_bytes())?;
    m.output(&format!("{CHOICES_FILE}.md"), md.as_bytes());
    write_table(
        &ctx.cfg.out,
        EARLIER_FILE,
        &render::earlier_table(&earlier),
        &mut m,
    )?;
    m.write(&ctx.out("select-checkpoint.manifest.json"))?;
    Ok((choices, earlier))
}

pub fn aggregate(
    ctx: &mut Context,
    metrics: &Path,
    choices: Option<&Path>,
    groupings: &[Grouping],
) -> Result<Vec<GroupReport>> {
    let records = tables::read_metrics(metrics)?;
    let choices = match choices {
        Some(p) => tables::read_choices(p)?,
        None => select_all(&records, ctx.cfg.weighting.into())?,
    };
    let profiles = ctx.profiles()?;
    let mut m = ctx.manifest("aggregate")?;
    m.input("metrics", metrics)?;
    ctx.record_profiles(&mut m)?;
    let mut reports = Vec::new();
    for &g in groupings {
        let r = group_average(&records, &choices, &profiles, g, ctx.cfg.min_family_size)?;
        write_table(
            &ctx.cfg.out,
            &format!("groups_{g}"),
            &render::group_table(&r),
            &mut m,
        )?;
        reports.push(r);
    }
    m.write(&ctx.out("aggregate.manifest.json"))?;
    Ok(reports)
}

fn humaneval_tables(scores: &[SystemScores], ctx: &Context) -> Vec<(String, Table)> {
    let mode = ctx.cfg.quality_mode.into();
    let mut out: Vec<(String, Table)> = render::MEASURES
        .iter()
        .map(|name| {
            (
                format!("humaneval_{name}"),
                render::humaneval_measure_table(scores, name, mode),
            )
        })
        .collect();
    out.push((
        "humaneval_overall".into(),
        render::humaneval_overall_table(scores, mode),
    ));
    out
}

pub fn humaneval(ctx: &mut Context, ratings: &Path) -> Result<Vec<SystemScores>> {
    let set = tables::read_ratings(ratings)?;
    for w in &set.warnings {
        ctx.warn(w.to_string());
    }
    let scores = score_systems(&set, ctx.cfg.quality_mode.into())?;
    let mut m = ctx.manifest("humaneval")?;
    m.input("ratings", ratings)?;
    for (stem, t) in humaneval_tables(&scores, ctx) {
        write_table(&ctx.cfg.out, &stem, &t, &mut m)?;
    }
    m.write(&ctx.out("humaneval.manifest.json"))?;
    Ok(scores)
}

#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub annotations: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub settings_hash: String,
}

/// Renders every table the inputs allow into the output directory, plus
/// `report.md` with all of them and `manifest.json` with digests.
pub fn report(ctx: &mut Context, inputs: &ReportInputs) -> Result<Bundle> {
    let metrics = inputs.metrics.as_deref().ok_or_else(|| {
        Error::validation("report needs a metrics table (--metrics or [report].metrics)")
    })?;
    for p in [&inputs.annotations, &inputs.ratings].into_iter().flatten() {
        require_file(p)?;
    }
    require_file(metrics)?;

    let mut m = ctx.manifest("report")?;
    let mut tables: Vec<(String, Table)> = Vec::new();

    if let Some(ann_path) = &inputs.annotations {
        let corpus_path = ctx.cfg.corpus()?.to_path_buf();
        let corpus = load_corpus(&corpus_path, ctx.cfg.strict)?;
        let anns = read_annotations(ann_path)?;
        m.input("corpus", &corpus_path)?;
        m.input("annotations", ann_path)?;
        tables.push((
            STATS_FILE.into(),
            render::stats_table(&stats(&corpus.examples, &anns)?),
        ));
    }

    let records = tables::read_metrics(metrics)?;
    m.input("metrics", metrics)?;
    let choices = select_all(&records, ctx.cfg.weighting.into())?;
    let earlier = best_nli_earlier_report(&choices)?;
    tables.push((CHOICES_FILE.into(), render::choices_table(&choices)));
    tables.push((EARLIER_FILE.into(), render::earlier_table(&earlier)));
    let profiles = match &ctx.cfg.profiles {
        Some(p) => load_profiles(p, ctx.cfg.tiers)?,
        None => ctx.profiles()?,
    };
    ctx.record_profiles(&mut m)?;
    for g in Grouping::ALL {
        let r = group_average(&records, &choices, &profiles, g, ctx.cfg.min_family_size)?;
        tables.push((format!("groups_{g}"), render::group_table(&r)));
    }

    if let Some(r) = &inputs.ratings {
        let set = tables::read_ratings(r)?;
        for w in &set.warnings {
            ctx.warn(w.to_string());
        }
        m.input("ratings", r)?;
        let scores = score_systems(&set, ctx.cfg.quality_mode.into())?;
        tables.extend(humaneval_tables(&scores, ctx));
    }

    let dir = ctx.cfg.out.clone();
    let mut files = Vec::new();
    let mut combined = String::from("# Report\n");
    for (stem, t) in &tables {
        write_table(&dir, stem, t, &mut m)?;
        files.push(format!("{stem}.csv"));
        files.push(format!("{stem}.md"));
        combined.push('\n');
        combined.push_str(&t.to_markdown());
    }
    write_atomic(dir.join("report.md"), combined.as_bytes())?;
    m.output("report.md", combined.as_bytes());
    files.push("report.md".into());
    m.write(&dir.join(MANIFEST_FILE))?;
    files.push(MANIFEST_FILE.into());
    Ok(Bundle {
        dir,
        files,
        settings_hash: m.settings_hash,
    })
}
