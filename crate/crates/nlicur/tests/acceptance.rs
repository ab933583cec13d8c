//! End-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed even on success
//! and so the counting allocator sees only one workload at a time.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use common::{nlicur, stderr, synthetic_corpus, synthetic_example, write_corpus, Fault, Stub};
use nlicur::commands::{self, Context, EvaluateArgs};
use nlicur::config::{FileConfig, Overrides, RunConfig};
use nlicur::csvio::CsvTable;
use nlicur::pipeline::{
    annotate_file, annotate_stream, thread_pool, EntailmentCounts, PipelineOptions,
};
use nlicur::remote::{RemoteConfig, RemoteScorer};
use nlicur::{profiles, tables};
use nlicur_core::curation::{
    augment_controlled, filter, prepare_inference, random_select, self_rouge_select,
    CollisionPolicy, ControlTokens,
};
use nlicur_core::entailment::{annotate, EntailmentStats, OracleScorer, Threshold};
use nlicur_core::humaneval::{score_systems, QualityMode, RatingRecord};
use nlicur_core::metrics::MetricRecord;
use nlicur_core::rouge::rouge_l;
use nlicur_core::selection::{best_nli_earlier_report, select_all, Criterion, Weighting};
use nlicur_core::tokenize::Tokenizer;
use nlicur_core::Example;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            if new_size >= layout.size() {
                let now = LIVE.fetch_add(new_size - layout.size(), Ordering::Relaxed) + new_size
                    - layout.size();
                PEAK.fetch_max(now, Ordering::Relaxed);
            } else {
                LIVE.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);
type Fixture = (Vec<String>, Vec<(String, Vec<f64>)>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ctx(out: &Path, workers: usize) -> Context {
    let flags = Overrides {
        out: Some(out.to_path_buf()),
        max_in_flight: Some(workers),
        ..Overrides::default()
    };
    Context::new(RunConfig::resolve(FileConfig::default(), flags, None).unwrap()).unwrap()
}

// 1. Per-language entailment table from annotation counts.
fn stats_from_counts() -> Outcome {
    let start = Instant::now();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/entailment_counts.csv");
    let table = CsvTable::read(
        &fixture,
        &["language", "n_train", "n_entailed", "pct_entailed"],
    )
    .map_err(|e| e.to_string())?;
    let bundled = profiles::default_profiles(Default::default()).map_err(|e| e.to_string())?;
    let key_of: BTreeMap<&str, &str> = bundled
        .iter()
        .map(|r| (r.display_name.as_str(), r.key.as_str()))
        .collect();

    // One annotation per training example, tallied the way `annotate` does.
    let mut counts = EntailmentCounts::default();
    let mut expected = BTreeMap::new();
    for row in table.rows() {
        let name = row.str("language").map_err(|e| e.to_string())?;
        let key = *key_of
            .get(name)
            .ok_or_else(|| format!("no profile for {name}"))?;
        let n: u64 = row.parse("n_train").map_err(|e| e.to_string())?;
        let k: u64 = row.parse("n_entailed").map_err(|e| e.to_string())?;
        for i in 0..n {
            counts.add(key, i < k);
        }
        expected.insert(
            key.to_string(),
            row.float("pct_entailed").map_err(|e| e.to_string())?,
        );
    }
    let stats: EntailmentStats = counts.stats();
    check(stats.rows.len() == 45, || {
        format!("{} languages, expected 45", stats.rows.len())
    })?;
    let mut off = Vec::new();
    for r in &stats.rows {
        let want = expected[&r.language];
        if (r.pct_entailed - want).abs() > 0.01 + 1e-9 {
            off.push(format!("{} {:.2} vs {want}", r.language, r.pct_entailed));
        }
    }
    check(off.is_empty(), || {
        format!("rows off by more than 0.01: {off:?}")
    })?;
    for (lang, want) in [("amharic", 42.67), ("punjabi", 28.29), ("japanese", 68.96)] {
        let got = stats.row(lang).map(|r| r.pct_entailed).unwrap_or(f64::NAN);
        check((got - want).abs() <= 0.01, || {
            format!("{lang} {got:.4} vs {want}")
        })?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    let avg = stats.average.map(|a| a.pct_entailed).unwrap_or(f64::NAN);
    check((avg - 41.37).abs() <= 0.01, || {
        format!("all 45 rows match to 0.01, but the average row is {avg:.2} (expected 41.37)")
    })?;
    Ok(format!(
        "45 rows within 0.01, average {avg:.2}, {elapsed:?}"
    ))
}

fn quadratic_lcs(a: &[u8], b: &[u8]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

// 2. ROUGE-L against a textbook dynamic program.
fn rouge_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seq = |rng: &mut ChaCha8Rng| -> Vec<u8> {
        let n = (rng.next_u32() % 21) as usize;
        (0..n).map(|_| (rng.next_u32() % 5) as u8).collect()
    };
    for case in 0..1000 {
        let (c, r) = (seq(&mut rng), seq(&mut rng));
        let got = rouge_l(&c, &r, 1.0).f;
        let want = match (c.is_empty(), r.is_empty()) {
            (true, true) => 1.0,
            (true, false) | (false, true) => 0.0,
            _ => {
                let l = quadratic_lcs(&c, &r) as f64;
                let (p, rc) = (l / c.len() as f64, l / r.len() as f64);
                if l == 0.0 {
                    0.0
                } else {
                    2.0 * p * rc / (p + rc)
                }
            }
        };
        check((got - want).abs() < 1e-12, || {
            format!("case {case}: {c:?} vs {r:?}: {got} != {want}")
        })?;
        if !c.is_empty() {
            check(rouge_l(&c, &c, 1.0).f == 1.0, || format!("identity {c:?}"))?;
            let disjoint: Vec<u8> = c.iter().map(|x| x + 5).collect();
            check(rouge_l(&c, &disjoint, 1.0).f == 0.0, || {
                format!("disjoint {c:?}")
            })?;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("1000 cases exact, {elapsed:?}"))
}

// 3. Filter, controlled and inference recipes on a 10k corpus.
fn curation_partition() -> Outcome {
    let corpus = synthetic_corpus(10_000, 3);
    let th = Threshold::default();
    let anns = annotate(&OracleScorer, &corpus, th, 64).map_err(|e| e.to_string())?;
    let by_id: BTreeMap<&str, bool> = anns
        .iter()
        .map(|a| (a.example_id.as_str(), a.entailed))
        .collect();

    let kept = filter(&corpus, &anns, th).map_err(|e| e.to_string())?;
    let kept_ids: BTreeSet<&str> = kept.examples.iter().map(|e| e.id.as_str()).collect();
    let complement: BTreeSet<&str> = corpus
        .iter()
        .map(|e| e.id.as_str())
        .filter(|id| !kept_ids.contains(id))
        .collect();
    check(kept_ids.len() + complement.len() == corpus.len(), || {
        "filter and complement overlap".into()
    })?;
    check(kept_ids.iter().all(|id| by_id[id]), || {
        "a kept example is not entailed".into()
    })?;
    check(complement.iter().all(|id| !by_id[id]), || {
        "an entailed example was dropped".into()
    })?;
    check(!kept_ids.is_empty() && !complement.is_empty(), || {
        "degenerate split".into()
    })?;

    let tokens = ControlTokens::default();
    let ctl = augment_controlled(&corpus, &anns, &tokens, CollisionPolicy::Error)
        .map_err(|e| e.to_string())?;
    check(ctl.examples.len() == corpus.len(), || {
        "controlled changed the size".into()
    })?;
    for (src, dst) in corpus.iter().zip(&ctl.examples) {
        let tok = if by_id[src.id.as_str()] {
            &tokens.pos
        } else {
            &tokens.neg
        };
        check(dst.document == format!("{tok} {}", src.document), || {
            format!("{} wrong prefix", src.id)
        })?;
        check(
            tokens.strip(&dst.document) == Some(src.document.as_str()),
            || format!("{} not invertible", src.id),
        )?;
        check(
            dst.summary == src.summary && dst.language == src.language,
            || format!("{} altered", src.id),
        )?;
    }

    let inf = prepare_inference(&corpus, &tokens.pos, CollisionPolicy::Error)
        .map_err(|e| e.to_string())?;
    let prefixed = inf
        .examples
        .iter()
        .filter(|e| e.document.starts_with("<entailed> "))
        .count();
    check(prefixed == corpus.len(), || {
        format!("{prefixed} of {} prefixed", corpus.len())
    })?;
    Ok(format!(
        "{} kept, {} dropped, controlled and inference exact",
        kept_ids.len(),
        complement.len()
    ))
}

// 4. Baselines match the filtered per-language counts.
fn quota_equality() -> Outcome {
    let corpus = synthetic_corpus(10_000, 4);
    let th = Threshold::default();
    let anns = annotate(&OracleScorer, &corpus, th, 64).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus_path = dir.path().join("train.jsonl");
    let ann_path = dir.path().join("annotations.jsonl");
    write_corpus(&corpus_path, &corpus);
    let mut buf = Vec::new();
    for a in &anns {
        nlicur::annotations::write_annotation(&mut buf, a).map_err(|e| e.to_string())?;
    }
    fs::write(&ann_path, buf).map_err(|e| e.to_string())?;

    // Quotas travel through the filtered manifest as a user would pass them.
    let out = dir.path().join("out");
    let run = |args: &[&str]| {
        let mut full = vec![
            "curate",
            "--corpus",
            corpus_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        full.extend_from_slice(args);
        let o = nlicur(&full);
        if o.status.success() {
            Ok(())
        } else {
            Err(stderr(&o))
        }
    };
    run(&[
        "--recipe",
        "filtered",
        "--annotations",
        ann_path.to_str().unwrap(),
    ])?;
    let manifest = out.join("filtered.manifest.json");
    let quotas = commands::read_quotas(&manifest).map_err(|e| e.to_string())?;
    let filtered = filter(&corpus, &anns, th).map_err(|e| e.to_string())?;
    check(quotas == filtered.per_language_selected, || {
        "manifest counts differ from filter".into()
    })?;

    let tok = Tokenizer::Whitespace { lowercase: false };
    let sr = self_rouge_select(&corpus, &quotas, &tok, 1.0).map_err(|e| e.to_string())?;
    check(sr.per_language_selected == quotas, || {
        "self-rouge counts differ".into()
    })?;
    let draws: Vec<Vec<String>> = (0..3)
        .map(|_| {
            random_select(&corpus, &quotas, 42)
                .map(|o| o.examples.iter().map(|e| e.id.clone()).collect())
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let rnd = random_select(&corpus, &quotas, 42).map_err(|e| e.to_string())?;
    check(rnd.per_language_selected == quotas, || {
        "random counts differ".into()
    })?;
    check(draws[0] == draws[1] && draws[1] == draws[2], || {
        "random selection not reproducible".into()
    })?;

    // The CLI path yields byte-identical files across repeated runs.
    let mut bytes = Vec::new();
    for _ in 0..3 {
        run(&[
            "--recipe",
            "random",
            "--quotas",
            manifest.to_str().unwrap(),
            "--seed",
            "42",
        ])?;
        bytes.push(fs::read(out.join("random.jsonl")).map_err(|e| e.to_string())?);
    }
    check(bytes[0] == bytes[1] && bytes[1] == bytes[2], || {
        "random.jsonl differs between runs".into()
    })?;
    run(&[
        "--recipe",
        "self-rouge",
        "--quotas",
        manifest.to_str().unwrap(),
    ])?;
    let sr_cli =
        commands::read_quotas(&out.join("self_rouge.manifest.json")).map_err(|e| e.to_string())?;
    check(sr_cli == quotas, || "CLI self-rouge counts differ".into())?;
    Ok(format!(
        "{} languages, {} examples per baseline",
        quotas.len(),
        quotas.values().sum::<u64>()
    ))
}

// 5. Checkpoint selection on a table whose means peak at known steps.
fn checkpoint_selection() -> Outcome {
    let peaks = [
        ("vanilla", 3600u64, 15000u64),
        ("filtered", 2200, 12000),
        ("controlled", 3400, 8800),
    ];
    let mut records = Vec::new();
    for (mi, (model, nli_peak, rouge_peak)) in peaks.iter().enumerate() {
        for step in (200..=16_000).step_by(200) {
            for (li, lang) in common::LANGS.iter().enumerate() {
                let wobble = ((li * 37 + (step as usize / 200) * 11 + mi) % 7) as f64 * 0.01 - 0.03;
                let off = li as f64 * 1.5;
                records.push(MetricRecord {
                    model_id: model.to_string(),
                    checkpoint_step: step,
                    language: lang.to_string(),
                    rouge_l: 30.0 + off - step.abs_diff(*rouge_peak) as f64 / 1000.0 + wobble,
                    nli: 60.0 + off - step.abs_diff(*nli_peak) as f64 / 500.0 - wobble,
                    length_ratio: 0.9,
                    n_examples: 50 + li as u64,
                });
            }
        }
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("metrics.csv");
    fs::write(&path, tables::metrics_csv(&records)).map_err(|e| e.to_string())?;
    let records = tables::read_metrics(&path).map_err(|e| e.to_string())?;
    let choices = select_all(&records, Weighting::Unweighted).map_err(|e| e.to_string())?;
    for (model, nli_peak, rouge_peak) in peaks {
        for (criterion, want) in [(Criterion::Nli, nli_peak), (Criterion::Rouge, rouge_peak)] {
            let got = choices
                .iter()
                .find(|c| c.model_id == model && c.criterion == criterion)
                .map(|c| c.checkpoint_step);
            check(got == Some(want), || {
                format!("{model} {criterion}: {got:?}, expected {want}")
            })?;
        }
    }
    let earlier = best_nli_earlier_report(&choices).map_err(|e| e.to_string())?;
    check(
        earlier.len() == 3 && earlier.iter().all(|r| r.nli_earlier),
        || format!("{earlier:?}"),
    )?;
    Ok("all six checkpoints exact; best-NLI earlier for all three models".into())
}

// 6. Human-evaluation overall rates from per-language positive fractions.
fn humaneval_rates() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let read = |name: &str| -> Result<Fixture, String> {
        let text = fs::read_to_string(fixtures.join(name)).map_err(|e| e.to_string())?;
        let mut rows = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rows
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .skip(1)
            .map(String::from)
            .collect();
        let body = rows
            .records()
            .map(|r| {
                let r = r.map_err(|e| e.to_string())?;
                let vals = r
                    .iter()
                    .skip(1)
                    .map(|v| v.parse::<f64>().map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?;
                Ok((r[0].to_string(), vals))
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok((header, body))
    };
    let (systems, attribution) = read("humaneval_attribution.csv")?;
    let (systems_i, informativeness) = read("humaneval_informativeness.csv")?;
    check(systems == systems_i && attribution.len() == 45, || {
        "fixture layout".into()
    })?;

    // 100 items, 3 raters each: 300 ratings per language and system.
    let mut records = Vec::new();
    for ((lang, a), (lang_i, inf)) in attribution.iter().zip(&informativeness) {
        check(lang == lang_i, || {
            format!("language order {lang} / {lang_i}")
        })?;
        for (s, system) in systems.iter().enumerate() {
            let (pa, pi) = (
                (a[s] * 300.0).round() as usize,
                (inf[s] * 300.0).round() as usize,
            );
            for k in 0..300 {
                records.push(RatingRecord {
                    example_id: format!("{lang}-{:03}", k / 3),
                    language: nlicur_core::normalize_language_key(lang),
                    system_id: system.clone(),
                    rater_id: format!("r{}", k % 3),
                    quality: 3,
                    attribution: u8::from(k < pa),
                    informativeness: u8::from(k < pi),
                });
            }
        }
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("ratings.csv");
    fs::write(&path, tables::ratings_csv(&records)).map_err(|e| e.to_string())?;
    let set = tables::read_ratings(&path).map_err(|e| e.to_string())?;
    check(set.warnings.is_empty(), || {
        format!("{} rater-count warnings", set.warnings.len())
    })?;
    let scores = score_systems(&set, QualityMode::TopLabel).map_err(|e| e.to_string())?;

    let expected_attr = [0.44, 0.47, 0.46, 0.52, 0.49, 0.47, 0.31];
    let expected_inf = [0.37, 0.40, 0.39, 0.45, 0.41, 0.40, 0.27];
    let mut lines = Vec::new();
    for (s, system) in systems.iter().enumerate() {
        let got = scores
            .iter()
            .find(|x| &x.system_id == system)
            .ok_or_else(|| format!("no scores for {system}"))?;
        let (a, i) = (got.overall.attribution, got.overall.informativeness);
        check((a - expected_attr[s]).abs() <= 0.01 + 1e-9, || {
            format!("{system} attribution {a:.4} vs {}", expected_attr[s])
        })?;
        check((i - expected_inf[s]).abs() <= 0.01 + 1e-9, || {
            format!("{system} informativeness {i:.4} vs {}", expected_inf[s])
        })?;
        lines.push(format!("{system} {a:.2}/{i:.2}"));
    }
    Ok(lines.join(", "))
}

fn write_texts(path: &Path, examples: &[Example], f: impl Fn(&Example) -> String) {
    let texts = examples.iter().map(|e| (e.id.clone(), f(e))).collect();
    fs::write(path, tables::texts_jsonl(&texts)).unwrap();
}

// 7. Length ratio of references against themselves and a constructed pair.
fn length_ratio_contract() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let refs = dir.path().join("refs.jsonl");
    let corpus = synthetic_corpus(300, 7);
    write_corpus(&refs, &corpus);
    let preds = dir.path().join("self.jsonl");
    write_texts(&preds, &corpus, |e| e.summary.clone());
    let mut c = ctx(dir.path(), 4);
    let args = |predictions: PathBuf, references: PathBuf, model: &str| EvaluateArgs {
        predictions,
        references,
        documents: None,
        model_id: model.into(),
        checkpoint_step: 1,
        metrics: None,
    };
    let rows =
        commands::evaluate(&mut c, &args(preds, refs, "human")).map_err(|e| e.to_string())?;
    check(rows.iter().all(|r| r.length_ratio == 1.0), || {
        format!("{rows:?}")
    })?;

    let pair = vec![
        Example::new("a", "welsh", "doc one two", "w x y z"),
        Example::new("b", "welsh", "doc three", "p q"),
    ];
    let refs2 = dir.path().join("pair.jsonl");
    write_corpus(&refs2, &pair);
    let preds2 = dir.path().join("pair_preds.jsonl");
    write_texts(&preds2, &pair, |e| {
        if e.id == "a" {
            "w x".into()
        } else {
            "p q".into()
        }
    });
    let rows2 = commands::evaluate(&mut c, &args(preds2, refs2, "constructed"))
        .map_err(|e| e.to_string())?;
    check(rows2.len() == 1 && rows2[0].length_ratio == 0.75, || {
        format!("{rows2:?}")
    })?;
    let table = fs::read_to_string(dir.path().join("metrics.csv")).map_err(|e| e.to_string())?;
    check(table.contains(",0.750000,2\n"), || {
        "metrics table lacks the 0.75 row".into()
    })?;
    Ok(format!(
        "self-evaluation 1.00 over {} languages; constructed pair 0.75",
        rows.len()
    ))
}

// 8. Remote scorer against a local stub.
fn remote_robustness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("c.jsonl");
    write_corpus(&corpus, &synthetic_corpus(10_000, 8));
    let pool = thread_pool(4).map_err(|e| e.to_string())?;
    let config = |url: &str| RemoteConfig {
        max_retries: 5,
        initial_backoff: Duration::from_millis(1),
        max_backoff: Duration::from_millis(8),
        ..RemoteConfig::new(url)
    };
    let mut files = Vec::new();
    let mut notes = Vec::new();
    for batch_size in [1usize, 7, 64] {
        let stub = Stub::start(Fault::EveryNth(10));
        let scorer = RemoteScorer::new(config(&stub.url));
        let out = dir.path().join(format!("remote-{batch_size}.jsonl"));
        let opts = PipelineOptions {
            threshold: Threshold::default(),
            batch_size,
            max_in_flight: 4,
        };
        annotate_file(&corpus, &out, &scorer, opts, true, false, &pool)
            .map_err(|e| format!("batch {batch_size}: {e}"))?;
        let injected = stub.injected.load(Ordering::SeqCst);
        check(injected > 0, || {
            format!("batch {batch_size}: no failures injected")
        })?;
        check(scorer.retry_count() == injected, || {
            format!(
                "batch {batch_size}: {} retries for {injected} failures",
                scorer.retry_count()
            )
        })?;
        notes.push(format!("b={batch_size}: {injected} retried"));
        files.push(fs::read(&out).map_err(|e| e.to_string())?);
    }
    check(files.iter().all(|f| f == &files[0]), || {
        "annotation files differ across batch sizes".into()
    })?;

    // Scores agree with the in-process oracle the stub wraps.
    let local = dir.path().join("local.jsonl");
    let opts = PipelineOptions {
        threshold: Threshold::default(),
        batch_size: 64,
        max_in_flight: 4,
    };
    annotate_file(&corpus, &local, &OracleScorer, opts, true, false, &pool)
        .map_err(|e| e.to_string())?;
    let relabel = String::from_utf8_lossy(&files[0]).replace(
        "\"scorer_id\":\"remote\"",
        &format!("\"scorer_id\":\"{}\"", OracleScorer::ID),
    );
    check(
        relabel == fs::read_to_string(&local).map_err(|e| e.to_string())?,
        || "remote scores differ from oracle".into(),
    )?;

    let short = Stub::start(Fault::Short);
    let scorer = RemoteScorer::new(config(&short.url));
    let out = dir.path().join("short.jsonl");
    let err = match annotate_file(&corpus, &out, &scorer, opts, true, false, &pool) {
        Ok(_) => return Err("length mismatch was accepted".into()),
        Err(e) => e,
    };
    check(err.to_string().contains("protocol violation"), || {
        format!("unexpected error: {err}")
    })?;
    check(err.exit_code() == 2, || {
        format!("exit code {}", err.exit_code())
    })?;
    check(scorer.retry_count() == 0, || {
        "length mismatch was retried".into()
    })?;
    check(!out.exists(), || "mismatch left a final output file".into())?;
    Ok(format!(
        "identical files for batch 1/7/64 ({}); mismatch aborts",
        notes.join(", ")
    ))
}

struct StreamRun {
    peak_bytes: usize,
    peak_buffered: usize,
    elapsed: Duration,
    entailed: u64,
}

fn stream(n: u64, opts: PipelineOptions, pool: &rayon::ThreadPool) -> Result<StreamRun, String> {
    let start = Instant::now();
    let base = LIVE.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    let mut entailed = 0u64;
    let mut seen = 0u64;
    let report = annotate_stream(
        (0..n).map(|i| Ok(synthetic_example(i, 9))),
        &OracleScorer,
        opts,
        pool,
        |_, a| {
            seen += 1;
            entailed += u64::from(a.entailed);
            Ok(())
        },
    )
    .map_err(|e| e.to_string())?;
    check(report.examples == n && seen == n, || {
        format!("{} of {n} examples annotated", report.examples)
    })?;
    Ok(StreamRun {
        peak_bytes: PEAK.load(Ordering::SeqCst).saturating_sub(base),
        peak_buffered: report.peak_buffered,
        elapsed: start.elapsed(),
        entailed,
    })
}

// 9. One streaming pass over a million examples in bounded memory.
fn streaming_scale() -> Outcome {
    let pool = thread_pool(8).map_err(|e| e.to_string())?;
    let opts = PipelineOptions {
        threshold: Threshold::default(),
        batch_size: 256,
        max_in_flight: 8,
    };
    let small = stream(100_000, opts, &pool)?;
    let big = stream(1_000_000, opts, &pool)?;
    check(big.peak_buffered <= opts.window(), || {
        format!("buffered {} > window {}", big.peak_buffered, opts.window())
    })?;
    check(
        big.peak_bytes <= small.peak_bytes + small.peak_bytes / 4 + (1 << 20),
        || {
            format!(
                "peak heap grew from {} B (100k) to {} B (1M)",
                small.peak_bytes, big.peak_bytes
            )
        },
    )?;
    check(big.elapsed < Duration::from_secs(300), || {
        format!("took {:?}", big.elapsed)
    })?;
    Ok(format!(
        "1M examples in {:.1?}, {} entailed, peak heap {} KiB (100k: {} KiB), peak buffered {}",
        big.elapsed,
        big.entailed,
        big.peak_bytes / 1024,
        small.peak_bytes / 1024,
        big.peak_buffered
    ))
}

fn prediction(e: &Example, model: usize, step: usize) -> String {
    let words: Vec<&str> = e.summary.split_whitespace().collect();
    let doc: Vec<&str> = e.document.split_whitespace().collect();
    let mut out: Vec<&str> = words
        .iter()
        .enumerate()
        .filter(|(i, _)| !(i + step).is_multiple_of(model + 3))
        .map(|(_, w)| *w)
        .collect();
    out.extend(doc.iter().skip(step).take(model + step % 3));
    if out.is_empty() {
        out.push(doc[0]);
    }
    out.join(" ")
}

fn synthetic_ratings(path: &Path) {
    let mut records = Vec::new();
    for (li, lang) in common::LANGS.iter().enumerate() {
        for item in 0..4 {
            for (si, system) in ["filtered-best-nli", "vanilla-best-rouge"]
                .iter()
                .enumerate()
            {
                for rater in 0..3 {
                    let h = li * 31 + item * 7 + si * 5 + rater * 3;
                    records.push(RatingRecord {
                        example_id: format!("{lang}-{item}"),
                        language: lang.to_string(),
                        system_id: system.to_string(),
                        rater_id: format!("r{rater}"),
                        quality: 1 + (h % 3) as u8,
                        attribution: (h % 2) as u8,
                        informativeness: ((h / 2) % 2) as u8,
                    });
                }
            }
        }
    }
    fs::write(path, tables::ratings_csv(&records)).unwrap();
}

fn pipeline(inputs: &Path, out: &Path, workers: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let p = |name: &str| inputs.join(name).to_str().unwrap().to_string();
    let o = out.to_str().unwrap().to_string();
    let ann = out.join("annotations.jsonl").to_str().unwrap().to_string();
    let metrics = out.join("metrics.csv").to_str().unwrap().to_string();
    let common = [
        "--out",
        o.as_str(),
        "--workers",
        workers,
        "--batch-size",
        "8",
    ];
    let mut steps: Vec<Vec<String>> = vec![
        vec!["annotate".into(), "--corpus".into(), p("train.jsonl")],
        vec![
            "curate".into(),
            "--recipe".into(),
            "filtered".into(),
            "--corpus".into(),
            p("train.jsonl"),
            "--annotations".into(),
            ann.clone(),
        ],
        vec![
            "curate".into(),
            "--recipe".into(),
            "controlled".into(),
            "--corpus".into(),
            p("train.jsonl"),
            "--annotations".into(),
            ann.clone(),
        ],
        vec![
            "curate".into(),
            "--recipe".into(),
            "self-rouge".into(),
            "--corpus".into(),
            p("train.jsonl"),
            "--quotas".into(),
            out.join("filtered.manifest.json").to_str().unwrap().into(),
        ],
    ];
    for model in ["vanilla", "filtered", "controlled"] {
        for step in ["200", "400", "600", "800"] {
            steps.push(vec![
                "evaluate".into(),
                "--predictions".into(),
                p(&format!("pred-{model}-{step}.jsonl")),
                "--references".into(),
                p("test.jsonl"),
                "--model-id".into(),
                model.into(),
                "--step".into(),
                step.into(),
            ]);
        }
    }
    steps.push(vec![
        "select-checkpoint".into(),
        "--metrics".into(),
        metrics.clone(),
    ]);
    steps.push(vec![
        "aggregate".into(),
        "--metrics".into(),
        metrics.clone(),
        "--choices".into(),
        out.join("choices.csv").to_str().unwrap().into(),
    ]);
    steps.push(vec![
        "humaneval".into(),
        "--ratings".into(),
        p("ratings.csv"),
    ]);
    steps.push(vec![
        "report".into(),
        "--corpus".into(),
        p("train.jsonl"),
        "--annotations".into(),
        ann,
        "--metrics".into(),
        metrics,
        "--ratings".into(),
        p("ratings.csv"),
    ]);
    for step in steps {
        let args: Vec<&str> = step.iter().map(String::as_str).chain(common).collect();
        let r = nlicur(&args);
        if !r.status.success() {
            return Err(format!("{}: {}", step[0], stderr(&r)));
        }
    }
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(out).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.insert(name, fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

// 10. The whole pipeline is byte-for-byte reproducible.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let inputs = dir.path().join("inputs");
    fs::create_dir_all(&inputs).map_err(|e| e.to_string())?;
    write_corpus(&inputs.join("train.jsonl"), &synthetic_corpus(600, 10));
    let test: Vec<Example> = (0..120)
        .map(|i| synthetic_example(1_000_000 + i, 10))
        .collect();
    write_corpus(&inputs.join("test.jsonl"), &test);
    for (mi, model) in ["vanilla", "filtered", "controlled"].iter().enumerate() {
        for (si, step) in ["200", "400", "600", "800"].iter().enumerate() {
            write_texts(
                &inputs.join(format!("pred-{model}-{step}.jsonl")),
                &test,
                |e| prediction(e, mi, si),
            );
        }
    }
    synthetic_ratings(&inputs.join("ratings.csv"));

    let a = pipeline(&inputs, &dir.path().join("a"), "1")?;
    let b = pipeline(&inputs, &dir.path().join("b"), "1")?;
    let c = pipeline(&inputs, &dir.path().join("c"), "8")?;
    for name in [
        "report.md",
        "manifest.json",
        "entailment_stats.csv",
        "choices.csv",
        "groups_family.csv",
        "humaneval_overall.csv",
    ] {
        check(a.contains_key(name), || format!("bundle lacks {name}"))?;
    }
    for (label, other) in [("repeat", &b), ("8 workers", &c)] {
        let names: Vec<&String> = a.keys().collect();
        check(names == other.keys().collect::<Vec<_>>(), || {
            format!("{label}: different file sets")
        })?;
        let differing: Vec<&String> = a
            .iter()
            .filter(|(k, v)| other[*k] != **v)
            .map(|(k, _)| k)
            .collect();
        check(differing.is_empty(), || {
            format!("{label}: files differ: {differing:?}")
        })?;
    }
    Ok(format!(
        "{} files identical across 2 runs and 1 vs 8 workers",
        a.len()
    ))
}

fn main() {
    let criteria: [Check; 10] = [
        ("entailment table from counts", stats_from_counts),
        ("ROUGE-L oracle equivalence", rouge_oracle),
        ("curation partition invariants", curation_partition),
        ("baseline quota equality", quota_equality),
        ("checkpoint selection", checkpoint_selection),
        ("human-evaluation rates", humaneval_rates),
        ("length-ratio contract", length_ratio_contract),
        ("remote-scorer robustness", remote_robustness),
        ("streaming scale", streaming_scale),
        ("determinism envelope", determinism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if filter
            .as_deref()
            .is_some_and(|f| !name.contains(f) && f != n.to_string())
        {
            continue;
        }
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
