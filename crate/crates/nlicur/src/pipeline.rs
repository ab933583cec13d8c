//! Streaming, order-preserving annotation.
//!
//! Examples are pulled into a window of at most `batch_size * max_in_flight`
//! items, the window's batches are scored concurrently, and the annotations are
//! handed to the sink in corpus order before the next window is read. Memory
//! therefore depends on the window, never on the corpus size.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use nlicur_core::entailment::{annotate_batch, EntailmentStats, Scorer, Threshold};
use nlicur_core::{EntailmentAnnotation, Example};
use rayon::prelude::*;

use crate::annotations::{parse_annotation, write_annotation};
use crate::corpus_io::{open_corpus, LineError};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub threshold: Threshold,
    pub batch_size: usize,
    /// Batches scored concurrently.
    pub max_in_flight: usize,
}

impl PipelineOptions {
    pub fn window(&self) -> usize {
        self.batch_size.saturating_mul(self.max_in_flight)
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be at least 1"));
        }
        if self.max_in_flight == 0 {
            return Err(Error::validation(
                "max in-flight batches must be at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineReport {
    pub examples: u64,
    pub batches: u64,
    /// Largest number of examples held in memory at once.
    pub peak_buffered: usize,
}

/// Annotates `examples` and feeds `(example, annotation)` pairs to `sink` in input order.
///
/// On a scorer error every annotation that precedes the failing batch has
/// already been delivered, so a sink writing to disk leaves a valid prefix.
pub fn annotate_stream<I, S, F>(
    examples: I,
    scorer: &S,
    opts: PipelineOptions,
    pool: &rayon::ThreadPool,
    mut sink: F,
) -> Result<PipelineReport>
where
    I: IntoIterator<Item = Result<Example>>,
    S: Scorer + ?Sized,
    F: FnMut(&Example, &EntailmentAnnotation) -> Result<()>,
{
    opts.validate()?;
    let window_cap = opts.window();
    let mut report = PipelineReport::default();
    let mut window: Vec<Example> = Vec::with_capacity(window_cap.min(1 << 16));
    let mut source = examples.into_iter();
    loop {
        window.clear();
        for item in source.by_ref() {
            window.push(item?);
            if window.len() == window_cap {
                break;
            }
        }
        if window.is_empty() {
            return Ok(report);
        }
        report.peak_buffered = report.peak_buffered.max(window.len());
        let results: Vec<_> = if opts.max_in_flight == 1 {
            window
                .chunks(opts.batch_size)
                .map(|c| annotate_batch(scorer, c, opts.threshold))
                .collect()
        } else {
            pool.install(|| {
                window
                    .par_chunks(opts.batch_size)
                    .map(|c| annotate_batch(scorer, c, opts.threshold))
                    .collect()
            })
        };
        for (chunk, result) in window.chunks(opts.batch_size).zip(results) {
            let anns = result?;
            report.batches += 1;
            for (ex, ann) in chunk.iter().zip(&anns) {
                sink(ex, ann)?;
                report.examples += 1;
            }
        }
    }
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .thread_name(|i| format!("nlicur-worker-{i}"))
        .build()
        .map_err(|e| Error::validation(format!("cannot start worker pool: {e}")))
}

/// Per-language `(n_train, n_entailed)` tallies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntailmentCounts(pub BTreeMap<String, (u64, u64)>);

impl EntailmentCounts {
    pub fn add(&mut self, language: &str, entailed: bool) {
        let e = match self.0.get_mut(language) {
            Some(e) => e,
            None => self.0.entry(language.to_string()).or_default(),
        };
        e.0 += 1;
        e.1 += u64::from(entailed);
    }

    pub fn stats(&self) -> EntailmentStats {
        EntailmentStats::from_counts(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateSummary {
    pub report: PipelineReport,
    /// Annotations reused from an interrupted run.
    pub resumed: u64,
    /// Malformed corpus lines dropped in non-strict mode.
    pub skipped_lines: u64,
    pub counts: EntailmentCounts,
}

pub fn partial_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Walks the complete, parseable lines at the start of a partial annotation
/// file and returns their total byte length.
fn valid_prefix<F>(path: &Path, mut each: F) -> Result<u64>
where
    F: FnMut(EntailmentAnnotation) -> Result<()>,
{
    let mut reader = crate::fsio::open(path)?;
    let mut offset = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 || !line.ends_with('\n') {
            return Ok(offset);
        }
        match parse_annotation(line.trim_end()) {
            Ok(a) => each(a)?,
            Err(_) => return Ok(offset),
        }
        offset += n as u64;
    }
}

/// Annotates the corpus at `corpus` into `out`.
///
/// Lines are appended to `<out>.partial` as batches complete, and the file is
/// renamed to `out` once the whole corpus is done. With `resume`, an existing
/// partial file is checked against the corpus prefix and extended.
pub fn annotate_file<S: Scorer + ?Sized>(
    corpus: &Path,
    out: &Path,
    scorer: &S,
    opts: PipelineOptions,
    strict: bool,
    resume: bool,
    pool: &rayon::ThreadPool,
) -> Result<AnnotateSummary> {
    opts.validate()?;
    let partial = partial_path(out);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut reader = open_corpus(corpus)?;
    let mut counts = EntailmentCounts::default();
    let mut skipped_lines = 0u64;
    let mut next_example =
        |reader: &mut crate::corpus_io::CorpusReader<_>| -> Option<Result<Example>> {
            loop {
                match reader.next()? {
                    Ok(ex) => return Some(Ok(ex)),
                    Err(LineError { line, message }) if strict => {
                        return Some(Err(Error::parse(corpus, line, message)))
                    }
                    Err(_) => skipped_lines += 1,
                }
            }
        };

    let mut resumed = 0u64;
    let file = if resume && partial.exists() {
        let offset = valid_prefix(&partial, |a| {
            let ex = match next_example(&mut reader) {
                Some(r) => r?,
                None => {
                    return Err(Error::validation(format!(
                        "{} has more annotations than {} has examples",
                        partial.display(),
                        corpus.display()
                    )))
                }
            };
            if ex.id != a.example_id
                || a.threshold != opts.threshold.get()
                || a.scorer_id != scorer.id()
            {
                return Err(Error::validation(format!(
                    "{} does not match this run at example `{}`; remove it or run without --resume",
                    partial.display(),
                    ex.id
                )));
            }
            counts.add(&ex.language, a.entailed);
            resumed += 1;
            Ok(())
        })?;
        let mut f = OpenOptions::new()
            .write(true)
            .open(&partial)
            .map_err(|e| Error::io(&partial, e))?;
        f.set_len(offset).map_err(|e| Error::io(&partial, e))?;
        f.seek(SeekFrom::End(0))
            .map_err(|e| Error::io(&partial, e))?;
        f
    } else {
        File::create(&partial).map_err(|e| Error::io(&partial, e))?
    };

    let mut w = BufWriter::new(file);
    let source = std::iter::from_fn(|| next_example(&mut reader));
    let result = annotate_stream(source, scorer, opts, pool, |ex, ann| {
        counts.add(&ex.language, ann.entailed);
        write_annotation(&mut w, ann).map_err(|e| Error::io(&partial, e))
    });
    // Keep whatever was scored, even on failure, so the run can resume.
    w.flush().map_err(|e| Error::io(&partial, e))?;
    let report = result?;
    let file = w
        .into_inner()
        .map_err(|e| Error::io(&partial, e.into_error()))?;
    file.sync_all().map_err(|e| Error::io(&partial, e))?;
    drop(file);
    fs::rename(&partial, out).map_err(|e| Error::io(out, e))?;
    Ok(AnnotateSummary {
        report,
        resumed,
        skipped_lines,
        counts,
    })
}
