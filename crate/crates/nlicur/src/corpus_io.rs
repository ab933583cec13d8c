//! Line-delimited JSON corpus reading and writing.
//!
//! Each line is an object with string fields `id`, `language`, `document` and
//! `summary`. Any other field is kept as raw JSON and written back verbatim.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use indexmap::IndexMap;
use nlicur_core::corpus::{counts_by_language, ProfileTable};
use nlicur_core::Example;
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::fsio;

const CORE_FIELDS: [&str; 4] = ["id", "language", "document", "summary"];

/// A line that could not be turned into a valid [`Example`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    /// 1-based line number.
    pub line: u64,
    pub message: String,
}

/// Parses one corpus line.
pub fn parse_example(line: &str) -> Result<Example, String> {
    let fields: IndexMap<String, Box<RawValue>> =
        serde_json::from_str(line).map_err(|e| e.to_string())?;
    let mut core: [Option<String>; 4] = Default::default();
    let mut passthrough = Vec::new();
    for (name, raw) in fields {
        match CORE_FIELDS.iter().position(|f| *f == name) {
            Some(i) => {
                let s: String = serde_json::from_str(raw.get())
                    .map_err(|_| format!("field `{name}` must be a string"))?;
                core[i] = Some(s);
            }
            None => passthrough.push((name, raw.get().to_owned())),
        }
    }
    let [id, language, document, summary] = core;
    let take = |v: Option<String>, name: &str| v.ok_or_else(|| format!("missing field `{name}`"));
    let mut ex = Example::new(
        take(id, "id")?,
        take(language, "language")?,
        take(document, "document")?,
        take(summary, "summary")?,
    );
    ex.passthrough = passthrough;
    ex.validate().map_err(|e| e.to_string())?;
    Ok(ex)
}

/// Serializes an example as one JSON line (without the newline).
pub fn example_to_json(ex: &Example) -> String {
    let mut s = String::with_capacity(ex.document.len() + ex.summary.len() + 64);
    s.push('{');
    let fields = [
        ("id", &ex.id),
        ("language", &ex.language),
        ("document", &ex.document),
        ("summary", &ex.summary),
    ];
    for (i, (k, v)) in fields.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&json_string(k));
        s.push(':');
        s.push_str(&json_string(v));
    }
    for (k, raw) in &ex.passthrough {
        s.push(',');
        s.push_str(&json_string(k));
        s.push(':');
        s.push_str(raw);
    }
    s.push('}');
    s
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

pub fn write_example<W: Write>(w: &mut W, ex: &Example) -> std::io::Result<()> {
    w.write_all(example_to_json(ex).as_bytes())?;
    w.write_all(b"\n")
}

/// Streams examples from a line-delimited reader, one item per non-blank line.
pub struct CorpusReader<R> {
    inner: R,
    line: u64,
    buf: String,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            buf: String::new(),
        }
    }

    /// Number of lines consumed so far.
    pub fn line(&self) -> u64 {
        self.line
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<Example, LineError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.line += 1;
                    return Some(Err(LineError {
                        line: self.line,
                        message: e.to_string(),
                    }));
                }
            }
            self.line += 1;
            let text = self.buf.trim_end_matches(['\n', '\r']);
            if text.trim().is_empty() {
                continue;
            }
            return Some(parse_example(text).map_err(|message| LineError {
                line: self.line,
                message,
            }));
        }
    }
}

pub fn open_corpus(
    path: impl AsRef<Path>,
) -> Result<CorpusReader<std::io::BufReader<std::fs::File>>> {
    Ok(CorpusReader::new(fsio::open(path)?))
}

/// A fully loaded corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub source_uri: String,
    pub examples: Vec<Example>,
    pub counts_by_language: BTreeMap<String, u64>,
    /// Malformed or duplicate lines dropped in non-strict mode.
    pub skipped_count: u64,
}

impl Corpus {
    /// Languages without a profile, with their example counts.
    pub fn unknown_languages(&self, profiles: &ProfileTable) -> BTreeMap<String, u64> {
        self.counts_by_language
            .iter()
            .filter(|(l, _)| !profiles.contains(l))
            .map(|(l, &n)| (l.clone(), n))
            .collect()
    }
}

/// Reads a whole corpus. In strict mode the first malformed line or repeated id
/// aborts; otherwise such lines are skipped and counted.
pub fn load_corpus(path: impl AsRef<Path>, strict: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let mut examples = Vec::new();
    let mut skipped = 0;
    let mut ids = HashSet::new();
    for item in open_corpus(path)? {
        match item {
            Ok(ex) => {
                if ids.contains(&ex.id) {
                    if strict {
                        return Err(Error::validation(format!(
                            "{}: duplicate example id `{}`",
                            path.display(),
                            ex.id
                        )));
                    }
                    skipped += 1;
                    continue;
                }
                ids.insert(ex.id.clone());
                examples.push(ex);
            }
            Err(e) if strict => return Err(Error::parse(path, e.line, e.message)),
            Err(_) => skipped += 1,
        }
    }
    let counts_by_language = counts_by_language(&examples);
    Ok(Corpus {
        source_uri: path.display().to_string(),
        examples,
        counts_by_language,
        skipped_count: skipped,
    })
}

/// Writes examples atomically to `path`.
pub fn write_corpus<'a, I>(path: impl AsRef<Path>, examples: I) -> Result<()>
where
    I: IntoIterator<Item = &'a Example>,
{
    let mut f = fsio::AtomicFile::create(path)?;
    for ex in examples {
        write_example(&mut f, ex).map_err(|e| Error::io(f.path(), e))?;
    }
    f.commit()
}
