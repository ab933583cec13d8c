//! Annotation files: one JSON object per line, keyed by example id.

use std::io::{BufRead, Write};
use std::path::Path;

use nlicur_core::EntailmentAnnotation;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fsio;

/// Serializes an annotation as one JSON line (without the newline).
/// Scores carry exactly six decimals.
pub fn annotation_to_json(a: &EntailmentAnnotation) -> String {
    format!(
        r#"{{"example_id":{},"score":{:.6},"entailed":{},"threshold":{},"scorer_id":{}}}"#,
        serde_json::to_string(&a.example_id).expect("string"),
        a.score,
        a.entailed,
        serde_json::to_string(&a.threshold).expect("finite threshold"),
        serde_json::to_string(&a.scorer_id).expect("string"),
    )
}

pub fn write_annotation<W: Write>(w: &mut W, a: &EntailmentAnnotation) -> std::io::Result<()> {
    w.write_all(annotation_to_json(a).as_bytes())?;
    w.write_all(b"\n")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    example_id: String,
    score: f64,
    entailed: bool,
    threshold: f64,
    scorer_id: String,
}

pub fn parse_annotation(line: &str) -> Result<EntailmentAnnotation, String> {
    let l: Line = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if !(0.0..=1.0).contains(&l.score) {
        return Err(format!("score {} outside [0, 1]", l.score));
    }
    if l.entailed != (l.score > l.threshold) {
        return Err(format!(
            "entailed={} contradicts score {} and threshold {}",
            l.entailed, l.score, l.threshold
        ));
    }
    Ok(EntailmentAnnotation {
        example_id: l.example_id,
        score: l.score,
        entailed: l.entailed,
        threshold: l.threshold,
        scorer_id: l.scorer_id,
    })
}

/// Reads every annotation from a reader; `label` names the source in errors.
pub fn read_annotations_from<R: BufRead>(
    label: &Path,
    reader: R,
) -> Result<Vec<EntailmentAnnotation>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(label, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_annotation(&line).map_err(|m| Error::parse(label, i as u64 + 1, m))?);
    }
    Ok(out)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<EntailmentAnnotation>> {
    let path = path.as_ref();
    read_annotations_from(path, fsio::open(path)?)
}
