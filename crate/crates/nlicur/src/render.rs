//! Report tables rendered as CSV and Markdown.
//!
//! Values are rounded to two decimals here and nowhere earlier. Output depends
//! only on the inputs: fixed column order, no timestamps.

use nlicur_core::aggregate::GroupReport;
use nlicur_core::entailment::EntailmentStats;
use nlicur_core::humaneval::{QualityMode, Rates, SystemScores};
use nlicur_core::num::round2;
use nlicur_core::selection::{CheckpointChoice, EarlierReport};

use crate::csvio::to_csv;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub footer: Option<Vec<String>>,
    /// Extra lines shown under the Markdown table only.
    pub notes: Vec<String>,
}

impl Table {
    fn new(title: impl Into<String>, header: Vec<String>) -> Self {
        Self {
            title: title.into(),
            header,
            rows: Vec::new(),
            footer: None,
            notes: Vec::new(),
        }
    }

    fn all_rows(&self) -> impl Iterator<Item = &Vec<String>> {
        self.rows.iter().chain(self.footer.iter())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        to_csv(&header, self.all_rows())
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("### {}\n\n", self.title);
        let line = |cells: &[String]| {
            let escaped: Vec<String> = cells.iter().map(|c| c.replace('|', "\\|")).collect();
            format!("| {} |\n", escaped.join(" | "))
        };
        s.push_str(&line(&self.header));
        let align: Vec<String> = (0..self.header.len())
            .map(|i| {
                if i == 0 {
                    ":---".to_string()
                } else {
                    "---:".to_string()
                }
            })
            .collect();
        s.push_str(&format!("|{}|\n", align.join("|")));
        for r in self.all_rows() {
            s.push_str(&line(r));
        }
        if !self.notes.is_empty() {
            s.push('\n');
            for n in &self.notes {
                s.push_str(n);
                s.push('\n');
            }
        }
        s
    }
}

pub fn fmt2(v: f64) -> String {
    let r = round2(v);
    // Avoid printing "-0.00".
    format!("{:.2}", if r == 0.0 { 0.0 } else { r })
}

fn strings<const N: usize>(cells: [&str; N]) -> Vec<String> {
    cells.iter().map(|s| s.to_string()).collect()
}

pub fn stats_table(stats: &EntailmentStats) -> Table {
    let mut t = Table::new(
        "Entailment statistics",
        strings(["language", "n_train", "n_entailed", "pct_entailed"]),
    );
    t.rows = stats
        .rows
        .iter()
        .map(|r| {
            vec![
                r.language.clone(),
                r.n_train.to_string(),
                r.n_entailed.to_string(),
                fmt2(r.pct_entailed),
            ]
        })
        .collect();
    t.footer = stats.average.map(|a| {
        vec![
            "average".into(),
            fmt2(a.n_train),
            fmt2(a.n_entailed),
            fmt2(a.pct_entailed),
        ]
    });
    t
}

pub fn choices_table(choices: &[CheckpointChoice]) -> Table {
    let mut t = Table::new(
        "Selected checkpoints",
        strings([
            "model_id",
            "criterion",
            "checkpoint_step",
            "criterion_mean",
            "n_languages",
        ]),
    );
    t.rows = choices
        .iter()
        .map(|c| {
            vec![
                c.model_id.clone(),
                c.criterion.to_string(),
                c.checkpoint_step.to_string(),
                fmt2(c.criterion_mean),
                c.n_languages.to_string(),
            ]
        })
        .collect();
    t
}

pub fn earlier_table(reports: &[EarlierReport]) -> Table {
    let mut t = Table::new(
        "Best-NLI checkpoint earlier than best-ROUGE",
        strings(["model_id", "nli_step", "rouge_step", "nli_earlier"]),
    );
    t.rows = reports
        .iter()
        .map(|r| {
            vec![
                r.model_id.clone(),
                r.nli_step.to_string(),
                r.rouge_step.to_string(),
                r.nli_earlier.to_string(),
            ]
        })
        .collect();
    t
}

pub const METRIC_NAMES: [&str; 3] = ["rouge_l", "nli", "length_ratio"];

pub fn group_table(report: &GroupReport) -> Table {
    let mut header = strings(["group", "n_languages"]);
    for c in &report.columns {
        for m in METRIC_NAMES {
            header.push(format!(
                "{}:best-{}@{}:{}",
                c.model_id, c.criterion, c.checkpoint_step, m
            ));
        }
    }
    let render = |name: &str, n: usize, values: &[nlicur_core::aggregate::MetricTriple]| {
        let mut row = vec![name.to_string(), n.to_string()];
        for v in values {
            row.extend([fmt2(v.rouge_l), fmt2(v.nli), fmt2(v.length_ratio)]);
        }
        row
    };
    let mut t = Table::new(format!("Results by {}", report.grouping), header);
    t.rows = report
        .rows
        .iter()
        .map(|r| render(&r.name, r.n_languages, &r.values))
        .collect();
    t.footer = Some(render(
        &report.footer.name,
        report.footer.n_languages,
        &report.footer.values,
    ));
    if !report.omitted.is_empty() {
        t.notes.push(format!(
            "Omitted groups with too few languages (counted in the average): {}",
            report.omitted.join(", ")
        ));
    }
    t
}

pub const MEASURES: [&str; 3] = ["quality", "attribution", "informativeness"];

fn measure(r: &Rates, name: &str) -> f64 {
    match name {
        "quality" => r.quality,
        "attribution" => r.attribution,
        _ => r.informativeness,
    }
}

fn mode_name(mode: QualityMode) -> &'static str {
    match mode {
        QualityMode::TopLabel => "top_label",
        QualityMode::NormalizedMean => "normalized_mean",
    }
}

/// One table per measure: languages as rows, systems as columns, overall footer.
pub fn humaneval_measure_table(scores: &[SystemScores], name: &str, mode: QualityMode) -> Table {
    let mut header = vec!["language".to_string()];
    header.extend(scores.iter().map(|s| s.system_id.clone()));
    let mut t = Table::new(format!("Human evaluation: {name}"), header);
    let languages: std::collections::BTreeSet<&String> =
        scores.iter().flat_map(|s| s.per_language.keys()).collect();
    t.rows = languages
        .into_iter()
        .map(|l| {
            let mut row = vec![l.clone()];
            row.extend(scores.iter().map(|s| {
                s.per_language
                    .get(l)
                    .map_or_else(String::new, |r| fmt2(measure(r, name)))
            }));
            row
        })
        .collect();
    let mut footer = vec!["overall".to_string()];
    footer.extend(scores.iter().map(|s| fmt2(measure(&s.overall, name))));
    t.footer = Some(footer);
    if name == "quality" {
        t.notes.push(format!(
            "Quality mapping: {}. The two available mappings give different values; compare like with like.",
            mode_name(mode)
        ));
    }
    t
}

/// Systems as rows with every measure's overall rate.
pub fn humaneval_overall_table(scores: &[SystemScores], mode: QualityMode) -> Table {
    let mut t = Table::new(
        "Human evaluation: overall",
        strings([
            "system_id",
            "quality",
            "attribution",
            "informativeness",
            "n_ratings",
        ]),
    );
    t.rows = scores
        .iter()
        .map(|s| {
            vec![
                s.system_id.clone(),
                fmt2(s.overall.quality),
                fmt2(s.overall.attribution),
                fmt2(s.overall.informativeness),
                s.overall.n_ratings.to_string(),
            ]
        })
        .collect();
    t.notes
        .push(format!("Quality mapping: {}.", mode_name(mode)));
    t
}
