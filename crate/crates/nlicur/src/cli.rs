//! Command-line parsing and dispatch.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlicur_core::aggregate::Grouping;
use nlicur_core::curation::Recipe;

use crate::commands::{self, Context, CurateArgs, EvaluateArgs, ReportInputs};
use crate::config::{FileConfig, Overrides, RunConfig, ScorerKind, TokenizerKind, ENDPOINT_ENV};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "nlicur",
    version,
    about = "Entailment-based curation and evaluation of multilingual summarization data"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus JSONL file.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Language profile CSV; the bundled table is used when absent.
    #[arg(long, global = true)]
    pub profiles: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub scorer: Option<ScorerKind>,
    /// Remote scorer URL (also read from NLICUR_SCORER_ENDPOINT).
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub tokenizer: Option<TokenizerKind>,
    /// Subword vocabulary, one piece per line.
    #[arg(long, global = true)]
    pub vocab: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lowercase: bool,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Batches scored concurrently.
    #[arg(long, global = true, visible_alias = "workers")]
    pub max_in_flight: Option<usize>,
    /// Retries per remote batch.
    #[arg(long, global = true)]
    pub retries: Option<u32>,
    /// Fail on malformed corpus lines (default).
    #[arg(long, global = true, conflicts_with = "lenient")]
    pub strict: bool,
    /// Skip and count malformed corpus lines.
    #[arg(long, global = true)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RecipeArg {
    Vanilla,
    Filtered,
    Controlled,
    Random,
    SelfRouge,
    Inference,
}

impl From<RecipeArg> for Recipe {
    fn from(r: RecipeArg) -> Self {
        match r {
            RecipeArg::Vanilla => Recipe::Vanilla,
            RecipeArg::Filtered => Recipe::Filtered,
            RecipeArg::Controlled => Recipe::Controlled,
            RecipeArg::Random => Recipe::Random,
            RecipeArg::SelfRouge => Recipe::SelfRouge,
            RecipeArg::Inference => Recipe::Inference,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GroupingArg {
    Tier,
    Family,
    Xnli,
}

impl From<GroupingArg> for Grouping {
    fn from(g: GroupingArg) -> Self {
        match g {
            GroupingArg::Tier => Grouping::Tier,
            GroupingArg::Family => Grouping::Family,
            GroupingArg::Xnli => Grouping::Xnli,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every (document, summary) pair and write per-language statistics.
    Annotate {
        /// Continue from a partial output left by an interrupted run.
        #[arg(long)]
        resume: bool,
    },
    /// Build a training set with one of the curation recipes.
    Curate {
        #[arg(long, value_enum)]
        recipe: RecipeArg,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Curation manifest (or `{language: count}` JSON) giving per-language quotas.
        #[arg(long)]
        quotas: Option<PathBuf>,
    },
    /// Score model predictions and append per-language rows to the metrics table.
    Evaluate {
        /// JSONL of `{"id","text"}` predictions.
        #[arg(long)]
        predictions: PathBuf,
        /// Corpus file with reference summaries.
        #[arg(long)]
        references: PathBuf,
        /// Corpus file with source documents; defaults to the references file.
        #[arg(long)]
        documents: Option<PathBuf>,
        #[arg(long)]
        model_id: String,
        #[arg(long)]
        step: u64,
        /// Metrics table to extend; defaults to <out>/metrics.csv.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Pick the best-ROUGE and best-NLI checkpoint per model.
    SelectCheckpoint {
        #[arg(long)]
        metrics: PathBuf,
    },
    /// Average selected checkpoints over tier, family and XNLI groups.
    Aggregate {
        #[arg(long)]
        metrics: PathBuf,
        /// Checkpoint choices; selected from the metrics when absent.
        #[arg(long)]
        choices: Option<PathBuf>,
        #[arg(long, value_enum)]
        grouping: Vec<GroupingArg>,
    },
    /// Compute human-evaluation rates from a ratings table.
    Humaneval {
        #[arg(long)]
        ratings: PathBuf,
    },
    /// Render every table into one bundle with a manifest.
    Report {
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        ratings: Option<PathBuf>,
    },
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            corpus: self.corpus.clone(),
            profiles: self.profiles.clone(),
            out: self.out.clone(),
            scorer: self.scorer,
            endpoint: self.endpoint.clone(),
            threshold: self.threshold,
            seed: self.seed,
            tokenizer: self.tokenizer,
            vocab: self.vocab.clone(),
            lowercase: self.lowercase.then_some(true),
            batch_size: self.batch_size,
            max_in_flight: self.max_in_flight,
            retries: self.retries,
            strict: if self.lenient {
                Some(false)
            } else {
                self.strict.then_some(true)
            },
        }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        RunConfig::resolve(file, self.overrides(), std::env::var(ENDPOINT_ENV).ok())
    }
}

/// Runs a parsed command line; returns the one-line summary printed on success.
pub fn run(cli: Cli) -> Result<(String, Vec<String>)> {
    let cfg = cli.global.resolve()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut ctx = Context::new(cfg)?;
    let summary = match cli.command {
        Command::Annotate { resume } => {
            let o = commands::annotate(&mut ctx, resume)?;
            format!(
                "annotated {} examples ({} resumed) into {}",
                o.summary.report.examples + o.summary.resumed,
                o.summary.resumed,
                o.annotations.display()
            )
        }
        Command::Curate {
            recipe,
            annotations,
            quotas,
        } => {
            let args = CurateArgs {
                recipe: recipe.into(),
                annotations,
                quotas,
            };
            let o = commands::curate(&mut ctx, &args)?;
            format!("{}: {} examples", o.recipe, o.examples.len())
        }
        Command::Evaluate {
            predictions,
            references,
            documents,
            model_id,
            step,
            metrics,
        } => {
            let args = EvaluateArgs {
                predictions,
                references,
                documents,
                model_id,
                checkpoint_step: step,
                metrics,
            };
            let rows = commands::evaluate(&mut ctx, &args)?;
            format!("evaluated {} languages", rows.len())
        }
        Command::SelectCheckpoint { metrics } => {
            let (choices, _) = commands::select(&mut ctx, &metrics)?;
            format!("selected {} checkpoints", choices.len())
        }
        Command::Aggregate {
            metrics,
            choices,
            grouping,
        } => {
            let groupings: Vec<Grouping> = if grouping.is_empty() {
                Grouping::ALL.to_vec()
            } else {
                grouping.into_iter().map(Grouping::from).collect()
            };
            let reports = commands::aggregate(&mut ctx, &metrics, choices.as_deref(), &groupings)?;
            format!("wrote {} group tables", reports.len())
        }
        Command::Humaneval { ratings } => {
            let scores = commands::humaneval(&mut ctx, &ratings)?;
            format!("scored {} systems", scores.len())
        }
        Command::Report {
            annotations,
            metrics,
            ratings,
        } => {
            let inputs = ReportInputs {
                annotations: annotations.or(ctx.cfg.report.annotations.clone()),
                metrics: metrics.or(ctx.cfg.report.metrics.clone()),
                ratings: ratings.or(ctx.cfg.report.ratings.clone()),
            };
            let b = commands::report(&mut ctx, &inputs)?;
            format!("wrote {} files to {}", b.files.len(), b.dir.display())
        }
    };
    Ok((summary, ctx.warnings))
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok((summary, warnings)) => {
            let mut err = std::io::stderr().lock();
            for w in warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
