//! Command-line front end for `ruletag`: corpus ingestion, rule reports,
//! training, evaluation, prediction and the training-size ablation grid.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ruletag::models::{InferenceSource, Variant};
use ruletag::rules::MatchMode;

pub use commands::SplitPart;
pub use config::RunConfig;
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "ruletag", version, about = "Rule-augmented BiLSTM event tagger")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus and write it back normalized with its tag set and split.
    Ingest(RunArgs),
    /// Apply the dictionaries and score the rule-only baseline.
    Rules {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "all")]
        split: SplitPart,
    },
    /// Train one tagger and write its checkpoint and log.
    Train(RunArgs),
    /// Score a checkpoint on one part of the split.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitPart,
    },
    /// Tag a raw token file.
    Predict {
        #[command(flatten)]
        run: RunArgs,
        /// One token per line, blank lines between sentences.
        #[arg(long)]
        input: PathBuf,
        /// Defaults to predictions.tsv in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train and score every variant x percent x seed cell.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<Variant>>,
        #[arg(long, value_delimiter = ',')]
        percents: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
}

/// Flags shared by every subcommand. Each one overrides the matching field
/// of the JSON config.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub dictionaries: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub percent: Option<u32>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long)]
    pub imitation: Option<f64>,
    #[arg(long, value_parser = parse_inference)]
    pub inference_source: Option<InferenceSource>,
    #[arg(long, value_parser = parse_match_mode)]
    pub match_mode: Option<MatchMode>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

fn parse_inference(s: &str) -> std::result::Result<InferenceSource, String> {
    match s {
        "teacher" => Ok(InferenceSource::Teacher),
        "student" => Ok(InferenceSource::Student),
        _ => Err(format!("expected `teacher` or `student`, got `{s}`")),
    }
}

fn parse_match_mode(s: &str) -> std::result::Result<MatchMode, String> {
    match s {
        "exact" => Ok(MatchMode::Exact),
        "similarity" => Ok(MatchMode::Similarity),
        _ => Err(format!("expected `exact` or `similarity`, got `{s}`")),
    }
}

impl RunArgs {
    /// Loads the config file (or defaults), applies the flags and validates.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { c.$field = v.clone(); })*
            };
        }
        set!(seed, variant, percent, window, penalty, imitation, inference_source, match_mode, epochs, lr, dim, hidden, dropout);
        macro_rules! set_path {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { c.$field = Some(v.clone()); })*
            };
        }
        set_path!(corpus, dictionaries, embeddings, checkpoint);
        if let Some(dir) = &self.output_dir {
            c.output_dir = dir.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

/// Runs one parsed command, printing a short summary to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(run) => {
            let summary = commands::cmd_ingest(&run.resolve()?)?;
            print!("{summary}");
        }
        Command::Rules { run, split } => {
            let report = commands::cmd_rules(&run.resolve()?, split)?;
            println!("rule-only micro-F1 {:.4} macro-F1 {:.4}", report.micro_f1, report.macro_f1);
        }
        Command::Train(run) => {
            let config = run.resolve()?;
            let (_, log) = commands::cmd_train(&config)?;
            let best = &log.epochs[log.selected_epoch.max(1) - 1];
            println!(
                "variant {} epoch {} loss {:.4} val micro-F1 {}",
                log.variant,
                log.selected_epoch,
                best.train_loss,
                best.val_micro_f1.map_or("-".to_string(), |f| format!("{f:.4}"))
            );
        }
        Command::Eval { run, split } => {
            let report = commands::cmd_eval(&run.resolve()?, split)?;
            println!(
                "micro-F1 {:.4} macro-F1 {:.4} tail micro-F1 {}",
                report.micro_f1,
                report.macro_f1,
                report.tail_micro_f1.map_or("-".to_string(), |f| format!("{f:.4}"))
            );
        }
        Command::Predict { run, input, output } => {
            let path = commands::cmd_predict(&run.resolve()?, &input, output.as_deref())?;
            println!("{}", path.display());
        }
        Command::Ablate {
            run,
            variants,
            percents,
            seeds,
        } => {
            let mut config = run.resolve()?;
            if let Some(v) = variants {
                config.ablation.variants = v;
            }
            if let Some(p) = percents {
                config.ablation.percents = p;
            }
            if let Some(s) = seeds {
                config.ablation.seeds = s;
            }
            let grid = commands::cmd_ablate(&config)?;
            print!("{}", grid.summary_csv());
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit status.
/// Argument errors exit with the config code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
