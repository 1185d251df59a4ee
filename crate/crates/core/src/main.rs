use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use embedding_debias::data::SyntheticCorpusSpec;
use embedding_debias::experiment::{self, ExperimentConfig};
use embedding_debias::{ComponentFilter, DebiasMode, Error, Result};

#[derive(Parser)]
#[command(name = "debias", version, about = "Gender-subspace debiasing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Debias an embedding file and write it with a transform report.
    Debias(ConfigArgs),
    /// Train and evaluate one occupation classifier.
    Run(ConfigArgs),
    /// Run none, strong, project-only and equalize-only side by side.
    Ablation(ConfigArgs),
    /// Gender-component histogram of the biographies.
    GenderComponent {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "all")]
        filter: ComponentFilter,
    },
    /// Per-occupation gender counts of a dataset.
    Summarize(ConfigArgs),
    /// Write a synthetic corpus and a matching experiment config.
    Synth(SynthArgs),
}

/// Flags mirror the config file fields and override them.
#[derive(Args)]
struct ConfigArgs {
    /// TOML or JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    defining_pairs: Option<PathBuf>,
    #[arg(long)]
    equalize_pairs: Option<PathBuf>,
    #[arg(long)]
    gender_words: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    mode: Option<DebiasMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
}

macro_rules! override_fields {
    ($src:expr, $dst:expr; $($field:ident),*) => {
        $(if let Some(v) = $src.$field.clone() { $dst.$field = v.into(); })*
    };
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        override_fields!(self, cfg; embeddings, embedding_dim, dataset, defining_pairs, equalize_pairs, gender_words);
        override_fields!(self, cfg; output_dir, mode, seed, k, bins);
        override_fields!(self, cfg.train; learning_rate, batch_size, epochs, hidden, momentum, patience);
        cfg.train.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the corpus files.
    #[arg(long)]
    output_dir: PathBuf,
    /// JSON file with a full corpus spec; the preset is used otherwise.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Zero-signal corpus for null checks.
    #[arg(long)]
    null: bool,
    #[arg(long)]
    num_bios: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
}

impl SynthArgs {
    fn resolve(&self) -> Result<SyntheticCorpusSpec> {
        let mut spec = match &self.spec {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None if self.null => SyntheticCorpusSpec::null(self.seed),
            None => SyntheticCorpusSpec::preset(self.seed),
        };
        if let Some(n) = self.num_bios {
            spec.num_bios = n;
        }
        if let Some(v) = self.vocab_size {
            spec.vocab_size = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

fn print_json<S: Serialize>(value: &S) {
    match serde_json::to_string_pretty(value) {
        Ok(s) => println!("{s}"),
        Err(e) => log::warn!("could not print summary: {e}"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Debias(args) => print_json(&experiment::cmd_debias(&args.resolve()?)?),
        Command::Run(args) => {
            let s = experiment::cmd_run(&args.resolve()?)?;
            print_json(&serde_json::json!({
                "mode": s.mode,
                "accuracy": s.accuracy,
                "mean_abs_tpr_gap": s.mean_abs_tpr_gap,
                "mean_abs_tnr_gap": s.mean_abs_tnr_gap,
                "probe_accuracy": s.probe_accuracy,
                "best_epoch": s.best_epoch,
            }));
        }
        Command::Ablation(args) => print_json(&experiment::cmd_ablation(&args.resolve()?)?),
        Command::GenderComponent { config, filter } => {
            let stats = experiment::cmd_gender_component(&config.resolve()?, filter)?;
            print_json(&serde_json::json!({
                "sidecar": stats.sidecar(),
                "separation_accuracy": stats.separation_accuracy(0.0),
            }));
        }
        Command::Summarize(args) => {
            let cfg = args.resolve()?;
            let summary = experiment::cmd_summarize(&cfg)?;
            let mut out = std::io::stdout().lock();
            summary.write_csv(&mut out).map_err(|e| Error::Data(e.to_string()))?;
        }
        Command::Synth(args) => {
            let spec = args.resolve()?;
            print_json(&experiment::cmd_synth(&spec, &args.output_dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let report = ErrorReport { error: err.kind(), message: err.to_string() };
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| err.to_string()));
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
