use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uda_core::consistency::{derive_seed, save_history};
use uda_core::corpus::{load_conll_corpus, TaggingExample};
use uda_core::harness::experiment::{load_config, train_single, Prepared};
use uda_core::harness::metrics::{format_span_statistics, span_statistics};
use uda_core::harness::{
    emit_report, labeled_quantity_sweep, run_experiment, unlabeled_quantity_sweep, ExperimentConfig,
};
use uda_core::model::{read_checkpoint, write_checkpoint};
use uda_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "uda",
    version,
    about = "Consistency training with input perturbations"
)]
struct Cli {
    /// JSON file with ExperimentConfig fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides training.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides output_dir).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Override a config key, e.g. --set training.lambda=0.5
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on the first subset seed and save a checkpoint.
    Train,
    /// Evaluate a checkpoint on the configured test set.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run every subset seed under every configured mode.
    Experiment,
    /// Vary the amount of unlabeled data.
    SweepUnlabeled,
    /// Vary the amount of labeled data.
    SweepLabeled,
    /// Print pool sentences next to a perturbed copy.
    AugmentPreview {
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// Mean span length per entity type for CoNLL files.
    Stats {
        /// Files to summarize; defaults to the configured train and test files.
        files: Vec<PathBuf>,
    },
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut overrides = Vec::new();
    if let Some(seed) = cli.seed {
        overrides.push(format!("training.seed={seed}"));
    }
    if let Some(dir) = &cli.out_dir {
        overrides.push(format!(
            "output_dir={}",
            serde_json::Value::String(dir.display().to_string())
        ));
    }
    overrides.extend(cli.set.iter().cloned());
    load_config(cli.config.as_deref(), &overrides)
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn stats_for(path: &Path) -> Result<String> {
    let corpus = load_conll_corpus(path)?;
    let examples: Vec<TaggingExample> = corpus.examples;
    let stats = span_statistics(&examples, &corpus.tags).map_err(|e| e.in_file(path))?;
    Ok(format_span_statistics(&stats))
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Stats { files } = &cli.command {
        if !files.is_empty() {
            for f in files {
                println!("# {}", f.display());
                print!("{}", stats_for(f)?);
            }
            return Ok(());
        }
    }
    let cfg = config(cli)?;
    match &cli.command {
        Command::Train => {
            let prep = Prepared::load(&cfg)?;
            let outcome = train_single(&prep, &cfg)?;
            let ckpt = cfg.output_dir.join("model.ckpt");
            let history = cfg.output_dir.join("history.csv");
            write_checkpoint(&ckpt, &outcome.params, prep.model_vocab.fingerprint())?;
            save_history(&history, &outcome.history)?;
            report_written(&[ckpt, history]);
        }
        Command::Evaluate { checkpoint } => {
            let prep = Prepared::load(&cfg)?;
            let (theta, fp) = read_checkpoint(checkpoint)?;
            if fp != prep.model_vocab.fingerprint() {
                return Err(Error::Checkpoint(format!(
                    "{} was trained against a different vocabulary",
                    checkpoint.display()
                )));
            }
            let (metric, value, secondary) = prep.evaluate(&theta)?;
            println!("{metric}\t{value:.6}");
            for (k, v) in secondary {
                println!("{k}\t{v:.6}");
            }
        }
        Command::Experiment => report_written(&emit_report(&run_experiment(&cfg)?, &cfg.output_dir)?),
        Command::SweepUnlabeled => {
            report_written(&emit_report(&unlabeled_quantity_sweep(&cfg)?, &cfg.output_dir)?)
        }
        Command::SweepLabeled => {
            report_written(&emit_report(&labeled_quantity_sweep(&cfg)?, &cfg.output_dir)?)
        }
        Command::AugmentPreview { count } => {
            let prep = Prepared::load(&cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.training.seed, 0x5052_4556]));
            let vocab = &prep.replacement_vocab;
            for i in 0..(*count).min(prep.pool_len()) {
                let x = prep.pool_tokens(i);
                let y = prep.augmenter.apply(i, x, &mut rng)?;
                println!("original:  {}", vocab.decode(x).join(" "));
                println!("perturbed: {}", vocab.decode(&y).join(" "));
                println!();
            }
        }
        Command::Stats { .. } => {
            for f in [&cfg.train_path, &cfg.test_path] {
                println!("# {}", f.display());
                print!("{}", stats_for(f)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
