//! Command-line front end for the query-generation and clarification-need
//! pipeline. Every subcommand reads one TOML config, applies the global
//! overrides, runs, and leaves its outputs plus a manifest in the output
//! directory.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use askwhen_core::pipeline::{
    cmd_ablate, cmd_bench, cmd_eval, cmd_generate, cmd_sweep, cmd_train, Overrides, PipelineConfig,
};

#[derive(Parser)]
#[command(
    name = "askwhen",
    version,
    about = "Generate synthetic specific/ambiguous query pairs and train a clarification-need classifier"
)]
struct Cli {
    /// TOML pipeline config; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the generation, training, and evaluation seeds at once.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Override which configured provider to use.
    #[arg(long, global = true)]
    provider: Option<String>,

    /// Replace the active provider with a scripted mock that replays this
    /// JSONL file.
    #[arg(long, global = true, value_name = "FILE")]
    mock_script: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus of specific/ambiguous query pairs.
    Generate,
    /// Train the classifier on the generated corpus.
    Train,
    /// Score the configured predictor on the configured dataset.
    Eval,
    /// Measure per-query prediction latency.
    Bench,
    /// Retrain on balanced subsets of the corpus and score each model.
    Sweep {
        /// Training-set sizes to retrain at, e.g. 500 1000 5000.
        #[arg(required = true, value_name = "ITEMS")]
        scales: Vec<usize>,
    },
    /// Build one corpus per prompt setting and compare them.
    Ablate,
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    config.apply_overrides(&Overrides {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
        provider: cli.provider.clone(),
        mock_script: cli.mock_script.clone(),
    });
    Ok(config)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let config = load_config(&cli)?;

    match &cli.command {
        Command::Generate => {
            let outcome = cmd_generate(&config)?;
            let manifest = &outcome.manifest;
            println!(
                "generated {} records -> {} labeled items ({} specific, {} ambiguous) in {} calls",
                manifest.records_written,
                manifest.achieved_items,
                manifest.class_counts[0],
                manifest.class_counts[1],
                manifest.call_count,
            );
            println!("records:  {}", outcome.records_path.display());
            println!("corpus:   {}", outcome.corpus_path.display());
            println!("manifest: {}", outcome.manifest_path.display());
        }
        Command::Train => {
            let outcome = cmd_train(&config)?;
            println!(
                "trained on {} items ({} specific, {} ambiguous)",
                outcome.m, outcome.class_counts[0], outcome.class_counts[1],
            );
            println!(
                "loss {:.6} -> {:.6}",
                outcome.initial_loss, outcome.final_loss
            );
            println!("model:    {}", outcome.model_path.display());
            println!("manifest: {}", outcome.manifest_path.display());
        }
        Command::Eval => {
            let outcome = cmd_eval(&config)?;
            println!(
                "{:?} predictor on {} ({} queries, avg {:.2} tokens)",
                outcome.predictor, outcome.dataset, outcome.metrics.n, outcome.avg_tokens,
            );
            print!("{}", outcome.metrics.render_table());
            if outcome.unparseable > 0 {
                println!(
                    "{} predictions fell back to specific (unparseable output)",
                    outcome.unparseable
                );
            }
            if let Some(latency) = &outcome.latency {
                print_latency(latency);
            }
            println!("report: {}", outcome.report_path.display());
        }
        Command::Bench => {
            let (latency, report_path) = cmd_bench(&config)?;
            print_latency(&latency);
            println!("report: {}", report_path.display());
        }
        Command::Sweep { scales } => {
            let outcome = cmd_sweep(&config, scales)?;
            println!("eval set: {}", outcome.eval_set);
            println!("{:>8} {:>12} {:>12}", "scale", "final loss", "weighted F1");
            for row in &outcome.rows {
                println!(
                    "{:>8} {:>12.6} {:>11.2}%",
                    row.scale,
                    row.final_loss,
                    row.metrics.weighted_f1 * 100.0
                );
            }
            println!("report: {}", outcome.report_path.display());
        }
        Command::Ablate => {
            let outcome = cmd_ablate(&config)?;
            println!(
                "{:<22} {:>8} {:>8} {:>8} {:>12}",
                "setting", "records", "items", "calls", "weighted F1"
            );
            for row in &outcome.rows {
                let f1 = match &row.metrics {
                    Some(m) => format!("{:.2}%", m.weighted_f1 * 100.0),
                    None => "-".to_string(),
                };
                println!(
                    "{:<22} {:>8} {:>8} {:>8} {:>12}",
                    row.setting,
                    row.outcome.manifest.records_written,
                    row.outcome.manifest.achieved_items,
                    row.outcome.manifest.call_count,
                    f1,
                );
            }
            println!("report: {}", outcome.report_path.display());
        }
    }
    Ok(())
}

fn print_latency(latency: &askwhen_core::eval::LatencyReport) {
    println!(
        "latency over {} queries ({} warmup excluded): mean {:.3} ms, p50 {:.3} ms, p95 {:.3} ms",
        latency.n,
        latency.warmup_excluded,
        latency.mean_seconds_per_query * 1e3,
        latency.p50 * 1e3,
        latency.p95 * 1e3,
    );
}
