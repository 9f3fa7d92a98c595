use std::path::PathBuf;
use std::process::ExitCode;

use bellfit::commands::{cmd_fit, cmd_generate, cmd_study, cmd_verdict, Globals};
use clap::{Parser, Subcommand};

/// Simulate CHSH Bell experiments, fit causal models to the count tables and
/// compare the models by train-and-test error.
///
/// JSON arguments accept either a file path or inline JSON.
/// Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 fit failure.
#[derive(Parser, Debug)]
#[command(name = "bellfit", version)]
struct Cli {
    /// Seed override: the scenario seed for `generate`, the restart seed otherwise
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for studies (0 = one per CPU)
    #[arg(long, global = true, env = "BELLFIT_JOBS", default_value_t = 0)]
    jobs: usize,

    /// Output directory (`generate`, `study`) or file (`fit`, `verdict`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample train and test tables from a scenario's ground truth
    Generate {
        /// Scenario JSON, e.g. {"id":"E2-dephased","trials_per_setting":10000}
        #[arg(long)]
        scenario: String,
    },
    /// Fit one model to a count table
    Fit {
        /// Model JSON, e.g. {"class":"qCC","constraint":"ppt"}
        #[arg(long)]
        model: String,
        /// Count table CSV
        #[arg(long)]
        table: PathBuf,
        /// Fit configuration JSON (defaults apply to missing fields)
        #[arg(long)]
        config: Option<String>,
    },
    /// Train-and-test comparison over many seeds of a scenario
    Study {
        /// JSON list of models
        #[arg(long)]
        models: String,
        /// Scenario JSON
        #[arg(long)]
        scenario: String,
        /// Seeds, e.g. 0..49 (inclusive) or 1,2,3
        #[arg(long)]
        seeds: String,
        /// Fit configuration JSON
        #[arg(long)]
        config: Option<String>,
    },
    /// Train-and-test comparison of models on two given tables
    Verdict {
        /// JSON list of models
        #[arg(long)]
        models: String,
        /// Training table CSV
        #[arg(long)]
        train: PathBuf,
        /// Test table CSV
        #[arg(long)]
        test: PathBuf,
        /// Fit configuration JSON
        #[arg(long)]
        config: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = Globals {
        seed: cli.seed,
        jobs: cli.jobs,
        out: cli.out,
    };
    let result = match &cli.command {
        Command::Generate { scenario } => cmd_generate(scenario, &globals),
        Command::Fit { model, table, config } => cmd_fit(model, table, config.as_deref(), &globals),
        Command::Study {
            models,
            scenario,
            seeds,
            config,
        } => cmd_study(models, scenario, seeds, config.as_deref(), &globals),
        Command::Verdict {
            models,
            train,
            test,
            config,
        } => cmd_verdict(models, train, test, config.as_deref(), &globals),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bellfit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
