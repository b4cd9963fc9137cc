use std::path::PathBuf;
use std::process::ExitCode;

use anchorplan_cli::commands::{self, AblateAxis, EvalArgs};
use anchorplan_cli::config::RunConfig;
use anchorplan_cli::{CliError, CliResult};
use anchorplan_core::diffusion::eval::InitMode;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "anchorplan",
    about = "Anchor-initialized trajectory planner: data generation, training, evaluation, ablations, rendering"
)]
struct Cli {
    /// Run configuration JSON; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for scenario-parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario dataset.
    GenData {
        /// Scenarios per template (overrides config).
        #[arg(long)]
        count: Option<usize>,
        /// Target directory (overrides config dataset_dir).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Cluster expert trajectories into the static anchor vocabulary.
    BuildVocab,
    /// Train the anchor decoder, denoiser, and confidence head.
    Train,
    /// Evaluate the planner (or the reference driver) and write a report CSV.
    Eval {
        /// Candidate initialization: hybrid, static, or noise.
        #[arg(long, default_value = "hybrid")]
        init: String,
        /// Reverse refinement steps (overrides config).
        #[arg(long)]
        steps: Option<usize>,
        /// Evaluate a different dataset directory.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Score the embedded reference trajectories instead of planning.
        #[arg(long)]
        expert: bool,
        /// Report file name inside the output directory.
        #[arg(long, default_value = "report.csv")]
        report: String,
        /// Skip writing per-scenario plan records.
        #[arg(long)]
        no_plans: bool,
    },
    /// Sweep refinement steps or input streams and write a table.
    Ablate {
        /// "steps" or "heads".
        #[arg(long)]
        axis: String,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Render one evaluated scenario to SVG.
    Render {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Directory holding plan records (defaults to <out>/plans).
        #[arg(long)]
        plans: Option<PathBuf>,
    },
    /// Print the summary row of a report CSV.
    Report {
        #[arg(long)]
        file: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure {jobs} jobs: {e}")))?;
    }

    match cli.command {
        Command::GenData { count, dir } => cmd_gen(&cfg, dir, count),
        Command::BuildVocab => commands::cmd_build_vocab(&cfg),
        Command::Train => commands::cmd_train(&cfg).map(|_| ()),
        Command::Eval {
            init,
            steps,
            dataset,
            expert,
            report,
            no_plans,
        } => {
            let init = match init.as_str() {
                "hybrid" => InitMode::Hybrid,
                "static" => InitMode::StaticOnly,
                "noise" => InitMode::Noise,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown init mode {other}; expected hybrid, static, or noise"
                    )))
                }
            };
            let args = EvalArgs {
                dataset,
                init,
                steps,
                expert_agent: expert,
                report_name: report,
                save_plans: !no_plans,
            };
            commands::cmd_eval(&cfg, &args).map(|_| ())
        }
        Command::Ablate { axis, dataset } => {
            let axis = match axis.as_str() {
                "steps" => AblateAxis::Steps,
                "heads" => AblateAxis::Heads,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown ablation axis {other}; expected steps or heads"
                    )))
                }
            };
            commands::cmd_ablate(&cfg, axis, dataset.as_deref()).map(|_| ())
        }
        Command::Render {
            scenario,
            dataset,
            plans,
        } => commands::cmd_render(&cfg, &scenario, dataset.as_deref(), plans.as_deref())
            .map(|_| ()),
        Command::Report { file } => {
            let text = commands::cmd_report(&file)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(cfg: &RunConfig, dir: Option<PathBuf>, count: Option<usize>) -> CliResult<()> {
    commands::cmd_gen_data(cfg, dir.as_deref(), count)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": e.to_string(),
                "code": e.exit_code(),
            });
            eprintln!("{line}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
