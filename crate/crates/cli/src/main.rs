use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use awarerl_cli::commands::{self, PagStage, TrainFlags};
use awarerl_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "awarerl", version, about = "Progress-aware multi-turn tool-use RL at toy scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize verified multi-turn tasks into a task bundle.
    Synth {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Build the awareness dataset and warm-start the policy.
    Pag {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = StageArg::All)]
        stage: StageArg,
    },
    /// Run group-relative policy optimization.
    Train {
        #[arg(short, long)]
        config: PathBuf,
        /// Start from zero parameters instead of the warm-up checkpoint.
        #[arg(long)]
        no_warm_start: bool,
        /// Act on raw history without awareness notes.
        #[arg(long)]
        no_awareness: bool,
        /// Continue a partial run from its last checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Greedy evaluation on the held-out tasks.
    Eval {
        #[arg(short, long)]
        config: PathBuf,
        /// Policy checkpoint; defaults to the matching training run.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        no_warm_start: bool,
        #[arg(long)]
        no_awareness: bool,
    },
    /// Summarize any artifact written by the other commands.
    Inspect {
        path: PathBuf,
        #[arg(long, default_value_t = 3)]
        limit: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    All,
    Segment,
    Generate,
    Verify,
    Augment,
    Assemble,
    Warmup,
}

impl From<StageArg> for Option<PagStage> {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::All => None,
            StageArg::Segment => Some(PagStage::Segment),
            StageArg::Generate => Some(PagStage::Generate),
            StageArg::Verify => Some(PagStage::Verify),
            StageArg::Augment => Some(PagStage::Augment),
            StageArg::Assemble => Some(PagStage::Assemble),
            StageArg::Warmup => Some(PagStage::Warmup),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config } => RunConfig::load(&config).and_then(|c| commands::synth(&c)),
        Command::Pag { config, stage } => RunConfig::load(&config).and_then(|c| commands::pag(&c, stage.into())),
        Command::Train {
            config,
            no_warm_start,
            no_awareness,
            resume,
        } => RunConfig::load(&config).and_then(|c| {
            commands::train(
                &c,
                TrainFlags {
                    no_warm_start,
                    no_awareness,
                },
                resume,
            )
        }),
        Command::Eval {
            config,
            checkpoint,
            trials,
            no_warm_start,
            no_awareness,
        } => RunConfig::load(&config).and_then(|c| {
            let flags = TrainFlags {
                no_warm_start,
                no_awareness,
            };
            commands::eval(&c, flags, checkpoint.as_deref(), trials)
        }),
        Command::Inspect { path, limit } => commands::inspect(&path, limit),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("awarerl: {e}");
            e.exit_code()
        }
    }
}
