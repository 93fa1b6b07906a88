//! `supershape`: evolve superformula shapes, render genomes, and tile view sweeps.

mod commands;
mod config;
mod error;
mod genome_spec;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::commands::RenderArgs;
use crate::config::{RunConfig, Settings};
use crate::error::CliError;
use crate::genome_spec::{parse_grid, GenomeSpec};

#[derive(Parser)]
#[command(name = "supershape", version, about = "Evolve, render and sweep superformula shapes")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the genetic algorithm and write checkpoints and best renders to --out.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Continue from <out>/checkpoints.jsonl.
        #[arg(long)]
        resume: bool,
        /// No per-generation progress on stderr.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Render one genome to PNG (and optionally OBJ).
    Render {
        /// 15 comma-separated genes, or gen<k>:best / gen<k>:<index>.
        genome: String,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long)]
        obj: Option<PathBuf>,
        /// Checkpoint stream for gen<k> references (default <out>/checkpoints.jsonl).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Tile a grid of views of one genome into a contact sheet.
    Views {
        genome: String,
        #[arg(long, short)]
        output: PathBuf,
        /// ROWSxCOLS: columns sweep azimuth, rows sweep elevation.
        #[arg(long, default_value = "2x4")]
        grid: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Default)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    /// coverage | brightness | iou | remote | novelty
    #[arg(long)]
    objective: Option<String>,
    /// Scorer base URL (default from SUPERSHAPE_SCORER_ENDPOINT).
    #[arg(long)]
    endpoint: Option<String>,
    /// ImageNet class index or caption text.
    #[arg(long)]
    target: Option<String>,
    /// imagenet_class | clip_text
    #[arg(long)]
    mode: Option<String>,
    /// Any config key, e.g. --set mutation_rate=0.2 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn settings(&self) -> Result<RunConfig, CliError> {
        let mut s = Settings::defaults();
        s.apply_env();
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        s.apply_pairs(self.set.iter().map(String::as_str))?;
        let named = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("generations", self.generations.map(|v| v.to_string())),
            ("population", self.population.map(|v| v.to_string())),
            ("objective", self.objective.clone()),
            ("endpoint", self.endpoint.clone()),
            ("target", self.target.clone()),
            ("mode", self.mode.clone()),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                s.set(key, &v)?;
            }
        }
        s.build()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Evolve { common, resume, quiet } => {
            let cfg = common.settings()?;
            let stop = Arc::new(AtomicBool::new(false));
            let flag = Arc::clone(&stop);
            ctrlc::set_handler(move || {
                if flag.swap(true, Ordering::SeqCst) {
                    // Second interrupt: give up without waiting for the generation.
                    std::process::exit(130);
                }
            })
            .map_err(|e| CliError::Io(format!("cannot install interrupt handler: {e}")))?;
            commands::evolve(&cfg, resume, stop, quiet)
        }
        Command::Render { genome, output, obj, checkpoint, common } => {
            let cfg = common.settings()?;
            let spec = GenomeSpec::parse(&genome)?;
            commands::render(&cfg, RenderArgs { genome: &spec, checkpoint, output: &output, obj: obj.as_deref() })
        }
        Command::Views { genome, output, grid, checkpoint, common } => {
            let cfg = common.settings()?;
            let spec = GenomeSpec::parse(&genome)?;
            let grid = parse_grid(&grid)?;
            commands::views(&cfg, &spec, checkpoint, grid, &output)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("supershape: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
