use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use cosal::commands::{cmd_dsp, cmd_eval, cmd_run, cmd_synth, BatchSummary, RunOptions};
use cosal::synth::SynthSpec;
use cosal::PipelineConfig;

/// Iterative RGBD co-saliency detection over image groups.
#[derive(Parser)]
#[command(name = "cosal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the co-saliency pipeline on every group of a dataset.
    Run {
        #[command(flatten)]
        common: Common,
        /// Fuse a single input method per image.
        #[arg(long, value_name = "METHOD")]
        one_for_one: Option<String>,
        /// Write initialization, addition and per-iteration maps under stages/.
        #[arg(long)]
        dump_stages: bool,
    },
    /// Depth-shape-prior conversion of single-method maps, with a gain table.
    Dsp {
        #[command(flatten)]
        common: Common,
        /// Methods to convert (repeatable); default is every method found.
        #[arg(long = "method", value_name = "METHOD")]
        methods: Vec<String>,
    },
    /// Evaluate predicted maps against ground truth.
    Eval {
        /// Predicted maps, flat or one subdirectory per group.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth masks, or a dataset root with <group>/gt.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate synthetic planted-object groups.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        groups: usize,
        #[arg(long, default_value_t = 4)]
        images: usize,
        #[arg(long, default_value_t = 160)]
        width: usize,
        #[arg(long, default_value_t = 120)]
        height: usize,
        #[arg(long, default_value_t = SynthSpec::default().seed)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// TOML file with flat `key = value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Groups processed concurrently (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Iteration cap; 0 stops after the first addition + deletion pass.
    #[arg(long)]
    max_iters: Option<usize>,
}

fn load_config(path: Option<&PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

impl Common {
    fn options(self, one_for_one: Option<String>, dump_stages: bool) -> Result<RunOptions> {
        let mut config = load_config(self.config.as_ref())?;
        if let Some(n) = self.max_iters {
            config.i_max = n;
        }
        config.validate()?;
        Ok(RunOptions { dataset: self.dataset, out: self.out, config, jobs: self.jobs, one_for_one, dump_stages })
    }
}

fn report(summary: &BatchSummary) -> ExitCode {
    for (group, err) in &summary.failed {
        eprintln!("group {group} failed: {err}");
    }
    log::info!("{} group(s) succeeded, {} failed", summary.succeeded.len(), summary.failed.len());
    if summary.is_success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    Ok(match cli.command {
        Command::Run { common, one_for_one, dump_stages } => report(&cmd_run(&common.options(one_for_one, dump_stages)?)?),
        Command::Dsp { common, methods } => report(&cmd_dsp(&common.options(None, false)?, &methods)?),
        Command::Eval { pred, gt, out, config } => {
            let config = load_config(config.as_ref())?;
            let r = cmd_eval(&pred, &gt, &out, config.beta2)?;
            println!(
                "images {}  max F {:.4}  adaptive F {:.4}  AUC {:.4}",
                r.per_image.len(),
                r.f_measure_max,
                r.f_measure_adaptive,
                r.auc
            );
            ExitCode::SUCCESS
        }
        Command::Synth { out, groups, images, width, height, seed } => {
            let spec = SynthSpec { groups, images_per_group: images, width, height, seed, ..Default::default() };
            cmd_synth(&out, &spec)?;
            ExitCode::SUCCESS
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COSAL_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
