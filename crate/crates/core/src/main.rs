use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use featuresort::io::{self, output_name, run_jobs};
use featuresort::{Config, Error};

#[derive(Parser)]
#[command(
    name = "featuresort",
    version,
    about = "Multi-cue multi-object tracker"
)]
struct Cli {
    /// Config file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set tracker.dir_max=0.2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for multiple inputs.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Track detection files.
    Track {
        inputs: Vec<PathBuf>,
        /// Output file (one input) or directory (several).
        #[arg(long)]
        out: PathBuf,
    },
    /// Link, fill and smooth trajectory files.
    Postprocess {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth.
    Eval {
        pred: PathBuf,
        truth: PathBuf,
        /// Where to write the key=value report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic scene from a preset name or scenario file.
    Synth {
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        frames: Option<u32>,
    },
}

fn load_config(cli: &Cli) -> featuresort::Result<Config> {
    let mut overrides = cli.overrides.clone();
    if let Cmd::Synth { seed, frames, .. } = &cli.cmd {
        overrides.extend(seed.map(|s| format!("synth.seed={s}")));
        overrides.extend(frames.map(|f| format!("synth.frames={f}")));
    }
    Config::load(cli.config.as_deref(), &overrides)
}

fn targets(inputs: &[PathBuf], out: &Path) -> Vec<(PathBuf, PathBuf)> {
    if inputs.len() == 1 {
        return vec![(inputs[0].clone(), out.to_path_buf())];
    }
    inputs
        .iter()
        .map(|i| (i.clone(), out.join(output_name(i))))
        .collect()
}

fn run(cli: &Cli) -> featuresort::Result<()> {
    let cfg = load_config(cli)?;
    match &cli.cmd {
        Cmd::Track { inputs, out } => {
            let summaries = run_jobs(&targets(inputs, out), cli.jobs, |(i, o)| {
                io::cmd_track(i, &cfg, o)
            })?;
            for ((i, _), s) in targets(inputs, out).iter().zip(summaries) {
                println!("{}: {s}", i.display());
            }
        }
        Cmd::Postprocess { inputs, out } => {
            let summaries = run_jobs(&targets(inputs, out), cli.jobs, |(i, o)| {
                io::cmd_postprocess(i, &cfg, o)
            })?;
            for ((i, _), s) in targets(inputs, out).iter().zip(summaries) {
                println!("{}: {s}", i.display());
            }
        }
        Cmd::Eval { pred, truth, out } => {
            let report = io::cmd_eval(pred, truth, out.as_deref())?;
            print!("{}", report.to_text());
        }
        Cmd::Synth { scenario, out, .. } => {
            let files = io::cmd_synth(scenario, out, &cfg)?;
            println!(
                "wrote {} and {}",
                files.detections.display(),
                files.truth.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FEATURESORT_LOG", "warn"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if matches!(&cli.cmd, Cmd::Track { inputs, .. } | Cmd::Postprocess { inputs, .. } if inputs.is_empty())
    {
        eprintln!("error: at least one input file is required");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
