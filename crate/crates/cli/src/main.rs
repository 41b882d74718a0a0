use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pbc_core::config::{self, ExperimentConfig, LawChoice, TaskKind};
use pbc_core::output::{run_experiment, write_plotdata, PLOTDATA};
use pbc_core::verify::{run_verify, VerifyScope};

#[derive(Parser)]
#[command(name = "pbc", version, about = "Broadcast control simulator and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its run directory.
    Run(Overrides),
    /// Run the theorem and estimator checks and print a pass/fail table.
    Verify {
        #[command(flatten)]
        overrides: Overrides,
        /// Restrict to one theorem (3, 4 or 5).
        #[arg(long, value_parser = clap::value_parser!(u8).range(3..=5))]
        theorem: Option<u8>,
        /// Run the estimator checks (`quadratic`).
        #[arg(long, value_parser = ["quadratic"])]
        estimator: Option<String>,
        /// Also check the reversed ordering on a concave objective.
        #[arg(long)]
        concave: bool,
    },
    /// Re-serialize a run directory as long-format CSV.
    Plotdata {
        run_dir: PathBuf,
        /// Destination file (default: RUN_DIR/plotdata.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags override values from the configuration file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["bc", "pbc", "paired"])]
    law: Option<String>,
    #[arg(long, value_parser = ["coverage", "rendezvous", "assignment", "quadratic"])]
    task: Option<String>,
    #[arg(long = "K")]
    samples: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, value_parser = ["figure", "theorem"])]
    mode: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    retain_trajectories: bool,
    #[arg(long, allow_negative_numbers = true)]
    smooth_min_eps: Option<f64>,
    /// Worker threads; does not affect any output byte.
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let table: toml::Table = text
                    .parse()
                    .map_err(|e: toml::de::Error| anyhow::anyhow!("{}: {}", path.display(), e.message()))?;
                config::read_table(&table)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.law {
            c.law = LawChoice::parse(v).expect("clap restricts values");
        }
        if let Some(v) = &self.task {
            c.task = TaskKind::parse(v).expect("clap restricts values");
        }
        if let Some(v) = self.samples {
            c.samples = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.steps {
            c.steps = v;
        }
        if let Some(v) = &self.mode {
            c.mode = config::parse_mode(v).expect("clap restricts values");
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if self.retain_trajectories {
            c.retain_trajectories = Some(true);
        }
        if let Some(v) = self.smooth_min_eps {
            c.smooth_min_eps = Some(v);
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run(flags) => {
            let config = flags.load()?;
            let dir = PathBuf::from(&config.out);
            let report = run_experiment(&config, &dir, flags.workers)?;
            println!(
                "{} trials completed, {} excluded; wrote {} files to {}",
                report.completed,
                report.excluded.len(),
                report.files.len(),
                dir.display()
            );
            for e in &report.excluded {
                eprintln!("excluded: {e}");
            }
            if let (Some(dev), Some(margin)) = (report.paired_state_deviation, report.paired_min_margin) {
                println!("paired: max state deviation {dev:.3e}, min distance margin {margin:.3e}");
            }
            Ok(if report.excluded.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Verify {
            overrides,
            theorem,
            estimator,
            concave,
        } => {
            let config = overrides.load()?;
            let scope = VerifyScope {
                theorem,
                estimator: estimator.is_some(),
                concave,
            };
            let report = run_verify(&config, &scope, overrides.workers)?;
            let text = report.render();
            print!("{text}");
            let dir = PathBuf::from(&config.out);
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join("verify_report.txt");
            std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Plotdata { run_dir, out } => {
            if !run_dir.is_dir() {
                bail!("{} is not a directory", run_dir.display());
            }
            let dest = out.unwrap_or_else(|| run_dir.join(PLOTDATA));
            let rows = write_plotdata(&run_dir, &dest)?;
            println!("wrote {rows} rows to {}", dest.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
