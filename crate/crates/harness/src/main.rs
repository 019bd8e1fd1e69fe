use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use homproj_harness::converge::{run_convergence, write_samples_csv, write_slopes_csv};
use homproj_harness::registry::{INTEGRATORS, PROBLEMS, SCHEMES};
use homproj_harness::run::{run_experiment, write_run};
use homproj_harness::sweep::{cost_error_sweep, write_sweep_csv};
use homproj_harness::ExperimentConfig;

#[derive(Parser)]
#[command(name = "homproj", version, about = "Invariant-preserving integration experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured problem with the `[method]` section.
    Run(Common),
    /// Cost/error sweep over the `[[sweep]]` list.
    Sweep(Common),
    /// One-step energy-error convergence study from the `[converge]` section.
    Converge(Common),
    /// Print the available problems.
    ListProblems,
    /// Print the available integrators and projection schemes.
    ListMethods,
}

#[derive(Args)]
struct Common {
    /// Experiment TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> anyhow::Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let output = run_experiment(&cfg)?;
            for p in write_run(&c.out, &output)? {
                println!("{}", p.display());
            }
            let failed = output.record.summary.failures;
            if failed > 0 {
                eprintln!("{failed} of {} runs failed", output.record.runs.len());
            }
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let table = cost_error_sweep(&cfg)?;
            let path = c.out.join(format!("{}_sweep.csv", cfg.name));
            write_sweep_csv(create(&path)?, &table).with_context(|| format!("writing {}", path.display()))?;
            println!("{}", path.display());
        }
        Command::Converge(c) => {
            let cfg = c.load()?;
            let study = run_convergence(&cfg)?;
            let samples = c.out.join(format!("{}_samples.csv", cfg.name));
            let slopes = c.out.join(format!("{}_slopes.csv", cfg.name));
            write_samples_csv(create(&samples)?, &study).with_context(|| format!("writing {}", samples.display()))?;
            write_slopes_csv(create(&slopes)?, &study).with_context(|| format!("writing {}", slopes.display()))?;
            println!("{}\n{}", samples.display(), slopes.display());
        }
        Command::ListProblems => {
            for (id, desc) in PROBLEMS {
                println!("{id:<18} {desc}");
            }
        }
        Command::ListMethods => {
            println!("integrators:");
            for (id, desc) in INTEGRATORS {
                println!("  {id:<40} {desc}");
            }
            println!("projection schemes:");
            for (id, desc) in SCHEMES {
                println!("  {id:<14} {desc}");
            }
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build()?;
    pool.install(|| execute(cli.command))
}
