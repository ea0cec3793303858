use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use livsic_harness::config::EXPERIMENTS;
use livsic_harness::{
    emit_tables, parse_config, run_scenario, write_error, RunError, ScenarioConfig, Status,
};

#[derive(Parser)]
#[command(
    name = "livsic",
    version,
    about = "Run livsic lab scenarios and emit their tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        config: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Parse and validate a scenario without running it.
    Validate { config: PathBuf },
    /// List the experiment kinds.
    ListExperiments,
}

fn load(path: &Path) -> anyhow::Result<Result<ScenarioConfig, RunError>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_config(&text).map_err(RunError::Config))
}

fn run(
    config: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    jobs: usize,
) -> anyhow::Result<ExitCode> {
    let cfg = match load(config)? {
        Ok(c) => c,
        Err(e) => {
            if let Some(dir) = &out {
                write_error(dir, None, &e)?;
            }
            eprintln!("{e}");
            return Ok(ExitCode::from(1));
        }
    };
    let mut cfg = cfg;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    match pool.install(|| run_scenario(&cfg)) {
        Ok(mut result) => {
            emit_tables(&mut result, &cfg.output_dir)
                .with_context(|| format!("writing to {}", cfg.output_dir.display()))?;
            for v in &result.verdicts {
                let mark = match (v.pass, v.gating) {
                    (true, _) => "pass",
                    (false, true) => "FAIL",
                    (false, false) => "fail",
                };
                println!("{mark:4}  {:20} {}", v.name, v.outcome);
            }
            println!("summary: {}", cfg.output_dir.join("summary.json").display());
            Ok(ExitCode::from(match result.status {
                Status::Pass => 0,
                Status::Fail => 2,
            }))
        }
        Err(e) => {
            write_error(&cfg.output_dir, Some(&cfg), &e)?;
            eprintln!("{e}");
            Ok(ExitCode::from(1))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            jobs,
        } => run(&config, seed, out, jobs),
        Command::Validate { config } => load(&config).map(|r| match r {
            Ok(c) => {
                println!("ok: {} ({})", c.name, c.experiment.kind());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(1)
            }
        }),
        Command::ListExperiments => {
            for (name, about) in EXPERIMENTS {
                println!("{name:20} {about}");
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
