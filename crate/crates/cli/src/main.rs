use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use cavity_node_cli::{load_config, run, RunMode, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cavity-node", version, about = "Single-photon trapping and generation with a cavity QED node")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Verb to run; defaults to the scenario's `mode`.
    #[command(subcommand)]
    verb: Option<Verb>,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Evaluate the trapping criterion and write the margin series.
    Feasibility,
    /// Synthesize the trapping pulse and verify it by simulation.
    Trap,
    /// Synthesize the generation pulse and verify it by simulation.
    Generate,
    /// Slow-pulse estimate, compared with the exact pulse.
    Adiabatic,
    /// Forward-simulate the node under the configured pulse and input.
    Simulate,
    /// Run the `[sweep]` block point by point.
    Sweep,
}

impl From<Verb> for RunMode {
    fn from(v: Verb) -> Self {
        match v {
            Verb::Feasibility => RunMode::Feasibility,
            Verb::Trap => RunMode::Trap,
            Verb::Generate => RunMode::Generate,
            Verb::Adiabatic => RunMode::Adiabatic,
            Verb::Simulate => RunMode::Simulate,
            Verb::Sweep => RunMode::Sweep,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<u8> {
    let path = cli.config.as_ref().context("--config <path> is required")?;
    let cfg = load_config(path).with_context(|| format!("loading {}", path.display()))?;
    let mode = cli.verb.map_or(cfg.mode, RunMode::from);
    if mode == RunMode::Sweep && cfg.sweep.is_none() {
        anyhow::bail!("the sweep verb needs a [sweep] block in {}", path.display());
    }
    let mut opts = RunOptions::from_config(&cfg);
    if let Some(out) = &cli.out {
        opts.out_dir = out.clone();
    }
    opts.workers = cli.workers;
    let report = run(&cfg, mode, &opts)?;
    print!("{}", report.render_text());
    Ok(report.exit_code())
}
