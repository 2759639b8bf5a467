use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use ringbump_cli::commands::write_failure;
use ringbump_cli::{parse_config, run, Command, Options};

#[derive(Parser)]
#[command(name = "ringbump", version, about = "Ring-of-bumps solutions of the coupled cubic Schrödinger system")]
struct Cli {
    /// Configuration file (`key = value` per line).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for sample-based checks; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Radial ground states and their moments.
    GroundState {
        /// Also compare the N=1 profile with √2 sech r.
        #[arg(long)]
        sech_check: bool,
    },
    /// Pointwise tail bounds, cross-term decay and the potential moment.
    Bounds,
    /// Ansatz energy against its expansion for each k.
    Expansion,
    /// Fixed-point corrector at one radius.
    Corrector {
        #[arg(long)]
        dump: bool,
    },
    /// Reduced-energy scan and maximization over S_k.
    Reduce,
    /// Full pipeline to the assembled solution.
    Solve {
        #[arg(long)]
        dump: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match body(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn body(cli: Cli) -> anyhow::Result<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let (cmd, opts) = match cli.cmd {
        Cmd::GroundState { sech_check } => (Command::GroundState, Options { sech_check, dump: false }),
        Cmd::Bounds => (Command::Bounds, Options::default()),
        Cmd::Expansion => (Command::Expansion, Options::default()),
        Cmd::Corrector { dump } => (Command::Corrector, Options { dump, ..Default::default() }),
        Cmd::Reduce => (Command::Reduce, Options::default()),
        Cmd::Solve { dump } => (Command::Solve, Options { dump, ..Default::default() }),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            write_failure(&cli.out, cmd, "configuration valid", &e.to_string())?;
            return Err(e.into());
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let outcome = run(cmd, &cfg, &cli.out, &opts)?;
    for c in &outcome.checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    Ok(outcome.passed())
}
