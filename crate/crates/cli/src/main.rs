//! `stablelab run|phase-diagram|probe <config>`.
//!
//! Exit status: 0 on a clean run, 1 when the run recorded invariant violations, 2 on errors
//! (bad config, failing stage, unwritable output).

use clap::{Args, Parser, Subcommand};
use stablelab::experiment::{self, ExperimentConfig, ExperimentKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "stablelab", version, about = "Stable-process SDE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the config's `kind`.
    Run(Common),
    /// Run the config as an (alpha, beta) phase diagram.
    PhaseDiagram(Common),
    /// Run the config as a homeomorphism probe.
    Probe(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Output directory; overrides the config and the output root.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Print the planned outputs and exit without computing.
    #[arg(long)]
    dry_run: bool,
}

fn execute(kind: Option<ExperimentKind>, args: Common) -> Result<bool, String> {
    let mut config = ExperimentConfig::load(&args.config).map_err(|e| e.to_string())?;
    if let Some(k) = kind {
        config.kind = k;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    let dir = experiment::resolve_output_dir(&config, args.out.as_deref());
    if args.dry_run {
        let plan = experiment::dry_run(&config, &dir).map_err(|e| e.to_string())?;
        println!("{}", serde_json::to_string_pretty(&plan).expect("plan serializes"));
        return Ok(true);
    }
    let manifest = experiment::run(&config, &dir).map_err(|e| e.to_string())?;
    println!("{} -> {} ({:.1}s)", config.kind.label(), dir.display(), manifest.wall_time_seconds);
    for o in &manifest.outputs {
        println!("  {} {}", o.sha256, o.name);
    }
    for v in &manifest.violations {
        eprintln!("violation: {v}");
    }
    Ok(manifest.ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Run(a) => (None, a),
        Command::PhaseDiagram(a) => (Some(ExperimentKind::PhaseDiagram), a),
        Command::Probe(a) => (Some(ExperimentKind::Homeomorphism), a),
    };
    match execute(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
