use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridfold::config::{ExperimentConfig, Format, Kind, Override};
use gridfold::experiments;
use gridfold::RunError;

/// Grid-fold experiments: transport bounds, cycle simulation, tree folds,
/// variance scaling, percolation detours, small-world distances and
/// latency models.
#[derive(Parser)]
#[command(name = "gridfold", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the `experiment` key of the config file.
    Run(Common),
    /// Transport lower bounds and the Steiner upper bound for a measure.
    Bounds(Common),
    /// Cycle-level parallel shortest-path aggregation.
    Simulate(Common),
    /// Tree fold on the wavefront tree with a monoid from the catalog.
    Treefold(Common),
    /// Trunk-load variance scaling under random activation.
    Variance(Common),
    /// Detour statistics around failed-node clusters.
    Percolation(Common),
    /// Typical distance with long-range shortcuts.
    Smallworld(Common),
    /// Grid versus cluster all-reduce latency ratio.
    Latency(Common),
}

#[derive(Args)]
struct Common {
    /// Flat TOML config file.
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write a per-cycle trace as JSON lines to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Override any config key, e.g. `--set delta=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<Override>,
}

impl Common {
    fn overrides(&self) -> Vec<Override> {
        let mut o = self.set.clone();
        if let Some(s) = self.seed {
            o.push(Override::new("seed", s as i64));
        }
        if let Some(p) = &self.out {
            o.push(Override::new("out", p.display().to_string()));
        }
        if let Some(f) = self.format {
            let name = match f {
                Format::Csv => "csv",
                Format::JsonLines => "json-lines",
            };
            o.push(Override::new("format", name));
        }
        if let Some(p) = &self.trace {
            o.push(Override::new("trace", p.display().to_string()));
        }
        if let Some(t) = self.threads {
            o.push(Override::new("threads", t as i64));
        }
        o
    }
}

fn execute(cli: Cli) -> Result<experiments::Outcome, RunError> {
    let (requested, common) = match cli.command {
        Command::Run(c) => (None, c),
        Command::Bounds(c) => (Some(Kind::Bounds), c),
        Command::Simulate(c) => (Some(Kind::Simulate), c),
        Command::Treefold(c) => (Some(Kind::Treefold), c),
        Command::Variance(c) => (Some(Kind::Variance), c),
        Command::Percolation(c) => (Some(Kind::Percolation), c),
        Command::Smallworld(c) => (Some(Kind::Smallworld), c),
        Command::Latency(c) => (Some(Kind::Latency), c),
    };
    let cfg = ExperimentConfig::load(common.config.as_deref(), &common.overrides())?;
    let kind = match (requested, cfg.experiment) {
        (Some(k), Some(e)) if k != e => {
            return Err(RunError::invalid("experiment", format!("config names `{e}` but the command is `{k}`")));
        }
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => return Err(RunError::invalid("experiment", "`run` needs the key in the config file")),
    };
    experiments::run(kind, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                println!("wrote {}", a.display());
            }
            if outcome.failures.is_empty() {
                println!("{}: all checks passed", outcome.kind);
                ExitCode::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("check failed: {f}");
                }
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
