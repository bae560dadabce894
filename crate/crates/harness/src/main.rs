//! `tanklab` — seeded, CSV-verifiable experiments on the degrading
//! six-tank fuel transfer system.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tanklab_core::env::EnvConfig;
use tanklab_core::nn::{grid_search, Activation, GridCell, TrainConfig};
use tanklab_core::surrogate::{fit_surrogate, generate_dataset, TransitionDataset};

use tanklab_harness::config::{Fault, Mode, TrialConfig};
use tanklab_harness::experiments::run_aggregate;
use tanklab_harness::plot::plot_directory;
use tanklab_harness::report;
use tanklab_harness::run::run_control_loop;
use tanklab_harness::HarnessError;

#[derive(Parser)]
#[command(
    name = "tanklab",
    about = "Fault-tolerant fuel-transfer control experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    RlOnlineOffline,
    RlOnlineOnly,
    Open,
    Closed,
}

impl From<ModeArg> for Mode {
    fn from(arg: ModeArg) -> Mode {
        match arg {
            ModeArg::RlOnlineOffline => Mode::RlOnlineOffline,
            ModeArg::RlOnlineOnly => Mode::RlOnlineOnly,
            ModeArg::Open => Mode::AllValvesOpen,
            ModeArg::Closed => Mode::AllValvesClosed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    Single,
    Multi,
}

impl From<FaultArg> for Fault {
    fn from(arg: FaultArg) -> Fault {
        match arg {
            FaultArg::None => Fault::None,
            FaultArg::Single => Fault::Single,
            FaultArg::Multi => Fault::Multi,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample random-action transition data from the nominal system.
    GenData {
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated hyperparameter search for the transition model.
    GridSearch {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Search the full 36-cell grid instead of the 4-cell default.
        #[arg(long, default_value_t = false)]
        full: bool,
    },
    /// Fit the transition model and save it as JSON.
    TrainSurrogate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one control trial and write step/interval CSV logs.
    Run {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "none")]
        fault: FaultArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run randomized-fault trials for all modes and average the results.
    Aggregate {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Render SVG charts from a directory of CSV logs.
    Plot {
        #[arg(long = "in")]
        in_dir: PathBuf,
        #[arg(long = "out")]
        out_dir: PathBuf,
    },
}

fn default_grid() -> Vec<GridCell> {
    let mut grid = Vec::new();
    for hidden in [vec![64, 64], vec![32, 32, 32]] {
        for activation in [Activation::Relu, Activation::Tanh] {
            grid.push(GridCell { hidden_layers: hidden.clone(), activation, learning_rate: 1e-3 });
        }
    }
    grid
}

fn full_grid() -> Vec<GridCell> {
    let mut grid = Vec::new();
    let architectures: [&[usize]; 6] =
        [&[32, 32], &[32, 32, 32], &[64, 64], &[128, 128], &[256, 256], &[512, 512]];
    for hidden in architectures {
        for learning_rate in [1e-2, 5e-3, 1e-3] {
            for activation in [Activation::Relu, Activation::Tanh] {
                grid.push(GridCell {
                    hidden_layers: hidden.to_vec(),
                    activation,
                    learning_rate,
                });
            }
        }
    }
    grid
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::GenData { episodes, seed, out } => {
            let dataset = generate_dataset(&EnvConfig::nominal(), episodes, seed)?;
            dataset.save_csv(&out)?;
            println!("wrote {} transitions to {}", dataset.len(), out.display());
        }
        Command::GridSearch { data, folds, seed, out, full } => {
            let dataset = TransitionDataset::load_csv(&data)?;
            let grid = if full { full_grid() } else { default_grid() };
            let config = TrainConfig { seed, ..TrainConfig::default() };
            let results = grid_search(dataset.data(), &grid, folds, &config)?;
            std::fs::write(&out, report::grid_to_csv(&results))
                .map_err(|source| HarnessError::Io { path: out.display().to_string(), source })?;
            let best = &results[0];
            println!(
                "best cell: {:?} {} lr {} with mean R² {:.4}; ranking in {}",
                best.cell.hidden_layers,
                best.cell.activation,
                best.cell.learning_rate,
                best.report.mean_r2,
                out.display()
            );
        }
        Command::TrainSurrogate { data, seed, out } => {
            let dataset = TransitionDataset::load_csv(&data)?;
            let model = fit_surrogate(&dataset, None, seed)?;
            model.save_json(&out)?;
            println!(
                "trained on {} rows, holdout R² {:.4}, saved to {}",
                model.meta.sample_count,
                model.meta.holdout_r2,
                out.display()
            );
        }
        Command::Run { mode, fault, seed, out_dir } => {
            let config = TrialConfig::new(mode.into(), Fault::from(fault).profile(), seed);
            let result = run_control_loop(&config)?;
            report::write_trial(&result, &out_dir)?;
            let last = result.intervals.last().expect("at least one interval");
            println!(
                "{}: {} intervals, final mean reward {:.4}; logs in {}",
                config.mode,
                result.intervals.len(),
                last.mean_reward,
                out_dir.display()
            );
        }
        Command::Aggregate { trials, seed, out_dir } => {
            let result = run_aggregate(trials, seed)?;
            report::write_aggregate(&result, &out_dir)?;
            println!("{} trials averaged; table in {}", trials, out_dir.join("aggregate.csv").display());
        }
        Command::Plot { in_dir, out_dir } => {
            let written = plot_directory(&in_dir, &out_dir)?;
            for path in &written {
                println!("wrote {}", path.display());
            }
            if written.is_empty() {
                eprintln!("no recognizable CSV logs in {}", in_dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
