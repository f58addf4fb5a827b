//! `coreplan`: simulate multi-core traces, run the three-stage feature
//! selection pipeline, compare allocation policies, and train the
//! environment models, writing every result as CSV/JSON under an output
//! directory.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use coreplan_core::error::ErrorClass;
use coreplan_core::ols::StoppingRule;
use coreplan_core::pipeline::{
    cmd_allocate, cmd_evaluate, cmd_report, cmd_select, cmd_simulate, cmd_train, BootstrapMode,
    InputSource, PipelineConfig, PolicyChoice,
};
use coreplan_core::sim::DatasetPolicy;

#[derive(Parser)]
#[command(
    name = "coreplan",
    version,
    about = "Statistical feature selection and correlation-aware task-to-core allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated trace: features.csv and temperature.csv.
    Simulate(StageArgs),
    /// Random-forest importance ranking, CV-vs-k sweep, and backward
    /// stepwise refinement.
    Select(StageArgs),
    /// Correlation matrix, core ranking, allocation plans, and the
    /// policy comparison.
    Allocate(StageArgs),
    /// Train the full, reduced, and bootstrap models; write metrics.csv.
    Train(StageArgs),
    /// Re-evaluate saved models on the held-out split.
    Evaluate(StageArgs),
    /// Collate everything present in the output directory.
    Report(StageArgs),
}

#[derive(Copy, Clone, ValueEnum)]
enum SourceArg {
    Simulator,
    Csv,
}

#[derive(Copy, Clone, ValueEnum)]
enum PolicyArg {
    Correlation,
    Random,
}

#[derive(Copy, Clone, ValueEnum)]
enum StoppingArg {
    Significance,
    MinCv,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Augment,
    Ensemble,
}

/// Flags mirror the pipeline config; a TOML file may supply any subset
/// and explicit flags override it.
#[derive(Args)]
struct StageArgs {
    /// Pipeline config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory all outputs are written to.
    #[arg(long, default_value = "runs/out")]
    out_dir: PathBuf,
    /// Global seed; every stage derives its randomness from it.
    #[arg(long)]
    seed: Option<u64>,

    // Input
    #[arg(long, value_enum)]
    source: Option<SourceArg>,
    /// Simulator config (TOML) for the simulator source.
    #[arg(long)]
    sim_config: Option<PathBuf>,
    /// Simulated workload runs to collect.
    #[arg(long)]
    n_runs: Option<usize>,
    /// Allocation policy during data collection.
    #[arg(long, value_enum)]
    collect_policy: Option<PolicyArg>,
    /// Feature CSV for the csv source.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    /// Temperature CSV (step, core_*) for the csv source.
    #[arg(long)]
    temperature_csv: Option<PathBuf>,
    /// Target column name.
    #[arg(long)]
    target: Option<String>,

    // Selection
    #[arg(long)]
    n_trees: Option<usize>,
    /// Comma-separated feature counts for the top-k sweep.
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    cv_folds: Option<usize>,
    #[arg(long)]
    cv_tolerance: Option<f64>,
    /// Trees per forest inside the CV sweep.
    #[arg(long)]
    cv_trees: Option<usize>,
    /// Run stepwise on all features instead of the RF-reduced set.
    #[arg(long)]
    stepwise_full_set: Option<bool>,
    #[arg(long, value_enum)]
    stepwise_stopping: Option<StoppingArg>,

    // Allocation
    #[arg(long)]
    n_tasks: Option<usize>,
    /// Comma-separated core ids excluded from allocation.
    #[arg(long, value_delimiter = ',')]
    reserved: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Correlation window (most recent samples); 0 = full buffer.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    comparison_trials: Option<usize>,

    // Training
    /// Comma-separated hidden-layer widths.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    bootstrap_resamples: Option<usize>,
    #[arg(long, value_enum)]
    bootstrap_mode: Option<ModeArg>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    val_fraction: Option<f64>,
}

impl StageArgs {
    fn build_config(&self) -> coreplan_core::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(source) = self.source {
            cfg.input.source = match source {
                SourceArg::Simulator => InputSource::Simulator,
                SourceArg::Csv => InputSource::Csv,
            };
        }
        if let Some(p) = &self.sim_config {
            cfg.input.sim_config = Some(p.clone());
        }
        if let Some(n) = self.n_runs {
            cfg.input.n_runs = n;
        }
        if let Some(p) = self.collect_policy {
            cfg.input.collect_policy = match p {
                PolicyArg::Correlation => DatasetPolicy::CorrelationAware,
                PolicyArg::Random => DatasetPolicy::Random,
            };
        }
        if let Some(p) = &self.trace_csv {
            cfg.input.trace_csv = Some(p.clone());
        }
        if let Some(p) = &self.temperature_csv {
            cfg.input.temperature_csv = Some(p.clone());
        }
        if let Some(t) = &self.target {
            cfg.input.target = t.clone();
        }
        if let Some(n) = self.n_trees {
            cfg.selection.n_trees = n;
        }
        if let Some(grid) = &self.k_grid {
            cfg.selection.k_grid = grid.clone();
        }
        if let Some(a) = self.alpha {
            cfg.selection.alpha = a;
        }
        if let Some(k) = self.cv_folds {
            cfg.selection.cv_folds = k;
        }
        if let Some(t) = self.cv_tolerance {
            cfg.selection.cv_tolerance = t;
        }
        if let Some(n) = self.cv_trees {
            cfg.selection.cv_trees = n;
        }
        if let Some(full) = self.stepwise_full_set {
            cfg.selection.stepwise_full_set = full;
        }
        if let Some(s) = self.stepwise_stopping {
            cfg.selection.stepwise_stopping = match s {
                StoppingArg::Significance => StoppingRule::Significance,
                StoppingArg::MinCv => StoppingRule::MinCvError,
            };
        }
        if let Some(n) = self.n_tasks {
            cfg.allocation.n_tasks = n;
        }
        if let Some(r) = &self.reserved {
            cfg.allocation.reserved = r.clone();
        }
        if let Some(p) = self.policy {
            cfg.allocation.policy = match p {
                PolicyArg::Correlation => PolicyChoice::Correlation,
                PolicyArg::Random => PolicyChoice::Random,
            };
        }
        if let Some(w) = self.window {
            cfg.allocation.window = w;
        }
        if let Some(t) = self.comparison_trials {
            cfg.allocation.comparison_trials = t;
        }
        if let Some(h) = &self.hidden {
            cfg.training.hidden = h.clone();
        }
        if let Some(e) = self.epochs {
            cfg.training.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.training.batch_size = b;
        }
        if let Some(lr) = self.learning_rate {
            cfg.training.learning_rate = lr;
        }
        if let Some(p) = self.patience {
            cfg.training.patience = p;
        }
        if let Some(b) = self.bootstrap_resamples {
            cfg.training.bootstrap_resamples = b;
        }
        if let Some(m) = self.bootstrap_mode {
            cfg.training.bootstrap_mode = match m {
                ModeArg::Augment => BootstrapMode::Augment,
                ModeArg::Ensemble => BootstrapMode::Ensemble,
            };
        }
        if let Some(f) = self.train_fraction {
            cfg.training.train_fraction = f;
        }
        if let Some(f) = self.val_fraction {
            cfg.training.val_fraction = f;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> coreplan_core::Result<()> {
    let (args, stage): (&StageArgs, &str) = match &cli.command {
        Command::Simulate(a) => (a, "simulate"),
        Command::Select(a) => (a, "select"),
        Command::Allocate(a) => (a, "allocate"),
        Command::Train(a) => (a, "train"),
        Command::Evaluate(a) => (a, "evaluate"),
        Command::Report(a) => (a, "report"),
    };
    let cfg = args.build_config()?;
    let out_dir = &args.out_dir;
    match stage {
        "simulate" => {
            let report = cmd_simulate(&cfg, out_dir)?;
            println!(
                "simulate: {} runs, {} features, {} temperature samples -> {}",
                report.n_runs,
                report.n_features,
                report.buffer_samples,
                out_dir.display()
            );
        }
        "select" => {
            let report = cmd_select(&cfg, out_dir)?;
            println!(
                "select: target={} best_k={} rf=[{}]",
                report.target,
                report.best_k,
                report.rf_selected.join(" ")
            );
            println!(
                "        stepwise final=[{}] selected=[{}]",
                report.stepwise_final.join(" "),
                report.stepwise_selected.join(" ")
            );
            if !report.dropped_constant.is_empty() {
                println!("        dropped constant: [{}]", report.dropped_constant.join(" "));
            }
        }
        "allocate" => {
            let report = cmd_allocate(&cfg, out_dir)?;
            println!(
                "allocate: ranking={:?} correlation={:?} random={:?}",
                report.ranking, report.plan_correlation.selected, report.plan_random.selected
            );
            if let Some(c) = &report.comparison {
                println!(
                    "          peak temp corr {:.3} vs rand {:.3} (paired p = {:.4}, {} trials)",
                    c.correlation.mean_peak_temperature,
                    c.random.mean_peak_temperature,
                    c.peak_temperature_test.p,
                    c.trials
                );
            }
        }
        "train" => {
            let report = cmd_train(&cfg, out_dir)?;
            println!("model,mse,params");
            for row in &report.rows {
                println!("{},{},{}", row.model, row.mse, row.params);
            }
        }
        "evaluate" => {
            let report = cmd_evaluate(&cfg, out_dir)?;
            println!("model,mse,params");
            for row in &report.rows {
                println!("{},{},{}", row.model, row.mse, row.params);
            }
        }
        "report" => {
            let report = cmd_report(&cfg, out_dir)?;
            print!("{}", report.render());
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.class() {
                ErrorClass::Data => ExitCode::from(2),
                ErrorClass::Numeric => ExitCode::from(3),
            }
        }
    }
}
