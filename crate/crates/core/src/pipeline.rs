//! End-to-end stage runner: simulate/ingest, select, allocate, train,
//! evaluate, report. Every stage reads and writes files under one output
//! directory, records a manifest of input/output hashes, and derives all
//! randomness from the global seed, so a rerun with the same config is
//! byte-identical.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corr::{
    allocate_from_buffer, allocate_random, correlation_matrix_windowed, correlation_scores,
    rank_cores, AllocationPlan,
};
use crate::data::{
    fmt_f64, io_err, load_trace, split, standardize, FeatureMatrix, SplitSpec, TemperatureBuffer,
    DEFAULT_BUFFER_CAPACITY,
};
use crate::error::{Error, Result};
use crate::fcn::{
    self, bootstrap_augment, concat, ensemble_predict, history_to_csv_path, FcnModel, TrainConfig,
};
use crate::forest::{fit_forest, select_top_k, SelectOptions, TreeParams};
use crate::ols::{backward_stepwise, paired_t_test, PairedTest, StoppingRule};
use crate::sim::{
    generate_dataset, idle_equilibrium, run_workload_from, DatasetOptions, DatasetPolicy,
    SimConfig, TaskSpec,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Where the pipeline reads its observations from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Simulator,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub source: InputSource,
    /// Simulator config path (TOML), when `source = "simulator"`.
    pub sim_config: Option<PathBuf>,
    pub n_runs: usize,
    /// Allocation policy used while collecting the dataset.
    pub collect_policy: DatasetPolicy,
    /// Externally collected feature CSV, when `source = "csv"`.
    pub trace_csv: Option<PathBuf>,
    /// Externally collected `step, core_*` CSV, when `source = "csv"`.
    pub temperature_csv: Option<PathBuf>,
    pub target: String,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            source: InputSource::Simulator,
            sim_config: None,
            n_runs: 200,
            collect_policy: DatasetPolicy::Random,
            trace_csv: None,
            temperature_csv: None,
            target: "energy".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub n_trees: usize,
    /// Candidate feature counts for the top-k sweep; empty picks an
    /// automatic grid.
    pub k_grid: Vec<usize>,
    pub alpha: f64,
    pub cv_folds: usize,
    pub cv_tolerance: f64,
    /// Trees per forest inside the CV sweep.
    pub cv_trees: usize,
    /// Run stepwise on all features instead of the RF-reduced set.
    pub stepwise_full_set: bool,
    pub stepwise_stopping: StoppingRule,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            k_grid: Vec::new(),
            alpha: 0.05,
            cv_folds: 5,
            cv_tolerance: 0.05,
            cv_trees: 50,
            stepwise_full_set: false,
            stepwise_stopping: StoppingRule::Significance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    Correlation,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationConfig {
    pub n_tasks: usize,
    pub reserved: Vec<usize>,
    pub policy: PolicyChoice,
    /// Recency window for the correlation matrix; 0 = full buffer.
    pub window: usize,
    /// Paired simulation trials for the comparison report (simulator
    /// source only).
    pub comparison_trials: usize,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self {
            n_tasks: 2,
            reserved: vec![0],
            policy: PolicyChoice::Correlation,
            window: 0,
            comparison_trials: 50,
        }
    }
}

/// How bootstrap resamples feed training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMode {
    /// Train one model on the concatenation of the resamples.
    Augment,
    /// Train one model per resample and average their predictions.
    Ensemble,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub bootstrap_resamples: usize,
    pub bootstrap_mode: BootstrapMode,
    pub train_fraction: f64,
    /// Fraction of the training partition held out for checkpoint
    /// validation.
    pub val_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.005,
            patience: 20,
            bootstrap_resamples: 100,
            bootstrap_mode: BootstrapMode::Augment,
            train_fraction: 0.8,
            val_fraction: 0.15,
        }
    }
}

/// Full pipeline configuration; a TOML file may supply any subset of the
/// fields and the rest take defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub input: InputConfig,
    pub selection: SelectionConfig,
    pub allocation: AllocationConfig,
    pub training: TrainingConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }

    fn reserved_set(&self) -> BTreeSet<usize> {
        self.allocation.reserved.iter().copied().collect()
    }
}

// Output file names, shared between stages and documented in the README.
pub const FEATURES_CSV: &str = "features.csv";
pub const TEMPERATURE_CSV: &str = "temperature.csv";
pub const IMPORTANCE_CSV: &str = "importance.csv";
pub const CV_CURVE_CSV: &str = "cv_curve.csv";
pub const STEPWISE_CSV: &str = "stepwise.csv";
pub const SELECTION_JSON: &str = "selection.json";
pub const CORRELATION_CSV: &str = "correlation.csv";
pub const CORRELATION_LONG_CSV: &str = "correlation_long.csv";
pub const ALLOCATION_JSON: &str = "allocation.json";
pub const OUTCOMES_CSV: &str = "outcomes.csv";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const EVALUATION_CSV: &str = "evaluation.csv";
pub const REPORT_JSON: &str = "report.json";

fn model_file(name: &str) -> String {
    format!("model_{name}.txt")
}

fn history_file(name: &str) -> String {
    format!("history_{name}.csv")
}

fn manifest_file(stage: &str) -> String {
    format!("manifest_{stage}.json")
}

#[derive(Debug, Serialize, Deserialize)]
struct FileHash {
    name: String,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    stage: String,
    version: String,
    seed: u64,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

fn hash_entry(path: &Path) -> Result<FileHash> {
    Ok(FileHash {
        name: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string()),
        sha256: sha256_hex(path)?,
    })
}

/// Writes `manifest_<stage>.json` recording hashes of the stage's input
/// and output files (by file name, so reruns in different directories
/// compare equal).
fn write_manifest(
    out_dir: &Path,
    stage: &str,
    seed: u64,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> Result<PathBuf> {
    let manifest = Manifest {
        stage: stage.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        inputs: inputs.iter().map(|p| hash_entry(p)).collect::<Result<_>>()?,
        outputs: outputs.iter().map(|p| hash_entry(p)).collect::<Result<_>>()?,
    };
    let path = out_dir.join(manifest_file(stage));
    write_json(&path, &manifest)?;
    Ok(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numeric(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::File {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Outcome of the simulate stage.
#[derive(Debug, Serialize, Deserialize)]
pub struct SimulateReport {
    pub n_runs: usize,
    pub n_features: usize,
    pub buffer_samples: usize,
    pub features_path: PathBuf,
    pub temperature_path: PathBuf,
}

/// Generates a dataset with the configured simulator and writes the
/// feature and temperature CSVs plus a manifest.
pub fn cmd_simulate(cfg: &PipelineConfig, out_dir: &Path) -> Result<SimulateReport> {
    ensure_dir(out_dir)?;
    let sim_path = cfg
        .input
        .sim_config
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("input.sim_config is required to simulate".into()))?;
    let sim_cfg = SimConfig::from_path(sim_path)?.with_seed(cfg.seed);
    let opts = DatasetOptions {
        n_tasks: Some(cfg.allocation.n_tasks),
        reserved: cfg.reserved_set(),
        ..Default::default()
    };
    let (matrix, buffer) =
        generate_dataset(&sim_cfg, cfg.input.n_runs, cfg.input.collect_policy, &opts)?;
    let features_path = out_dir.join(FEATURES_CSV);
    let temperature_path = out_dir.join(TEMPERATURE_CSV);
    matrix.to_csv_path(&features_path)?;
    buffer.to_csv_path(&temperature_path)?;
    write_manifest(
        out_dir,
        "simulate",
        cfg.seed,
        &[sim_path.clone()],
        &[features_path.clone(), temperature_path.clone()],
    )?;
    Ok(SimulateReport {
        n_runs: cfg.input.n_runs,
        n_features: matrix.n_cols() - 1,
        buffer_samples: buffer.len(),
        features_path,
        temperature_path,
    })
}

fn load_features(cfg: &PipelineConfig, out_dir: &Path) -> Result<(FeatureMatrix, PathBuf)> {
    let path = match cfg.input.source {
        InputSource::Simulator => out_dir.join(FEATURES_CSV),
        InputSource::Csv => cfg.input.trace_csv.clone().ok_or_else(|| {
            Error::InvalidConfig("input.trace_csv is required for csv source".into())
        })?,
    };
    let loaded = load_trace(&path)?;
    let matrix = loaded.matrix.with_target(&cfg.input.target)?;
    Ok((matrix, path))
}

fn load_temperatures(cfg: &PipelineConfig, out_dir: &Path) -> Result<(TemperatureBuffer, PathBuf)> {
    let path = match cfg.input.source {
        InputSource::Simulator => out_dir.join(TEMPERATURE_CSV),
        InputSource::Csv => cfg.input.temperature_csv.clone().ok_or_else(|| {
            Error::InvalidConfig("input.temperature_csv is required for csv source".into())
        })?,
    };
    let buffer = TemperatureBuffer::from_csv_path(&path, DEFAULT_BUFFER_CAPACITY)?;
    Ok((buffer, path))
}

/// Feature-selection outputs persisted as `selection.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub target: String,
    /// Constant columns removed from the candidate pool before selection.
    pub dropped_constant: Vec<String>,
    /// `(feature, importance)` sorted by descending importance.
    pub rf_ranking: Vec<(String, f64)>,
    pub best_k: usize,
    /// Top `best_k` features by importance.
    pub rf_selected: Vec<String>,
    /// `(k, cv_error)` sweep.
    pub cv_curve: Vec<(usize, f64)>,
    pub alpha: f64,
    /// Features surviving stepwise elimination.
    pub stepwise_final: Vec<String>,
    /// Features picked by the configured stepwise stopping rule.
    pub stepwise_selected: Vec<String>,
    pub stepwise_ran_on_full_set: bool,
}

/// Embedded + wrapper selection: forest importance ranking, the CV-vs-k
/// sweep, then backward stepwise on the reduced set.
pub fn cmd_select(cfg: &PipelineConfig, out_dir: &Path) -> Result<SelectionReport> {
    ensure_dir(out_dir)?;
    let (matrix, input_path) = load_features(cfg, out_dir)?;

    // Constant columns carry no signal and would make OLS singular.
    let (_, scaling) = standardize(&matrix);
    let mut dropped_constant = Vec::new();
    let mut keep = Vec::new();
    for (j, name) in matrix.column_names().iter().enumerate() {
        if scaling.zero_variance[j] && name != &cfg.input.target {
            dropped_constant.push(name.clone());
        } else {
            keep.push(name.clone());
        }
    }
    let matrix = matrix.select_columns(&keep)?;

    let sel = &cfg.selection;
    let forest = fit_forest(&matrix, sel.n_trees, TreeParams::default(), cfg.seed)?;
    let feat_names = matrix.feature_names();
    let d = feat_names.len();
    let ranking = forest.importance_ranking();
    let rf_ranking: Vec<(String, f64)> = ranking
        .iter()
        .map(|&j| (feat_names[j].clone(), forest.importance[j]))
        .collect();

    let k_grid: Vec<usize> = if sel.k_grid.is_empty() {
        let mut grid: Vec<usize> = (1..=d.min(8)).collect();
        let mut k = 10;
        while k < d {
            grid.push(k);
            k += 2;
        }
        grid.push(d);
        grid.dedup();
        grid
    } else {
        sel.k_grid.clone()
    };
    let top_k = select_top_k(
        &matrix,
        &forest.importance,
        &k_grid,
        sel.cv_folds,
        cfg.seed,
        &SelectOptions {
            n_trees: sel.cv_trees,
            params: TreeParams::default(),
            tolerance: sel.cv_tolerance,
        },
    )?;

    // Stepwise runs on the RF-reduced set: the forest provides the
    // dimensionality reduction that keeps repeated OLS refits cheap.
    let stepwise_pool: Vec<String> = if sel.stepwise_full_set {
        feat_names.clone()
    } else {
        top_k.features.clone()
    };
    let mut pool_cols = stepwise_pool.clone();
    pool_cols.push(cfg.input.target.clone());
    let sub = matrix.select_columns(&pool_cols)?;
    let (names, x, y) = sub.design_and_target()?;
    let trace = backward_stepwise(
        &x,
        &y,
        &names,
        sel.alpha,
        sel.cv_folds,
        cfg.seed,
        sel.stepwise_stopping,
    )?;

    let importance_path = out_dir.join(IMPORTANCE_CSV);
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&importance_path).map_err(
            |e| Error::File { path: importance_path.clone(), source: e },
        )?);
        w.write_all(b"rank,feature,importance\n").map_err(io_err)?;
        for (r, (name, imp)) in rf_ranking.iter().enumerate() {
            w.write_all(format!("{},{},{}\n", r + 1, name, fmt_f64(*imp)).as_bytes())
                .map_err(io_err)?;
        }
    }
    let curve_path = out_dir.join(CV_CURVE_CSV);
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&curve_path).map_err(|e| {
            Error::File { path: curve_path.clone(), source: e }
        })?);
        w.write_all(b"k,cv_error\n").map_err(io_err)?;
        for &(k, e) in &top_k.curve {
            w.write_all(format!("{},{}\n", k, fmt_f64(e)).as_bytes()).map_err(io_err)?;
        }
    }
    let stepwise_path = out_dir.join(STEPWISE_CSV);
    trace.to_csv_path(&stepwise_path)?;

    let report = SelectionReport {
        target: cfg.input.target.clone(),
        dropped_constant,
        rf_ranking,
        best_k: top_k.best_k,
        rf_selected: top_k.features,
        cv_curve: top_k.curve,
        alpha: sel.alpha,
        stepwise_final: trace.final_features.clone(),
        stepwise_selected: trace.selected_features.clone(),
        stepwise_ran_on_full_set: sel.stepwise_full_set,
    };
    let selection_path = out_dir.join(SELECTION_JSON);
    write_json(&selection_path, &report)?;
    write_manifest(
        out_dir,
        "select",
        cfg.seed,
        &[input_path],
        &[importance_path, curve_path, stepwise_path, selection_path],
    )?;
    Ok(report)
}

/// Per-policy outcome means over the paired trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub mean_energy: f64,
    pub mean_avg_temperature: f64,
    pub mean_peak_temperature: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub trials: usize,
    pub correlation: PolicyOutcome,
    pub random: PolicyOutcome,
    /// Paired test on per-trial peak temperature (random minus correlation).
    pub peak_temperature_test: PairedTest,
    /// Paired test on per-trial energy (random minus correlation).
    pub energy_test: PairedTest,
}

/// Allocation stage outputs persisted as `allocation.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationReport {
    pub scores: Vec<f64>,
    /// Core ids in ascending-score order.
    pub ranking: Vec<usize>,
    pub plan_correlation: AllocationPlan,
    pub plan_random: AllocationPlan,
    /// The plan matching the configured policy.
    pub policy: PolicyChoice,
    pub comparison: Option<ComparisonReport>,
}

/// Filter stage: correlation matrix and scores from the temperature
/// history, correlation-aware and random plans, and (with the simulator)
/// paired outcome trials.
pub fn cmd_allocate(cfg: &PipelineConfig, out_dir: &Path) -> Result<AllocationReport> {
    ensure_dir(out_dir)?;
    let (buffer, temp_path) = load_temperatures(cfg, out_dir)?;
    let reserved = cfg.reserved_set();
    let alloc = &cfg.allocation;

    let matrix = correlation_matrix_windowed(&buffer, alloc.window)?;
    let scores = correlation_scores(&matrix)?;
    let positions = rank_cores(&scores);
    let ranking: Vec<usize> = positions.iter().map(|&p| buffer.core_ids()[p]).collect();
    let plan_correlation = allocate_from_buffer(&buffer, alloc.n_tasks, &reserved, alloc.window)?;
    let plan_random = allocate_random(buffer.n_cores(), alloc.n_tasks, &reserved, cfg.seed)?;

    let corr_path = out_dir.join(CORRELATION_CSV);
    matrix.to_csv_path(&corr_path)?;
    let corr_long_path = out_dir.join(CORRELATION_LONG_CSV);
    matrix.to_long_csv_path(&corr_long_path)?;

    let mut inputs = vec![temp_path];
    let mut outputs = vec![corr_path, corr_long_path];

    // Paired trials: same tasks under both plans from the same initial
    // state; only the random plan varies across trials.
    let comparison = if cfg.input.source == InputSource::Simulator {
        let sim_path = cfg.input.sim_config.as_ref().ok_or_else(|| {
            Error::InvalidConfig("input.sim_config is required to simulate".into())
        })?;
        inputs.push(sim_path.clone());
        let sim_cfg = SimConfig::from_path(sim_path)?;
        let initial = idle_equilibrium(&sim_cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xA110C);
        let trials = alloc.comparison_trials;
        let mut rows: Vec<(usize, &str, f64, f64, f64)> = Vec::new();
        let mut corr_peaks = Vec::with_capacity(trials);
        let mut rand_peaks = Vec::with_capacity(trials);
        let mut corr_energy = Vec::with_capacity(trials);
        let mut rand_energy = Vec::with_capacity(trials);
        let mut corr_avg = Vec::with_capacity(trials);
        let mut rand_avg = Vec::with_capacity(trials);
        for t in 0..trials {
            let tasks: Vec<TaskSpec> = (0..alloc.n_tasks)
                .map(|_| TaskSpec::new(rng.gen_range(0.4..0.95), rng.gen_range(2.0..6.0), 0.05))
                .collect::<Result<_>>()?;
            let rand_plan = allocate_random(buffer.n_cores(), alloc.n_tasks, &reserved, rng.gen())?;
            let run_cfg = sim_cfg.with_seed(rng.gen());
            let corr_trace = run_workload_from(&run_cfg, &plan_correlation, &tasks, &initial)?;
            let rand_trace = run_workload_from(&run_cfg, &rand_plan, &tasks, &initial)?;
            let ce: f64 = corr_trace.task_energy.iter().sum();
            let re: f64 = rand_trace.task_energy.iter().sum();
            corr_peaks.push(corr_trace.peak_temperature());
            rand_peaks.push(rand_trace.peak_temperature());
            corr_energy.push(ce);
            rand_energy.push(re);
            corr_avg.push(corr_trace.mean_temperature());
            rand_avg.push(rand_trace.mean_temperature());
            rows.push((
                t,
                "correlation",
                ce,
                corr_trace.mean_temperature(),
                corr_trace.peak_temperature(),
            ));
            rows.push((
                t,
                "random",
                re,
                rand_trace.mean_temperature(),
                rand_trace.peak_temperature(),
            ));
        }
        let outcomes_path = out_dir.join(OUTCOMES_CSV);
        {
            let mut w = std::io::BufWriter::new(std::fs::File::create(&outcomes_path).map_err(
                |e| Error::File { path: outcomes_path.clone(), source: e },
            )?);
            w.write_all(b"trial,policy,energy,avg_temp,peak_temp\n").map_err(io_err)?;
            for (t, policy, e, avg, peak) in rows {
                w.write_all(
                    format!(
                        "{},{},{},{},{}\n",
                        t,
                        policy,
                        fmt_f64(e),
                        fmt_f64(avg),
                        fmt_f64(peak)
                    )
                    .as_bytes(),
                )
                .map_err(io_err)?;
            }
        }
        outputs.push(outcomes_path);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let report = ComparisonReport {
            trials,
            correlation: PolicyOutcome {
                mean_energy: mean(&corr_energy),
                mean_avg_temperature: mean(&corr_avg),
                mean_peak_temperature: mean(&corr_peaks),
            },
            random: PolicyOutcome {
                mean_energy: mean(&rand_energy),
                mean_avg_temperature: mean(&rand_avg),
                mean_peak_temperature: mean(&rand_peaks),
            },
            peak_temperature_test: paired_t_test(&rand_peaks, &corr_peaks)?,
            energy_test: paired_t_test(&rand_energy, &corr_energy)?,
        };
        let comparison_path = out_dir.join(COMPARISON_JSON);
        write_json(&comparison_path, &report)?;
        outputs.push(comparison_path);
        Some(report)
    } else {
        None
    };

    let report = AllocationReport {
        scores,
        ranking,
        plan_correlation,
        plan_random,
        policy: alloc.policy,
        comparison,
    };
    let alloc_path = out_dir.join(ALLOCATION_JSON);
    write_json(&alloc_path, &report)?;
    outputs.push(alloc_path);
    write_manifest(out_dir, "allocate", cfg.seed, &inputs, &outputs)?;
    Ok(report)
}

/// One row of the model-comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    /// Test MSE on the standardized target.
    pub mse: f64,
    /// Per-model parameter count (per member, for ensembles).
    pub params: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub rows: Vec<ModelRow>,
    /// Feature set used by the reduced models.
    pub reduced_features: Vec<String>,
}

struct PreparedData {
    feat_names: Vec<String>,
    train: FeatureMatrix,
    val: FeatureMatrix,
    test: FeatureMatrix,
}

/// Standardized train/val/test split with the scaling fit on train only.
fn prepare(cfg: &PipelineConfig, matrix: &FeatureMatrix) -> Result<PreparedData> {
    let t = &cfg.training;
    let (train_all, test) = split(matrix, SplitSpec::new(t.train_fraction, cfg.seed)?)?;
    let (train, val) = split(
        &train_all,
        SplitSpec::new(1.0 - t.val_fraction, cfg.seed.wrapping_add(1))?,
    )?;
    let (train_std, scaling) = standardize(&train);
    let val_std = scaling.apply(&val)?;
    let test_std = scaling.apply(&test)?;
    Ok(PreparedData {
        feat_names: matrix.feature_names(),
        train: train_std,
        val: val_std,
        test: test_std,
    })
}

fn design(m: &FeatureMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, x, y) = m.design_and_target()?;
    Ok((x, y))
}

fn sizes_for(input: usize, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes
}

/// Trains the three-model comparison (full-feature, RF-reduced, and
/// RF-reduced with bootstrap) and writes the metrics table, model files,
/// and loss histories.
pub fn cmd_train(cfg: &PipelineConfig, out_dir: &Path) -> Result<TrainReport> {
    ensure_dir(out_dir)?;
    let (matrix, input_path) = load_features(cfg, out_dir)?;
    let selection_path = out_dir.join(SELECTION_JSON);
    let selection: SelectionReport = read_json(&selection_path)?;
    let t = &cfg.training;

    let mut reduced_cols = selection.rf_selected.clone();
    if reduced_cols.is_empty() {
        return Err(Error::EmptyData("selection report has no selected features".into()));
    }
    reduced_cols.push(cfg.input.target.clone());

    // Drop constant columns the selection stage flagged.
    let full_cols: Vec<String> = matrix
        .column_names()
        .iter()
        .filter(|c| !selection.dropped_constant.contains(c))
        .cloned()
        .collect();
    let full = matrix.select_columns(&full_cols)?;
    let reduced = matrix.select_columns(&reduced_cols)?;

    let train_cfg = TrainConfig {
        batch_size: t.batch_size,
        epochs: t.epochs,
        learning_rate: t.learning_rate,
        seed: cfg.seed.wrapping_add(2),
        patience: t.patience,
    };

    let mut rows = Vec::new();
    let mut outputs = Vec::new();

    // Full-feature model.
    {
        let data = prepare(cfg, &full)?;
        let (tx, ty) = design(&data.train)?;
        let (vx, vy) = design(&data.val)?;
        let (sx, sy) = design(&data.test)?;
        let model = fcn::init(
            &sizes_for(data.feat_names.len(), &t.hidden),
            cfg.seed.wrapping_add(3),
        )?;
        let (trained, history) = fcn::train(&model, &tx, &ty, &vx, &vy, &train_cfg)?;
        let eval = fcn::evaluate(&trained, &sx, &sy)?;
        let model_path = out_dir.join(model_file("fcn"));
        trained.save(&model_path)?;
        let hist_path = out_dir.join(history_file("fcn"));
        history_to_csv_path(&history, &hist_path)?;
        outputs.push(model_path);
        outputs.push(hist_path);
        rows.push(ModelRow { model: "fcn".into(), mse: eval.mse, params: eval.param_count });
    }

    // RF-reduced model.
    let reduced_data = prepare(cfg, &reduced)?;
    {
        let (tx, ty) = design(&reduced_data.train)?;
        let (vx, vy) = design(&reduced_data.val)?;
        let (sx, sy) = design(&reduced_data.test)?;
        let model = fcn::init(
            &sizes_for(reduced_data.feat_names.len(), &t.hidden),
            cfg.seed.wrapping_add(4),
        )?;
        let (trained, history) = fcn::train(&model, &tx, &ty, &vx, &vy, &train_cfg)?;
        let eval = fcn::evaluate(&trained, &sx, &sy)?;
        let model_path = out_dir.join(model_file("fcn_rf"));
        trained.save(&model_path)?;
        let hist_path = out_dir.join(history_file("fcn_rf"));
        history_to_csv_path(&history, &hist_path)?;
        outputs.push(model_path);
        outputs.push(hist_path);
        rows.push(ModelRow { model: "fcn_rf".into(), mse: eval.mse, params: eval.param_count });
    }

    // RF-reduced with bootstrap resampling.
    {
        let (vx, vy) = design(&reduced_data.val)?;
        let (sx, sy) = design(&reduced_data.test)?;
        let resamples = bootstrap_augment(
            &reduced_data.train,
            t.bootstrap_resamples,
            cfg.seed.wrapping_add(5),
        )?;
        let sizes = sizes_for(reduced_data.feat_names.len(), &t.hidden);
        match t.bootstrap_mode {
            BootstrapMode::Augment => {
                let stacked = concat(&resamples)?;
                let (tx, ty) = design(&stacked)?;
                let model = fcn::init(&sizes, cfg.seed.wrapping_add(6))?;
                let (trained, history) = fcn::train(&model, &tx, &ty, &vx, &vy, &train_cfg)?;
                let eval = fcn::evaluate(&trained, &sx, &sy)?;
                let model_path = out_dir.join(model_file("fcn_rf_bs"));
                trained.save(&model_path)?;
                let hist_path = out_dir.join(history_file("fcn_rf_bs"));
                history_to_csv_path(&history, &hist_path)?;
                outputs.push(model_path);
                outputs.push(hist_path);
                rows.push(ModelRow {
                    model: "fcn_rf_bs".into(),
                    mse: eval.mse,
                    params: eval.param_count,
                });
            }
            BootstrapMode::Ensemble => {
                let mut members = Vec::with_capacity(resamples.len());
                for (i, sample) in resamples.iter().enumerate() {
                    let (tx, ty) = design(sample)?;
                    let model = fcn::init(&sizes, cfg.seed.wrapping_add(6 + i as u64))?;
                    let (trained, _) = fcn::train(&model, &tx, &ty, &vx, &vy, &train_cfg)?;
                    members.push(trained);
                }
                let p = members[0].input_width();
                let n = sy.len();
                let mut mse = 0.0;
                for i in 0..n {
                    let pred = ensemble_predict(&members, &sx[i * p..(i + 1) * p])?;
                    let e = pred - sy[i];
                    mse += e * e;
                }
                mse /= n as f64;
                let params = members[0].param_count();
                for (i, member) in members.iter().enumerate() {
                    let model_path = out_dir.join(model_file(&format!("fcn_rf_bs_{i}")));
                    member.save(&model_path)?;
                    outputs.push(model_path);
                }
                rows.push(ModelRow { model: "fcn_rf_bs".into(), mse, params });
            }
        }
    }

    let metrics_path = out_dir.join(METRICS_CSV);
    write_metrics_csv(&metrics_path, &rows)?;
    outputs.push(metrics_path);
    let report = TrainReport { rows, reduced_features: selection.rf_selected };
    write_manifest(out_dir, "train", cfg.seed, &[input_path, selection_path], &outputs)?;
    Ok(report)
}

fn write_metrics_csv(path: &Path, rows: &[ModelRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?);
    w.write_all(b"model,mse,params\n").map_err(io_err)?;
    for row in rows {
        w.write_all(format!("{},{},{}\n", row.model, fmt_f64(row.mse), row.params).as_bytes())
            .map_err(io_err)?;
    }
    Ok(())
}

/// Re-evaluates the saved models on the held-out test split and writes
/// `evaluation.csv`. Fails with a missing-model error when `train` has
/// not run.
pub fn cmd_evaluate(cfg: &PipelineConfig, out_dir: &Path) -> Result<TrainReport> {
    ensure_dir(out_dir)?;
    let (matrix, input_path) = load_features(cfg, out_dir)?;
    let selection_path = out_dir.join(SELECTION_JSON);
    let selection: SelectionReport = read_json(&selection_path)?;

    let mut reduced_cols = selection.rf_selected.clone();
    reduced_cols.push(cfg.input.target.clone());
    let full_cols: Vec<String> = matrix
        .column_names()
        .iter()
        .filter(|c| !selection.dropped_constant.contains(c))
        .cloned()
        .collect();
    let full = matrix.select_columns(&full_cols)?;
    let reduced = matrix.select_columns(&reduced_cols)?;

    let mut rows = Vec::new();
    let mut inputs = vec![input_path, selection_path];
    for (name, data) in [("fcn", &full), ("fcn_rf", &reduced), ("fcn_rf_bs", &reduced)] {
        let model_path = out_dir.join(model_file(name));
        let prepared = prepare(cfg, data)?;
        let (sx, sy) = design(&prepared.test)?;
        if name == "fcn_rf_bs" && !model_path.exists() {
            // Ensemble mode stores per-member files.
            let mut members = Vec::new();
            for i in 0.. {
                let member_path = out_dir.join(model_file(&format!("fcn_rf_bs_{i}")));
                if !member_path.exists() {
                    break;
                }
                members.push(FcnModel::load(&member_path)?);
                inputs.push(member_path);
            }
            if members.is_empty() {
                return Err(Error::File {
                    path: model_path,
                    source: std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        "model file not found; run train first",
                    ),
                });
            }
            let p = members[0].input_width();
            let mut mse = 0.0;
            for i in 0..sy.len() {
                let e = ensemble_predict(&members, &sx[i * p..(i + 1) * p])? - sy[i];
                mse += e * e;
            }
            mse /= sy.len() as f64;
            rows.push(ModelRow { model: name.into(), mse, params: members[0].param_count() });
            continue;
        }
        if !model_path.exists() {
            return Err(Error::File {
                path: model_path,
                source: std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "model file not found; run train first",
                ),
            });
        }
        let model = FcnModel::load(&model_path)?;
        let eval = fcn::evaluate(&model, &sx, &sy)?;
        rows.push(ModelRow { model: name.into(), mse: eval.mse, params: eval.param_count });
        inputs.push(model_path);
    }

    let eval_path = out_dir.join(EVALUATION_CSV);
    write_metrics_csv(&eval_path, &rows)?;
    write_manifest(out_dir, "evaluate", cfg.seed, &inputs, &[eval_path])?;
    Ok(TrainReport { rows, reduced_features: selection.rf_selected })
}

/// Collated summary of whatever stages have run in the output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages_present: Vec<String>,
    pub selection: Option<SelectionReport>,
    pub allocation: Option<AllocationReport>,
    pub metrics: Option<Vec<ModelRow>>,
}

impl PipelineReport {
    /// Human-readable summary table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("stages: {}\n", self.stages_present.join(", ")));
        if let Some(sel) = &self.selection {
            out.push_str(&format!(
                "selection: target={} best_k={} rf=[{}] stepwise=[{}]\n",
                sel.target,
                sel.best_k,
                sel.rf_selected.join(" "),
                sel.stepwise_selected.join(" ")
            ));
        }
        if let Some(alloc) = &self.allocation {
            out.push_str(&format!(
                "allocation: ranking={:?} correlation_plan={:?} random_plan={:?}\n",
                alloc.ranking, alloc.plan_correlation.selected, alloc.plan_random.selected
            ));
            if let Some(c) = &alloc.comparison {
                out.push_str(&format!(
                    "  peak temp: corr {:.3} vs rand {:.3} (paired p = {:.4}); energy: corr {:.3} vs rand {:.3}\n",
                    c.correlation.mean_peak_temperature,
                    c.random.mean_peak_temperature,
                    c.peak_temperature_test.p,
                    c.correlation.mean_energy,
                    c.random.mean_energy,
                ));
            }
        }
        if let Some(rows) = &self.metrics {
            out.push_str("model,mse,params\n");
            for r in rows {
                out.push_str(&format!("{},{},{}\n", r.model, fmt_f64(r.mse), r.params));
            }
        }
        out
    }
}

/// Gathers the outputs present in `out_dir` into `report.json`.
pub fn cmd_report(cfg: &PipelineConfig, out_dir: &Path) -> Result<PipelineReport> {
    ensure_dir(out_dir)?;
    let mut stages = Vec::new();
    for stage in ["simulate", "select", "allocate", "train", "evaluate"] {
        if out_dir.join(manifest_file(stage)).exists() {
            stages.push(stage.to_string());
        }
    }
    let selection: Option<SelectionReport> = {
        let p = out_dir.join(SELECTION_JSON);
        if p.exists() {
            Some(read_json(&p)?)
        } else {
            None
        }
    };
    let allocation: Option<AllocationReport> = {
        let p = out_dir.join(ALLOCATION_JSON);
        if p.exists() {
            Some(read_json(&p)?)
        } else {
            None
        }
    };
    let metrics = {
        let eval = out_dir.join(EVALUATION_CSV);
        let train = out_dir.join(METRICS_CSV);
        let path = if eval.exists() {
            Some(eval)
        } else if train.exists() {
            Some(train)
        } else {
            None
        };
        match path {
            Some(p) => Some(read_metrics_csv(&p)?),
            None => None,
        }
    };
    let report = PipelineReport { stages_present: stages, selection, allocation, metrics };
    let report_path = out_dir.join(REPORT_JSON);
    write_json(&report_path, &report)?;
    write_manifest(out_dir, "report", cfg.seed, &[], &[report_path])?;
    Ok(report)
}

fn read_metrics_csv(path: &Path) -> Result<Vec<ModelRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: format!("bad metrics row: {line}"),
            });
        }
        rows.push(ModelRow {
            model: parts[0].to_string(),
            mse: parts[1].parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                detail: format!("bad mse in row: {line}"),
            })?,
            params: parts[2].parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                detail: format!("bad params in row: {line}"),
            })?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_toml_overrides() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.input.target, "energy");
        assert_eq!(cfg.selection.alpha, 0.05);
        assert_eq!(cfg.training.batch_size, 32);
        assert_eq!(cfg.allocation.reserved, vec![0]);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.toml");
        std::fs::write(
            &path,
            r#"
seed = 9

[input]
source = "csv"
trace_csv = "trace.csv"
target = "avg_temp_after"

[selection]
alpha = 0.1
k_grid = [2, 4]

[training]
hidden = [16, 8]
bootstrap_mode = "ensemble"
"#,
        )
        .unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.input.source, InputSource::Csv);
        assert_eq!(cfg.input.target, "avg_temp_after");
        assert_eq!(cfg.selection.alpha, 0.1);
        assert_eq!(cfg.selection.k_grid, vec![2, 4]);
        assert_eq!(cfg.training.hidden, vec![16, 8]);
        assert_eq!(cfg.training.bootstrap_mode, BootstrapMode::Ensemble);
        // Untouched sections keep defaults.
        assert_eq!(cfg.allocation.n_tasks, 2);

        std::fs::write(&path, "nonsense_key = 1\n").unwrap();
        assert!(matches!(PipelineConfig::load(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn manifest_names_are_directory_independent() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        for dir in [dir_a.path(), dir_b.path()] {
            std::fs::write(dir.join("data.csv"), "a,b\n1,2\n").unwrap();
            write_manifest(dir, "demo", 7, &[dir.join("data.csv")], &[]).unwrap();
        }
        let a = std::fs::read(dir_a.path().join("manifest_demo.json")).unwrap();
        let b = std::fs::read(dir_b.path().join("manifest_demo.json")).unwrap();
        assert_eq!(a, b);
    }
}
