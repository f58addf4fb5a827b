//! Desk-scale multi-core thermal/energy simulator.
//!
//! Each core is a lumped RC node: a heat capacity, a thermal resistance to
//! ambient, and pairwise conductances to other cores. Temperatures evolve by
//! forward Euler:
//!
//! `C_i dT_i/dt = P_i - (T_i - ambient)/R_i - sum_j k_ij (T_i - T_j)`
//!
//! Power on a core exceeding the throttle temperature is clamped to idle
//! until the core cools below the cooldown threshold, which extends the
//! makespan of any task pinned there. Because the coupling matrix is chosen
//! by the caller, the correlation structure of generated traces is known by
//! construction.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corr::{allocate_from_buffer, allocate_random, AllocationPlan};
use crate::data::{FeatureMatrix, TemperatureBuffer, DEFAULT_BUFFER_CAPACITY};
use crate::error::{Error, Result};

/// Raw simulator parameters; validated into a [`SimConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimParams {
    /// Core count.
    pub m: usize,
    /// Ambient temperature, degrees C.
    pub ambient: f64,
    /// Euler step, seconds.
    pub dt: f64,
    pub seed: u64,
    /// Power clamp threshold, degrees C.
    pub throttle_temp: f64,
    /// Temperature below which a throttled core resumes, degrees C.
    pub cooldown_temp: f64,
    /// Per-core resistance to ambient, degrees C per watt.
    pub thermal_resistance: Vec<f64>,
    /// Per-core heat capacity, joules per degree C.
    pub heat_capacity: Vec<f64>,
    /// Per-core idle draw, watts.
    pub idle_power: Vec<f64>,
    /// Per-core peak draw at full intensity, watts.
    pub max_power: Vec<f64>,
    /// Symmetric m x m inter-core conductances, watts per degree C,
    /// zero diagonal.
    pub coupling: Vec<Vec<f64>>,
}

/// A validated simulator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    params: SimParams,
}

impl SimConfig {
    pub fn new(params: SimParams) -> Result<Self> {
        let m = params.m;
        if m == 0 {
            return Err(Error::InvalidConfig("core count must be positive".into()));
        }
        for (name, v) in [
            ("thermal_resistance", &params.thermal_resistance),
            ("heat_capacity", &params.heat_capacity),
            ("idle_power", &params.idle_power),
            ("max_power", &params.max_power),
        ] {
            if v.len() != m {
                return Err(Error::InvalidConfig(format!(
                    "{} has {} entries, expected {}",
                    name,
                    v.len(),
                    m
                )));
            }
        }
        if params
            .thermal_resistance
            .iter()
            .chain(&params.heat_capacity)
            .any(|&v| v <= 0.0 || !v.is_finite())
        {
            return Err(Error::InvalidConfig(
                "resistances and capacities must be strictly positive".into(),
            ));
        }
        for i in 0..m {
            if params.idle_power[i] < 0.0 || params.max_power[i] < params.idle_power[i] {
                return Err(Error::InvalidConfig(
                    "need 0 <= idle_power <= max_power per core".into(),
                ));
            }
        }
        if params.coupling.len() != m || params.coupling.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidConfig(format!("coupling must be {m} x {m}")));
        }
        for i in 0..m {
            if params.coupling[i][i] != 0.0 {
                return Err(Error::InvalidConfig("coupling diagonal must be zero".into()));
            }
            for j in 0..m {
                let k = params.coupling[i][j];
                if k < 0.0 || !k.is_finite() {
                    return Err(Error::InvalidConfig("coupling must be nonnegative".into()));
                }
                if (k - params.coupling[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidConfig("coupling must be symmetric".into()));
                }
            }
        }
        if !(params.cooldown_temp < params.throttle_temp) {
            return Err(Error::InvalidConfig(
                "cooldown_temp must be below throttle_temp".into(),
            ));
        }
        if params.dt <= 0.0 {
            return Err(Error::InvalidConfig("dt must be positive".into()));
        }
        // Euler stability guard.
        let min_rc = (0..m)
            .map(|i| params.thermal_resistance[i] * params.heat_capacity[i])
            .fold(f64::INFINITY, f64::min);
        if params.dt >= min_rc / 2.0 {
            return Err(Error::InvalidConfig(format!(
                "dt = {} too large for stability; need dt < min(R*C)/2 = {}",
                params.dt,
                min_rc / 2.0
            )));
        }
        Ok(Self { params })
    }

    /// Uniform cores with no inter-core coupling.
    pub fn independent(m: usize, seed: u64) -> Self {
        Self::new(SimParams {
            m,
            ambient: 25.0,
            dt: 0.05,
            seed,
            throttle_temp: 100.0,
            cooldown_temp: 70.0,
            thermal_resistance: vec![2.0; m],
            heat_capacity: vec![5.0; m],
            idle_power: vec![1.0; m],
            max_power: vec![25.0; m],
            coupling: vec![vec![0.0; m]; m],
        })
        .expect("preset is valid")
    }

    /// Five cores in two thermal clusters, {0, 1} and {2, 3, 4}, with
    /// strong within-cluster conductance and none across. With core 0
    /// reserved, a random pair of the remaining four lands in one cluster
    /// half the time, which makes this the reference config for
    /// allocation comparisons.
    pub fn two_cluster(seed: u64) -> Self {
        let m = 5;
        let clusters: [&[usize]; 2] = [&[0, 1], &[2, 3, 4]];
        let mut coupling = vec![vec![0.0; m]; m];
        for cluster in clusters {
            for &i in cluster {
                for &j in cluster {
                    if i != j {
                        coupling[i][j] = 0.5;
                    }
                }
            }
        }
        Self::new(SimParams {
            m,
            ambient: 25.0,
            dt: 0.05,
            seed,
            throttle_temp: 100.0,
            cooldown_temp: 70.0,
            thermal_resistance: vec![2.0; m],
            heat_capacity: vec![5.0; m],
            idle_power: vec![1.0; m],
            max_power: vec![25.0; m],
            coupling,
        })
        .expect("preset is valid")
    }

    /// Same config with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut params = self.params.clone();
        params.seed = seed;
        Self { params }
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    pub fn ambient(&self) -> f64 {
        self.params.ambient
    }

    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    pub fn seed(&self) -> u64 {
        self.params.seed
    }

    pub fn throttle_temp(&self) -> f64 {
        self.params.throttle_temp
    }

    pub fn cooldown_temp(&self) -> f64 {
        self.params.cooldown_temp
    }

    pub fn resistance(&self, i: usize) -> f64 {
        self.params.thermal_resistance[i]
    }

    pub fn capacity(&self, i: usize) -> f64 {
        self.params.heat_capacity[i]
    }

    pub fn idle_power(&self, i: usize) -> f64 {
        self.params.idle_power[i]
    }

    pub fn max_power(&self, i: usize) -> f64 {
        self.params.max_power[i]
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.params.coupling[i][j]
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    /// Reads a config from a flat TOML file. Per-core fields accept either
    /// a scalar (broadcast to all cores) or an array of `m` values; the
    /// coupling matrix may be given explicitly or as `clusters` plus
    /// `coupling_within`/`coupling_cross`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let raw: RawSimConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        raw.into_config()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    fn expand(&self, m: usize) -> Vec<f64> {
        match self {
            ScalarOrVec::Scalar(v) => vec![*v; m],
            ScalarOrVec::Vec(v) => v.clone(),
        }
    }
}

fn default_throttle() -> f64 {
    100.0
}

fn default_cooldown() -> f64 {
    70.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimConfig {
    m: usize,
    ambient: f64,
    dt: f64,
    seed: u64,
    #[serde(default = "default_throttle")]
    throttle_temp: f64,
    #[serde(default = "default_cooldown")]
    cooldown_temp: f64,
    thermal_resistance: ScalarOrVec,
    heat_capacity: ScalarOrVec,
    idle_power: ScalarOrVec,
    max_power: ScalarOrVec,
    coupling: Option<Vec<Vec<f64>>>,
    clusters: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    coupling_within: f64,
    #[serde(default)]
    coupling_cross: f64,
}

impl RawSimConfig {
    fn into_config(self) -> Result<SimConfig> {
        let m = self.m;
        let coupling = match (self.coupling, self.clusters) {
            (Some(c), None) => c,
            (None, Some(clusters)) => {
                let mut assignment = vec![usize::MAX; m];
                for (ci, cluster) in clusters.iter().enumerate() {
                    for &core in cluster {
                        if core >= m {
                            return Err(Error::InvalidConfig(format!(
                                "cluster core {core} out of range for m = {m}"
                            )));
                        }
                        if assignment[core] != usize::MAX {
                            return Err(Error::InvalidConfig(format!(
                                "core {core} listed in two clusters"
                            )));
                        }
                        assignment[core] = ci;
                    }
                }
                if assignment.contains(&usize::MAX) {
                    return Err(Error::InvalidConfig(
                        "clusters must cover every core".into(),
                    ));
                }
                let mut coupling = vec![vec![0.0; m]; m];
                for i in 0..m {
                    for j in 0..m {
                        if i != j {
                            coupling[i][j] = if assignment[i] == assignment[j] {
                                self.coupling_within
                            } else {
                                self.coupling_cross
                            };
                        }
                    }
                }
                coupling
            }
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "give either an explicit coupling matrix or clusters, not both".into(),
                ))
            }
            (None, None) => vec![vec![0.0; m]; m],
        };
        SimConfig::new(SimParams {
            m,
            ambient: self.ambient,
            dt: self.dt,
            seed: self.seed,
            throttle_temp: self.throttle_temp,
            cooldown_temp: self.cooldown_temp,
            thermal_resistance: self.thermal_resistance.expand(m),
            heat_capacity: self.heat_capacity.expand(m),
            idle_power: self.idle_power.expand(m),
            max_power: self.max_power.expand(m),
            coupling,
        })
    }
}

/// One task pinned to one core for the length of a workload run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TaskSpec {
    /// Fraction of the core's max-minus-idle power drawn, in [0, 1].
    pub compute_intensity: f64,
    /// Busy time required, seconds.
    pub duration: f64,
    /// Multiplicative Gaussian power-noise standard deviation.
    pub noise_scale: f64,
}

impl TaskSpec {
    pub fn new(compute_intensity: f64, duration: f64, noise_scale: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&compute_intensity) {
            return Err(Error::InvalidConfig(format!(
                "compute_intensity must be in [0,1], got {compute_intensity}"
            )));
        }
        if duration <= 0.0 {
            return Err(Error::InvalidConfig("task duration must be positive".into()));
        }
        if noise_scale < 0.0 {
            return Err(Error::InvalidConfig("noise_scale must be nonnegative".into()));
        }
        Ok(Self { compute_intensity, duration, noise_scale })
    }
}

/// Simulation record of one workload run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    /// Per-step core temperatures, degrees C.
    pub temperatures: Vec<Vec<f64>>,
    /// Per-step core power draws, watts.
    pub powers: Vec<Vec<f64>>,
    /// Energy attributed to each task's core from start to completion, J.
    pub task_energy: Vec<f64>,
    /// Busy time over wall time until completion, per task.
    pub task_busy_fraction: Vec<f64>,
    /// Steps until completion, per task.
    pub task_steps: Vec<usize>,
    /// Mean power drawn on each task's core until completion, watts.
    pub task_avg_power: Vec<f64>,
    /// All power dissipated over the run, J.
    pub total_energy: f64,
    /// Time of the last task completion, seconds.
    pub makespan: f64,
    pub dt: f64,
    pub initial_temps: Vec<f64>,
}

impl SimTrace {
    fn empty(dt: f64, initial: Vec<f64>) -> Self {
        Self {
            temperatures: Vec::new(),
            powers: Vec::new(),
            task_energy: Vec::new(),
            task_busy_fraction: Vec::new(),
            task_steps: Vec::new(),
            task_avg_power: Vec::new(),
            total_energy: 0.0,
            makespan: 0.0,
            dt,
            initial_temps: initial,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.temperatures.len()
    }

    /// Highest temperature reached by any core at any step.
    pub fn peak_temperature(&self) -> f64 {
        self.temperatures
            .iter()
            .flatten()
            .fold(f64::NEG_INFINITY, |acc, &t| acc.max(t))
    }

    /// Mean core temperature at the final step (initial state if empty).
    pub fn final_avg_temperature(&self) -> f64 {
        let last = self.temperatures.last().unwrap_or(&self.initial_temps);
        last.iter().sum::<f64>() / last.len() as f64
    }

    /// Mean core temperature over all steps.
    pub fn mean_temperature(&self) -> f64 {
        if self.temperatures.is_empty() {
            return self.initial_temps.iter().sum::<f64>() / self.initial_temps.len() as f64;
        }
        let m = self.initial_temps.len();
        let total: f64 = self.temperatures.iter().flatten().sum();
        total / (self.temperatures.len() * m) as f64
    }
}

/// Advances the lumped RC model by one Euler step.
pub fn step(temps: &[f64], powers: &[f64], cfg: &SimConfig) -> Vec<f64> {
    let m = cfg.m();
    debug_assert_eq!(temps.len(), m);
    debug_assert_eq!(powers.len(), m);
    let mut next = vec![0.0; m];
    for i in 0..m {
        let mut flow = powers[i] - (temps[i] - cfg.ambient()) / cfg.resistance(i);
        for j in 0..m {
            if j != i {
                flow -= cfg.coupling(i, j) * (temps[i] - temps[j]);
            }
        }
        next[i] = temps[i] + cfg.dt() / cfg.capacity(i) * flow;
    }
    next
}

/// Steady-state temperatures under every core's idle power, found by
/// stepping the noiseless model to convergence.
pub fn idle_equilibrium(cfg: &SimConfig) -> Vec<f64> {
    let m = cfg.m();
    let powers: Vec<f64> = (0..m).map(|i| cfg.idle_power(i)).collect();
    let mut temps = vec![cfg.ambient(); m];
    for _ in 0..2_000_000 {
        let next = step(&temps, &powers, cfg);
        let delta = temps
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        temps = next;
        if delta < 1e-12 {
            break;
        }
    }
    temps
}

/// Runs the plan's tasks concurrently from the idle steady state.
pub fn run_workload(cfg: &SimConfig, plan: &AllocationPlan, tasks: &[TaskSpec]) -> Result<SimTrace> {
    run_workload_from(cfg, plan, tasks, &idle_equilibrium(cfg))
}

/// Runs the plan's tasks concurrently from a given initial temperature
/// state. Each task occupies its own core; a throttled core draws idle
/// power and its task makes no progress until the core cools down.
pub fn run_workload_from(
    cfg: &SimConfig,
    plan: &AllocationPlan,
    tasks: &[TaskSpec],
    initial: &[f64],
) -> Result<SimTrace> {
    let m = cfg.m();
    if initial.len() != m {
        return Err(Error::Shape(format!(
            "initial state has {} temperatures, config has {} cores",
            initial.len(),
            m
        )));
    }
    if plan.selected.len() != tasks.len() {
        return Err(Error::Shape(format!(
            "{} tasks but plan selects {} cores",
            tasks.len(),
            plan.selected.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for &core in &plan.selected {
        if core >= m {
            return Err(Error::Shape(format!("invalid core id {core} (m = {m})")));
        }
        if !seen.insert(core) {
            return Err(Error::Shape(format!("core {core} assigned twice")));
        }
    }
    if tasks.is_empty() {
        return Ok(SimTrace::empty(cfg.dt(), initial.to_vec()));
    }

    let dt = cfg.dt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let mut temps = initial.to_vec();
    let mut throttled = vec![false; m];
    let mut remaining: Vec<f64> = tasks.iter().map(|t| t.duration).collect();
    let mut busy_steps = vec![0usize; tasks.len()];
    let mut done_step: Vec<Option<usize>> = vec![None; tasks.len()];
    let mut task_energy = vec![0.0; tasks.len()];

    let mut trace = SimTrace::empty(dt, temps.clone());
    let total_busy: f64 = tasks.iter().map(|t| t.duration).sum();
    let max_steps = ((total_busy / dt).ceil() as usize) * 64 + 100_000;

    let mut step_idx = 0usize;
    while done_step.iter().any(Option::is_none) {
        if step_idx >= max_steps {
            return Err(Error::Numeric(format!(
                "workload did not complete within {max_steps} steps (throttle livelock?)"
            )));
        }
        for i in 0..m {
            if throttled[i] && temps[i] <= cfg.cooldown_temp() {
                throttled[i] = false;
            } else if !throttled[i] && temps[i] >= cfg.throttle_temp() {
                throttled[i] = true;
            }
        }
        let mut powers: Vec<f64> = (0..m).map(|i| cfg.idle_power(i)).collect();
        for (t, task) in tasks.iter().enumerate() {
            if done_step[t].is_some() {
                continue;
            }
            let core = plan.selected[t];
            if !throttled[core] {
                let base = cfg.idle_power(core)
                    + task.compute_intensity * (cfg.max_power(core) - cfg.idle_power(core));
                let factor = (1.0 + task.noise_scale * gauss(&mut rng)).max(0.0);
                powers[core] = base * factor;
                remaining[t] -= dt;
                busy_steps[t] += 1;
            }
        }
        temps = step(&temps, &powers, cfg);
        for (t, task_done) in done_step.iter_mut().enumerate() {
            if task_done.is_none() {
                task_energy[t] += powers[plan.selected[t]] * dt;
                if remaining[t] <= 1e-12 {
                    *task_done = Some(step_idx + 1);
                }
            }
        }
        trace.total_energy += powers.iter().sum::<f64>() * dt;
        trace.temperatures.push(temps.clone());
        trace.powers.push(powers);
        step_idx += 1;
    }

    trace.task_energy = task_energy;
    trace.task_steps = done_step.iter().map(|d| d.unwrap()).collect();
    trace.task_busy_fraction = tasks
        .iter()
        .zip(&trace.task_steps)
        .enumerate()
        .map(|(t, (_, &steps))| busy_steps[t] as f64 / steps as f64)
        .collect();
    trace.task_avg_power = trace
        .task_energy
        .iter()
        .zip(&trace.task_steps)
        .map(|(&e, &steps)| e / (steps as f64 * dt))
        .collect();
    trace.makespan = trace.task_steps.iter().copied().max().unwrap_or(0) as f64 * dt;
    Ok(trace)
}

/// Standard normal draw via Box-Muller, deterministic per RNG stream.
pub(crate) fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Allocation policy used while generating a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetPolicy {
    Random,
    CorrelationAware,
}

/// Knobs for dataset generation; the defaults mirror the random-baseline
/// collection protocol (core 0 reserved, up to half the remaining cores
/// busy per run).
#[derive(Debug, Clone)]
pub struct DatasetOptions {
    /// Fixed task count per run; `None` varies it in `1..=eligible/2`.
    pub n_tasks: Option<usize>,
    pub reserved: BTreeSet<usize>,
    pub buffer_capacity: usize,
    pub intensity_range: (f64, f64),
    pub duration_range: (f64, f64),
    pub noise_scale: f64,
    /// Idle seconds simulated between runs so cores cool toward the idle
    /// steady state.
    pub gap_seconds: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            n_tasks: None,
            reserved: [0].into_iter().collect(),
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            intensity_range: (0.4, 0.95),
            duration_range: (2.0, 6.0),
            noise_scale: 0.05,
            gap_seconds: 10.0,
        }
    }
}

/// Column names of a generated dataset for `m` cores.
pub fn dataset_columns(m: usize) -> Vec<String> {
    let mut names = Vec::new();
    for i in 0..m {
        names.push(format!("core_used_{i}"));
    }
    for i in 0..m {
        names.push(format!("temp_before_{i}"));
    }
    for i in 0..m {
        names.push(format!("temp_delta_{i}"));
    }
    names.extend(
        [
            "n_tasks",
            "intensity_mean",
            "intensity_max",
            "duration_total",
            "makespan",
            "avg_power",
            "peak_temp",
            "avg_temp_after",
            "energy",
        ]
        .map(String::from),
    );
    names
}

/// Simulates `n_runs` workloads and collects one observation row per run
/// plus the full per-step temperature history. Thermal state carries over
/// between runs, separated by an idle cooling gap. The returned matrix has
/// `energy` designated as its target.
pub fn generate_dataset(
    cfg: &SimConfig,
    n_runs: usize,
    policy: DatasetPolicy,
    opts: &DatasetOptions,
) -> Result<(FeatureMatrix, TemperatureBuffer)> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
    }
    let m = cfg.m();
    let eligible = m - opts.reserved.iter().filter(|&&c| c < m).count();
    if eligible == 0 {
        return Err(Error::InvalidConfig("every core is reserved".into()));
    }
    let max_tasks = opts.n_tasks.unwrap_or_else(|| (eligible / 2).max(1));
    if max_tasks > eligible {
        return Err(Error::Shape(format!(
            "{max_tasks} tasks but only {eligible} eligible cores"
        )));
    }

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed());
    let mut buffer = TemperatureBuffer::new((0..m).collect(), opts.buffer_capacity)?;
    let mut temps = idle_equilibrium(cfg);
    let gap_steps = (opts.gap_seconds / cfg.dt()).round() as usize;
    let idle_powers: Vec<f64> = (0..m).map(|i| cfg.idle_power(i)).collect();

    let names = dataset_columns(m);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_runs);

    for _ in 0..n_runs {
        let n_tasks = match opts.n_tasks {
            Some(t) => t,
            None => master.gen_range(1..=max_tasks),
        };
        let tasks: Vec<TaskSpec> = (0..n_tasks)
            .map(|_| {
                TaskSpec::new(
                    master.gen_range(opts.intensity_range.0..opts.intensity_range.1),
                    master.gen_range(opts.duration_range.0..opts.duration_range.1),
                    opts.noise_scale,
                )
            })
            .collect::<Result<_>>()?;
        let plan_seed: u64 = master.gen();
        let plan = match policy {
            DatasetPolicy::Random => allocate_random(m, n_tasks, &opts.reserved, plan_seed)?,
            DatasetPolicy::CorrelationAware => {
                if buffer.len() >= 2 {
                    allocate_from_buffer(&buffer, n_tasks, &opts.reserved, 0)?
                } else {
                    // No history yet; fall back to the random baseline.
                    allocate_random(m, n_tasks, &opts.reserved, plan_seed)?
                }
            }
        };
        let run_cfg = cfg.with_seed(master.gen());
        let before = temps.clone();
        let trace = run_workload_from(&run_cfg, &plan, &tasks, &before)?;
        for sample in &trace.temperatures {
            buffer.push(sample)?;
        }
        let after = trace.temperatures.last().cloned().unwrap_or_else(|| before.clone());

        let mut row = Vec::with_capacity(names.len());
        for i in 0..m {
            row.push(if plan.selected.contains(&i) { 1.0 } else { 0.0 });
        }
        row.extend(before.iter().copied());
        row.extend(after.iter().zip(&before).map(|(a, b)| a - b));
        let intensity: Vec<f64> = tasks.iter().map(|t| t.compute_intensity).collect();
        row.push(n_tasks as f64);
        row.push(intensity.iter().sum::<f64>() / n_tasks as f64);
        row.push(intensity.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)));
        row.push(tasks.iter().map(|t| t.duration).sum());
        row.push(trace.makespan);
        row.push(trace.total_energy / trace.makespan.max(cfg.dt()));
        row.push(trace.peak_temperature());
        row.push(after.iter().sum::<f64>() / m as f64);
        row.push(trace.task_energy.iter().sum());
        rows.push(row);

        temps = after;
        for _ in 0..gap_steps {
            temps = step(&temps, &idle_powers, cfg);
            buffer.push(&temps)?;
        }
    }

    let matrix = FeatureMatrix::from_rows(names, rows)?.with_target("energy")?;
    Ok((matrix, buffer))
}
