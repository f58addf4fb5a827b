//! Filter stage: Pearson correlation over per-core temperature histories,
//! per-core correlation scores, and the correlation-aware task-to-core
//! allocation algorithm with its random baseline.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{fmt_f64, io_err, TemperatureBuffer};
use crate::error::{Error, Result};

/// A Pearson correlation value. `degenerate` marks pairs where at least one
/// series had zero variance; the coefficient is then defined as 0 (a
/// constant series exhibits no linear co-movement).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonR {
    pub value: f64,
    pub degenerate: bool,
}

/// Pearson correlation coefficient between two equal-length series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<PearsonR> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(PearsonR { value: 0.0, degenerate: true });
    }
    let r = cov / (var_x * var_y).sqrt();
    // Clamp tiny floating-point excursions outside [-1, 1].
    Ok(PearsonR { value: r.clamp(-1.0, 1.0), degenerate: false })
}

/// Symmetric m x m matrix of pairwise temperature correlations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    core_ids: Vec<usize>,
    /// Row-major m x m values.
    values: Vec<f64>,
    /// Cores whose series had zero variance over the window.
    degenerate: Vec<bool>,
    n_samples: usize,
}

impl CorrelationMatrix {
    pub fn n_cores(&self) -> usize {
        self.core_ids.len()
    }

    pub fn core_ids(&self) -> &[usize] {
        &self.core_ids
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.core_ids.len() + j]
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.degenerate[i]
    }

    /// Writes the matrix as an m x m CSV with core-id headers.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("core");
        for id in &self.core_ids {
            header.push_str(&format!(",core_{}", id));
        }
        header.push('\n');
        w.write_all(header.as_bytes()).map_err(io_err)?;
        let m = self.core_ids.len();
        for i in 0..m {
            let mut line = format!("core_{}", self.core_ids[i]);
            for j in 0..m {
                line.push(',');
                line.push_str(&fmt_f64(self.get(i, j)));
            }
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(io_err)?;
        }
        Ok(())
    }

    /// Writes long-form `core_i,core_j,r` records for the upper triangle.
    pub fn write_long_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"core_i,core_j,r\n").map_err(io_err)?;
        let m = self.core_ids.len();
        for i in 0..m {
            for j in (i + 1)..m {
                let line = format!(
                    "{},{},{}\n",
                    self.core_ids[i],
                    self.core_ids[j],
                    fmt_f64(self.get(i, j))
                );
                w.write_all(line.as_bytes()).map_err(io_err)?;
            }
        }
        Ok(())
    }

    pub fn to_csv_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn to_long_csv_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.write_long_csv(std::io::BufWriter::new(file))
    }
}

/// Builds the correlation matrix from the full buffer window.
pub fn correlation_matrix(buffer: &TemperatureBuffer) -> Result<CorrelationMatrix> {
    correlation_matrix_windowed(buffer, 0)
}

/// Builds the correlation matrix from the most recent `window` samples
/// (`window = 0` uses the full buffer).
pub fn correlation_matrix_windowed(
    buffer: &TemperatureBuffer,
    window: usize,
) -> Result<CorrelationMatrix> {
    let m = buffer.n_cores();
    let n = if window == 0 { buffer.len() } else { buffer.len().min(window) };
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let series: Vec<Vec<f64>> = (0..m).map(|i| buffer.series_window(i, window)).collect();
    let mut values = vec![0.0; m * m];
    let mut degenerate = vec![false; m];
    for i in 0..m {
        let var: f64 = {
            let s = &series[i];
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - mean) * (v - mean)).sum()
        };
        degenerate[i] = var == 0.0;
        values[i * m + i] = if degenerate[i] { 0.0 } else { 1.0 };
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let r = pearson(&series[i], &series[j])?.value;
            values[i * m + j] = r;
            values[j * m + i] = r;
        }
    }
    Ok(CorrelationMatrix {
        core_ids: buffer.core_ids().to_vec(),
        values,
        degenerate,
        n_samples: n,
    })
}

/// Per-core correlation scores: `s_i` is the mean absolute correlation
/// between core `i` and every other core. Low scores mark thermally
/// independent cores.
pub fn correlation_scores(matrix: &CorrelationMatrix) -> Result<Vec<f64>> {
    let m = matrix.n_cores();
    if m < 2 {
        return Err(Error::Shape("correlation scores need at least two cores".into()));
    }
    let mut scores = vec![0.0; m];
    for i in 0..m {
        let mut sum = 0.0;
        for j in 0..m {
            if j != i {
                sum += matrix.get(i, j).abs();
            }
        }
        scores[i] = sum / (m as f64 - 1.0);
    }
    Ok(scores)
}

/// Core positions sorted by ascending score, ties broken by lower core id.
/// The returned values are positions into the score slice (which for
/// buffers built over cores `0..m` coincide with core ids).
pub fn rank_cores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// How an allocation plan was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationPolicy {
    Correlation,
    Random,
}

/// A task-to-core assignment: the ordered selected cores plus the score
/// vector that justified them (empty for random plans).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub selected: Vec<usize>,
    /// Score of every core at decision time, aligned with core ids;
    /// empty for the random policy.
    pub scores: Vec<f64>,
    pub policy: AllocationPolicy,
    pub reserved: Vec<usize>,
}

impl AllocationPlan {
    pub fn n_tasks(&self) -> usize {
        self.selected.len()
    }
}

/// Picks the first `n_tasks` non-reserved cores from the ranked list.
pub fn allocate(
    ranked: &[usize],
    n_tasks: usize,
    reserved: &BTreeSet<usize>,
    scores: &[f64],
) -> Result<AllocationPlan> {
    let eligible: Vec<usize> = ranked.iter().copied().filter(|c| !reserved.contains(c)).collect();
    if n_tasks > eligible.len() {
        return Err(Error::Shape(format!(
            "{} tasks but only {} eligible cores",
            n_tasks,
            eligible.len()
        )));
    }
    Ok(AllocationPlan {
        selected: eligible[..n_tasks].to_vec(),
        scores: scores.to_vec(),
        policy: AllocationPolicy::Correlation,
        reserved: reserved.iter().copied().collect(),
    })
}

/// Uniformly samples `n_tasks` distinct non-reserved cores from `0..m`,
/// in random order; seed-deterministic.
pub fn allocate_random(
    m: usize,
    n_tasks: usize,
    reserved: &BTreeSet<usize>,
    seed: u64,
) -> Result<AllocationPlan> {
    let mut eligible: Vec<usize> = (0..m).filter(|c| !reserved.contains(c)).collect();
    if n_tasks > eligible.len() {
        return Err(Error::Shape(format!(
            "{} tasks but only {} eligible cores",
            n_tasks,
            eligible.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    Ok(AllocationPlan {
        selected: eligible[..n_tasks].to_vec(),
        scores: Vec::new(),
        policy: AllocationPolicy::Random,
        reserved: reserved.iter().copied().collect(),
    })
}

/// Correlation-aware allocation straight from a temperature buffer:
/// matrix, scores, ranking, prefix selection.
pub fn allocate_from_buffer(
    buffer: &TemperatureBuffer,
    n_tasks: usize,
    reserved: &BTreeSet<usize>,
    window: usize,
) -> Result<AllocationPlan> {
    let matrix = correlation_matrix_windowed(buffer, window)?;
    let scores = correlation_scores(&matrix)?;
    let positions = rank_cores(&scores);
    let ranked: Vec<usize> = positions.iter().map(|&p| buffer.core_ids()[p]).collect();
    allocate(&ranked, n_tasks, reserved, &scores)
}

/// Pushes a fresh reading, recomputes the correlation structure, and
/// returns a new plan.
pub fn update_and_reallocate(
    buffer: &mut TemperatureBuffer,
    reading: &[f64],
    n_tasks: usize,
    reserved: &BTreeSet<usize>,
) -> Result<AllocationPlan> {
    buffer.push(reading)?;
    allocate_from_buffer(buffer, n_tasks, reserved, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    #[test]
    fn pearson_perfect_lines() {
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(!r.degenerate);
        let r = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.value, -1.0);
    }

    #[test]
    fn pearson_hand_computed_value() {
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r.value - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_degenerate_and_errors() {
        let r = pearson(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.degenerate);
        assert!(matches!(
            pearson(&[1.0], &[2.0]),
            Err(Error::InsufficientSamples { .. })
        ));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn matrix_identical_series_fully_correlated() {
        let mut buf = TemperatureBuffer::with_cores(2).unwrap();
        for k in 0..10 {
            let v = 25.0 + k as f64;
            buf.push(&[v, v]).unwrap();
        }
        let m = correlation_matrix(&buf).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.n_samples(), 10);
    }

    #[test]
    fn matrix_needs_two_samples() {
        let mut buf = TemperatureBuffer::with_cores(2).unwrap();
        buf.push(&[25.0, 25.0]).unwrap();
        assert!(matches!(
            correlation_matrix(&buf),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn scores_from_known_matrix() {
        // r01 = 0.5, r02 = -0.5, r12 = 1.0
        let matrix = CorrelationMatrix {
            core_ids: vec![0, 1, 2],
            values: vec![
                1.0, 0.5, -0.5, //
                0.5, 1.0, 1.0, //
                -0.5, 1.0, 1.0,
            ],
            degenerate: vec![false; 3],
            n_samples: 10,
        };
        let s = correlation_scores(&matrix).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-12);
        assert!((s[1] - 0.75).abs() < 1e-12);
        assert!((s[2] - 0.75).abs() < 1e-12);
        assert_eq!(rank_cores(&s), vec![0, 1, 2]);
    }

    #[test]
    fn rank_ties_break_by_core_id() {
        assert_eq!(rank_cores(&[0.3, 0.3, 0.3]), vec![0, 1, 2]);
        assert_eq!(rank_cores(&[0.9, 0.5, 0.1]), vec![2, 1, 0]);
    }

    #[test]
    fn allocate_takes_prefix_and_honors_reservation() {
        let scores = vec![0.0; 5];
        let plan = allocate(&[3, 1, 4, 2], 2, &set(&[]), &scores).unwrap();
        assert_eq!(plan.selected, vec![3, 1]);
        let plan = allocate(&[0, 3, 1], 2, &set(&[0]), &scores).unwrap();
        assert_eq!(plan.selected, vec![3, 1]);
        assert!(allocate(&[0, 1], 2, &set(&[0]), &scores).is_err());
    }

    #[test]
    fn allocate_random_uniform_frequencies() {
        let reserved = set(&[0]);
        let mut counts = [0usize; 5];
        let draws = 10_000;
        for seed in 0..draws {
            let plan = allocate_random(5, 2, &reserved, seed).unwrap();
            assert_eq!(plan.selected.len(), 2);
            for &c in &plan.selected {
                assert_ne!(c, 0);
                counts[c] += 1;
            }
        }
        for &c in &counts[1..] {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.5).abs() < 0.03, "freq = {}", freq);
        }
        // Forced set: every eligible core, and deterministic per seed.
        let all = allocate_random(4, 3, &set(&[0]), 7).unwrap();
        let mut sorted = all.selected.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![1, 2, 3]);
        assert_eq!(all, allocate_random(4, 3, &set(&[0]), 7).unwrap());
    }

    #[test]
    fn update_and_reallocate_reacts_to_co_movement() {
        use rand::Rng;
        use rand::SeedableRng;

        // Cores 0 and 1 co-move strongly; cores 2 and 3 wiggle independently,
        // so the plan {2, 3} has a wide margin.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut buf = TemperatureBuffer::with_cores(4).unwrap();
        let mut last = [0.0; 4];
        for k in 0..40 {
            let common = 30.0 + (k % 9) as f64;
            last = [
                common,
                common + rng.gen_range(-0.1..0.1),
                30.0 + rng.gen_range(-3.0..3.0),
                30.0 + rng.gen_range(-3.0..3.0),
            ];
            buf.push(&last).unwrap();
        }
        let before = allocate_from_buffer(&buf, 2, &set(&[0]), 0).unwrap();
        let mut sorted = before.selected.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![2, 3]);

        // Re-pushing the latest reading leaves the plan unchanged.
        let unchanged = update_and_reallocate(&mut buf, &last, 2, &set(&[0])).unwrap();
        assert_eq!(before.selected, unchanged.selected);

        // Inject strong co-movement on cores 2 and 3; at least one of them
        // must drop in rank.
        let rank_of = |plan: &AllocationPlan, core: usize| -> usize {
            let positions = rank_cores(&plan.scores);
            positions.iter().position(|&p| p == core).unwrap()
        };
        let mut plan_after = unchanged.clone();
        for k in 0..60 {
            let v = 25.0 + (k % 7) as f64 * 3.0;
            let drift = 30.0 + 0.01 * k as f64;
            plan_after =
                update_and_reallocate(&mut buf, &[drift, 30.0 - 0.01 * k as f64, v, v], 2, &set(&[0]))
                    .unwrap();
        }
        let dropped_2 = rank_of(&plan_after, 2) > rank_of(&unchanged, 2);
        let dropped_3 = rank_of(&plan_after, 3) > rank_of(&unchanged, 3);
        assert!(dropped_2 || dropped_3);
    }

    #[test]
    fn matrix_csv_exports() {
        let mut buf = TemperatureBuffer::with_cores(3).unwrap();
        for k in 0..8 {
            buf.push(&[25.0 + k as f64, 30.0 - k as f64, 27.0 + (k % 2) as f64])
                .unwrap();
        }
        let m = correlation_matrix(&buf).unwrap();
        let mut wide = Vec::new();
        m.write_csv(&mut wide).unwrap();
        let wide = String::from_utf8(wide).unwrap();
        assert!(wide.starts_with("core,core_0,core_1,core_2"));
        assert_eq!(wide.lines().count(), 4);
        let mut long = Vec::new();
        m.write_long_csv(&mut long).unwrap();
        let long = String::from_utf8(long).unwrap();
        assert_eq!(long.lines().count(), 1 + 3);
    }
}
