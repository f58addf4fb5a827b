//! Dataset and temperature-history types shared by all selection stages:
//! named-column feature matrices, the bounded per-core temperature buffer,
//! CSV ingestion, train/test splitting, and standardization.

use std::collections::{HashSet, VecDeque};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Formats a float so it round-trips exactly through `f64::from_str` while
/// staying readable for typical magnitudes.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e-4 && v.abs() < 1e15 {
        format!("{}", v)
    } else {
        format!("{:e}", v)
    }
}

/// A named-column observation matrix. Rows are observations, columns are
/// features; one column may be designated as the regression target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    /// Row-major values, `n * d` long.
    values: Vec<f64>,
    n: usize,
    d: usize,
    target: Option<String>,
}

impl FeatureMatrix {
    /// Builds a matrix from rows. Every row must have one entry per column,
    /// all values must be finite, and column names must be unique.
    pub fn from_rows(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = names.len();
        if d == 0 {
            return Err(Error::Shape("matrix needs at least one column".into()));
        }
        if rows.is_empty() {
            return Err(Error::EmptyData("matrix needs at least one row".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        let n = rows.len();
        let mut values = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Shape(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    d
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::Shape(format!("row {} contains a non-finite value", i)));
                }
                values.push(v);
            }
        }
        Ok(Self { names, values, n, d, target: None })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.d
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn target_name(&self) -> Option<&str> {
        self.target.as_deref()
    }

    /// Designates the response column. The column must exist.
    pub fn set_target(&mut self, name: &str) -> Result<()> {
        self.col_index(name)?;
        self.target = Some(name.to_string());
        Ok(())
    }

    pub fn with_target(mut self, name: &str) -> Result<Self> {
        self.set_target(name)?;
        Ok(self)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn col_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.values[i * self.d + idx]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.column(self.col_index(name)?))
    }

    /// Returns a new matrix containing only the given columns, in the given
    /// order. The target designation is kept when the target is retained.
    pub fn select_columns(&self, keep: &[String]) -> Result<Self> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|name| self.col_index(name))
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.n * idx.len());
        for i in 0..self.n {
            let row = self.row(i);
            values.extend(idx.iter().map(|&j| row[j]));
        }
        let target = self
            .target
            .clone()
            .filter(|t| keep.iter().any(|k| k == t));
        Ok(Self { names: keep.to_vec(), values, n: self.n, d: idx.len(), target })
    }

    /// Returns a matrix with the given rows (by index, in order).
    pub fn take_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyData("row selection is empty".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            if i >= self.n {
                return Err(Error::Shape(format!("row index {} out of range", i)));
            }
            values.extend_from_slice(self.row(i));
        }
        Ok(Self {
            names: self.names.clone(),
            values,
            n: rows.len(),
            d: self.d,
            target: self.target.clone(),
        })
    }

    /// Feature names, excluding the target column.
    pub fn feature_names(&self) -> Vec<String> {
        self.names
            .iter()
            .filter(|c| Some(c.as_str()) != self.target.as_deref())
            .cloned()
            .collect()
    }

    /// Splits into a row-major design block (features only) and the target
    /// vector. Requires a designated target.
    pub fn design_and_target(&self) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
        let target = self
            .target
            .as_deref()
            .ok_or_else(|| Error::MissingColumn("no target column designated".into()))?;
        let t_idx = self.col_index(target)?;
        let feat_names = self.feature_names();
        if feat_names.is_empty() {
            return Err(Error::Shape("matrix has no feature columns besides the target".into()));
        }
        let mut x = Vec::with_capacity(self.n * (self.d - 1));
        let mut y = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row = self.row(i);
            for (j, v) in row.iter().enumerate() {
                if j != t_idx {
                    x.push(*v);
                }
            }
            y.push(row[t_idx]);
        }
        Ok((feat_names, x, y))
    }

    /// Writes the matrix as CSV with a header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = self.names.join(",");
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io_err)?;
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|&v| fmt_f64(v)).collect();
            let mut line = row.join(",");
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(io_err)?;
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
}

pub(crate) fn io_err(e: std::io::Error) -> Error {
    Error::File { path: std::path::PathBuf::from("<writer>"), source: e }
}

/// Result of CSV ingestion: the parsed matrix plus how many rows were
/// rejected for unparsable or non-finite cells.
#[derive(Debug, Clone)]
pub struct TraceLoad {
    pub matrix: FeatureMatrix,
    pub dropped_rows: usize,
}

/// Loads a feature CSV. The first row is the header; rows containing
/// unparsable or non-finite cells are dropped and counted.
pub fn load_trace(path: &Path) -> Result<TraceLoad> {
    let file = std::fs::File::open(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    let d = headers.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, e))?;
        if record.len() != d {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(d);
        let mut ok = true;
        for cell in record.iter() {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            rows.push(row);
        } else {
            dropped += 1;
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyData(format!(
            "{}: empty after filtering ({} rows dropped)",
            path.display(),
            dropped
        )));
    }
    Ok(TraceLoad {
        matrix: FeatureMatrix::from_rows(headers, rows)?,
        dropped_rows: dropped,
    })
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse { path: path.to_path_buf(), detail: e.to_string() }
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of rows assigned to the training partition, in (0, 1).
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must be in (0,1), got {}",
                train_fraction
            )));
        }
        Ok(Self { train_fraction, seed })
    }
}

/// Shuffles rows with the spec's seed and splits them. The training
/// partition receives `floor(n * fraction)` rows; the partitions are
/// disjoint and exhaustive.
pub fn split(matrix: &FeatureMatrix, spec: SplitSpec) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let n = matrix.n_rows();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let n_train = ((n as f64) * spec.train_fraction).floor() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let train = matrix.take_rows(&order[..n_train])?;
    let test = matrix.take_rows(&order[n_train..])?;
    Ok((train, test))
}

/// Per-column scaling parameters produced by [`standardize`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scaling {
    pub means: Vec<f64>,
    /// Sample standard deviations; 1.0 recorded for zero-variance columns.
    pub stds: Vec<f64>,
    /// Columns whose variance was zero and were passed through unscaled.
    pub zero_variance: Vec<bool>,
}

impl Scaling {
    /// Applies the stored transform to a matrix with the same columns.
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        if matrix.d != self.means.len() {
            return Err(Error::Shape(format!(
                "scaling has {} columns, matrix has {}",
                self.means.len(),
                matrix.d
            )));
        }
        let mut out = matrix.clone();
        for i in 0..out.n {
            for j in 0..out.d {
                if !self.zero_variance[j] {
                    let v = &mut out.values[i * out.d + j];
                    *v = (*v - self.means[j]) / self.stds[j];
                }
            }
        }
        Ok(out)
    }

    /// Inverts the transform; `apply` then `invert` is the identity on
    /// non-constant columns up to floating-point error.
    pub fn invert(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        if matrix.d != self.means.len() {
            return Err(Error::Shape(format!(
                "scaling has {} columns, matrix has {}",
                self.means.len(),
                matrix.d
            )));
        }
        let mut out = matrix.clone();
        for i in 0..out.n {
            for j in 0..out.d {
                if !self.zero_variance[j] {
                    let v = &mut out.values[i * out.d + j];
                    *v = *v * self.stds[j] + self.means[j];
                }
            }
        }
        Ok(out)
    }

    /// Scales a single target value back to its original units.
    pub fn invert_value(&self, col: usize, v: f64) -> f64 {
        if self.zero_variance[col] {
            v
        } else {
            v * self.stds[col] + self.means[col]
        }
    }
}

/// Centers each column to mean zero and scales it to unit sample variance.
/// Zero-variance columns are passed through unchanged and flagged.
pub fn standardize(matrix: &FeatureMatrix) -> (FeatureMatrix, Scaling) {
    let n = matrix.n as f64;
    let mut means = vec![0.0; matrix.d];
    let mut stds = vec![1.0; matrix.d];
    let mut zero_variance = vec![false; matrix.d];
    for j in 0..matrix.d {
        let col = matrix.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let var = if matrix.n > 1 { ss / (n - 1.0) } else { 0.0 };
        means[j] = mean;
        if var > 0.0 {
            stds[j] = var.sqrt();
        } else {
            zero_variance[j] = true;
        }
    }
    let scaling = Scaling { means, stds, zero_variance };
    let scaled = scaling.apply(matrix).expect("matching shape by construction");
    (scaled, scaling)
}

/// Bounded ring of per-core temperature samples. The oldest sample is
/// evicted first once the buffer reaches capacity.
#[derive(Debug, Clone)]
pub struct TemperatureBuffer {
    capacity: usize,
    core_ids: Vec<usize>,
    samples: VecDeque<Vec<f64>>,
}

/// Default history depth for temperature buffers.
pub const DEFAULT_BUFFER_CAPACITY: usize = 10_000;

impl TemperatureBuffer {
    pub fn new(core_ids: Vec<usize>, capacity: usize) -> Result<Self> {
        if core_ids.is_empty() {
            return Err(Error::Shape("buffer needs at least one core".into()));
        }
        if capacity == 0 {
            return Err(Error::InvalidConfig("buffer capacity must be positive".into()));
        }
        Ok(Self { capacity, core_ids, samples: VecDeque::new() })
    }

    /// Buffer over cores `0..m` with the default capacity.
    pub fn with_cores(m: usize) -> Result<Self> {
        Self::new((0..m).collect(), DEFAULT_BUFFER_CAPACITY)
    }

    pub fn n_cores(&self) -> usize {
        self.core_ids.len()
    }

    pub fn core_ids(&self) -> &[usize] {
        &self.core_ids
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends one reading (one value per core), evicting the oldest
    /// sample when at capacity.
    pub fn push(&mut self, reading: &[f64]) -> Result<()> {
        if reading.len() != self.core_ids.len() {
            return Err(Error::Shape(format!(
                "reading has {} values, buffer tracks {} cores",
                reading.len(),
                self.core_ids.len()
            )));
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(reading.to_vec());
        Ok(())
    }

    /// Temperature series for the core at position `pos` (not core id),
    /// oldest first.
    pub fn series(&self, pos: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[pos]).collect()
    }

    /// Like [`TemperatureBuffer::series`] but restricted to the most
    /// recent `window` samples; `window = 0` means the full buffer.
    pub fn series_window(&self, pos: usize, window: usize) -> Vec<f64> {
        let skip = if window == 0 || window >= self.samples.len() {
            0
        } else {
            self.samples.len() - window
        };
        self.samples.iter().skip(skip).map(|s| s[pos]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.samples.iter()
    }

    /// Writes the buffer as `step, core_<id>...` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("step");
        for id in &self.core_ids {
            header.push_str(&format!(",core_{}", id));
        }
        header.push('\n');
        w.write_all(header.as_bytes()).map_err(io_err)?;
        for (k, sample) in self.samples.iter().enumerate() {
            let mut line = k.to_string();
            for v in sample {
                line.push(',');
                line.push_str(&fmt_f64(*v));
            }
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(io_err)?;
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

    /// Reads a `step, core_<id>...` CSV back into a buffer.
    pub fn from_csv_path(path: &Path, capacity: usize) -> Result<Self> {
        let loaded = load_trace(path)?;
        let names = loaded.matrix.column_names();
        if names.is_empty() || names[0] != "step" {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: "temperature trace must start with a 'step' column".into(),
            });
        }
        let mut core_ids = Vec::new();
        for name in &names[1..] {
            let id = name
                .strip_prefix("core_")
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    detail: format!("expected core_<id> column, got '{}'", name),
                })?;
            core_ids.push(id);
        }
        let mut buffer = Self::new(core_ids, capacity)?;
        for i in 0..loaded.matrix.n_rows() {
            let row = loaded.matrix.row(i);
            buffer.push(&row[1..])?;
        }
        Ok(buffer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_matrix() -> FeatureMatrix {
        FeatureMatrix::from_rows(
            vec!["f1".into(), "f2".into(), "energy".into()],
            vec![
                vec![1.0, 4.0, 10.0],
                vec![2.0, 5.0, 20.0],
                vec![3.0, 6.0, 30.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn from_rows_rejects_duplicates_and_ragged_rows() {
        let err = FeatureMatrix::from_rows(
            vec!["a".into(), "a".into()],
            vec![vec![1.0, 2.0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateColumn(_)));

        let err = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![1.0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn load_trace_parses_and_drops_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "f1,f2,energy\n1,2,3\n4,NaN,6\n7,8,9\n").unwrap();
        let loaded = load_trace(&path).unwrap();
        assert_eq!(loaded.matrix.n_rows(), 2);
        assert_eq!(loaded.matrix.n_cols(), 3);
        assert_eq!(loaded.dropped_rows, 1);
        assert_eq!(
            loaded.matrix.column_names(),
            &["f1".to_string(), "f2".to_string(), "energy".to_string()]
        );
    }

    #[test]
    fn load_trace_three_row_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "f1,f2,energy\n1,2,3\n4,5,6\n7,8,9.5e0\n").unwrap();
        let loaded = load_trace(&path).unwrap();
        assert_eq!(loaded.matrix.n_rows(), 3);
        assert_eq!(loaded.dropped_rows, 0);
        assert_eq!(loaded.matrix.row(2), &[7.0, 8.0, 9.5]);
    }

    #[test]
    fn load_trace_header_only_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "f1,f2\n").unwrap();
        let err = load_trace(&path).unwrap_err();
        assert!(matches!(err, Error::EmptyData(_)), "got {err:?}");
    }

    #[test]
    fn load_trace_missing_file() {
        let err = load_trace(Path::new("/nonexistent/file.csv")).unwrap_err();
        assert!(matches!(err, Error::File { .. }));
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0]).collect();
        let m = FeatureMatrix::from_rows(vec!["a".into(), "b".into()], rows).unwrap();
        let (train, test) = split(&m, SplitSpec::new(0.8, 7).unwrap()).unwrap();
        assert_eq!(train.n_rows(), 8);
        assert_eq!(test.n_rows(), 2);
    }

    #[test]
    fn split_is_seed_deterministic() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let m = FeatureMatrix::from_rows(vec!["a".into()], rows).unwrap();
        let spec = SplitSpec::new(0.8, 42).unwrap();
        let (tr1, te1) = split(&m, spec).unwrap();
        let (tr2, te2) = split(&m, spec).unwrap();
        assert_eq!(tr1, tr2);
        assert_eq!(te1, te2);
    }

    #[test]
    fn split_single_row_fails() {
        let m = FeatureMatrix::from_rows(vec!["a".into()], vec![vec![1.0]]).unwrap();
        assert!(matches!(
            split(&m, SplitSpec::new(0.8, 0).unwrap()),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn standardize_centers_and_scales() {
        let m = FeatureMatrix::from_rows(
            vec!["x".into()],
            vec![vec![1.0], vec![2.0], vec![3.0]],
        )
        .unwrap();
        let (scaled, scaling) = standardize(&m);
        let col = scaled.column(0);
        let mean = col.iter().sum::<f64>() / 3.0;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 2.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
        assert!(!scaling.zero_variance[0]);
    }

    #[test]
    fn standardize_passes_constant_columns_through() {
        let m = FeatureMatrix::from_rows(
            vec!["c".into()],
            vec![vec![5.0], vec![5.0], vec![5.0]],
        )
        .unwrap();
        let (scaled, scaling) = standardize(&m);
        assert_eq!(scaled.column(0), vec![5.0, 5.0, 5.0]);
        assert!(scaling.zero_variance[0]);
    }

    #[test]
    fn buffer_evicts_oldest_when_full() {
        let mut buf = TemperatureBuffer::new(vec![0], 2).unwrap();
        buf.push(&[1.0]).unwrap();
        buf.push(&[2.0]).unwrap();
        buf.push(&[3.0]).unwrap();
        assert_eq!(buf.len(), 2);
        assert_eq!(buf.series(0), vec![2.0, 3.0]);
    }

    #[test]
    fn buffer_rejects_wrong_arity() {
        let mut buf = TemperatureBuffer::with_cores(3).unwrap();
        assert!(matches!(buf.push(&[1.0, 2.0]), Err(Error::Shape(_))));
        buf.push(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn buffer_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("temps.csv");
        let mut buf = TemperatureBuffer::new(vec![0, 1], 100).unwrap();
        buf.push(&[25.0, 26.5]).unwrap();
        buf.push(&[27.25, 28.125]).unwrap();
        buf.to_csv_path(&path).unwrap();
        let back = TemperatureBuffer::from_csv_path(&path, 100).unwrap();
        assert_eq!(back.core_ids(), &[0, 1]);
        assert_eq!(back.series(0), buf.series(0));
        assert_eq!(back.series(1), buf.series(1));
    }

    #[test]
    fn select_columns_preserves_order_and_target() {
        let m = toy_matrix().with_target("energy").unwrap();
        let sub = m
            .select_columns(&["f2".to_string(), "energy".to_string()])
            .unwrap();
        assert_eq!(sub.column_names(), &["f2".to_string(), "energy".to_string()]);
        assert_eq!(sub.target_name(), Some("energy"));
        assert_eq!(sub.column(0), vec![4.0, 5.0, 6.0]);

        let no_target = m.select_columns(&["f1".to_string()]).unwrap();
        assert_eq!(no_target.target_name(), None);
    }

    #[test]
    fn design_and_target_extracts_features() {
        let m = toy_matrix().with_target("energy").unwrap();
        let (names, x, y) = m.design_and_target().unwrap();
        assert_eq!(names, vec!["f1".to_string(), "f2".to_string()]);
        assert_eq!(x, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(y, vec![10.0, 20.0, 30.0]);
    }
}
