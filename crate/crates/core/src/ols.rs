//! Ordinary least squares with full inferential statistics, the model
//! selection metrics (AIC, BIC, Mallows' Cp, adjusted R², K-fold CV error),
//! and backward stepwise feature elimination.
//!
//! The solver is a Householder QR decomposition with an explicit
//! linear-dependence check, so singular designs fail with the name of the
//! offending column instead of producing garbage coefficients.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{fmt_f64, io_err, FeatureMatrix};
use crate::error::{Error, Result};

/// An OLS fit: coefficients (intercept first), their standard errors,
/// t statistics, two-sided p-values, and goodness-of-fit summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionFit {
    /// Slope names, aligned with `coefficients[1..]`.
    pub feature_names: Vec<String>,
    /// `[intercept, slopes...]`, length `k`.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub rss: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// Error-variance estimate `rss / (n - k)`.
    pub sigma2: f64,
    pub n: usize,
    /// Number of estimated coefficients including the intercept.
    pub k: usize,
}

impl RegressionFit {
    pub fn dof(&self) -> usize {
        self.n - self.k
    }

    /// Predicts the response for one feature row (without intercept entry).
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() + 1 != self.k {
            return Err(Error::Shape(format!(
                "row has {} features, fit expects {}",
                row.len(),
                self.k - 1
            )));
        }
        Ok(self.coefficients[0]
            + row
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(x, b)| x * b)
                .sum::<f64>())
    }
}

/// Relative tolerance for the linear-dependence check: a column whose
/// residual norm after projection onto earlier columns falls below this
/// fraction of its original norm is reported as dependent.
const DEPENDENCE_TOL: f64 = 1e-8;

/// Fits `y = b0 + sum_i b_i x_i` by Householder QR.
///
/// `x` is row-major `n x p` (no intercept column; one is added internally),
/// `names` labels the `p` feature columns. Requires `n >= p + 2` so the
/// standard errors have at least one degree of freedom.
pub fn fit_ols(x: &[f64], y: &[f64], names: &[String]) -> Result<RegressionFit> {
    let n = y.len();
    let p = names.len();
    if p == 0 {
        return Err(Error::Shape("need at least one feature".into()));
    }
    if x.len() != n * p {
        return Err(Error::Shape(format!(
            "design has {} values, expected {}x{}",
            x.len(),
            n,
            p
        )));
    }
    let k = p + 1;
    if n < k + 1 {
        return Err(Error::InsufficientSamples { needed: k + 1, got: n });
    }

    // Column-major design with the intercept as column 0.
    let mut a = vec![0.0; n * k];
    for i in 0..n {
        a[i] = 1.0;
        for j in 0..p {
            a[(j + 1) * n + i] = x[i * p + j];
        }
    }

    check_dependence(&a, n, k, names)?;

    let mut r = a;
    let mut qtb = y.to_vec();
    householder_qr(&mut r, n, k, &mut qtb);
    let beta = back_substitute(&r, n, k, &qtb[..k])?;

    // Residuals from the original data, not from the transformed system.
    let mut rss = 0.0;
    for i in 0..n {
        let mut pred = beta[0];
        for j in 0..p {
            pred += beta[j + 1] * x[i * p + j];
        }
        let e = y[i] - pred;
        rss += e * e;
    }

    let dof = (n - k) as f64;
    let sigma2 = rss / dof;
    let rinv = invert_upper(&r, n, k)?;
    let mut std_errors = vec![0.0; k];
    for i in 0..k {
        let mut s = 0.0;
        for j in i..k {
            let v = rinv[i * k + j];
            s += v * v;
        }
        std_errors[i] = (sigma2 * s).sqrt();
    }

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let r_squared = if tss > 0.0 {
        1.0 - rss / tss
    } else if rss.abs() < 1e-12 {
        1.0
    } else {
        0.0
    };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / dof;

    let mut fit = RegressionFit {
        feature_names: names.to_vec(),
        coefficients: beta,
        std_errors,
        t_values: vec![0.0; k],
        p_values: vec![0.0; k],
        rss,
        r_squared,
        adj_r_squared,
        sigma2,
        n,
        k,
    };
    let tp = t_and_p(&fit);
    for (i, (t, p_val)) in tp.into_iter().enumerate() {
        fit.t_values[i] = t;
        fit.p_values[i] = p_val;
    }
    Ok(fit)
}

/// Fits on a matrix with a designated target column.
pub fn fit_ols_matrix(m: &FeatureMatrix) -> Result<RegressionFit> {
    let (names, x, y) = m.design_and_target()?;
    fit_ols(&x, &y, &names)
}

/// Per-coefficient `(t, p)` from the stored coefficients, standard errors,
/// and residual degrees of freedom. A zero standard error (perfect fit)
/// yields a signed infinite t and `p = 0`; a zero coefficient with zero
/// error yields `t = 0, p = 1`.
pub fn t_and_p(fit: &RegressionFit) -> Vec<(f64, f64)> {
    let dof = fit.dof() as f64;
    fit.coefficients
        .iter()
        .zip(&fit.std_errors)
        .map(|(&b, &se)| {
            if se > 0.0 {
                let t = b / se;
                (t, student_t_p(t, dof))
            } else if b == 0.0 {
                (0.0, 1.0)
            } else {
                (b.signum() * f64::INFINITY, 0.0)
            }
        })
        .collect()
}

/// Two-sided p-value for a t statistic with `dof` degrees of freedom.
pub fn student_t_p(t: f64, dof: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    (2.0 * dist.cdf(-t.abs())).min(1.0)
}

/// Gaussian log-likelihood of an OLS fit at its maximum:
/// `-(n/2) (ln(2 pi) + ln(rss/n) + 1)`. Infinite for a perfect fit.
pub fn log_likelihood(n: usize, rss: f64) -> f64 {
    if rss <= 0.0 {
        return f64::INFINITY;
    }
    let nf = n as f64;
    -(nf / 2.0) * ((2.0 * std::f64::consts::PI).ln() + (rss / nf).ln() + 1.0)
}

pub fn aic(k: usize, ln_l: f64) -> f64 {
    2.0 * k as f64 - 2.0 * ln_l
}

pub fn bic(k: usize, n: usize, ln_l: f64) -> f64 {
    k as f64 * (n as f64).ln() - 2.0 * ln_l
}

/// Mallows' Cp against a full-model error-variance estimate. `k` counts
/// the estimated coefficients including the intercept.
pub fn mallows_cp(rss: f64, sigma2_full: f64, n: usize, k: usize) -> f64 {
    rss / sigma2_full - (n as f64 - 2.0 * k as f64)
}

/// The model-selection metrics for one fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub aic: f64,
    pub bic: f64,
    pub cp: f64,
    pub adj_r_squared: f64,
}

/// Computes AIC/BIC/Cp/adjusted R² for a fit. Likelihood-based criteria
/// count the coefficients plus one variance parameter; Cp uses the supplied
/// full-model `sigma2`. A perfect fit (RSS = 0) yields `-inf` for AIC/BIC.
pub fn metrics(fit: &RegressionFit, sigma2_full: f64) -> ModelMetrics {
    let ln_l = log_likelihood(fit.n, fit.rss);
    let k_lik = fit.k + 1;
    let (a, b) = if ln_l.is_infinite() {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    } else {
        (aic(k_lik, ln_l), bic(k_lik, fit.n, ln_l))
    };
    ModelMetrics {
        aic: a,
        bic: b,
        cp: mallows_cp(fit.rss, sigma2_full, fit.n, fit.k),
        adj_r_squared: fit.adj_r_squared,
    }
}

/// Seed-deterministic shuffled partition of `0..n` into `k_folds` folds
/// whose sizes differ by at most one.
pub fn make_folds(n: usize, k_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k_folds < 2 || k_folds > n {
        return Err(Error::InvalidConfig(format!(
            "k_folds must be in [2, {}], got {}",
            n, k_folds
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let base = n / k_folds;
    let extra = n % k_folds;
    let mut folds = Vec::with_capacity(k_folds);
    let mut start = 0;
    for f in 0..k_folds {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// Mean held-out MSE over a K-fold partition of the rows.
pub fn kfold_cv(x: &[f64], y: &[f64], names: &[String], k_folds: usize, seed: u64) -> Result<f64> {
    let n = y.len();
    let p = names.len();
    let folds = make_folds(n, k_folds, seed)?;
    let mut total = 0.0;
    for fold in &folds {
        let held: std::collections::HashSet<usize> = fold.iter().copied().collect();
        let mut xt = Vec::with_capacity((n - fold.len()) * p);
        let mut yt = Vec::with_capacity(n - fold.len());
        for i in 0..n {
            if !held.contains(&i) {
                xt.extend_from_slice(&x[i * p..(i + 1) * p]);
                yt.push(y[i]);
            }
        }
        let fit = fit_ols(&xt, &yt, names)?;
        let mut mse = 0.0;
        for &i in fold {
            let e = y[i] - fit.predict(&x[i * p..(i + 1) * p])?;
            mse += e * e;
        }
        total += mse / fold.len() as f64;
    }
    Ok(total / k_folds as f64)
}

/// How backward stepwise picks the model it reports as selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// Stop at the first iteration where every coefficient is significant.
    Significance,
    /// Report the visited feature set with the lowest CV error.
    MinCvError,
}

/// Metrics snapshot for one visited model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepMetrics {
    pub features: Vec<String>,
    pub rss: f64,
    pub aic: f64,
    pub bic: f64,
    pub cp: f64,
    pub adj_r_squared: f64,
    pub cv_error: f64,
}

/// One elimination: the removed feature, its p-value at removal time, and
/// the metrics of the refit model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepwiseStep {
    pub removed: String,
    pub removed_p: f64,
    pub metrics: StepMetrics,
}

/// Full record of a backward stepwise run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepwiseTrace {
    /// Metrics of the initial full model (iteration 0).
    pub initial: StepMetrics,
    pub steps: Vec<StepwiseStep>,
    /// Features surviving when elimination stopped.
    pub final_features: Vec<String>,
    /// Features picked by the configured stopping rule.
    pub selected_features: Vec<String>,
    pub alpha: f64,
    pub stopping: StoppingRule,
}

impl StepwiseTrace {
    /// Writes `iteration, removed_feature, p_value, n_features, rss, aic,
    /// bic, cp, adj_r2, cv_error` rows; iteration 0 is the full model.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"iteration,removed_feature,p_value,n_features,rss,aic,bic,cp,adj_r2,cv_error\n")
            .map_err(io_err)?;
        let row = |it: usize, removed: &str, p: Option<f64>, m: &StepMetrics| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                it,
                removed,
                p.map(fmt_f64).unwrap_or_default(),
                m.features.len(),
                fmt_f64(m.rss),
                fmt_f64(m.aic),
                fmt_f64(m.bic),
                fmt_f64(m.cp),
                fmt_f64(m.adj_r_squared),
                fmt_f64(m.cv_error),
            )
        };
        w.write_all(row(0, "", None, &self.initial).as_bytes())
            .map_err(io_err)?;
        for (i, step) in self.steps.iter().enumerate() {
            w.write_all(row(i + 1, &step.removed, Some(step.removed_p), &step.metrics).as_bytes())
                .map_err(io_err)?;
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

/// Backward stepwise elimination: fit, drop the least significant feature
/// whose p-value exceeds `alpha` (ties broken by lowest column index),
/// refit, and repeat until every survivor is significant or one feature
/// remains. Each visited model's metrics are recorded.
pub fn backward_stepwise(
    x: &[f64],
    y: &[f64],
    names: &[String],
    alpha: f64,
    k_folds: usize,
    seed: u64,
    stopping: StoppingRule,
) -> Result<StepwiseTrace> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must be in (0,1), got {}", alpha)));
    }
    let n = y.len();
    let p = names.len();
    if x.len() != n * p {
        return Err(Error::Shape(format!(
            "design has {} values, expected {}x{}",
            x.len(),
            n,
            p
        )));
    }

    // Active columns by original index.
    let mut active: Vec<usize> = (0..p).collect();
    let gather = |cols: &[usize]| -> (Vec<f64>, Vec<String>) {
        let mut xs = Vec::with_capacity(n * cols.len());
        for i in 0..n {
            xs.extend(cols.iter().map(|&j| x[i * p + j]));
        }
        (xs, cols.iter().map(|&j| names[j].clone()).collect())
    };

    let snapshot = |cols: &[usize], sigma2_full: f64| -> Result<(RegressionFit, StepMetrics)> {
        let (xs, sub_names) = gather(cols);
        let fit = fit_ols(&xs, y, &sub_names)?;
        let m = metrics(&fit, sigma2_full);
        let cv = kfold_cv(&xs, y, &sub_names, k_folds, seed)?;
        Ok((
            fit.clone(),
            StepMetrics {
                features: sub_names,
                rss: fit.rss,
                aic: m.aic,
                bic: m.bic,
                cp: m.cp,
                adj_r_squared: m.adj_r_squared,
                cv_error: cv,
            },
        ))
    };

    let (full_fit, initial) = {
        let (xs, sub_names) = gather(&active);
        let fit = fit_ols(&xs, y, &sub_names)?;
        let sigma2_full = fit.sigma2;
        let m = metrics(&fit, sigma2_full);
        let cv = kfold_cv(&xs, y, &sub_names, k_folds, seed)?;
        (
            fit.clone(),
            StepMetrics {
                features: sub_names,
                rss: fit.rss,
                aic: m.aic,
                bic: m.bic,
                cp: m.cp,
                adj_r_squared: m.adj_r_squared,
                cv_error: cv,
            },
        )
    };
    let sigma2_full = full_fit.sigma2;

    let mut steps: Vec<StepwiseStep> = Vec::new();
    let mut current_fit = full_fit;
    loop {
        // Least significant slope above alpha; intercept is never a candidate.
        let mut worst: Option<(usize, f64)> = None;
        for (pos, _) in current_fit.feature_names.iter().enumerate() {
            let p_val = current_fit.p_values[pos + 1];
            if p_val > alpha {
                let better = match worst {
                    None => true,
                    Some((_, wp)) => p_val > wp,
                };
                if better {
                    worst = Some((pos, p_val));
                }
            }
        }
        let Some((pos, p_val)) = worst else { break };
        if active.len() == 1 {
            break;
        }
        let removed_col = active.remove(pos);
        let (fit, m) = snapshot(&active, sigma2_full)?;
        steps.push(StepwiseStep {
            removed: names[removed_col].clone(),
            removed_p: p_val,
            metrics: m,
        });
        current_fit = fit;
    }

    let final_features: Vec<String> = active.iter().map(|&j| names[j].clone()).collect();
    let selected_features = match stopping {
        StoppingRule::Significance => final_features.clone(),
        StoppingRule::MinCvError => {
            let mut best = &initial;
            for s in &steps {
                if s.metrics.cv_error < best.cv_error {
                    best = &s.metrics;
                }
            }
            best.features.clone()
        }
    };

    Ok(StepwiseTrace {
        initial,
        steps,
        final_features,
        selected_features,
        alpha,
        stopping,
    })
}

/// Result of a paired difference test between two equal-length outcome
/// series, testing `mean(a - b) = 0` against a two-sided alternative.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub t: f64,
    pub p: f64,
    pub n: usize,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(Error::Shape("paired series must have equal length".into()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        let t = if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY };
        let p = if mean == 0.0 { 1.0 } else { 0.0 };
        return Ok(PairedTest { mean_diff: mean, t, p, n });
    }
    let t = mean / (var / n as f64).sqrt();
    Ok(PairedTest {
        mean_diff: mean,
        t,
        p: student_t_p(t, (n - 1) as f64),
        n,
    })
}

/// Flags the first column of the column-major design `a` (n x k) that is
/// numerically dependent on the columns before it, by modified
/// Gram-Schmidt. Column 0 is the intercept.
fn check_dependence(a: &[f64], n: usize, k: usize, names: &[String]) -> Result<()> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v: Vec<f64> = a[j * n..(j + 1) * n].to_vec();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for q in &basis {
            let dot: f64 = q.iter().zip(&v).map(|(qi, vi)| qi * vi).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= dot * qi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= DEPENDENCE_TOL * norm0 || norm == 0.0 {
            let column = if j == 0 {
                "(intercept)".to_string()
            } else {
                names[j - 1].clone()
            };
            return Err(Error::Singular { column });
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        basis.push(v);
    }
    Ok(())
}

/// In-place Householder QR of the column-major `a` (n x k, n >= k).
/// On return the upper triangle of `a` holds R and `b` holds Q^T b.
fn householder_qr(a: &mut [f64], n: usize, k: usize, b: &mut [f64]) {
    let mut v = vec![0.0; n];
    for j in 0..k {
        let mut norm = 0.0;
        for i in j..n {
            let x = a[j * n + i];
            norm += x * x;
        }
        norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[j * n + j];
        let alpha = if x0 > 0.0 { -norm } else { norm };
        let mut vnorm2 = 0.0;
        for i in j..n {
            let vi = if i == j { a[j * n + i] - alpha } else { a[j * n + i] };
            v[i] = vi;
            vnorm2 += vi * vi;
        }
        if vnorm2 == 0.0 {
            continue;
        }
        a[j * n + j] = alpha;
        for i in (j + 1)..n {
            a[j * n + i] = 0.0;
        }
        for c in (j + 1)..k {
            let mut dot = 0.0;
            for i in j..n {
                dot += v[i] * a[c * n + i];
            }
            let s = 2.0 * dot / vnorm2;
            for i in j..n {
                a[c * n + i] -= s * v[i];
            }
        }
        let mut dot = 0.0;
        for i in j..n {
            dot += v[i] * b[i];
        }
        let s = 2.0 * dot / vnorm2;
        for i in j..n {
            b[i] -= s * v[i];
        }
    }
}

/// Solves `R beta = rhs` where R is the upper triangle of the column-major
/// `a` (n x k).
fn back_substitute(a: &[f64], n: usize, k: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..k {
            s -= a[j * n + i] * beta[j];
        }
        let r_ii = a[i * n + i];
        if r_ii == 0.0 {
            return Err(Error::Numeric("zero pivot in triangular solve".into()));
        }
        beta[i] = s / r_ii;
    }
    Ok(beta)
}

/// Inverse of the k x k upper triangle of the column-major `a` (n x k),
/// returned row-major.
fn invert_upper(a: &[f64], n: usize, k: usize) -> Result<Vec<f64>> {
    let mut inv = vec![0.0; k * k];
    for col in 0..k {
        let mut e = vec![0.0; k];
        e[col] = 1.0;
        let x = back_substitute(a, n, k, &e)?;
        for row in 0..k {
            inv[row * k + col] = x[row];
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{}", i + 1)).collect()
    }

    #[test]
    fn exact_line_recovers_coefficients() {
        // y = 2x + 1 with no noise
        let x: Vec<f64> = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let fit = fit_ols(&x, &y, &names(1)).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-10);
        assert!(fit.rss < 1e-18);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.adj_r_squared - 1.0).abs() < 1e-12);
        // Residual roundoff may leave an SE of ~1e-15; either way the slope
        // is overwhelmingly significant.
        assert!(fit.t_values[1] > 1e6 || fit.t_values[1].is_infinite());
        assert!(fit.p_values[1] < 1e-9);
    }

    #[test]
    fn zero_standard_error_sentinels() {
        let fit = RegressionFit {
            feature_names: vec!["x1".into()],
            coefficients: vec![0.0, 2.0],
            std_errors: vec![0.0, 0.0],
            t_values: vec![0.0; 2],
            p_values: vec![0.0; 2],
            rss: 0.0,
            r_squared: 1.0,
            adj_r_squared: 1.0,
            sigma2: 0.0,
            n: 5,
            k: 2,
        };
        let tp = t_and_p(&fit);
        assert_eq!(tp[0], (0.0, 1.0)); // zero coefficient, zero SE
        assert_eq!(tp[1].0, f64::INFINITY);
        assert_eq!(tp[1].1, 0.0);
    }

    #[test]
    fn simple_regression_known_values() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = vec![2.1, 3.9, 6.2, 7.8];
        let fit = fit_ols(&x, &y, &names(1)).unwrap();
        assert!((fit.coefficients[1] - 1.94).abs() < 1e-9, "slope {}", fit.coefficients[1]);
        assert!((fit.coefficients[0] - 0.15).abs() < 1e-9, "intercept {}", fit.coefficients[0]);
    }

    #[test]
    fn duplicated_column_is_singular_and_named() {
        let x = vec![
            1.0, 1.0, //
            2.0, 2.0, //
            3.0, 3.0, //
            4.0, 4.0, //
            5.0, 5.0,
        ];
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let err = fit_ols(&x, &y, &names(2)).unwrap_err();
        match err {
            Error::Singular { column } => assert_eq!(column, "x2"),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn t_p_critical_value() {
        // Classic two-sided 5% critical value for 10 dof.
        let p = student_t_p(2.228, 10.0);
        assert!((p - 0.050).abs() < 1e-3, "p = {}", p);
        assert_eq!(student_t_p(0.0, 10.0), 1.0);
    }

    #[test]
    fn metric_formulas() {
        assert_eq!(aic(2, 0.0), 4.0);
        assert_eq!(bic(2, 1, 0.0), 0.0);
        // RSS = sigma2 (n - 2k) makes Cp vanish.
        let n = 30;
        let k = 4;
        let sigma2 = 1.7;
        let rss = sigma2 * (n as f64 - 2.0 * k as f64);
        assert!(mallows_cp(rss, sigma2, n, k).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit_metrics_are_sentinel() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let fit = fit_ols(&x, &y, &names(1)).unwrap();
        let m = metrics(&fit, 1.0);
        assert_eq!(m.aic, f64::NEG_INFINITY);
        assert_eq!(m.bic, f64::NEG_INFINITY);
    }

    #[test]
    fn kfold_loo_on_exact_data_is_zero() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let n = y.len();
        let err = kfold_cv(&x, &y, &names(1), n, 3).unwrap();
        assert!(err < 1e-18, "cv = {}", err);
    }

    #[test]
    fn kfold_is_seed_deterministic_and_balanced() {
        let folds = make_folds(11, 4, 9).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 11);
        assert!(sizes.iter().all(|&s| s == 2 || s == 3));
        assert_eq!(folds, make_folds(11, 4, 9).unwrap());
        let mut all: Vec<usize> = folds.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_rejects_bad_k() {
        let x = vec![1.0, 2.0, 3.0];
        let y = vec![1.0, 2.0, 3.0];
        assert!(kfold_cv(&x, &y, &names(1), 4, 0).is_err());
        assert!(kfold_cv(&x, &y, &names(1), 1, 0).is_err());
    }

    fn planted_data(n: usize, noise_features: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 2 + noise_features;
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = Vec::with_capacity(p);
            for _ in 0..p {
                row.push(rng.gen_range(-1.0..1.0));
            }
            let eps: f64 = rng.gen_range(-0.1..0.1);
            y.push(3.0 * row[0] - 2.0 * row[1] + eps);
            x.extend(row);
        }
        (x, y, names(p))
    }

    #[test]
    fn stepwise_all_significant_makes_no_removals() {
        let (x, y, nm) = planted_data(100, 0, 5);
        let trace =
            backward_stepwise(&x, &y, &nm, 0.05, 5, 1, StoppingRule::Significance).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(trace.final_features, nm);
    }

    #[test]
    fn stepwise_removes_noise_and_keeps_signal() {
        let (x, y, nm) = planted_data(300, 6, 11);
        let trace =
            backward_stepwise(&x, &y, &nm, 0.05, 5, 1, StoppingRule::Significance).unwrap();
        assert!(trace.final_features.contains(&"x1".to_string()));
        assert!(trace.final_features.contains(&"x2".to_string()));
        // Each step removed exactly one feature; the trace is bounded.
        assert!(trace.steps.len() <= nm.len() - 1);
        // Survivors are all significant.
        let sub: Vec<usize> = trace
            .final_features
            .iter()
            .map(|f| nm.iter().position(|n| n == f).unwrap())
            .collect();
        let mut xs = Vec::new();
        for i in 0..y.len() {
            xs.extend(sub.iter().map(|&j| x[i * nm.len() + j]));
        }
        let fit = fit_ols(&xs, &y, &trace.final_features).unwrap();
        for p_val in &fit.p_values[1..] {
            assert!(*p_val <= 0.05, "survivor with p = {}", p_val);
        }
    }

    #[test]
    fn stepwise_trace_csv_has_header_and_rows() {
        let (x, y, nm) = planted_data(120, 3, 2);
        let trace = backward_stepwise(&x, &y, &nm, 0.05, 4, 3, StoppingRule::MinCvError).unwrap();
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("iteration,removed_feature,p_value"));
        assert_eq!(lines.len(), trace.steps.len() + 2);
    }

    #[test]
    fn rss_is_monotone_in_features() {
        // Adding a column can only reduce RSS (never increase it).
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let n = 40;
            let mut x = Vec::with_capacity(n * 3);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let a: f64 = rng.gen_range(-1.0..1.0);
                let b: f64 = rng.gen_range(-1.0..1.0);
                let c: f64 = rng.gen_range(-1.0..1.0);
                x.extend([a, b, c]);
                y.push(a - 0.5 * b + rng.gen_range(-0.3..0.3));
            }
            let small: Vec<f64> = (0..n).flat_map(|i| x[i * 3..i * 3 + 2].to_vec()).collect();
            let fit_small = fit_ols(&small, &y, &names(2)).unwrap();
            let fit_large = fit_ols(&x, &y, &names(3)).unwrap();
            assert!(fit_small.rss >= fit_large.rss - 1e-9);
        }
    }

    #[test]
    fn t_p_consistency_on_random_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let n = 25;
            let mut x = Vec::new();
            let mut y = Vec::new();
            for _ in 0..n {
                let a: f64 = rng.gen_range(-2.0..2.0);
                let b: f64 = rng.gen_range(-2.0..2.0);
                x.extend([a, b]);
                y.push(0.5 * a + rng.gen_range(-1.0..1.0));
            }
            let fit = fit_ols(&x, &y, &names(2)).unwrap();
            for (i, (t, p)) in t_and_p(&fit).into_iter().enumerate() {
                assert!((t - fit.t_values[i]).abs() < 1e-12);
                assert!((p - fit.p_values[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn paired_test_detects_shift() {
        let a: Vec<f64> = (0..30).map(|i| 1.0 + 0.01 * i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| v - 0.5).collect();
        let res = paired_t_test(&a, &b).unwrap();
        assert!((res.mean_diff - 0.5).abs() < 1e-12);
        assert_eq!(res.p, 0.0); // zero-variance differences, infinite t
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noisy: Vec<f64> = a.iter().map(|v| v - 0.5 + rng.gen_range(-0.1..0.1)).collect();
        let res = paired_t_test(&a, &noisy).unwrap();
        assert!(res.p < 0.001);
        assert!(res.mean_diff > 0.0);
    }
}
