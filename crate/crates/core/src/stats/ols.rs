//! Ordinary least squares with full inference output.
//!
//! The solve goes through a Householder QR factorization rather than explicit
//! normal equations; standard errors come from the R factor's inverse.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::student_t::p_value;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("design matrix columns and response must share the same length")]
    DimensionMismatch,
    #[error("need more observations than regressors: n = {n}, k = {k}")]
    TooFewObservations { n: usize, k: usize },
    #[error("design matrix is rank deficient; dependent columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("need at least {need} areas with complete metrics, got {got}")]
    InsufficientAreas { got: usize, need: usize },
    #[error("regression specifications do not match: {0}")]
    SpecMismatch(String),
}

/// Column-major design matrix. The first column is conventionally the
/// intercept; weights, when present, turn the fit into weighted least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix<T> {
    pub observation_ids: Vec<String>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<T>>,
    pub response: Vec<T>,
    pub weights: Option<Vec<T>>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn new(
        observation_ids: Vec<String>,
        names: Vec<String>,
        columns: Vec<Vec<T>>,
        response: Vec<T>,
    ) -> Result<Self, StatsError> {
        let n = response.len();
        let k = columns.len();
        if names.len() != k
            || columns.iter().any(|c| c.len() != n)
            || (!observation_ids.is_empty() && observation_ids.len() != n)
        {
            return Err(StatsError::DimensionMismatch);
        }
        if n <= k {
            return Err(StatsError::TooFewObservations { n, k });
        }
        Ok(DesignMatrix {
            observation_ids,
            names,
            columns,
            response,
            weights: None,
        })
    }

    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self, StatsError> {
        if weights.len() != self.response.len() {
            return Err(StatsError::DimensionMismatch);
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow<T> {
    pub name: String,
    pub coefficient: T,
    pub std_error: T,
    pub t_value: T,
    pub p_value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult<T> {
    pub rows: Vec<CoefficientRow<T>>,
    pub r_squared: T,
    pub adjusted_r_squared: T,
    pub n: usize,
    pub degrees_of_freedom: usize,
}

impl<T: Scalar> RegressionResult<T> {
    pub fn row(&self, name: &str) -> Option<&CoefficientRow<T>> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Fit `response ~ columns` by Householder QR.
#[allow(clippy::needless_range_loop)] // triangular index loops
pub fn ols_fit<T: Scalar>(design: &DesignMatrix<T>) -> Result<RegressionResult<T>, StatsError> {
    let n = design.n();
    let k = design.k();
    if n <= k {
        return Err(StatsError::TooFewObservations { n, k });
    }

    // Working copies, with sqrt-weight row scaling for WLS.
    let mut a: Vec<Vec<T>> = design.columns.clone();
    let mut qty: Vec<T> = design.response.clone();
    if let Some(w) = &design.weights {
        for i in 0..n {
            let s = w[i].sqrt();
            for col in a.iter_mut() {
                col[i] = col[i] * s;
            }
            qty[i] = qty[i] * s;
        }
    }

    let col_norm = |col: &[T], from: usize| {
        col[from..]
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    };
    let original_norms: Vec<T> = a.iter().map(|c| col_norm(c, 0)).collect();
    let rank_tol = T::from_f64_const(1e-10);

    let mut deficient: Vec<String> = Vec::new();
    let mut householder: Vec<Vec<T>> = Vec::with_capacity(k);
    for j in 0..k {
        let norm_x = col_norm(&a[j], j);
        let threshold = original_norms[j].max(T::one()) * rank_tol;
        if norm_x <= threshold {
            deficient.push(design.names[j].clone());
            householder.push(Vec::new());
            continue;
        }
        // Householder vector for column j, pivot at row j
        let mut v: Vec<T> = a[j][j..].to_vec();
        let alpha = if v[0] >= T::zero() { -norm_x } else { norm_x };
        v[0] = v[0] - alpha;
        let vtv = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
        a[j][j] = alpha;
        for slot in a[j][j + 1..].iter_mut() {
            *slot = T::zero();
        }
        if vtv > T::zero() {
            let two = T::from_f64_const(2.0);
            let apply = |col: &mut [T]| {
                let dot = col[j..]
                    .iter()
                    .zip(&v)
                    .fold(T::zero(), |acc, (&c, &vi)| acc + c * vi);
                let scale = two * dot / vtv;
                for (c, &vi) in col[j..].iter_mut().zip(&v) {
                    *c = *c - scale * vi;
                }
            };
            for col in a.iter_mut().skip(j + 1) {
                apply(col);
            }
            apply(&mut qty);
        }
        householder.push(v);
    }
    if !deficient.is_empty() {
        return Err(StatsError::RankDeficient { columns: deficient });
    }

    // Back-solve R beta = (Q^T y)[..k]
    let r = |i: usize, j: usize| a[j][i]; // upper triangular, i <= j
    let mut beta = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut acc = qty[i];
        for j in (i + 1)..k {
            acc = acc - r(i, j) * beta[j];
        }
        beta[i] = acc / r(i, i);
    }

    let rss_tail = qty[k..].iter().fold(T::zero(), |acc, &v| acc + v * v);
    let dof = n - k;
    let sigma_sq = rss_tail / T::from_usize_const(dof);

    // R^{-1} by back substitution; diag((X'X)^{-1})_j = sum of squares of
    // row j of R^{-1}.
    let mut rinv = vec![vec![T::zero(); k]; k];
    for c in 0..k {
        let mut z = vec![T::zero(); k];
        for i in (0..=c).rev() {
            let mut acc = if i == c { T::one() } else { T::zero() };
            for j in (i + 1)..=c {
                acc = acc - r(i, j) * z[j];
            }
            z[i] = acc / r(i, i);
        }
        for (i, zi) in z.iter().enumerate().take(c + 1) {
            rinv[i][c] = *zi;
        }
    }

    let rows: Vec<CoefficientRow<T>> = (0..k)
        .map(|j| {
            let var_scale = rinv[j].iter().fold(T::zero(), |acc, &v| acc + v * v);
            let std_error = (sigma_sq * var_scale).sqrt();
            let t_value = beta[j] / std_error;
            CoefficientRow {
                name: design.names[j].clone(),
                coefficient: beta[j],
                std_error,
                t_value,
                p_value: p_value(t_value, dof as u64),
            }
        })
        .collect();

    // Centered (and, under WLS, weight-adjusted) total sum of squares.
    let (tss, rss) = {
        let ones = vec![T::one(); n];
        let w = design.weights.as_ref().unwrap_or(&ones);
        let w_sum = w.iter().fold(T::zero(), |acc, &v| acc + v);
        let y_mean = design
            .response
            .iter()
            .zip(w)
            .fold(T::zero(), |acc, (&y, &wi)| acc + wi * y)
            / w_sum;
        let tss = design
            .response
            .iter()
            .zip(w)
            .fold(T::zero(), |acc, (&y, &wi)| {
                acc + wi * (y - y_mean) * (y - y_mean)
            });
        (tss, rss_tail)
    };
    let r_squared = if tss > T::zero() {
        (T::one() - rss / tss).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let n_t = T::from_usize_const(n);
    let adjusted = T::one() - (T::one() - r_squared) * (n_t - T::one()) / T::from_usize_const(dof);

    Ok(RegressionResult {
        rows,
        r_squared,
        adjusted_r_squared: adjusted,
        n,
        degrees_of_freedom: dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn fit(
        names: &[&str],
        columns: Vec<Vec<f64>>,
        response: Vec<f64>,
    ) -> Result<RegressionResult<f64>, StatsError> {
        let design = DesignMatrix::new(
            Vec::new(),
            names.iter().map(|s| s.to_string()).collect(),
            columns,
            response,
        )?;
        ols_fit(&design)
    }

    #[test]
    fn recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let ones = vec![1.0; 10];
        let result = fit(&["Intercept", "x"], vec![ones, x], y).unwrap();
        assert!((result.rows[0].coefficient - 2.0).abs() < 1e-9);
        assert!((result.rows[1].coefficient - 3.0).abs() < 1e-9);
        assert!((result.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_model_is_the_mean() {
        let result = fit(
            &["Intercept"],
            vec![vec![1.0, 1.0, 1.0]],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        assert!((result.rows[0].coefficient - 2.0).abs() < 1e-12);
        assert_eq!(result.r_squared, 0.0);
    }

    #[test]
    fn too_few_observations_is_an_error() {
        let err = fit(
            &["Intercept", "x"],
            vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            vec![1.0, 2.0],
        )
        .unwrap_err();
        assert!(matches!(err, StatsError::TooFewObservations { n: 2, k: 2 }));
    }

    #[test]
    fn duplicate_column_is_rank_deficient_and_named() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let err = fit(
            &["Intercept", "x", "x_again"],
            vec![vec![1.0; 5], x.clone(), x.clone()],
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
        )
        .unwrap_err();
        match err {
            StatsError::RankDeficient { columns } => assert_eq!(columns, vec!["x_again"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_column_against_intercept_is_rank_deficient() {
        let err = fit(
            &["Intercept", "c"],
            vec![vec![1.0; 5], vec![7.0; 5]],
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
        )
        .unwrap_err();
        assert!(matches!(err, StatsError::RankDeficient { .. }));
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 300;
        let ones = vec![1.0; n];
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 0.4 + 0.3 * x1[i] - 1.2 * x2[i] + rng.random::<f64>())
            .collect();
        let columns = vec![ones, x1, x2];
        let result = fit(&["Intercept", "x1", "x2"], columns.clone(), y.clone()).unwrap();
        let beta: Vec<f64> = result.rows.iter().map(|r| r.coefficient).collect();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for col in &columns {
            let dot: f64 = (0..n)
                .map(|i| {
                    let fitted: f64 = columns.iter().zip(&beta).map(|(c, b)| c[i] * b).sum();
                    col[i] * (y[i] - fitted)
                })
                .sum();
            assert!(dot.abs() < 1e-8 * y_norm, "residual correlation {dot}");
        }
    }

    #[test]
    fn column_scaling_rescales_only_its_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 120;
        let ones = vec![1.0; n];
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * x1[i] + 2.0 * x2[i] + rng.random::<f64>() * 0.1)
            .collect();
        let base = fit(
            &["Intercept", "x1", "x2"],
            vec![ones.clone(), x1.clone(), x2.clone()],
            y.clone(),
        )
        .unwrap();
        let c = 40.0;
        let scaled_col: Vec<f64> = x1.iter().map(|v| v * c).collect();
        let scaled = fit(&["Intercept", "x1", "x2"], vec![ones, scaled_col, x2], y).unwrap();
        assert!((scaled.rows[1].coefficient - base.rows[1].coefficient / c).abs() < 1e-9);
        assert!((scaled.rows[1].t_value - base.rows[1].t_value).abs() < 1e-9);
        assert!((scaled.rows[1].p_value - base.rows[1].p_value).abs() < 1e-9);
        assert!((scaled.r_squared - base.r_squared).abs() < 1e-9);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn monte_carlo_recovery_within_three_standard_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let ones = vec![1.0; n];
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let noise: f64 = rng.sample(StandardNormal);
                0.1 + 0.68 * x1[i] + 0.04 * x2[i] + 0.01 * noise
            })
            .collect();
        let result = fit(
            &["Intercept", "x1", "x2"],
            vec![ones.clone(), x1.clone(), x2.clone()],
            y.clone(),
        )
        .unwrap();
        for (row, truth) in result.rows.iter().zip([0.1, 0.68, 0.04]) {
            assert!(
                (row.coefficient - truth).abs() <= 3.0 * row.std_error,
                "{}: {} vs {} (se {})",
                row.name,
                row.coefficient,
                truth,
                row.std_error
            );
        }

        // independent oracle: hand-coded normal-equations solve on the same data
        let cols = [ones, x1, x2];
        let mut xtx = [[0.0f64; 3]; 3];
        let mut xty = [0.0f64; 3];
        for i in 0..n {
            for a in 0..3 {
                xty[a] += cols[a][i] * y[i];
                for b in 0..3 {
                    xtx[a][b] += cols[a][i] * cols[b][i];
                }
            }
        }
        // Gaussian elimination
        let mut m = xtx;
        let mut rhs = xty;
        for p in 0..3 {
            let pivot = m[p][p];
            for q in (p + 1)..3 {
                let f = m[q][p] / pivot;
                for c in p..3 {
                    m[q][c] -= f * m[p][c];
                }
                rhs[q] -= f * rhs[p];
            }
        }
        let mut oracle = [0.0f64; 3];
        for p in (0..3).rev() {
            let mut acc = rhs[p];
            for c in (p + 1)..3 {
                acc -= m[p][c] * oracle[c];
            }
            oracle[p] = acc / m[p][p];
        }
        for (row, o) in result.rows.iter().zip(oracle) {
            assert!(
                (row.coefficient - o).abs() < 1e-8,
                "QR vs normal equations: {} vs {}",
                row.coefficient,
                o
            );
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn matches_exact_rational_normal_equations_on_small_instances() {
        use num::BigRational;
        use num::FromPrimitive as _;

        // Exact-rational normal-equations solve, the small-instance oracle.
        fn rational_solve(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
            let k = columns.len();
            let n = y.len();
            let r = |v: f64| BigRational::from_f64(v).unwrap();
            let mut xtx = vec![vec![BigRational::from_i64(0).unwrap(); k]; k];
            let mut xty = vec![BigRational::from_i64(0).unwrap(); k];
            for i in 0..n {
                for a in 0..k {
                    xty[a] += r(columns[a][i]) * r(y[i]);
                    for b in 0..k {
                        xtx[a][b] += r(columns[a][i]) * r(columns[b][i]);
                    }
                }
            }
            for p in 0..k {
                let pivot = xtx[p][p].clone();
                for q in (p + 1)..k {
                    let f = &xtx[q][p] / &pivot;
                    for c in p..k {
                        let delta = &f * &xtx[p][c];
                        xtx[q][c] -= delta;
                    }
                    let delta = &f * &xty[p];
                    xty[q] -= delta;
                }
            }
            let mut beta = vec![BigRational::from_i64(0).unwrap(); k];
            for p in (0..k).rev() {
                let mut acc = xty[p].clone();
                for c in (p + 1)..k {
                    acc -= &xtx[p][c] * &beta[c];
                }
                beta[p] = acc / xtx[p][p].clone();
            }
            use num::ToPrimitive as _;
            beta.iter().map(|b| b.to_f64().unwrap()).collect()
        }

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..6 {
            let n = 6 + trial;
            let k = 3;
            // eighths keep values exactly representable and well scaled
            let mut columns = vec![vec![1.0f64; n]];
            for _ in 1..k {
                columns.push(
                    (0..n)
                        .map(|_| rng.random_range(-40..40) as f64 / 8.0)
                        .collect(),
                );
            }
            let y: Vec<f64> = (0..n)
                .map(|_| rng.random_range(-40..40) as f64 / 8.0)
                .collect();
            let design = DesignMatrix::new(
                Vec::new(),
                vec!["Intercept".into(), "x1".into(), "x2".into()],
                columns.clone(),
                y.clone(),
            )
            .unwrap();
            let qr = match ols_fit(&design) {
                Ok(r) => r,
                Err(StatsError::RankDeficient { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let oracle = rational_solve(&columns, &y);
            for (row, o) in qr.rows.iter().zip(oracle) {
                assert!(
                    (row.coefficient - o).abs() < 1e-10,
                    "trial {trial}: {} vs {}",
                    row.coefficient,
                    o
                );
            }
        }
    }

    #[test]
    fn weighted_fit_reproduces_replicated_rows() {
        // weighting an observation by 3 must equal repeating it 3 times
        let ones3 = vec![1.0; 3];
        let x3 = vec![0.0, 1.0, 2.0];
        let y3 = vec![1.0, 2.5, 3.1];
        let design = DesignMatrix::new(
            Vec::new(),
            vec!["Intercept".into(), "x".into()],
            vec![ones3, x3],
            y3,
        )
        .unwrap()
        .with_weights(vec![1.0, 3.0, 1.0])
        .unwrap();
        let weighted = ols_fit(&design).unwrap();

        let ones5 = vec![1.0; 5];
        let x5 = vec![0.0, 1.0, 1.0, 1.0, 2.0];
        let y5 = vec![1.0, 2.5, 2.5, 2.5, 3.1];
        let repeated = fit(&["Intercept", "x"], vec![ones5, x5], y5).unwrap();
        for (a, b) in weighted.rows.iter().zip(&repeated.rows) {
            assert!((a.coefficient - b.coefficient).abs() < 1e-12);
        }
    }

    #[test]
    fn adjusted_r_squared_never_exceeds_r_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(8..60);
            let ones = vec![1.0; n];
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let result = fit(&["Intercept", "x"], vec![ones, x], y).unwrap();
            assert!(result.adjusted_r_squared <= result.r_squared + 1e-15);
            assert!((0.0..=1.0).contains(&result.r_squared));
        }
    }
}
