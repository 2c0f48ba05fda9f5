//! Two-way ANOVA without replication.

use serde::{Deserialize, Serialize};

use super::fdist::{f_quantile, f_survival};
use crate::error::{Error, Result};

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaSummary {
    pub ss_row: f64,
    pub ss_col: f64,
    pub ss_error: f64,
    pub ss_total: f64,
    pub df_row: usize,
    pub df_col: usize,
    pub df_error: usize,
    pub df_total: usize,
    pub f_row: f64,
    pub f_col: f64,
    pub p_row: f64,
    pub p_col: f64,
    pub fcrit_row: f64,
    pub fcrit_col: f64,
}

/// `grid[i][j]` is the score of row factor level `i` under column level `j`.
///
/// When the error mean square is zero the F statistic is undefined; a factor
/// that explains nothing is then reported as `F = 0, P = 1`, one that explains
/// something as `F = inf, P = 0`.
pub fn anova_two_way(grid: &[Vec<f64>]) -> Result<AnovaSummary> {
    let r = grid.len();
    let c = grid.first().map_or(0, Vec::len);
    if r < 2 || c < 2 {
        return Err(Error::param("grid", format!("need at least 2x2, got {r}x{c}")));
    }
    if let Some(bad) = grid.iter().find(|row| row.len() != c) {
        return Err(Error::DimMismatch {
            expected: c,
            actual: bad.len(),
        });
    }
    if grid.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::param("grid", "contains a non-finite value"));
    }

    let n = (r * c) as f64;
    let grand = grid.iter().flatten().sum::<f64>() / n;
    let row_means: Vec<f64> = grid.iter().map(|row| row.iter().sum::<f64>() / c as f64).collect();
    let col_means: Vec<f64> = (0..c)
        .map(|j| grid.iter().map(|row| row[j]).sum::<f64>() / r as f64)
        .collect();

    let ss_row = c as f64 * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_col = r as f64 * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_error = 0.0;
    let mut ss_total = 0.0;
    for (i, row) in grid.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            ss_error += (x - row_means[i] - col_means[j] + grand).powi(2);
            ss_total += (x - grand).powi(2);
        }
    }

    let df_row = r - 1;
    let df_col = c - 1;
    let df_error = df_row * df_col;
    let ms_error = ss_error / df_error as f64;

    let (f_row, p_row) = f_test(ss_row / df_row as f64, ms_error, df_row, df_error)?;
    let (f_col, p_col) = f_test(ss_col / df_col as f64, ms_error, df_col, df_error)?;

    Ok(AnovaSummary {
        ss_row,
        ss_col,
        ss_error,
        ss_total,
        df_row,
        df_col,
        df_error,
        df_total: r * c - 1,
        f_row,
        f_col,
        p_row,
        p_col,
        fcrit_row: f_quantile(df_row as f64, df_error as f64, SIGNIFICANCE)?,
        fcrit_col: f_quantile(df_col as f64, df_error as f64, SIGNIFICANCE)?,
    })
}

fn f_test(ms_factor: f64, ms_error: f64, df_factor: usize, df_error: usize) -> Result<(f64, f64)> {
    if ms_error > 0.0 {
        let f = ms_factor / ms_error;
        Ok((f, f_survival(df_factor as f64, df_error as f64, f)?))
    } else if ms_factor > 0.0 {
        Ok((f64::INFINITY, 0.0))
    } else {
        Ok((0.0, 1.0))
    }
}
