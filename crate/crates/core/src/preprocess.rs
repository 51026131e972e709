//! Feature matrix construction and column standardization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::warning::{Warning, WarningKind};

/// Dense row-major matrix of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wraps row-major `data`; panics unless it holds `rows × cols` values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data does not match the shape");
        Matrix { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

/// Per-requirement (effort, satisfaction) points, raw and standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub columns: Vec<String>,
    pub raw: Matrix,
    pub standardized: Matrix,
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    pub warnings: Vec<Warning>,
}

pub const EFFORT: usize = 0;
pub const SATISFACTION: usize = 1;

impl FeatureMatrix {
    /// Standardizes arbitrary observations; column names are positional.
    pub fn from_raw(ids: Vec<String>, columns: Vec<String>, raw: Matrix) -> Result<Self> {
        if raw.rows() < 2 {
            return Err(Error::DegenerateInput(format!(
                "need at least 2 observations, got {}",
                raw.rows()
            )));
        }
        if ids.len() != raw.rows() || columns.len() != raw.cols() {
            return Err(Error::InvalidArgument("ids/columns do not match matrix shape".into()));
        }
        if raw.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite feature value".into()));
        }
        let (standardized, means, std_devs) = standardize_columns(&raw);
        let mut warnings = Vec::new();
        for (j, sd) in std_devs.iter().enumerate() {
            if *sd == 0.0 {
                warnings.push(Warning::new(
                    WarningKind::ConstantColumn,
                    format!("column {} is constant; standardized to 0", columns[j]),
                ));
            }
        }
        if warnings.len() == raw.cols() {
            return Err(Error::DegenerateInput("all observations are identical".into()));
        }
        Ok(FeatureMatrix {
            ids,
            columns,
            raw,
            standardized,
            means,
            std_devs,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.raw.cols()
    }
}

/// z = (x − mean) / sd with the sample (n − 1) standard deviation.
pub fn standardize(problem: &ProblemInstance) -> Result<FeatureMatrix> {
    let rows: Vec<[f64; 2]> = problem
        .requirements()
        .iter()
        .zip(problem.satisfaction())
        .map(|(r, s)| [r.effort, *s])
        .collect();
    FeatureMatrix::from_raw(
        problem.ids().map(str::to_owned).collect(),
        vec!["effort".into(), "satisfaction".into()],
        Matrix::from_rows(&rows),
    )
}

fn standardize_columns(raw: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
    let n = raw.rows() as f64;
    let mut out = Matrix::zeros(raw.rows(), raw.cols());
    let mut means = Vec::with_capacity(raw.cols());
    let mut sds = Vec::with_capacity(raw.cols());
    for j in 0..raw.cols() {
        let mean = raw.column(j).sum::<f64>() / n;
        let var = raw.column(j).map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        // tolerate rounding noise on a column of equal values
        let constant = raw.column(j).all(|x| x == raw.get(0, j));
        let sd = if constant { 0.0 } else { sd };
        for i in 0..raw.rows() {
            out.data[i * raw.cols() + j] = if sd == 0.0 { 0.0 } else { (raw.get(i, j) - mean) / sd };
        }
        means.push(mean);
        sds.push(sd);
    }
    (out, means, sds)
}
