//! Row-major containers for points, centers and labels.

use serde::Serialize;

use crate::error::{Error, Result};

/// An immutable `m × n` matrix of finite features, one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Dataset {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::usage(format!(
                "dataset must have at least one row and one column, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::usage(format!(
                "expected {} values for a {rows}x{cols} dataset, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::usage(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { values, rows, cols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::usage(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    /// Number of points (`m`).
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Number of features (`n`).
    pub fn dims(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Copies the listed rows, in the listed order, into a new dataset.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::usage(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, values)
    }

    /// Column-wise arithmetic mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        let m = self.rows as f64;
        sums.iter_mut().for_each(|s| *s /= m);
        sums
    }
}

/// `k` cluster centers plus a mask of rows that are degenerate (empty or not
/// yet initialized). Degenerate rows hold zeros and are never read by the
/// distance kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    centers: Vec<f64>,
    degenerate: Vec<bool>,
    cols: usize,
}

impl Centroids {
    /// `k` uninitialized centers.
    pub fn all_degenerate(k: usize, cols: usize) -> Self {
        Self {
            centers: vec![0.0; k * cols],
            degenerate: vec![true; k],
            cols,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::usage("at least one centroid is required"));
        }
        let data = Dataset::from_rows(rows)?;
        let k = data.len();
        Ok(Self {
            centers: data.values,
            degenerate: vec![false; k],
            cols: data.cols,
        })
    }

    pub fn k(&self) -> usize {
        self.degenerate.len()
    }

    pub fn dims(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.centers[j * self.cols..(j + 1) * self.cols]
    }

    #[inline]
    pub fn is_degenerate(&self, j: usize) -> bool {
        self.degenerate[j]
    }

    pub fn degenerate_mask(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    pub fn active_count(&self) -> usize {
        self.k() - self.degenerate_count()
    }

    /// Indices of non-degenerate rows in ascending order.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.k()).filter(|&j| !self.degenerate[j]).collect()
    }

    pub fn set_row(&mut self, j: usize, center: &[f64]) {
        assert_eq!(center.len(), self.cols, "center dimension mismatch");
        self.centers[j * self.cols..(j + 1) * self.cols].copy_from_slice(center);
        self.degenerate[j] = false;
    }

    pub fn mark_degenerate(&mut self, j: usize) {
        self.centers[j * self.cols..(j + 1) * self.cols].fill(0.0);
        self.degenerate[j] = true;
    }

    /// Non-degenerate rows only, in index order.
    pub fn active_rows(&self) -> Vec<Vec<f64>> {
        self.active_indices()
            .into_iter()
            .map(|j| self.row(j).to_vec())
            .collect()
    }

    pub(crate) fn from_parts(centers: Vec<f64>, degenerate: Vec<bool>, cols: usize) -> Self {
        debug_assert_eq!(centers.len(), degenerate.len() * cols);
        Self {
            centers,
            degenerate,
            cols,
        }
    }
}

/// One cluster index per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub labels: Vec<usize>,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of points per cluster.
    pub fn cluster_sizes(&self, k: usize) -> Vec<usize> {
        let mut sizes = vec![0; k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Work and time accounting for one clustering run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EvalCounter {
    /// Point-to-center squared distance computations.
    pub distance_evals: u64,
    /// Lloyd assignment/update iterations.
    pub iterations: u64,
    /// Seconds spent initializing (the chunk loop for Big-means).
    pub cpu_init: f64,
    /// Seconds spent on the full dataset (the final pass for Big-means).
    pub cpu_full: f64,
}

impl EvalCounter {
    /// Counted variant of [`crate::kernel::squared_distance`].
    pub fn squared_distance(&mut self, a: &[f64], b: &[f64]) -> Result<f64> {
        let d = crate::kernel::squared_distance(a, b)?;
        self.distance_evals += 1;
        Ok(d)
    }

    pub fn cpu_total(&self) -> f64 {
        self.cpu_init + self.cpu_full
    }
}

/// Result of any of the clustering algorithms.
#[derive(Debug, Clone)]
pub struct ClusteringOutcome {
    pub centroids: Centroids,
    /// Labels for every point of the clustered dataset. Big-means leaves this
    /// empty when the final assignment pass is disabled.
    pub assignment: Option<Assignment>,
    /// `f(C, X)` over the clustered dataset. When Big-means skips its final
    /// pass this is the incumbent's objective on the chunk that produced it.
    pub objective: f64,
    /// Objective after the initial assignment and after every Lloyd iteration.
    /// Empty for Big-means, whose per-chunk histories live in its trace.
    pub objective_history: Vec<f64>,
    pub counter: EvalCounter,
    /// Chunks processed (`n_s`); zero for the full-dataset algorithms.
    pub chunks: usize,
}
