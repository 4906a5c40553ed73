//! Least-squares composite objectives `F(x) = ½‖Ax − b‖² + Ψ(x)` over
//! column-sparse data.
//!
//! Coordinate work never touches the whole matrix: the residual `w = Ax` is
//! kept up to date after every step, so a partial derivative and a step both
//! cost `O(nnz(a_i))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Data matrix `A` (`d × n`) stored column by column.
///
/// Row indices inside a column are strictly increasing and explicit zeros are
/// never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSparseMatrix {
    n_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl ColumnSparseMatrix {
    /// Builds a matrix from per-column `(row, value)` lists.
    ///
    /// Zero values are dropped. Rows must be strictly increasing within a
    /// column and smaller than `n_rows`.
    pub fn from_columns(n_rows: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut col_ptr = Vec::with_capacity(columns.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for (c, column) in columns.into_iter().enumerate() {
            let mut prev: Option<usize> = None;
            for (r, v) in column {
                if r >= n_rows {
                    return Err(Error::InvalidColumn {
                        column: c,
                        reason: format!("row {r} out of range for {n_rows} rows"),
                    });
                }
                if prev.is_some_and(|p| r <= p) {
                    return Err(Error::InvalidColumn {
                        column: c,
                        reason: "row indices not strictly increasing".into(),
                    });
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("matrix entry"));
                }
                prev = Some(r);
                if v != 0.0 {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            n_rows,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds a matrix from `(row, column, value)` triplets in any order.
    /// Duplicate positions are an error.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        triplets.sort_by_key(|&(r, c, _)| (c, r));
        let mut columns = vec![Vec::new(); n_cols];
        for (r, c, v) in triplets {
            if c >= n_cols {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    len: n_cols,
                });
            }
            columns[c].push((r, v));
        }
        Self::from_columns(n_rows, columns)
    }

    /// Builds a matrix from dense rows.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::new(); n_cols];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    got: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                columns[c].push((r, v));
            }
        }
        Self::from_columns(n_rows, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row indices and values of column `i`.
    pub fn column(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[i]..self.col_ptr[i + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    pub fn column_nnz(&self, i: usize) -> usize {
        self.col_ptr[i + 1] - self.col_ptr[i]
    }

    pub fn column_norm_sq(&self, i: usize) -> f64 {
        self.column(i).1.iter().map(|v| v * v).sum()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.n_cols())
            .map(|i| self.column_norm_sq(i).sqrt())
            .collect()
    }

    /// `⟨a_i, v⟩` for a dense vector `v` of length `d`.
    pub fn dot_column(&self, i: usize, v: &[f64]) -> f64 {
        let (rows, vals) = self.column(i);
        rows.iter().zip(vals).map(|(&r, &a)| a * v[r]).sum()
    }

    /// `v += alpha · a_i`.
    pub fn axpy_column(&self, i: usize, alpha: f64, v: &mut [f64]) {
        let (rows, vals) = self.column(i);
        for (&r, &a) in rows.iter().zip(vals) {
            v[r] += alpha * a;
        }
    }

    /// `⟨a_i, a_j⟩` by merging the two sparse columns.
    pub fn column_dot(&self, i: usize, j: usize) -> f64 {
        let (ri, vi) = self.column(i);
        let (rj, vj) = self.column(j);
        let (mut p, mut q, mut acc) = (0, 0, 0.0);
        while p < ri.len() && q < rj.len() {
            match ri[p].cmp(&rj[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    acc += vi[p] * vj[q];
                    p += 1;
                    q += 1;
                }
            }
        }
        acc
    }

    /// Writes `⟨a_i, a_j⟩` for every `j` into `out`.
    ///
    /// `scratch` must have length `d` and be all zeros; it is restored to
    /// zeros before returning. Cost is `O(nnz(A))`.
    pub fn gram_row(&self, i: usize, scratch: &mut [f64], out: &mut [f64]) {
        let (rows, vals) = self.column(i);
        for (&r, &a) in rows.iter().zip(vals) {
            scratch[r] = a;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.dot_column(j, scratch);
        }
        for &r in rows {
            scratch[r] = 0.0;
        }
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.n_rows];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                self.axpy_column(i, xi, &mut w);
            }
        }
        w
    }

    /// Dense row-major copy, for tests and small problems.
    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols()]; self.n_rows];
        for c in 0..self.n_cols() {
            let (rows, vals) = self.column(c);
            for (&r, &v) in rows.iter().zip(vals) {
                dense[r][c] = v;
            }
        }
        dense
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut col_ptr = Vec::with_capacity(keep.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for &c in keep {
            let (rows, vals) = self.column(c);
            row_idx.extend_from_slice(rows);
            values.extend_from_slice(vals);
            col_ptr.push(row_idx.len());
        }
        Self {
            n_rows: self.n_rows,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Replaces every stored value by 1.
    pub fn binarize(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 1.0);
    }
}

/// Separable regularizer `Ψ(x) = Σ_i Ψ_i(x_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    None,
    /// `λ/2 · x_i²`
    L2 { lambda: f64 },
    /// `λ · |x_i|`
    L1 { lambda: f64 },
}

impl Regularizer {
    pub fn lambda(&self) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::L2 { lambda } | Regularizer::L1 { lambda } => lambda,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::L2 { .. } => "l2",
            Regularizer::L1 { .. } => "l1",
        }
    }

    pub fn coordinate_value(&self, xi: f64) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::L2 { lambda } => 0.5 * lambda * xi * xi,
            Regularizer::L1 { lambda } => lambda * xi.abs(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Regularizer::None => 0.0,
            _ => x.iter().map(|&xi| self.coordinate_value(xi)).sum(),
        }
    }

    /// Minimizer `y*` of the coordinate model `s·y + (L/2)y² + Ψ_i(x_i + y)`.
    pub fn model_minimizer(&self, xi: f64, slope: f64, l: f64) -> f64 {
        match *self {
            Regularizer::None => -slope / l,
            Regularizer::L2 { lambda } => -(slope + lambda * xi) / (l + lambda),
            Regularizer::L1 { lambda } => soft_threshold(xi - slope / l, lambda / l) - xi,
        }
    }

    fn validate(&self) -> Result<()> {
        let lambda = self.lambda();
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "regularization weight must be finite and non-negative, got {lambda}"
            )));
        }
        Ok(())
    }
}

/// `sign(z) · max(|z| − t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Coordinate model `V_i(x, y, s) = s·y + (L/2)y² + Ψ_i(x_i + y)`.
pub fn model_value(xi: f64, y: f64, slope: f64, l: f64, psi: &Regularizer) -> f64 {
    slope * y + 0.5 * l * y * y + psi.coordinate_value(xi + y)
}

/// `min_y V_i(x, y, s)`, attained at [`Regularizer::model_minimizer`].
pub fn model_min(xi: f64, slope: f64, l: f64, psi: &Regularizer) -> f64 {
    let y = psi.model_minimizer(xi, slope, l);
    model_value(xi, y, slope, l, psi)
}

/// Iterate `x` together with the maintained residual `w = Ax`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualState {
    x: Vec<f64>,
    w: Vec<f64>,
    since_refresh: usize,
    refresh_period: usize,
}

impl ResidualState {
    /// Recomputes `w` from scratch every `10·n` steps.
    pub const REFRESH_FACTOR: usize = 10;

    pub fn new(matrix: &ColumnSparseMatrix, x: Vec<f64>) -> Result<Self> {
        if x.len() != matrix.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.n_cols(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial iterate"));
        }
        let w = matrix.mul_vec(&x);
        Ok(Self {
            x,
            w,
            since_refresh: 0,
            refresh_period: (Self::REFRESH_FACTOR * matrix.n_cols()).max(1),
        })
    }

    pub fn zeros(matrix: &ColumnSparseMatrix) -> Self {
        Self {
            x: vec![0.0; matrix.n_cols()],
            w: vec![0.0; matrix.n_rows()],
            since_refresh: 0,
            refresh_period: (Self::REFRESH_FACTOR * matrix.n_cols()).max(1),
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn residual(&self) -> &[f64] {
        &self.w
    }

    /// Overrides the periodic refresh interval (`0` disables it).
    pub fn set_refresh_period(&mut self, period: usize) {
        self.refresh_period = period;
    }

    /// `x_i += γ`, `w += γ·a_i`.
    pub fn apply_coordinate_step(
        &mut self,
        matrix: &ColumnSparseMatrix,
        i: usize,
        gamma: f64,
    ) -> Result<()> {
        if i >= self.x.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.x.len(),
            });
        }
        if !gamma.is_finite() {
            return Err(Error::NonFinite("step size"));
        }
        self.x[i] += gamma;
        matrix.axpy_column(i, gamma, &mut self.w);
        self.since_refresh += 1;
        if self.refresh_period > 0 && self.since_refresh >= self.refresh_period {
            self.refresh(matrix);
        }
        Ok(())
    }

    pub fn refresh(&mut self, matrix: &ColumnSparseMatrix) {
        self.w = matrix.mul_vec(&self.x);
        self.since_refresh = 0;
    }

    /// `‖w − Ax‖_∞`.
    pub fn drift(&self, matrix: &ColumnSparseMatrix) -> f64 {
        matrix
            .mul_vec(&self.x)
            .iter()
            .zip(&self.w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `F(x) = ½‖Ax − b‖² + Ψ(x)`.
///
/// An `l2` regularizer is folded into the smooth part: the partial derivative
/// includes `λx_i` and `L_i = ‖a_i‖² + λ`. An `l1` regularizer stays in the
/// non-smooth part and is handled through the coordinate model.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    matrix: ColumnSparseMatrix,
    target: Vec<f64>,
    regularizer: Regularizer,
    lipschitz: Vec<f64>,
    lipschitz_max: f64,
    column_norms: Vec<f64>,
}

impl CompositeProblem {
    pub fn new(
        matrix: ColumnSparseMatrix,
        target: Vec<f64>,
        regularizer: Regularizer,
    ) -> Result<Self> {
        if target.len() != matrix.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.n_rows(),
                got: target.len(),
            });
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target"));
        }
        regularizer.validate()?;
        if matrix.n_cols() == 0 {
            return Err(Error::EmptyInput);
        }
        let column_norms = matrix.column_norms();
        if let Some(i) = column_norms.iter().position(|&c| c == 0.0) {
            return Err(Error::ZeroColumn(i));
        }
        let ridge = match regularizer {
            Regularizer::L2 { lambda } => lambda,
            _ => 0.0,
        };
        let lipschitz: Vec<f64> = column_norms.iter().map(|c| c * c + ridge).collect();
        let lipschitz_max = lipschitz.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            matrix,
            target,
            regularizer,
            lipschitz,
            lipschitz_max,
            column_norms,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn d(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn matrix(&self) -> &ColumnSparseMatrix {
        &self.matrix
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    /// The part of `Ψ` that is not folded into `f` (`l1` or nothing).
    pub fn nonsmooth(&self) -> Regularizer {
        match self.regularizer {
            Regularizer::L1 { .. } => self.regularizer,
            _ => Regularizer::None,
        }
    }

    fn ridge(&self) -> f64 {
        match self.regularizer {
            Regularizer::L2 { lambda } => lambda,
            _ => 0.0,
        }
    }

    /// Coordinate-wise Lipschitz constants `L_i`.
    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    /// `L = max_i L_i`.
    pub fn lipschitz_max(&self) -> f64 {
        self.lipschitz_max
    }

    /// `‖a_i‖` for every column.
    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    pub fn zero_state(&self) -> ResidualState {
        ResidualState::zeros(&self.matrix)
    }

    pub fn state_at(&self, x: Vec<f64>) -> Result<ResidualState> {
        ResidualState::new(&self.matrix, x)
    }

    /// `∇_i f(x) = ⟨a_i, w − b⟩ (+ λx_i under l2)`.
    pub fn partial_gradient(&self, state: &ResidualState, i: usize) -> Result<f64> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n(),
            });
        }
        Ok(self.partial_gradient_unchecked(state, i))
    }

    pub(crate) fn partial_gradient_unchecked(&self, state: &ResidualState, i: usize) -> f64 {
        let (rows, vals) = self.matrix.column(i);
        let w = state.residual();
        let mut g: f64 = rows
            .iter()
            .zip(vals)
            .map(|(&r, &a)| a * (w[r] - self.target[r]))
            .sum();
        let ridge = self.ridge();
        if ridge != 0.0 {
            g += ridge * state.x()[i];
        }
        g
    }

    /// Gradient of the smooth part, `O(nnz(A))`.
    pub fn full_gradient(&self, state: &ResidualState) -> Vec<f64> {
        let residual: Vec<f64> = state
            .residual()
            .iter()
            .zip(&self.target)
            .map(|(w, b)| w - b)
            .collect();
        let ridge = self.ridge();
        (0..self.n())
            .map(|i| self.matrix.dot_column(i, &residual) + ridge * state.x()[i])
            .collect()
    }

    /// `f(x)`, the smooth part only (includes the folded ridge term).
    pub fn smooth_value(&self, state: &ResidualState) -> f64 {
        let fit: f64 = state
            .residual()
            .iter()
            .zip(&self.target)
            .map(|(w, b)| (w - b) * (w - b))
            .sum();
        let ridge = self.ridge();
        let x = state.x();
        let penalty = if ridge != 0.0 {
            0.5 * ridge * x.iter().map(|v| v * v).sum::<f64>()
        } else {
            0.0
        };
        0.5 * fit + penalty
    }

    /// `F(x) = f(Ax) + Ψ(x)`.
    pub fn objective_value(&self, state: &ResidualState) -> f64 {
        let fit: f64 = state
            .residual()
            .iter()
            .zip(&self.target)
            .map(|(w, b)| (w - b) * (w - b))
            .sum();
        0.5 * fit + self.regularizer.value(state.x())
    }

    /// Applies `x_i += γ` and keeps the residual in sync.
    pub fn apply_coordinate_step(
        &self,
        state: &mut ResidualState,
        i: usize,
        gamma: f64,
    ) -> Result<()> {
        state.apply_coordinate_step(&self.matrix, i, gamma)
    }
}
