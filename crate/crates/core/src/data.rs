//! Synthetic sparse least-squares data and svmlight I/O.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ColumnSparseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Rows `d`.
    pub rows: usize,
    /// Columns `n`.
    pub cols: usize,
    pub seed: u64,
    pub column_scale_factor: f64,
    pub sparsity_factor: f64,
    /// Fraction of non-zeros in the planted `x̄`.
    pub planted_fraction: f64,
    /// Standard deviation of the target noise.
    pub noise_std: f64,
}

impl SynthConfig {
    pub fn new(rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            rows,
            cols,
            seed,
            column_scale_factor: 10.0,
            sparsity_factor: 10.0,
            planted_fraction: 0.1,
            noise_std: 0.1,
        }
    }

    /// `min(1, sparsity_factor·ln(n)/n)`.
    pub fn keep_probability(&self) -> f64 {
        let n = self.cols as f64;
        (self.sparsity_factor * n.ln() / n).clamp(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter("rows and columns must be at least 1".into()));
        }
        if !(self.column_scale_factor.is_finite() && self.column_scale_factor != 0.0) {
            return Err(Error::InvalidParameter("column scale factor must be non-zero".into()));
        }
        if !(self.sparsity_factor > 0.0) {
            return Err(Error::InvalidParameter("sparsity factor must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.planted_fraction) {
            return Err(Error::InvalidParameter("planted fraction outside [0, 1]".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidParameter("noise level must be non-negative".into()));
        }
        Ok(())
    }
}

/// Draws `A` and `b = A·x̄ + e`.
///
/// Each entry is `N(0,1) + 1`, each column is multiplied by
/// `column_scale_factor·z` with `z ~ N(0,1)`, and entries survive with
/// probability [`SynthConfig::keep_probability`]. A column left empty is drawn
/// again.
pub fn generate_synthetic(config: &SynthConfig) -> Result<(ColumnSparseMatrix, Vec<f64>)> {
    config.validate()?;
    // Columns are regenerated when empty; with (1−p)^rows tiny this rarely loops,
    // but a pathological config (one row, tiny p) would, so cap it.
    const MAX_ATTEMPTS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let p = config.keep_probability();
    let mut columns = Vec::with_capacity(config.cols);
    for c in 0..config.cols {
        let mut column = Vec::new();
        for _ in 0..MAX_ATTEMPTS {
            let z: f64 = rng.sample(StandardNormal);
            let scale = config.column_scale_factor * z;
            column.clear();
            for r in 0..config.rows {
                let entry: f64 = rng.sample::<f64, _>(StandardNormal) + 1.0;
                let value = entry * scale;
                if rng.random_bool(p) && value != 0.0 {
                    column.push((r, value));
                }
            }
            if !column.is_empty() {
                break;
            }
        }
        if column.is_empty() {
            return Err(Error::InvalidColumn {
                column: c,
                reason: "stayed empty after repeated draws".into(),
            });
        }
        columns.push(std::mem::take(&mut column));
    }
    let matrix = ColumnSparseMatrix::from_columns(config.rows, columns)?;

    let planted = (config.planted_fraction * config.cols as f64).ceil() as usize;
    let mut x_bar = vec![0.0; config.cols];
    for i in sample(&mut rng, config.cols, planted.min(config.cols)) {
        x_bar[i] = rng.sample(StandardNormal);
    }
    let mut b = matrix.mul_vec(&x_bar);
    for v in &mut b {
        *v += config.noise_std * rng.sample::<f64, _>(StandardNormal);
    }
    Ok((matrix, b))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Replace every stored value by 1.
    pub binarize: bool,
}

/// Result of loading an svmlight file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub matrix: ColumnSparseMatrix,
    pub target: Vec<f64>,
    /// Original (0-based) feature index of every kept column.
    pub columns: Vec<usize>,
    /// Feature indices dropped because they had no non-zero entry.
    pub dropped: Vec<usize>,
}

pub fn load_svmlight(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let file = File::open(path)?;
    parse_svmlight(BufReader::new(file), options)
}

/// Parses `label idx:value ...` lines with 1-based feature indices.
///
/// `#` starts a comment and `qid:` tokens are ignored.
pub fn parse_svmlight<R: BufRead>(reader: R, options: &LoadOptions) -> Result<Dataset> {
    let mut target = Vec::new();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut n_features = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let mut tokens = content.split_whitespace();
        let label_token = tokens.next().unwrap_or_default();
        let label: f64 = label_token
            .parse()
            .map_err(|_| parse_err(format!("bad label `{label_token}`")))?;
        if !label.is_finite() {
            return Err(parse_err(format!("non-finite label `{label_token}`")));
        }
        let row = target.len();
        let mut previous: Option<usize> = None;
        for token in tokens {
            if token.starts_with("qid:") {
                continue;
            }
            let (idx, value) = token
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected index:value, got `{token}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(parse_err("feature indices start at 1".into()));
            }
            let value: f64 = value
                .parse()
                .map_err(|_| parse_err(format!("bad value `{value}`")))?;
            if !value.is_finite() {
                return Err(parse_err(format!("non-finite value in `{token}`")));
            }
            let col = idx - 1;
            if previous.is_some_and(|p| col <= p) {
                return Err(parse_err(format!(
                    "feature index {idx} repeated or out of order"
                )));
            }
            previous = Some(col);
            n_features = n_features.max(idx);
            if value != 0.0 {
                triplets.push((row, col, value));
            }
        }
        target.push(label);
    }
    if target.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut matrix = ColumnSparseMatrix::from_triplets(target.len(), n_features, triplets)?;
    if options.binarize {
        matrix.binarize();
    }
    let (columns, dropped): (Vec<usize>, Vec<usize>) =
        (0..matrix.n_cols()).partition(|&c| matrix.column_nnz(c) > 0);
    if !dropped.is_empty() {
        log::warn!("dropping {} all-zero feature column(s)", dropped.len());
        matrix = matrix.select_columns(&columns);
    }
    Ok(Dataset {
        matrix,
        target,
        columns,
        dropped,
    })
}

/// Writes `(A, b)` in svmlight format. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_svmlight<W: Write>(mut out: W, matrix: &ColumnSparseMatrix, target: &[f64]) -> Result<()> {
    if target.len() != matrix.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: matrix.n_rows(),
            got: target.len(),
        });
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); matrix.n_rows()];
    for c in 0..matrix.n_cols() {
        let (idx, vals) = matrix.column(c);
        for (&r, &v) in idx.iter().zip(vals) {
            rows[r].push((c, v));
        }
    }
    for (label, row) in target.iter().zip(&rows) {
        write!(out, "{label}")?;
        for &(c, v) in row {
            write!(out, " {}:{v}", c + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Keeps `k` columns chosen uniformly at random (sorted by original index).
pub fn take_columns(matrix: &ColumnSparseMatrix, k: usize, seed: u64) -> Result<(ColumnSparseMatrix, Vec<usize>)> {
    if k == 0 || k > matrix.n_cols() {
        return Err(Error::InvalidParameter(format!(
            "cannot take {k} of {} columns",
            matrix.n_cols()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = sample(&mut rng, matrix.n_cols(), k).into_vec();
    keep.sort_unstable();
    Ok((matrix.select_columns(&keep), keep))
}
