//! Gradient oracles for passive coordinates.
//!
//! For least squares, moving coordinate `i` by `γ` changes the gradient entry
//! `j` by exactly `γ⟨a_i, a_j⟩`. An oracle returns an estimate `g_ij` of that
//! per-unit change together with a certified error `δ_ij`:
//!
//! ```text
//! |∇_j f(x + γe_i) − ∇_j f(x) − γ·g_ij| ≤ |γ|·δ_ij
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ColumnSparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// `g¹`: exact inner product, `δ = 0`.
    ExactG1,
    /// `g²`: inner product perturbed inside `±ε‖a_i‖‖a_j‖`, then clamped.
    JlSimulatedG2,
    /// `g³`: always zero, `δ = ‖a_i‖‖a_j‖`.
    ZeroG3,
    /// `g⁴`: a fixed pseudo-random value `g` in `±‖a_i‖‖a_j‖`, `δ = ‖a_i‖‖a_j‖ + |g|`.
    RandomG4,
    /// Zero estimate with `δ = M‖a_i‖‖a_j‖` for a Hessian bound `M`.
    BoundedHessian,
}

impl OracleKind {
    pub fn name(&self) -> &'static str {
        match self {
            OracleKind::ExactG1 => "g1",
            OracleKind::JlSimulatedG2 => "g2",
            OracleKind::ZeroG3 => "g3",
            OracleKind::RandomG4 => "g4",
            OracleKind::BoundedHessian => "hessian",
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g1" | "exact" => Ok(OracleKind::ExactG1),
            "g2" | "jl" => Ok(OracleKind::JlSimulatedG2),
            "g3" | "zero" => Ok(OracleKind::ZeroG3),
            "g4" | "random" => Ok(OracleKind::RandomG4),
            "hessian" | "bounded-hessian" => Ok(OracleKind::BoundedHessian),
            other => Err(Error::InvalidParameter(format!("unknown oracle kind `{other}`"))),
        }
    }
}

/// Oracle kind plus its parameters. `epsilon` is only read by `g2`,
/// `hessian_bound` only by the bounded-Hessian oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub kind: OracleKind,
    pub epsilon: f64,
    pub hessian_bound: f64,
    pub seed: u64,
}

impl OracleSpec {
    pub fn new(kind: OracleKind) -> Self {
        Self {
            kind,
            epsilon: 0.0,
            hessian_bound: 1.0,
            seed: 0,
        }
    }

    pub fn exact() -> Self {
        Self::new(OracleKind::ExactG1)
    }

    pub fn jl(epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            seed,
            ..Self::new(OracleKind::JlSimulatedG2)
        }
    }

    pub fn zero() -> Self {
        Self::new(OracleKind::ZeroG3)
    }

    pub fn random(seed: u64) -> Self {
        Self {
            seed,
            ..Self::new(OracleKind::RandomG4)
        }
    }

    pub fn bounded_hessian(bound: f64) -> Self {
        Self {
            hessian_bound: bound,
            ..Self::new(OracleKind::BoundedHessian)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "oracle epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.hessian_bound.is_finite() && self.hessian_bound >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Hessian bound must be finite and non-negative, got {}",
                self.hessian_bound
            )));
        }
        Ok(())
    }

    /// Whether the oracle reads true inner products `⟨a_i, a_j⟩`.
    pub fn needs_inner_products(&self) -> bool {
        matches!(self.kind, OracleKind::ExactG1 | OracleKind::JlSimulatedG2)
    }

    /// Estimate and error for the change of coordinate `j` when `i` moves.
    /// `column_norms` holds `‖a_k‖` for every column.
    pub fn estimate(
        &self,
        matrix: &ColumnSparseMatrix,
        column_norms: &[f64],
        i: usize,
        j: usize,
    ) -> OracleOutput {
        let dot = if self.needs_inner_products() {
            matrix.column_dot(i, j)
        } else {
            0.0
        };
        self.estimate_with_dot(dot, column_norms[i] * column_norms[j], i, j)
    }

    /// Same as [`estimate`](Self::estimate) with `⟨a_i, a_j⟩` and
    /// `‖a_i‖‖a_j‖` supplied by the caller.
    pub fn estimate_with_dot(&self, dot: f64, norm_product: f64, i: usize, j: usize) -> OracleOutput {
        match self.kind {
            OracleKind::ExactG1 => OracleOutput {
                estimate: dot,
                error: 0.0,
            },
            OracleKind::JlSimulatedG2 => OracleOutput {
                estimate: simulated_product(dot, norm_product, i, j, self.epsilon, self.seed),
                error: self.epsilon * norm_product,
            },
            OracleKind::ZeroG3 => OracleOutput {
                estimate: 0.0,
                error: norm_product,
            },
            OracleKind::RandomG4 => {
                let estimate = norm_product * symmetric_unit(pair_hash(i as u64, j as u64, self.seed));
                // the draw carries no information, so the certified error
                // must cover any change in [−‖a_i‖‖a_j‖, ‖a_i‖‖a_j‖]
                OracleOutput {
                    estimate,
                    error: norm_product + estimate.abs(),
                }
            }
            OracleKind::BoundedHessian => OracleOutput {
                estimate: 0.0,
                error: self.hessian_bound * norm_product,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOutput {
    pub estimate: f64,
    pub error: f64,
}

/// Per-unit-step change of `∇_i f` when coordinate `j` moves: `⟨a_i, a_j⟩`.
pub fn exact_change(matrix: &ColumnSparseMatrix, i: usize, j: usize) -> f64 {
    matrix.column_dot(i, j)
}

/// Symmetric approximate inner product `S(i, j)` with
/// `|S(i,j) − ⟨a_i,a_j⟩| ≤ ε‖a_i‖‖a_j‖` and `|S(i,j)| ≤ ‖a_i‖‖a_j‖`.
///
/// The perturbation is drawn uniformly from the allowed interval, keyed by the
/// unordered pair and the seed.
pub fn jl_simulated_product(
    matrix: &ColumnSparseMatrix,
    i: usize,
    j: usize,
    epsilon: f64,
    seed: u64,
) -> f64 {
    let norm_product = matrix.column_norm_sq(i).sqrt() * matrix.column_norm_sq(j).sqrt();
    simulated_product(matrix.column_dot(i, j), norm_product, i, j, epsilon, seed)
}

fn simulated_product(dot: f64, norm_product: f64, i: usize, j: usize, epsilon: f64, seed: u64) -> f64 {
    if epsilon == 0.0 {
        return dot.clamp(-norm_product, norm_product);
    }
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    let noise = symmetric_unit(pair_hash(lo as u64, hi as u64, seed ^ 0x9e37_79b9_7f4a_7c15));
    (dot + epsilon * norm_product * noise).clamp(-norm_product, norm_product)
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn pair_hash(a: u64, b: u64, seed: u64) -> u64 {
    mix(mix(mix(seed) ^ a) ^ b)
}

/// Maps a hash to `[-1, 1]`.
fn symmetric_unit(h: u64) -> f64 {
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * u - 1.0
}
