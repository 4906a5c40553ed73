//! Competitive ratios of active sets: measurements on real runs, the
//! equilibrium closed form, and a simulator of the active-set dynamics.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ρ = |I ∩ [s]| / |I|` (coordinates `0..s` form `[s]`).
pub fn measure_rho(active: &[usize], s: usize) -> f64 {
    if active.is_empty() {
        return f64::NAN;
    }
    active.iter().filter(|&&i| i < s).count() as f64 / active.len() as f64
}

/// Fraction of the active set with `|∇_i f| ≥ ½‖∇f‖_∞`.
pub fn measure_varrho(gradient: &[f64], active: &[usize]) -> f64 {
    if active.is_empty() {
        return f64::NAN;
    }
    let threshold = 0.5 * gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    active.iter().filter(|&&i| gradient[i].abs() >= threshold).count() as f64
        / active.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoInfinity {
    pub theta: f64,
    pub rho: f64,
    /// `1 − (n−s)/T_∞`.
    pub simple_bound: f64,
    /// Equilibrium fraction of outside coordinates that are active.
    pub alpha: f64,
}

/// Equilibrium competitive ratio for ambient dimension `n`, support `s`,
/// kept fraction `c` and mean re-entry time `t_inf`.
pub fn rho_infinity(n: usize, s: usize, c: f64, t_inf: f64) -> Result<RhoInfinity> {
    validate(n, s, c, t_inf)?;
    let (n_f, s_f) = (n as f64, s as f64);
    let t = t_inf;
    let theta = n_f * n_f
        + (c - 1.0).powi(2) * s_f * s_f
        + 2.0 * n_f * ((c - 1.0) * s_f - t)
        + 2.0 * (1.0 + c) * s_f * t
        + t * t;
    if theta < 0.0 {
        return Err(Error::InvalidParameter(format!("theta = {theta} is negative")));
    }
    let rho = 2.0 * c * s_f / (c * s_f + n_f - s_f - t + theta.sqrt());
    let alpha = if n == s {
        0.0
    } else {
        (c * s_f / rho - c * s_f) / (n_f - s_f)
    };
    Ok(RhoInfinity {
        theta,
        rho,
        simple_bound: 1.0 - (n_f - s_f) / t,
        alpha,
    })
}

fn validate(n: usize, s: usize, c: f64, t_inf: f64) -> Result<()> {
    if s == 0 || s > n {
        return Err(Error::InvalidParameter(format!("need 1 <= s <= n, got s={s}, n={n}")));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidParameter(format!("kept fraction {c} outside (0, 1]")));
    }
    if !(t_inf.is_finite() && t_inf > 0.0) {
        return Err(Error::InvalidParameter(format!("re-entry time {t_inf} must be positive")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reentry {
    /// Each inactive outside coordinate returns with probability `1/T_∞` per step.
    Geometric,
    /// Returns exactly `round(T_∞)` steps after removal.
    Fixed,
}

impl fmt::Display for Reentry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reentry::Geometric => "geometric",
            Reentry::Fixed => "fixed",
        })
    }
}

impl FromStr for Reentry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Reentry::Geometric),
            "fixed" => Ok(Reentry::Fixed),
            other => Err(Error::InvalidParameter(format!("unknown re-entry model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSimConfig {
    pub n: usize,
    pub s: usize,
    pub c: f64,
    pub t_infinity: f64,
    pub steps: usize,
    pub seed: u64,
    pub reentry: Reentry,
}

impl RatioSimConfig {
    pub fn new(n: usize, s: usize, c: f64, t_infinity: f64, steps: usize, seed: u64) -> Self {
        Self {
            n,
            s,
            c,
            t_infinity,
            steps,
            seed,
            reentry: Reentry::Geometric,
        }
    }

    /// `⌈cs⌉`, the number of always-active coordinates of `[s]`.
    pub fn kept(&self) -> usize {
        ((self.c * self.s as f64).ceil() as usize).clamp(1, self.s)
    }

    pub fn validate(&self) -> Result<()> {
        validate(self.n, self.s, self.c, self.t_infinity)?;
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTrace {
    pub rho: Vec<f64>,
    pub active_size: Vec<usize>,
    /// Outside coordinates picked (and removed), per step.
    pub exits: Vec<bool>,
    /// Outside coordinates re-entering, per step.
    pub entries: Vec<usize>,
    pub kept: usize,
}

impl RatioTrace {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Mean `ρ` over steps `from..`.
    pub fn mean_rho_from(&self, from: usize) -> f64 {
        let tail = &self.rho[from.min(self.rho.len())..];
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Simulates the active set starting from `I₀ = ` the kept part of `[s]`.
///
/// Per step: due re-entries join, a uniform active coordinate is picked and
/// removed if it lies outside `[s]`, then `ρ_t` is logged.
pub fn simulate_rho(config: &RatioSimConfig) -> Result<RatioTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let kept = config.kept();
    let outside = config.n - config.s;
    let fixed_delay = config.t_infinity.round().max(1.0) as u64;
    let geometric = Geometric::new((1.0 / config.t_infinity).min(1.0))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let delay = |rng: &mut ChaCha8Rng| -> u64 {
        match config.reentry {
            Reentry::Geometric => 1 + geometric.sample(rng),
            Reentry::Fixed => fixed_delay,
        }
    };

    // min-heap of (step, coordinate) re-entry times
    let mut pending: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::with_capacity(outside);
    for j in 0..outside {
        let at = delay(&mut rng);
        pending.push(Reverse((at.saturating_sub(1), j)));
    }
    let mut active_outside: Vec<usize> = Vec::with_capacity(outside);

    let mut trace = RatioTrace {
        rho: Vec::with_capacity(config.steps),
        active_size: Vec::with_capacity(config.steps),
        exits: Vec::with_capacity(config.steps),
        entries: Vec::with_capacity(config.steps),
        kept,
    };
    for t in 0..config.steps as u64 {
        let mut entered = 0;
        while let Some(&Reverse((at, j))) = pending.peek() {
            if at > t {
                break;
            }
            pending.pop();
            active_outside.push(j);
            entered += 1;
        }
        let size = kept + active_outside.len();
        let pick = rng.random_range(0..size);
        let exit = pick >= kept;
        if exit {
            let j = active_outside.swap_remove(pick - kept);
            let at = t + delay(&mut rng);
            pending.push(Reverse((at, j)));
        }
        let size = kept + active_outside.len();
        trace.rho.push(kept as f64 / size as f64);
        trace.active_size.push(size);
        trace.exits.push(exit);
        trace.entries.push(entered);
    }
    Ok(trace)
}

/// Number of leading steps `T̂` with `Σ_{t<T̂} γ_t·δ ≤ reference_{T̂−1}`.
///
/// Equals the trace length when the budget is never exceeded.
pub fn estimate_t_hat(step_magnitudes: &[f64], delta: f64, reference_levels: &[f64]) -> Result<usize> {
    if step_magnitudes.len() != reference_levels.len() {
        return Err(Error::DimensionMismatch {
            expected: step_magnitudes.len(),
            got: reference_levels.len(),
        });
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} must be non-negative")));
    }
    let mut sum = 0.0;
    for (k, (&gamma, &level)) in step_magnitudes.iter().zip(reference_levels).enumerate() {
        if !(gamma >= 0.0 && level >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative input at step {k}")));
        }
        sum += gamma * delta;
        if sum > level {
            return Ok(k);
        }
    }
    Ok(step_magnitudes.len())
}
