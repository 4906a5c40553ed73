//! The quadratic family `q(x) = ½⟨Qx, x⟩` with `Q = I + ((α−1)/n)·J`, on which
//! steepest coordinate descent with exact line search cycles through the
//! coordinates and gains only a `c_α^n` factor per sweep.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{ColumnSparseMatrix, CompositeProblem, Regularizer};

const BISECTION_TOL: f64 = 1e-12;
const CYCLING_RTOL: f64 = 1e-8;

/// `Ψ(c) = 1 − n(1−c)c^{n−1}/(1−cⁿ)`, evaluated through the geometric sum so
/// it stays accurate as `c → 1`.
pub fn psi(c: f64, n: usize) -> f64 {
    let mut last = 1.0;
    let mut sum = 1.0;
    for _ in 1..n {
        last *= c;
        sum += last;
    }
    1.0 - n as f64 * last / sum
}

/// Solves `Ψ(c) = α` on `(0, 1)` by bisection.
pub fn solve_c_alpha(alpha: f64, n: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1/2)")));
    }
    if n <= 2 {
        return Err(Error::InvalidParameter(format!("dimension {n} must exceed 2")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // Ψ(0) = 1 and Ψ(1⁻) = 0, Ψ decreasing
    let f = |c: f64| psi(c, n) - alpha;
    let (f_lo, f_hi) = (f(lo + f64::EPSILON), f(hi - f64::EPSILON));
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let value = f(mid);
        if value == 0.0 {
            return Ok(mid);
        }
        if value > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < BISECTION_TOL * 1e-3 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Starting point for the hard case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    /// `[x₀]_i = c_α^{i−1}`.
    Worst,
    Ones,
}

impl std::str::FromStr for Start {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst" => Ok(Start::Worst),
            "ones" => Ok(Start::Ones),
            other => Err(Error::InvalidParameter(format!("unknown start `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardCase {
    pub n: usize,
    pub alpha: f64,
    pub c_alpha: f64,
    pub x0: Vec<f64>,
}

impl HardCase {
    pub const DEFAULT_ALPHA: f64 = 0.01;

    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        let c_alpha = solve_c_alpha(alpha, n)?;
        let mut x0 = Vec::with_capacity(n);
        let mut v = 1.0;
        for _ in 0..n {
            x0.push(v);
            v *= c_alpha;
        }
        Ok(Self {
            n,
            alpha,
            c_alpha,
            x0,
        })
    }

    pub fn start(&self, start: Start) -> Vec<f64> {
        match start {
            Start::Worst => self.x0.clone(),
            Start::Ones => vec![1.0; self.n],
        }
    }

    /// `Q_ii`.
    pub fn diagonal(&self) -> f64 {
        1.0 + (self.alpha - 1.0) / self.n as f64
    }

    /// `Qx` in `O(n)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        hardcase_gradient(self.alpha, x)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let g = self.gradient(x)?;
        Ok(0.5 * g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Steepest coordinate descent with exact coordinate minimization.
    pub fn run_scd(&self, start: Start, steps: usize) -> Result<Vec<HardCaseStep>> {
        let mut x = self.start(start);
        let diag = self.diagonal();
        let shift = (self.alpha - 1.0) / self.n as f64;
        let mut total: f64 = x.iter().sum();
        let mut out = Vec::with_capacity(steps);
        for t in 0..steps {
            // recompute the sum now and then to keep rounding from piling up
            if t % self.n == 0 {
                total = x.iter().sum();
            }
            let grad: Vec<f64> = x.iter().map(|&xi| xi + shift * total).collect();
            let i = argmax_abs(&grad);
            let omega = gradient_ratio(&grad).map_err(|e| e.at_step(t))?;
            let before = x[i];
            let gamma = -grad[i] / diag;
            x[i] += gamma;
            total += gamma;
            out.push(HardCaseStep {
                t,
                index: i,
                omega,
                grad_inf: grad[i].abs(),
                before,
                after: x[i],
            });
        }
        Ok(out)
    }

    /// Least-squares form `½‖Q^{1/2}x‖²` with `Q^{1/2} = I − (1−√α)J/n`.
    pub fn to_problem(&self) -> Result<CompositeProblem> {
        embed_lowdim(self, self.n)?.to_problem()
    }
}

/// `Qx = x + ((α−1)/n)(Σ_i x_i)·1`.
pub fn hardcase_gradient(alpha: f64, x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let shift = (alpha - 1.0) / x.len() as f64 * x.iter().sum::<f64>();
    Ok(x.iter().map(|&xi| xi + shift).collect())
}

fn argmax_abs(g: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in g.iter().enumerate() {
        if v.abs() > g[best].abs() {
            best = i;
        }
    }
    best
}

/// `ω(g) = ‖g‖_∞² / ((1/n)‖g‖₂²)`, in `[1, n]`.
pub fn gradient_ratio(gradient: &[f64]) -> Result<f64> {
    let n = gradient.len() as f64;
    let inf = gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if inf == 0.0 {
        return Err(Error::ZeroGradient);
    }
    // scale first so tiny gradients do not underflow when squared
    let two: f64 = gradient.iter().map(|g| (g / inf).powi(2)).sum();
    Ok(n / two)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardCaseStep {
    pub t: usize,
    pub index: usize,
    /// `ω` of the gradient at the point where `index` was chosen.
    pub omega: f64,
    pub grad_inf: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyclingReport {
    pub steps: usize,
    pub sweeps: usize,
    pub max_relative_error: f64,
    pub max_omega: f64,
    /// First step whose index or contraction broke the pattern.
    pub first_failure: Option<usize>,
}

impl CyclingReport {
    pub fn holds(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Runs SCD from the worst start and checks that coordinate `t mod n` is
/// picked at step `t` and that it lands on `c_α^n` times its previous value.
pub fn verify_cycling(hc: &HardCase, steps: usize) -> Result<CyclingReport> {
    if steps < hc.n {
        return Err(Error::InvalidParameter(format!(
            "need at least {} steps, got {steps}",
            hc.n
        )));
    }
    let trace = hc.run_scd(Start::Worst, steps)?;
    let factor = hc.c_alpha.powi(hc.n as i32);
    let mut first_failure = None;
    let mut max_err = 0.0f64;
    let mut max_omega = 0.0f64;
    for s in &trace {
        let expected = factor * s.before;
        let err = (s.after - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        max_err = max_err.max(err);
        max_omega = max_omega.max(s.omega);
        if first_failure.is_none() && (s.index != s.t % hc.n || err > CYCLING_RTOL) {
            first_failure = Some(s.t);
        }
    }
    Ok(CyclingReport {
        steps,
        sweeps: steps / hc.n,
        max_relative_error: max_err,
        max_omega,
        first_failure,
    })
}

/// `f(x) = q(π_s(x))` on `ℝ^n`, where `q` is the hard case on `ℝ^s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowDimEmbedding {
    pub s: usize,
    pub n: usize,
    pub inner: HardCase,
}

pub fn embed_lowdim(hc: &HardCase, n_ambient: usize) -> Result<LowDimEmbedding> {
    if n_ambient < hc.n {
        return Err(Error::InvalidParameter(format!(
            "ambient dimension {n_ambient} below intrinsic dimension {}",
            hc.n
        )));
    }
    Ok(LowDimEmbedding {
        s: hc.n,
        n: n_ambient,
        inner: hc.clone(),
    })
}

impl LowDimEmbedding {
    /// `(∇q(x_{1..s}), 0, …, 0)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut g = self.inner.gradient(&x[..self.s])?;
        g.resize(self.n, 0.0);
        Ok(g)
    }

    /// Worst start on the first `s` coordinates, zeros elsewhere.
    pub fn x0(&self) -> Vec<f64> {
        let mut x = self.inner.x0.clone();
        x.resize(self.n, 0.0);
        x
    }

    /// Least squares with `A = blockdiag(Q^{1/2}, I_{n−s})` and `b = 0`.
    ///
    /// The identity block keeps every column non-zero. Started with the
    /// outside coordinates at zero their partial derivatives stay zero, so
    /// the objective agrees with `q(π_s(x))` along any coordinate method.
    pub fn to_problem(&self) -> Result<CompositeProblem> {
        let s = self.s;
        let beta = (1.0 - self.inner.alpha.sqrt()) / s as f64;
        let mut columns = Vec::with_capacity(self.n);
        for c in 0..s {
            columns.push(
                (0..s)
                    .map(|r| (r, if r == c { 1.0 - beta } else { -beta }))
                    .collect(),
            );
        }
        for c in s..self.n {
            columns.push(vec![(c, 1.0)]);
        }
        let matrix = ColumnSparseMatrix::from_columns(self.n, columns)?;
        CompositeProblem::new(matrix, vec![0.0; self.n], Regularizer::None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent evaluation of Ψ from the closed form.
    fn psi_closed(c: f64, n: usize) -> f64 {
        let n_f = n as f64;
        1.0 - n_f * (1.0 - c) * c.powi(n as i32 - 1) / (1.0 - c.powi(n as i32))
    }

    #[test]
    fn bisection_grid() {
        for &alpha in &[0.01, 0.1, 0.3, 0.49] {
            for &n in &[5usize, 20, 100] {
                let c = solve_c_alpha(alpha, n).unwrap();
                assert!((psi(c, n) - alpha).abs() <= 1e-12, "{alpha} {n}");
                assert!((psi_closed(c, n) - alpha).abs() <= 1e-9, "{alpha} {n}");
                assert!(c >= 1.0 - 4.0 * alpha / n as f64 && c < 1.0, "{alpha} {n} {c}");
            }
        }
    }

    #[test]
    fn c_alpha_tends_to_one() {
        let c = solve_c_alpha(1e-6, 20).unwrap();
        assert!(c > 0.999_999);
        assert!(solve_c_alpha(0.5, 20).is_err());
        assert!(solve_c_alpha(0.1, 2).is_err());
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(hardcase_gradient(0.3, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(hardcase_gradient(1.0, &[1.0, -2.0]).unwrap(), vec![1.0, -2.0]);
        assert_eq!(hardcase_gradient(0.5, &[1.0; 4]).unwrap(), vec![0.5; 4]);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(gradient_ratio(&[2.0; 7]).unwrap(), 1.0);
        assert_eq!(gradient_ratio(&[3.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), 5.0);
        assert!(matches!(gradient_ratio(&[0.0; 3]), Err(Error::ZeroGradient)));
    }

    #[test]
    fn cycling_holds() {
        let hc = HardCase::new(10, 0.01).unwrap();
        let report = verify_cycling(&hc, 30).unwrap();
        assert!(report.holds(), "{report:?}");
        assert_eq!(report.sweeps, 3);
    }

    #[test]
    fn first_pick_is_coordinate_zero() {
        let hc = HardCase::new(4, 0.3).unwrap();
        let g = hc.gradient(&hc.x0).unwrap();
        assert_eq!(argmax_abs(&g), 0);
        assert_eq!(hc.run_scd(Start::Worst, 1).unwrap()[0].index, 0);
    }

    #[test]
    fn omega_bounded_along_worst_start() {
        let n = 40;
        let hc = HardCase::new(n, 0.01).unwrap();
        let report = verify_cycling(&hc, 5 * n).unwrap();
        assert!(report.max_omega <= 4.0);
        assert!(report.max_omega <= 3.0 + 3.0 * 0.01 + 1e-9);
    }

    #[test]
    fn ones_start_settles() {
        let n = 20;
        let hc = HardCase::new(n, 0.01).unwrap();
        let trace = hc.run_scd(Start::Ones, 6 * n).unwrap();
        let late: Vec<f64> = trace[4 * n..].iter().map(|s| s.omega).collect();
        let (lo, hi) = late
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &w| (a.min(w), b.max(w)));
        assert!(hi - lo < 0.5, "{lo} {hi}");
        assert!(trace[0].omega == 1.0);
    }

    #[test]
    fn embedding_gradient_and_problem() {
        let hc = HardCase::new(5, 0.2).unwrap();
        let e = embed_lowdim(&hc, 12).unwrap();
        let x = e.x0();
        let g = e.gradient(&x).unwrap();
        assert!(g[5..].iter().all(|&v| v == 0.0));
        let p = e.to_problem().unwrap();
        let state = p.state_at(x.clone()).unwrap();
        let pg = p.full_gradient(&state);
        for (a, b) in pg.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p.objective_value(&state) - hc.value(&hc.x0).unwrap()).abs() < 1e-12);
        assert!(embed_lowdim(&hc, 4).is_err());
        let same = embed_lowdim(&hc, 5).unwrap();
        assert_eq!(same.gradient(&hc.x0).unwrap(), hc.gradient(&hc.x0).unwrap());
    }
}
