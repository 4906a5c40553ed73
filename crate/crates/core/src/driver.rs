//! The descent loop.
//!
//! Each iteration: derive bounds from the gradient estimate, build the active
//! set, pick a coordinate, take a step with the configured update rule, then
//! refresh the estimate (oracle rows for passive coordinates, the update
//! rule's own estimate for the active one).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::OracleSpec;
use crate::problem::{model_min, CompositeProblem, Regularizer, ResidualState};
use crate::ratiosim::{measure_rho, measure_varrho};
use crate::selector::{
    active_set, compute_bounds, gsq_active_set, gsq_bounds, gsr_bounds, gss_score,
    gss_score_interval, heuristic_active_set, select_ascd, select_gsq, select_scd, select_ucd,
    ActiveSet, Bounds, GradientEstimate, GsqBounds, Rule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateKind {
    /// `γ = −∇_i f / L`
    FixedStep,
    /// Exact minimization along the coordinate.
    LineSearch,
    /// Minimizer of the coordinate model `V_i` with curvature `L`.
    ProxStep,
}

impl UpdateKind {
    pub fn name(&self) -> &'static str {
        match self {
            UpdateKind::FixedStep => "fixed",
            UpdateKind::LineSearch => "line-search",
            UpdateKind::ProxStep => "prox",
        }
    }
}

impl fmt::Display for UpdateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UpdateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" | "fixed-step" => Ok(UpdateKind::FixedStep),
            "line-search" | "exact" => Ok(UpdateKind::LineSearch),
            "prox" | "prox-step" => Ok(UpdateKind::ProxStep),
            other => Err(Error::InvalidParameter(format!("unknown update rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRule {
    pub kind: UpdateKind,
    /// Multiplier on the fixed step `1/L`.
    pub step_scale: f64,
    /// Use `L_i` instead of `L = max_i L_i` for fixed and prox steps.
    pub per_coordinate: bool,
}

impl UpdateRule {
    pub fn new(kind: UpdateKind) -> Self {
        Self {
            kind,
            step_scale: 1.0,
            per_coordinate: false,
        }
    }

    pub fn fixed() -> Self {
        Self::new(UpdateKind::FixedStep)
    }

    pub fn line_search() -> Self {
        Self::new(UpdateKind::LineSearch)
    }

    pub fn prox() -> Self {
        Self::new(UpdateKind::ProxStep)
    }

    /// Fixed step for smooth problems, prox step when an `l1` term is present.
    pub fn default_for(problem: &CompositeProblem) -> Self {
        match problem.nonsmooth() {
            Regularizer::None => Self::fixed(),
            _ => Self::prox(),
        }
    }
}

/// Step length and the update rule's estimate `(g̃, r)` of the active
/// coordinate's gradient at the new point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub gamma: f64,
    pub active_estimate: (f64, f64),
}

/// Takes one coordinate step on `state`.
pub fn step(
    problem: &CompositeProblem,
    state: &mut ResidualState,
    i: usize,
    rule: &UpdateRule,
) -> Result<StepOutcome> {
    let g = problem.partial_gradient(state, i)?;
    if !g.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    let psi = problem.nonsmooth();
    let curvature = if rule.per_coordinate {
        problem.lipschitz()[i]
    } else {
        problem.lipschitz_max()
    };
    let xi = state.x()[i];
    let (gamma, exact_zero) = match rule.kind {
        UpdateKind::FixedStep => {
            if psi != Regularizer::None {
                return Err(Error::InvalidParameter(
                    "fixed step needs a smooth objective; use the prox step with l1".into(),
                ));
            }
            (-rule.step_scale * g / curvature, false)
        }
        UpdateKind::LineSearch => {
            let li = problem.lipschitz()[i];
            match psi {
                Regularizer::None => (-g / li, true),
                _ => (psi.model_minimizer(xi, g, li), false),
            }
        }
        UpdateKind::ProxStep => (psi.model_minimizer(xi, g, curvature), false),
    };
    problem.apply_coordinate_step(state, i, gamma)?;
    let active_estimate = if exact_zero {
        (0.0, 0.0)
    } else {
        (problem.partial_gradient_unchecked(state, i), 0.0)
    };
    Ok(StepOutcome {
        gamma,
        active_estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// `g̃ = 0`, `r = ∞`.
    ZeroEstimate,
    /// One full gradient pass at `x_0`, `r = 0`.
    TrueGradient,
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "zero" | "zero-estimate" => Ok(InitMode::ZeroEstimate),
            "true-gradient" | "true" | "exact" => Ok(InitMode::TrueGradient),
            other => Err(Error::InvalidParameter(format!("unknown init mode `{other}`"))),
        }
    }
}

impl InitMode {
    pub fn name(&self) -> &'static str {
        match self {
            InitMode::ZeroEstimate => "none",
            InitMode::TrueGradient => "true-gradient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rule: Rule,
    pub update: UpdateRule,
    pub oracle: OracleSpec,
    pub iterations: usize,
    pub seed: u64,
    pub init: InitMode,
    /// Evaluate true-gradient diagnostics every this many steps (`0`: never).
    pub diagnostics_every: usize,
    /// Size `s` of a known low-dimensional support; when set the trace
    /// reports `ρ_t = |I_t ∩ [s]|/|I_t|` instead of the gradient-threshold
    /// ratio.
    pub support: Option<usize>,
    /// Record wall-clock time per step.
    pub timing: bool,
    /// Starting point, zeros when absent.
    pub x0: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(rule: Rule, update: UpdateRule, oracle: OracleSpec, iterations: usize) -> Self {
        Self {
            rule,
            update,
            oracle,
            iterations,
            seed: 0,
            init: InitMode::ZeroEstimate,
            diagnostics_every: 0,
            support: None,
            timing: false,
            x0: None,
        }
    }

    pub fn validate(&self, problem: &CompositeProblem) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iteration budget must be at least 1".into()));
        }
        self.oracle.validate()?;
        if !(self.update.step_scale.is_finite() && self.update.step_scale > 0.0) {
            return Err(Error::InvalidParameter("step scale must be positive".into()));
        }
        if self.update.kind == UpdateKind::FixedStep && problem.nonsmooth() != Regularizer::None {
            return Err(Error::InvalidParameter(
                "fixed step needs a smooth objective; use the prox step with l1".into(),
            ));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != problem.n() {
                return Err(Error::DimensionMismatch {
                    expected: problem.n(),
                    got: x0.len(),
                });
            }
        }
        if let Some(s) = self.support {
            if s == 0 || s > problem.n() {
                return Err(Error::InvalidParameter(format!(
                    "support size {s} outside 1..={}",
                    problem.n()
                )));
            }
        }
        Ok(())
    }
}

/// What the selection step saw at `x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub active_set: Option<ActiveSet>,
    /// Score bounds the active set was built from (absent for UCD, SCD, GS-q).
    pub bounds: Option<Bounds>,
    pub gsq: Option<GsqBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub index: usize,
    pub gamma: f64,
    /// `F(x_{t+1})`.
    pub objective: f64,
}

/// A descent run that can be advanced one step at a time.
pub struct Descent<'a> {
    problem: &'a CompositeProblem,
    config: RunConfig,
    state: ResidualState,
    estimate: Option<GradientEstimate>,
    rng: ChaCha8Rng,
    t: usize,
    scratch: Vec<f64>,
    inner: Vec<f64>,
    est_row: Vec<f64>,
    err_row: Vec<f64>,
}

impl<'a> Descent<'a> {
    pub fn new(problem: &'a CompositeProblem, config: RunConfig) -> Result<Self> {
        config.validate(problem)?;
        let state = match &config.x0 {
            Some(x0) => problem.state_at(x0.clone())?,
            None => problem.zero_state(),
        };
        let estimate = config.rule.tracks_estimate().then(|| match config.init {
            InitMode::ZeroEstimate => GradientEstimate::unknown(problem.n()),
            InitMode::TrueGradient => GradientEstimate::exact(problem.full_gradient(&state)),
        });
        let n = problem.n();
        let needs_inner = config.rule.tracks_estimate() && config.oracle.needs_inner_products();
        Ok(Self {
            problem,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            state,
            estimate,
            t: 0,
            scratch: if needs_inner { vec![0.0; problem.d()] } else { Vec::new() },
            inner: if needs_inner { vec![0.0; n] } else { Vec::new() },
            est_row: vec![0.0; n],
            err_row: vec![0.0; n],
        })
    }

    pub fn problem(&self) -> &CompositeProblem {
        self.problem
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn state(&self) -> &ResidualState {
        &self.state
    }

    pub fn estimate(&self) -> Option<&GradientEstimate> {
        self.estimate.as_ref()
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    /// Chooses the coordinate for the current iterate.
    pub fn select(&mut self) -> Selection {
        let problem = self.problem;
        let psi = problem.nonsmooth();
        let x = self.state.x();
        let rule = self.config.rule;
        match rule {
            Rule::Ucd => Selection {
                index: select_ucd(problem.n(), &mut self.rng),
                active_set: None,
                bounds: None,
                gsq: None,
            },
            Rule::Scd => {
                let grad = problem.full_gradient(&self.state);
                let index = match psi {
                    Regularizer::None => select_scd(&grad),
                    _ => {
                        let scores: Vec<f64> =
                            grad.iter().zip(x).map(|(&g, &xi)| gss_score(g, xi, &psi)).collect();
                        select_scd(&scores)
                    }
                };
                Selection {
                    index,
                    active_set: None,
                    bounds: None,
                    gsq: None,
                }
            }
            Rule::AscdGsq => {
                let est = self.estimate.as_ref().expect("estimate tracked");
                let q = gsq_bounds(est, x, problem.lipschitz_max(), &psi);
                let set = gsq_active_set(&q);
                let index = select_gsq(&q, &set, &mut self.rng);
                Selection {
                    index,
                    active_set: Some(set),
                    bounds: None,
                    gsq: Some(q),
                }
            }
            _ => {
                let est = self.estimate.as_ref().expect("estimate tracked");
                let bounds = match rule {
                    Rule::AscdGsr => gsr_bounds(est, x, problem.lipschitz_max(), &psi),
                    Rule::AscdGss => gss_score_interval(est, x, &psi)
                        .expect("nonsmooth part is none or l1"),
                    _ => match psi {
                        Regularizer::None => compute_bounds(est),
                        _ => gss_score_interval(est, x, &psi).expect("nonsmooth part is l1"),
                    },
                };
                let set = match rule.heuristic() {
                    Some(variant) => heuristic_active_set(variant, &bounds),
                    None => active_set(&bounds),
                };
                let index = select_ascd(&bounds, &set, &mut self.rng);
                Selection {
                    index,
                    active_set: Some(set),
                    bounds: Some(bounds),
                    gsq: None,
                }
            }
        }
    }

    /// Steps on coordinate `index` and refreshes the gradient estimate.
    pub fn advance(&mut self, index: usize) -> Result<StepRecord> {
        let t = self.t;
        let outcome =
            step(self.problem, &mut self.state, index, &self.config.update).map_err(|e| e.at_step(t))?;
        if let Some(est) = self.estimate.as_mut() {
            let oracle = &self.config.oracle;
            let norms = self.problem.column_norms();
            if outcome.gamma != 0.0 {
                if oracle.needs_inner_products() {
                    self.problem
                        .matrix()
                        .gram_row(index, &mut self.scratch, &mut self.inner);
                }
                for j in 0..norms.len() {
                    if j == index {
                        continue;
                    }
                    let dot = self.inner.get(j).copied().unwrap_or(0.0);
                    let out = oracle.estimate_with_dot(dot, norms[index] * norms[j], index, j);
                    self.est_row[j] = out.estimate;
                    self.err_row[j] = out.error;
                }
            }
            est.update(
                index,
                outcome.gamma,
                &self.est_row,
                &self.err_row,
                outcome.active_estimate,
            )
            .map_err(|e| e.at_step(t))?;
        }
        self.t += 1;
        Ok(StepRecord {
            t,
            index,
            gamma: outcome.gamma,
            objective: self.problem.objective_value(&self.state),
        })
    }

    pub fn step(&mut self) -> Result<(Selection, StepRecord)> {
        let selection = self.select();
        let record = self.advance(selection.index)?;
        Ok((selection, record))
    }

    pub fn into_state(self) -> ResidualState {
        self.state
    }
}

/// One-step progress lower bounds at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressTau {
    pub ucd: f64,
    pub ascd: Option<f64>,
    pub scd: f64,
}

/// `τ_UCD = ‖∇f‖²/(2nL)`, `τ_ASCD = Σ_{i∈I}|∇_i f|²/(2L|I|)`,
/// `τ_SCD = ‖∇f‖_∞²/(2L)`.
pub fn progress_tau(gradient: &[f64], active: Option<&[usize]>, l: f64) -> ProgressTau {
    let n = gradient.len() as f64;
    let two_sq: f64 = gradient.iter().map(|g| g * g).sum();
    let inf = gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let ascd = active.map(|set| {
        let s: f64 = set.iter().map(|&i| gradient[i] * gradient[i]).sum();
        s / (2.0 * l * set.len() as f64)
    });
    ProgressTau {
        ucd: two_sq / (2.0 * n * l),
        ascd,
        scd: inf * inf / (2.0 * l),
    }
}

/// `Δ = 1/(f_next − f*) − 1/(f_prev − f*)`; `+∞` once `f_next` reaches `f*`.
pub fn progress_delta(f_prev: f64, f_next: f64, f_star: f64) -> Result<f64> {
    if !(f_prev > f_star) || f_next < f_star {
        return Err(Error::InvalidParameter(format!(
            "progress measure needs f_prev > f* and f_next ≥ f* (got {f_prev}, {f_next}, {f_star})"
        )));
    }
    if f_next == f_star {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (f_next - f_star) - 1.0 / (f_prev - f_star))
}

/// One row of the iteration trace. Diagnostics are evaluated at `x_t` (where
/// the coordinate was chosen); `objective` is `F(x_{t+1})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub index: usize,
    pub objective: f64,
    pub grad_inf: Option<f64>,
    pub grad_two_sq: Option<f64>,
    pub active_size: Option<usize>,
    pub rho: Option<f64>,
    pub tau_ucd: Option<f64>,
    pub tau_ascd: Option<f64>,
    pub tau_scd: Option<f64>,
    pub wall_ns: Option<u64>,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str =
        "t,i,f,grad_inf,grad2sq,active_size,rho,tau_ucd,tau_ascd,tau_scd,wall_ns";

    pub fn to_csv(&self) -> String {
        fn opt<T: fmt::Display>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.index,
            self.objective,
            opt(self.grad_inf),
            opt(self.grad_two_sq),
            opt(self.active_size),
            opt(self.rho),
            opt(self.tau_ucd),
            opt(self.tau_ascd),
            opt(self.tau_scd),
            opt(self.wall_ns),
        )
    }
}

/// Counters from true-gradient checkpoints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DiagnosticCounts {
    pub checkpoints: usize,
    /// A bound missed the true score.
    pub soundness_violations: usize,
    /// The exact rule's choice fell outside the active set.
    pub containment_violations: usize,
    /// `τ_UCD ≤ τ_ASCD ≤ τ_SCD` failed (only for sandwich-guaranteed rules).
    pub sandwich_violations: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRow>,
    pub x: Vec<f64>,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub mean_active_size: Option<f64>,
    pub wall_ns: Option<u64>,
    pub diagnostics: DiagnosticCounts,
}

impl RunOutput {
    pub fn indices(&self) -> Vec<usize> {
        self.trace.iter().map(|r| r.index).collect()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", TraceRow::CSV_HEADER)?;
        for row in &self.trace {
            writeln!(out, "{}", row.to_csv())?;
        }
        Ok(())
    }
}

const CHECK_RTOL: f64 = 1e-9;

fn within(lower: f64, value: f64, upper: f64, scale: f64) -> bool {
    let slack = CHECK_RTOL * scale.max(1.0);
    lower <= value + slack && value <= upper + slack
}

fn check_selection(
    problem: &CompositeProblem,
    x: &[f64],
    grad: &[f64],
    rule: Rule,
    selection: &Selection,
    tau: &ProgressTau,
    counts: &mut DiagnosticCounts,
) {
    let psi = problem.nonsmooth();
    let l = problem.lipschitz_max();
    let Some(set) = &selection.active_set else {
        return;
    };
    if let Some(q) = &selection.gsq {
        let mins: Vec<f64> = (0..grad.len())
            .map(|i| model_min(x[i], grad[i], l, &psi))
            .collect();
        let scale = mins.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if (0..grad.len()).any(|i| !within(q.v[i], mins[i], q.w[i], scale)) {
            counts.soundness_violations += 1;
        }
        let best = (0..mins.len()).min_by(|&a, &b| mins[a].total_cmp(&mins[b])).unwrap_or(0);
        if !set.contains(best) && mins.iter().filter(|&&m| m == mins[best]).count() == 1 {
            counts.containment_violations += 1;
        }
        return;
    }
    let Some(bounds) = &selection.bounds else {
        return;
    };
    let scores: Vec<f64> = match rule {
        Rule::AscdGsr => (0..grad.len())
            .map(|i| psi.model_minimizer(x[i], grad[i], l).abs())
            .collect(),
        _ => grad.iter().zip(x).map(|(&g, &xi)| gss_score(g, xi, &psi)).collect(),
    };
    let scale = scores.iter().fold(0.0f64, |m, v| m.max(*v));
    if (0..scores.len()).any(|i| !within(bounds.lower[i], scores[i], bounds.upper[i], scale)) {
        counts.soundness_violations += 1;
    }
    if rule.heuristic().is_none() {
        let best = select_scd(&scores);
        let near_tie = scores
            .iter()
            .enumerate()
            .any(|(i, &s)| i != best && (scores[best] - s).abs() <= CHECK_RTOL * scale);
        if !set.contains(best) && !near_tie {
            counts.containment_violations += 1;
        }
    }
    if matches!(rule, Rule::Ascd) && psi == Regularizer::None {
        if let Some(ascd) = tau.ascd {
            let slack = 1e-10 * tau.scd.max(f64::MIN_POSITIVE);
            if !(tau.ucd <= ascd + slack && ascd <= tau.scd + slack) {
                counts.sandwich_violations += 1;
            }
        }
    }
}

/// Runs `config.iterations` steps and records the trace.
pub fn run(problem: &CompositeProblem, config: &RunConfig) -> Result<RunOutput> {
    let mut descent = Descent::new(problem, config.clone())?;
    let initial_objective = problem.objective_value(descent.state());
    let mut trace = Vec::with_capacity(config.iterations);
    let mut counts = DiagnosticCounts::default();
    let mut active_total = 0usize;
    let mut active_steps = 0usize;
    let mut elapsed_ns: u64 = 0;

    for t in 0..config.iterations {
        let checkpoint = config.diagnostics_every > 0 && t % config.diagnostics_every == 0;
        let grad = checkpoint.then(|| problem.full_gradient(descent.state()));
        let x_before = checkpoint.then(|| descent.state().x().to_vec());

        let started = config.timing.then(Instant::now);
        let (selection, record) = descent.step()?;
        if let Some(started) = started {
            elapsed_ns += started.elapsed().as_nanos() as u64;
        }

        let active_size = selection.active_set.as_ref().map(ActiveSet::len);
        if let Some(size) = active_size {
            active_total += size;
            active_steps += 1;
        }
        let mut row = TraceRow {
            t,
            index: record.index,
            objective: record.objective,
            grad_inf: None,
            grad_two_sq: None,
            active_size,
            rho: None,
            tau_ucd: None,
            tau_ascd: None,
            tau_scd: None,
            wall_ns: config.timing.then_some(elapsed_ns),
        };
        if let (Some(grad), Some(x)) = (grad, x_before) {
            counts.checkpoints += 1;
            let indices = selection.active_set.as_ref().map(|s| s.indices.as_slice());
            let tau = progress_tau(&grad, indices, problem.lipschitz_max());
            row.grad_inf = Some(grad.iter().fold(0.0f64, |m, g| m.max(g.abs())));
            row.grad_two_sq = Some(grad.iter().map(|g| g * g).sum());
            row.tau_ucd = Some(tau.ucd);
            row.tau_ascd = tau.ascd;
            row.tau_scd = Some(tau.scd);
            if let Some(set) = &selection.active_set {
                row.rho = Some(match config.support {
                    Some(s) => measure_rho(&set.indices, s),
                    None => measure_varrho(&grad, &set.indices),
                });
            }
            check_selection(problem, &x, &grad, config.rule, &selection, &tau, &mut counts);
        }
        trace.push(row);
    }

    let final_objective = problem.objective_value(descent.state());
    Ok(RunOutput {
        trace,
        x: descent.into_state().x().to_vec(),
        initial_objective,
        final_objective,
        mean_active_size: (active_steps > 0).then(|| active_total as f64 / active_steps as f64),
        wall_ns: config.timing.then_some(elapsed_ns),
        diagnostics: counts,
    })
}

/// Optimal value estimate from cyclic exact coordinate minimization.
///
/// Stops after `max_epochs` sweeps or once an epoch improves `F` by less than
/// `tol · max(1, |F|)`. Returns `(F*, x*)`.
pub fn reference_optimum(
    problem: &CompositeProblem,
    max_epochs: usize,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut state = problem.zero_state();
    let rule = UpdateRule::line_search();
    let mut previous = problem.objective_value(&state);
    for _ in 0..max_epochs {
        for i in 0..problem.n() {
            step(problem, &mut state, i, &rule)?;
        }
        state.refresh(problem.matrix());
        let current = problem.objective_value(&state);
        let done = (previous - current).abs() <= tol * current.abs().max(1.0);
        previous = current;
        if done {
            break;
        }
    }
    Ok((previous, state.x().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ColumnSparseMatrix;
    use rand::Rng;

    fn identity(n: usize) -> ColumnSparseMatrix {
        ColumnSparseMatrix::from_columns(n, (0..n).map(|i| vec![(i, 1.0)]).collect()).unwrap()
    }

    fn random_problem(seed: u64, d: usize, n: usize, reg: Regularizer) -> CompositeProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let b = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        CompositeProblem::new(ColumnSparseMatrix::from_dense_rows(&rows).unwrap(), b, reg).unwrap()
    }

    #[test]
    fn fixed_step_example() {
        // ∇f = 2 at x=1 with a = (2): f = ½(2x)², ∇ = 4x → choose x=0.5, L=4
        let m = ColumnSparseMatrix::from_columns(1, vec![vec![(0, 2.0)]]).unwrap();
        let p = CompositeProblem::new(m, vec![0.0], Regularizer::None).unwrap();
        let mut s = p.state_at(vec![0.5]).unwrap();
        let out = step(&p, &mut s, 0, &UpdateRule::fixed()).unwrap();
        assert_eq!(out.gamma, -0.5);
        assert_eq!(out.active_estimate, (0.0, 0.0));
    }

    #[test]
    fn line_search_minimizes_exactly() {
        let p = CompositeProblem::new(identity(1), vec![0.0], Regularizer::None).unwrap();
        let mut s = p.state_at(vec![5.0]).unwrap();
        let out = step(&p, &mut s, 0, &UpdateRule::line_search()).unwrap();
        assert_eq!(s.x(), &[0.0]);
        assert_eq!(out.active_estimate, (0.0, 0.0));
    }

    #[test]
    fn prox_step_soft_thresholds() {
        // a = (1), b = (−3): ∇f(0) = 3; λ=1, L=1 → γ = −2
        let p = CompositeProblem::new(identity(1), vec![-3.0], Regularizer::L1 { lambda: 1.0 })
            .unwrap();
        let mut s = p.zero_state();
        let out = step(&p, &mut s, 0, &UpdateRule::prox()).unwrap();
        assert_eq!(out.gamma, -2.0);
        assert_eq!(out.active_estimate.0, 1.0);
        assert!(step(&p, &mut s, 0, &UpdateRule::fixed()).is_err());
    }

    #[test]
    fn tau_examples() {
        let tau = progress_tau(&[3.0, 1.0], Some(&[0]), 1.0);
        assert_eq!((tau.ucd, tau.ascd, tau.scd), (2.5, Some(4.5), 4.5));
        let tau = progress_tau(&[2.0; 5], None, 2.0);
        assert_eq!(tau.ucd, tau.scd);
        assert_eq!(tau.scd, 1.0);
        let tau = progress_tau(&[2.0, 0.0, 0.0, 0.0], None, 1.0);
        assert_eq!(tau.ucd, tau.scd / 4.0);
    }

    #[test]
    fn delta_examples() {
        assert_eq!(progress_delta(1.0, 0.5, 0.0).unwrap(), 1.0);
        assert_eq!(progress_delta(2.0, 2.0, 1.0).unwrap(), 0.0);
        assert_eq!(progress_delta(2.0, 1.0, 1.0).unwrap(), f64::INFINITY);
        assert!(progress_delta(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn ucd_on_identity_lands_each_coordinate_once() {
        let n = 6;
        let p = CompositeProblem::new(identity(n), vec![0.0; n], Regularizer::None).unwrap();
        let mut cfg = RunConfig::new(Rule::Ucd, UpdateRule::fixed(), OracleSpec::zero(), 200);
        cfg.x0 = Some(vec![1.0; n]);
        cfg.seed = 9;
        let out = run(&p, &cfg).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for row in &out.trace {
            seen.insert(row.index);
            let expected = (n - seen.len()) as f64 * 0.5;
            assert!((row.objective - expected).abs() < 1e-12);
        }
        assert_eq!(out.final_objective, 0.0);
    }

    #[test]
    fn fixed_step_descent_is_monotone() {
        let p = random_problem(1, 15, 8, Regularizer::L2 { lambda: 0.1 });
        for rule in [Rule::Ucd, Rule::Scd, Rule::Ascd, Rule::AAscd] {
            let mut cfg = RunConfig::new(rule, UpdateRule::fixed(), OracleSpec::random(1), 300);
            cfg.seed = 4;
            let out = run(&p, &cfg).unwrap();
            let mut prev = out.initial_objective;
            for f in out.objectives() {
                assert!(f <= prev + 1e-12 * prev.abs());
                prev = f;
            }
        }
    }

    #[test]
    fn ascd_with_exact_oracle_replays_scd() {
        let p = random_problem(2, 20, 12, Regularizer::None);
        let mut scd = RunConfig::new(Rule::Scd, UpdateRule::fixed(), OracleSpec::exact(), 120);
        scd.seed = 3;
        let mut ascd = scd.clone();
        ascd.rule = Rule::Ascd;
        ascd.init = InitMode::TrueGradient;
        ascd.seed = 77;
        assert_eq!(run(&p, &scd).unwrap().indices(), run(&p, &ascd).unwrap().indices());
    }

    #[test]
    fn diagnostics_find_no_violations() {
        for (seed, reg, rule) in [
            (3, Regularizer::None, Rule::Ascd),
            (4, Regularizer::L1 { lambda: 0.2 }, Rule::Ascd),
            (5, Regularizer::L1 { lambda: 0.2 }, Rule::AscdGsq),
            (6, Regularizer::L1 { lambda: 0.2 }, Rule::AscdGsr),
            (7, Regularizer::L2 { lambda: 0.5 }, Rule::AscdGsq),
        ] {
            let p = random_problem(seed, 25, 10, reg);
            let mut cfg = RunConfig::new(rule, UpdateRule::default_for(&p), OracleSpec::random(seed), 200);
            cfg.diagnostics_every = 1;
            let out = run(&p, &cfg).unwrap();
            assert_eq!(out.diagnostics.checkpoints, 200);
            assert_eq!(out.diagnostics.soundness_violations, 0, "{rule} {reg:?}");
            assert_eq!(out.diagnostics.containment_violations, 0, "{rule} {reg:?}");
            assert_eq!(out.diagnostics.sandwich_violations, 0, "{rule} {reg:?}");
        }
    }

    #[test]
    fn trace_csv_shape() {
        let p = random_problem(8, 6, 4, Regularizer::None);
        let mut cfg = RunConfig::new(Rule::Ascd, UpdateRule::fixed(), OracleSpec::zero(), 5);
        cfg.diagnostics_every = 2;
        let out = run(&p, &cfg).unwrap();
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TraceRow::CSV_HEADER);
        assert_eq!(lines.len(), 6);
        assert!(lines.iter().all(|l| l.split(',').count() == 11));
        assert!(lines[2].ends_with(",,,,,"));
    }

    #[test]
    fn reference_optimum_matches_normal_equations_on_identity() {
        let b = vec![1.0, -2.0, 3.0];
        let p = CompositeProblem::new(identity(3), b.clone(), Regularizer::L1 { lambda: 1.5 })
            .unwrap();
        let (f_star, x) = reference_optimum(&p, 100, 1e-14).unwrap();
        assert_eq!(x, vec![0.0, -0.5, 1.5]);
        assert!((f_star - 5.75).abs() < 1e-12);
    }
}
