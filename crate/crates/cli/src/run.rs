use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use ascd_core::data::{load_svmlight, take_columns, LoadOptions};
use ascd_core::driver::{run, DiagnosticCounts, InitMode, RunConfig, RunOutput, UpdateKind, UpdateRule};
use ascd_core::oracles::{OracleKind, OracleSpec};
use ascd_core::problem::{CompositeProblem, Regularizer};
use ascd_core::selector::Rule;

use crate::output::{self, SCHEMA_VERSION};
use crate::steps::Steps;
use crate::Globals;

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// svmlight file with the design matrix and target.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,

    /// Set every stored value to 1.
    #[arg(long)]
    pub binarize: bool,

    /// Keep this many randomly chosen columns.
    #[arg(long, value_name = "K")]
    pub take_cols: Option<usize>,

    /// Ridge penalty `λ/2·‖x‖²`.
    #[arg(long, value_name = "LAMBDA", conflicts_with = "l1")]
    pub l2: Option<f64>,

    /// Lasso penalty `λ·‖x‖₁`.
    #[arg(long, value_name = "LAMBDA")]
    pub l1: Option<f64>,
}

impl ProblemArgs {
    pub fn regularizer(&self) -> Regularizer {
        match (self.l2, self.l1) {
            (Some(lambda), _) => Regularizer::L2 { lambda },
            (None, Some(lambda)) => Regularizer::L1 { lambda },
            (None, None) => Regularizer::None,
        }
    }

    /// Column subsets are drawn with `seed`.
    pub fn load(&self, seed: u64) -> Result<LoadedProblem> {
        let options = LoadOptions {
            binarize: self.binarize,
        };
        let ds = load_svmlight(&self.data, &options)
            .with_context(|| format!("loading {}", self.data.display()))?;
        let dropped = ds.dropped.len();
        let matrix = match self.take_cols {
            Some(k) => take_columns(&ds.matrix, k, seed)?.0,
            None => ds.matrix,
        };
        let problem = CompositeProblem::new(matrix, ds.target, self.regularizer())?;
        Ok(LoadedProblem {
            problem,
            source: self.data.display().to_string(),
            dropped_columns: dropped,
        })
    }
}

pub struct LoadedProblem {
    pub problem: CompositeProblem,
    pub source: String,
    pub dropped_columns: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// ucd, scd, ascd, u-ascd, l-ascd, a-ascd, ascd-gss, ascd-gsq or ascd-gsr.
    #[arg(long, default_value = "ascd")]
    pub rule: Rule,

    /// g1, g2, g3, g4 or hessian.
    #[arg(long, default_value = "g4")]
    pub oracle: OracleKind,

    /// Relative error of the g2 oracle.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,

    /// Hessian bound for the hessian oracle.
    #[arg(long, default_value_t = 1.0)]
    pub hessian_bound: f64,

    /// Iterations, absolute or per coordinate (`10n`).
    #[arg(long, default_value = "10n")]
    pub steps: Steps,

    /// Estimate initialization: none or true-gradient.
    #[arg(long, default_value = "none")]
    pub init: InitMode,

    /// fixed, line-search or prox; defaults to fixed for smooth problems and
    /// prox with an l1 penalty.
    #[arg(long)]
    pub update: Option<UpdateKind>,

    /// Multiplier on the `1/L` step.
    #[arg(long, default_value_t = 1.0)]
    pub step_scale: f64,

    /// Use `L_i` instead of `max_i L_i` for the step.
    #[arg(long)]
    pub per_coordinate: bool,

    /// Compute the true gradient every this many steps (default n, 0: never).
    #[arg(long)]
    pub diagnostics_every: Option<usize>,

    /// Size of a known support `[s]`; the trace then reports `|I ∩ [s]|/|I|`.
    #[arg(long)]
    pub support: Option<usize>,

    /// Record wall-clock time.
    #[arg(long)]
    pub timing: bool,
}

impl SolverArgs {
    pub fn config(&self, problem: &CompositeProblem, seed: u64) -> RunConfig {
        let mut update = match self.update {
            Some(kind) => UpdateRule::new(kind),
            None => UpdateRule::default_for(problem),
        };
        update.step_scale = self.step_scale;
        update.per_coordinate = self.per_coordinate;
        let oracle = OracleSpec {
            kind: self.oracle,
            epsilon: self.epsilon,
            hessian_bound: self.hessian_bound,
            seed,
        };
        let mut cfg = RunConfig::new(self.rule, update, oracle, self.steps.resolve(problem.n()));
        cfg.seed = seed;
        cfg.init = self.init;
        cfg.diagnostics_every = self.diagnostics_every.unwrap_or(problem.n());
        cfg.support = self.support;
        cfg.timing = self.timing;
        cfg
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Output file prefix.
    #[arg(long, default_value = "run")]
    pub tag: String,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub command: &'static str,
    pub data: String,
    pub rows: usize,
    pub cols: usize,
    pub dropped_columns: usize,
    pub regularizer: Regularizer,
    pub rule: Rule,
    pub oracle: OracleSpec,
    pub init: InitMode,
    pub update: UpdateRule,
    pub steps: usize,
    pub seed: u64,
    pub initial_f: f64,
    pub final_f: f64,
    pub epochs: f64,
    pub mean_active_size: Option<f64>,
    pub wall_ns: Option<u64>,
    pub diagnostics: DiagnosticCounts,
}

impl RunSummary {
    pub fn new(loaded: &LoadedProblem, config: &RunConfig, out: &RunOutput) -> Self {
        let p = &loaded.problem;
        Self {
            schema_version: SCHEMA_VERSION,
            command: "run",
            data: loaded.source.clone(),
            rows: p.d(),
            cols: p.n(),
            dropped_columns: loaded.dropped_columns,
            regularizer: p.regularizer(),
            rule: config.rule,
            oracle: config.oracle,
            init: config.init,
            update: config.update,
            steps: config.iterations,
            seed: config.seed,
            initial_f: out.initial_objective,
            final_f: out.final_objective,
            epochs: config.iterations as f64 / p.n() as f64,
            mean_active_size: out.mean_active_size,
            wall_ns: out.wall_ns,
            diagnostics: out.diagnostics,
        }
    }
}

/// Runs one configuration and writes `<tag>.trace.csv` and `<tag>.summary.json`.
pub fn run_and_write(loaded: &LoadedProblem, config: &RunConfig, dir: &Path, tag: &str) -> Result<RunSummary> {
    let out = run(&loaded.problem, config)?;
    let trace_path = output::path(dir, tag, ".trace.csv");
    let mut w = output::create(&trace_path)?;
    out.write_csv(&mut w)?;
    w.flush()?;
    log::info!("wrote {}", trace_path.display());
    let summary = RunSummary::new(loaded, config, &out);
    output::write_json(&output::path(dir, tag, ".summary.json"), &summary)?;
    Ok(summary)
}

pub fn execute(args: &RunArgs, globals: &Globals) -> Result<()> {
    let loaded = args.problem.load(globals.seed)?;
    let config = args.solver.config(&loaded.problem, globals.seed);
    config.validate(&loaded.problem)?;
    output::ensure_dir(&globals.out)?;
    let summary = run_and_write(&loaded, &config, &globals.out, &args.tag)?;
    println!(
        "{} {}: f {} -> {} over {} epochs",
        summary.rule, summary.oracle.kind, summary.initial_f, summary.final_f, summary.epochs
    );
    Ok(())
}
