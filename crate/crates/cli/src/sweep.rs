use std::io::Write;
use std::str::FromStr;

use anyhow::{bail, Result};
use clap::{ArgAction, Args};
use rayon::prelude::*;

use ascd_core::driver::InitMode;
use ascd_core::oracles::OracleKind;
use ascd_core::selector::Rule;

use crate::output;
use crate::run::{run_and_write, ProblemArgs, RunSummary, SolverArgs};
use crate::Globals;

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Rule axis, comma separated.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub rules: Vec<Rule>,

    /// Oracle axis.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub oracles: Vec<OracleKind>,

    /// g2 error axis.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub epsilons: Vec<f64>,

    /// Seed axis; `a..b` is inclusive.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub seeds: Vec<SeedList>,

    /// Initialization axis.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub inits: Vec<InitMode>,

    /// Refuse sweeps with more cells than this.
    #[arg(long, default_value_t = 10_000)]
    pub max_cells: usize,

    /// Output file prefix.
    #[arg(long, default_value = "sweep")]
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad seed `{s}`, expected an integer or a..b");
        match s.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
                if b < a {
                    return Err(format!("empty seed range `{s}`"));
                }
                Ok(SeedList((a..=b).collect()))
            }
            None => Ok(SeedList(vec![s.trim().parse().map_err(|_| bad())?])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub rule: Rule,
    pub oracle: OracleKind,
    pub epsilon: f64,
    pub seed: u64,
    pub init: InitMode,
}

fn axis<T: Clone>(values: &[T], fallback: T) -> Vec<T> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

/// Cross product in the order rule, oracle, ε, seed, init (last varies fastest).
pub fn cells(args: &SweepArgs, seed: u64) -> Result<Vec<Cell>> {
    let rules = axis(&args.rules, args.solver.rule);
    let oracles = axis(&args.oracles, args.solver.oracle);
    let epsilons = axis(&args.epsilons, args.solver.epsilon);
    let seeds: Vec<u64> = if args.seeds.is_empty() {
        vec![seed]
    } else {
        args.seeds.iter().flat_map(|s| s.0.iter().copied()).collect()
    };
    let inits = axis(&args.inits, args.solver.init);

    let total = rules.len() * oracles.len() * epsilons.len() * seeds.len() * inits.len();
    if total > args.max_cells {
        bail!("sweep has {total} cells, above the cap of {}", args.max_cells);
    }
    let mut out = Vec::with_capacity(total);
    for &rule in &rules {
        for &oracle in &oracles {
            for &epsilon in &epsilons {
                for &seed in &seeds {
                    for &init in &inits {
                        out.push(Cell {
                            index: out.len(),
                            rule,
                            oracle,
                            epsilon,
                            seed,
                            init,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn cell_tag(tag: &str, cell: &Cell) -> String {
    format!("{tag}-{:04}", cell.index)
}

pub fn execute(args: &SweepArgs, globals: &Globals) -> Result<()> {
    let grid = cells(args, globals.seed)?;
    let loaded = args.problem.load(globals.seed)?;
    output::ensure_dir(&globals.out)?;

    let configs = grid
        .iter()
        .map(|cell| {
            let mut solver = args.solver.clone();
            solver.rule = cell.rule;
            solver.oracle = cell.oracle;
            solver.epsilon = cell.epsilon;
            solver.init = cell.init;
            let cfg = solver.config(&loaded.problem, cell.seed);
            cfg.validate(&loaded.problem).map(|()| cfg)
        })
        .collect::<Vec<_>>();

    let pool = rayon::ThreadPoolBuilder::new().num_threads(globals.jobs).build()?;
    let results: Vec<Result<RunSummary>> = pool.install(|| {
        grid.par_iter()
            .zip(configs.par_iter())
            .map(|(cell, cfg)| {
                let cfg = cfg.as_ref().map_err(|e| anyhow::anyhow!("{e}"))?;
                run_and_write(&loaded, cfg, &globals.out, &cell_tag(&args.tag, cell))
            })
            .collect()
    });

    let summary_path = output::path(&globals.out, &args.tag, ".summary.csv");
    let mut summary = output::create(&summary_path)?;
    writeln!(
        summary,
        "cell,tag,rule,oracle,epsilon,seed,init,steps,epochs,initial_f,final_f,mean_active_size,wall_ns"
    )?;
    let failed_path = output::path(&globals.out, &args.tag, ".failed.csv");
    let mut failed = output::create(&failed_path)?;
    writeln!(failed, "cell,tag,rule,oracle,epsilon,seed,init,error")?;

    let mut failures = 0usize;
    for (cell, result) in grid.iter().zip(&results) {
        let tag = cell_tag(&args.tag, cell);
        match result {
            Ok(s) => writeln!(
                summary,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                cell.index,
                tag,
                cell.rule,
                cell.oracle,
                cell.epsilon,
                cell.seed,
                cell.init.name(),
                s.steps,
                s.epochs,
                s.initial_f,
                s.final_f,
                s.mean_active_size.map(|v| v.to_string()).unwrap_or_default(),
                s.wall_ns.map(|v| v.to_string()).unwrap_or_default(),
            )?,
            Err(e) => {
                failures += 1;
                let message = format!("{e:#}").replace(['"', '\n'], " ");
                writeln!(
                    failed,
                    "{},{},{},{},{},{},{},\"{}\"",
                    cell.index,
                    tag,
                    cell.rule,
                    cell.oracle,
                    cell.epsilon,
                    cell.seed,
                    cell.init.name(),
                    message
                )?;
            }
        }
    }
    summary.flush()?;
    failed.flush()?;
    log::info!("wrote {}", summary_path.display());

    println!("{} of {} cells finished", grid.len() - failures, grid.len());
    if failures > 0 {
        bail!("{failures} cells failed, see {}", failed_path.display());
    }
    Ok(())
}
