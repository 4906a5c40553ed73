use std::io::Write;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use ascd_core::ratiosim::{rho_infinity, simulate_rho, RatioSimConfig, Reentry, RhoInfinity};

use crate::output::{self, SCHEMA_VERSION};
use crate::Globals;

#[derive(Args, Debug)]
pub struct RatioArgs {
    /// Dimension.
    #[arg(long, default_value_t = 100)]
    pub n: usize,

    /// Size of the support `[s]`.
    #[arg(long, default_value_t = 10)]
    pub s: usize,

    /// Fraction of the support that stays active.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,

    /// Mean time an outside coordinate stays out of the active set.
    #[arg(long, default_value_t = 400.0)]
    pub t_inf: f64,

    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,

    /// geometric or fixed.
    #[arg(long, default_value = "geometric")]
    pub reentry: Reentry,

    /// Steps skipped before averaging (default: the first three quarters).
    #[arg(long)]
    pub burn_in: Option<usize>,

    /// Output file prefix.
    #[arg(long, default_value = "ratio")]
    pub tag: String,
}

#[derive(Debug, Serialize)]
struct Summary {
    schema_version: u32,
    command: &'static str,
    config: RatioSimConfig,
    kept: usize,
    closed_form: RhoInfinity,
    burn_in: usize,
    empirical_mean: f64,
    difference: f64,
}

pub fn execute(args: &RatioArgs, globals: &Globals) -> Result<()> {
    let config = RatioSimConfig {
        n: args.n,
        s: args.s,
        c: args.c,
        t_infinity: args.t_inf,
        steps: args.steps,
        seed: globals.seed,
        reentry: args.reentry,
    };
    let closed = rho_infinity(args.n, args.s, args.c, args.t_inf)?;
    let trace = simulate_rho(&config)?;
    let burn_in = args.burn_in.unwrap_or(3 * args.steps / 4).min(args.steps.saturating_sub(1));
    let mean = trace.mean_rho_from(burn_in);

    output::ensure_dir(&globals.out)?;
    let csv_path = output::path(&globals.out, &args.tag, ".csv");
    let mut w = output::create(&csv_path)?;
    writeln!(w, "t,rho,active_size")?;
    for (t, (rho, size)) in trace.rho.iter().zip(&trace.active_size).enumerate() {
        writeln!(w, "{t},{rho},{size}")?;
    }
    w.flush()?;
    log::info!("wrote {}", csv_path.display());

    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: "ratio-sim",
        kept: trace.kept,
        config,
        closed_form: closed,
        burn_in,
        empirical_mean: mean,
        difference: mean - closed.rho,
    };
    output::write_json(&output::path(&globals.out, &args.tag, ".summary.json"), &summary)?;
    println!(
        "rho closed form {} (bound {}), simulated mean {}",
        closed.rho, closed.simple_bound, mean
    );
    Ok(())
}
