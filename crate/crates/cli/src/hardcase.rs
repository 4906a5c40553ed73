use std::io::Write;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use ascd_core::hardcase::{verify_cycling, CyclingReport, HardCase, Start};

use crate::output::{self, SCHEMA_VERSION};
use crate::steps::Steps;
use crate::{Globals, VerificationFailed};

/// `‖∇q‖∞² ≤ (4/n)‖∇q‖₂²` along the worst-start trajectory.
const OMEGA_BOUND: f64 = 4.0;

fn parse_alpha(s: &str) -> Result<f64, String> {
    let alpha: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if alpha > 0.0 && alpha < 0.5 {
        Ok(alpha)
    } else {
        Err(format!("alpha must lie in (0, 0.5), got {alpha}"))
    }
}

fn parse_n(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 3 => Ok(n),
        _ => Err(format!("n must be an integer of at least 3, got `{s}`")),
    }
}

#[derive(Args, Debug)]
pub struct HardcaseArgs {
    /// Dimension.
    #[arg(long, default_value = "20", value_parser = parse_n)]
    pub n: usize,

    /// Strong-convexity parameter in (0, 0.5).
    #[arg(long, default_value = "0.01", value_parser = parse_alpha)]
    pub alpha: f64,

    /// Iterations, absolute or per coordinate.
    #[arg(long, default_value = "5n")]
    pub steps: Steps,

    /// worst or ones.
    #[arg(long, default_value = "worst")]
    pub start: Start,

    /// Output file prefix.
    #[arg(long, default_value = "hardcase")]
    pub tag: String,
}

#[derive(Debug, Serialize)]
struct Summary {
    schema_version: u32,
    command: &'static str,
    n: usize,
    alpha: f64,
    c_alpha: f64,
    contraction_per_visit: f64,
    start: Start,
    steps: usize,
    max_omega: f64,
    omega_bound: f64,
    cycling: Option<CyclingReport>,
    verified: Option<bool>,
}

pub fn execute(args: &HardcaseArgs, globals: &Globals) -> Result<()> {
    let hc = HardCase::new(args.n, args.alpha)?;
    let steps = args.steps.resolve(args.n);
    let trace = hc.run_scd(args.start, steps)?;

    output::ensure_dir(&globals.out)?;
    let csv_path = output::path(&globals.out, &args.tag, ".csv");
    let mut w = output::create(&csv_path)?;
    writeln!(w, "t,i,omega,grad_inf")?;
    for s in &trace {
        writeln!(w, "{},{},{},{}", s.t, s.index, s.omega, s.grad_inf)?;
    }
    w.flush()?;
    log::info!("wrote {}", csv_path.display());

    let max_omega = trace.iter().map(|s| s.omega).fold(0.0, f64::max);
    let (cycling, verified) = match args.start {
        Start::Worst => {
            let report = verify_cycling(&hc, steps)?;
            let ok = report.holds() && max_omega <= OMEGA_BOUND;
            (Some(report), Some(ok))
        }
        Start::Ones => (None, None),
    };
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: "hardcase",
        n: hc.n,
        alpha: hc.alpha,
        c_alpha: hc.c_alpha,
        contraction_per_visit: hc.c_alpha.powi(hc.n as i32),
        start: args.start,
        steps,
        max_omega,
        omega_bound: OMEGA_BOUND,
        cycling: cycling.clone(),
        verified,
    };
    output::write_json(&output::path(&globals.out, &args.tag, ".summary.json"), &summary)?;

    println!("c_alpha = {}, max omega = {max_omega}", hc.c_alpha);
    if let Some(report) = cycling {
        if verified == Some(false) {
            let what = match report.first_failure {
                Some(t) => format!("cycling broke at step {t}"),
                None => format!("omega reached {max_omega} > {OMEGA_BOUND}"),
            };
            return Err(VerificationFailed(what).into());
        }
        println!("cycling verified over {} sweeps", report.sweeps);
    }
    Ok(())
}
