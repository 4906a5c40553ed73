use std::io::Write;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use ascd_core::data::{generate_synthetic, write_svmlight, SynthConfig};

use crate::output::{self, SCHEMA_VERSION};
use crate::Globals;

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Rows `d`.
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,

    /// Columns `n`.
    #[arg(long, default_value_t = 1000)]
    pub cols: usize,

    #[arg(long, default_value_t = 10.0)]
    pub column_scale: f64,

    /// Entries are kept with probability `min(1, factor·ln(n)/n)`.
    #[arg(long, default_value_t = 10.0)]
    pub sparsity_factor: f64,

    /// Fraction of non-zeros in the planted solution.
    #[arg(long, default_value_t = 0.1)]
    pub planted_fraction: f64,

    /// Standard deviation of the target noise.
    #[arg(long, default_value_t = 0.1)]
    pub noise_std: f64,

    /// Output file prefix.
    #[arg(long, default_value = "synthetic")]
    pub tag: String,
}

#[derive(Debug, Serialize)]
struct Sidecar {
    schema_version: u32,
    command: &'static str,
    file: String,
    config: SynthConfig,
    keep_probability: f64,
    nnz: usize,
}

pub fn execute(args: &GenerateArgs, globals: &Globals) -> Result<()> {
    let config = SynthConfig {
        column_scale_factor: args.column_scale,
        sparsity_factor: args.sparsity_factor,
        planted_fraction: args.planted_fraction,
        noise_std: args.noise_std,
        ..SynthConfig::new(args.rows, args.cols, globals.seed)
    };
    config.validate()?;
    let (matrix, target) = generate_synthetic(&config)?;

    output::ensure_dir(&globals.out)?;
    let file = format!("{}.svm", args.tag);
    let data_path = globals.out.join(&file);
    let mut w = output::create(&data_path)?;
    write_svmlight(&mut w, &matrix, &target)?;
    w.flush()?;
    log::info!("wrote {}", data_path.display());

    let sidecar = Sidecar {
        schema_version: SCHEMA_VERSION,
        command: "generate",
        file,
        keep_probability: config.keep_probability(),
        nnz: matrix.nnz(),
        config,
    };
    output::write_json(&output::path(&globals.out, &args.tag, ".json"), &sidecar)?;
    println!("{} x {} matrix with {} non-zeros", matrix.n_rows(), matrix.n_cols(), sidecar.nnz);
    Ok(())
}
