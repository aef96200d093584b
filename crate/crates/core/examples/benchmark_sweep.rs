//! A short sweep through the benchmark API: rows, table, scaling fit, CSV and SVG.
//! `bie-bench run` drives the same code with the full default sweeps.
//!
//! cargo run --release --example benchmark_sweep [out-dir]

use std::fs::File;
use std::path::PathBuf;

use bie_direct::bench::{self, Experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "results".into()));
    std::fs::create_dir_all(&out)?;
    let mut cfg = ExperimentConfig::new(Experiment::BumpShrinking);
    cfg.sweep = vec![2000, 4000, 8000, 16000];
    cfg.dense_oracle = true;
    let rows = bench::run_experiment(&cfg)?;
    print!("{}", bench::format_table(&rows));
    print!("{}", bench::format_fit(&bench::fit_scaling(&rows)?));
    bench::write_csv(&rows, File::create(out.join("bump-shrinking.csv"))?)?;
    std::fs::write(out.join("bump-shrinking.svg"), bench::plot_svg(&rows, "bump-shrinking")?)?;
    println!("wrote {}", out.display());
    Ok(())
}
