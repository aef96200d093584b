//! Builds every perturbation scenario, checks the Gauss identity on the
//! perturbed curve and exports one discretization as CSV.
//!
//! cargo run --release --example geometry [N_o] [out.csv]

use std::fs::File;

use bie_direct::geometry::shapes::{self, Family};
use bie_direct::kernel::{KernelBlock, Nystrom};

/// `max_i |(A 1)_i + 1|`, row by row so large `N` fits in memory.
fn gauss_defect(disc: &bie_direct::geometry::Discretization) -> f64 {
    let a = Nystrom::new(disc);
    (0..a.nrows())
        .map(|i| ((0..a.ncols()).map(|j| a.entry(i, j)).sum::<f64>() + 1.0).abs())
        .fold(0.0, f64::max)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let scenarios = [
        shapes::circle_with_bump(n, Family::Shrinking)?,
        shapes::circle_with_bump(n, Family::Fixed)?,
        shapes::square_with_nose(n, Family::Shrinking)?,
        shapes::square_with_nose(n, Family::Fixed)?,
        shapes::star_with_refined_panels(2)?,
    ];
    println!("{:<15} {:>6} {:>5} {:>5} {:>10}", "scenario", "N_o", "N_c", "N_p", "|A1 + 1|");
    for s in &scenarios {
        let pg = &s.geometry;
        println!(
            "{:<15} {:>6} {:>5} {:>5} {:>10.2e}",
            s.name,
            pg.n_original(),
            pg.cut.len(),
            pg.n_added(),
            gauss_defect(&pg.perturbed())
        );
    }
    if let Some(path) = args.next() {
        scenarios[0].geometry.perturbed().write_csv(File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
