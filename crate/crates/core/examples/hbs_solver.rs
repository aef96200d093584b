//! Compresses a Nyström matrix into HBS form, checks the fast apply and the
//! inverse against dense algebra, and round-trips the solver through a file.
//!
//! cargo run --release --example hbs_solver [N]

use std::time::Instant;

use bie_direct::geometry::shapes::{self, Family};
use bie_direct::hbs::{self, HbsOptions};
use bie_direct::kernel::{KernelBlock, Nystrom};
use bie_direct::{io, linalg};
use faer::Mat;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3200);
    let disc = shapes::circle_with_bump(n, Family::Shrinking)?.geometry.perturbed();
    let start = Instant::now();
    let rep = hbs::compress(&disc, HbsOptions::default())?;
    let solver = hbs::invert(&rep)?;
    println!(
        "N = {}: compress + invert {:.3}s, max rank {}, {} stored entries",
        disc.len(),
        start.elapsed().as_secs_f64(),
        rep.max_rank(),
        rep.stored_entries()
    );

    let x = Mat::from_fn(disc.len(), 1, |i, _| (i as f64 * 0.37).sin());
    let a = Nystrom::new(&disc).dense();
    let dense = &a * &x;
    let fast = hbs::apply_hbs(&rep, x.as_ref())?;
    let rel = |m: Mat<f64>| linalg::frobenius(m.as_ref()) / linalg::frobenius(dense.as_ref());
    println!("apply error {:.2e}", rel(&fast - &dense));
    let y = solver.solve(dense.as_ref())?;
    println!("inverse residual {:.2e}", rel(&a * &y - &dense));

    let path = std::env::temp_dir().join("bie_hbs_solver.bin");
    io::save_hbs_solver(&solver, &path)?;
    let loaded = io::load_hbs_solver(&path)?;
    let again = loaded.solve(dense.as_ref())?;
    println!("reloaded solver agrees: {}", again == y);
    std::fs::remove_file(path)?;
    Ok(())
}
