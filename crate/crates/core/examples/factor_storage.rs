//! Stores the original solver and one perturbation's update on disk, then
//! reloads both and solves again. Also prints the manifest saying which stored
//! parts a new perturbation invalidates.
//!
//! cargo run --release --example factor_storage

use bie_direct::geometry::shapes::{self, Family};
use bie_direct::hbs::{self, HbsOptions};
use bie_direct::io;
use bie_direct::update::{self, UpdateOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let pg = shapes::circle_with_bump(4000, Family::Shrinking)?.geometry;
    let base = hbs::invert(&hbs::compress(&pg.original, HbsOptions::default())?)?;
    let factors = update::factor_update(&base.rep, &pg, UpdateOptions::default())?;
    let solver = update::build_perturbed_solver(&base, update::a_pp(&pg).as_ref(), factors)?;

    let (base_path, update_path) = (dir.path().join("original.bin"), dir.path().join("bump.bin"));
    io::save_hbs_solver(&base, &base_path)?;
    io::save_perturbed_solver(&solver, &update_path)?;
    for p in [&base_path, &update_path] {
        println!("{}: {} bytes", p.display(), std::fs::metadata(p)?.len());
    }

    let base2 = io::load_hbs_solver(&base_path)?;
    let solver2 = io::load_perturbed_solver(&base2, &update_path)?;
    solver2.factors.check(&pg)?;
    let f_ext: Vec<f64> = (0..pg.n_extended()).map(|i| (0.01 * i as f64).cos()).collect();
    let a = update::solve_perturbed(&solver, &f_ext)?;
    let b = update::solve_perturbed(&solver2, &f_ext)?;
    println!("reloaded solve identical: {}", a == b);

    io::write_manifest(std::io::stdout())?;
    Ok(())
}
