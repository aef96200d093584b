//! Compares the update solver with a dense solve of the extended system and
//! with the directly assembled perturbed system, on every scenario.
//!
//! cargo run --release --example oracle_check

use bie_direct::geometry::shapes::{self, Family};
use bie_direct::hbs::{self, HbsOptions};
use bie_direct::oracle::{self, TestProblem, DENSE_CAP};
use bie_direct::update::{self, UpdateOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenarios = [
        shapes::circle_with_bump(2000, Family::Shrinking)?,
        shapes::square_with_nose(1600, Family::Shrinking)?,
        shapes::square_with_nose(2000, Family::Fixed)?,
        shapes::star_with_refined_panels(1)?,
        shapes::circle_identity(1024)?,
    ];
    println!("{:<15} {:>6} {:>12} {:>12} {:>10}", "scenario", "N_ext", "vs dense", "residual", "E");
    for s in &scenarios {
        let pg = &s.geometry;
        let base = hbs::invert(&hbs::compress(&pg.original, HbsOptions::default())?)?;
        let factors = update::factor_update(&base.rep, pg, UpdateOptions::default())?;
        let solver = update::build_perturbed_solver(&base, update::a_pp(pg).as_ref(), factors)?;

        let perturbed = pg.perturbed();
        let problem = TestProblem::new(s, 5)?;
        let f = problem.boundary_data(&perturbed.nodes);
        let (f_k, f_p) = pg.split_boundary_data(&f)?;
        let f_ext = update::assemble_extended_rhs(pg, &f_k, &f_p)?;
        let x = update::solve_perturbed(&solver, &f_ext)?;
        let (dense, _) = oracle::dense_extended_solve(pg, &f_ext, DENSE_CAP)?;
        let sigma = pg.perturbed_density(&x.x);
        println!(
            "{:<15} {:>6} {:>12.2e} {:>12.2e} {:>10.2e}",
            s.name,
            pg.n_extended(),
            oracle::relative_error(&dense, &x.x)?,
            oracle::perturbed_residual(&perturbed, &sigma, &f, DENSE_CAP)?,
            problem.error(&perturbed, &sigma)?
        );
    }
    Ok(())
}
