//! Solves on a perturbed curve by updating the solver of the original curve,
//! and compares cost and accuracy with a solver built from scratch.
//!
//! cargo run --release --example perturbed_solve [N_o]

use std::time::Instant;

use bie_direct::geometry::shapes::{self, Family};
use bie_direct::hbs::{self, HbsOptions};
use bie_direct::oracle::TestProblem;
use bie_direct::update::{self, UpdateOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8000);
    let scenario = shapes::square_with_nose(n, Family::Shrinking)?;
    let pg = &scenario.geometry;
    println!("N_o = {}, N_c = {}, N_p = {}", pg.n_original(), pg.cut.len(), pg.n_added());

    // Computed once for the original curve and reused for every perturbation.
    let base = hbs::invert(&hbs::compress(&pg.original, HbsOptions::default())?)?;

    let t = Instant::now();
    let factors = update::factor_update(&base.rep, pg, UpdateOptions::default())?;
    println!("update ranks (kc, cc, op, pk) = {:?}", factors.group_sizes());
    let solver = update::build_perturbed_solver(&base, update::a_pp(pg).as_ref(), factors)?;
    let t_update = t.elapsed().as_secs_f64();

    let perturbed = pg.perturbed();
    let t = Instant::now();
    let scratch = hbs::invert(&hbs::compress(&perturbed, HbsOptions::default())?)?;
    let t_scratch = t.elapsed().as_secs_f64();

    let problem = TestProblem::new(&scenario, 1)?;
    let f = problem.boundary_data(&perturbed.nodes);
    let (f_k, f_p) = pg.split_boundary_data(&f)?;
    let x = update::solve_perturbed(&solver, &update::assemble_extended_rhs(pg, &f_k, &f_p)?)?;
    let e_update = problem.error(&perturbed, &pg.perturbed_density(&x.x))?;
    let e_scratch = problem.error(&perturbed, &scratch.solve_vec(&f)?)?;

    println!("update precompute {t_update:.3}s vs from scratch {t_scratch:.3}s (r_p = {:.2})", t_update / t_scratch);
    println!(
        "capacitance condition number {:.2e} ({:.2e} after equilibration)",
        solver.capacitance_condition()?,
        solver.capacitance_condition_equilibrated()?
    );
    println!("E (update) = {e_update:.2e}, E (scratch) = {e_scratch:.2e}");
    Ok(())
}
