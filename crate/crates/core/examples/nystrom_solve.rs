//! Dense Nyström solve of an interior Dirichlet problem on the star, checked
//! against the potential of exterior charges.
//!
//! cargo run --release --example nystrom_solve

use bie_direct::geometry::shapes;
use bie_direct::oracle::{self, TestProblem, DENSE_CAP};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = shapes::star_rank_case(1280)?;
    let disc = &scenario.geometry.original;
    let problem = TestProblem::new(&scenario, 3)?;
    let f = problem.boundary_data(&disc.nodes);
    let (sigma, residual) = oracle::dense_nystrom_solve(disc, &f, DENSE_CAP)?;
    println!("N = {}, LU residual {residual:.2e}", disc.len());
    println!("E = {:.2e}", problem.error(disc, &sigma)?);
    Ok(())
}
