//! Row interpolative decomposition of a far-field kernel block, compared with
//! the SVD rank at the same tolerance.
//!
//! cargo run --release --example interpolative_decomposition [eps]

use bie_direct::geometry::shapes;
use bie_direct::kernel::{Cross, KernelBlock};
use bie_direct::linalg;
use bie_direct::lowrank::{row_id, IdOptions};
use bie_direct::oracle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1e-10);
    let disc = shapes::star_rank_case(2560)?.geometry.original;
    // One arc against the opposite half of the curve.
    let near: Vec<usize> = (0..160).collect();
    let far: Vec<usize> = (1000..2200).collect();
    let w = Cross::new(&disc.subset(&near), &disc.subset(&far))?.dense();
    let id = row_id(w.as_ref(), IdOptions::tol(eps))?;
    let recon = &id.interp * linalg::select_rows(w.as_ref(), &id.skeleton);
    let err = linalg::frobenius((recon - &w).as_ref()) / linalg::frobenius(w.as_ref());
    println!("block {}x{}, eps = {eps:e}", w.nrows(), w.ncols());
    println!("ID rank {} (SVD rank {}), relative error {err:.2e}", id.rank(), oracle::svd_rank_relative(&w, eps)?);
    println!("first skeleton rows: {:?}", &id.skeleton[..id.rank().min(8)]);
    Ok(())
}
