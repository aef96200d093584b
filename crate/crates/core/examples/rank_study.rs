//! Ranks of the kept-cut interaction on the star: the stacked skeleton `k0`
//! from reused HBS bases, the recompressed rank `k`, and the SVD rank.
//!
//! cargo run --release --example rank_study

use bie_direct::geometry::shapes;
use bie_direct::hbs::{self, HbsOptions};
use bie_direct::kernel::{Cross, KernelBlock};
use bie_direct::oracle;
use bie_direct::update;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 1e-10;
    println!("{:>6} {:>6} {:>5} {:>5} {:>5} {:>10}", "N_k", "N_c", "k0", "k", "k_opt", "error");
    for n in [1280, 5120, 20480] {
        let pg = shapes::star_rank_case(n)?.geometry;
        let rep = hbs::compress(&pg.original, HbsOptions::default())?;
        let kc = update::factor_a_kc(&rep, &pg, eps)?;
        let (kd, cd) = (pg.original.subset(&pg.kept), pg.original.subset(&pg.cut));
        let dense = Cross::new(&kd, &cd)?.dense();
        println!(
            "{:>6} {:>6} {:>5} {:>5} {:>5} {:>10.2e}",
            pg.kept.len(),
            pg.cut.len(),
            kc.k0,
            kc.rank(),
            oracle::svd_rank(&dense, eps)?,
            update::block_error(&kc, &dense)
        );
    }
    Ok(())
}
