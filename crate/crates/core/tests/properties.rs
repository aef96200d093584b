//! Randomized invariants of the building blocks.

mod common;

use std::f64::consts::TAU;

use bie_direct::bench;
use bie_direct::geometry::shapes::{self, Family, PANEL_ORDER};
use bie_direct::geometry::{discretize_panels, uniform_breakpoints, Discretization};
use bie_direct::hbs::{self, HbsOptions, Tree, MIN_LEAF_SIZE};
use bie_direct::kernel::{KernelBlock, Nystrom};
use bie_direct::linalg;
use bie_direct::lowrank::{row_id, IdOptions};
use bie_direct::update;
use faer::Mat;
use proptest::prelude::*;

fn star_disc(arms: u32, amplitude: f64, panels: usize) -> Discretization {
    let curve = shapes::star(arms, amplitude).unwrap();
    discretize_panels(&curve, &uniform_breakpoints(0.0, TAU, panels), PANEL_ORDER).unwrap()
}

fn gauss_defect(disc: &Discretization) -> f64 {
    let a = Nystrom::new(disc);
    (0..a.nrows())
        .map(|i| ((0..a.ncols()).map(|j| a.entry(i, j)).sum::<f64>() + 1.0).abs())
        .fold(0.0, f64::max)
}

fn cheap() -> ProptestConfig {
    ProptestConfig {
        cases: 6,
        ..ProptestConfig::default()
    }
}

proptest! {
    #[test]
    fn id_meets_its_tolerance(
        seed in any::<u64>(),
        m in 8usize..90,
        n in 8usize..90,
        decay in 0.2f64..0.9,
        tol_exp in 3i32..12,
    ) {
        let tol = 10f64.powi(-tol_exp);
        let w = common::graded_matrix(&mut common::rng(seed), m, n, decay);
        let id = row_id(w.as_ref(), IdOptions::tol(tol)).unwrap();
        // Residual formed independently of the decomposition's own estimate.
        let skel = linalg::select_rows(w.as_ref(), &id.skeleton);
        let res = linalg::frobenius((&w - &id.interp * &skel).as_ref());
        prop_assert!(res <= 10.0 * tol * linalg::frobenius(w.as_ref()));
        for (j, &row) in id.skeleton.iter().enumerate() {
            for c in 0..id.rank() {
                prop_assert_eq!(id.interp[(row, c)], if c == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn id_rank_is_monotone_in_tolerance(seed in any::<u64>(), sep in 2.5f64..6.0) {
        let w = common::separated_log_kernel(&mut common::rng(seed), 60, 70, sep);
        let coarse = row_id(w.as_ref(), IdOptions::tol(1e-6)).unwrap().rank();
        let fine = row_id(w.as_ref(), IdOptions::tol(1e-10)).unwrap().rank();
        prop_assert!(coarse <= fine);
    }

    #[test]
    fn tree_leaves_partition_the_index_range(n in 1usize..5000, leaf in MIN_LEAF_SIZE..200) {
        let tree = Tree::new(n, leaf).unwrap();
        let mut next = 0;
        for t in tree.leaves() {
            let r = tree.range(t);
            prop_assert_eq!(r.start, next);
            prop_assert!(r.len() <= leaf);
            next = r.end;
        }
        prop_assert_eq!(next, n);
        for t in tree.bottom_up() {
            if let Some((a, b)) = tree.children(t) {
                prop_assert_eq!(tree.range(a).start, tree.range(t).start);
                prop_assert_eq!(tree.range(a).end, tree.range(b).start);
                prop_assert_eq!(tree.range(b).end, tree.range(t).end);
            }
        }
    }

    #[test]
    fn slope_of_a_power_law_is_recovered(c in 1e-6f64..1.0, p in 0.3f64..3.0) {
        let x = [2000.0, 4000.0, 8000.0, 16000.0, 32000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| c * v.powf(p)).collect();
        prop_assert!((bench::loglog_slope(&x, &y).unwrap() - p).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(cheap())]

    #[test]
    fn gauss_identity_holds_on_random_stars(
        arms in 3u32..8,
        amplitude in 0.05f64..0.3,
        per_arm in 12usize..16,
    ) {
        let disc = star_disc(arms, amplitude, per_arm * arms as usize);
        let defect = gauss_defect(&disc);
        prop_assert!(defect <= 1e-8, "defect {:e}", defect);
    }

    #[test]
    fn hbs_apply_and_solve_match_dense(
        seed in any::<u64>(),
        arms in 3u32..7,
        panels in 40usize..90,
    ) {
        let disc = star_disc(arms, 0.25, panels);
        let rep = hbs::compress(&disc, HbsOptions::default()).unwrap();
        let solver = hbs::invert(&rep).unwrap();
        let a = Nystrom::new(&disc).dense();
        let mut rng = common::rng(seed);
        let x = Mat::from_fn(disc.len(), 2, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let y = hbs::apply_hbs(&rep, x.as_ref()).unwrap();
        let dense_y = &a * &x;
        let err = linalg::frobenius((&y - &dense_y).as_ref()) / linalg::frobenius(dense_y.as_ref());
        prop_assert!(err <= 1e-9, "apply error {:e}", err);
        let z = solver.solve(x.as_ref()).unwrap();
        let res = linalg::frobenius((&a * &z - &x).as_ref()) / linalg::frobenius(x.as_ref());
        prop_assert!(res <= 1e-8, "inverse residual {:e}", res);
    }

    #[test]
    fn boundary_data_round_trips_through_the_extended_layout(
        seed in any::<u64>(),
        panels in 100usize..200,
        fixed in any::<bool>(),
    ) {
        let family = if fixed { Family::Fixed } else { Family::Shrinking };
        let pg = shapes::circle_with_bump(panels * PANEL_ORDER, family).unwrap().geometry;
        let mut rng = common::rng(seed);
        let f: Vec<f64> = (0..pg.kept.len() + pg.n_added())
            .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
            .collect();
        let (f_k, f_p) = pg.split_boundary_data(&f).unwrap();
        let ext = update::assemble_extended_rhs(&pg, &f_k, &f_p).unwrap();
        prop_assert_eq!(pg.perturbed_density(&ext), f);
    }
}
