//! Contracts of the update factorization and the perturbed solver, checked
//! against dense blocks assembled directly from the kernel.

mod common;

use bie_direct::bench::{self, Experiment, ExperimentConfig};
use bie_direct::geometry::shapes::{self, Family, Scenario};
use bie_direct::io;
use bie_direct::kernel::{Cross, KernelBlock, Nystrom};
use bie_direct::linalg;
use bie_direct::oracle::{self, DENSE_CAP};
use bie_direct::update::{self, UpdateOptions};
use bie_direct::Error;
use faer::Mat;

const EPS: f64 = 1e-10;

fn rel_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    linalg::frobenius((a - b).as_ref()) / linalg::frobenius(b.as_ref())
}

/// Dense `blockdiag(A_oo, A_pp)`.
fn blockdiag(s: &Scenario) -> Mat<f64> {
    let pg = &s.geometry;
    let (no, np) = (pg.n_original(), pg.n_added());
    let mut m = Mat::<f64>::zeros(no + np, no + np);
    m.submatrix_mut(0, 0, no, no).copy_from(Nystrom::new(&pg.original).dense());
    m.submatrix_mut(no, no, np, np).copy_from(update::a_pp(pg));
    m
}

#[test]
fn bump_blocks_match_dense_and_svd_ranks() {
    let s = shapes::circle_with_bump(4000, Family::Shrinking).unwrap();
    let pg = &s.geometry;
    let rep = common::base_solver(&s).rep;
    let uf = update::factor_update(&rep, pg, UpdateOptions::default()).unwrap();
    let (kept, cut) = (pg.original.subset(&pg.kept), pg.original.subset(&pg.cut));
    let blocks = [
        ("A_kc", &uf.kc, Cross::new(&kept, &cut).unwrap().dense()),
        ("A_op", &uf.op, Cross::new(&pg.original, &pg.added).unwrap().dense()),
        ("A_pk", &uf.pk, Cross::new(&pg.added, &kept).unwrap().dense()),
    ];
    for (name, f, dense) in blocks {
        let err = update::block_error(f, &dense);
        let svd = common::svd_frobenius_rank(&dense, EPS);
        assert!(err <= 10.0 * EPS, "{name}: relative error {err:e}");
        assert!(
            f.rank().abs_diff(svd) <= 5,
            "{name}: rank {} against SVD eps-rank {svd}",
            f.rank()
        );
    }
}

#[test]
fn lr_reproduces_the_extended_update() {
    let s = shapes::circle_with_bump(2000, Family::Shrinking).unwrap();
    let pg = &s.geometry;
    let rep = common::base_solver(&s).rep;
    let uf = update::factor_update(&rep, pg, UpdateOptions::default()).unwrap();
    assert_eq!(uf.rank(), uf.group_sizes().iter().sum::<usize>());
    let q = oracle::dense_extended_matrix(pg, DENSE_CAP).unwrap() - blockdiag(&s);
    let lr = uf.dense_l() * uf.dense_r();
    let err = rel_diff(&lr, &q);
    assert!(err <= 1e-9, "||Q - LR|| / ||Q|| = {err:e}");
}

#[test]
fn z_columns_solve_the_block_diagonal_system() {
    let s = shapes::square_with_nose(1600, Family::Shrinking).unwrap();
    let pg = &s.geometry;
    let base = common::base_solver(&s);
    let uf = update::factor_update(&base.rep, pg, UpdateOptions::default()).unwrap();
    let l = uf.dense_l();
    let ps = update::build_perturbed_solver(&base, update::a_pp(pg).as_ref(), uf).unwrap();
    // Z = blockdiag(Z_o, Z_p) in the column order of L.
    let (no, np) = (pg.n_original(), pg.n_added());
    let (m, d) = (ps.z_o.ncols(), ps.z_p.ncols());
    let mut z = Mat::<f64>::zeros(no + np, m + d);
    z.submatrix_mut(0, 0, no, m).copy_from(&ps.z_o);
    z.submatrix_mut(no, m, np, d).copy_from(&ps.z_p);
    let err = rel_diff(&(blockdiag(&s) * &z), &l);
    assert!(err <= 1e-8, "A Z vs L: {err:e}");
}

#[test]
fn capacitance_matrix_is_well_conditioned_up_to_scaling() {
    for n in [2000, 8000] {
        let s = shapes::circle_with_bump(n, Family::Shrinking).unwrap();
        let base = common::base_solver(&s);
        let pg = &s.geometry;
        let uf = update::factor_update(&base.rep, pg, UpdateOptions::default()).unwrap();
        let ps = update::build_perturbed_solver(&base, update::a_pp(pg).as_ref(), uf).unwrap();
        let raw = ps.capacitance_condition().unwrap();
        let scaled = ps.capacitance_condition_equilibrated().unwrap();
        if n == 2000 {
            assert!(raw <= 1e6, "cond(C) = {raw:e} at N_o = {n}");
        }
        assert!(scaled <= 1e3, "equilibrated cond(C) = {scaled:e} at N_o = {n}");
    }
}

#[test]
fn solutions_match_dense_extended_solve() {
    let cases = [
        shapes::circle_with_bump(2000, Family::Shrinking).unwrap(),
        shapes::square_with_nose(2000, Family::Fixed).unwrap(),
    ];
    for s in &cases {
        let r = common::run_pipeline(s, UpdateOptions::default());
        assert!(r.vs_dense <= 1e-8, "{}: vs dense {:e}", s.name, r.vs_dense);
        assert!(r.residual <= 1e-8, "{}: residual {:e}", s.name, r.residual);
        assert!(r.e <= 1e-8, "{}: E = {:e}", s.name, r.e);
    }
}

#[test]
fn identity_perturbation_reduces_to_the_original_solve() {
    let s = shapes::circle_identity(1024).unwrap();
    let pg = &s.geometry;
    let base = common::base_solver(&s);
    let uf = update::factor_update(&base.rep, pg, UpdateOptions::default()).unwrap();
    assert_eq!(uf.rank(), 0);
    let ps = update::build_perturbed_solver(&base, update::a_pp(pg).as_ref(), uf).unwrap();
    let f: Vec<f64> = (0..pg.n_original()).map(|i| (i as f64 * 0.37).sin()).collect();
    let f_ext = update::assemble_extended_rhs(pg, &f, &[]).unwrap();
    let x = update::solve_perturbed(&ps, &f_ext).unwrap();
    assert_eq!(x.x, base.solve_vec(&f).unwrap());
    assert!(x.sigma_c.is_empty() && x.sigma_p.is_empty());
}

#[test]
fn extended_rhs_layout() {
    let pg = shapes::circle_with_bump(2000, Family::Shrinking).unwrap().geometry;
    let zero = update::assemble_extended_rhs(&pg, &vec![0.0; pg.kept.len()], &vec![0.0; pg.n_added()]).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
    let f_k: Vec<f64> = (1..=pg.kept.len()).map(|i| i as f64).collect();
    let f_p: Vec<f64> = (1..=pg.n_added()).map(|i| -(i as f64)).collect();
    let f = update::assemble_extended_rhs(&pg, &f_k, &f_p).unwrap();
    assert_eq!(f.len(), pg.n_extended());
    assert!(pg.cut.iter().all(|&i| f[i] == 0.0));
    assert!(pg.kept.iter().all(|&i| f[i] > 0.0));
    assert_eq!(&f[pg.n_original()..], &f_p[..]);
    assert!(matches!(
        update::assemble_extended_rhs(&pg, &f_k[1..], &f_p),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn combined_traversal_gives_the_same_factors() {
    let s = shapes::square_with_nose(1600, Family::Shrinking).unwrap();
    let rep = common::base_solver(&s).rep;
    let separate = update::factor_update(&rep, &s.geometry, UpdateOptions::default()).unwrap();
    let opts = UpdateOptions {
        combined_traversal: true,
        ..UpdateOptions::default()
    };
    let combined = update::factor_update(&rep, &s.geometry, opts).unwrap();
    for (a, b) in [(&separate.op, &combined.op), (&separate.pk, &combined.pk)] {
        assert_eq!(a.skeleton, b.skeleton);
        assert_eq!(a.l, b.l);
        assert_eq!(a.r, b.r);
    }
}

#[test]
fn factors_are_tied_to_their_geometry() {
    let a = shapes::circle_with_bump(2000, Family::Shrinking).unwrap();
    let b = shapes::circle_with_bump(2000, Family::Fixed).unwrap();
    let rep = common::base_solver(&a).rep;
    let uf = update::factor_update(&rep, &a.geometry, UpdateOptions::default()).unwrap();
    uf.check(&a.geometry).unwrap();
    assert!(matches!(uf.check(&b.geometry), Err(Error::GeometryMismatch(_))));

    // A base solver of the wrong size is refused.
    let other = common::base_solver(&shapes::circle_with_bump(2400, Family::Shrinking).unwrap());
    let app = update::a_pp(&a.geometry);
    assert!(matches!(
        update::build_perturbed_solver(&other, app.as_ref(), uf.clone()),
        Err(Error::GeometryMismatch(_))
    ));
    let bad_app = Mat::<f64>::zeros(3, 3);
    let base = common::base_solver(&a);
    assert!(matches!(
        update::build_perturbed_solver(&base, bad_app.as_ref(), uf),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn wrong_length_right_hand_side_is_refused() {
    let s = shapes::circle_with_bump(2000, Family::Shrinking).unwrap();
    let base = common::base_solver(&s);
    let uf = update::factor_update(&base.rep, &s.geometry, UpdateOptions::default()).unwrap();
    let ps = update::build_perturbed_solver(&base, update::a_pp(&s.geometry).as_ref(), uf).unwrap();
    assert!(matches!(
        update::solve_perturbed(&ps, &[1.0; 10]),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn added_nodes_on_top_of_cut_nodes_are_refused() {
    let s = shapes::circle_with_bump_trapezoid(1000, 0.5).unwrap();
    let base = common::base_solver(&s);
    assert!(matches!(
        update::factor_update(&base.rep, &s.geometry, UpdateOptions::default()),
        Err(Error::CoincidentPoints { .. })
    ));
    // The perturbed curve itself is fine for a dense solve.
    assert!(s.geometry.perturbed().len() == s.geometry.original.len());
}

#[test]
fn stored_solver_reproduces_solutions_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let s = shapes::square_with_nose(1600, Family::Shrinking).unwrap();
    let pg = &s.geometry;
    let base = common::base_solver(&s);
    let base_path = dir.path().join("base.bin");
    io::save_hbs_solver(&base, &base_path).unwrap();
    let loaded_base = io::load_hbs_solver(&base_path).unwrap();

    let uf = update::factor_update(&base.rep, pg, UpdateOptions::default()).unwrap();
    let uf_path = dir.path().join("factors.bin");
    io::save_update_factors(&uf, &uf_path).unwrap();
    let uf_loaded = io::load_update_factors(&uf_path).unwrap();
    uf_loaded.check(pg).unwrap();
    assert_eq!(uf_loaded.dense_l(), uf.dense_l());
    assert_eq!(uf_loaded.dense_r(), uf.dense_r());

    let ps = update::build_perturbed_solver(&base, update::a_pp(pg).as_ref(), uf).unwrap();
    let ps_path = dir.path().join("solver.bin");
    io::save_perturbed_solver(&ps, &ps_path).unwrap();
    let restored = io::load_perturbed_solver(&loaded_base, &ps_path).unwrap();

    let f: Vec<f64> = (0..pg.n_extended()).map(|i| (i as f64 * 0.11).cos()).collect();
    let f_ext = {
        let (f_k, f_p) = pg.split_boundary_data(&pg.perturbed_density(&f)).unwrap();
        update::assemble_extended_rhs(pg, &f_k, &f_p).unwrap()
    };
    let x = update::solve_perturbed(&ps, &f_ext).unwrap();
    let y = update::solve_perturbed(&restored, &f_ext).unwrap();
    assert_eq!(x, y);

    // Truncated files are rejected rather than misread.
    let bytes = std::fs::read(&ps_path).unwrap();
    std::fs::write(&ps_path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(io::load_perturbed_solver(&loaded_base, &ps_path).is_err());
}

#[test]
fn bench_rows_are_deterministic_apart_from_timings() {
    let mut cfg = ExperimentConfig::new(Experiment::StarRefine);
    cfg.repetitions = 3;
    let a = bench::run_point(&cfg, 96).unwrap();
    let b = bench::run_point(&cfg, 96).unwrap();
    assert_eq!(a.e.to_bits(), b.e.to_bits());
    assert_eq!((a.k, a.k0, a.k_opt, a.k_total), (b.k, b.k0, b.k_opt, b.k_total));
    assert_eq!((a.n_o, a.n_p, a.n_c), (b.n_o, b.n_p, b.n_c));
    assert!(a.e <= 1e-8);
}
