//! Shared generators and the end-to-end update pipeline used by the
//! integration tests.
#![allow(dead_code)]

use bie_direct::geometry::shapes::Scenario;
use bie_direct::geometry::Point;
use bie_direct::hbs::{self, HbsOptions, HbsSolver};
use bie_direct::oracle::{self, TestProblem, DENSE_CAP};
use bie_direct::update::{self, UpdateOptions};
use faer::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `log |x_i - y_j|` between two random clusters with centers `sep` apart.
/// Numerically low rank with a rank that grows as `sep` shrinks.
pub fn separated_log_kernel(rng: &mut ChaCha8Rng, m: usize, n: usize, sep: f64) -> Mat<f64> {
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let shift = Point::new(sep * angle.cos(), sep * angle.sin());
    let mut cluster = |c: Point| -> Vec<Point> {
        (0..)
            .map(|_| Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .filter(|p| p.norm() <= 1.0)
            .take(if c.norm() == 0.0 { m } else { n })
            .map(|p| p + c)
            .collect()
    };
    let x = cluster(Point::new(0.0, 0.0));
    let y = cluster(shift);
    Mat::from_fn(m, n, |i, j| x[i].dist(y[j]).ln())
}

/// Random matrix with prescribed singular values `s_i = decay^i`, built from
/// random orthogonal factors.
pub fn graded_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, decay: f64) -> Mat<f64> {
    let k = m.min(n);
    let u = random_orthonormal(rng, m, k);
    let v = random_orthonormal(rng, n, k);
    let s = Mat::from_fn(k, k, |i, j| if i == j { decay.powi(i as i32) } else { 0.0 });
    &u * &s * v.transpose()
}

fn random_orthonormal(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Mat<f64> {
    let g = Mat::from_fn(m, k, |_, _| rng.gen_range(-1.0..1.0));
    g.qr().compute_thin_Q()
}

/// Smallest `k` with `sqrt(sum_{i >= k} s_i^2) <= tol * ||W||_F`.
pub fn svd_frobenius_rank(w: &Mat<f64>, tol: f64) -> usize {
    let s = oracle::singular_values(w).unwrap();
    let total: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut tail: f64 = 0.0;
    let mut k = s.len();
    for (i, v) in s.iter().enumerate().rev() {
        tail += v * v;
        if tail.sqrt() > tol * total {
            break;
        }
        k = i;
    }
    k
}

/// Accuracy of the update solver on one scenario.
pub struct PipelineReport {
    pub n_extended: usize,
    /// Relative 2-norm difference to the dense extended solve.
    pub vs_dense: f64,
    /// Relative residual of the recovered density on the perturbed system.
    pub residual: f64,
    pub e: f64,
}

pub fn base_solver(s: &Scenario) -> HbsSolver {
    hbs::invert(&hbs::compress(&s.geometry.original, HbsOptions::default()).unwrap()).unwrap()
}

pub fn run_pipeline(s: &Scenario, opts: UpdateOptions) -> PipelineReport {
    let pg = &s.geometry;
    let base = base_solver(s);
    let factors = update::factor_update(&base.rep, pg, opts).unwrap();
    let solver = update::build_perturbed_solver(&base, update::a_pp(pg).as_ref(), factors).unwrap();
    let perturbed = pg.perturbed();
    let problem = TestProblem::new(s, 5).unwrap();
    let f = problem.boundary_data(&perturbed.nodes);
    let (f_k, f_p) = pg.split_boundary_data(&f).unwrap();
    let f_ext = update::assemble_extended_rhs(pg, &f_k, &f_p).unwrap();
    let x = update::solve_perturbed(&solver, &f_ext).unwrap();
    let (dense, _) = oracle::dense_extended_solve(pg, &f_ext, DENSE_CAP).unwrap();
    let sigma = pg.perturbed_density(&x.x);
    PipelineReport {
        n_extended: pg.n_extended(),
        vs_dense: oracle::relative_error(&dense, &x.x).unwrap(),
        residual: oracle::perturbed_residual(&perturbed, &sigma, &f, DENSE_CAP).unwrap(),
        e: problem.error(&perturbed, &sigma).unwrap(),
    }
}
