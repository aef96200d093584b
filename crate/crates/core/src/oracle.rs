//! Dense reference solutions and error metrics.
//!
//! Everything here is assembled from kernel primitives only, so it can
//! arbitrate the compressed and updated solvers.

use std::io::Write;

use faer::Mat;

use crate::error::{Error, Result};
use crate::geometry::{Discretization, PerturbedGeometry, Point, Scenario};
use crate::kernel::{self, ChargeSet, Cross, KernelBlock, Nystrom};
use crate::linalg::{self, Lu};

/// Largest system the dense oracles will factor by default.
pub const DENSE_CAP: usize = 4000;

/// Number of interior targets in the error metric.
pub const TARGET_COUNT: usize = 10;
/// Number of exterior charges generating the reference solution.
pub const CHARGE_COUNT: usize = 10;

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    Ok(())
}

/// Dense extended matrix on `[σ_o; σ_p]`, assembled block by block.
///
/// The `c` rows read `A_ck σ_k + diag(A_cc) σ_c + A_cp σ_p = 0`; the `k` and
/// `p` rows hold the perturbed system with zero `c` columns.
pub fn dense_extended_matrix(pg: &PerturbedGeometry, cap: usize) -> Result<Mat<f64>> {
    let (no, np) = (pg.n_original(), pg.n_added());
    check_cap(no + np, cap)?;
    let a = Nystrom::new(&pg.original);
    let mut m = Mat::<f64>::zeros(no + np, no + np);
    for &i in &pg.kept {
        for &j in &pg.kept {
            m[(i, j)] = a.entry(i, j);
        }
    }
    for &i in &pg.cut {
        for &j in &pg.kept {
            m[(i, j)] = a.entry(i, j);
        }
        m[(i, i)] = a.entry(i, i);
    }
    if np > 0 {
        let op = Cross::new(&pg.original, &pg.added)?;
        let po = Cross::new(&pg.added, &pg.original)?;
        for i in 0..no {
            for j in 0..np {
                m[(i, no + j)] = op.entry(i, j);
            }
        }
        for i in 0..np {
            for &j in &pg.kept {
                m[(no + i, j)] = po.entry(i, j);
            }
        }
        let pp = Nystrom::new(&pg.added);
        for i in 0..np {
            for j in 0..np {
                m[(no + i, no + j)] = pp.entry(i, j);
            }
        }
    }
    Ok(m)
}

/// Dense solution of the extended system, with its relative LU residual.
pub fn dense_extended_solve(pg: &PerturbedGeometry, f_ext: &[f64], cap: usize) -> Result<(Vec<f64>, f64)> {
    if f_ext.len() != pg.n_extended() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side of length {} for N_ext = {}",
            f_ext.len(),
            pg.n_extended()
        )));
    }
    let m = dense_extended_matrix(pg, cap)?;
    dense_solve(&m, f_ext)
}

/// Dense Nyström solve on a closed discretization, with its relative residual.
pub fn dense_nystrom_solve(disc: &Discretization, f: &[f64], cap: usize) -> Result<(Vec<f64>, f64)> {
    check_cap(disc.len(), cap)?;
    if f.len() != disc.len() {
        return Err(Error::DimensionMismatch(format!("{} values for {} nodes", f.len(), disc.len())));
    }
    dense_solve(&Nystrom::new(disc).dense(), f)
}

fn dense_solve(m: &Mat<f64>, f: &[f64]) -> Result<(Vec<f64>, f64)> {
    let lu = Lu::new(m.as_ref(), None, "dense system")?;
    let b = linalg::column(f);
    let x = lu.solve(b.as_ref());
    let res = linalg::frobenius((m * &x - &b).as_ref()) / linalg::frobenius(b.as_ref()).max(f64::MIN_POSITIVE);
    Ok((linalg::to_vec(x.as_ref()), res))
}

/// Relative residual `|A σ - f| / |f|` of the perturbed Nyström system on
/// `Γ_k ∪ Γ_p`, given densities in curve order.
pub fn perturbed_residual(perturbed: &Discretization, sigma: &[f64], f: &[f64], cap: usize) -> Result<f64> {
    check_cap(perturbed.len(), cap)?;
    let a = Nystrom::new(perturbed).dense();
    let r = &a * linalg::column(sigma) - linalg::column(f);
    Ok(linalg::frobenius(r.as_ref()) / linalg::norm2(f))
}

/// Singular values of `m`, largest first.
pub fn singular_values(m: &Mat<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = m
        .singular_values()
        .map_err(|e| Error::Singular(format!("SVD did not converge: {e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Number of singular values strictly above `eps` (absolute threshold).
pub fn svd_rank(m: &Mat<f64>, eps: f64) -> Result<usize> {
    Ok(singular_values(m)?.iter().filter(|&&s| s > eps).count())
}

/// Number of singular values above `eps` times the largest.
pub fn svd_rank_relative(m: &Mat<f64>, eps: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let top = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&v| v > eps * top).count())
}

/// `E = |u_exact - u_new| / |u_exact|`.
pub fn relative_error(u_exact: &[f64], u_new: &[f64]) -> Result<f64> {
    if u_exact.len() != u_new.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} exact values against {} computed",
            u_exact.len(),
            u_new.len()
        )));
    }
    let den = linalg::norm2(u_exact);
    if den == 0.0 {
        return Err(Error::InvalidArgument("exact solution is zero at every target".into()));
    }
    let num = u_exact.iter().zip(u_new).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Harmonic test data for an interior Dirichlet problem: charges outside the
/// perturbed curve and targets well inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct TestProblem {
    pub charges: ChargeSet,
    pub targets: Vec<Point>,
}

impl TestProblem {
    /// Charges on a circle at twice the bounding radius and targets on a circle
    /// at half of it, which must lie inside both curves.
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self> {
        let center = Point::new(0.0, 0.0);
        let r = scenario.bounding_radius();
        let charges = ChargeSet::on_circle(center, 2.0 * r, CHARGE_COUNT, seed);
        charges.check_exterior(&scenario.geometry.perturbed())?;
        if 0.5 * r >= scenario.inner_radius() {
            return Err(Error::InvalidArgument(format!(
                "target circle of radius {} is not inside the curve (inner radius {})",
                0.5 * r,
                scenario.inner_radius()
            )));
        }
        let targets = kernel::circle_points(center, 0.5 * r, TARGET_COUNT);
        Ok(Self { charges, targets })
    }

    /// Dirichlet data at the given nodes.
    pub fn boundary_data(&self, nodes: &[Point]) -> Vec<f64> {
        kernel::exact_solution(&self.charges, nodes)
    }

    pub fn exact(&self) -> Vec<f64> {
        kernel::exact_solution(&self.charges, &self.targets)
    }

    /// `E` for a density on `disc`.
    pub fn error(&self, disc: &Discretization, sigma: &[f64]) -> Result<f64> {
        let u = kernel::eval_potential(disc, sigma, &self.targets)?;
        if u.near_boundary.iter().any(|&b| b) {
            return Err(Error::InvalidArgument("a target is too close to the boundary".into()));
        }
        relative_error(&self.exact(), &u.values)
    }
}

/// Accuracy and rank summary of one solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub e: f64,
    /// Relative residual against the dense extended system, when formed.
    pub extended_residual: Option<f64>,
    /// Relative difference to the dense extended solution, when formed.
    pub oracle_difference: Option<f64>,
    pub k0: usize,
    pub k: usize,
    pub k_opt: Option<usize>,
    pub k_opt_relative: Option<usize>,
}

impl ErrorReport {
    pub const HEADER: &'static str = "E,extended_residual,oracle_difference,k0,k,k_opt,k_opt_relative";

    /// Ranks violating `k_opt <= k <= k0`, for reporting.
    pub fn rank_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.k > self.k0 {
            out.push(format!("k = {} exceeds k0 = {}", self.k, self.k0));
        }
        if let Some(opt) = self.k_opt.filter(|&o| o > self.k) {
            out.push(format!("k_opt = {opt} exceeds k = {}", self.k));
        }
        out
    }

    pub fn write_csv_row<W: Write>(&self, mut out: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        let opt_n = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{:.6e},{},{},{},{},{},{}",
            self.e,
            opt(self.extended_residual),
            opt(self.oracle_difference),
            self.k0,
            self.k,
            opt_n(self.k_opt),
            opt_n(self.k_opt_relative)
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_basics() {
        let u = [1.0, -2.0, 0.5];
        assert_eq!(relative_error(&u, &u).unwrap(), 0.0);
        let twice: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        assert!((relative_error(&u, &twice).unwrap() - 1.0).abs() < 1e-15);
        assert!(relative_error(&[0.0], &[1.0]).is_err());
        assert!(relative_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn svd_rank_basics() {
        assert_eq!(svd_rank(&Mat::zeros(5, 4), 1e-10).unwrap(), 0);
        assert_eq!(svd_rank(&Mat::identity(7, 7), 1e-10).unwrap(), 7);
        let u = Mat::from_fn(6, 1, |i, _| i as f64 + 1.0);
        let v = Mat::from_fn(1, 5, |_, j| 1.0 / (j as f64 + 1.0));
        assert_eq!(svd_rank(&(&u * &v), 1e-10).unwrap(), 1);
    }

    #[test]
    fn cap_enforced() {
        let s = crate::geometry::shapes::circle_with_bump(4000, crate::geometry::Family::Shrinking).unwrap();
        assert!(matches!(
            dense_extended_matrix(&s.geometry, DENSE_CAP),
            Err(Error::TooLarge { .. })
        ));
    }
}
