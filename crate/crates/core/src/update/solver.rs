use faer::{Mat, MatRef};

use super::UpdateFactors;
use crate::error::{Error, Result};
use crate::geometry::{NodeOrigin, PerturbedGeometry};
use crate::hbs::HbsSolver;
use crate::linalg::{self, Lu};

/// Columns per block when forming `Z_o` and the capacitance matrix.
const SOLVE_CHUNK: usize = 256;

/// Solver for the extended system `(blockdiag(A_oo, A_pp) + L R) x = f_ext`.
///
/// With `Z = blockdiag(A_oo, A_pp)^{-1} L` and `C = I + R Z`,
/// `x = x0 - Z C^{-1} R x0` where `x0` solves the block-diagonal system.
pub struct PerturbedSolver<'a> {
    pub base: &'a HbsSolver,
    pub factors: UpdateFactors,
    /// Dense `A_pp`, kept so the solver can be stored and refactored.
    pub a_pp: Mat<f64>,
    pub app: Option<Lu>,
    /// `A_oo^{-1}` applied to the kc, cc and op columns of `L` (`N_o x (k_kc + N_c + k_op)`).
    pub z_o: Mat<f64>,
    /// `A_pp^{-1} L_pk` (`N_p x k_pk`).
    pub z_p: Mat<f64>,
    /// `C = I + R Z`, kept for diagnostics; `k x k`.
    pub capacitance_matrix: Mat<f64>,
    pub capacitance: Option<Lu>,
}

/// Components of an extended-system solution.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedSolution {
    /// `[σ_o; σ_p]` in extended order.
    pub x: Vec<f64>,
    pub sigma_k: Vec<f64>,
    /// Auxiliary: fixed by the c rows, unused on the perturbed curve.
    pub sigma_c: Vec<f64>,
    pub sigma_p: Vec<f64>,
}

impl ExtendedSolution {
    fn split(x: Vec<f64>, uf: &UpdateFactors) -> Self {
        let no = uf.n_original;
        Self {
            sigma_k: uf.kept.iter().map(|&i| x[i]).collect(),
            sigma_c: uf.cut.iter().map(|&i| x[i]).collect(),
            sigma_p: x[no..].to_vec(),
            x,
        }
    }
}

/// `f_ext = [f_k; 0; f_p]` in extended order.
pub fn assemble_extended_rhs(pg: &PerturbedGeometry, f_k: &[f64], f_p: &[f64]) -> Result<Vec<f64>> {
    if f_k.len() != pg.kept.len() || f_p.len() != pg.n_added() {
        return Err(Error::DimensionMismatch(format!(
            "boundary data of lengths ({}, {}) for N_k = {}, N_p = {}",
            f_k.len(),
            f_p.len(),
            pg.kept.len(),
            pg.n_added()
        )));
    }
    let no = pg.n_original();
    let mut f = vec![0.0; pg.n_extended()];
    for (&i, &v) in pg.kept.iter().zip(f_k) {
        f[i] = v;
    }
    f[no..].copy_from_slice(f_p);
    Ok(f)
}

impl PerturbedGeometry {
    /// Splits data given on the perturbed curve in curve order into `(f_k, f_p)`.
    pub fn split_boundary_data(&self, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let order = self.perturbed_order();
        if f.len() != order.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} nodes",
                f.len(),
                order.len()
            )));
        }
        let mut fk = vec![0.0; self.kept.len()];
        let mut fp = vec![0.0; self.n_added()];
        let mut k = 0;
        for (o, &v) in order.iter().zip(f) {
            match *o {
                NodeOrigin::Kept(_) => {
                    fk[k] = v;
                    k += 1;
                }
                NodeOrigin::Added(j) => fp[j] = v,
            }
        }
        Ok((fk, fp))
    }
}

impl PerturbedSolver<'_> {
    pub fn n_extended(&self) -> usize {
        self.factors.n_extended()
    }

    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    /// 2-norm condition number of `C`; 1 when there is no update. Costs an
    /// SVD of `C`, so it is computed on demand rather than during the build.
    pub fn capacitance_condition(&self) -> Result<f64> {
        if self.capacitance_matrix.nrows() == 0 {
            return Ok(1.0);
        }
        linalg::condition_number(self.capacitance_matrix.as_ref())
    }

    /// Condition number of `C` after row and column equilibration. Rows of `R`
    /// carry quadrature weights while `L` is O(1), so the raw number grows with
    /// `N_o` through scaling alone; this one does not.
    pub fn capacitance_condition_equilibrated(&self) -> Result<f64> {
        linalg::condition_number(linalg::equilibrate(self.capacitance_matrix.as_ref()).as_ref())
    }

    /// `R [x_o; x_p]` with `R` applied block by block.
    fn apply_r(&self, x_o: MatRef<'_, f64>, x_p: MatRef<'_, f64>) -> Mat<f64> {
        let uf = &self.factors;
        let x_c = linalg::select_rows(x_o, &uf.cut);
        let x_k = linalg::select_rows(x_o, &uf.kept);
        let blocks = [&uf.kc.r * &x_c, x_c.clone(), &uf.op.r * x_p, &uf.pk.r * &x_k];
        let refs: Vec<MatRef<'_, f64>> = blocks.iter().map(|b| b.as_ref()).collect();
        linalg::vstack(&refs)
    }

    /// Block-diagonal solve `[A_oo^{-1} f_o; A_pp^{-1} f_p]`.
    fn solve_blockdiag(&self, f: MatRef<'_, f64>) -> Result<(Mat<f64>, Mat<f64>)> {
        let no = self.factors.n_original;
        let x_o = self.base.solve(f.subrows(0, no))?;
        let f_p = f.subrows(no, f.nrows() - no);
        let x_p = match &self.app {
            Some(lu) => lu.solve(f_p),
            None => Mat::zeros(0, f.ncols()),
        };
        Ok((x_o, x_p))
    }

    /// Solves for a block of extended right-hand sides (`N_ext x r`).
    pub fn solve(&self, f: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if f.nrows() != self.n_extended() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side of length {} for N_ext = {}",
                f.nrows(),
                self.n_extended()
            )));
        }
        let (mut x_o, mut x_p) = self.solve_blockdiag(f)?;
        if let Some(cap) = &self.capacitance {
            let w = cap.solve(self.apply_r(x_o.as_ref(), x_p.as_ref()).as_ref());
            let m = self.z_o.ncols();
            x_o -= &self.z_o * w.as_ref().subrows(0, m);
            x_p -= &self.z_p * w.as_ref().subrows(m, w.nrows() - m);
        }
        Ok(linalg::vstack(&[x_o.as_ref(), x_p.as_ref()]))
    }
}

/// Precomputes `Z = blockdiag(A_oo, A_pp)^{-1} L` and factors the capacitance matrix.
pub fn build_perturbed_solver<'a>(
    base: &'a HbsSolver,
    a_pp: MatRef<'_, f64>,
    factors: UpdateFactors,
) -> Result<PerturbedSolver<'a>> {
    let uf = &factors;
    let no = uf.n_original;
    check_parts(base, a_pp, uf)?;
    let app = factor_app(a_pp)?;

    // Z_o is the one N_o-tall dense block; its columns are formed and solved
    // in chunks so the right-hand sides never exist all at once.
    let [a, b, c, _] = uf.group_sizes();
    let m = a + b + c;
    let mut z_o = Mat::<f64>::zeros(no, m);
    for j0 in (0..m).step_by(SOLVE_CHUNK) {
        let w = SOLVE_CHUNK.min(m - j0);
        let mut l_o = Mat::<f64>::zeros(no, w);
        for j in j0..j0 + w {
            if j < a {
                for (r, &i) in uf.kept.iter().enumerate() {
                    l_o[(i, j - j0)] = -uf.kc.l[(r, j)];
                }
            } else if j < a + b {
                for (r, &i) in uf.cut.iter().enumerate() {
                    l_o[(i, j - j0)] = -uf.b_cc[(r, j - a)];
                }
            } else {
                l_o.col_mut(j - j0).copy_from(uf.op.l.col(j - a - b));
            }
        }
        z_o.subcols_mut(j0, w).copy_from(&base.solve(l_o.as_ref())?);
    }
    let z_p = match &app {
        Some(lu) => lu.solve(uf.pk.l.as_ref()),
        None => Mat::zeros(0, 0),
    };
    finish(base, a_pp.to_owned(), app, factors, z_o, z_p)
}

/// Reassembles a solver from stored `Z` blocks; only `A_pp` and the
/// capacitance matrix are refactored.
pub fn perturbed_solver_from_parts<'a>(
    base: &'a HbsSolver,
    a_pp: Mat<f64>,
    factors: UpdateFactors,
    z_o: Mat<f64>,
    z_p: Mat<f64>,
) -> Result<PerturbedSolver<'a>> {
    check_parts(base, a_pp.as_ref(), &factors)?;
    let [a, b, c, d] = factors.group_sizes();
    let expect_p = if factors.n_added > 0 { (factors.n_added, d) } else { (0, 0) };
    if (z_o.nrows(), z_o.ncols()) != (factors.n_original, a + b + c) || (z_p.nrows(), z_p.ncols()) != expect_p {
        return Err(Error::DimensionMismatch(format!(
            "Z blocks are {}x{} and {}x{} for group sizes {:?}",
            z_o.nrows(),
            z_o.ncols(),
            z_p.nrows(),
            z_p.ncols(),
            factors.group_sizes()
        )));
    }
    let app = factor_app(a_pp.as_ref())?;
    finish(base, a_pp, app, factors, z_o, z_p)
}

fn check_parts(base: &HbsSolver, a_pp: MatRef<'_, f64>, uf: &UpdateFactors) -> Result<()> {
    let (no, np) = (uf.n_original, uf.n_added);
    if base.n() != no {
        return Err(Error::GeometryMismatch(format!(
            "original solver has N = {} but the factors expect {no}",
            base.n()
        )));
    }
    if a_pp.nrows() != np || a_pp.ncols() != np {
        return Err(Error::DimensionMismatch(format!(
            "A_pp is {}x{} for N_p = {np}",
            a_pp.nrows(),
            a_pp.ncols()
        )));
    }
    Ok(())
}

fn factor_app(a_pp: MatRef<'_, f64>) -> Result<Option<Lu>> {
    if a_pp.nrows() == 0 {
        return Ok(None);
    }
    Ok(Some(Lu::new(a_pp, None, "A_pp")?))
}

fn finish<'a>(
    base: &'a HbsSolver,
    a_pp: Mat<f64>,
    app: Option<Lu>,
    factors: UpdateFactors,
    z_o: Mat<f64>,
    z_p: Mat<f64>,
) -> Result<PerturbedSolver<'a>> {
    let (no, np) = (factors.n_original, factors.n_added);
    let mut solver = PerturbedSolver {
        base,
        factors,
        a_pp,
        app,
        z_o,
        z_p,
        capacitance_matrix: Mat::zeros(0, 0),
        capacitance: None,
    };
    let k = solver.rank();
    if k > 0 {
        let m = solver.z_o.ncols();
        let mut cap = Mat::<f64>::identity(k, k);
        for j0 in (0..k).step_by(SOLVE_CHUNK) {
            let w = SOLVE_CHUNK.min(k - j0);
            let mut block = Mat::<f64>::zeros(k, w);
            // Columns j0..j0+w of R Z, with Z = blockdiag(Z_o, Z_p) in group order.
            let (lo, hi) = (j0.min(m), (j0 + w).min(m));
            if hi > lo {
                let part = solver.apply_r(solver.z_o.as_ref().subcols(lo, hi - lo), Mat::<f64>::zeros(np, hi - lo).as_ref());
                block.subcols_mut(lo - j0, hi - lo).copy_from(&part);
            }
            let (lo, hi) = (j0.max(m), j0 + w);
            if hi > lo {
                let part = solver.apply_r(
                    Mat::<f64>::zeros(no, hi - lo).as_ref(),
                    solver.z_p.as_ref().subcols(lo - m, hi - lo),
                );
                block.subcols_mut(lo - j0, hi - lo).copy_from(&part);
            }
            let mut dst = cap.as_mut().subcols_mut(j0, w);
            dst += &block;
        }
        solver.capacitance = Some(Lu::new(cap.as_ref(), None, "capacitance matrix")?);
        solver.capacitance_matrix = cap;
    }
    Ok(solver)
}

/// Solves the extended system for one right-hand side and splits the result.
pub fn solve_perturbed(ps: &PerturbedSolver<'_>, f_ext: &[f64]) -> Result<ExtendedSolution> {
    let x = ps.solve(linalg::column(f_ext).as_ref())?;
    Ok(ExtendedSolution::split(linalg::to_vec(x.as_ref()), &ps.factors))
}
