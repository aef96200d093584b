//! Small dense helpers over `faer` shared by the solver modules.

use faer::linalg::solvers::{DenseSolveCore, PartialPivLu, ShapeCore, Solve};
use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// Partial-pivoting LU that refuses numerically singular input.
pub struct Lu {
    lu: PartialPivLu<f64>,
}

impl Lu {
    /// Factors `a`; `what` names the block in the singularity error.
    pub fn new(a: MatRef<'_, f64>, node: Option<usize>, what: &str) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{what}: LU of a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let n = u.nrows();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..n {
            let d = u[(i, i)].abs();
            if !d.is_finite() {
                lo = 0.0;
            }
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if n > 0 && (lo == 0.0 || lo <= 1e2 * f64::EPSILON * hi || !hi.is_finite()) {
            return Err(match node {
                Some(node) => Error::SingularBlock { node },
                None => Error::Singular(what.to_string()),
            });
        }
        Ok(Self { lu })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    pub fn solve(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.lu.solve(b)
    }

    pub fn solve_transpose(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.lu.solve_transpose(b)
    }

    pub fn inverse(&self) -> Mat<f64> {
        self.lu.inverse()
    }
}

pub fn select_rows(a: MatRef<'_, f64>, rows: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub fn select_cols(a: MatRef<'_, f64>, cols: &[usize]) -> Mat<f64> {
    Mat::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// Stacks blocks with equal row counts side by side.
pub fn hstack(blocks: &[MatRef<'_, f64>]) -> Mat<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.submatrix_mut(0, at, rows, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Stacks blocks with equal column counts on top of each other.
pub fn vstack(blocks: &[MatRef<'_, f64>]) -> Mat<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.submatrix_mut(at, 0, b.nrows(), cols).copy_from(b);
        at += b.nrows();
    }
    out
}

pub fn column(values: &[f64]) -> Mat<f64> {
    Mat::from_fn(values.len(), 1, |i, _| values[i])
}

pub fn to_vec(a: MatRef<'_, f64>) -> Vec<f64> {
    (0..a.nrows()).map(|i| a[(i, 0)]).collect()
}

pub fn frobenius(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// 2-norm condition number `s_max / s_min`; infinite when singular.
pub fn condition_number(a: MatRef<'_, f64>) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(1.0);
    }
    let s = a
        .singular_values()
        .map_err(|e| Error::Singular(format!("SVD did not converge: {e:?}")))?;
    let hi = s.iter().copied().fold(0.0, f64::max);
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if lo == 0.0 { f64::INFINITY } else { hi / lo })
}

/// `D_r A D_c` with every row and column scaled to unit max-norm, by a few
/// alternating sweeps. Zero rows and columns are left alone.
pub fn equilibrate(a: MatRef<'_, f64>) -> Mat<f64> {
    let mut m = a.to_owned();
    for _ in 0..4 {
        for i in 0..m.nrows() {
            let s = (0..m.ncols()).map(|j| m[(i, j)].abs()).fold(0.0, f64::max);
            if s > 0.0 {
                (0..m.ncols()).for_each(|j| m[(i, j)] /= s);
            }
        }
        for j in 0..m.ncols() {
            let col = m.col_mut(j);
            let s = col.as_ref().iter().map(|v| v.abs()).fold(0.0, f64::max);
            if s > 0.0 {
                col.iter_mut().for_each(|v| *v /= s);
            }
        }
    }
    m
}
