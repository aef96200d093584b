use faer::{Mat, MatRef};

use super::HbsRep;
use crate::error::{Error, Result};
use crate::linalg::{self, Lu};

/// Factors of one node of the recursive Woodbury inverse.
///
/// With `D_τ` the (reduced) diagonal block and `D̂_τ = (V^T D^{-1} U)^{-1}`:
/// `E = D^{-1} U D̂`, `F^T = D̂ V^T D^{-1}`, `G = D^{-1} - D^{-1} U D̂ V^T D^{-1}`.
/// The root only stores `G = D^{-1}`.
#[derive(Clone, Debug)]
pub struct NodeInverse {
    pub e: Mat<f64>,
    pub ft: Mat<f64>,
    pub g: Mat<f64>,
    /// `D̂_τ`, which becomes a diagonal block of the parent's `D`.
    pub dhat: Mat<f64>,
}

impl Default for NodeInverse {
    fn default() -> Self {
        Self {
            e: Mat::zeros(0, 0),
            ft: Mat::zeros(0, 0),
            g: Mat::zeros(0, 0),
            dhat: Mat::zeros(0, 0),
        }
    }
}

/// Inverse of an [`HbsRep`], applied in `O(N)` per right-hand side.
#[derive(Clone, Debug)]
pub struct HbsSolver {
    pub rep: HbsRep,
    pub nodes: Vec<NodeInverse>,
}

/// Builds the telescoping inverse of `rep`, bottom-up.
pub fn invert(rep: &HbsRep) -> Result<HbsSolver> {
    let tree = &rep.tree;
    let mut nodes: Vec<NodeInverse> = vec![NodeInverse::default(); tree.node_count() + 1];
    for t in tree.bottom_up() {
        let f = &rep.nodes[t];
        let d = match tree.children(t) {
            None => f.d.clone(),
            Some((a, b)) => {
                let (ka, kb) = (nodes[a].dhat.nrows(), nodes[b].dhat.nrows());
                let mut d = Mat::<f64>::zeros(ka + kb, ka + kb);
                d.submatrix_mut(0, 0, ka, ka).copy_from(&nodes[a].dhat);
                d.submatrix_mut(ka, ka, kb, kb).copy_from(&nodes[b].dhat);
                d.submatrix_mut(0, ka, ka, kb).copy_from(&f.b12);
                d.submatrix_mut(ka, 0, kb, ka).copy_from(&f.b21);
                d
            }
        };
        let lu = Lu::new(d.as_ref(), Some(t), "diagonal block")?;
        if t == 1 {
            nodes[t].g = lu.inverse();
            break;
        }
        let dinv_u = lu.solve(f.u.as_ref());
        let vt_dinv = lu.solve_transpose(f.v.as_ref()).transpose().to_owned();
        let s = f.v.transpose() * &dinv_u;
        let dhat = Lu::new(s.as_ref(), Some(t), "reduced block")?.inverse();
        let e = &dinv_u * &dhat;
        let ft = &dhat * &vt_dinv;
        let g = lu.inverse() - &e * &vt_dinv;
        nodes[t] = NodeInverse { e, ft, g, dhat };
    }
    Ok(HbsSolver {
        rep: rep.clone(),
        nodes,
    })
}

impl HbsSolver {
    pub fn n(&self) -> usize {
        self.rep.n()
    }

    /// `x = A^{-1} b` for a block of right-hand sides (`N x r`).
    pub fn solve(&self, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let n = self.n();
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side of length {} for N = {n}",
                b.nrows()
            )));
        }
        let tree = &self.rep.tree;
        let count = tree.node_count();
        // Upward: reductions b̂_τ = F^T b_τ, where b_τ is a slice of `b` on
        // leaves and the stacked children's reductions above.
        let mut bh: Vec<Mat<f64>> = vec![Mat::zeros(0, 0); count + 1];
        let stacked = |(a, c): (usize, usize), bh: &[Mat<f64>]| linalg::vstack(&[bh[a].as_ref(), bh[c].as_ref()]);
        for t in tree.bottom_up() {
            if t == 1 {
                break;
            }
            let node = &self.nodes[t];
            bh[t] = match tree.children(t) {
                None => {
                    let rg = tree.range(t);
                    &node.ft * b.subrows(rg.start, rg.len())
                }
                Some(ch) => &node.ft * stacked(ch, &bh),
            };
        }
        // Downward: y_τ = E ŷ_τ + G b_τ, split among the children.
        let mut x = Mat::<f64>::zeros(n, b.ncols());
        let mut yh: Vec<Mat<f64>> = vec![Mat::zeros(0, 0); count + 1];
        for t in tree.top_down() {
            let node = &self.nodes[t];
            let mut y = match tree.children(t) {
                None => {
                    let rg = tree.range(t);
                    &node.g * b.subrows(rg.start, rg.len())
                }
                Some(ch) => &node.g * stacked(ch, &bh),
            };
            if t != 1 {
                y += &node.e * &yh[t];
                yh[t] = Mat::zeros(0, 0);
            }
            match tree.children(t) {
                None => {
                    let rg = tree.range(t);
                    x.subrows_mut(rg.start, rg.len()).copy_from(&y);
                }
                Some((a, c)) => {
                    let ka = self.nodes[a].dhat.nrows();
                    yh[a] = y.as_ref().subrows(0, ka).to_owned();
                    yh[c] = y.as_ref().subrows(ka, y.nrows() - ka).to_owned();
                }
            }
        }
        Ok(x)
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(linalg::to_vec(self.solve(linalg::column(b).as_ref())?.as_ref()))
    }
}
