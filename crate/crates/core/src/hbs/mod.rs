//! Hierarchically block separable (HBS) compression, fast apply and inversion.
//!
//! Rows are compressed with interpolation matrices `U_τ`, columns with `V_τ`.
//! For a leaf, `U_τ` maps the skeleton to all of `I_τ`; for a parent it maps
//! the skeleton to the concatenated skeletons of its children (nested bases).

mod invert;
mod tree;

use faer::{Mat, MatRef};

pub use invert::{invert, HbsSolver, NodeInverse};
pub use tree::{Tree, MIN_LEAF_SIZE};

use crate::error::{Error, Result};
use crate::geometry::{Discretization, Point};
use crate::kernel::{KernelBlock, Nystrom};
use crate::linalg;
use crate::lowrank::{row_id, IdOptions, ProxySurface};

/// Default leaf capacity.
pub const DEFAULT_LEAF_SIZE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HbsOptions {
    pub eps: f64,
    pub leaf_size: usize,
}

impl Default for HbsOptions {
    fn default() -> Self {
        Self {
            eps: 1e-10,
            leaf_size: DEFAULT_LEAF_SIZE,
        }
    }
}

/// Factors stored on one tree node.
#[derive(Clone, Debug)]
pub struct NodeFactors {
    /// Global row skeleton, a subset of `I_τ`.
    pub row_skel: Vec<usize>,
    /// Global column skeleton, a subset of `I_τ`.
    pub col_skel: Vec<usize>,
    /// Row interpolation `U_τ` (empty at the root).
    pub u: Mat<f64>,
    /// Column interpolation `V_τ` (empty at the root).
    pub v: Mat<f64>,
    /// Leaf diagonal block `A(I_τ, I_τ)` (empty on parents).
    pub d: Mat<f64>,
    /// Sibling couplings of the children of a parent:
    /// `A(row_skel(2τ), col_skel(2τ+1))` and `A(row_skel(2τ+1), col_skel(2τ))`.
    pub b12: Mat<f64>,
    pub b21: Mat<f64>,
    /// Proxy circle used to compress this node.
    pub proxy: Option<ProxySurface>,
}

impl Default for NodeFactors {
    fn default() -> Self {
        Self {
            row_skel: Vec::new(),
            col_skel: Vec::new(),
            u: Mat::zeros(0, 0),
            v: Mat::zeros(0, 0),
            d: Mat::zeros(0, 0),
            b12: Mat::zeros(0, 0),
            b21: Mat::zeros(0, 0),
            proxy: None,
        }
    }
}

impl NodeFactors {
    pub fn rank(&self) -> usize {
        self.row_skel.len()
    }
}

/// Compressed representation of `A` on one discretization.
#[derive(Clone, Debug)]
pub struct HbsRep {
    pub tree: Tree,
    pub eps: f64,
    /// Indexed by node id; entry 0 is unused.
    pub nodes: Vec<NodeFactors>,
}

impl HbsRep {
    pub fn n(&self) -> usize {
        self.tree.n()
    }

    pub fn node(&self, t: usize) -> &NodeFactors {
        &self.nodes[t]
    }

    /// Largest skeleton size over the tree.
    pub fn max_rank(&self) -> usize {
        self.nodes.iter().skip(2).map(|f| f.rank()).max().unwrap_or(0)
    }

    /// Total stored entries, a proxy for memory use.
    pub fn stored_entries(&self) -> usize {
        self.nodes
            .iter()
            .map(|f| {
                let s = |m: &Mat<f64>| m.nrows() * m.ncols();
                s(&f.u) + s(&f.v) + s(&f.d) + s(&f.b12) + s(&f.b21)
            })
            .sum()
    }

    /// Candidate rows compressed at node `t`: `I_τ` on leaves, children's skeletons above.
    pub fn row_candidates(&self, t: usize) -> Vec<usize> {
        match self.tree.children(t) {
            None => self.tree.range(t).collect(),
            Some((a, b)) => [&self.nodes[a].row_skel[..], &self.nodes[b].row_skel[..]].concat(),
        }
    }

    pub fn col_candidates(&self, t: usize) -> Vec<usize> {
        match self.tree.children(t) {
            None => self.tree.range(t).collect(),
            Some((a, b)) => [&self.nodes[a].col_skel[..], &self.nodes[b].col_skel[..]].concat(),
        }
    }

    /// Expands `U_τ C` down to all rows of `I_τ` (`|I_τ| x cols(C)`).
    pub fn expand_rows(&self, t: usize, c: MatRef<'_, f64>) -> Mat<f64> {
        self.expand(t, c, true)
    }

    /// Expands `V_τ C` down to all columns of `I_τ`.
    pub fn expand_cols(&self, t: usize, c: MatRef<'_, f64>) -> Mat<f64> {
        self.expand(t, c, false)
    }

    fn expand(&self, t: usize, c: MatRef<'_, f64>, rows: bool) -> Mat<f64> {
        let f = &self.nodes[t];
        let basis = if rows { &f.u } else { &f.v };
        let local = basis * c;
        match self.tree.children(t) {
            None => local,
            Some((a, b)) => {
                let ka = if rows { self.nodes[a].row_skel.len() } else { self.nodes[a].col_skel.len() };
                let top = self.expand(a, local.as_ref().subrows(0, ka), rows);
                let bot = self.expand(b, local.as_ref().subrows(ka, local.nrows() - ka), rows);
                linalg::vstack(&[top.as_ref(), bot.as_ref()])
            }
        }
    }
}

/// Builds the HBS representation of the Nyström matrix of `disc`.
pub fn compress(disc: &Discretization, opts: HbsOptions) -> Result<HbsRep> {
    compress_operator(&Nystrom::new(disc), disc, opts)
}

/// Builds the HBS representation of a kernel matrix whose rows and columns
/// both live on the nodes of `disc`.
pub fn compress_operator(op: &dyn KernelBlock, disc: &Discretization, opts: HbsOptions) -> Result<HbsRep> {
    if !(opts.eps > 0.0 && opts.eps < 1.0) {
        return Err(Error::InvalidTolerance(opts.eps));
    }
    let n = disc.len();
    if op.nrows() != n || op.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{} but the discretization has {n} nodes",
            op.nrows(),
            op.ncols()
        )));
    }
    let tree = Tree::new(n, opts.leaf_size)?;
    let diameter = disc.diameter();
    let mut rep = HbsRep {
        nodes: vec![NodeFactors::default(); tree.node_count() + 1],
        tree,
        eps: opts.eps,
    };

    for t in rep.tree.bottom_up() {
        let range = rep.tree.range(t);
        if let Some((a, b)) = rep.tree.children(t) {
            let b12 = op.block(&rep.nodes[a].row_skel, &rep.nodes[b].col_skel);
            let b21 = op.block(&rep.nodes[b].row_skel, &rep.nodes[a].col_skel);
            rep.nodes[t].b12 = b12;
            rep.nodes[t].b21 = b21;
        } else {
            let idx: Vec<usize> = range.clone().collect();
            rep.nodes[t].d = op.block(&idx, &idx);
        }
        if t == 1 {
            break;
        }

        let box_pts = &disc.nodes[range.clone()];
        let spacing = disc.weights[range.clone()].iter().sum::<f64>() / range.len() as f64;
        let proxy = ProxySurface::around(box_pts, spacing, diameter);
        let near: Vec<usize> = (0..n)
            .filter(|i| !range.contains(i) && proxy.contains(disc.nodes[*i]))
            .collect();

        let rows = rep.row_candidates(t);
        let cols = rep.col_candidates(t);
        let row_mat = linalg::hstack(&[
            op.block(&rows, &near).as_ref(),
            proxy.target_block(&gather(&disc.nodes, &rows)).as_ref(),
        ]);
        let col_mat = linalg::hstack(&[
            op.block(&near, &cols).transpose(),
            proxy
                .source_block(
                    &gather(&disc.nodes, &cols),
                    &gather(&disc.normals, &cols),
                    &gather(&disc.weights, &cols),
                )
                .as_ref(),
        ]);
        let mut rid = row_id(row_mat.as_ref(), IdOptions::tol(opts.eps))?;
        let mut cid = row_id(col_mat.as_ref(), IdOptions::tol(opts.eps))?;
        // Equal ranks keep the reduced blocks square.
        let k = rid.rank().max(cid.rank());
        if rid.rank() < k {
            rid = row_id(row_mat.as_ref(), IdOptions::tol(opts.eps).with_min_rank(k))?;
        }
        if cid.rank() < k {
            cid = row_id(col_mat.as_ref(), IdOptions::tol(opts.eps).with_min_rank(k))?;
        }
        let f = &mut rep.nodes[t];
        f.row_skel = rid.skeleton.iter().map(|&i| rows[i]).collect();
        f.col_skel = cid.skeleton.iter().map(|&i| cols[i]).collect();
        f.u = rid.interp;
        f.v = cid.interp;
        f.proxy = Some(proxy);
    }
    Ok(rep)
}

pub(crate) fn gather<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

/// `y = A x` for a block of right-hand sides `x` (`N x r`) in `O(N r)` work.
pub fn apply_hbs(rep: &HbsRep, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let n = rep.n();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch(format!("vector of length {} for N = {n}", x.nrows())));
    }
    let tree = &rep.tree;
    let r = x.ncols();
    let count = tree.node_count();
    // Upward pass: x̂_τ = V_τ^T x_τ.
    let mut xh: Vec<Mat<f64>> = vec![Mat::zeros(0, 0); count + 1];
    for t in tree.bottom_up() {
        if t == 1 {
            break;
        }
        let f = &rep.nodes[t];
        let local = match tree.children(t) {
            None => {
                let rg = tree.range(t);
                x.subrows(rg.start, rg.len()).to_owned()
            }
            Some((a, b)) => linalg::vstack(&[xh[a].as_ref(), xh[b].as_ref()]),
        };
        xh[t] = f.v.transpose() * &local;
    }
    // Downward pass: sibling coupling, then U expansion; leaves add D x.
    let mut yh: Vec<Mat<f64>> = vec![Mat::zeros(0, 0); count + 1];
    let mut y = Mat::<f64>::zeros(n, r);
    for t in tree.top_down() {
        let f = &rep.nodes[t];
        match tree.children(t) {
            Some((a, b)) => {
                let mut ya = &f.b12 * &xh[b];
                let mut yb = &f.b21 * &xh[a];
                if t != 1 {
                    let up = &f.u * &yh[t];
                    let ka = ya.nrows();
                    ya += up.as_ref().subrows(0, ka);
                    yb += up.as_ref().subrows(ka, up.nrows() - ka);
                }
                yh[a] = ya;
                yh[b] = yb;
            }
            None => {
                let rg = tree.range(t);
                let mut out = &f.d * x.subrows(rg.start, rg.len());
                if t != 1 {
                    out += &f.u * &yh[t];
                }
                y.subrows_mut(rg.start, rg.len()).copy_from(&out);
            }
        }
    }
    Ok(y)
}

/// Dense matrix represented by `rep`; only for testing small problems.
pub fn reconstruct(rep: &HbsRep) -> Result<Mat<f64>> {
    apply_hbs(rep, Mat::<f64>::identity(rep.n(), rep.n()).as_ref())
}

/// Node factors of `t` (ids are heap-numbered, root = 1).
pub fn get_node_factors(rep: &HbsRep, t: usize) -> Result<&NodeFactors> {
    if t == 0 || t > rep.tree.node_count() {
        return Err(Error::InvalidArgument(format!("node {t} is not in the tree")));
    }
    Ok(&rep.nodes[t])
}

/// Center and radius of the proxy circle of every node, for geometric queries.
pub fn proxy_circles(rep: &HbsRep) -> Vec<Option<(Point, f64)>> {
    rep.nodes
        .iter()
        .map(|f| f.proxy.as_ref().map(|p| (p.center, p.radius)))
        .collect()
}
