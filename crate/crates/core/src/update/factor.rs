//! Row factorizations `M ≈ L M(J, :)` of the interactions between the
//! original nodes and a second point set, reusing HBS bases where valid.

use faer::{Mat, MatRef};

use crate::error::Result;
use crate::geometry::{Discretization, Point};
use crate::hbs::{gather, HbsRep, Tree};
use crate::linalg;
use crate::lowrank::{row_id, IdOptions, ProxySurface};

/// Role of the original nodes in the interaction being factored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Original nodes are targets (rows of `A_kc`, `A_op`); reuses `U` bases.
    Target,
    /// Original nodes are sources (columns of `A_pk`); reuses `V` bases.
    Source,
}

/// An interaction `M` whose rows are original nodes and whose columns are
/// the points of a counterpart set.
pub(crate) struct Interaction<'a> {
    pub side: Side,
    pub original: &'a Discretization,
    pub counterpart: &'a Discretization,
}

impl Interaction<'_> {
    pub fn ncols(&self) -> usize {
        self.counterpart.len()
    }

    fn counterpart_points(&self) -> &[Point] {
        &self.counterpart.nodes
    }

    /// `M(rows, cols)` with `rows` global original indices.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Mat<f64> {
        let (o, c) = (self.original, self.counterpart);
        match self.side {
            Side::Target => Mat::from_fn(rows.len(), cols.len(), |a, b| {
                let (x, j) = (o.nodes[rows[a]], cols[b]);
                c.weights[j] * dlp(x, c.nodes[j], c.normals[j])
            }),
            Side::Source => Mat::from_fn(rows.len(), cols.len(), |a, b| {
                let (i, y) = (rows[a], c.nodes[cols[b]]);
                o.weights[i] * dlp(y, o.nodes[i], o.normals[i])
            }),
        }
    }

    pub fn rows(&self, rows: &[usize]) -> Mat<f64> {
        let all: Vec<usize> = (0..self.ncols()).collect();
        self.block(rows, &all)
    }

    fn proxy_block(&self, proxy: &ProxySurface, rows: &[usize]) -> Mat<f64> {
        let o = self.original;
        match self.side {
            Side::Target => proxy.target_block(&gather(&o.nodes, rows)),
            Side::Source => proxy.source_block(
                &gather(&o.nodes, rows),
                &gather(&o.normals, rows),
                &gather(&o.weights, rows),
            ),
        }
    }

    /// Fresh skeletonization of `rows` against the counterpart: exact columns for
    /// counterpart points inside the proxy circle of `box_pts`, proxy columns
    /// for everything outside. Returns the interpolation and the global skeleton.
    pub fn compress(&self, rows: &[usize], box_pts: &[usize], eps: f64) -> Result<(Mat<f64>, Vec<usize>)> {
        let o = self.original;
        let pts = gather(&o.nodes, box_pts);
        let spacing = box_pts.iter().map(|&i| o.weights[i]).sum::<f64>() / box_pts.len().max(1) as f64;
        let proxy = ProxySurface::around(&pts, spacing, o.diameter());
        let (near, far): (Vec<usize>, Vec<usize>) =
            (0..self.ncols()).partition(|&j| proxy.contains(self.counterpart_points()[j]));
        let exact = self.block(rows, &near);
        let w = if far.is_empty() {
            exact
        } else {
            linalg::hstack(&[exact.as_ref(), self.proxy_block(&proxy, rows).as_ref()])
        };
        let id = row_id(w.as_ref(), IdOptions::tol(eps))?;
        let skel = id.skeleton.iter().map(|&i| rows[i]).collect();
        Ok((id.interp, skel))
    }
}

#[inline]
fn dlp(x: Point, y: Point, nu: Point) -> f64 {
    let d = x - y;
    d.dot(nu) / (2.0 * std::f64::consts::PI * d.norm_sq())
}

/// A basis over a contiguous-in-list group of original rows.
pub(crate) struct Group {
    /// Global original indices covered, in order.
    pub rows: Vec<usize>,
    /// `|rows| x |skel|` interpolation onto the skeleton.
    pub basis: Mat<f64>,
    pub skel: Vec<usize>,
}

/// Result of a row factorization over a set of original rows.
#[derive(Clone, Debug)]
pub struct RowFactor {
    pub side: Side,
    /// Global original indices of the rows of `basis`, ascending.
    pub rows: Vec<usize>,
    /// `M(rows, :) ≈ basis * M(skeleton, :)`.
    pub basis: Mat<f64>,
    pub skeleton: Vec<usize>,
    /// Stacked skeleton length before recompression.
    pub k0: usize,
}

impl RowFactor {
    pub fn rank(&self) -> usize {
        self.skeleton.len()
    }

}

/// Tolerance factor of the recompression passes. Pass errors add up and are
/// amplified by the box interpolation matrices when expanded to all rows; at
/// the bare tolerance the joint error of `A_op` reached about `13 eps`.
const RECOMPRESS_MARGIN: f64 = 0.1;

/// Sequential pairwise recompression of stacked skeletons.
///
/// Returns `L` (`sum |J_i| x k`) and the joint skeleton `J` with
/// `M([J_1; ...; J_m], :) ≈ L M(J, :)`.
pub(crate) fn recompress(m: &Interaction<'_>, skels: &[Vec<usize>], eps: f64) -> Result<(Mat<f64>, Vec<usize>)> {
    let mut iter = skels.iter();
    let Some(first) = iter.next() else {
        return Ok((Mat::zeros(0, 0), Vec::new()));
    };
    // Every pass is held to the norm of the whole stacked block M(K, :), so
    // small pieces are not resolved below the noise of the large ones.
    let all: Vec<usize> = skels.concat();
    let scale = linalg::frobenius(m.rows(&all).as_ref());
    let opts = IdOptions::tol(eps).relative_to(scale);
    let mut j: Vec<usize> = first.clone();
    let mut l = Mat::<f64>::identity(j.len(), j.len());
    for next in iter {
        let cand: Vec<usize> = j.iter().chain(next.iter()).copied().collect();
        let id = row_id(m.rows(&cand).as_ref(), opts)?;
        // L <- blockdiag(L, I) * P.
        let (ka, kb) = (j.len(), next.len());
        let top = &l * id.interp.as_ref().subrows(0, ka);
        let bot = id.interp.as_ref().subrows(ka, kb).to_owned();
        l = linalg::vstack(&[top.as_ref(), bot.as_ref()]);
        j = id.skeleton.iter().map(|&i| cand[i]).collect();
    }
    Ok((l, j))
}

/// Combines groups with a joint skeleton: every row of every group is
/// expressed through `M(J, :)`.
pub(crate) fn combine(m: &Interaction<'_>, groups: Vec<Group>, eps: f64) -> Result<RowFactor> {
    let k0 = groups.iter().map(|g| g.skel.len()).sum();
    let skels: Vec<Vec<usize>> = groups.iter().map(|g| g.skel.clone()).collect();
    let (l, skeleton) = recompress(m, &skels, RECOMPRESS_MARGIN * eps)?;
    let mut order: Vec<(usize, usize, usize)> = Vec::new(); // (global row, group, local row)
    for (gi, g) in groups.iter().enumerate() {
        order.extend(g.rows.iter().enumerate().map(|(li, &r)| (r, gi, li)));
    }
    order.sort_unstable();
    let k = skeleton.len();
    let mut basis = Mat::<f64>::zeros(order.len(), k);
    // Row block of L belonging to each group.
    let mut offset = 0;
    let mut blocks = Vec::with_capacity(groups.len());
    for g in &groups {
        let lg = l.as_ref().subrows(offset, g.skel.len());
        blocks.push(&g.basis * lg);
        offset += g.skel.len();
    }
    for (row, &(_, gi, li)) in order.iter().enumerate() {
        for c in 0..k {
            basis[(row, c)] = blocks[gi][(li, c)];
        }
    }
    Ok(RowFactor {
        side: m.side,
        rows: order.iter().map(|o| o.0).collect(),
        basis,
        skeleton,
        k0,
    })
}

/// Reused HBS box: its expanded basis and skeleton.
pub(crate) fn hbs_group(rep: &HbsRep, t: usize, side: Side) -> Group {
    let f = rep.node(t);
    let k = f.rank();
    let eye = Mat::<f64>::identity(k, k);
    let (basis, skel) = match side {
        Side::Target => (rep.expand_rows(t, eye.as_ref()), f.row_skel.clone()),
        Side::Source => (rep.expand_cols(t, eye.as_ref()), f.col_skel.clone()),
    };
    Group {
        rows: rep.tree.range(t).collect(),
        basis,
        skel,
    }
}

/// Fresh factorization of `points` (global original indices, ascending) with
/// a new binary tree: children's skeletons are recompressed at every parent.
pub(crate) fn near_tree_group(
    m: &Interaction<'_>,
    points: &[usize],
    leaf_size: usize,
    eps: f64,
) -> Result<Group> {
    let tree = Tree::new(points.len(), leaf_size)?;
    let count = tree.node_count();
    let mut skel: Vec<Vec<usize>> = vec![Vec::new(); count + 1];
    let mut interp: Vec<Mat<f64>> = vec![Mat::zeros(0, 0); count + 1];
    for t in tree.bottom_up() {
        let range = tree.range(t);
        let box_pts = &points[range.clone()];
        let rows: Vec<usize> = match tree.children(t) {
            None => box_pts.to_vec(),
            Some((a, b)) => [&skel[a][..], &skel[b][..]].concat(),
        };
        let (p, s) = m.compress(&rows, box_pts, eps)?;
        interp[t] = p;
        skel[t] = s;
    }
    let k = skel[1].len();
    let basis = expand(&tree, &interp, &skel, 1, Mat::<f64>::identity(k, k).as_ref());
    Ok(Group {
        rows: points.to_vec(),
        basis,
        skel: std::mem::take(&mut skel[1]),
    })
}

fn expand(tree: &Tree, interp: &[Mat<f64>], skel: &[Vec<usize>], t: usize, c: MatRef<'_, f64>) -> Mat<f64> {
    let local = &interp[t] * c;
    match tree.children(t) {
        None => local,
        Some((a, b)) => {
            let ka = skel[a].len();
            let top = expand(tree, interp, skel, a, local.as_ref().subrows(0, ka));
            let bot = expand(tree, interp, skel, b, local.as_ref().subrows(ka, local.nrows() - ka));
            linalg::vstack(&[top.as_ref(), bot.as_ref()])
        }
    }
}

/// `far[t]`: no counterpart point lies inside the proxy circle of `t` or of
/// any descendant. The root is never far.
pub(crate) fn far_from(rep: &HbsRep, pts: &[Point]) -> Vec<bool> {
    let tree = &rep.tree;
    let mut far = vec![false; tree.node_count() + 1];
    for t in tree.bottom_up() {
        if t == 1 {
            break;
        }
        let own = match &rep.node(t).proxy {
            Some(p) => !pts.iter().any(|&q| p.contains(q)),
            None => false,
        };
        far[t] = own
            && tree
                .children(t)
                .is_none_or(|(a, b)| far[a] && far[b]);
    }
    far
}

/// Maximal boxes satisfying `ok`, left to right.
pub(crate) fn maximal_boxes(tree: &Tree, ok: &dyn Fn(usize) -> bool) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![1usize];
    while let Some(t) = stack.pop() {
        if t != 1 && ok(t) {
            out.push(t);
        } else if let Some((a, b)) = tree.children(t) {
            stack.push(b);
            stack.push(a);
        }
    }
    out
}
