//! Low-rank update of an HBS solver for a locally perturbed curve.
//!
//! The perturbed system is embedded in the extended system on `[σ_o; σ_p]`
//! whose matrix is `blockdiag(A_oo, A_pp) + Q`, `Q = L R`. The column groups
//! of `L` (and row groups of `R`) are, in order:
//!
//! | group | rows of `L`       | columns of `R`    |
//! |-------|-------------------|-------------------|
//! | kc    | `-L_kc` on `I_k`  | `R_kc` on `I_c`   |
//! | cc    | `-B_cc` on `I_c`  | `I` on `I_c`      |
//! | op    | `L_op` on `I_o`   | `R_op` on `I_p`   |
//! | pk    | `L_pk` on `I_p`   | `R_pk` on `I_k`   |
//!
//! `B_cc` is `A_cc` with its diagonal zeroed, so the `c` rows of the extended
//! system read `A_ck σ_k + diag(A_cc) σ_c + A_cp σ_p = 0`. Nothing in the `k`
//! or `p` rows depends on `σ_c`.

mod factor;
mod solver;

use faer::Mat;
use sha2::{Digest, Sha256};

pub use factor::{RowFactor, Side};
pub use solver::{
    assemble_extended_rhs, build_perturbed_solver, perturbed_solver_from_parts, solve_perturbed, ExtendedSolution,
    PerturbedSolver,
};

use crate::error::{Error, Result};
use crate::geometry::{Discretization, PerturbedGeometry};
use crate::hbs::{HbsRep, DEFAULT_LEAF_SIZE};
use crate::kernel::{KernelBlock, Nystrom};
use crate::linalg;
use factor::{combine, far_from, hbs_group, maximal_boxes, near_tree_group, Group, Interaction};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateOptions {
    pub eps: f64,
    /// Leaf capacity of the fresh trees built over near points.
    pub leaf_size: usize,
    /// Share one near/far classification of the original tree between the
    /// `A_op` and `A_pk` factorizations instead of classifying twice.
    pub combined_traversal: bool,
}

impl Default for UpdateOptions {
    fn default() -> Self {
        Self {
            eps: 1e-10,
            leaf_size: DEFAULT_LEAF_SIZE,
            combined_traversal: false,
        }
    }
}

impl UpdateOptions {
    pub fn with_eps(eps: f64) -> Self {
        Self { eps, ..Self::default() }
    }
}

/// Low-rank factorization `M ≈ L R` of one off-diagonal block of `Q`.
#[derive(Clone, Debug)]
pub struct BlockFactor {
    pub l: Mat<f64>,
    pub r: Mat<f64>,
    /// Skeleton, as global original indices.
    pub skeleton: Vec<usize>,
    /// Stacked skeleton length before recompression.
    pub k0: usize,
}

impl BlockFactor {
    pub fn rank(&self) -> usize {
        self.skeleton.len()
    }

    pub fn dense(&self) -> Mat<f64> {
        &self.l * &self.r
    }

    fn empty(rows: usize, cols: usize) -> Self {
        Self {
            l: Mat::zeros(rows, 0),
            r: Mat::zeros(0, cols),
            skeleton: Vec::new(),
            k0: 0,
        }
    }
}

/// Identifies the geometry a set of factors was built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fingerprint {
    pub n_original: usize,
    pub n_added: usize,
    pub cut_start: usize,
    pub cut_len: usize,
    pub hash: u64,
}

impl Fingerprint {
    /// Digest of node coordinates, weights and the cut; stable across
    /// platforms and builds, so it can be checked against stored factors.
    pub fn of(pg: &PerturbedGeometry) -> Self {
        let mut h = Sha256::new();
        hash_disc(&pg.original, &mut h);
        hash_disc(&pg.added, &mut h);
        for &i in &pg.cut {
            h.update((i as u64).to_le_bytes());
        }
        let digest = h.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        Self {
            n_original: pg.n_original(),
            n_added: pg.n_added(),
            cut_start: pg.cut.first().copied().unwrap_or(0),
            cut_len: pg.cut.len(),
            hash: u64::from_le_bytes(head),
        }
    }
}

fn hash_disc(d: &Discretization, h: &mut Sha256) {
    for (p, w) in d.nodes.iter().zip(&d.weights) {
        for v in [p.x, p.y, *w] {
            h.update(v.to_le_bytes());
        }
    }
}

/// `Q = L R` kept in block form.
#[derive(Clone, Debug)]
pub struct UpdateFactors {
    pub fingerprint: Fingerprint,
    pub kept: Vec<usize>,
    pub cut: Vec<usize>,
    pub n_original: usize,
    pub n_added: usize,
    /// `A_kc ≈ L_kc R_kc`, rows `I_k`, columns `I_c`.
    pub kc: BlockFactor,
    /// `A_cc` with zero diagonal.
    pub b_cc: Mat<f64>,
    /// `A_op ≈ L_op R_op`, rows `I_o`, columns `I_p`.
    pub op: BlockFactor,
    /// `A_pk ≈ L_pk R_pk`, rows `I_p`, columns `I_k`.
    pub pk: BlockFactor,
}

impl UpdateFactors {
    pub fn n_extended(&self) -> usize {
        self.n_original + self.n_added
    }

    /// Total rank `k = k_kc + N_c + k_op + k_pk`.
    pub fn rank(&self) -> usize {
        self.kc.rank() + self.cut.len() + self.op.rank() + self.pk.rank()
    }

    /// Group widths in column order of `L`: kc, cc, op, pk.
    pub fn group_sizes(&self) -> [usize; 4] {
        [self.kc.rank(), self.cut.len(), self.op.rank(), self.pk.rank()]
    }

    /// Dense `L` (`N_ext x k`); for testing small problems.
    pub fn dense_l(&self) -> Mat<f64> {
        let no = self.n_original;
        let [a, b, c, d] = self.group_sizes();
        let mut l = Mat::<f64>::zeros(self.n_extended(), self.rank());
        for (r, &i) in self.kept.iter().enumerate() {
            for j in 0..a {
                l[(i, j)] = -self.kc.l[(r, j)];
            }
        }
        for (r, &i) in self.cut.iter().enumerate() {
            for j in 0..b {
                l[(i, a + j)] = -self.b_cc[(r, j)];
            }
        }
        l.submatrix_mut(0, a + b, no, c).copy_from(&self.op.l);
        l.submatrix_mut(no, a + b + c, self.n_added, d).copy_from(&self.pk.l);
        l
    }

    /// Dense `R` (`k x N_ext`); for testing small problems.
    pub fn dense_r(&self) -> Mat<f64> {
        let no = self.n_original;
        let [a, b, c, d] = self.group_sizes();
        let mut r = Mat::<f64>::zeros(self.rank(), self.n_extended());
        for (s, &j) in self.cut.iter().enumerate() {
            for i in 0..a {
                r[(i, j)] = self.kc.r[(i, s)];
            }
            r[(a + s, j)] = 1.0;
        }
        r.submatrix_mut(a + b, no, c, self.n_added).copy_from(&self.op.r);
        for (s, &j) in self.kept.iter().enumerate() {
            for i in 0..d {
                r[(a + b + c + i, j)] = self.pk.r[(i, s)];
            }
        }
        r
    }

    pub fn check(&self, pg: &PerturbedGeometry) -> Result<()> {
        if Fingerprint::of(pg) != self.fingerprint {
            return Err(Error::GeometryMismatch(
                "update factors were built for a different perturbation".into(),
            ));
        }
        Ok(())
    }
}

fn check_inputs(rep: &HbsRep, pg: &PerturbedGeometry, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidTolerance(eps));
    }
    if rep.n() != pg.n_original() {
        return Err(Error::GeometryMismatch(format!(
            "HBS representation has N = {} but the original curve has {} nodes",
            rep.n(),
            pg.n_original()
        )));
    }
    Ok(())
}

fn cut_range(pg: &PerturbedGeometry) -> std::ops::Range<usize> {
    match (pg.cut.first(), pg.cut.last()) {
        (Some(&a), Some(&b)) => a..b + 1,
        _ => 0..0,
    }
}

fn disjoint(a: &std::ops::Range<usize>, b: &std::ops::Range<usize>) -> bool {
    a.end <= b.start || b.end <= a.start
}

/// Factors `A_kc = A_oo(I_k, I_c)`: fresh compressions on leaves that
/// straddle the cut, HBS row bases on maximal boxes inside `Γ_k`, then
/// recompression of the stacked skeletons.
pub fn factor_a_kc(rep: &HbsRep, pg: &PerturbedGeometry, eps: f64) -> Result<BlockFactor> {
    check_inputs(rep, pg, eps)?;
    let (nk, nc) = (pg.kept.len(), pg.cut.len());
    if nc == 0 || nk == 0 {
        return Ok(BlockFactor::empty(nk, nc));
    }
    let cut_disc = pg.original.subset(&pg.cut);
    let m = Interaction {
        side: Side::Target,
        original: &pg.original,
        counterpart: &cut_disc,
    };
    let tree = &rep.tree;
    let cut = cut_range(pg);
    let mut groups: Vec<Group> = maximal_boxes(tree, &|t| disjoint(&tree.range(t), &cut))
        .into_iter()
        .map(|t| hbs_group(rep, t, Side::Target))
        .collect();
    for t in tree.leaves() {
        let range = tree.range(t);
        if disjoint(&range, &cut) || (cut.start <= range.start && range.end <= cut.end) {
            continue;
        }
        let rows: Vec<usize> = range.clone().filter(|i| !cut.contains(i)).collect();
        let (basis, skel) = m.compress(&rows, &rows, eps)?;
        groups.push(Group { rows, basis, skel });
    }
    let rf = combine(&m, groups, eps)?;
    debug_assert_eq!(rf.rows, pg.kept);
    let r = m.block(&rf.skeleton, &(0..nc).collect::<Vec<_>>());
    Ok(BlockFactor {
        l: rf.basis,
        r,
        skeleton: rf.skeleton,
        k0: rf.k0,
    })
}

/// Near/far classification of the original tree with respect to `Γ_p`.
fn far_flags(rep: &HbsRep, pg: &PerturbedGeometry) -> Vec<bool> {
    far_from(rep, &pg.added.nodes)
}

/// Factors `A_op`: HBS row bases on boxes far from `Γ_p`, a fresh nested
/// factorization over the remaining near points, one joint recompression.
pub fn factor_a_op(rep: &HbsRep, pg: &PerturbedGeometry, opts: UpdateOptions) -> Result<BlockFactor> {
    let far = far_flags(rep, pg);
    factor_a_op_with(rep, pg, opts, &far)
}

fn factor_a_op_with(rep: &HbsRep, pg: &PerturbedGeometry, opts: UpdateOptions, far: &[bool]) -> Result<BlockFactor> {
    check_inputs(rep, pg, opts.eps)?;
    let (no, np) = (pg.n_original(), pg.n_added());
    if np == 0 {
        return Ok(BlockFactor::empty(no, 0));
    }
    let m = Interaction {
        side: Side::Target,
        original: &pg.original,
        counterpart: &pg.added,
    };
    let boxes = maximal_boxes(&rep.tree, &|t| far[t]);
    factor_side(rep, &m, boxes, (0..no).collect(), opts)
}

/// Factors `A_pk` through its transpose: HBS column bases on boxes inside
/// `Γ_k` far from `Γ_p`, a fresh nested factorization over the rest of `Γ_k`.
pub fn factor_a_pk(rep: &HbsRep, pg: &PerturbedGeometry, opts: UpdateOptions) -> Result<BlockFactor> {
    let far = far_flags(rep, pg);
    factor_a_pk_with(rep, pg, opts, &far)
}

fn factor_a_pk_with(rep: &HbsRep, pg: &PerturbedGeometry, opts: UpdateOptions, far: &[bool]) -> Result<BlockFactor> {
    check_inputs(rep, pg, opts.eps)?;
    let (nk, np) = (pg.kept.len(), pg.n_added());
    if np == 0 || nk == 0 {
        return Ok(BlockFactor::empty(np, nk));
    }
    let m = Interaction {
        side: Side::Source,
        original: &pg.original,
        counterpart: &pg.added,
    };
    let tree = &rep.tree;
    let cut = cut_range(pg);
    let boxes = maximal_boxes(tree, &|t| far[t] && disjoint(&tree.range(t), &cut));
    let f = factor_side(rep, &m, boxes, pg.kept.clone(), opts)?;
    // A_pk = (A_pk^T)^T ≈ A_pk(:, J) basis^T.
    Ok(BlockFactor {
        l: f.r.transpose().to_owned(),
        r: f.l.transpose().to_owned(),
        skeleton: f.skeleton,
        k0: f.k0,
    })
}

/// Row factorization of `m` over `rows`: reused HBS boxes plus one near tree.
/// Returns `L` over `rows` and `R = M(J, :)`.
fn factor_side(
    rep: &HbsRep,
    m: &Interaction<'_>,
    boxes: Vec<usize>,
    rows: Vec<usize>,
    opts: UpdateOptions,
) -> Result<BlockFactor> {
    let mut covered = vec![false; rep.n()];
    let mut groups: Vec<Group> = Vec::with_capacity(boxes.len() + 1);
    for t in boxes {
        rep.tree.range(t).for_each(|i| covered[i] = true);
        groups.push(hbs_group(rep, t, m.side));
    }
    let near: Vec<usize> = rows.iter().copied().filter(|&i| !covered[i]).collect();
    if !near.is_empty() {
        groups.push(near_tree_group(m, &near, opts.leaf_size, opts.eps)?);
    }
    let rf = combine(m, groups, opts.eps)?;
    debug_assert_eq!(rf.rows, rows);
    let r = m.rows(&rf.skeleton);
    Ok(BlockFactor {
        l: rf.basis,
        r,
        skeleton: rf.skeleton,
        k0: rf.k0,
    })
}

/// `A_oo(I_c, I_c)` with its diagonal zeroed.
pub fn b_cc(pg: &PerturbedGeometry) -> Mat<f64> {
    let mut b = Nystrom::new(&pg.original).block(&pg.cut, &pg.cut);
    for i in 0..pg.cut.len() {
        b[(i, i)] = 0.0;
    }
    b
}

/// Assembles `Q = L R` in block form from its component factorizations.
pub fn assemble_q(
    pg: &PerturbedGeometry,
    kc: BlockFactor,
    b_cc: Mat<f64>,
    op: BlockFactor,
    pk: BlockFactor,
) -> Result<UpdateFactors> {
    let (nk, nc, no, np) = (pg.kept.len(), pg.cut.len(), pg.n_original(), pg.n_added());
    let shapes = [
        ("L_kc", kc.l.nrows(), nk),
        ("R_kc", kc.r.ncols(), nc),
        ("B_cc rows", b_cc.nrows(), nc),
        ("B_cc cols", b_cc.ncols(), nc),
        ("L_op", op.l.nrows(), no),
        ("R_op", op.r.ncols(), np),
        ("L_pk", pk.l.nrows(), np),
        ("R_pk", pk.r.ncols(), nk),
        ("kc rank", kc.l.ncols(), kc.r.nrows()),
        ("op rank", op.l.ncols(), op.r.nrows()),
        ("pk rank", pk.l.ncols(), pk.r.nrows()),
    ];
    for (what, got, want) in shapes {
        if got != want {
            return Err(Error::DimensionMismatch(format!("{what}: {got} != {want}")));
        }
    }
    Ok(UpdateFactors {
        fingerprint: Fingerprint::of(pg),
        kept: pg.kept.clone(),
        cut: pg.cut.clone(),
        n_original: no,
        n_added: np,
        kc,
        b_cc,
        op,
        pk,
    })
}

/// Smallest distance from an added node to an original node, relative to the
/// smaller of their quadrature weights, that the update accepts.
pub const MIN_SEPARATION: f64 = 1e-6;

/// The c-p and k-p blocks are evaluated with the plain kernel, which is only
/// accurate while added and original nodes stay apart on the scale of the
/// local spacing. A bump that reuses the cut parameters puts its end nodes
/// within rounding of the cut nodes; the extended system then carries
/// near-singular entries that no relative tolerance can compress.
fn check_separation(pg: &PerturbedGeometry) -> Result<()> {
    for (j, (y, wy)) in pg.added.nodes.iter().zip(&pg.added.weights).enumerate() {
        for (i, (x, wx)) in pg.original.nodes.iter().zip(&pg.original.weights).enumerate() {
            let r = MIN_SEPARATION * wx.min(*wy);
            if (*x - *y).norm_sq() < r * r {
                return Err(Error::CoincidentPoints { target: i, src: j });
            }
        }
    }
    Ok(())
}

/// Factors every block of `Q` for the perturbation `pg` of the curve
/// compressed in `rep`.
pub fn factor_update(rep: &HbsRep, pg: &PerturbedGeometry, opts: UpdateOptions) -> Result<UpdateFactors> {
    check_inputs(rep, pg, opts.eps)?;
    check_separation(pg)?;
    let kc = factor_a_kc(rep, pg, opts.eps)?;
    let (op, pk) = if opts.combined_traversal {
        let far = far_flags(rep, pg);
        (
            factor_a_op_with(rep, pg, opts, &far)?,
            factor_a_pk_with(rep, pg, opts, &far)?,
        )
    } else {
        (factor_a_op(rep, pg, opts)?, factor_a_pk(rep, pg, opts)?)
    };
    assemble_q(pg, kc, b_cc(pg), op, pk)
}

/// What a stored component must be rebuilt for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dependence {
    /// Only the original curve.
    Original,
    /// The original curve and the cut window.
    Cut,
    /// The shape of `Γ_p` alone; invariant under rigid motions.
    Shape,
    /// Where `Γ_p` sits relative to `Γ_o`.
    Placement,
}

/// Stored components and what invalidates each of them.
pub const MANIFEST: &[(&str, Dependence)] = &[
    ("hbs", Dependence::Original),
    ("hbs_inverse", Dependence::Original),
    ("L_kc", Dependence::Cut),
    ("R_kc", Dependence::Cut),
    ("B_cc", Dependence::Cut),
    ("A_pp_inverse", Dependence::Shape),
    ("L_op", Dependence::Placement),
    ("R_op", Dependence::Placement),
    ("L_pk", Dependence::Placement),
    ("R_pk", Dependence::Placement),
    ("A_inv_L", Dependence::Placement),
    ("capacitance", Dependence::Placement),
];

/// Dense `A_pp` (Nyström matrix of the added piece, not closed on its own).
pub fn a_pp(pg: &PerturbedGeometry) -> Mat<f64> {
    Nystrom::new(&pg.added).dense()
}

/// Relative Frobenius error of a block factorization against a dense block.
pub fn block_error(f: &BlockFactor, dense: &Mat<f64>) -> f64 {
    let norm = linalg::frobenius(dense.as_ref());
    if norm == 0.0 {
        return linalg::frobenius(f.dense().as_ref());
    }
    linalg::frobenius((f.dense() - dense).as_ref()) / norm
}
