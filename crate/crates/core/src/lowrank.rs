//! Interpolative decompositions and proxy-surface compression.

use std::f64::consts::PI;

use faer::{Mat, MatRef};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg;

/// Default number of proxy points.
pub const PROXY_POINTS: usize = 75;
/// Proxy radius relative to the radius of the box's enclosing circle.
pub const PROXY_RATIO: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdOptions {
    /// Stop once `||W - P W(J,:)||_F <= tol * ||W||_F`.
    pub tol: f64,
    /// Keep at least this many rows (capped by the matrix size).
    pub min_rank: usize,
    /// Keep exactly this many rows, ignoring `tol` (capped by the matrix size).
    pub fixed_rank: Option<usize>,
    /// Measure `tol` against this norm instead of `||W||_F`, for blocks that are
    /// pieces of a larger matrix.
    pub reference_norm: Option<f64>,
}

impl IdOptions {
    pub fn tol(tol: f64) -> Self {
        Self {
            tol,
            min_rank: 0,
            fixed_rank: None,
            reference_norm: None,
        }
    }

    pub fn with_min_rank(mut self, k: usize) -> Self {
        self.min_rank = k;
        self
    }

    pub fn relative_to(mut self, norm: f64) -> Self {
        self.reference_norm = Some(norm);
        self
    }

    pub fn fixed(k: usize) -> Self {
        Self {
            tol: 0.5,
            min_rank: 0,
            fixed_rank: Some(k),
            reference_norm: None,
        }
    }
}

/// Row interpolative decomposition `W ≈ P W(J, :)` with `P(J, :) = I`.
#[derive(Clone, Debug)]
pub struct RowId {
    /// Skeleton rows `J`, in pivot order.
    pub skeleton: Vec<usize>,
    /// Interpolation matrix `P`, `m x k`, columns ordered like `skeleton`.
    pub interp: Mat<f64>,
    /// `||W - P W(J, :)||_F`.
    pub residual: f64,
    /// `||W||_F`.
    pub norm: f64,
}

impl RowId {
    pub fn rank(&self) -> usize {
        self.skeleton.len()
    }

    /// Rows outside the skeleton, ascending.
    pub fn redundant(&self) -> Vec<usize> {
        let m = self.interp.nrows();
        let mut in_skel = vec![false; m];
        for &j in &self.skeleton {
            in_skel[j] = true;
        }
        (0..m).filter(|&i| !in_skel[i]).collect()
    }
}

/// Row ID by Householder QR with column pivoting on `W^T`.
///
/// The residual equals the Frobenius norm of the trailing block `R22`, so the
/// tolerance is met exactly rather than estimated.
pub fn row_id(w: MatRef<'_, f64>, opts: IdOptions) -> Result<RowId> {
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidTolerance(opts.tol));
    }
    let (m, n) = (w.nrows(), w.ncols());
    // B = W^T, columns are rows of W.
    let mut b = w.transpose().to_owned();
    let norm = linalg::frobenius(w);
    let kmax = m.min(n);
    let target = opts.fixed_rank.map(|k| k.min(kmax));
    let min_rank = opts.min_rank.min(kmax);
    let thresh2 = (opts.tol * opts.reference_norm.unwrap_or(norm)).powi(2);

    let mut perm: Vec<usize> = (0..m).collect();
    let mut cn: Vec<f64> = (0..m).map(|c| sq(b.col_as_slice(c))).collect();
    let mut cn_ref = cn.clone();
    let mut r_diag0 = 0.0f64;
    let mut k = 0;
    let mut v = vec![0.0; n];
    loop {
        let rest: f64 = cn[k..].iter().sum::<f64>().max(0.0);
        let done = match target {
            Some(t) => k >= t,
            None => k >= kmax || (k >= min_rank && rest <= thresh2),
        };
        if done || k >= kmax {
            break;
        }
        let (p, &best) = cn[k..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, x)| (i + k, x))
            .unwrap();
        if best <= 0.0 || !best.is_finite() {
            break;
        }
        if p != k {
            perm.swap(k, p);
            cn.swap(k, p);
            cn_ref.swap(k, p);
            swap_cols(&mut b, k, p);
        }
        // Householder reflector zeroing B[k+1.., k].
        let col = b.col_as_slice_mut(k);
        let alpha = col[k];
        let tail: f64 = sq(&col[k + 1..]);
        let xnorm = (alpha * alpha + tail).sqrt();
        let beta = if alpha >= 0.0 { -xnorm } else { xnorm };
        if k == 0 {
            r_diag0 = xnorm;
        }
        if xnorm <= 1e-15 * r_diag0.max(f64::MIN_POSITIVE) {
            break;
        }
        let tau = (beta - alpha) / beta;
        let scale = 1.0 / (alpha - beta);
        v[k] = 1.0;
        for i in k + 1..n {
            v[i] = col[i] * scale;
        }
        col[k] = beta;
        for x in &mut col[k + 1..] {
            *x = 0.0;
        }
        for c in k + 1..m {
            let cc = b.col_as_slice_mut(c);
            let s = dot(&v[k..n], &cc[k..n]) * tau;
            for (x, &vi) in cc[k..n].iter_mut().zip(&v[k..n]) {
                *x -= s * vi;
            }
            // Downdate the trailing norm; recompute when cancellation sets in.
            let r = cc[k];
            cn[c] -= r * r;
            if cn[c] <= 1e-8 * cn_ref[c] {
                cn[c] = sq(&cc[k + 1..]);
                cn_ref[c] = cn[c];
            }
        }
        k += 1;
    }

    let residual = (k..m).map(|c| sq(&b.col_as_slice(c)[k..])).sum::<f64>().sqrt();

    // T = R11^{-1} R12 by back substitution; P(rest, :) = T^T.
    let mut t = Mat::<f64>::zeros(k, m - k);
    for c in 0..m - k {
        let rc = b.col_as_slice(k + c);
        for i in (0..k).rev() {
            let mut s = rc[i];
            for j in i + 1..k {
                s -= b[(i, j)] * t[(j, c)];
            }
            t[(i, c)] = s / b[(i, i)];
        }
    }
    let mut interp = Mat::<f64>::zeros(m, k);
    for (j, &row) in perm[..k].iter().enumerate() {
        interp[(row, j)] = 1.0;
    }
    for (c, &row) in perm[k..].iter().enumerate() {
        for j in 0..k {
            interp[(row, j)] = t[(j, c)];
        }
    }
    Ok(RowId {
        skeleton: perm[..k].to_vec(),
        interp,
        residual,
        norm,
    })
}

fn sq(x: &[f64]) -> f64 {
    dot(x, x)
}

/// Dot product with independent partial sums, so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn swap_cols(b: &mut Mat<f64>, i: usize, j: usize) {
    let (lo, hi) = (i.min(j), i.max(j));
    let n = b.nrows();
    let (left, right) = b.as_mut().split_at_col_mut(hi);
    let a = left.col_mut(lo).try_as_col_major_mut().unwrap().as_slice_mut();
    let c = right.col_mut(0).try_as_col_major_mut().unwrap().as_slice_mut();
    debug_assert_eq!(a.len(), n);
    a.swap_with_slice(c);
}

/// Smallest circle containing all points (Welzl, deterministic shuffle).
pub fn enclosing_circle(points: &[Point]) -> (Point, f64) {
    match points.len() {
        0 => return (Point::default(), 0.0),
        1 => return (points[0], 0.0),
        _ => {}
    }
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let mut c = pts[0];
    let mut r = 0.0;
    let inside = |c: Point, r: f64, p: Point| p.dist(c) <= r * (1.0 + 1e-12) + 1e-300;
    for i in 1..pts.len() {
        if inside(c, r, pts[i]) {
            continue;
        }
        c = pts[i];
        r = 0.0;
        for j in 0..i {
            if inside(c, r, pts[j]) {
                continue;
            }
            c = (pts[i] + pts[j]) * 0.5;
            r = pts[i].dist(c);
            for l in 0..j {
                if inside(c, r, pts[l]) {
                    continue;
                }
                (c, r) = circumcircle(pts[i], pts[j], pts[l]);
            }
        }
    }
    (c, r)
}

fn circumcircle(a: Point, b: Point, c: Point) -> (Point, f64) {
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let d = 2.0 * (bx * cy - by * cx);
    if d.abs() < 1e-300 {
        // Collinear: the widest pair spans the circle.
        let pairs = [(a, b), (a, c), (b, c)];
        let (p, q) = pairs
            .into_iter()
            .max_by(|x, y| x.0.dist(x.1).total_cmp(&y.0.dist(y.1)))
            .unwrap();
        let m = (p + q) * 0.5;
        return (m, p.dist(m));
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    let center = Point::new(a.x + ux, a.y + uy);
    (center, ux.hypot(uy))
}

/// Circle of equispaced proxy points standing in for all far-away interactions.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxySurface {
    pub center: Point,
    pub radius: f64,
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
}

impl ProxySurface {
    pub fn new(center: Point, radius: f64, count: usize) -> Self {
        let (points, normals) = (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                let n = Point::new(t.cos(), t.sin());
                (center + n * radius, n)
            })
            .unzip();
        Self {
            center,
            radius,
            points,
            normals,
        }
    }

    /// Proxy about the enclosing circle of `points`, `1.5x` its radius; boxes
    /// smaller than `1e-3 * diameter` use at least 3 local spacings instead.
    pub fn around(points: &[Point], spacing: f64, diameter: f64) -> Self {
        let (c, r) = enclosing_circle(points);
        let mut radius = PROXY_RATIO * r;
        if r < 1e-3 * diameter {
            radius = radius.max(3.0 * spacing);
        }
        Self::new(c, radius, PROXY_POINTS)
    }

    /// Strictly inside the proxy circle.
    pub fn contains(&self, p: Point) -> bool {
        p.dist(self.center) < self.radius
    }

    /// Quadrature-like weight of one proxy point.
    pub fn weight(&self) -> f64 {
        2.0 * PI * self.radius / self.points.len() as f64
    }

    /// Far field seen by targets: weighted poles `G(x_i, z_p)` and a constant.
    pub fn target_block(&self, targets: &[Point]) -> Mat<f64> {
        let w = self.weight();
        let n = self.points.len();
        Mat::from_fn(targets.len(), n + 1, |i, p| {
            if p == n {
                w
            } else {
                -w / (4.0 * PI) * (targets[i] - self.points[p]).norm_sq().ln()
            }
        })
    }

    /// Far field produced by sources: rows `w_j D(z_p, y_j, ν_j)`.
    pub fn source_block(&self, sources: &[Point], normals: &[Point], weights: &[f64]) -> Mat<f64> {
        Mat::from_fn(sources.len(), self.points.len(), |j, p| {
            let d = self.points[p] - sources[j];
            weights[j] * d.dot(normals[j]) / (2.0 * PI * d.norm_sq())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel_matrix(m: usize, n: usize) -> Mat<f64> {
        // Interaction between two separated clusters: numerically low rank.
        Mat::from_fn(m, n, |i, j| {
            let x = i as f64 / m as f64;
            let y = 3.0 + j as f64 / n as f64;
            1.0 / (x - y).abs()
        })
    }

    #[test]
    fn id_reconstructs_to_tolerance() {
        let w = kernel_matrix(60, 80);
        for tol in [1e-4, 1e-8, 1e-12] {
            let id = row_id(w.as_ref(), IdOptions::tol(tol)).unwrap();
            let approx = &id.interp * linalg::select_rows(w.as_ref(), &id.skeleton);
            let err = linalg::frobenius((&w - &approx).as_ref());
            assert!(err <= 10.0 * tol * id.norm, "tol {tol}: err {err}");
            assert!((err - id.residual).abs() <= 1e-12 * id.norm + 1e-3 * err);
        }
    }

    #[test]
    fn interp_has_identity_on_skeleton() {
        let w = kernel_matrix(30, 40);
        let id = row_id(w.as_ref(), IdOptions::tol(1e-8)).unwrap();
        for (j, &r) in id.skeleton.iter().enumerate() {
            for c in 0..id.rank() {
                assert_eq!(id.interp[(r, c)], if c == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn fixed_and_min_rank() {
        let w = kernel_matrix(20, 20);
        assert_eq!(row_id(w.as_ref(), IdOptions::fixed(7)).unwrap().rank(), 7);
        let id = row_id(w.as_ref(), IdOptions::tol(0.5).with_min_rank(5)).unwrap();
        assert!(id.rank() >= 5);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let w = Mat::<f64>::zeros(5, 7);
        let id = row_id(w.as_ref(), IdOptions::tol(1e-10)).unwrap();
        assert_eq!(id.rank(), 0);
        assert_eq!(id.interp.ncols(), 0);
    }

    #[test]
    fn bad_tolerance_rejected() {
        let w = kernel_matrix(4, 4);
        assert!(row_id(w.as_ref(), IdOptions::tol(0.0)).is_err());
        assert!(row_id(w.as_ref(), IdOptions::tol(1.5)).is_err());
    }

    #[test]
    fn enclosing_circle_of_square() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(0.5, 0.5),
        ];
        let (c, r) = enclosing_circle(&pts);
        assert!((c.x - 0.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
